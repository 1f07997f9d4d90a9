#!/usr/bin/env python3
"""Build the Adult and Census-Income (KDD) stream files used by the benchmarks.

The raw UCI files are taken from two PyPI packages that vendor them
(`responsibly` for Adult, `themis-ml` for Census-Income). The script
downloads both wheels/sdists with pip, normalizes whitespace and class
labels, and writes gzipped CSV files (no header) plus schema sidecars
into data/.

    python3 scripts/prepare_data.py [--out data] [--archives DIR]
"""

import argparse
import gzip
import io
import subprocess
import sys
import tarfile
import tempfile
import zipfile
from pathlib import Path

ADULT_COLUMNS = [
    ("age", "numeric"),
    ("workclass", "nominal"),
    ("fnlwgt", "numeric"),
    ("education", "nominal"),
    ("education-num", "numeric"),
    ("marital-status", "nominal"),
    ("occupation", "nominal"),
    ("relationship", "nominal"),
    ("race", "nominal"),
    ("sex", "nominal"),
    ("capital-gain", "numeric"),
    ("capital-loss", "numeric"),
    ("hours-per-week", "numeric"),
    ("native-country", "nominal"),
    ("income", "nominal"),
]

CENSUS_COLUMNS = [
    ("age", "numeric"),
    ("class-of-worker", "nominal"),
    ("detailed-industry-recode", "nominal"),
    ("detailed-occupation-recode", "nominal"),
    ("education", "nominal"),
    ("wage-per-hour", "numeric"),
    ("enroll-in-edu-inst-last-wk", "nominal"),
    ("marital-stat", "nominal"),
    ("major-industry-code", "nominal"),
    ("major-occupation-code", "nominal"),
    ("race", "nominal"),
    ("hispanic-origin", "nominal"),
    ("sex", "nominal"),
    ("member-of-a-labor-union", "nominal"),
    ("reason-for-unemployment", "nominal"),
    ("full-or-part-time-employment-stat", "nominal"),
    ("capital-gains", "numeric"),
    ("capital-losses", "numeric"),
    ("dividends-from-stocks", "numeric"),
    ("tax-filer-stat", "nominal"),
    ("region-of-previous-residence", "nominal"),
    ("state-of-previous-residence", "nominal"),
    ("detailed-household-and-family-stat", "nominal"),
    ("detailed-household-summary-in-household", "nominal"),
    ("instance-weight", "numeric"),
    ("migration-code-change-in-msa", "nominal"),
    ("migration-code-change-in-reg", "nominal"),
    ("migration-code-move-within-reg", "nominal"),
    ("live-in-this-house-1-year-ago", "nominal"),
    ("migration-prev-res-in-sunbelt", "nominal"),
    ("num-persons-worked-for-employer", "numeric"),
    ("family-members-under-18", "nominal"),
    ("country-of-birth-father", "nominal"),
    ("country-of-birth-mother", "nominal"),
    ("country-of-birth-self", "nominal"),
    ("citizenship", "nominal"),
    ("own-business-or-self-employed", "nominal"),
    ("fill-inc-questionnaire-for-veterans-admin", "nominal"),
    ("veterans-benefits", "nominal"),
    ("weeks-worked-in-year", "numeric"),
    ("year", "nominal"),
    ("income", "nominal"),
]

MISSING = {"?", ""}


def fetch(package, workdir, cache=None):
    if cache is not None:
        workdir = cache
    else:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "--no-deps", "-q", "-d", str(workdir), package],
            check=True,
        )
    matches = sorted(workdir.glob(package.replace("-", "?") + "*")) + sorted(
        workdir.glob(package.replace("-", "_") + "*")
    )
    matches = [m for m in matches if m.is_file()]
    if not matches:
        raise SystemExit(f"pip download produced no archive for {package}")
    return matches[0]


def read_member(archive, suffix):
    if archive.suffix == ".whl":
        with zipfile.ZipFile(archive) as z:
            name = next(n for n in z.namelist() if n.endswith(suffix))
            return z.read(name).decode("utf-8")
    with tarfile.open(archive) as t:
        member = next(m for m in t.getmembers() if m.name.endswith(suffix))
        return t.extractfile(member).read().decode("utf-8")


def clean_rows(text, width, label_fix):
    rows = []
    for line in io.StringIO(text):
        cells = [c.strip() for c in line.strip().split(",")]
        if len(cells) != width:
            continue
        cells[-1] = label_fix(cells[-1])
        rows.append(cells)
    return rows


def write(out, stem, columns, rows, positive, sensitive, deprived, exclude):
    domains = {}
    for i, (name, kind) in enumerate(columns):
        if kind == "nominal":
            domains[name] = sorted({r[i] for r in rows if r[i] not in MISSING})
    with gzip.GzipFile(out / f"{stem}.csv.gz", "wb", mtime=0) as gz:
        for r in rows:
            gz.write((",".join(r) + "\n").encode("utf-8"))
    lines = [f"# {stem}: {len(rows)} instances, {len(columns) - 1} attributes"]
    for name, kind in columns:
        if kind == "nominal":
            lines.append(f"attribute={name},nominal:{'|'.join(domains[name])}")
        else:
            lines.append(f"attribute={name},numeric")
    class_name = columns[-1][0]
    lines += [
        f"class={class_name}",
        f"positive={positive}",
        f"sensitive={sensitive}",
        f"deprived={deprived}",
    ]
    lines += [f"exclude={e}" for e in exclude]
    (out / f"{stem}.schema").write_text("\n".join(lines) + "\n")
    print(f"{stem}: {len(rows)} rows")


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data"))
    parser.add_argument(
        "--archives",
        help="directory already holding the responsibly and themis-ml archives (skips pip download)",
    )
    args = parser.parse_args()
    cache = Path(args.archives) if args.archives else None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        adult_pkg = fetch("responsibly", tmp, cache)
        census_pkg = fetch("themis-ml", tmp, cache)

        adult = []
        for part in ("adult/adult.data", "adult/adult.test"):
            adult += clean_rows(read_member(adult_pkg, part), 15, lambda s: s.rstrip("."))
        write(out, "adult", ADULT_COLUMNS, adult, ">50K", "sex", "Female", ["sex"])

        census = []
        for part in ("census_income_1994_1995_train.csv", "census_income_1994_1995_test.csv"):
            census += clean_rows(read_member(census_pkg, part), 42, lambda s: s.rstrip("."))
        write(
            out,
            "census",
            CENSUS_COLUMNS,
            census,
            "50000+",
            "sex",
            "Female",
            ["sex", "instance-weight"],
        )


if __name__ == "__main__":
    main()
