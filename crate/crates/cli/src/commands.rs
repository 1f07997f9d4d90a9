use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use fairstream::fairness::StatsError;
use fairstream::prequential::{boundary_correlations, contingency, LoggedPrediction, SUMMARY_HEADER};
use fairstream::{mcnemar, order_by_attribute, read_all, run_prequential, spearman, Instance, PrequentialReport, Schema};
use rayon::prelude::*;

use crate::args::{Cli, Command, CompareArgs, DataArgs, LearnerKind, ModelArgs, RunArgs, SweepGammaArgs, SweepWindowArgs};
use crate::error::CliError;
use crate::learner::{check_flags, Built};
use crate::output::Outputs;

pub const THREADS_VAR: &str = "FAIRSTREAM_THREADS";

/// Result of a command before anything is written.
#[derive(Debug)]
pub struct Finished {
    pub outputs: Outputs,
    /// Text for stdout.
    pub message: String,
}

struct Stream {
    schema: Arc<Schema>,
    instances: Vec<Instance>,
}

fn load(data: &DataArgs) -> Result<Stream, CliError> {
    if data.report_every == 0 {
        return Err(CliError::usage("--report-every must be at least 1"));
    }
    let (schema, instances) = read_all(&data.data, &data.schema)?;
    let instances = match &data.order_by {
        Some(name) => order_by_attribute(&schema, instances, name)?,
        None => instances,
    };
    Ok(Stream {
        schema: Arc::new(schema),
        instances,
    })
}

/// Worker count from the raw `FAIRSTREAM_THREADS` value; `None` lets rayon
/// decide.
fn thread_cap(raw: Option<String>) -> Result<Option<usize>, CliError> {
    let Some(raw) = raw else {
        return Ok(None);
    };
    match raw.trim().parse::<usize>() {
        Ok(n) if n > 0 => Ok(Some(n)),
        _ => Err(CliError::Threads(raw)),
    }
}

fn pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap(std::env::var(THREADS_VAR).ok())? {
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| CliError::Pool(e.to_string()))
}

fn evaluate(
    learner: LearnerKind,
    model: &ModelArgs,
    stream: &Stream,
    report_every: u64,
) -> Result<(Built, PrequentialReport), CliError> {
    let mut built = Built::new(learner, model, stream.schema.clone())?;
    let report = run_prequential(built.learner(), stream.instances.iter().cloned(), report_every)?;
    Ok((built, report))
}

pub fn run(args: &RunArgs) -> Result<Finished, CliError> {
    check_flags(&[args.learner], &args.model)?;
    let stream = load(&args.data)?;
    let (built, report) = evaluate(args.learner, &args.model, &stream, args.data.report_every)?;
    let name = args.learner.name();
    let mut outputs = Outputs::default();
    outputs.add("report.csv", report.rows_csv());
    outputs.add("summary.csv", report.summary_csv(name));
    outputs.add("summary.txt", report.summary_text(name));
    outputs.add("tree.txt", built.dump());
    outputs.add("predictions.csv", report.log_csv());
    if let Some((gamma, events)) = built.adaptive_logs() {
        outputs.add("gamma.csv", gamma);
        outputs.add("events.csv", events);
    }
    Ok(Finished {
        message: report.summary_text(name),
        outputs,
    })
}

pub fn dump_tree(args: &RunArgs) -> Result<Finished, CliError> {
    check_flags(&[args.learner], &args.model)?;
    let stream = load(&args.data)?;
    let mut built = Built::new(args.learner, &args.model, stream.schema.clone())?;
    for inst in &stream.instances {
        built.learner().train(inst)?;
    }
    let complexity = built.learner().complexity();
    let mut outputs = Outputs::default();
    outputs.add("tree.txt", built.dump());
    Ok(Finished {
        outputs,
        message: format!(
            "{} trained on {} instances: {} nodes, {} leaves, depth {}\n",
            args.learner.name(),
            stream.instances.len(),
            complexity.node_count,
            complexity.leaf_count,
            complexity.depth
        ),
    })
}

fn cell(v: &Result<f64, StatsError>) -> String {
    v.map_or_else(|_| String::new(), |x| x.to_string())
}

fn shown(v: &Result<f64, StatsError>) -> String {
    match v {
        Ok(x) => format!("{x:.4}"),
        Err(e) => format!("undefined ({e})"),
    }
}

pub fn sweep_gamma(args: &SweepGammaArgs) -> Result<Finished, CliError> {
    if !args.learner.takes_gamma() {
        return Err(CliError::usage(format!(
            "sweep-gamma needs faht-afig or cfaht, not {}",
            args.learner.name()
        )));
    }
    if args.model.gamma.is_some() {
        return Err(CliError::usage("sweep-gamma takes --gammas, not --gamma"));
    }
    if args.gammas.len() < 2 {
        return Err(CliError::usage("sweep-gamma needs at least two gamma values"));
    }
    check_flags(&[args.learner], &args.model)?;
    let stream = load(&args.data)?;
    let reports: Vec<PrequentialReport> = pool()?.install(|| {
        args.gammas
            .par_iter()
            .map(|&g| {
                let model = ModelArgs {
                    gamma: Some(g),
                    ..args.model.clone()
                };
                evaluate(args.learner, &model, &stream, args.data.report_every).map(|(_, r)| r)
            })
            .collect::<Result<_, _>>()
    })?;

    let mut csv = String::from("gamma,accuracy,disc,abs_disc,node_count,final_gamma\n");
    for (g, r) in args.gammas.iter().zip(&reports) {
        let s = &r.summary;
        let final_gamma = s.final_gamma.map_or_else(String::new, |x| x.to_string());
        let _ = writeln!(csv, "{g},{},{},{},{},{final_gamma}", s.accuracy, s.disc, s.abs_disc(), s.node_count);
    }
    let abs: Vec<f64> = reports.iter().map(|r| r.summary.abs_disc()).collect();
    let acc: Vec<f64> = reports.iter().map(|r| r.summary.accuracy).collect();
    let rho_disc = spearman(&args.gammas, &abs);
    let rho_acc = spearman(&args.gammas, &acc);
    let mut text = format!("gamma sweep ({}, {} runs)\n", args.learner.name(), reports.len());
    for (g, r) in args.gammas.iter().zip(&reports) {
        let _ = writeln!(
            text,
            "  gamma {g:<10} accuracy {:.4}  disc {:.4}  nodes {}",
            r.summary.accuracy, r.summary.disc, r.summary.node_count
        );
    }
    let _ = writeln!(text, "spearman(gamma, |disc|)   {}", shown(&rho_disc));
    let _ = writeln!(text, "spearman(gamma, accuracy) {}", shown(&rho_acc));

    let mut outputs = Outputs::default();
    outputs.add("sweep_gamma.csv", csv);
    outputs.add(
        "sweep_gamma_trend.csv",
        format!("pair,spearman\ngamma_abs_disc,{}\ngamma_accuracy,{}\n", cell(&rho_disc), cell(&rho_acc)),
    );
    outputs.add("sweep_gamma.txt", text.clone());
    Ok(Finished { outputs, message: text })
}

pub fn sweep_window(args: &SweepWindowArgs) -> Result<Finished, CliError> {
    let flag = match args.learner {
        LearnerKind::Ensemble => args.model.ensemble_window.map(|_| "--ensemble-window"),
        LearnerKind::Cfaht if args.model.no_monitor => Some("--no-monitor"),
        LearnerKind::Cfaht => args.model.window.map(|_| "--window"),
        other => {
            return Err(CliError::usage(format!(
                "sweep-window needs ensemble or cfaht, not {}",
                other.name()
            )))
        }
    };
    if let Some(flag) = flag {
        return Err(CliError::usage(format!("sweep-window takes --windows, not {flag}")));
    }
    if args.windows.len() < 2 {
        return Err(CliError::usage("sweep-window needs at least two window sizes"));
    }
    check_flags(&[args.learner], &args.model)?;
    let stream = load(&args.data)?;
    let reports: Vec<PrequentialReport> = pool()?.install(|| {
        args.windows
            .par_iter()
            .map(|&w| {
                let mut model = args.model.clone();
                if args.learner == LearnerKind::Ensemble {
                    model.ensemble_window = Some(w);
                } else {
                    model.window = Some(w);
                }
                evaluate(args.learner, &model, &stream, args.data.report_every).map(|(_, r)| r)
            })
            .collect::<Result<_, _>>()
    })?;

    let mut csv = String::from("window,accuracy,disc,abs_disc,node_count\n");
    let mut text = format!("window sweep ({}, {} runs)\n", args.learner.name(), reports.len());
    for (w, r) in args.windows.iter().zip(&reports) {
        let s = &r.summary;
        let _ = writeln!(csv, "{w},{},{},{},{}", s.accuracy, s.disc, s.abs_disc(), s.node_count);
        let _ = writeln!(
            text,
            "  window {w:<8} accuracy {:.4}  disc {:.4}  nodes {}",
            s.accuracy, s.disc, s.node_count
        );
    }
    let mut outputs = Outputs::default();
    outputs.add("sweep_window.csv", csv);
    outputs.add("sweep_window.txt", text.clone());
    Ok(Finished { outputs, message: text })
}

fn deprived_granted(log: &[LoggedPrediction]) -> usize {
    log.iter()
        .filter(|p| p.deprived == Some(true) && p.predicted_positive)
        .count()
}

pub fn compare(args: &CompareArgs) -> Result<Finished, CliError> {
    let (a, b) = (args.learner_a, args.learner_b);
    check_flags(&[a, b], &args.model)?;
    let stream = load(&args.data)?;
    let restricted = |learner: LearnerKind| {
        let mut m = args.model.clone();
        for flag in crate::learner::foreign_flags(learner, &args.model) {
            match flag {
                "--gamma" => m.gamma = None,
                "--window" => m.window = None,
                "--drift-delta" => m.drift_delta = None,
                "--no-monitor" => m.no_monitor = false,
                "--ensemble-window" => m.ensemble_window = None,
                "--capacity" => m.capacity = None,
                _ => m.base = None,
            }
        }
        m
    };
    let (ra, rb) = pool()?.install(|| {
        rayon::join(
            || evaluate(a, &restricted(a), &stream, args.data.report_every),
            || evaluate(b, &restricted(b), &stream, args.data.report_every),
        )
    });
    let ((_, ra), (_, rb)) = (ra?, rb?);
    let (na, nb) = (format!("a:{}", a.name()), format!("b:{}", b.name()));

    let mut mc = String::from("scope,both_pos,a_pos_b_neg,a_neg_b_pos,both_neg,chi_squared,significant_05\n");
    let mut text = format!("compare {na} vs {nb} on {} instances\n", stream.instances.len());
    for (scope, deprived_only) in [("all", false), ("deprived", true)] {
        let pair = contingency(&ra.log, &rb.log, deprived_only)?;
        let test = mcnemar(&pair);
        let (chi, sig) = match &test {
            Ok(t) => (t.chi_squared.to_string(), u8::from(t.significant_at_05()).to_string()),
            Err(_) => (String::new(), String::new()),
        };
        let _ = writeln!(
            mc,
            "{scope},{},{},{},{},{chi},{sig}",
            pair.both_pos, pair.a_pos_b_neg, pair.a_neg_b_pos, pair.both_neg
        );
        let verdict = match &test {
            Ok(t) => format!("chi2 {:.4}{}", t.chi_squared, if t.significant_at_05() { " (p < 0.05)" } else { "" }),
            Err(e) => format!("undefined ({e})"),
        };
        let _ = writeln!(
            text,
            "mcnemar [{scope}] both+ {} a+b- {} a-b+ {} both- {}: {verdict}",
            pair.both_pos, pair.a_pos_b_neg, pair.a_neg_b_pos, pair.both_neg
        );
    }

    let mut corr = String::from(
        "learner,accuracy,disc,deprived_granted,phi_sensitive_predicted,phi_predicted_actual,phi_sensitive_actual\n",
    );
    for (name, r) in [(&na, &ra), (&nb, &rb)] {
        let phi = boundary_correlations(&r.log);
        let granted = deprived_granted(&r.log);
        let _ = writeln!(
            corr,
            "{name},{},{},{granted},{},{},{}",
            r.summary.accuracy,
            r.summary.disc,
            cell(&phi.sensitive_predicted),
            cell(&phi.predicted_actual),
            cell(&phi.sensitive_actual)
        );
        let _ = writeln!(
            text,
            "{name:<14} accuracy {:.4}  disc {:.4}  deprived granted {granted}\n{:14} phi(s, pred) {}  phi(pred, actual) {}  phi(s, actual) {}",
            r.summary.accuracy,
            r.summary.disc,
            "",
            shown(&phi.sensitive_predicted),
            shown(&phi.predicted_actual),
            shown(&phi.sensitive_actual)
        );
    }

    let mut summary = format!("{SUMMARY_HEADER}\n");
    for (name, r) in [(&na, &ra), (&nb, &rb)] {
        summary.push_str(r.summary_csv(name).lines().nth(1).unwrap_or_default());
        summary.push('\n');
    }

    let mut outputs = Outputs::default();
    outputs.add("mcnemar.csv", mc);
    outputs.add("correlations.csv", corr);
    outputs.add("summary.csv", summary);
    outputs.add("report_a.csv", ra.rows_csv());
    outputs.add("report_b.csv", rb.rows_csv());
    outputs.add("predictions_a.csv", ra.log_csv());
    outputs.add("predictions_b.csv", rb.log_csv());
    outputs.add("compare.txt", text.clone());
    Ok(Finished { outputs, message: text })
}

fn output_dir(command: &Command) -> &Path {
    match command {
        Command::Run(a) | Command::DumpTree(a) => &a.data.output,
        Command::SweepGamma(a) => &a.data.output,
        Command::SweepWindow(a) => &a.data.output,
        Command::Compare(a) => &a.data.output,
    }
}

pub fn execute(command: &Command) -> Result<Finished, CliError> {
    match command {
        Command::Run(a) => run(a),
        Command::SweepGamma(a) => sweep_gamma(a),
        Command::SweepWindow(a) => sweep_window(a),
        Command::Compare(a) => compare(a),
        Command::DumpTree(a) => dump_tree(a),
    }
}

/// Runs the command and writes its outputs. Returns the stdout text, which
/// ends with the wall-clock runtime.
pub fn run_cli(cli: &Cli) -> Result<String, CliError> {
    let start = Instant::now();
    let finished = execute(&cli.command)?;
    let dir = output_dir(&cli.command);
    let written = finished.outputs.commit(dir)?;
    let mut out = finished.message;
    let plural = if written.len() == 1 { "" } else { "s" };
    let _ = writeln!(out, "wrote {} file{plural} to {}", written.len(), dir.display());
    let _ = writeln!(out, "runtime {}", format_runtime(start.elapsed()));
    Ok(out)
}

fn format_runtime(d: Duration) -> String {
    format!("{:.3}s", d.as_secs_f64())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;
    use fairstream::stream::write_dataset;
    use fairstream::synth::biased_stream;
    use std::fs;
    use std::path::PathBuf;

    struct Fixture {
        dir: tempfile::TempDir,
        data: PathBuf,
        schema: PathBuf,
    }

    fn fixture() -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        let (schema, instances) = biased_stream(3000, 0.4, 1);
        let data = dir.path().join("loans.csv");
        let schema_path = dir.path().join("loans.schema");
        write_dataset(&schema, &instances, fs::File::create(&data).unwrap()).unwrap();
        fs::write(&schema_path, schema.to_text()).unwrap();
        Fixture {
            dir,
            data,
            schema: schema_path,
        }
    }

    impl Fixture {
        fn out(&self, name: &str) -> PathBuf {
            self.dir.path().join(name)
        }

        fn cli(&self, args: &[&str], out: &str) -> Cli {
            let mut argv = vec!["fairstream"];
            argv.extend_from_slice(args);
            let data = self.data.to_str().unwrap().to_string();
            let schema = self.schema.to_str().unwrap().to_string();
            let out = self.out(out).to_str().unwrap().to_string();
            let tail = ["--data", &data, "--schema", &schema, "--output", &out];
            Cli::try_parse_from(argv.iter().copied().chain(tail)).unwrap()
        }

        fn read(&self, out: &str, file: &str) -> String {
            fs::read_to_string(self.out(out).join(file)).unwrap()
        }
    }

    #[test]
    fn run_writes_all_outputs() {
        let f = fixture();
        let text = run_cli(&f.cli(&["run", "--learner", "faht", "--order-by", "area"], "o")).unwrap();
        assert!(text.contains("accuracy"));
        assert!(text.contains("runtime"));
        let mut names: Vec<String> = fs::read_dir(f.out("o"))
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        assert_eq!(names, ["predictions.csv", "report.csv", "summary.csv", "summary.txt", "tree.txt"]);
        let report = f.read("o", "report.csv");
        assert!(report.starts_with("instance_index,cum_accuracy,cum_disc,node_count,gamma\n1000,"));
        assert_eq!(report.lines().count(), 4);
        assert_eq!(f.read("o", "predictions.csv").lines().count(), 3001);
        assert!(f.read("o", "tree.txt").starts_with("fairstream-tree\t1\tfig\n"));
    }

    #[test]
    fn adaptive_run_adds_gamma_and_event_logs() {
        let f = fixture();
        run_cli(&f.cli(&["run", "--learner", "cfaht", "--gamma", "2", "--window", "300"], "o")).unwrap();
        assert!(f.read("o", "gamma.csv").starts_with("instance_index,gamma\n0,2\n"));
        assert!(f.read("o", "events.csv").starts_with("instance_index,action,depth,gamma\n"));
        assert!(f.read("o", "summary.csv").lines().nth(1).unwrap().starts_with("cfaht,3000,"));
    }

    #[test]
    fn gamma_is_rejected_for_learners_without_it() {
        let f = fixture();
        for learner in ["ht", "faht", "ensemble"] {
            let err = run_cli(&f.cli(&["run", "--learner", learner, "--gamma", "2"], "o")).unwrap_err();
            assert!(matches!(err, CliError::Usage(_)), "{learner}: {err}");
        }
        assert!(!f.out("o").exists());
    }

    #[test]
    fn learner_specific_flags_are_checked() {
        let f = fixture();
        for args in [
            vec!["run", "--learner", "faht", "--window", "500"],
            vec!["run", "--learner", "cfaht", "--capacity", "3"],
            vec!["run", "--learner", "cfaht", "--no-monitor", "--window", "500"],
            vec!["compare", "--learner-a", "ht", "--learner-b", "faht", "--gamma", "3"],
        ] {
            assert!(matches!(run_cli(&f.cli(&args, "o")), Err(CliError::Usage(_))), "{args:?}");
        }
        run_cli(&f.cli(&["compare", "--learner-a", "ht", "--learner-b", "faht-afig", "--gamma", "3"], "c")).unwrap();
    }

    #[test]
    fn load_errors_leave_no_output() {
        let f = fixture();
        let err = run_cli(&f.cli(&["run", "--learner", "ht", "--order-by", "nope"], "o")).unwrap_err();
        assert!(matches!(err, CliError::Load(_)));
        let err = run_cli(&f.cli(&["run", "--learner", "ht", "--order-by", "score"], "o")).unwrap_err();
        assert!(matches!(err, CliError::Load(_)));
        assert!(!f.out("o").exists());
    }

    #[test]
    fn gamma_sweep_rows_and_zero_gamma_matches_info_gain() {
        let f = fixture();
        run_cli(&f.cli(&["sweep-gamma", "--gammas", "100,1,0"], "s")).unwrap();
        let csv = f.read("s", "sweep_gamma.csv");
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows[0], "gamma,accuracy,disc,abs_disc,node_count,final_gamma");
        assert_eq!(rows.len(), 4);
        run_cli(&f.cli(&["run", "--learner", "ht"], "h")).unwrap();
        let ht_accuracy = f.read("h", "summary.csv").lines().nth(1).unwrap().split(',').nth(2).unwrap().to_string();
        assert_eq!(rows[3].split(',').nth(1).unwrap(), ht_accuracy);
        assert!(f.read("s", "sweep_gamma_trend.csv").starts_with("pair,spearman\n"));
    }

    #[test]
    fn gamma_sweep_needs_two_values_and_an_adaptive_criterion() {
        let f = fixture();
        assert!(run_cli(&f.cli(&["sweep-gamma", "--gammas", "1"], "s")).is_err());
        assert!(run_cli(&f.cli(&["sweep-gamma", "--learner", "faht"], "s")).is_err());
        assert!(run_cli(&f.cli(&["sweep-gamma", "--gamma", "1"], "s")).is_err());
    }

    #[test]
    fn window_sweep_for_ensemble_and_adaptive_tree() {
        let f = fixture();
        run_cli(&f.cli(&["sweep-window", "--windows", "250,500,1000", "--capacity", "4"], "e")).unwrap();
        assert_eq!(f.read("e", "sweep_window.csv").lines().count(), 4);
        run_cli(&f.cli(&["sweep-window", "--learner", "cfaht", "--windows", "200,400"], "c")).unwrap();
        assert!(f.read("c", "sweep_window.csv").lines().nth(1).unwrap().starts_with("200,"));
        assert!(run_cli(&f.cli(&["sweep-window", "--learner", "faht"], "x")).is_err());
        assert!(run_cli(&f.cli(&["sweep-window", "--ensemble-window", "100"], "x")).is_err());
    }

    #[test]
    fn comparing_a_learner_with_itself_leaves_mcnemar_undefined() {
        let f = fixture();
        let text = run_cli(&f.cli(&["compare", "--learner-a", "faht", "--learner-b", "faht"], "c")).unwrap();
        assert!(text.contains("undefined"));
        let mc = f.read("c", "mcnemar.csv");
        let deprived: Vec<&str> = mc.lines().nth(2).unwrap().split(',').collect();
        assert_eq!(deprived[0], "deprived");
        assert_eq!((deprived[2], deprived[3]), ("0", "0"));
        assert_eq!((deprived[5], deprived[6]), ("", ""));
        assert_eq!(f.read("c", "predictions_a.csv"), f.read("c", "predictions_b.csv"));
        assert_eq!(f.read("c", "correlations.csv").lines().count(), 3);
    }

    #[test]
    fn dump_tree_writes_only_the_dump() {
        let f = fixture();
        run_cli(&f.cli(&["dump-tree", "--learner", "ensemble", "--ensemble-window", "1000"], "d")).unwrap();
        let dump = f.read("d", "tree.txt");
        assert!(dump.starts_with("fairstream-ensemble\t1000\t10\tfig\n"));
        assert_eq!(dump.matches("member\t").count(), 3);
        assert_eq!(fs::read_dir(f.out("d")).unwrap().count(), 1);
    }

    #[test]
    fn thread_cap_parsing() {
        assert_eq!(thread_cap(None).unwrap(), None);
        assert_eq!(thread_cap(Some("3".into())).unwrap(), Some(3));
        assert!(thread_cap(Some("0".into())).is_err());
        assert!(thread_cap(Some("many".into())).is_err());
    }
}
