//! Seeded synthetic streams for tests, demos and drift experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::stream::{AttributeSpec, Instance, Schema, Value};

fn indexed(mut instances: Vec<Instance>) -> Vec<Instance> {
    for (i, inst) in instances.iter_mut().enumerate() {
        inst.arrival_index = i as u64;
    }
    instances
}

/// Class equals the binary attribute `a`; `b`, `n` and the sensitive
/// attribute `s` are noise.
pub fn concept_stream(n: usize, seed: u64) -> (Schema, Vec<Instance>) {
    let schema = Schema::new(
        vec![
            AttributeSpec::nominal("a", &["no", "yes"]),
            AttributeSpec::nominal("b", &["p", "q", "r"]),
            AttributeSpec::numeric("n"),
            AttributeSpec::nominal("s", &["f", "m"]).excluded(),
        ],
        "class",
        ["rejected", "granted"],
        "granted",
        4,
        "s",
        "f",
    )
    .expect("valid schema");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let instances = (0..n)
        .map(|_| {
            let a = rng.gen_range(0..2u32);
            let values = vec![
                Value::Nominal(a),
                Value::Nominal(rng.gen_range(0..3)),
                Value::Numeric(rng.gen_range(0.0..1.0)),
                Value::Nominal(rng.gen_range(0..2)),
            ];
            Instance::new(values, a as usize)
        })
        .collect();
    (schema, indexed(instances))
}

/// Positive cells of the drift concept, indexed `[x1][x2]`.
const DRIFT_CONCEPT: [[bool; 3]; 4] = [
    [true, true, false],
    [true, false, false],
    [false, false, false],
    [true, true, true],
];

/// Noiseless label of the drift concept before the drift point.
pub fn drift_concept(x1: usize, x2: usize) -> bool {
    DRIFT_CONCEPT[x1][x2]
}

/// Two nominal attributes `x1` (4 values) and `x2` (3 values) determine the
/// class; each label is flipped with probability `noise`. From instance
/// `drift_at` on, the concept is inverted. The sensitive attribute `s` is
/// excluded from splitting and skews the deprived community towards
/// negative cells.
pub fn drift_stream(n: usize, drift_at: usize, noise: f64, seed: u64) -> (Schema, Vec<Instance>) {
    let schema = Schema::new(
        vec![
            AttributeSpec::nominal("x1", &["a", "b", "c", "d"]),
            AttributeSpec::nominal("x2", &["u", "v", "w"]),
            AttributeSpec::nominal("s", &["dep", "fav"]).excluded(),
        ],
        "class",
        ["neg", "pos"],
        "pos",
        3,
        "s",
        "dep",
    )
    .expect("valid schema");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let instances = (0..n)
        .map(|t| {
            let x1 = rng.gen_range(0..4usize);
            let x2 = rng.gen_range(0..3usize);
            let deprived = rng.gen_bool(if x1 == 2 { 0.6 } else { 0.4 });
            let mut positive = drift_concept(x1, x2);
            if t >= drift_at {
                positive = !positive;
            }
            if rng.gen_bool(noise) {
                positive = !positive;
            }
            let values = vec![
                Value::Nominal(x1 as u32),
                Value::Nominal(x2 as u32),
                Value::Nominal(u32::from(!deprived)),
            ];
            Instance::new(values, usize::from(positive))
        })
        .collect();
    (schema, indexed(instances))
}

/// A loan-style stream with historical bias: the label depends on `score`
/// and `history`, and deprived applicants are additionally denied with
/// probability `bias`. `area` is a proxy strongly tied to the sensitive
/// attribute `sex`, which itself is excluded from splitting.
pub fn biased_stream(n: usize, bias: f64, seed: u64) -> (Schema, Vec<Instance>) {
    let schema = Schema::new(
        vec![
            AttributeSpec::numeric("score"),
            AttributeSpec::nominal("history", &["none", "fair", "good"]),
            AttributeSpec::nominal("area", &["north", "south", "east", "west"]),
            AttributeSpec::nominal("sex", &["female", "male"]).excluded(),
        ],
        "decision",
        ["rejected", "granted"],
        "granted",
        4,
        "sex",
        "female",
    )
    .expect("valid schema");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let instances = (0..n)
        .map(|_| {
            let female = rng.gen_bool(0.4);
            let area = if rng.gen_bool(0.8) {
                if female { rng.gen_range(0..2u32) } else { rng.gen_range(2..4u32) }
            } else {
                rng.gen_range(0..4u32)
            };
            let history = rng.gen_range(0..3u32);
            let score: f64 = rng.gen_range(0.0..100.0);
            let merit = score / 100.0 + 0.2 * history as f64;
            let mut granted = rng.gen_bool((merit / 1.4).clamp(0.02, 0.98));
            if female && granted && rng.gen_bool(bias) {
                granted = false;
            }
            let values = vec![
                Value::Numeric(score),
                Value::Nominal(history),
                Value::Nominal(area),
                Value::Nominal(u32::from(!female)),
            ];
            Instance::new(values, usize::from(granted))
        })
        .collect();
    (schema, indexed(instances))
}
