//! Browser demo: three operations exported to JavaScript, each returning a
//! JSON string.
//!
//! - [`simulate`] races HT, FAHT, FAHT with AFIG and the adaptive tree on a
//!   synthetic loan stream with historical bias.
//! - [`drift`] runs FAHT and the adaptive tree across an abrupt concept
//!   inversion.
//! - [`split_merits`] scores a two-way split from its community counts.

use std::sync::Arc;

use fairstream::adaptive::AdaptAction;
use fairstream::criteria::{
    fairness_gain, information_gain, universal_fairness_gain, Branch, ClassDist, PartitionView,
};
use fairstream::prequential::LoggedPrediction;
use fairstream::synth::{biased_stream, drift_stream};
use fairstream::{
    run_prequential, CfahtConfig, CfahtModel, CriterionConfig, CriterionKind, FahtModel, GroupCounts, Learner,
    PrequentialReport,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const MAX_INSTANCES: usize = 200_000;

#[derive(Debug, Serialize)]
pub struct Curve {
    pub learner: String,
    pub index: Vec<u64>,
    pub accuracy: Vec<f64>,
    pub disc: Vec<f64>,
    pub final_accuracy: f64,
    pub final_disc: f64,
    pub nodes: usize,
}

impl Curve {
    fn cumulative(learner: &str, report: &PrequentialReport, nodes: usize) -> Self {
        Curve {
            learner: learner.to_string(),
            index: report.rows.iter().map(|r| r.instance_index).collect(),
            accuracy: report.rows.iter().map(|r| r.cum_accuracy).collect(),
            disc: report.rows.iter().map(|r| r.cum_disc).collect(),
            final_accuracy: report.summary.accuracy,
            final_disc: report.summary.disc,
            nodes,
        }
    }

    /// Accuracy and discrimination per non-overlapping window.
    fn windowed(learner: &str, report: &PrequentialReport, window: usize, nodes: usize) -> Self {
        let mut curve = Curve {
            learner: learner.to_string(),
            index: Vec::new(),
            accuracy: Vec::new(),
            disc: Vec::new(),
            final_accuracy: report.summary.accuracy,
            final_disc: report.summary.disc,
            nodes,
        };
        for (i, chunk) in report.log.chunks(window).enumerate() {
            curve.index.push(((i * window) + chunk.len()) as u64);
            curve.accuracy.push(chunk.iter().filter(|p| p.correct()).count() as f64 / chunk.len() as f64);
            curve.disc.push(prediction_groups(chunk).discrimination());
        }
        curve
    }
}

fn prediction_groups(log: &[LoggedPrediction]) -> GroupCounts {
    let mut g = GroupCounts::default();
    for p in log {
        if let Some(d) = p.deprived {
            g.update(d, p.predicted_positive);
        }
    }
    g
}

fn report_every(n: usize) -> u64 {
    (n as u64 / 100).max(1)
}

/// Cumulative curves of four learners on the biased loan stream.
pub fn compare_learners(n: usize, bias: f64, gamma: f64, seed: u64) -> Vec<Curve> {
    let (schema, data) = biased_stream(n.min(MAX_INSTANCES), bias.clamp(0.0, 1.0), seed);
    let schema = Arc::new(schema);
    let every = report_every(data.len());
    let mut curves = Vec::new();
    for (name, kind) in [
        ("HT", CriterionKind::InfoGain),
        ("FAHT", CriterionKind::Fig),
        ("FAHT-AFIG", CriterionKind::Afig),
    ] {
        let config = CriterionConfig {
            gamma,
            ..CriterionConfig::with_kind(kind)
        };
        let mut m = FahtModel::new(schema.clone(), config).expect("valid config");
        let r = run_prequential(&mut m, data.iter().cloned(), every).expect("report interval is positive");
        curves.push(Curve::cumulative(name, &r, m.complexity().node_count));
    }
    let config = CfahtConfig {
        criterion: CriterionConfig {
            gamma,
            ..CriterionConfig::with_kind(CriterionKind::Afig)
        },
        ..Default::default()
    };
    let mut m = CfahtModel::new(schema, config).expect("valid config");
    let r = run_prequential(&mut m, data, every).expect("report interval is positive");
    curves.push(Curve::cumulative("2CFAHT", &r, m.complexity().node_count));
    curves
}

#[derive(Debug, Serialize)]
pub struct Event {
    pub index: u64,
    pub action: &'static str,
    pub depth: usize,
}

#[derive(Debug, Serialize)]
pub struct DriftResult {
    pub drift_at: usize,
    pub curves: Vec<Curve>,
    pub events: Vec<Event>,
}

pub fn drift_run(n: usize, drift_at: usize, noise: f64, seed: u64) -> DriftResult {
    let n = n.min(MAX_INSTANCES);
    let (schema, data) = drift_stream(n, drift_at.min(n), noise.clamp(0.0, 0.5), seed);
    let schema = Arc::new(schema);
    let window = (n / 100).max(100);
    let mut faht = FahtModel::new(schema.clone(), CriterionConfig::with_kind(CriterionKind::Afig)).expect("valid config");
    let rf = run_prequential(&mut faht, data.iter().cloned(), 1000).expect("report interval is positive");
    let mut cf = CfahtModel::new(schema, CfahtConfig::default()).expect("valid config");
    let rc = run_prequential(&mut cf, data, 1000).expect("report interval is positive");
    let events = cf
        .events()
        .iter()
        .map(|e| Event {
            index: e.instance_index,
            action: match e.action {
                AdaptAction::AlternateCreated => "alternate",
                AdaptAction::Replaced => "replaced",
                AdaptAction::Pruned => "pruned",
            },
            depth: e.depth,
        })
        .collect();
    DriftResult {
        drift_at,
        curves: vec![
            Curve::windowed("FAHT", &rf, window, faht.complexity().node_count),
            Curve::windowed("2CFAHT", &rc, window, cf.complexity().node_count),
        ],
        events,
    }
}

#[derive(Debug, Serialize, PartialEq)]
pub struct Merits {
    pub disc_parent: f64,
    pub disc_left: f64,
    pub disc_right: f64,
    pub ig: f64,
    pub fg: f64,
    pub ufg: f64,
    pub fig: f64,
    pub ufig: f64,
    pub afig: f64,
}

/// `counts` holds, for the left then the right branch, the
/// deprived-granted, deprived-rejected, favored-granted and favored-rejected
/// counts.
pub fn merits(counts: [f64; 8], gamma: f64) -> Merits {
    let branch = |c: &[f64]| {
        let groups = GroupCounts::new(c[0], c[1], c[2], c[3]);
        Branch::new(ClassDist::new(c[1] + c[3], c[0] + c[2]), groups)
    };
    let view = PartitionView::from_branches(vec![branch(&counts[..4]), branch(&counts[4..])]);
    let ig = information_gain(&view);
    let fg = fairness_gain(&view);
    let ufg = universal_fairness_gain(&view);
    Merits {
        disc_parent: view.parent.groups.discrimination(),
        disc_left: view.branches[0].groups.discrimination(),
        disc_right: view.branches[1].groups.discrimination(),
        ig,
        fg,
        ufg,
        fig: CriterionKind::Fig.evaluate(&view, gamma).merit,
        ufig: CriterionKind::Ufig.evaluate(&view, gamma).merit,
        afig: CriterionKind::Afig.evaluate(&view, gamma).merit,
    }
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("plain data serializes")
}

#[wasm_bindgen]
pub fn simulate(n: u32, bias: f64, gamma: f64, seed: u32) -> String {
    json(&compare_learners(n as usize, bias, gamma, u64::from(seed)))
}

#[wasm_bindgen]
pub fn drift(n: u32, drift_at: u32, noise: f64, seed: u32) -> String {
    json(&drift_run(n as usize, drift_at as usize, noise, u64::from(seed)))
}

fn parse_counts(counts: &[f64]) -> Result<[f64; 8], &'static str> {
    let counts: [f64; 8] = counts.try_into().map_err(|_| "expected eight counts")?;
    if counts.iter().any(|c| !c.is_finite() || *c < 0.0) {
        return Err("counts must be non-negative numbers");
    }
    if counts[..4].iter().sum::<f64>() == 0.0 || counts[4..].iter().sum::<f64>() == 0.0 {
        return Err("both branches need at least one instance");
    }
    Ok(counts)
}

#[wasm_bindgen]
pub fn split_merits(counts: &[f64], gamma: f64) -> Result<String, JsError> {
    let counts = parse_counts(counts).map_err(JsError::new)?;
    Ok(json(&merits(counts, gamma)))
}
