//! Test-then-train evaluation with cumulative accuracy and prediction
//! discrimination.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::fairness::{mcnemar, phi_correlation, ContingencyPair, GroupCounts, McNemar, StatsError};
use crate::stream::Instance;
use crate::tree::{Learner, ModelError};

pub const DEFAULT_REPORT_EVERY: u64 = 1000;
pub const REPORT_HEADER: &str = "instance_index,cum_accuracy,cum_disc,node_count,gamma";
pub const SUMMARY_HEADER: &str =
    "learner,instances,accuracy,disc,abs_disc,node_count,leaf_count,depth,peak_counter_cells,deprived_granted,deprived_rejected,favored_granted,favored_rejected,final_gamma";
pub const LOG_HEADER: &str = "arrival_index,actual,predicted,positive_probability,deprived";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("report interval must be at least 1")]
    ReportInterval,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("prediction logs cover different streams ({left} vs {right} entries)")]
    LogMismatch { left: usize, right: usize },
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportRow {
    /// Instances processed so far.
    pub instance_index: u64,
    pub cum_accuracy: f64,
    pub cum_disc: f64,
    pub node_count: usize,
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoggedPrediction {
    pub arrival_index: u64,
    pub actual_positive: bool,
    pub predicted_positive: bool,
    pub positive_probability: f64,
    pub deprived: Option<bool>,
}

impl LoggedPrediction {
    pub fn correct(&self) -> bool {
        self.actual_positive == self.predicted_positive
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub instances: u64,
    pub accuracy: f64,
    pub disc: f64,
    pub node_count: usize,
    pub leaf_count: usize,
    pub depth: usize,
    /// Largest counter-cell total seen at any report row.
    pub peak_counter_cells: usize,
    /// Community counts of the predicted labels.
    pub prediction_groups: GroupCounts,
    pub final_gamma: Option<f64>,
    /// Zero on targets without a clock (wasm32-unknown-unknown).
    pub runtime: Duration,
}

impl Summary {
    pub fn abs_disc(&self) -> f64 {
        self.disc.abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrequentialReport {
    pub rows: Vec<ReportRow>,
    pub summary: Summary,
    pub log: Vec<LoggedPrediction>,
}

fn gamma_cell(g: Option<f64>) -> String {
    g.map_or_else(String::new, |g| g.to_string())
}

impl PrequentialReport {
    pub fn rows_csv(&self) -> String {
        let mut out = format!("{REPORT_HEADER}\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.instance_index,
                r.cum_accuracy,
                r.cum_disc,
                r.node_count,
                gamma_cell(r.gamma)
            );
        }
        out
    }

    /// Header plus one row; runtime is left out so the file is reproducible.
    pub fn summary_csv(&self, learner: &str) -> String {
        let s = &self.summary;
        let g = &s.prediction_groups;
        format!(
            "{SUMMARY_HEADER}\n{learner},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            s.instances,
            s.accuracy,
            s.disc,
            s.abs_disc(),
            s.node_count,
            s.leaf_count,
            s.depth,
            s.peak_counter_cells,
            g.deprived_pos,
            g.deprived_neg,
            g.favored_pos,
            g.favored_neg,
            gamma_cell(s.final_gamma)
        )
    }

    pub fn summary_text(&self, learner: &str) -> String {
        let s = &self.summary;
        let mut out = String::new();
        let _ = writeln!(out, "learner            {learner}");
        let _ = writeln!(out, "instances          {}", s.instances);
        let _ = writeln!(out, "accuracy           {:.4}", s.accuracy);
        let _ = writeln!(out, "discrimination     {:.4}", s.disc);
        let _ = writeln!(out, "nodes / leaves     {} / {}", s.node_count, s.leaf_count);
        let _ = writeln!(out, "depth              {}", s.depth);
        let _ = writeln!(out, "peak counter cells {}", s.peak_counter_cells);
        if let Some(g) = s.final_gamma {
            let _ = writeln!(out, "final gamma        {g}");
        }
        out
    }

    pub fn log_csv(&self) -> String {
        let mut out = format!("{LOG_HEADER}\n");
        for p in &self.log {
            let deprived = match p.deprived {
                Some(true) => "1",
                Some(false) => "0",
                None => "",
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                p.arrival_index,
                u8::from(p.actual_positive),
                u8::from(p.predicted_positive),
                p.positive_probability,
                deprived
            );
        }
        out
    }
}

/// Predicts each instance, scores it, then trains on it. A row is reported
/// every `report_every` instances and after the last one.
pub fn run_prequential<L, I>(learner: &mut L, stream: I, report_every: u64) -> Result<PrequentialReport, EvalError>
where
    L: Learner + ?Sized,
    I: IntoIterator<Item = Instance>,
{
    if report_every == 0 {
        return Err(EvalError::ReportInterval);
    }
    let start = (!cfg!(all(target_arch = "wasm32", target_os = "unknown"))).then(Instant::now);
    let mut rows = Vec::new();
    let mut log = Vec::new();
    let mut groups = GroupCounts::default();
    let mut correct = 0u64;
    let mut seen = 0u64;
    let mut peak_cells = learner.counter_cells();

    let row = |learner: &L, seen: u64, correct: u64, groups: &GroupCounts, peak: &mut usize| {
        *peak = (*peak).max(learner.counter_cells());
        ReportRow {
            instance_index: seen,
            cum_accuracy: correct as f64 / seen as f64,
            cum_disc: groups.discrimination(),
            node_count: learner.complexity().node_count,
            gamma: learner.gamma(),
        }
    };

    for instance in stream {
        let prediction = learner.predict(&instance);
        let schema = learner.schema();
        let predicted_positive = schema.is_positive(prediction.label);
        let deprived = schema.is_deprived(&instance);
        let entry = LoggedPrediction {
            arrival_index: instance.arrival_index,
            actual_positive: schema.is_positive(instance.label),
            predicted_positive,
            positive_probability: prediction.positive_probability,
            deprived,
        };
        correct += u64::from(prediction.label == instance.label);
        if let Some(d) = deprived {
            groups.update(d, predicted_positive);
        }
        log.push(entry);
        learner.train(&instance)?;
        seen += 1;
        if seen % report_every == 0 {
            rows.push(row(learner, seen, correct, &groups, &mut peak_cells));
        }
    }
    if seen % report_every != 0 {
        rows.push(row(learner, seen, correct, &groups, &mut peak_cells));
    }
    let complexity = learner.complexity();
    Ok(PrequentialReport {
        rows,
        summary: Summary {
            instances: seen,
            accuracy: if seen == 0 { 0.0 } else { correct as f64 / seen as f64 },
            disc: groups.discrimination(),
            node_count: complexity.node_count,
            leaf_count: complexity.leaf_count,
            depth: complexity.depth,
            peak_counter_cells: peak_cells,
            prediction_groups: groups,
            final_gamma: learner.gamma(),
            runtime: start.map_or(Duration::ZERO, |s| s.elapsed()),
        },
        log,
    })
}

fn check_logs(a: &[LoggedPrediction], b: &[LoggedPrediction]) -> Result<(), EvalError> {
    let same = a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.arrival_index == y.arrival_index);
    if same {
        Ok(())
    } else {
        Err(EvalError::LogMismatch {
            left: a.len(),
            right: b.len(),
        })
    }
}

/// Granted/rejected agreement table of two learners on the same stream,
/// optionally restricted to the deprived community.
pub fn contingency(
    a: &[LoggedPrediction],
    b: &[LoggedPrediction],
    restrict_to_deprived: bool,
) -> Result<ContingencyPair, EvalError> {
    check_logs(a, b)?;
    let mut pair = ContingencyPair::default();
    for (x, y) in a.iter().zip(b) {
        if restrict_to_deprived && x.deprived != Some(true) {
            continue;
        }
        pair.record(x.predicted_positive, y.predicted_positive);
    }
    Ok(pair)
}

pub fn compare_mcnemar(
    a: &[LoggedPrediction],
    b: &[LoggedPrediction],
    restrict_to_deprived: bool,
) -> Result<(ContingencyPair, McNemar), EvalError> {
    let pair = contingency(a, b, restrict_to_deprived)?;
    let test = mcnemar(&pair)?;
    Ok((pair, test))
}

/// Phi coefficients between the sensitive attribute (1 = deprived), the
/// predicted label and the actual label (1 = positive).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCorrelations {
    pub sensitive_predicted: Result<f64, StatsError>,
    pub predicted_actual: Result<f64, StatsError>,
    pub sensitive_actual: Result<f64, StatsError>,
}

/// Instances with a missing sensitive value are left out of the two
/// sensitive-attribute pairs.
pub fn boundary_correlations(log: &[LoggedPrediction]) -> BoundaryCorrelations {
    let known: Vec<&LoggedPrediction> = log.iter().filter(|p| p.deprived.is_some()).collect();
    let s: Vec<bool> = known.iter().map(|p| p.deprived == Some(true)).collect();
    let s_pred: Vec<bool> = known.iter().map(|p| p.predicted_positive).collect();
    let s_act: Vec<bool> = known.iter().map(|p| p.actual_positive).collect();
    let pred: Vec<bool> = log.iter().map(|p| p.predicted_positive).collect();
    let act: Vec<bool> = log.iter().map(|p| p.actual_positive).collect();
    BoundaryCorrelations {
        sensitive_predicted: phi_correlation(&s, &s_pred),
        predicted_actual: phi_correlation(&pred, &act),
        sensitive_actual: phi_correlation(&s, &s_act),
    }
}
