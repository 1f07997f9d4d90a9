use std::fmt::Write as _;
use std::sync::Arc;

use fairstream::adaptive::{AdaptAction, DEFAULT_DRIFT_DELTA, DEFAULT_WINDOW};
use fairstream::ensemble::{DEFAULT_CAPACITY, DEFAULT_WINDOW_SIZE};
use fairstream::{
    CfahtConfig, CfahtModel, CriterionConfig, CriterionKind, Ensemble, EnsembleConfig, FahtModel, Learner, Schema,
};

use crate::args::{BaseKind, LearnerKind, ModelArgs};
use crate::error::CliError;

/// Flags given in `model` that do not apply to `learner`.
pub fn foreign_flags(learner: LearnerKind, model: &ModelArgs) -> Vec<&'static str> {
    let mut out = Vec::new();
    if model.gamma.is_some() && !learner.takes_gamma() {
        out.push("--gamma");
    }
    if learner != LearnerKind::Cfaht {
        if model.window.is_some() {
            out.push("--window");
        }
        if model.drift_delta.is_some() {
            out.push("--drift-delta");
        }
        if model.no_monitor {
            out.push("--no-monitor");
        }
    }
    if learner != LearnerKind::Ensemble {
        if model.ensemble_window.is_some() {
            out.push("--ensemble-window");
        }
        if model.capacity.is_some() {
            out.push("--capacity");
        }
        if model.base.is_some() {
            out.push("--base");
        }
    }
    out
}

/// Rejects flags that do not apply to any of `learners`.
pub fn check_flags(learners: &[LearnerKind], model: &ModelArgs) -> Result<(), CliError> {
    if model.no_monitor && (model.window.is_some() || model.drift_delta.is_some()) {
        return Err(CliError::usage("--no-monitor cannot be combined with --window or --drift-delta"));
    }
    let per_learner: Vec<Vec<&str>> = learners.iter().map(|&l| foreign_flags(l, model)).collect();
    let unused: Vec<&str> = per_learner[0]
        .iter()
        .copied()
        .filter(|f| per_learner.iter().all(|fs| fs.contains(f)))
        .collect();
    if unused.is_empty() {
        return Ok(());
    }
    let names: Vec<&str> = learners.iter().map(|l| l.name()).collect();
    Err(CliError::usage(format!(
        "{} not valid for {}",
        unused.join(", "),
        names.join(" / ")
    )))
}

fn criterion(kind: CriterionKind, model: &ModelArgs) -> CriterionConfig {
    CriterionConfig {
        kind,
        gamma: model.gamma.unwrap_or(CriterionConfig::default().gamma),
        delta: model.delta,
        tau: model.tau,
        grace_period: model.grace,
        split_points: model.split_points,
    }
}

pub enum Built {
    Tree(FahtModel),
    Adaptive(CfahtModel),
    Ensemble(Ensemble),
}

impl Built {
    /// Flags are assumed to have passed [`check_flags`].
    pub fn new(learner: LearnerKind, model: &ModelArgs, schema: Arc<Schema>) -> Result<Self, CliError> {
        Ok(match learner {
            LearnerKind::Ht => Built::Tree(FahtModel::new(schema, criterion(CriterionKind::InfoGain, model))?),
            LearnerKind::Faht => Built::Tree(FahtModel::new(schema, criterion(CriterionKind::Fig, model))?),
            LearnerKind::FahtAfig => Built::Tree(FahtModel::new(schema, criterion(CriterionKind::Afig, model))?),
            LearnerKind::Cfaht => {
                let config = CfahtConfig {
                    criterion: criterion(CriterionKind::Afig, model),
                    window: if model.no_monitor {
                        None
                    } else {
                        Some(model.window.unwrap_or(DEFAULT_WINDOW))
                    },
                    drift_delta: model.drift_delta.unwrap_or(DEFAULT_DRIFT_DELTA),
                };
                Built::Adaptive(CfahtModel::new(schema, config)?)
            }
            LearnerKind::Ensemble => {
                let base = match model.base.unwrap_or(BaseKind::Faht) {
                    BaseKind::Ht => CriterionKind::InfoGain,
                    BaseKind::Faht => CriterionKind::Fig,
                };
                let config = EnsembleConfig {
                    window_size: model.ensemble_window.unwrap_or(DEFAULT_WINDOW_SIZE),
                    capacity: model.capacity.unwrap_or(DEFAULT_CAPACITY),
                    base: criterion(base, model),
                };
                Built::Ensemble(Ensemble::new(schema, config)?)
            }
        })
    }

    pub fn learner(&mut self) -> &mut dyn Learner {
        match self {
            Built::Tree(m) => m,
            Built::Adaptive(m) => m,
            Built::Ensemble(m) => m,
        }
    }

    pub fn dump(&self) -> String {
        match self {
            Built::Tree(m) => m.dump(),
            Built::Adaptive(m) => m.dump(),
            Built::Ensemble(m) => m.dump(),
        }
    }

    /// Extra files of the adaptive tree: its gamma trajectory and event log.
    pub fn adaptive_logs(&self) -> Option<(String, String)> {
        let Built::Adaptive(m) = self else {
            return None;
        };
        let mut events = String::from("instance_index,action,depth,gamma\n");
        for e in m.events() {
            let action = match e.action {
                AdaptAction::AlternateCreated => "alternate_created",
                AdaptAction::Replaced => "replaced",
                AdaptAction::Pruned => "pruned",
            };
            let _ = writeln!(events, "{},{action},{},{}", e.instance_index, e.depth, e.gamma);
        }
        Some((m.gamma_log_csv(), events))
    }
}
