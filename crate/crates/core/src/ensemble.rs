//! Sliding-window ensemble: every `window_size` instances a new tree is
//! trained on that window and pushed onto a bounded FIFO queue; stored trees
//! keep learning from everything that arrives after them.

use std::collections::VecDeque;
use std::sync::Arc;

use crate::criteria::{ConfigError, CriterionConfig};
use crate::stream::{Instance, Schema};
use crate::tree::{Complexity, FahtModel, Learner, ModelError, Prediction};

pub const DEFAULT_WINDOW_SIZE: usize = 1000;
pub const DEFAULT_CAPACITY: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub window_size: usize,
    pub capacity: usize,
    /// Base learner criterion: IG for Hoeffding-tree members, FIG for FAHT.
    pub base: CriterionConfig,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            window_size: DEFAULT_WINDOW_SIZE,
            capacity: DEFAULT_CAPACITY,
            base: CriterionConfig::default(),
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.window_size == 0 {
            return Err(ConfigError::Invalid("window size must be at least 1".into()));
        }
        if self.capacity == 0 {
            return Err(ConfigError::Invalid("ensemble capacity must be at least 1".into()));
        }
        self.base.validate()
    }
}

#[derive(Debug, Clone)]
pub struct Member {
    pub model: FahtModel,
    /// Index of the window the member was built from (0-based).
    pub window_index: u64,
}

#[derive(Debug, Clone)]
pub struct Ensemble {
    config: EnsembleConfig,
    schema: Arc<Schema>,
    members: VecDeque<Member>,
    buffer: Vec<Instance>,
    windows_completed: u64,
}

impl Ensemble {
    pub fn new(schema: Arc<Schema>, config: EnsembleConfig) -> Result<Self, ModelError> {
        config.validate()?;
        Ok(Ensemble {
            buffer: Vec::with_capacity(config.window_size),
            config,
            schema,
            members: VecDeque::new(),
            windows_completed: 0,
        })
    }

    pub fn members(&self) -> impl Iterator<Item = &Member> {
        self.members.iter()
    }

    pub fn member_count(&self) -> usize {
        self.members.len()
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.config
    }

    /// Member tree dumps, oldest first, each preceded by a
    /// `member\t<window_index>` line.
    pub fn dump(&self) -> String {
        let mut out = format!(
            "fairstream-ensemble\t{}\t{}\t{}\n",
            self.config.window_size,
            self.config.capacity,
            self.config.base.kind.name()
        );
        for m in &self.members {
            out.push_str(&format!("member\t{}\n", m.window_index));
            out.push_str(&m.model.dump());
        }
        out
    }

    /// Majority vote label and the share of members voting for it.
    pub fn vote(&self, instance: &Instance) -> (usize, f64) {
        let negative = self.schema.class.negative();
        if self.members.is_empty() {
            return (negative, 0.5);
        }
        let pos = self.schema.class.positive;
        let yes = self
            .members
            .iter()
            .filter(|m| m.model.predict(instance).label == pos)
            .count();
        let n = self.members.len();
        if 2 * yes > n {
            (pos, yes as f64 / n as f64)
        } else {
            (negative, (n - yes) as f64 / n as f64)
        }
    }

    fn close_window(&mut self) -> Result<(), ModelError> {
        let mut model = FahtModel::new(self.schema.clone(), self.config.base)?;
        for inst in &self.buffer {
            model.train(inst)?;
        }
        if self.members.len() == self.config.capacity {
            self.members.pop_front();
        }
        self.members.push_back(Member {
            model,
            window_index: self.windows_completed,
        });
        self.windows_completed += 1;
        self.buffer.clear();
        Ok(())
    }
}

impl Learner for Ensemble {
    fn schema(&self) -> &Schema {
        &self.schema
    }

    /// `positive_probability` is the share of members voting positive.
    fn predict(&self, instance: &Instance) -> Prediction {
        let (label, share) = self.vote(instance);
        let positive_probability = if self.schema.is_positive(label) { share } else { 1.0 - share };
        Prediction {
            label,
            positive_probability,
        }
    }

    fn train(&mut self, instance: &Instance) -> Result<(), ModelError> {
        if !self.schema.conforms(instance) {
            return Err(ModelError::SchemaMismatch {
                arrival_index: instance.arrival_index,
            });
        }
        for m in &mut self.members {
            m.model.train(instance)?;
        }
        self.buffer.push(instance.clone());
        if self.buffer.len() == self.config.window_size {
            self.close_window()?;
        }
        Ok(())
    }

    /// Summed over members.
    fn complexity(&self) -> Complexity {
        self.members.iter().fold(Complexity::default(), |acc, m| {
            let c = m.model.complexity();
            Complexity {
                node_count: acc.node_count + c.node_count,
                leaf_count: acc.leaf_count + c.leaf_count,
                depth: acc.depth.max(c.depth),
            }
        })
    }

    fn counter_cells(&self) -> usize {
        self.members.iter().map(|m| m.model.counter_cells()).sum()
    }
}
