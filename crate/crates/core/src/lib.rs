//! Fairness-aware streaming decision trees.
//!
//! [`FahtModel`] grows a Hoeffding tree whose split merit trades information
//! gain against the change in statistical-parity discrimination;
//! [`CfahtModel`] adds drift monitoring, an adaptive fairness weight and
//! alternate subtrees; [`Ensemble`] runs windowed trees under majority vote.
//! [`run_prequential`] evaluates any of them test-then-train.

pub mod adaptive;
pub mod criteria;
pub mod ensemble;
pub mod fairness;
pub mod observer;
pub mod prequential;
pub mod split;
pub mod stream;
pub mod synth;
pub mod tree;

pub use adaptive::{adapt_gamma, deterioration, CfahtConfig, CfahtModel, DriftMonitor};
pub use criteria::{ConfigError, CriterionConfig, CriterionKind};
pub use ensemble::{Ensemble, EnsembleConfig};
pub use fairness::{discrimination, mcnemar, phi_correlation, spearman, GroupCounts};
pub use prequential::{run_prequential, PrequentialReport};
pub use stream::{load_dataset, order_by_attribute, read_all, Instance, LoadError, Schema, Value};
pub use tree::{FahtModel, Learner, ModelError, Prediction};
