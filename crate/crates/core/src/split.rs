//! Node statistics, split candidates, and the Hoeffding split decision shared
//! by every tree learner.

use std::cmp::Ordering;

use crate::criteria::{hoeffding_bound, Branch, ClassDist, CriterionConfig, CriterionKind, ZERO_GAIN};
use crate::fairness::GroupCounts;
use crate::observer::{GaussianObserver, NominalObserver, CLASSES};
use crate::stream::{AttributeKind, Instance, Schema, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum Observer {
    Nominal(NominalObserver),
    Numeric(GaussianObserver),
    /// Attribute excluded from the candidate set.
    Skipped,
}

impl Observer {
    fn cells(&self) -> usize {
        match self {
            Observer::Nominal(o) => o.cells(),
            Observer::Numeric(o) => o.cells(),
            Observer::Skipped => 0,
        }
    }
}

/// Sufficient statistics of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafStats {
    pub class_dist: ClassDist,
    pub groups: GroupCounts,
    pub observers: Vec<Observer>,
    /// Value of `seen()` at the last split attempt.
    pub last_split_attempt_at: u64,
}

impl LeafStats {
    pub fn new(schema: &Schema) -> Self {
        let observers = schema
            .attributes
            .iter()
            .map(|a| match (&a.kind, a.excluded) {
                (_, true) => Observer::Skipped,
                (AttributeKind::Nominal(values), false) => Observer::Nominal(NominalObserver::new(values.len())),
                (AttributeKind::Numeric, false) => Observer::Numeric(GaussianObserver::default()),
            })
            .collect();
        LeafStats {
            class_dist: ClassDist::default(),
            groups: GroupCounts::default(),
            observers,
            last_split_attempt_at: 0,
        }
    }

    /// Instances seen (n_l).
    pub fn seen(&self) -> u64 {
        self.class_dist.total() as u64
    }

    pub fn update(&mut self, schema: &Schema, instance: &Instance) {
        let label = instance.label;
        let positive = schema.is_positive(label);
        let deprived = schema.is_deprived(instance);
        self.class_dist.add(label, 1.0);
        if let Some(d) = deprived {
            self.groups.update(d, positive);
        }
        for (obs, value) in self.observers.iter_mut().zip(&instance.values) {
            match (obs, *value) {
                (Observer::Nominal(o), Value::Nominal(v)) => o.update(v as usize, label, deprived, positive),
                (Observer::Numeric(o), Value::Numeric(x)) => o.update(x, label, deprived, positive),
                _ => {}
            }
        }
    }

    /// Stored counter cells: the node's class and community tables plus every
    /// observer.
    pub fn counter_cells(&self) -> usize {
        CLASSES + 4 + self.observers.iter().map(Observer::cells).sum::<usize>()
    }

    /// True when a split attempt is due: both classes seen and a grace period
    /// elapsed since the last attempt.
    pub fn split_attempt_due(&self, grace_period: u64) -> bool {
        self.class_dist.is_impure() && self.seen() - self.last_split_attempt_at >= grace_period
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TestKind {
    /// Multiway test; `branch_of_value[v]` is the child for value `v`, `None`
    /// for values unseen when the split was made.
    Nominal { branch_of_value: Vec<Option<usize>> },
    /// Binary test: child 0 for `x ≤ threshold`, child 1 otherwise.
    Threshold(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitTest {
    pub attribute: usize,
    pub kind: TestKind,
    /// Branch weights at split time; the heaviest branch receives instances
    /// with a missing or unseen value.
    pub branch_weights: Vec<f64>,
}

impl SplitTest {
    pub fn branches(&self) -> usize {
        self.branch_weights.len()
    }

    pub fn majority_branch(&self) -> usize {
        let mut best = 0;
        for (i, w) in self.branch_weights.iter().enumerate() {
            if *w > self.branch_weights[best] {
                best = i;
            }
        }
        best
    }

    pub fn route(&self, instance: &Instance) -> usize {
        let value = instance.values[self.attribute];
        let branch = match (&self.kind, value) {
            (TestKind::Nominal { branch_of_value }, Value::Nominal(v)) => {
                branch_of_value.get(v as usize).copied().flatten()
            }
            (TestKind::Threshold(t), Value::Numeric(x)) => Some(if x <= *t { 0 } else { 1 }),
            _ => None,
        };
        branch.unwrap_or_else(|| self.majority_branch())
    }

    pub fn describe(&self, schema: &Schema) -> String {
        let attr = &schema.attributes[self.attribute];
        match &self.kind {
            TestKind::Threshold(t) => format!("{}<={}", attr.name, t),
            TestKind::Nominal { branch_of_value } => {
                let names: Vec<String> = match &attr.kind {
                    AttributeKind::Nominal(domain) => branch_of_value
                        .iter()
                        .enumerate()
                        .filter_map(|(v, b)| b.map(|b| format!("{}:{}", domain[v], b)))
                        .collect(),
                    AttributeKind::Numeric => Vec::new(),
                };
                format!("{}={{{}}}", attr.name, names.join("|"))
            }
        }
    }
}

/// A possible split of a node (or the null split when `attribute` is `None`).
#[derive(Debug, Clone, PartialEq)]
pub struct SplitCandidate {
    pub attribute: Option<usize>,
    pub threshold: Option<f64>,
    pub info_gain: f64,
    pub fairness_gain: f64,
    pub merit: f64,
    pub rank: f64,
    pub branches: Vec<Branch>,
    /// Nominal value of each branch (nominal candidates only).
    pub values: Vec<usize>,
}

impl SplitCandidate {
    pub fn null(kind: CriterionKind) -> Self {
        SplitCandidate {
            attribute: None,
            threshold: None,
            info_gain: 0.0,
            fairness_gain: 0.0,
            merit: 0.0,
            rank: kind.null_rank(),
            branches: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn is_null(&self) -> bool {
        self.attribute.is_none()
    }

    pub fn to_test(&self, schema: &Schema) -> Option<SplitTest> {
        let attribute = self.attribute?;
        let kind = match self.threshold {
            Some(t) => TestKind::Threshold(t),
            None => {
                let mut branch_of_value = vec![None; schema.attributes[attribute].arity()];
                for (b, &v) in self.values.iter().enumerate() {
                    branch_of_value[v] = Some(b);
                }
                TestKind::Nominal { branch_of_value }
            }
        };
        Some(SplitTest {
            attribute,
            kind,
            branch_weights: self.branches.iter().map(|b| b.weight).collect(),
        })
    }
}

/// Merit order: higher rank first; on exact ties the null split first, then
/// schema order.
fn candidate_order(a: &SplitCandidate, b: &SplitCandidate) -> Ordering {
    b.rank
        .total_cmp(&a.rank)
        .then_with(|| match (a.attribute, b.attribute) {
            (None, None) => Ordering::Equal,
            (None, Some(_)) => Ordering::Less,
            (Some(_), None) => Ordering::Greater,
            (Some(x), Some(y)) => x.cmp(&y),
        })
}

/// Evaluates every observed attribute under `config.kind` (with fairness
/// weight `gamma` for AFIG) and returns the candidates best-first, always
/// including the null split with merit 0. Candidates without information
/// gain are dropped: their merit is 0 under every kind.
pub fn enumerate_candidates(stats: &LeafStats, config: &CriterionConfig, gamma: f64) -> Vec<SplitCandidate> {
    let mut out = vec![SplitCandidate::null(config.kind)];
    for (attribute, obs) in stats.observers.iter().enumerate() {
        match obs {
            Observer::Nominal(o) => {
                if let Some((view, values)) = o.partition() {
                    let m = config.kind.evaluate(&view, gamma);
                    out.push(SplitCandidate {
                        attribute: Some(attribute),
                        threshold: None,
                        info_gain: m.info_gain,
                        fairness_gain: m.fairness_gain,
                        merit: m.merit,
                        rank: m.rank,
                        branches: view.branches,
                        values,
                    });
                }
            }
            Observer::Numeric(o) => {
                let mut best: Option<SplitCandidate> = None;
                for t in o.thresholds(config.split_points) {
                    let view = o.partition_at(t);
                    let m = config.kind.evaluate(&view, gamma);
                    if best.as_ref().is_none_or(|b| m.rank > b.rank) {
                        best = Some(SplitCandidate {
                            attribute: Some(attribute),
                            threshold: Some(t),
                            info_gain: m.info_gain,
                            fairness_gain: m.fairness_gain,
                            merit: m.merit,
                            rank: m.rank,
                            branches: view.branches,
                            values: Vec::new(),
                        });
                    }
                }
                out.extend(best);
            }
            Observer::Skipped => {}
        }
    }
    out.retain(|c| c.is_null() || c.info_gain > ZERO_GAIN);
    out.sort_by(candidate_order);
    out
}

/// Hoeffding test over ranked candidates: split on the best candidate when it
/// is not the null split and it beats the runner-up by more than ε, or ε has
/// shrunk below τ.
pub fn choose_split(candidates: &[SplitCandidate], seen: u64, config: &CriterionConfig) -> Option<usize> {
    let best = candidates.first()?;
    if best.is_null() || candidates.len() < 2 {
        return None;
    }
    let second = &candidates[1];
    let eps = hoeffding_bound(config.range(), config.delta, seen as f64).ok()?;
    let gap = best.merit - second.merit;
    // inf - inf is NaN and never clears the bound
    (gap > eps || eps < config.tau).then_some(0)
}

/// Runs a split attempt on `stats` if one is due, returning the test to
/// install.
pub fn attempt_split(stats: &mut LeafStats, schema: &Schema, config: &CriterionConfig, gamma: f64) -> Option<SplitTest> {
    if !stats.split_attempt_due(config.grace_period) {
        return None;
    }
    stats.last_split_attempt_at = stats.seen();
    let candidates = enumerate_candidates(stats, config, gamma);
    choose_split(&candidates, stats.seen(), config).and_then(|i| candidates[i].to_test(schema))
}
