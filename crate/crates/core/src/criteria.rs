//! Split-merit mathematics: entropy, information gain, the fairness gains and
//! their combinations, and the Hoeffding bound.

use thiserror::Error;

use crate::fairness::GroupCounts;

/// Gains whose magnitude is below this are treated as exactly zero when
/// choosing between the piecewise cases of FIG and UFIG.
pub const ZERO_GAIN: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("delta must lie in (0, 1), got {0}")]
    Delta(f64),
    #[error("gamma must be finite and non-negative, got {0}")]
    Gamma(f64),
    #[error("tau must be finite and non-negative, got {0}")]
    Tau(f64),
    #[error("grace period must be at least 1")]
    GracePeriod,
    #[error("at least one numeric split point is required")]
    SplitPoints,
    #[error("the Hoeffding bound needs at least one observation")]
    ZeroCount,
    #[error("the Hoeffding bound needs a positive range, got {0}")]
    Range(f64),
    #[error("{0}")]
    Invalid(String),
}

/// Per-class counts for a binary class attribute.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClassDist {
    pub counts: [f64; 2],
}

impl ClassDist {
    pub fn new(first: f64, second: f64) -> Self {
        ClassDist {
            counts: [first, second],
        }
    }

    pub fn total(&self) -> f64 {
        self.counts[0] + self.counts[1]
    }

    pub fn add(&mut self, label: usize, weight: f64) {
        self.counts[label] += weight;
    }

    pub fn merge(&mut self, other: &ClassDist) {
        self.counts[0] += other.counts[0];
        self.counts[1] += other.counts[1];
    }

    /// True when more than one class has been observed.
    pub fn is_impure(&self) -> bool {
        self.counts[0] > 0.0 && self.counts[1] > 0.0
    }

    /// Majority class; ties go to `tie`.
    pub fn majority(&self, tie: usize) -> usize {
        let other = 1 - tie;
        if self.counts[other] > self.counts[tie] {
            other
        } else {
            tie
        }
    }
}

/// Base-2 entropy of a class distribution.
pub fn entropy(dist: &ClassDist) -> f64 {
    let total = dist.total();
    if total <= 0.0 {
        return 0.0;
    }
    dist.counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / total;
            -p * p.log2()
        })
        .sum()
}

/// Summary of one side of a partition: its size, class counts and community
/// counts.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Branch {
    pub weight: f64,
    pub class_dist: ClassDist,
    pub groups: GroupCounts,
}

impl Branch {
    pub fn new(class_dist: ClassDist, groups: GroupCounts) -> Self {
        Branch {
            weight: class_dist.total(),
            class_dist,
            groups,
        }
    }
}

/// A candidate partition of a node's instances.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionView {
    pub parent: Branch,
    pub branches: Vec<Branch>,
}

impl PartitionView {
    /// Builds a view whose parent is the sum of the branches.
    pub fn from_branches(branches: Vec<Branch>) -> Self {
        let mut parent = Branch::default();
        for b in &branches {
            parent.weight += b.weight;
            parent.class_dist.merge(&b.class_dist);
            parent.groups.add(&b.groups);
        }
        PartitionView { parent, branches }
    }
}

pub fn information_gain(partition: &PartitionView) -> f64 {
    let total = partition.parent.weight;
    if total <= 0.0 {
        return 0.0;
    }
    let children: f64 = partition
        .branches
        .iter()
        .map(|b| b.weight / total * entropy(&b.class_dist))
        .sum();
    entropy(&partition.parent.class_dist) - children
}

/// Weighted reduction of absolute discrimination.
pub fn fairness_gain(partition: &PartitionView) -> f64 {
    let total = partition.parent.weight;
    if total <= 0.0 {
        return 0.0;
    }
    let children: f64 = partition
        .branches
        .iter()
        .map(|b| b.weight / total * b.groups.discrimination().abs())
        .sum();
    partition.parent.groups.discrimination().abs() - children
}

/// Unweighted reduction of absolute discrimination: every branch counts in
/// full regardless of its size.
pub fn universal_fairness_gain(partition: &PartitionView) -> f64 {
    let children: f64 = partition
        .branches
        .iter()
        .map(|b| b.groups.discrimination().abs())
        .sum();
    partition.parent.groups.discrimination().abs() - children
}

pub fn fair_information_gain(ig: f64, fg: f64) -> f64 {
    if fg.abs() < ZERO_GAIN {
        ig
    } else {
        ig * fg
    }
}

pub fn universal_fair_information_gain(ig: f64, ufg: f64) -> f64 {
    if ufg.abs() < ZERO_GAIN {
        ig
    } else {
        ig * ufg
    }
}

pub fn adaptive_fair_information_gain(ig: f64, ufg: f64, gamma: f64) -> f64 {
    ig * (gamma * ufg).exp()
}

/// ε = sqrt(R² ln(1/δ) / 2n).
pub fn hoeffding_bound(range: f64, delta: f64, n: f64) -> Result<f64, ConfigError> {
    if n <= 0.0 {
        return Err(ConfigError::ZeroCount);
    }
    if range.is_nan() || range <= 0.0 {
        return Err(ConfigError::Range(range));
    }
    if !(delta > 0.0 && delta < 1.0) {
        // δ = 1 is the degenerate zero-width bound
        if delta == 1.0 {
            return Ok(0.0);
        }
        return Err(ConfigError::Delta(delta));
    }
    Ok((range * range * (1.0 / delta).ln() / (2.0 * n)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CriterionKind {
    /// Plain information gain (vanilla Hoeffding tree).
    InfoGain,
    /// IG × FG.
    Fig,
    /// IG × UFG.
    Ufig,
    /// IG · exp(γ · UFG).
    Afig,
}

impl CriterionKind {
    pub fn name(self) -> &'static str {
        match self {
            CriterionKind::InfoGain => "ig",
            CriterionKind::Fig => "fig",
            CriterionKind::Ufig => "ufig",
            CriterionKind::Afig => "afig",
        }
    }

    pub fn all() -> [CriterionKind; 4] {
        [
            CriterionKind::InfoGain,
            CriterionKind::Fig,
            CriterionKind::Ufig,
            CriterionKind::Afig,
        ]
    }
}

/// Gains of one candidate partition under a criterion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merit {
    pub info_gain: f64,
    /// FG for `Fig`, UFG for `Ufig`/`Afig`, 0 for `InfoGain`.
    pub fairness_gain: f64,
    pub merit: f64,
    /// Monotone transform of `merit` used for ranking; finite where `merit`
    /// overflows under large γ.
    pub rank: f64,
}

impl CriterionKind {
    /// Rank of the null split (merit 0).
    pub fn null_rank(self) -> f64 {
        match self {
            CriterionKind::Afig => f64::NEG_INFINITY,
            _ => 0.0,
        }
    }

    pub fn evaluate(self, partition: &PartitionView, gamma: f64) -> Merit {
        let ig = information_gain(partition);
        match self {
            CriterionKind::InfoGain => Merit {
                info_gain: ig,
                fairness_gain: 0.0,
                merit: ig,
                rank: ig,
            },
            CriterionKind::Fig => {
                let fg = fairness_gain(partition);
                let merit = fair_information_gain(ig, fg);
                Merit {
                    info_gain: ig,
                    fairness_gain: fg,
                    merit,
                    rank: merit,
                }
            }
            CriterionKind::Ufig => {
                let ufg = universal_fairness_gain(partition);
                let merit = universal_fair_information_gain(ig, ufg);
                Merit {
                    info_gain: ig,
                    fairness_gain: ufg,
                    merit,
                    rank: merit,
                }
            }
            CriterionKind::Afig => {
                let ufg = universal_fairness_gain(partition);
                let merit = adaptive_fair_information_gain(ig, ufg, gamma);
                // ln(merit) ordering; merits are never negative here
                let rank = if ig > 0.0 { ig.ln() + gamma * ufg } else { f64::NEG_INFINITY };
                Merit {
                    info_gain: ig,
                    fairness_gain: ufg,
                    merit,
                    rank,
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriterionConfig {
    pub kind: CriterionKind,
    /// Fairness weight of AFIG; ignored by the other kinds.
    pub gamma: f64,
    /// Hoeffding confidence δ.
    pub delta: f64,
    /// Tie-break threshold τ.
    pub tau: f64,
    /// Instances a leaf accumulates between split attempts.
    pub grace_period: u64,
    /// Candidate thresholds per numeric attribute.
    pub split_points: usize,
}

impl Default for CriterionConfig {
    fn default() -> Self {
        CriterionConfig {
            kind: CriterionKind::Fig,
            gamma: 1.0,
            delta: 1e-7,
            tau: 0.05,
            grace_period: 200,
            split_points: 10,
        }
    }
}

impl CriterionConfig {
    pub fn with_kind(kind: CriterionKind) -> Self {
        CriterionConfig {
            kind,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(ConfigError::Delta(self.delta));
        }
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(ConfigError::Gamma(self.gamma));
        }
        if !self.tau.is_finite() || self.tau < 0.0 {
            return Err(ConfigError::Tau(self.tau));
        }
        if self.grace_period == 0 {
            return Err(ConfigError::GracePeriod);
        }
        if self.split_points == 0 {
            return Err(ConfigError::SplitPoints);
        }
        Ok(())
    }

    /// Range R of the split criterion used by the Hoeffding bound:
    /// log2(#classes) = 1 for every kind.
    pub fn range(&self) -> f64 {
        1.0
    }
}
