//! Community bookkeeping, statistical parity, and the statistics used to
//! compare classifiers (McNemar, phi correlation, Spearman rank correlation).

use thiserror::Error;

#[derive(Debug, Clone, Copy, Error, PartialEq, Eq)]
pub enum StatsError {
    #[error("McNemar's test is undefined when the two classifiers never disagree")]
    NoDiscordantPairs,
    #[error("correlation is undefined for a constant sequence")]
    ConstantSequence,
    #[error("sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least two observations")]
    TooShort,
}

/// Counts of the four communities formed by the sensitive attribute and the
/// (true or predicted) outcome. Counts are real-valued because branch
/// statistics of numeric splits are Gaussian mass estimates.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GroupCounts {
    /// s⁺: deprived and granted.
    pub deprived_pos: f64,
    /// s⁻: deprived and rejected.
    pub deprived_neg: f64,
    /// s̄⁺: favored and granted.
    pub favored_pos: f64,
    /// s̄⁻: favored and rejected.
    pub favored_neg: f64,
}

impl GroupCounts {
    pub fn new(deprived_pos: f64, deprived_neg: f64, favored_pos: f64, favored_neg: f64) -> Self {
        GroupCounts {
            deprived_pos,
            deprived_neg,
            favored_pos,
            favored_neg,
        }
    }

    pub fn total(&self) -> f64 {
        self.deprived_pos + self.deprived_neg + self.favored_pos + self.favored_neg
    }

    pub fn deprived_total(&self) -> f64 {
        self.deprived_pos + self.deprived_neg
    }

    pub fn favored_total(&self) -> f64 {
        self.favored_pos + self.favored_neg
    }

    pub fn update(&mut self, is_deprived: bool, is_positive: bool) {
        *self.cell_mut(is_deprived, is_positive) += 1.0;
    }

    pub fn updated(mut self, is_deprived: bool, is_positive: bool) -> Self {
        self.update(is_deprived, is_positive);
        self
    }

    pub fn cell(&self, is_deprived: bool, is_positive: bool) -> f64 {
        match (is_deprived, is_positive) {
            (true, true) => self.deprived_pos,
            (true, false) => self.deprived_neg,
            (false, true) => self.favored_pos,
            (false, false) => self.favored_neg,
        }
    }

    pub fn cell_mut(&mut self, is_deprived: bool, is_positive: bool) -> &mut f64 {
        match (is_deprived, is_positive) {
            (true, true) => &mut self.deprived_pos,
            (true, false) => &mut self.deprived_neg,
            (false, true) => &mut self.favored_pos,
            (false, false) => &mut self.favored_neg,
        }
    }

    /// Favored positive rate minus deprived positive rate. Zero whenever one
    /// of the communities is empty.
    pub fn discrimination(&self) -> f64 {
        discrimination(self)
    }

    /// Same counts with the deprived and favored roles exchanged.
    pub fn swapped(&self) -> Self {
        GroupCounts::new(self.favored_pos, self.favored_neg, self.deprived_pos, self.deprived_neg)
    }

    pub fn add(&mut self, other: &GroupCounts) {
        self.deprived_pos += other.deprived_pos;
        self.deprived_neg += other.deprived_neg;
        self.favored_pos += other.favored_pos;
        self.favored_neg += other.favored_neg;
    }

    pub fn sub(&self, other: &GroupCounts) -> GroupCounts {
        GroupCounts::new(
            (self.deprived_pos - other.deprived_pos).max(0.0),
            (self.deprived_neg - other.deprived_neg).max(0.0),
            (self.favored_pos - other.favored_pos).max(0.0),
            (self.favored_neg - other.favored_neg).max(0.0),
        )
    }
}

pub fn discrimination(counts: &GroupCounts) -> f64 {
    let deprived = counts.deprived_total();
    let favored = counts.favored_total();
    if deprived <= 0.0 || favored <= 0.0 {
        return 0.0;
    }
    counts.favored_pos / favored - counts.deprived_pos / deprived
}

/// 2×2 agreement table of two classifiers' positive decisions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ContingencyPair {
    pub both_pos: u64,
    pub a_pos_b_neg: u64,
    pub a_neg_b_pos: u64,
    pub both_neg: u64,
}

impl ContingencyPair {
    pub fn record(&mut self, a_positive: bool, b_positive: bool) {
        match (a_positive, b_positive) {
            (true, true) => self.both_pos += 1,
            (true, false) => self.a_pos_b_neg += 1,
            (false, true) => self.a_neg_b_pos += 1,
            (false, false) => self.both_neg += 1,
        }
    }

    pub fn a_positive(&self) -> u64 {
        self.both_pos + self.a_pos_b_neg
    }

    pub fn b_positive(&self) -> u64 {
        self.both_pos + self.a_neg_b_pos
    }

    pub fn total(&self) -> u64 {
        self.both_pos + self.a_pos_b_neg + self.a_neg_b_pos + self.both_neg
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McNemar {
    pub chi_squared: f64,
    pub degrees_of_freedom: u32,
}

impl McNemar {
    /// Critical value of χ² with one degree of freedom at α = 0.05.
    pub const CRITICAL_05: f64 = 3.841;

    pub fn significant_at_05(&self) -> bool {
        self.chi_squared > Self::CRITICAL_05
    }
}

/// Continuity-corrected McNemar statistic (|b − c| − 1)² / (b + c).
pub fn mcnemar(pair: &ContingencyPair) -> Result<McNemar, StatsError> {
    let b = pair.a_pos_b_neg as f64;
    let c = pair.a_neg_b_pos as f64;
    if b + c == 0.0 {
        return Err(StatsError::NoDiscordantPairs);
    }
    let diff = (b - c).abs() - 1.0;
    Ok(McNemar {
        chi_squared: diff * diff / (b + c),
        degrees_of_freedom: 1,
    })
}

/// Pearson correlation of two 0/1 sequences.
pub fn phi_correlation(x: &[bool], y: &[bool]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(StatsError::TooShort);
    }
    let (mut n11, mut n10, mut n01, mut n00) = (0f64, 0f64, 0f64, 0f64);
    for (&a, &b) in x.iter().zip(y) {
        match (a, b) {
            (true, true) => n11 += 1.0,
            (true, false) => n10 += 1.0,
            (false, true) => n01 += 1.0,
            (false, false) => n00 += 1.0,
        }
    }
    let x1 = n11 + n10;
    let x0 = n01 + n00;
    let y1 = n11 + n01;
    let y0 = n10 + n00;
    if x1 == 0.0 || x0 == 0.0 || y1 == 0.0 || y0 == 0.0 {
        return Err(StatsError::ConstantSequence);
    }
    Ok((n11 * n00 - n10 * n01) / (x1 * x0 * y1 * y0).sqrt())
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // tied values share the mean rank
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ConstantSequence);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(StatsError::TooShort);
    }
    pearson(&ranks(x), &ranks(y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn discrimination_examples() {
        assert_eq!(GroupCounts::new(5.0, 5.0, 5.0, 5.0).discrimination(), 0.0);
        assert_abs_diff_eq!(GroupCounts::new(10.0, 90.0, 30.0, 70.0).discrimination(), 0.2, epsilon = 1e-12);
        assert_eq!(GroupCounts::new(0.0, 0.0, 3.0, 1.0).discrimination(), 0.0);
        assert_eq!(GroupCounts::new(3.0, 1.0, 0.0, 0.0).discrimination(), 0.0);
        assert_eq!(GroupCounts::default().discrimination(), 0.0);
    }

    #[test]
    fn update_increments_exactly_one_cell() {
        let empty = GroupCounts::default();
        assert_eq!(empty.updated(true, true), GroupCounts::new(1.0, 0.0, 0.0, 0.0));
        assert_eq!(empty.updated(false, false), GroupCounts::new(0.0, 0.0, 0.0, 1.0));
        let all = empty
            .updated(true, true)
            .updated(true, false)
            .updated(false, true)
            .updated(false, false);
        assert_eq!(all, GroupCounts::new(1.0, 1.0, 1.0, 1.0));
        assert_eq!(all.total(), 4.0);
    }

    #[test]
    fn mcnemar_examples() {
        let pair = |b, c| ContingencyPair {
            both_pos: 0,
            a_pos_b_neg: b,
            a_neg_b_pos: c,
            both_neg: 0,
        };
        // (|321 - 537| - 1)^2 / 858 = 215^2 / 858
        assert_abs_diff_eq!(mcnemar(&pair(321, 537)).unwrap().chi_squared, 46225.0 / 858.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mcnemar(&pair(0, 10)).unwrap().chi_squared, 8.1, epsilon = 1e-12);
        assert_abs_diff_eq!(mcnemar(&pair(5, 5)).unwrap().chi_squared, 0.1, epsilon = 1e-12);
        assert_eq!(mcnemar(&pair(0, 0)), Err(StatsError::NoDiscordantPairs));
        assert_eq!(mcnemar(&pair(1, 0)).unwrap().degrees_of_freedom, 1);
    }

    #[test]
    fn phi_examples() {
        let x = [true, true, false, false];
        let y = [true, false, true, false];
        let not_x: Vec<bool> = x.iter().map(|b| !b).collect();
        assert_abs_diff_eq!(phi_correlation(&x, &x).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(phi_correlation(&x, &not_x).unwrap(), -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(phi_correlation(&x, &y).unwrap(), 0.0, epsilon = 1e-12);
        assert_eq!(phi_correlation(&[true, true], &[true, false]), Err(StatsError::ConstantSequence));
        assert_eq!(phi_correlation(&[true], &[true]), Err(StatsError::TooShort));
        assert!(matches!(phi_correlation(&x, &y[..3]), Err(StatsError::LengthMismatch(4, 3))));
    }

    #[test]
    fn spearman_handles_ties_and_direction() {
        assert_abs_diff_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0, epsilon = 1e-12);
        // ranks (1.5,1.5,3) vs (1,2,3)
        assert_abs_diff_eq!(
            spearman(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap(),
            0.8660254037844387,
            epsilon = 1e-12
        );
    }

    fn counts() -> impl Strategy<Value = GroupCounts> {
        (0u32..50, 0u32..50, 0u32..50, 0u32..50)
            .prop_map(|(a, b, c, d)| GroupCounts::new(a as f64, b as f64, c as f64, d as f64))
    }

    proptest! {
        #[test]
        fn discrimination_is_bounded(c in counts()) {
            prop_assert!(c.discrimination().abs() <= 1.0);
        }

        #[test]
        fn swapping_roles_negates(c in counts()) {
            prop_assume!(c.deprived_total() > 0.0 && c.favored_total() > 0.0);
            prop_assert!((c.discrimination() + c.swapped().discrimination()).abs() < 1e-12);
        }

        #[test]
        fn scale_invariant(c in counts(), k in 1u32..20) {
            let k = k as f64;
            let scaled = GroupCounts::new(c.deprived_pos * k, c.deprived_neg * k, c.favored_pos * k, c.favored_neg * k);
            prop_assert!((c.discrimination() - scaled.discrimination()).abs() < 1e-12);
        }

        #[test]
        fn mcnemar_symmetric(b in 0u64..1000, c in 0u64..1000) {
            prop_assume!(b + c > 0);
            let p = ContingencyPair { both_pos: 0, a_pos_b_neg: b, a_neg_b_pos: c, both_neg: 0 };
            let q = ContingencyPair { both_pos: 0, a_pos_b_neg: c, a_neg_b_pos: b, both_neg: 0 };
            prop_assert_eq!(mcnemar(&p).unwrap(), mcnemar(&q).unwrap());
        }

        #[test]
        fn streaming_fold_matches_whole_stream_counts(
            events in proptest::collection::vec((any::<bool>(), any::<bool>()), 0..10_000)
        ) {
            let folded = events.iter().fold(GroupCounts::default(), |c, &(d, p)| c.updated(d, p));
            // from-scratch Eq. 1 evaluation
            let count = |d: bool, p: bool| events.iter().filter(|e| **e == (d, p)).count() as f64;
            let (sp, sn, fp, fneg) = (count(true, true), count(true, false), count(false, true), count(false, false));
            let expected = if sp + sn == 0.0 || fp + fneg == 0.0 { 0.0 } else { fp / (fp + fneg) - sp / (sp + sn) };
            prop_assert_eq!(folded.discrimination(), expected);
        }
    }
}
