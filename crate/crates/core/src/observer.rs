//! Per-attribute sufficient statistics kept at tree nodes.
//!
//! Nominal attributes keep, per value, a class table and a community table.
//! Numeric attributes keep one Gaussian per class and one per community cell
//! (s⁺, s⁻, s̄⁺, s̄⁻); branch statistics for a threshold are the Gaussian
//! masses on either side of it.

use crate::criteria::{Branch, ClassDist, PartitionView};
use crate::fairness::GroupCounts;

/// Number of classes.
pub const CLASSES: usize = 2;
/// Stored cells of one running Gaussian (count, mean, sum of squares).
pub const ESTIMATOR_CELLS: usize = 3;

/// Counter cells of a nominal observer over a domain of `arity` values.
pub fn nominal_cells(arity: usize) -> usize {
    arity * (CLASSES + 4)
}

/// Counter cells of a numeric observer: per class a Gaussian plus min/max,
/// plus one Gaussian per community cell.
pub fn numeric_cells() -> usize {
    CLASSES * (ESTIMATOR_CELLS + 2) + 4 * ESTIMATOR_CELLS
}

/// Running mean/variance (Welford).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GaussianEstimator {
    count: f64,
    mean: f64,
    m2: f64,
}

impl GaussianEstimator {
    pub fn add(&mut self, x: f64) {
        self.count += 1.0;
        let delta = x - self.mean;
        self.mean += delta / self.count;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> f64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample variance (n − 1 denominator); 0 below two observations.
    pub fn variance(&self) -> f64 {
        if self.count > 1.0 {
            (self.m2 / (self.count - 1.0)).max(0.0)
        } else {
            0.0
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Estimated number of observations ≤ `x`.
    pub fn mass_at_or_below(&self, x: f64) -> f64 {
        if self.count == 0.0 {
            return 0.0;
        }
        let sd = self.std_dev();
        if sd <= 0.0 {
            return if x >= self.mean { self.count } else { 0.0 };
        }
        let z = (x - self.mean) / (sd * std::f64::consts::SQRT_2);
        self.count * 0.5 * libm::erfc(-z)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NominalObserver {
    cells: Vec<(ClassDist, GroupCounts)>,
}

impl NominalObserver {
    pub fn new(arity: usize) -> Self {
        NominalObserver {
            cells: vec![(ClassDist::default(), GroupCounts::default()); arity],
        }
    }

    pub fn update(&mut self, value: usize, label: usize, deprived: Option<bool>, positive: bool) {
        let (dist, groups) = &mut self.cells[value];
        dist.add(label, 1.0);
        if let Some(d) = deprived {
            groups.update(d, positive);
        }
    }

    pub fn value_stats(&self, value: usize) -> (ClassDist, GroupCounts) {
        self.cells[value]
    }

    pub fn arity(&self) -> usize {
        self.cells.len()
    }

    /// Multiway partition over the observed values, with the value index of
    /// each branch. `None` when fewer than two values have been seen.
    pub fn partition(&self) -> Option<(PartitionView, Vec<usize>)> {
        let mut values = Vec::new();
        let mut branches = Vec::new();
        for (v, (dist, groups)) in self.cells.iter().enumerate() {
            if dist.total() > 0.0 {
                values.push(v);
                branches.push(Branch::new(*dist, *groups));
            }
        }
        if branches.len() < 2 {
            return None;
        }
        Some((PartitionView::from_branches(branches), values))
    }

    pub fn cells(&self) -> usize {
        nominal_cells(self.cells.len())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianObserver {
    per_class: [GaussianEstimator; CLASSES],
    min: [f64; CLASSES],
    max: [f64; CLASSES],
    /// Indexed by `community_slot`.
    per_group: [GaussianEstimator; 4],
}

impl Default for GaussianObserver {
    fn default() -> Self {
        GaussianObserver {
            per_class: Default::default(),
            min: [f64::INFINITY; CLASSES],
            max: [f64::NEG_INFINITY; CLASSES],
            per_group: Default::default(),
        }
    }
}

/// Slot order: s⁺, s⁻, s̄⁺, s̄⁻.
fn community_slot(deprived: bool, positive: bool) -> usize {
    match (deprived, positive) {
        (true, true) => 0,
        (true, false) => 1,
        (false, true) => 2,
        (false, false) => 3,
    }
}

fn groups_from_slots(slots: [f64; 4]) -> GroupCounts {
    GroupCounts::new(slots[0], slots[1], slots[2], slots[3])
}

impl GaussianObserver {
    pub fn update(&mut self, x: f64, label: usize, deprived: Option<bool>, positive: bool) {
        self.per_class[label].add(x);
        self.min[label] = self.min[label].min(x);
        self.max[label] = self.max[label].max(x);
        if let Some(d) = deprived {
            self.per_group[community_slot(d, positive)].add(x);
        }
    }

    pub fn class_estimator(&self, label: usize) -> &GaussianEstimator {
        &self.per_class[label]
    }

    pub fn group_estimator(&self, deprived: bool, positive: bool) -> &GaussianEstimator {
        &self.per_group[community_slot(deprived, positive)]
    }

    pub fn range(&self) -> Option<(f64, f64)> {
        let lo = self.min[0].min(self.min[1]);
        let hi = self.max[0].max(self.max[1]);
        (hi > lo).then_some((lo, hi))
    }

    /// `count` thresholds evenly spaced strictly inside the observed range.
    pub fn thresholds(&self, count: usize) -> Vec<f64> {
        match self.range() {
            Some((lo, hi)) => (1..=count)
                .map(|i| lo + (hi - lo) * i as f64 / (count + 1) as f64)
                .collect(),
            None => Vec::new(),
        }
    }

    /// Binary partition `≤ threshold` / `> threshold` from Gaussian masses.
/// Community masses have no range clamp.
    pub fn partition_at(&self, threshold: f64) -> PartitionView {
        let mut left = ClassDist::default();
        let mut right = ClassDist::default();
        for c in 0..CLASSES {
            let est = &self.per_class[c];
            // outside a class's observed range its whole mass is on one side
            let l = if threshold < self.min[c] {
                0.0
            } else if threshold >= self.max[c] {
                est.count()
            } else {
                est.mass_at_or_below(threshold).min(est.count())
            };
            left.counts[c] = l;
            right.counts[c] = est.count() - l;
        }
        let mut left_g = [0.0; 4];
        let mut right_g = [0.0; 4];
        for (slot, est) in self.per_group.iter().enumerate() {
            let l = est.mass_at_or_below(threshold).min(est.count());
            left_g[slot] = l;
            right_g[slot] = est.count() - l;
        }
        PartitionView::from_branches(vec![
            Branch::new(left, groups_from_slots(left_g)),
            Branch::new(right, groups_from_slots(right_g)),
        ])
    }

    pub fn cells(&self) -> usize {
        numeric_cells()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn welford_matches_two_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let xs: Vec<f64> = (0..10_000).map(|_| rng.gen_range(-1e3..1e3) + 5e4).collect();
        let mut est = GaussianEstimator::default();
        xs.iter().for_each(|&x| est.add(x));
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        assert_abs_diff_eq!(est.mean(), mean, epsilon = 1e-9);
        assert!((est.variance() - var).abs() <= 1e-9 * var.max(1.0));
        assert_eq!(est.count(), n);
    }

    #[test]
    fn point_mass_estimator_is_a_step() {
        let mut est = GaussianEstimator::default();
        est.add(3.0);
        est.add(3.0);
        assert_eq!(est.variance(), 0.0);
        assert_eq!(est.mass_at_or_below(2.9), 0.0);
        assert_eq!(est.mass_at_or_below(3.0), 2.0);
    }

    #[test]
    fn gaussian_mass_is_half_at_the_mean() {
        let mut est = GaussianEstimator::default();
        for x in [1.0, 2.0, 3.0, 4.0, 5.0] {
            est.add(x);
        }
        assert_abs_diff_eq!(est.mass_at_or_below(3.0), 2.5, epsilon = 1e-12);
    }

    #[test]
    fn nominal_partition_skips_unseen_values() {
        let mut obs = NominalObserver::new(4);
        obs.update(0, 1, Some(true), true);
        obs.update(2, 0, Some(false), false);
        obs.update(2, 0, None, false);
        let (view, values) = obs.partition().unwrap();
        assert_eq!(values, vec![0, 2]);
        assert_eq!(view.parent.weight, 3.0);
        assert_eq!(view.parent.groups.total(), 2.0);
        assert_eq!(view.branches[1].class_dist, ClassDist::new(2.0, 0.0));

        let mut single = NominalObserver::new(3);
        single.update(1, 0, None, false);
        assert!(single.partition().is_none());
    }

    #[test]
    fn numeric_partition_conserves_mass() {
        let mut obs = GaussianObserver::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let label = rng.gen_range(0..2);
            let x = rng.gen_range(0.0..10.0) + label as f64 * 5.0;
            obs.update(x, label, Some(rng.gen_bool(0.4)), label == 1);
        }
        let ts = obs.thresholds(10);
        assert_eq!(ts.len(), 10);
        let (lo, hi) = obs.range().unwrap();
        assert!(ts.iter().all(|&t| t > lo && t < hi));
        for t in ts {
            let view = obs.partition_at(t);
            assert_abs_diff_eq!(view.parent.weight, 500.0, epsilon = 1e-9);
            assert_abs_diff_eq!(view.parent.groups.total(), 500.0, epsilon = 1e-9);
        }
        assert!(GaussianObserver::default().thresholds(10).is_empty());
    }
}
