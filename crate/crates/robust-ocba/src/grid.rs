//! Scenario indexing, online statistics, and the minimax selection rule.
//!
//! A *scenario* is one (alternative, distribution) pair. Indices are stored
//! 0-based; all external output (traces, reports, CLI) prints them 1-based.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Address of one scenario in a k×m grid. `alt` is the alternative index,
/// `dist` the input-distribution index, both 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScenarioId {
    pub alt: usize,
    pub dist: usize,
}

impl ScenarioId {
    pub fn new(alt: usize, dist: usize) -> Self {
        ScenarioId { alt, dist }
    }
}

impl fmt::Display for ScenarioId {
    /// Prints 1-based, e.g. `(3,1)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.alt + 1, self.dist + 1)
    }
}

/// Online count/mean/variance accumulator (Welford recurrence).
///
/// `mean()` is NaN until the first observation; `variance()` is NaN until
/// the second. The single-pass update avoids catastrophic cancellation for
/// inputs up to ~1e9 in magnitude.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ScenarioStats {
    count: u64,
    mean: f64,
    sum_sq_dev: f64,
}

impl ScenarioStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.sum_sq_dev += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.mean
        }
    }

    /// Sample variance with the n-1 denominator.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            f64::NAN
        } else {
            self.sum_sq_dev / (self.count - 1) as f64
        }
    }

    pub fn sum_sq_dev(&self) -> f64 {
        self.sum_sq_dev
    }
}

/// k×m table of per-scenario statistics plus the spent-budget ledger.
///
/// Invariant: `total_used` equals the sum of all per-scenario counts after
/// every `record` call.
#[derive(Debug, Clone)]
pub struct ScenarioGrid {
    k: usize,
    m: usize,
    stats: Vec<ScenarioStats>,
    total_used: u64,
}

impl ScenarioGrid {
    pub fn new(k: usize, m: usize) -> Result<Self> {
        if k == 0 || m == 0 {
            return Err(Error::invalid(format!(
                "scenario grid needs k >= 1 and m >= 1, got k={k}, m={m}"
            )));
        }
        Ok(ScenarioGrid {
            k,
            m,
            stats: vec![ScenarioStats::new(); k * m],
            total_used: 0,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    fn idx(&self, id: ScenarioId) -> usize {
        debug_assert!(id.alt < self.k && id.dist < self.m, "scenario {id} out of range");
        id.alt * self.m + id.dist
    }

    pub fn stats(&self, id: ScenarioId) -> &ScenarioStats {
        &self.stats[self.idx(id)]
    }

    pub fn record(&mut self, id: ScenarioId, x: f64) {
        let idx = self.idx(id);
        self.stats[idx].record(x);
        self.total_used += 1;
    }

    pub fn total_used(&self) -> u64 {
        self.total_used
    }

    pub fn count(&self, id: ScenarioId) -> u64 {
        self.stats[self.idx(id)].count()
    }

    pub fn mean(&self, id: ScenarioId) -> f64 {
        self.stats[self.idx(id)].mean()
    }

    pub fn variance(&self, id: ScenarioId) -> f64 {
        self.stats[self.idx(id)].variance()
    }

    /// Per-scenario counts in row-major order.
    pub fn counts(&self) -> Vec<u64> {
        self.stats.iter().map(|s| s.count()).collect()
    }

    /// Row-major sample means. NaN where a scenario has no observations.
    pub fn means(&self) -> Vec<f64> {
        self.stats.iter().map(|s| s.mean()).collect()
    }

    pub fn scenario_ids(&self) -> impl Iterator<Item = ScenarioId> + '_ {
        (0..self.k).flat_map(move |i| (0..self.m).map(move |j| ScenarioId::new(i, j)))
    }
}

/// Index of the worst-case (largest-mean) entry of a row; ties break to the
/// smallest index so the result is deterministic.
pub fn worst_case_index(row: &[f64]) -> Result<usize> {
    if row.is_empty() {
        return Err(Error::invalid("worst_case_index: empty row"));
    }
    let mut best = 0usize;
    for (j, &v) in row.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::invalid(format!(
                "worst_case_index: non-finite mean at position {j}"
            )));
        }
        if v > row[best] {
            best = j;
        }
    }
    Ok(best)
}

/// Minimax selection rule: the alternative whose worst-case mean is smallest,
/// over a row-major k×m table. Ties break to the smallest alternative index.
pub fn select_best(means: &[f64], k: usize, m: usize) -> Result<usize> {
    if k == 0 || m == 0 || means.len() != k * m {
        return Err(Error::invalid(format!(
            "select_best: table shape mismatch (k={k}, m={m}, len={})",
            means.len()
        )));
    }
    let mut best_alt = 0usize;
    let mut best_val = f64::INFINITY;
    for i in 0..k {
        let row = &means[i * m..(i + 1) * m];
        let wc = worst_case_index(row)?;
        let v = row[wc];
        if v < best_val {
            best_val = v;
            best_alt = i;
        }
    }
    Ok(best_alt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn stats_small_sequences() {
        let mut s = ScenarioStats::new();
        for x in [1.0, 2.0, 3.0] {
            s.record(x);
        }
        assert_eq!(s.count(), 3);
        assert!((s.mean() - 2.0).abs() < 1e-12);
        assert!((s.variance() - 1.0).abs() < 1e-12);

        let mut one = ScenarioStats::new();
        one.record(5.0);
        assert_eq!(one.count(), 1);
        assert!((one.mean() - 5.0).abs() < 1e-12);
        assert!(one.variance().is_nan());
        assert!(ScenarioStats::new().mean().is_nan());
    }

    #[test]
    fn stats_million_standard_normal_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut s = ScenarioStats::new();
        for _ in 0..1_000_000 {
            let x: f64 = StandardNormal.sample(&mut rng);
            s.record(x);
        }
        assert!(s.mean().abs() < 0.01, "mean {}", s.mean());
        assert!((s.variance() - 1.0).abs() < 0.01, "variance {}", s.variance());
    }

    #[test]
    fn stats_no_cancellation_at_large_offset() {
        // values near 1e9 with unit-scale spread: the two-pass reference and
        // the online accumulator must agree
        let base = 1.0e9;
        let xs: Vec<f64> = (0..1000).map(|i| base + (i % 7) as f64).collect();
        let mut s = ScenarioStats::new();
        for &x in &xs {
            s.record(x);
        }
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!(((s.mean() - mean) / mean).abs() < 1e-12);
        // each online update loses ~1e-16 * base / spread in relative terms;
        // a naive sum-of-squares accumulator would be wrong by orders of
        // magnitude here
        assert!(((s.variance() - var) / var).abs() < 1e-6);
    }

    #[test]
    fn worst_case_index_examples() {
        assert_eq!(worst_case_index(&[0.2, 0.1, 0.1]).unwrap(), 0);
        assert_eq!(worst_case_index(&[0.4, 0.4, 0.4]).unwrap(), 0);
        assert_eq!(worst_case_index(&[-1.0, 0.0, -0.5]).unwrap(), 1);
        assert!(worst_case_index(&[]).is_err());
        assert!(worst_case_index(&[f64::NAN]).is_err());
    }

    #[test]
    fn select_best_examples() {
        // small-scale concentration table: rows (0.2,0.1,0.1),(0.4,0.3,0.3),(0.4,0.4,0.4)
        let means = [0.2, 0.1, 0.1, 0.4, 0.3, 0.3, 0.4, 0.4, 0.4];
        assert_eq!(select_best(&means, 3, 3).unwrap(), 0);
        assert_eq!(select_best(&[7.0], 1, 1).unwrap(), 0);
        assert!(select_best(&[], 0, 0).is_err());
        assert!(select_best(&[1.0, 2.0], 2, 2).is_err());
    }

    #[test]
    fn select_best_against_naive_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let k = rng.random_range(1..=5usize);
            let m = rng.random_range(1..=4usize);
            let means: Vec<f64> = (0..k * m).map(|_| rng.random_range(-5.0..5.0)).collect();

            // naive reference
            let mut best = 0;
            let mut best_wc = f64::INFINITY;
            for i in 0..k {
                let mut wc = f64::NEG_INFINITY;
                for j in 0..m {
                    if means[i * m + j] > wc {
                        wc = means[i * m + j];
                    }
                }
                if wc < best_wc {
                    best_wc = wc;
                    best = i;
                }
            }
            assert_eq!(select_best(&means, k, m).unwrap(), best);
        }
    }

    #[test]
    fn grid_ledger_tracks_counts() {
        let mut g = ScenarioGrid::new(2, 3).unwrap();
        g.record(ScenarioId::new(0, 0), 1.0);
        g.record(ScenarioId::new(1, 2), -4.0);
        g.record(ScenarioId::new(1, 2), 2.0);
        assert_eq!(g.total_used(), 3);
        assert_eq!(g.counts().iter().sum::<u64>(), g.total_used());
        assert_eq!(g.count(ScenarioId::new(1, 2)), 2);
    }

    proptest! {
        #[test]
        fn ledger_equals_sum_of_counts(ops in prop::collection::vec((0usize..3, 0usize..4, -100.0f64..100.0), 0..200)) {
            let mut g = ScenarioGrid::new(3, 4).unwrap();
            for (i, j, x) in ops {
                g.record(ScenarioId::new(i, j), x);
            }
            prop_assert_eq!(g.total_used(), g.counts().iter().sum::<u64>());
        }

        #[test]
        fn select_best_affine_invariant(
            means in prop::collection::vec(-50.0f64..50.0, 12),
            shift in -100.0f64..100.0,
            scale in 0.01f64..100.0,
        ) {
            let (k, m) = (3usize, 4usize);
            let base = select_best(&means, k, m).unwrap();
            let transformed: Vec<f64> = means.iter().map(|v| v * scale + shift).collect();
            prop_assert_eq!(select_best(&transformed, k, m).unwrap(), base);
        }

        #[test]
        fn selection_is_deterministic(means in prop::collection::vec(-10.0f64..10.0, 8)) {
            let a = select_best(&means, 2, 4).unwrap();
            let b = select_best(&means.clone(), 2, 4).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
