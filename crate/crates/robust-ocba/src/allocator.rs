//! The k+m-1 relevant-scenario index set and the closed-form asymptotically
//! optimal budget allocation over it.
//!
//! The allocation is characterized by ratio identities between the
//! non-reference entries plus one implicit equation for the reference. Both
//! families are homogeneous of degree one in the sample sizes, so they are
//! solved exactly in a single pass: compute unnormalized weights that satisfy
//! the identities, then scale them to the budget.

use crate::error::{Error, Result};
use crate::grid::{select_best, worst_case_index, ScenarioGrid, ScenarioId};
use crate::truth::{Allocation, GroundTruth};

/// Gap clamp floor: gaps below `1e-8 * max(1, |reference mean|)` are raised
/// to it so a tie cannot send a weight to infinity.
pub const GAP_CLAMP_REL: f64 = 1e-8;
/// Variance clamp floor for degenerate early-stage samples.
pub const VARIANCE_CLAMP: f64 = 1e-12;

/// Ordered list of the k+m-1 relevant scenarios. Slot 0 holds the reference
/// (current-best alternative at its worst case); slots 1..k the worst cases
/// of the other alternatives ascending in alternative; the remaining slots
/// the best alternative's other distributions ascending in distribution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSet {
    k: usize,
    m: usize,
    entries: Vec<ScenarioId>,
}

impl IndexSet {
    /// Builds the index set from current sample means. Every scenario must
    /// have at least one observation.
    pub fn from_grid(grid: &ScenarioGrid) -> Result<Self> {
        let (k, m) = (grid.k(), grid.m());
        let means = grid.means();
        if means.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "index set needs every scenario mean defined (count >= 1)",
            ));
        }
        Self::from_means(k, m, &means)
    }

    /// Index set implied by the true means of a ground-truth problem.
    pub fn from_truth(truth: &GroundTruth) -> Self {
        Self::from_means(truth.k(), truth.m(), truth.means())
            .expect("ground truth means are finite")
    }

    /// Index set implied by an arbitrary row-major mean table.
    pub fn from_means(k: usize, m: usize, means: &[f64]) -> Result<Self> {
        let best = select_best(means, k, m)?;
        let mut entries = Vec::with_capacity(k + m - 1);
        let best_wc = worst_case_index(&means[best * m..(best + 1) * m])?;
        entries.push(ScenarioId::new(best, best_wc));
        for i in 0..k {
            if i != best {
                let wc = worst_case_index(&means[i * m..(i + 1) * m])?;
                entries.push(ScenarioId::new(i, wc));
            }
        }
        for j in 0..m {
            if j != best_wc {
                entries.push(ScenarioId::new(best, j));
            }
        }
        debug_assert_eq!(entries.len(), k + m - 1);
        Ok(IndexSet { k, m, entries })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ScenarioId] {
        &self.entries
    }

    /// The reference scenario (slot 0).
    pub fn reference(&self) -> ScenarioId {
        self.entries[0]
    }

    pub fn contains(&self, id: ScenarioId) -> bool {
        self.entries.contains(&id)
    }
}

/// Per-slot real-valued sample-size targets for one allocation round.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationTarget {
    index_set: IndexSet,
    targets: Vec<f64>,
    budget: f64,
    /// True when every gap hit the clamp floor (total ambiguity); targets
    /// then fall back to an equal split over the index set.
    degenerate: bool,
}

impl AllocationTarget {
    pub fn index_set(&self) -> &IndexSet {
        &self.index_set
    }

    /// Targets aligned with `index_set().entries()`.
    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn degenerate(&self) -> bool {
        self.degenerate
    }
}

/// Closed-form asymptotically optimal allocation of `budget` over the index
/// set, given per-slot sample means and variances (aligned with the entries).
///
/// Non-reference slots receive weight `(sd_r / gap_r)^2`; the reference
/// receives `sd_1 * sqrt(sum_r weight_r^2 / var_r)`. Scaling the weights to
/// the budget preserves both identity families exactly.
pub fn solve_asymptotic_allocation(
    index_set: &IndexSet,
    means: &[f64],
    variances: &[f64],
    budget: f64,
) -> Result<AllocationTarget> {
    let len = index_set.len();
    if len < 2 {
        return Err(Error::invalid(
            "allocation needs at least 2 scenarios in the index set",
        ));
    }
    if means.len() != len || variances.len() != len {
        return Err(Error::invalid(format!(
            "index set has {len} slots but got {} means and {} variances",
            means.len(),
            variances.len()
        )));
    }
    if !(budget > 0.0 && budget.is_finite()) {
        return Err(Error::invalid(format!("budget must be positive, got {budget}")));
    }
    if means.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("allocation needs finite sample means"));
    }

    let vars: Vec<f64> = variances
        .iter()
        .map(|&v| if v.is_finite() { v.max(VARIANCE_CLAMP) } else { VARIANCE_CLAMP })
        .collect();
    let gap_floor = GAP_CLAMP_REL * means[0].abs().max(1.0);

    let mut weights = vec![0.0; len];
    let mut all_clamped = true;
    for r in 1..len {
        let gap = (means[0] - means[r]).abs();
        let clamped = gap < gap_floor;
        all_clamped &= clamped;
        let gap = if clamped { gap_floor } else { gap };
        weights[r] = vars[r] / (gap * gap);
    }

    if all_clamped {
        // total ambiguity: every pairwise gap is numerically zero
        return Ok(AllocationTarget {
            index_set: index_set.clone(),
            targets: vec![budget / len as f64; len],
            budget,
            degenerate: true,
        });
    }

    weights[0] = vars[0].sqrt()
        * (1..len)
            .map(|r| weights[r] * weights[r] / vars[r])
            .sum::<f64>()
            .sqrt();

    let sum: f64 = weights.iter().sum();
    let targets: Vec<f64> = weights.iter().map(|w| budget * w / sum).collect();
    Ok(AllocationTarget {
        index_set: index_set.clone(),
        targets,
        budget,
        degenerate: false,
    })
}

/// Asymptotically optimal allocation of a total budget over all k×m
/// scenarios, using the true means and variances: every scenario outside the
/// index set receives exactly zero.
pub fn asymptotic_allocation(truth: &GroundTruth, total: f64) -> Result<Allocation> {
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::invalid(format!("budget must be positive, got {total}")));
    }
    let index_set = IndexSet::from_truth(truth);
    let means: Vec<f64> = index_set.entries().iter().map(|&id| truth.mean(id)).collect();
    let vars: Vec<f64> = index_set
        .entries()
        .iter()
        .map(|&id| truth.variance(id))
        .collect();
    let target = solve_asymptotic_allocation(&index_set, &means, &vars, total)?;

    let mut samples = vec![0.0; truth.k() * truth.m()];
    for (slot, &id) in index_set.entries().iter().enumerate() {
        samples[id.alt * truth.m() + id.dist] = target.targets()[slot];
    }
    Allocation::new(truth.k(), truth.m(), samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid_with_means(k: usize, m: usize, means: &[f64]) -> ScenarioGrid {
        // two observations per scenario so means and variances are defined
        let mut g = ScenarioGrid::new(k, m).unwrap();
        for i in 0..k {
            for j in 0..m {
                let mu = means[i * m + j];
                g.record(ScenarioId::new(i, j), mu - 0.5);
                g.record(ScenarioId::new(i, j), mu + 0.5);
            }
        }
        g
    }

    #[test]
    fn index_set_for_small_scale_instance() {
        let means = [0.2, 0.1, 0.1, 0.4, 0.3, 0.3, 0.4, 0.4, 0.4];
        let g = grid_with_means(3, 3, &means);
        let set = IndexSet::from_grid(&g).unwrap();
        assert_eq!(set.reference(), ScenarioId::new(0, 0));
        assert_eq!(
            set.entries(),
            &[
                ScenarioId::new(0, 0),
                ScenarioId::new(1, 0),
                ScenarioId::new(2, 0),
                ScenarioId::new(0, 1),
                ScenarioId::new(0, 2),
            ]
        );
    }

    #[test]
    fn index_set_degenerate_shapes() {
        // single alternative: the reference plus its other distributions
        let g = grid_with_means(1, 3, &[0.5, 0.2, 0.9]);
        let set = IndexSet::from_grid(&g).unwrap();
        assert_eq!(set.reference(), ScenarioId::new(0, 2));
        assert_eq!(
            set.entries(),
            &[ScenarioId::new(0, 2), ScenarioId::new(0, 0), ScenarioId::new(0, 1)]
        );

        // m = 1 reduces to the classical setting: all alternatives
        let g = grid_with_means(4, 1, &[3.0, 1.0, 2.0, 4.0]);
        let set = IndexSet::from_grid(&g).unwrap();
        assert_eq!(set.reference(), ScenarioId::new(1, 0));
        assert_eq!(set.len(), 4);
    }

    #[test]
    fn index_set_requires_observed_means() {
        let g = ScenarioGrid::new(2, 2).unwrap();
        assert!(IndexSet::from_grid(&g).is_err());
    }

    #[test]
    fn solve_matches_worked_example() {
        // three slots, unit sds, gaps 1 and 2, budget 100:
        // weights (sqrt(1.0625), 1, 0.25) -> n ~ (45.194, 43.845, 10.961)
        let g = grid_with_means(3, 1, &[0.0, 1.0, 2.0]);
        let set = IndexSet::from_grid(&g).unwrap();
        let means = [0.0, 1.0, 2.0];
        let vars = [1.0, 1.0, 1.0];
        let t = solve_asymptotic_allocation(&set, &means, &vars, 100.0).unwrap();
        let n = t.targets();
        assert!((n[0] - 45.19410160110378).abs() < 1e-9, "n1 {}", n[0]);
        assert!((n[1] - 43.84471871911697).abs() < 1e-9, "n2 {}", n[1]);
        assert!((n[2] - 10.96117967977924).abs() < 1e-9, "n3 {}", n[2]);
        // ratio identity n2/n3 = (sd2/gap2)^2 / (sd3/gap3)^2 = 4
        assert!((n[1] / n[2] - 4.0).abs() < 1e-9);
        // reference identity and budget closure
        let ref_identity = (n[1] * n[1] + n[2] * n[2]).sqrt();
        assert!(((n[0] - ref_identity) / n[0]).abs() < 1e-9);
        assert!(((n.iter().sum::<f64>() - 100.0) / 100.0).abs() < 1e-9);
    }

    #[test]
    fn solve_equal_split_for_symmetric_pair() {
        let g = grid_with_means(2, 1, &[0.0, 1.0]);
        let set = IndexSet::from_grid(&g).unwrap();
        let t = solve_asymptotic_allocation(&set, &[0.0, 1.0], &[2.0, 2.0], 50.0).unwrap();
        assert!((t.targets()[0] - 25.0).abs() < 1e-9);
        assert!((t.targets()[1] - 25.0).abs() < 1e-9);
        assert!(!t.degenerate());
    }

    #[test]
    fn solve_flags_total_ambiguity() {
        let g = grid_with_means(3, 1, &[1.0, 1.0, 1.0]);
        let set = IndexSet::from_grid(&g).unwrap();
        let t = solve_asymptotic_allocation(&set, &[1.0, 1.0, 1.0], &[1.0; 3], 30.0).unwrap();
        assert!(t.degenerate());
        assert_eq!(t.targets(), &[10.0, 10.0, 10.0]);
    }

    #[test]
    fn solve_survives_zero_variance() {
        let g = grid_with_means(2, 1, &[0.0, 1.0]);
        let set = IndexSet::from_grid(&g).unwrap();
        let t = solve_asymptotic_allocation(&set, &[0.0, 1.0], &[0.0, 1.0], 10.0).unwrap();
        assert!(t.targets().iter().all(|n| n.is_finite() && *n >= 0.0));
    }

    fn random_truth(rng: &mut ChaCha8Rng, k: usize, m: usize) -> GroundTruth {
        loop {
            let means: Vec<f64> = (0..k * m).map(|_| rng.random_range(-2.0..2.0)).collect();
            let vars: Vec<f64> = (0..k * m).map(|_| rng.random_range(0.3..3.0)).collect();
            if let Ok(t) = GroundTruth::new(k, m, means, vars) {
                return t;
            }
        }
    }

    #[test]
    fn asymptotic_allocation_identities_and_zeros() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let k = rng.random_range(2..=5usize);
            let m = rng.random_range(1..=5usize);
            let truth = random_truth(&mut rng, k, m);
            let total = rng.random_range(100.0..1e6);
            let alloc = asymptotic_allocation(&truth, total).unwrap();

            // budget closure
            assert!(((alloc.total() - total) / total).abs() < 1e-9);

            // exact zeros off the index set
            let set = IndexSet::from_truth(&truth);
            for i in 0..k {
                for j in 0..m {
                    let id = ScenarioId::new(i, j);
                    if !set.contains(id) {
                        assert_eq!(alloc.get(id), 0.0, "scenario {id} must be zero");
                    }
                }
            }

            // ratio identities among non-reference entries
            let entries = set.entries();
            for p in 1..entries.len() {
                for q in (p + 1)..entries.len() {
                    let (ip, iq) = (entries[p], entries[q]);
                    let lhs = alloc.get(ip) * (truth.gap(ip).powi(2) / truth.variance(ip));
                    let rhs = alloc.get(iq) * (truth.gap(iq).powi(2) / truth.variance(iq));
                    assert!(
                        ((lhs - rhs) / lhs.abs().max(1e-30)).abs() < 1e-9,
                        "ratio identity violated: {lhs} vs {rhs}"
                    );
                }
            }

            // reference identity
            let n_ref = alloc.get(set.reference());
            let rhs = truth.variance(set.reference()).sqrt()
                * entries[1..]
                    .iter()
                    .map(|&id| alloc.get(id).powi(2) / truth.variance(id))
                    .sum::<f64>()
                    .sqrt();
            assert!(((n_ref - rhs) / n_ref).abs() < 1e-9);
        }
    }

    #[test]
    fn asymptotic_allocation_scale_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let truth = random_truth(&mut rng, 4, 3);
        let a1 = asymptotic_allocation(&truth, 1000.0).unwrap();
        let a2 = asymptotic_allocation(&truth, 3000.0).unwrap();
        for (x, y) in a1.samples().iter().zip(a2.samples()) {
            assert!((y - 3.0 * x).abs() < 1e-9 * y.abs().max(1.0));
        }
    }

    #[test]
    fn asymptotic_allocation_equal_variance_pair_splits_evenly() {
        let truth = GroundTruth::new(2, 1, vec![0.0, 1.0], vec![4.0, 4.0]).unwrap();
        let alloc = asymptotic_allocation(&truth, 100.0).unwrap();
        assert!((alloc.get(ScenarioId::new(0, 0)) - 50.0).abs() < 1e-9);
        assert!((alloc.get(ScenarioId::new(1, 0)) - 50.0).abs() < 1e-9);
    }

    #[test]
    fn beats_equal_allocation_on_the_additive_bound() {
        // MM-style k=4, m=3 instance at a large budget: the closed-form
        // allocation must score at least as well as spreading the same
        // budget evenly
        let mut means = Vec::new();
        let mut vars = Vec::new();
        for i in 1..=4 {
            for j in 1..=3 {
                means.push(0.5 * i as f64 - 0.2 * j as f64 - 1.0);
                vars.push(256.0);
            }
        }
        let truth = GroundTruth::new(4, 3, means, vars).unwrap();
        let total = 1e6;
        let closed = asymptotic_allocation(&truth, total).unwrap();
        let equal = crate::truth::Allocation::uniform(4, 3, total).unwrap();
        let b_closed = crate::bounds::additive_pics_bound(&truth, &closed).unwrap();
        let b_equal = crate::bounds::additive_pics_bound(&truth, &equal).unwrap();
        assert!(
            b_closed <= b_equal,
            "closed form {b_closed} vs equal allocation {b_equal}"
        );
    }

    #[test]
    fn small_scale_instance_zero_count() {
        // the small-scale concentration instance: exactly 4 of 9 scenarios receive zero
        let means = vec![0.2, 0.1, 0.1, 0.4, 0.3, 0.3, 0.4, 0.4, 0.4];
        let truth = GroundTruth::new(3, 3, means, vec![1.0; 9]).unwrap();
        let alloc = asymptotic_allocation(&truth, 1e5).unwrap();
        let zeros = alloc.samples().iter().filter(|&&n| n == 0.0).count();
        assert_eq!(zeros, 4);
    }
}
