//! PICS upper bounds and the oracles used to validate the allocator.
//!
//! Both bounds are evaluated in the original scenario labels; the
//! best-at-worst-case scenario of the ground truth plays the role the
//! formulas assign to the reference, so no explicit relabeling pass is
//! needed. `numeric_min_f` minimizes the additive objective directly and is
//! kept independent of the closed-form allocator it cross-checks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::grid::{select_best, ScenarioId};
use crate::normal::{log_phi, phi};
use crate::truth::{Allocation, GroundTruth};

fn require_positive(alloc: &Allocation, id: ScenarioId) -> Result<f64> {
    let n = alloc.get(id);
    if n > 0.0 {
        Ok(n)
    } else {
        Err(Error::invalid(format!(
            "scenario {id} needs a positive sample size, got {n}"
        )))
    }
}

/// Standardized comparison statistics for the k+m-2 additive terms:
/// one `z_r = -gap_r / sqrt(var_r/n_r + var_ref/n_ref)` per non-reference
/// relevant scenario, in canonical index-set order.
fn additive_z_terms(truth: &GroundTruth, alloc: &Allocation) -> Result<Vec<f64>> {
    let reference = truth.reference();
    let n_ref = require_positive(alloc, reference)?;
    let v_ref = truth.variance(reference) / n_ref;
    truth
        .relevant_scenarios()
        .into_iter()
        .skip(1)
        .map(|id| {
            let n = require_positive(alloc, id)?;
            let spread = (truth.variance(id) / n + v_ref).sqrt();
            Ok(-truth.gap(id) / spread)
        })
        .collect()
}

/// Additive PICS upper bound: k+m-2 pairwise-error terms centered on the
/// reference scenario. Lies in [0, k+m-2].
pub fn additive_pics_bound(truth: &GroundTruth, alloc: &Allocation) -> Result<f64> {
    Ok(additive_z_terms(truth, alloc)?.into_iter().map(phi).sum())
}

/// Natural log of the additive bound, stable when every term underflows.
/// This is the objective the numeric oracle minimizes.
pub fn additive_pics_bound_log(truth: &GroundTruth, alloc: &Allocation) -> Result<f64> {
    let logs: Vec<f64> = additive_z_terms(truth, alloc)?
        .into_iter()
        .map(log_phi)
        .collect();
    Ok(log_sum_exp(&logs))
}

/// Multiplicative PICS upper bound: m(k-1) pairwise terms between the best
/// alternative's scenarios and each non-best alternative's worst case.
pub fn multiplicative_pics_bound(truth: &GroundTruth, alloc: &Allocation) -> Result<f64> {
    let best = truth.best();
    let mut sum = 0.0;
    for i in 0..truth.k() {
        if i == best {
            continue;
        }
        let wc = ScenarioId::new(i, truth.worst_of(i));
        let n_wc = require_positive(alloc, wc)?;
        let v_wc = truth.variance(wc) / n_wc;
        for j in 0..truth.m() {
            let bj = ScenarioId::new(best, j);
            let n_bj = require_positive(alloc, bj)?;
            let gap = truth.mean(wc) - truth.mean(bj);
            let spread = (truth.variance(bj) / n_bj + v_wc).sqrt();
            sum += phi(-gap / spread);
        }
    }
    Ok(sum)
}

fn log_sum_exp(logs: &[f64]) -> f64 {
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
}

fn mc_pics_one_rep(truth: &GroundTruth, mean_dists: &[Normal<f64>], seed: u64, rep: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    let means: Vec<f64> = mean_dists.iter().map(|d| d.sample(&mut rng)).collect();
    let picked = select_best(&means, truth.k(), truth.m()).expect("finite draws");
    picked != truth.best()
}

/// Sampling distribution of each terminal sample mean: N(mu, var/n).
fn mc_pics_prepare(
    truth: &GroundTruth,
    alloc: &Allocation,
    reps: u64,
) -> Result<Vec<Normal<f64>>> {
    if reps == 0 {
        return Err(Error::invalid("mc_pics: reps must be >= 1"));
    }
    let mut dists = Vec::with_capacity(truth.k() * truth.m());
    for i in 0..truth.k() {
        for j in 0..truth.m() {
            let id = ScenarioId::new(i, j);
            let n = require_positive(alloc, id)?;
            let sd = (truth.variance(id) / n).sqrt();
            dists.push(
                Normal::new(truth.mean(id), sd)
                    .map_err(|e| Error::invalid(format!("scenario {id}: {e}")))?,
            );
        }
    }
    Ok(dists)
}

fn binomial_estimate(incorrect: u64, reps: u64) -> (f64, f64) {
    let p = incorrect as f64 / reps as f64;
    (p, (p * (1.0 - p) / reps as f64).sqrt())
}

/// Monte Carlo estimate of the true PICS at a given allocation: draws the
/// terminal sample-mean table `mean ~ N(mu, var/n)` for every scenario,
/// applies the minimax selection rule, and returns the incorrect-selection
/// fraction with its binomial standard error.
///
/// Deterministic given `seed`: replication r always uses stream r of the
/// seeded generator, so the result does not depend on execution order or
/// thread count.
pub fn mc_pics(
    truth: &GroundTruth,
    alloc: &Allocation,
    reps: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let dists = mc_pics_prepare(truth, alloc, reps)?;
        let incorrect = (0..reps)
            .into_par_iter()
            .filter(|&r| mc_pics_one_rep(truth, &dists, seed, r))
            .count() as u64;
        Ok(binomial_estimate(incorrect, reps))
    }
    #[cfg(not(feature = "parallel"))]
    {
        mc_pics_seq(truth, alloc, reps, seed)
    }
}

/// Single-threaded reference path for `mc_pics`; used by the benches and the
/// parallel-equivalence tests.
pub fn mc_pics_seq(
    truth: &GroundTruth,
    alloc: &Allocation,
    reps: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    let dists = mc_pics_prepare(truth, alloc, reps)?;
    let incorrect = (0..reps)
        .filter(|&r| mc_pics_one_rep(truth, &dists, seed, r))
        .count() as u64;
    Ok(binomial_estimate(incorrect, reps))
}

/// Additive-bound objective over the relevant coordinates, in log scale.
/// Points are unconstrained vectors mapped to the simplex by softmax, so a
/// generic minimizer can roam freely; sample sizes are `total * weights`.
struct LogObjective {
    gaps: Vec<f64>,      // gap_r for r = 1..L-1 (non-reference entries)
    variances: Vec<f64>, // var_r aligned with entries, variances[0] = reference
    var_ref: f64,
    total: f64,
}

impl LogObjective {
    fn len(&self) -> usize {
        self.gaps.len() + 1
    }

    fn weights(&self, point: &[f64]) -> Vec<f64> {
        let max = point.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut w: Vec<f64> = point.iter().map(|x| (x - max).exp()).collect();
        let sum: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= sum);
        w
    }

    fn value_at_weights(&self, weights: &[f64]) -> f64 {
        let n_ref = self.total * weights[0];
        let logs: Vec<f64> = (1..self.len())
            .map(|r| {
                let n_r = self.total * weights[r];
                let spread = (self.variances[r] / n_r + self.var_ref / n_ref).sqrt();
                log_phi(-self.gaps[r - 1] / spread)
            })
            .collect();
        log_sum_exp(&logs)
    }

    fn value(&self, point: &[f64]) -> f64 {
        self.value_at_weights(&self.weights(point))
    }
}

/// Nelder-Mead downhill simplex with standard coefficients. Runs until the
/// vertex objective spread falls below 1e-11 relative (converged) or the
/// evaluation budget runs out. Returns (best point, best value, converged).
fn nelder_mead(
    objective: &LogObjective,
    start: &[f64],
    max_evals: usize,
) -> (Vec<f64>, f64, bool) {
    let dim = start.len();
    let mut evals = 0usize;
    let eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        objective.value(x)
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(start.to_vec());
    for i in 0..dim {
        let mut v = start.to_vec();
        v[i] += 0.5;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v, &mut evals)).collect();

    while evals < max_evals {
        // order vertices best..worst
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let best = order[0];
        let worst = order[dim];
        let second_worst = order[dim - 1];

        if values[worst] - values[best] <= 1e-11 * values[best].abs().max(1.0) {
            return (simplex[best].clone(), values[best], true);
        }

        let mut centroid = vec![0.0; dim];
        for &idx in order.iter().take(dim) {
            for (c, x) in centroid.iter_mut().zip(&simplex[idx]) {
                *c += x / dim as f64;
            }
        }
        let lerp = |from: &[f64], coef: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(from)
                .map(|(c, x)| c + coef * (c - x))
                .collect()
        };

        let reflected = lerp(&simplex[worst], 1.0);
        let f_reflected = eval(&reflected, &mut evals);
        if f_reflected < values[best] {
            let expanded = lerp(&simplex[worst], 2.0);
            let f_expanded = eval(&expanded, &mut evals);
            if f_expanded < f_reflected {
                simplex[worst] = expanded;
                values[worst] = f_expanded;
            } else {
                simplex[worst] = reflected;
                values[worst] = f_reflected;
            }
        } else if f_reflected < values[second_worst] {
            simplex[worst] = reflected;
            values[worst] = f_reflected;
        } else {
            let contracted = if f_reflected < values[worst] {
                lerp(&simplex[worst], 0.5)
            } else {
                lerp(&simplex[worst], -0.5)
            };
            let f_contracted = eval(&contracted, &mut evals);
            if f_contracted < values[worst].min(f_reflected) {
                simplex[worst] = contracted;
                values[worst] = f_contracted;
            } else {
                // shrink toward the best vertex
                let anchor = simplex[best].clone();
                for idx in 0..=dim {
                    if idx == best {
                        continue;
                    }
                    for (x, a) in simplex[idx].iter_mut().zip(&anchor) {
                        *x = a + 0.5 * (*x - a);
                    }
                    values[idx] = eval(&simplex[idx].clone(), &mut evals);
                }
            }
        }
    }

    let best = (0..=dim).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    (simplex[best].clone(), values[best], false)
}

/// Brute-force minimizer of the additive objective under a total budget:
/// Nelder-Mead over a softmax parameterization of the simplex of the k+m-1
/// relevant coordinates (all other scenarios receive exactly zero), restarted
/// from 10 seeded points, best result returned.
///
/// This is a desk-scale oracle (`k*m <= 25`); it shares no code with the
/// closed-form allocator it is used to validate.
pub fn numeric_min_f(truth: &GroundTruth, total: f64, iterations: usize) -> Result<Allocation> {
    let (k, m) = (truth.k(), truth.m());
    if k * m > 25 {
        return Err(Error::invalid(format!(
            "numeric_min_f is a desk-scale oracle (k*m <= 25), got k*m = {}",
            k * m
        )));
    }
    let len = k + m - 1;
    if len < 2 {
        return Err(Error::invalid("numeric_min_f: need at least 2 relevant scenarios"));
    }
    if total.is_nan() || total < len as f64 {
        return Err(Error::invalid(format!(
            "numeric_min_f: budget {total} below the {len} relevant scenarios"
        )));
    }

    let relevant = truth.relevant_scenarios();
    let objective = LogObjective {
        gaps: relevant[1..].iter().map(|&id| truth.gap(id)).collect(),
        variances: relevant.iter().map(|&id| truth.variance(id)).collect(),
        var_ref: truth.variance(relevant[0]),
        total,
    };

    const RESTARTS: usize = 10;
    let per_restart = (iterations / RESTARTS).max(100);
    let mut rng = ChaCha8Rng::seed_from_u64(0x0cba);
    let mut best_value = f64::INFINITY;
    let mut best_weights = vec![1.0 / len as f64; len];
    let mut any_converged = false;

    for restart in 0..RESTARTS {
        let start: Vec<f64> = if restart == 0 {
            vec![0.0; len]
        } else {
            (0..len)
                .map(|_| rand::Rng::random_range(&mut rng, -2.0..2.0))
                .collect()
        };
        let (point, value, converged) = nelder_mead(&objective, &start, per_restart);
        if value < best_value {
            best_value = value;
            best_weights = objective.weights(&point);
        }
        any_converged |= converged;
    }

    let mut samples = vec![0.0; k * m];
    for (slot, &id) in relevant.iter().enumerate() {
        samples[id.alt * m + id.dist] = total * best_weights[slot];
    }
    let best = Allocation::new(k, m, samples)?;
    if any_converged {
        Ok(best)
    } else {
        Err(Error::NonConvergence {
            iterations,
            achieved_log: best_value,
            best: Box::new(best),
        })
    }
}
