//! Ground-truth problem descriptions and relaxed (real-valued) allocations.

use crate::error::{Error, Result};
use crate::grid::{select_best, worst_case_index, ScenarioId};

/// True means and variances of all k×m scenarios, with the derived labels:
/// the unique robust-best alternative and each alternative's worst-case
/// distribution. Construction validates positivity of the variances and
/// strict uniqueness of the best.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    k: usize,
    m: usize,
    means: Vec<f64>,
    variances: Vec<f64>,
    best: usize,
    worst_of: Vec<usize>,
}

impl GroundTruth {
    pub fn new(k: usize, m: usize, means: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        if k == 0 || m == 0 || means.len() != k * m || variances.len() != k * m {
            return Err(Error::invalid(format!(
                "ground truth shape mismatch: k={k}, m={m}, means={}, variances={}",
                means.len(),
                variances.len()
            )));
        }
        for (idx, &v) in variances.iter().enumerate() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!(
                    "variance at flat index {idx} must be positive and finite, got {v}"
                )));
            }
        }
        let worst_of: Vec<usize> = (0..k)
            .map(|i| worst_case_index(&means[i * m..(i + 1) * m]))
            .collect::<Result<_>>()?;
        let best = select_best(&means, k, m)?;
        // the robust best must be strictly better than every other alternative
        let best_wc = means[best * m + worst_of[best]];
        for i in 0..k {
            if i != best && means[i * m + worst_of[i]] <= best_wc {
                return Err(Error::invalid(format!(
                    "no unique best: alternative {} ties or beats alternative {} on worst-case mean",
                    i + 1,
                    best + 1
                )));
            }
        }
        Ok(GroundTruth {
            k,
            m,
            means,
            variances,
            best,
            worst_of,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn mean(&self, id: ScenarioId) -> f64 {
        self.means[id.alt * self.m + id.dist]
    }

    pub fn variance(&self, id: ScenarioId) -> f64 {
        self.variances[id.alt * self.m + id.dist]
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    /// The true robust-best alternative (0-based).
    pub fn best(&self) -> usize {
        self.best
    }

    /// Worst-case distribution index of alternative `i` (0-based).
    pub fn worst_of(&self, i: usize) -> usize {
        self.worst_of[i]
    }

    /// The reference scenario: the best alternative at its worst case.
    pub fn reference(&self) -> ScenarioId {
        ScenarioId::new(self.best, self.worst_of[self.best])
    }

    /// The k+m-1 relevant scenarios in canonical order: the reference first,
    /// then each non-best alternative's worst case (ascending alternative),
    /// then the best alternative's remaining distributions (ascending).
    pub fn relevant_scenarios(&self) -> Vec<ScenarioId> {
        let mut out = Vec::with_capacity(self.k + self.m - 1);
        out.push(self.reference());
        for i in 0..self.k {
            if i != self.best {
                out.push(ScenarioId::new(i, self.worst_of[i]));
            }
        }
        for j in 0..self.m {
            if j != self.worst_of[self.best] {
                out.push(ScenarioId::new(self.best, j));
            }
        }
        out
    }

    /// Mean gap between the reference scenario and another relevant scenario.
    pub fn gap(&self, id: ScenarioId) -> f64 {
        (self.mean(self.reference()) - self.mean(id)).abs()
    }
}

/// Relaxed sample sizes over the k×m grid (real-valued, nonnegative).
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    k: usize,
    m: usize,
    samples: Vec<f64>,
}

impl Allocation {
    pub fn new(k: usize, m: usize, samples: Vec<f64>) -> Result<Self> {
        if k == 0 || m == 0 || samples.len() != k * m {
            return Err(Error::invalid(format!(
                "allocation shape mismatch: k={k}, m={m}, len={}",
                samples.len()
            )));
        }
        for (idx, &n) in samples.iter().enumerate() {
            if !(n >= 0.0 && n.is_finite()) {
                return Err(Error::invalid(format!(
                    "sample size at flat index {idx} must be nonnegative and finite, got {n}"
                )));
            }
        }
        Ok(Allocation { k, m, samples })
    }

    /// Every scenario receives `total / (k·m)`.
    pub fn uniform(k: usize, m: usize, total: f64) -> Result<Self> {
        if total < 0.0 || !total.is_finite() {
            return Err(Error::invalid(format!("total must be nonnegative, got {total}")));
        }
        let per = total / (k * m) as f64;
        Allocation::new(k, m, vec![per; k * m])
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, id: ScenarioId) -> f64 {
        self.samples[id.alt * self.m + id.dist]
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn total(&self) -> f64 {
        self.samples.iter().sum()
    }
}
