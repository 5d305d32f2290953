//! Sequential budget-allocation procedures: the meta engine with pluggable
//! stage-wise rules (proportional and most-starving) and the equal-allocation
//! baseline.
//!
//! Engine contract: initialization takes `n0` observations per scenario; each
//! round rebuilds the index set from current sample means, computes targets
//! for budget `N_used + delta`, converts positive target-minus-count gaps to
//! integers, splits the batch by the configured rule, draws the granted
//! observations and books the realized total. The loop guard
//! `N_used + delta < N` can leave a remainder unspent; it stays unspent.
//! All randomness flows through one seeded generator per run, consumed in
//! scenario-major then round-major order, so a (config, seed, problem)
//! triple fully determines the trace.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::allocator::{solve_asymptotic_allocation, IndexSet};
use crate::error::{Error, Result};
use crate::grid::{select_best, ScenarioGrid, ScenarioId};
use crate::problems::Simulator;

/// Stage-wise rule for distributing each incremental batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllocationRule {
    /// Split the batch across needy slots proportionally to their gaps,
    /// rounding each share up.
    Proportional,
    /// Give the whole batch to the slot with the largest gap.
    MostStarving,
}

/// Inputs of one sequential run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProcedureConfig {
    /// Initialization sample size per scenario (>= 2 so variances exist).
    pub n0: u64,
    /// Batch size added per round (>= 1).
    pub delta: u64,
    /// Total sampling budget N.
    pub total_budget: u64,
    pub rule: AllocationRule,
}

impl ProcedureConfig {
    pub fn validate(&self, k: usize, m: usize) -> Result<()> {
        if self.n0 < 2 {
            return Err(Error::invalid(format!("n0 must be >= 2, got {}", self.n0)));
        }
        if self.delta < 1 {
            return Err(Error::invalid(format!("delta must be >= 1, got {}", self.delta)));
        }
        let floor = (k * m) as u64 * self.n0;
        if self.total_budget < floor {
            return Err(Error::invalid(format!(
                "total_budget must cover initialization: need >= {floor}, got {}",
                self.total_budget
            )));
        }
        Ok(())
    }
}

/// One sequential round: targets were computed for budget `n_used` *after*
/// adding delta; `grants` is what the rule actually handed out.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    pub t: u64,
    pub n_used: u64,
    pub slots: Vec<ScenarioId>,
    pub targets: Vec<f64>,
    pub grants: Vec<u64>,
}

/// Complete record of one run: per-round records, terminal counts and sample
/// means, and the selected alternative (0-based).
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub k: usize,
    pub m: usize,
    pub rounds: Vec<RoundRecord>,
    pub final_counts: Vec<u64>,
    pub final_means: Vec<f64>,
    pub selection: usize,
    pub n_used: u64,
}

impl RunTrace {
    /// Writes one JSON record per round: fields `t`, `n_used`, `slots`
    /// (scenario ids, 1-based), `targets`, `grants`.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for round in &self.rounds {
            let slots: Vec<[usize; 2]> = round
                .slots
                .iter()
                .map(|id| [id.alt + 1, id.dist + 1])
                .collect();
            let record = serde_json::json!({
                "t": round.t,
                "n_used": round.n_used,
                "slots": slots,
                "targets": round.targets,
                "grants": round.grants,
            });
            serde_json::to_writer(&mut w, &record)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Proportional stage rule: slot `r` receives `ceil(gap_r * delta / sum)` of
/// the batch when its gap is positive, nothing otherwise. The ceiling can
/// overshoot `delta` by at most (number of needy slots - 1); the caller books
/// the realized total.
pub fn proportional_split(gaps: &[u64], delta: u64) -> Vec<u64> {
    let total: u128 = gaps.iter().map(|&g| g as u128).sum();
    assert!(total > 0, "proportional_split needs a positive gap sum");
    assert!(delta >= 1);
    gaps.iter()
        .map(|&g| {
            if g == 0 {
                0
            } else {
                ((g as u128 * delta as u128).div_ceil(total)) as u64
            }
        })
        .collect()
}

/// Most-starving stage rule: the whole batch goes to the slot with the
/// largest positive gap (smallest slot index on ties); with no positive gap
/// everything goes to the reference slot.
pub fn most_starving_split(gaps: &[u64], delta: u64) -> Vec<u64> {
    assert!(delta >= 1);
    let mut counts = vec![0u64; gaps.len()];
    let mut target = 0usize;
    let mut best = 0u64;
    for (slot, &g) in gaps.iter().enumerate() {
        if g > best {
            best = g;
            target = slot;
        }
    }
    counts[target] = delta;
    counts
}

fn draw_into(
    sim: &dyn Simulator,
    grid: &mut ScenarioGrid,
    id: ScenarioId,
    count: u64,
    rng: &mut ChaCha8Rng,
    round: u64,
) -> Result<()> {
    for _ in 0..count {
        let x = sim.draw(id, rng).map_err(|e| Error::Simulation {
            round,
            message: e.to_string(),
        })?;
        grid.record(id, x);
    }
    Ok(())
}

/// Runs the sequential meta procedure and returns the full trace.
pub fn run_meta_ocba(
    sim: &dyn Simulator,
    config: &ProcedureConfig,
    seed: u64,
) -> Result<RunTrace> {
    let (k, m) = (sim.k(), sim.m());
    config.validate(k, m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grid = ScenarioGrid::new(k, m)?;

    // initialization phase: n0 observations per scenario, scenario-major
    for i in 0..k {
        for j in 0..m {
            draw_into(sim, &mut grid, ScenarioId::new(i, j), config.n0, &mut rng, 0)?;
        }
    }

    let mut rounds = Vec::new();
    let mut t = 0u64;
    while grid.total_used() + config.delta < config.total_budget {
        t += 1;
        let index_set = IndexSet::from_grid(&grid)?;
        let len = index_set.len();

        let mut means = Vec::with_capacity(len);
        let mut vars = Vec::with_capacity(len);
        for &id in index_set.entries() {
            means.push(grid.mean(id));
            vars.push(grid.variance(id));
        }
        let budget = (grid.total_used() + config.delta) as f64;
        let target = solve_asymptotic_allocation(&index_set, &means, &vars, budget)?;

        let gaps: Vec<u64> = index_set
            .entries()
            .iter()
            .zip(target.targets())
            .map(|(&id, &n_t)| {
                let rounded = n_t.round() as i64;
                (rounded - grid.count(id) as i64).max(0) as u64
            })
            .collect();

        let grants = if gaps.iter().sum::<u64>() == 0 {
            // targets redistribute at least delta above current counts, so
            // this only triggers in exotic corners; fall back to the reference
            let mut g = vec![0u64; len];
            g[0] = config.delta;
            g
        } else {
            match config.rule {
                AllocationRule::Proportional => proportional_split(&gaps, config.delta),
                AllocationRule::MostStarving => most_starving_split(&gaps, config.delta),
            }
        };

        for (slot, &id) in index_set.entries().iter().enumerate() {
            draw_into(sim, &mut grid, id, grants[slot], &mut rng, t)?;
        }

        rounds.push(RoundRecord {
            t,
            n_used: grid.total_used(),
            slots: index_set.entries().to_vec(),
            targets: target.targets().to_vec(),
            grants,
        });
    }

    let final_means = grid.means();
    let selection = select_best(&final_means, k, m)?;
    Ok(RunTrace {
        k,
        m,
        rounds,
        final_counts: grid.counts(),
        final_means,
        selection,
        n_used: grid.total_used(),
    })
}

/// Equal-allocation baseline: `floor(total / km)` observations per scenario
/// (remainder unspent), then the minimax selection rule. Returns the selected
/// alternative (0-based).
pub fn run_equal_allocation(sim: &dyn Simulator, total_budget: u64, seed: u64) -> Result<usize> {
    let (k, m) = (sim.k(), sim.m());
    let per = total_budget / (k * m) as u64;
    if per == 0 {
        return Err(Error::invalid(format!(
            "equal allocation needs total_budget >= k*m = {}, got {total_budget}",
            k * m
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grid = ScenarioGrid::new(k, m)?;
    for i in 0..k {
        for j in 0..m {
            draw_into(sim, &mut grid, ScenarioId::new(i, j), per, &mut rng, 0)?;
        }
    }
    select_best(&grid.means(), k, m)
}
