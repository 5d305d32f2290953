//! Problem generators: synthetic Gaussian configurations, the (s,S)
//! inventory simulator with demand-distribution ambiguity, and the
//! ground-truth estimator with its CSV cache.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ScenarioId, ScenarioStats};
use crate::truth::GroundTruth;

/// A k×m family of scenario samplers. Simulators are immutable after
/// construction; concurrent use only needs independent caller-supplied
/// generators, hence the `Sync` bound.
pub trait Simulator: Sync {
    fn k(&self) -> usize;
    fn m(&self) -> usize;
    /// One observation of scenario `id`.
    fn draw(&self, id: ScenarioId, rng: &mut dyn RngCore) -> Result<f64>;
}

/// Variance pattern of the synthetic configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceKind {
    /// sigma^2 = 16^2 everywhere.
    Constant,
    /// sigma^2 = (12 + sqrt(0.2 i + j))^2 (1-based i, j).
    Increasing,
    /// sigma^2 = (12 + 1/(0.2 i + j))^2 (1-based i, j).
    Decreasing,
}

/// Label of a synthetic problem configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SyntheticLabel {
    MmCv,
    MmIv,
    MmDv,
    Custom,
}

/// Gaussian scenarios with known means and variances.
#[derive(Debug, Clone)]
pub struct SyntheticProblem {
    truth: GroundTruth,
    label: SyntheticLabel,
    sds: Vec<f64>,
}

impl SyntheticProblem {
    pub fn from_truth(truth: GroundTruth) -> Self {
        let sds = truth.variances().iter().map(|v| v.sqrt()).collect();
        SyntheticProblem {
            truth,
            label: SyntheticLabel::Custom,
            sds,
        }
    }

    pub fn truth(&self) -> &GroundTruth {
        &self.truth
    }

    pub fn label(&self) -> SyntheticLabel {
        self.label
    }
}

impl Simulator for SyntheticProblem {
    fn k(&self) -> usize {
        self.truth.k()
    }

    fn m(&self) -> usize {
        self.truth.m()
    }

    fn draw(&self, id: ScenarioId, rng: &mut dyn RngCore) -> Result<f64> {
        let mu = self.truth.mean(id);
        let sd = self.sds[id.alt * self.truth.m() + id.dist];
        Ok(Normal::new(mu, sd).expect("validated variance").sample(rng))
    }
}

/// Monotone-means configuration: `mu_ij = 0.5 i - 0.2 j - 1` with 1-based
/// indices, paired with one of the three variance patterns. Alternative 1 is
/// the unique robust best and column 1 every alternative's worst case.
pub fn make_synthetic(k: usize, m: usize, kind: VarianceKind) -> Result<SyntheticProblem> {
    if k < 2 || m < 1 {
        return Err(Error::invalid(format!(
            "synthetic configuration needs k >= 2 and m >= 1, got k={k}, m={m}"
        )));
    }
    let mut means = Vec::with_capacity(k * m);
    let mut vars = Vec::with_capacity(k * m);
    for i in 1..=k {
        for j in 1..=m {
            means.push(0.5 * i as f64 - 0.2 * j as f64 - 1.0);
            let base = 0.2 * i as f64 + j as f64;
            vars.push(match kind {
                VarianceKind::Constant => 256.0,
                VarianceKind::Increasing => (12.0 + base.sqrt()).powi(2),
                VarianceKind::Decreasing => (12.0 + 1.0 / base).powi(2),
            });
        }
    }
    let truth = GroundTruth::new(k, m, means, vars)?;
    let sds = truth.variances().iter().map(|v| v.sqrt()).collect();
    Ok(SyntheticProblem {
        truth,
        label: match kind {
            VarianceKind::Constant => SyntheticLabel::MmCv,
            VarianceKind::Increasing => SyntheticLabel::MmIv,
            VarianceKind::Decreasing => SyntheticLabel::MmDv,
        },
        sds,
    })
}

/// Parameters of one periodic-review (s,S) policy under one demand
/// distribution. Daily demand is exponential with the given mean; orders
/// placed when the inventory position falls below `s` raise it to `S` and
/// arrive after a Poisson lead time (next morning at the earliest). Costs:
/// holding on end-of-day on-hand stock, a fixed charge plus a per-unit charge
/// per order, and `backorder_cost` per unit-day of outstanding backorders
/// (zero by default, so unmet demand simply waits).
///
/// Note the cost direction this structure implies: raising the demand mean
/// drains on-hand stock faster, and with holding at 1/unit-day and lead times
/// around 6 days the holding savings outweigh the extra ordering cost, so
/// average daily cost *falls* as demand grows. The worst-case demand for
/// these defaults is therefore the smallest mean in the ambiguity set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InventoryParams {
    pub s: f64,
    pub order_up_to: f64,
    pub demand_mean: f64,
    pub horizon: u32,
    pub holding_cost: f64,
    pub fixed_order_cost: f64,
    pub unit_cost: f64,
    pub backorder_cost: f64,
    pub lead_time_mean: f64,
    pub initial_inventory: f64,
}

impl InventoryParams {
    /// Policy-specific parameters with the documented cost defaults;
    /// the run starts fully stocked at `S`.
    pub fn with_policy(s: f64, order_up_to: f64, demand_mean: f64) -> Self {
        InventoryParams {
            s,
            order_up_to,
            demand_mean,
            horizon: 500,
            holding_cost: 1.0,
            fixed_order_cost: 36.0,
            unit_cost: 2.0,
            backorder_cost: 0.0,
            lead_time_mean: 6.0,
            initial_inventory: order_up_to,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.s.is_nan() || self.order_up_to.is_nan() || self.s >= self.order_up_to {
            return Err(Error::invalid(format!(
                "reorder point must lie below the order-up-to level: s={} S={}",
                self.s, self.order_up_to
            )));
        }
        if self.horizon < 1 {
            return Err(Error::invalid("horizon must be >= 1"));
        }
        for (name, v) in [
            ("demand_mean", self.demand_mean),
            ("holding_cost", self.holding_cost),
            ("fixed_order_cost", self.fixed_order_cost),
            ("unit_cost", self.unit_cost),
            ("backorder_cost", self.backorder_cost),
            ("lead_time_mean", self.lead_time_mean),
            ("initial_inventory", self.initial_inventory),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }
}

/// Average cost per day of one simulated horizon.
pub fn inventory_draw(params: &InventoryParams, rng: &mut dyn RngCore) -> f64 {
    let mut on_hand = params.initial_inventory;
    let mut backorders = 0.0f64;
    let mut outstanding: Vec<(u32, f64)> = Vec::new(); // (arrival day, quantity)
    let mut total_cost = 0.0f64;

    let demand_dist = if params.demand_mean > 0.0 {
        Some(Exp::new(1.0 / params.demand_mean).expect("positive rate"))
    } else {
        None
    };

    for day in 0..params.horizon {
        // receive orders due today, serving backorders first
        let mut arrived = 0.0;
        outstanding.retain(|&(due, qty)| {
            if due == day {
                arrived += qty;
                false
            } else {
                true
            }
        });
        if arrived > 0.0 {
            on_hand += arrived;
            let served = on_hand.min(backorders);
            on_hand -= served;
            backorders -= served;
        }

        // daily demand
        let demand = match &demand_dist {
            Some(d) => d.sample(rng),
            None => 0.0,
        };
        if demand <= on_hand {
            on_hand -= demand;
        } else {
            backorders += demand - on_hand;
            on_hand = 0.0;
        }

        // review: order up to S when the position drops below s
        let position =
            on_hand - backorders + outstanding.iter().map(|&(_, q)| q).sum::<f64>();
        if position < params.s {
            let qty = params.order_up_to - position;
            let lead = if params.lead_time_mean > 0.0 {
                Poisson::new(params.lead_time_mean)
                    .expect("positive mean")
                    .sample(rng) as u32
            } else {
                0
            };
            outstanding.push((day + 1 + lead, qty));
            total_cost += params.fixed_order_cost + params.unit_cost * qty;
        }

        total_cost += params.holding_cost * on_hand + params.backorder_cost * backorders;
    }

    total_cost / params.horizon as f64
}

/// All (s,S) policies on a grid crossed with an ambiguity set of exponential
/// demand means. Alternatives enumerate (s, S) pairs with s outermost, both
/// grids sorted ascending; distributions enumerate demand means ascending.
/// Pairs with `s >= S` are dropped and reported in `excluded`.
#[derive(Debug, Clone)]
pub struct InventoryProblem {
    base: InventoryParams,
    pairs: Vec<(f64, f64)>,
    demand_means: Vec<f64>,
    excluded: Vec<(f64, f64)>,
}

impl InventoryProblem {
    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    pub fn demand_means(&self) -> &[f64] {
        &self.demand_means
    }

    /// Pairs removed because the reorder point met or exceeded the
    /// order-up-to level.
    pub fn excluded(&self) -> &[(f64, f64)] {
        &self.excluded
    }

    pub fn params_for(&self, id: ScenarioId) -> InventoryParams {
        let (s, order_up_to) = self.pairs[id.alt];
        InventoryParams {
            s,
            order_up_to,
            demand_mean: self.demand_means[id.dist],
            initial_inventory: if self.base.initial_inventory >= 0.0 {
                self.base.initial_inventory
            } else {
                order_up_to
            },
            ..self.base
        }
    }
}

impl Simulator for InventoryProblem {
    fn k(&self) -> usize {
        self.pairs.len()
    }

    fn m(&self) -> usize {
        self.demand_means.len()
    }

    fn draw(&self, id: ScenarioId, rng: &mut dyn RngCore) -> Result<f64> {
        Ok(inventory_draw(&self.params_for(id), rng))
    }
}

/// Cost and horizon settings shared by every scenario of an inventory
/// problem. `initial_inventory: None` starts each policy at its own S.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InventoryConfig {
    pub horizon: u32,
    pub holding_cost: f64,
    pub fixed_order_cost: f64,
    pub unit_cost: f64,
    pub backorder_cost: f64,
    pub lead_time_mean: f64,
    pub initial_inventory: Option<f64>,
}

impl Default for InventoryConfig {
    fn default() -> Self {
        InventoryConfig {
            horizon: 500,
            holding_cost: 1.0,
            fixed_order_cost: 36.0,
            unit_cost: 2.0,
            backorder_cost: 0.0,
            lead_time_mean: 6.0,
            initial_inventory: None,
        }
    }
}

pub fn build_inventory_problem(
    s_grid: &[f64],
    order_up_grid: &[f64],
    demand_means: &[f64],
    config: InventoryConfig,
) -> Result<InventoryProblem> {
    if s_grid.is_empty() || order_up_grid.is_empty() || demand_means.is_empty() {
        return Err(Error::invalid("inventory grids must be nonempty"));
    }
    let mut s_sorted = s_grid.to_vec();
    let mut up_sorted = order_up_grid.to_vec();
    let mut demands = demand_means.to_vec();
    for v in s_sorted.iter().chain(&up_sorted).chain(&demands) {
        if !v.is_finite() || *v < 0.0 {
            return Err(Error::invalid("inventory grids must be nonnegative and finite"));
        }
    }
    s_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    up_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    demands.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut pairs = Vec::with_capacity(s_sorted.len() * up_sorted.len());
    let mut excluded = Vec::new();
    for &s in &s_sorted {
        for &up in &up_sorted {
            if s < up {
                pairs.push((s, up));
            } else {
                excluded.push((s, up));
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::invalid("every (s, S) pair has s >= S"));
    }

    let base = InventoryParams {
        s: 0.0,
        order_up_to: 0.0,
        demand_mean: 0.0,
        horizon: config.horizon,
        holding_cost: config.holding_cost,
        fixed_order_cost: config.fixed_order_cost,
        unit_cost: config.unit_cost,
        backorder_cost: config.backorder_cost,
        lead_time_mean: config.lead_time_mean,
        // negative sentinel means "start at the policy's own S"
        initial_inventory: config.initial_inventory.unwrap_or(-1.0),
    };
    if config.horizon < 1 {
        return Err(Error::invalid("horizon must be >= 1"));
    }
    for (name, v) in [
        ("holding_cost", base.holding_cost),
        ("fixed_order_cost", base.fixed_order_cost),
        ("unit_cost", base.unit_cost),
        ("backorder_cost", base.backorder_cost),
        ("lead_time_mean", base.lead_time_mean),
    ] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::invalid(format!("{name} must be nonnegative, got {v}")));
        }
    }

    Ok(InventoryProblem {
        base,
        pairs,
        demand_means: demands,
        excluded,
    })
}

/// Ground truth recovered by brute-force simulation, with the per-scenario
/// standard errors needed to judge whether the best is statistically clear.
#[derive(Debug, Clone)]
pub struct EstimatedTruth {
    truth: GroundTruth,
    reps: u64,
    stderr: Vec<f64>,
    ambiguous: bool,
}

impl EstimatedTruth {
    pub fn truth(&self) -> &GroundTruth {
        &self.truth
    }

    pub fn reps(&self) -> u64 {
        self.reps
    }

    /// Standard error of each scenario's estimated mean, row-major.
    pub fn stderr(&self) -> &[f64] {
        &self.stderr
    }

    /// True when the estimated best is within one combined standard error of
    /// the runner-up on worst-case mean.
    pub fn ambiguous(&self) -> bool {
        self.ambiguous
    }
}

fn scenario_moments(
    sim: &dyn Simulator,
    id: ScenarioId,
    reps: u64,
    seed: u64,
    stream: u64,
) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut stats = ScenarioStats::new();
    for _ in 0..reps {
        stats.record(sim.draw(id, &mut rng)?);
    }
    Ok((stats.mean(), stats.variance()))
}

fn assemble_truth(
    sim: &dyn Simulator,
    moments: Vec<(f64, f64)>,
    reps: u64,
) -> Result<EstimatedTruth> {
    let (k, m) = (sim.k(), sim.m());
    let means: Vec<f64> = moments.iter().map(|&(mu, _)| mu).collect();
    let vars: Vec<f64> = moments.iter().map(|&(_, v)| v).collect();
    let stderr: Vec<f64> = vars.iter().map(|v| (v / reps as f64).sqrt()).collect();
    let truth = GroundTruth::new(k, m, means, vars)?;

    let best = truth.best();
    let best_wc = truth.mean(truth.reference());
    let best_se = stderr[best * m + truth.worst_of(best)];
    let mut ambiguous = false;
    for i in 0..k {
        if i == best {
            continue;
        }
        let wc = ScenarioId::new(i, truth.worst_of(i));
        let gap = truth.mean(wc) - best_wc;
        let combined = (best_se * best_se + stderr[i * m + wc.dist].powi(2)).sqrt();
        if gap <= combined {
            ambiguous = true;
        }
    }
    Ok(EstimatedTruth {
        truth,
        reps,
        stderr,
        ambiguous,
    })
}

/// Estimates every scenario's mean and variance from `reps_per_scenario`
/// independent draws. Scenario (i,j) always consumes stream `i*m + j` of the
/// seeded generator, so the result is identical whether scenarios are
/// processed serially or in parallel.
pub fn estimate_truth(
    sim: &dyn Simulator,
    reps_per_scenario: u64,
    seed: u64,
) -> Result<EstimatedTruth> {
    if reps_per_scenario < 2 {
        return Err(Error::invalid("estimate_truth needs reps_per_scenario >= 2"));
    }
    let (k, m) = (sim.k(), sim.m());
    let ids: Vec<ScenarioId> = (0..k)
        .flat_map(|i| (0..m).map(move |j| ScenarioId::new(i, j)))
        .collect();

    #[cfg(feature = "parallel")]
    let moments: Vec<(f64, f64)> = {
        use rayon::prelude::*;
        ids.par_iter()
            .map(|&id| {
                scenario_moments(sim, id, reps_per_scenario, seed, (id.alt * m + id.dist) as u64)
            })
            .collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let moments: Vec<(f64, f64)> = ids
        .iter()
        .map(|&id| {
            scenario_moments(sim, id, reps_per_scenario, seed, (id.alt * m + id.dist) as u64)
        })
        .collect::<Result<_>>()?;

    assemble_truth(sim, moments, reps_per_scenario)
}

/// Single-threaded reference path for `estimate_truth`.
pub fn estimate_truth_seq(
    sim: &dyn Simulator,
    reps_per_scenario: u64,
    seed: u64,
) -> Result<EstimatedTruth> {
    if reps_per_scenario < 2 {
        return Err(Error::invalid("estimate_truth needs reps_per_scenario >= 2"));
    }
    let (k, m) = (sim.k(), sim.m());
    let mut moments = Vec::with_capacity(k * m);
    for i in 0..k {
        for j in 0..m {
            let id = ScenarioId::new(i, j);
            moments.push(scenario_moments(sim, id, reps_per_scenario, seed, (i * m + j) as u64)?);
        }
    }
    assemble_truth(sim, moments, reps_per_scenario)
}

const TRUTH_CACHE_HEADER: &str = "scenario_i,scenario_j,s,S,demand_mean,reps,mean,variance,stderr";

/// Writes the inventory ground-truth cache: one row per scenario, 1-based
/// indices, floats printed with the shortest round-trip representation so a
/// reload reproduces the exact bits.
pub fn write_truth_cache<W: Write>(
    mut w: W,
    problem: &InventoryProblem,
    est: &EstimatedTruth,
) -> Result<()> {
    writeln!(w, "{TRUTH_CACHE_HEADER}")?;
    let m = problem.m();
    for i in 0..problem.k() {
        let (s, up) = problem.pairs()[i];
        for j in 0..m {
            let id = ScenarioId::new(i, j);
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                i + 1,
                j + 1,
                s,
                up,
                problem.demand_means()[j],
                est.reps(),
                est.truth().mean(id),
                est.truth().variance(id),
                est.stderr()[i * m + j],
            )?;
        }
    }
    Ok(())
}

/// Reloads a truth cache written by `write_truth_cache`, checking that the
/// scenario layout matches the given problem.
pub fn read_truth_cache<R: std::io::Read>(
    r: R,
    problem: &InventoryProblem,
) -> Result<EstimatedTruth> {
    let reader = BufReader::new(r);
    let mut lines = reader.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == TRUTH_CACHE_HEADER => {}
        _ => return Err(Error::invalid("truth cache: missing or unexpected header")),
    }
    let (k, m) = (problem.k(), problem.m());
    let mut means = vec![f64::NAN; k * m];
    let mut vars = vec![f64::NAN; k * m];
    let mut stderr = vec![f64::NAN; k * m];
    let mut reps: Option<u64> = None;
    let mut rows = 0usize;

    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::invalid(format!(
                "truth cache: expected 9 fields, got {} in line {line:?}",
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::invalid(format!("truth cache: bad number {s:?}: {e}")))
        };
        let i = fields[0]
            .parse::<usize>()
            .map_err(|e| Error::invalid(format!("truth cache: bad index: {e}")))?;
        let j = fields[1]
            .parse::<usize>()
            .map_err(|e| Error::invalid(format!("truth cache: bad index: {e}")))?;
        if i < 1 || i > k || j < 1 || j > m {
            return Err(Error::invalid(format!("truth cache: scenario ({i},{j}) out of range")));
        }
        let (i, j) = (i - 1, j - 1);
        let (s, up) = problem.pairs()[i];
        if parse(fields[2])? != s || parse(fields[3])? != up {
            return Err(Error::invalid(format!(
                "truth cache: policy mismatch at alternative {}",
                i + 1
            )));
        }
        if parse(fields[4])? != problem.demand_means()[j] {
            return Err(Error::invalid(format!(
                "truth cache: demand mismatch at distribution {}",
                j + 1
            )));
        }
        let row_reps = fields[5]
            .parse::<u64>()
            .map_err(|e| Error::invalid(format!("truth cache: bad reps: {e}")))?;
        match reps {
            None => reps = Some(row_reps),
            Some(r) if r == row_reps => {}
            Some(_) => return Err(Error::invalid("truth cache: inconsistent reps column")),
        }
        means[i * m + j] = parse(fields[6])?;
        vars[i * m + j] = parse(fields[7])?;
        stderr[i * m + j] = parse(fields[8])?;
        rows += 1;
    }
    if rows != k * m {
        return Err(Error::invalid(format!(
            "truth cache: expected {} rows, got {rows}",
            k * m
        )));
    }
    let reps = reps.expect("at least one row");
    let truth = GroundTruth::new(k, m, means, vars)?;

    // rebuild the ambiguity flag from the stored numbers
    let best = truth.best();
    let best_wc = truth.mean(truth.reference());
    let best_se = stderr[best * m + truth.worst_of(best)];
    let ambiguous = (0..k).any(|i| {
        if i == best {
            return false;
        }
        let wc = ScenarioId::new(i, truth.worst_of(i));
        let combined = (best_se * best_se + stderr[i * m + wc.dist].powi(2)).sqrt();
        truth.mean(wc) - best_wc <= combined
    });

    Ok(EstimatedTruth {
        truth,
        reps,
        stderr,
        ambiguous,
    })
}

/// Convenience wrappers over the cache readers/writers for file paths.
pub fn save_truth_cache(
    path: &Path,
    problem: &InventoryProblem,
    est: &EstimatedTruth,
) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_truth_cache(std::io::BufWriter::new(file), problem, est)
}

pub fn load_truth_cache(path: &Path, problem: &InventoryProblem) -> Result<EstimatedTruth> {
    let file = std::fs::File::open(path)?;
    read_truth_cache(file, problem)
}
