//! Macro-replication machinery: PCS estimation, budget and sensitivity
//! sweeps, and budget-concentration profiling.
//!
//! Replication r of a cell always runs with seed `base_seed + r`, and results
//! merge by counting, so serial and parallel execution agree exactly.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{EstimatedTruth, Simulator};
use crate::procedures::{
    run_equal_allocation, run_meta_ocba, AllocationRule, ProcedureConfig, RunTrace,
};
use crate::truth::GroundTruth;

/// Which procedure a cell runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProcedureKind {
    ArOcba(AllocationRule),
    EqualAllocation,
}

impl ProcedureKind {
    pub fn label(&self) -> &'static str {
        match self {
            ProcedureKind::ArOcba(AllocationRule::Proportional) => "AR-OCBA",
            ProcedureKind::ArOcba(AllocationRule::MostStarving) => "AR-OCBA-Starving",
            ProcedureKind::EqualAllocation => "EA",
        }
    }
}

/// What counts as a correct selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Oracle {
    /// The true (or estimated) robust-best alternative, 0-based.
    pub best: usize,
    /// Set when the oracle itself could not separate the best from the
    /// runner-up; PCS estimation refuses to run in that case.
    pub ambiguous: bool,
}

impl Oracle {
    pub fn from_truth(truth: &GroundTruth) -> Self {
        Oracle {
            best: truth.best(),
            ambiguous: false,
        }
    }

    pub fn from_estimate(est: &EstimatedTruth) -> Self {
        Oracle {
            best: est.truth().best(),
            ambiguous: est.ambiguous(),
        }
    }
}

fn run_once(
    sim: &dyn Simulator,
    kind: ProcedureKind,
    config: &ProcedureConfig,
    seed: u64,
) -> Result<usize> {
    match kind {
        ProcedureKind::ArOcba(rule) => {
            let cfg = ProcedureConfig { rule, ..*config };
            Ok(run_meta_ocba(sim, &cfg, seed)?.selection)
        }
        ProcedureKind::EqualAllocation => run_equal_allocation(sim, config.total_budget, seed),
    }
}

fn check_pcs_inputs(oracle: Oracle, replications: u64) -> Result<()> {
    if replications == 0 {
        return Err(Error::invalid("estimate_pcs needs replications >= 1"));
    }
    if oracle.ambiguous {
        return Err(Error::AmbiguousOracle(
            "the oracle best is within one standard error of the runner-up; \
             raise the truth-estimation replications"
                .into(),
        ));
    }
    Ok(())
}

fn pcs_from_correct(correct: u64, replications: u64) -> (f64, f64) {
    let p = correct as f64 / replications as f64;
    (p, (p * (1.0 - p) / replications as f64).sqrt())
}

/// Estimates the probability of correct selection over independent macro
/// replications seeded `base_seed + index`. Deterministic given `base_seed`
/// and independent of thread count.
pub fn estimate_pcs(
    sim: &dyn Simulator,
    oracle: Oracle,
    kind: ProcedureKind,
    config: &ProcedureConfig,
    replications: u64,
    base_seed: u64,
) -> Result<(f64, f64)> {
    check_pcs_inputs(oracle, replications)?;
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let outcomes: Vec<bool> = (0..replications)
            .into_par_iter()
            .map(|r| run_once(sim, kind, config, base_seed.wrapping_add(r)).map(|s| s == oracle.best))
            .collect::<Result<_>>()?;
        let correct = outcomes.iter().filter(|&&c| c).count() as u64;
        Ok(pcs_from_correct(correct, replications))
    }
    #[cfg(not(feature = "parallel"))]
    {
        estimate_pcs_seq(sim, oracle, kind, config, replications, base_seed)
    }
}

/// Single-threaded reference path for `estimate_pcs`; used by the benches and
/// the parallel-equivalence tests.
pub fn estimate_pcs_seq(
    sim: &dyn Simulator,
    oracle: Oracle,
    kind: ProcedureKind,
    config: &ProcedureConfig,
    replications: u64,
    base_seed: u64,
) -> Result<(f64, f64)> {
    check_pcs_inputs(oracle, replications)?;
    let mut correct = 0u64;
    for r in 0..replications {
        if run_once(sim, kind, config, base_seed.wrapping_add(r))? == oracle.best {
            correct += 1;
        }
    }
    Ok(pcs_from_correct(correct, replications))
}

/// One budget sweep: procedures crossed with budget levels `N = (n0+c)*k*m`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub config_label: String,
    pub procedures: Vec<ProcedureKind>,
    pub c_values: Vec<u64>,
    pub n0: u64,
    pub delta: u64,
    pub replications: u64,
    pub base_seed: u64,
}

/// One report row; the CSV schema is
/// `config,procedure,k,m,c,N,replications,pcs,stderr,wall_time_s`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub config: String,
    pub procedure: String,
    pub k: usize,
    pub m: usize,
    pub c: u64,
    #[serde(rename = "N")]
    pub n: u64,
    pub replications: u64,
    pub pcs: f64,
    pub stderr: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    /// Human-readable descriptions of cells that failed; the sweep continues
    /// past them.
    pub failures: Vec<String>,
}

impl ExperimentReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "config,procedure,k,m,c,N,replications,pcs,stderr,wall_time_s")?;
        for row in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                row.config,
                row.procedure,
                row.k,
                row.m,
                row.c,
                row.n,
                row.replications,
                row.pcs,
                row.stderr,
                row.wall_time_s
            )?;
        }
        Ok(())
    }
}

/// Full cross product (procedure × c), rows sorted by (procedure, c).
/// `on_row` fires as each cell completes, letting callers stream results.
pub fn budget_sweep_with(
    sim: &dyn Simulator,
    oracle: Oracle,
    spec: &SweepSpec,
    mut on_row: impl FnMut(&ReportRow),
) -> Result<ExperimentReport> {
    if spec.c_values.is_empty() {
        return Err(Error::invalid("budget sweep needs a nonempty c list"));
    }
    if spec.c_values.contains(&0) {
        return Err(Error::invalid("budget sweep needs positive c values"));
    }
    let km = (sim.k() * sim.m()) as u64;
    let mut c_sorted = spec.c_values.clone();
    c_sorted.sort_unstable();

    let mut report = ExperimentReport::default();
    for &kind in &spec.procedures {
        for &c in &c_sorted {
            let total = (spec.n0 + c) * km;
            let config = ProcedureConfig {
                n0: spec.n0,
                delta: spec.delta,
                total_budget: total,
                rule: AllocationRule::Proportional,
            };
            let started = Instant::now();
            match estimate_pcs(sim, oracle, kind, &config, spec.replications, spec.base_seed) {
                Ok((pcs, stderr)) => {
                    let row = ReportRow {
                        config: spec.config_label.clone(),
                        procedure: kind.label().to_string(),
                        k: sim.k(),
                        m: sim.m(),
                        c,
                        n: total,
                        replications: spec.replications,
                        pcs,
                        stderr,
                        wall_time_s: started.elapsed().as_secs_f64(),
                    };
                    on_row(&row);
                    report.rows.push(row);
                }
                Err(e) => report
                    .failures
                    .push(format!("{} c={c}: {e}", kind.label())),
            }
        }
    }
    Ok(report)
}

pub fn budget_sweep(
    sim: &dyn Simulator,
    oracle: Oracle,
    spec: &SweepSpec,
) -> Result<ExperimentReport> {
    budget_sweep_with(sim, oracle, spec, |_| {})
}

/// Which procedure parameter a sensitivity sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    N0,
    Delta,
}

/// Total budget of every sensitivity cell: N = 50 k m.
pub const SENSITIVITY_BUDGET_MULTIPLIER: u64 = 50;

/// Varies n0 or delta one value per row at the pinned budget `N = 50*k*m`,
/// holding the other parameter at its configured value.
#[allow(clippy::too_many_arguments)]
pub fn sensitivity_sweep_with(
    sim: &dyn Simulator,
    oracle: Oracle,
    config_label: &str,
    vary: SweepVariable,
    values: &[u64],
    n0: u64,
    delta: u64,
    replications: u64,
    base_seed: u64,
    mut on_row: impl FnMut(&ReportRow),
) -> Result<ExperimentReport> {
    if values.is_empty() {
        return Err(Error::invalid("sensitivity sweep needs a nonempty value list"));
    }
    let km = (sim.k() * sim.m()) as u64;
    let total = SENSITIVITY_BUDGET_MULTIPLIER * km;
    let mut report = ExperimentReport::default();
    for &value in values {
        let (n0_cell, delta_cell) = match vary {
            SweepVariable::N0 => (value, delta),
            SweepVariable::Delta => (n0, value),
        };
        let config = ProcedureConfig {
            n0: n0_cell,
            delta: delta_cell,
            total_budget: total,
            rule: AllocationRule::Proportional,
        };
        let label = match vary {
            SweepVariable::N0 => format!("{config_label} n0={value}"),
            SweepVariable::Delta => format!("{config_label} delta={value}"),
        };
        let started = Instant::now();
        match estimate_pcs(
            sim,
            oracle,
            ProcedureKind::ArOcba(AllocationRule::Proportional),
            &config,
            replications,
            base_seed,
        ) {
            Ok((pcs, stderr)) => {
                let row = ReportRow {
                    config: label,
                    procedure: "AR-OCBA".to_string(),
                    k: sim.k(),
                    m: sim.m(),
                    c: SENSITIVITY_BUDGET_MULTIPLIER.saturating_sub(n0_cell),
                    n: total,
                    replications,
                    pcs,
                    stderr,
                    wall_time_s: started.elapsed().as_secs_f64(),
                };
                on_row(&row);
                report.rows.push(row);
            }
            Err(e) => report.failures.push(format!("{label}: {e}")),
        }
    }
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
pub fn sensitivity_sweep(
    sim: &dyn Simulator,
    oracle: Oracle,
    config_label: &str,
    vary: SweepVariable,
    values: &[u64],
    n0: u64,
    delta: u64,
    replications: u64,
    base_seed: u64,
) -> Result<ExperimentReport> {
    sensitivity_sweep_with(
        sim,
        oracle,
        config_label,
        vary,
        values,
        n0,
        delta,
        replications,
        base_seed,
        |_| {},
    )
}

/// Cumulative per-scenario counts after each round of one run, for plotting
/// budget-concentration trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationProfile {
    pub k: usize,
    pub m: usize,
    /// (round t, booked spend, row-major cumulative counts); the first entry
    /// is the post-initialization state at t = 0.
    pub rounds: Vec<(u64, u64, Vec<u64>)>,
    pub final_counts: Vec<u64>,
    pub selection: usize,
}

impl AllocationProfile {
    pub fn from_trace(trace: &RunTrace, n0: u64) -> Self {
        let mut counts = vec![n0; trace.k * trace.m];
        let mut rounds = Vec::with_capacity(trace.rounds.len() + 1);
        rounds.push((0, (trace.k * trace.m) as u64 * n0, counts.clone()));
        for round in &trace.rounds {
            for (slot, &id) in round.slots.iter().enumerate() {
                counts[id.alt * trace.m + id.dist] += round.grants[slot];
            }
            rounds.push((round.t, round.n_used, counts.clone()));
        }
        debug_assert_eq!(counts, trace.final_counts);
        AllocationProfile {
            k: trace.k,
            m: trace.m,
            rounds,
            final_counts: trace.final_counts.clone(),
            selection: trace.selection,
        }
    }

    /// CSV with one row per round: `t,n_used,n_1_1,...,n_k_m` (1-based
    /// scenario columns).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "t,n_used")?;
        for i in 1..=self.k {
            for j in 1..=self.m {
                write!(w, ",n_{i}_{j}")?;
            }
        }
        writeln!(w)?;
        for (t, n_used, counts) in &self.rounds {
            write!(w, "{t},{n_used}")?;
            for c in counts {
                write!(w, ",{c}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Runs one seeded replication and projects its trace to cumulative counts.
pub fn allocation_profile(
    sim: &dyn Simulator,
    config: &ProcedureConfig,
    seed: u64,
) -> Result<AllocationProfile> {
    let trace = run_meta_ocba(sim, config, seed)?;
    Ok(AllocationProfile::from_trace(&trace, config.n0))
}
