//! Fixed-budget robust ranking & selection under input uncertainty.
//!
//! A problem is a k×m grid of scenarios (alternative × input distribution);
//! the goal is to select the alternative whose worst-case mean over the
//! ambiguity set is smallest, spending a fixed total number of simulation
//! observations. This crate provides:
//!
//! - the minimax selection rule and online scenario statistics ([`grid`]),
//! - additive and multiplicative PICS upper bounds with Monte Carlo and
//!   numeric-minimization oracles ([`bounds`]),
//! - the k+m-1 relevant-scenario index set and the closed-form
//!   asymptotically optimal budget allocation over it ([`allocator`]),
//! - sequential allocation procedures with proportional and most-starving
//!   stage rules, plus the equal-allocation baseline ([`procedures`]),
//! - synthetic Gaussian and (s,S) inventory problem generators
//!   ([`problems`]),
//! - seeded, replication-parallel PCS estimation and parameter sweeps
//!   ([`experiments`]).
//!
//! Replication-level parallelism runs on rayon and is enabled by the
//! default `parallel` feature; without it every entry point falls back to
//! an equivalent sequential path with identical results.

pub mod allocator;
pub mod bounds;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod normal;
pub mod problems;
pub mod procedures;
pub mod truth;

pub use allocator::{solve_asymptotic_allocation, asymptotic_allocation, AllocationTarget, IndexSet};
pub use bounds::{
    additive_pics_bound, additive_pics_bound_log, mc_pics, mc_pics_seq,
    multiplicative_pics_bound, numeric_min_f,
};
pub use error::{Error, Result};
pub use experiments::{
    allocation_profile, budget_sweep, budget_sweep_with, estimate_pcs, estimate_pcs_seq,
    sensitivity_sweep, sensitivity_sweep_with, AllocationProfile, ExperimentReport, Oracle,
    ProcedureKind, ReportRow, SweepSpec, SweepVariable,
};
pub use grid::{select_best, worst_case_index, ScenarioGrid, ScenarioId, ScenarioStats};
pub use problems::{
    build_inventory_problem, estimate_truth, estimate_truth_seq, inventory_draw, load_truth_cache,
    make_synthetic, read_truth_cache, save_truth_cache, write_truth_cache, EstimatedTruth,
    InventoryConfig, InventoryParams, InventoryProblem, Simulator, SyntheticLabel,
    SyntheticProblem, VarianceKind,
};
pub use procedures::{
    most_starving_split, proportional_split, run_equal_allocation, run_meta_ocba,
    AllocationRule, ProcedureConfig, RoundRecord, RunTrace,
};
pub use truth::{Allocation, GroundTruth};
