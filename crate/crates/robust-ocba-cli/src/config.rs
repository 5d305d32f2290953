//! JSON run configuration: schema, validation, and hashing for provenance.
//!
//! The schema rejects unknown keys outright so a typo cannot silently fall
//! back to a default. Validation happens before any computation and error
//! messages name the offending key.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use robust_ocba::{
    build_inventory_problem, make_synthetic, AllocationRule, InventoryConfig, InventoryProblem,
    ProcedureKind, SyntheticProblem, VarianceKind,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub procedure: ProcedureSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    Synthetic {
        k: usize,
        m: usize,
        variances: VarianceName,
    },
    /// Gaussian scenarios with explicit row-major k×m mean and variance
    /// tables.
    Custom {
        k: usize,
        m: usize,
        means: Vec<f64>,
        variances: Vec<f64>,
    },
    Inventory {
        s_grid: Vec<f64>,
        order_up_grid: Vec<f64>,
        demand_means: Vec<f64>,
        #[serde(default = "default_horizon")]
        horizon: u32,
        #[serde(default = "default_holding")]
        holding_cost: f64,
        #[serde(default = "default_fixed_order")]
        fixed_order_cost: f64,
        #[serde(default = "default_unit")]
        unit_cost: f64,
        #[serde(default)]
        backorder_cost: f64,
        #[serde(default = "default_lead")]
        lead_time_mean: f64,
        #[serde(default)]
        initial_inventory: Option<f64>,
        #[serde(default = "default_truth_reps")]
        truth_reps: u64,
        #[serde(default = "default_truth_seed")]
        truth_seed: u64,
        /// Ground-truth cache location; defaults to `<output.dir>/truth.csv`.
        #[serde(default)]
        truth_cache: Option<PathBuf>,
    },
}

fn default_horizon() -> u32 {
    500
}
fn default_holding() -> f64 {
    1.0
}
fn default_fixed_order() -> f64 {
    36.0
}
fn default_unit() -> f64 {
    2.0
}
fn default_lead() -> f64 {
    6.0
}
fn default_truth_reps() -> u64 {
    10_000
}
fn default_truth_seed() -> u64 {
    424_242
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceName {
    Constant,
    Increasing,
    Decreasing,
}

impl From<VarianceName> for VarianceKind {
    fn from(v: VarianceName) -> Self {
        match v {
            VarianceName::Constant => VarianceKind::Constant,
            VarianceName::Increasing => VarianceKind::Increasing,
            VarianceName::Decreasing => VarianceKind::Decreasing,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProcedureName {
    ArOcba,
    ArOcbaStarving,
    Ea,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleName {
    Proportional,
    MostStarving,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcedureSection {
    pub name: ProcedureName,
    #[serde(default = "default_n0")]
    pub n0: u64,
    #[serde(default = "default_delta")]
    pub delta: u64,
    /// Optional stage-rule override for `name = "ar-ocba"`.
    #[serde(default)]
    pub rule: Option<RuleName>,
}

fn default_n0() -> u64 {
    20
}
fn default_delta() -> u64 {
    20
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VaryName {
    N0,
    Delta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    /// Budget levels: N = (n0 + c) * k * m.
    #[serde(default)]
    pub c_values: Vec<u64>,
    /// Absolute budget for single runs; wins over `c_values` in `run`/`trace`.
    #[serde(default)]
    pub total_budget: Option<u64>,
    #[serde(default = "default_replications")]
    pub replications: u64,
    #[serde(default)]
    pub base_seed: u64,
    /// Procedures for `pcs` sweeps; defaults to the `procedure` section's.
    #[serde(default)]
    pub procedures: Option<Vec<ProcedureName>>,
    /// Sensitivity sweeps: which parameter varies and over which values.
    #[serde(default)]
    pub vary: Option<VaryName>,
    #[serde(default)]
    pub values: Vec<u64>,
}

fn default_replications() -> u64 {
    1000
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            c_values: Vec::new(),
            total_budget: None,
            replications: default_replications(),
            base_seed: 0,
            procedures: None,
            vary: None,
            values: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_format")]
    pub format: OutputFormat,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_format() -> OutputFormat {
    OutputFormat::Csv
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: default_out_dir(),
            format: default_format(),
        }
    }
}

/// A problem ready to simulate, as declared by the config.
pub enum Problem {
    Synthetic(SyntheticProblem),
    Inventory(InventoryProblem),
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, String> {
        let config: RunConfig =
            serde_json::from_str(text).map_err(|e| format!("config parse error: {e}"))?;
        config.validate()?;
        Ok(config)
    }

    /// Structural validation; error messages name the offending key.
    pub fn validate(&self) -> Result<(), String> {
        match &self.problem {
            ProblemConfig::Synthetic { k, m, .. } => {
                if *k < 2 {
                    return Err(format!("problem.k: must be >= 2, got {k}"));
                }
                if *m < 1 {
                    return Err(format!("problem.m: must be >= 1, got {m}"));
                }
            }
            ProblemConfig::Custom { k, m, means, variances } => {
                if *k < 1 || *m < 1 {
                    return Err(format!("problem.k/problem.m: must be >= 1, got k={k}, m={m}"));
                }
                if means.len() != k * m {
                    return Err(format!(
                        "problem.means: expected {} entries (k*m), got {}",
                        k * m,
                        means.len()
                    ));
                }
                if variances.len() != k * m {
                    return Err(format!(
                        "problem.variances: expected {} entries (k*m), got {}",
                        k * m,
                        variances.len()
                    ));
                }
            }
            ProblemConfig::Inventory {
                s_grid,
                order_up_grid,
                demand_means,
                horizon,
                truth_reps,
                ..
            } => {
                if s_grid.is_empty() {
                    return Err("problem.s_grid: must be nonempty".into());
                }
                if order_up_grid.is_empty() {
                    return Err("problem.order_up_grid: must be nonempty".into());
                }
                if demand_means.is_empty() {
                    return Err("problem.demand_means: must be nonempty".into());
                }
                if *horizon < 1 {
                    return Err(format!("problem.horizon: must be >= 1, got {horizon}"));
                }
                if *truth_reps < 2 {
                    return Err(format!("problem.truth_reps: must be >= 2, got {truth_reps}"));
                }
            }
        }
        if self.procedure.n0 < 2 {
            return Err(format!("procedure.n0: must be >= 2, got {}", self.procedure.n0));
        }
        if self.procedure.delta < 1 {
            return Err(format!("procedure.delta: must be >= 1, got {}", self.procedure.delta));
        }
        if self.procedure.name == ProcedureName::Ea && self.procedure.rule.is_some() {
            return Err("procedure.rule: not applicable to the ea procedure".into());
        }
        if self.experiment.c_values.contains(&0) {
            return Err("experiment.c_values: entries must be >= 1".into());
        }
        if self.experiment.replications < 1 {
            return Err(format!(
                "experiment.replications: must be >= 1, got {}",
                self.experiment.replications
            ));
        }
        if self.experiment.vary.is_some() && self.experiment.values.is_empty() {
            return Err("experiment.values: must be nonempty when experiment.vary is set".into());
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON serialization of the whole config.
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }

    /// Hash of the problem section plus the truth-estimation parameters,
    /// used for ground-truth cache idempotence.
    pub fn problem_hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(&self.problem).expect("problem serializes"))
    }

    pub fn build_problem(&self) -> Result<Problem, String> {
        match &self.problem {
            ProblemConfig::Synthetic { k, m, variances } => {
                let p = make_synthetic(*k, *m, (*variances).into())
                    .map_err(|e| format!("problem: {e}"))?;
                Ok(Problem::Synthetic(p))
            }
            ProblemConfig::Custom { k, m, means, variances } => {
                let truth = robust_ocba::GroundTruth::new(*k, *m, means.clone(), variances.clone())
                    .map_err(|e| format!("problem: {e}"))?;
                Ok(Problem::Synthetic(SyntheticProblem::from_truth(truth)))
            }
            ProblemConfig::Inventory {
                s_grid,
                order_up_grid,
                demand_means,
                horizon,
                holding_cost,
                fixed_order_cost,
                unit_cost,
                backorder_cost,
                lead_time_mean,
                initial_inventory,
                ..
            } => {
                let cfg = InventoryConfig {
                    horizon: *horizon,
                    holding_cost: *holding_cost,
                    fixed_order_cost: *fixed_order_cost,
                    unit_cost: *unit_cost,
                    backorder_cost: *backorder_cost,
                    lead_time_mean: *lead_time_mean,
                    initial_inventory: *initial_inventory,
                };
                let p = build_inventory_problem(s_grid, order_up_grid, demand_means, cfg)
                    .map_err(|e| format!("problem: {e}"))?;
                Ok(Problem::Inventory(p))
            }
        }
    }

    /// Kind selected by the `procedure` section.
    pub fn procedure_kind(&self) -> ProcedureKind {
        kind_for(self.procedure.name, self.procedure.rule)
    }

    /// Kinds for a `pcs` sweep: the experiment list when given, otherwise the
    /// single configured procedure.
    pub fn sweep_kinds(&self) -> Vec<ProcedureKind> {
        match &self.experiment.procedures {
            Some(names) => names.iter().map(|&n| kind_for(n, None)).collect(),
            None => vec![self.procedure_kind()],
        }
    }

    pub fn config_label(&self) -> String {
        match &self.problem {
            ProblemConfig::Synthetic { k, m, variances } => {
                let v = match variances {
                    VarianceName::Constant => "CV",
                    VarianceName::Increasing => "IV",
                    VarianceName::Decreasing => "DV",
                };
                format!("MM-{v} k={k} m={m}")
            }
            ProblemConfig::Custom { k, m, .. } => format!("custom k={k} m={m}"),
            ProblemConfig::Inventory {
                s_grid,
                order_up_grid,
                demand_means,
                ..
            } => format!(
                "inventory {}x{} policies x {} demands",
                s_grid.len(),
                order_up_grid.len(),
                demand_means.len()
            ),
        }
    }
}

fn kind_for(name: ProcedureName, rule: Option<RuleName>) -> ProcedureKind {
    match (name, rule) {
        (ProcedureName::Ea, _) => ProcedureKind::EqualAllocation,
        (ProcedureName::ArOcbaStarving, _) | (ProcedureName::ArOcba, Some(RuleName::MostStarving)) => {
            ProcedureKind::ArOcba(AllocationRule::MostStarving)
        }
        (ProcedureName::ArOcba, _) => ProcedureKind::ArOcba(AllocationRule::Proportional),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}
