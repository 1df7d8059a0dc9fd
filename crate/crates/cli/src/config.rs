//! Scenario configuration: a TOML file with sectioned tables. Unknown keys
//! are rejected so typos surface as parse errors naming the offending key.

use std::fs;
use std::path::Path;

use qlmm_core::optimizer::{Objective, VariableBox, DEFAULT_NODE_LIMIT};
use qlmm_core::qlmm::CostModel;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub ivp: IvpConfig,
    pub sweep: SweepConfig,
    pub optimize: OptimizeConfig,
    #[serde(rename = "box")]
    pub variable_box: BoxConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub cost_model: CostModelConfig,
    #[serde(default)]
    pub tradeoff: TradeoffConfig,
    /// Seed for the threshold search; `--seed` overrides it.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IvpConfig {
    pub kind: IvpKind,
    pub t0: f64,
    pub tf: f64,
    /// Componentwise derivative bounds over all candidates and times.
    pub deriv_upper: Vec<f64>,
    pub deriv_lower: Vec<f64>,
    // spring_mass_damper
    #[serde(default)]
    pub mass: Option<f64>,
    #[serde(default)]
    pub spring: Option<f64>,
    // ballistic
    #[serde(default)]
    pub speed: Option<f64>,
    #[serde(default)]
    pub gravity: Option<f64>,
    // linear_system
    #[serde(default)]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    /// Row/column of the matrix entry replaced by the swept parameter.
    #[serde(default)]
    pub entry: Option<[usize; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IvpKind {
    SpringMassDamper,
    Ballistic,
    LinearSystem,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Display name of the swept parameter.
    pub parameter: String,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl SweepConfig {
    /// Uniform closed grid from `min` to `max` with `count` points.
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        (0..self.count)
            .map(|i| self.min + (self.max - self.min) * i as f64 / (self.count as f64 - 1.0))
            .collect()
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeConfig {
    pub epsilon: f64,
    pub objective: ObjectiveKind,
    #[serde(default)]
    pub qubit_cap: Option<u64>,
    pub k_range: Vec<usize>,
    pub deriv_bound: Vec<f64>,
    #[serde(default)]
    pub h_cap: Option<f64>,
    #[serde(default)]
    pub node_limit: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    MinQubits,
    MinDepth,
    MinDepthUnderQubitCap,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub mantissa: [u32; 2],
    pub exponent: [u32; 2],
    pub margin: [u32; 2],
    pub a0: [u32; 2],
    pub steps: [usize; 2],
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub mode: OracleModeKind,
    /// Dimension compared against the search threshold.
    pub objective_dim: usize,
    /// Dimension whose downward bias crossing marks the step (all-steps).
    pub crossing_dim: usize,
    pub maximize: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            mode: OracleModeKind::FinalTime,
            objective_dim: 0,
            crossing_dim: 1,
            maximize: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleModeKind {
    FinalTime,
    AllSteps,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct CostModelConfig {
    pub depth_per_mantissa_bit: Option<f64>,
    pub depth_per_exponent_bit: Option<f64>,
    pub depth_per_consumed_ancilla: Option<f64>,
    pub depth_constant: Option<f64>,
    pub workspace_per_value_bit: Option<f64>,
}

impl CostModelConfig {
    pub fn build(&self) -> CostModel {
        let mut model = CostModel::default();
        if let Some(v) = self.depth_per_mantissa_bit {
            model.depth_per_mantissa_bit = v;
        }
        if let Some(v) = self.depth_per_exponent_bit {
            model.depth_per_exponent_bit = v;
        }
        if let Some(v) = self.depth_per_consumed_ancilla {
            model.depth_per_consumed_ancilla = v;
        }
        if let Some(v) = self.depth_constant {
            model.depth_constant = v;
        }
        if let Some(v) = self.workspace_per_value_bit {
            model.workspace_per_value_bit = v;
        }
        model
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct TradeoffConfig {
    /// Qubit caps for the capped-depth sweep; derived from the two extreme
    /// solutions when absent.
    pub caps: Option<Vec<u64>>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: Config = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |msg: String| Err(CliError::Config(msg));
        if !(self.ivp.t0 < self.ivp.tf) {
            return fail("ivp: t0 must be below tf".into());
        }
        if self.sweep.count == 0 {
            return fail("sweep: count must be at least 1".into());
        }
        if self.sweep.count > 1 && !(self.sweep.min < self.sweep.max) {
            return fail("sweep: min must be below max".into());
        }
        if !(self.optimize.epsilon > 0.0) {
            return fail("optimize: epsilon must be positive".into());
        }
        if self.optimize.k_range.is_empty() {
            return fail("optimize: k_range must be non-empty".into());
        }
        if self.optimize.objective == ObjectiveKind::MinDepthUnderQubitCap
            && self.optimize.qubit_cap.is_none()
        {
            return fail("optimize: qubit_cap is required for min_depth_under_qubit_cap".into());
        }
        let dim = self.dimension()?;
        for (name, v) in [
            ("ivp.deriv_upper", &self.ivp.deriv_upper),
            ("ivp.deriv_lower", &self.ivp.deriv_lower),
            ("optimize.deriv_bound", &self.optimize.deriv_bound),
        ] {
            if v.len() != dim {
                return fail(format!("{name}: expected {dim} entries, got {}", v.len()));
            }
        }
        for (name, [lo, hi]) in [
            ("box.mantissa", &self.variable_box.mantissa),
            ("box.exponent", &self.variable_box.exponent),
            ("box.margin", &self.variable_box.margin),
            ("box.a0", &self.variable_box.a0),
        ] {
            if lo > hi {
                return fail(format!("{name}: empty range"));
            }
        }
        if self.variable_box.steps[0] > self.variable_box.steps[1] || self.variable_box.steps[0] == 0 {
            return fail("box.steps: empty or zero range".into());
        }
        if self.oracle.objective_dim >= dim || self.oracle.crossing_dim >= dim {
            return fail("oracle: dimension index out of range".into());
        }
        match self.ivp.kind {
            IvpKind::SpringMassDamper => {
                if self.ivp.mass.unwrap_or(1.0) <= 0.0 {
                    return fail("ivp: mass must be positive".into());
                }
            }
            IvpKind::Ballistic => {
                if self.ivp.speed.is_none() {
                    return fail("ivp: ballistic needs `speed`".into());
                }
            }
            IvpKind::LinearSystem => {
                let m = self
                    .ivp
                    .matrix
                    .as_ref()
                    .ok_or_else(|| CliError::Config("ivp: linear_system needs `matrix`".into()))?;
                if m.iter().any(|row| row.len() != m.len()) {
                    return fail("ivp: matrix must be square".into());
                }
                let x0 = self
                    .ivp
                    .x0
                    .as_ref()
                    .ok_or_else(|| CliError::Config("ivp: linear_system needs `x0`".into()))?;
                if x0.len() != m.len() {
                    return fail("ivp: x0 must match the matrix dimension".into());
                }
                if let Some([r, c]) = self.ivp.entry {
                    if r >= m.len() || c >= m.len() {
                        return fail("ivp: entry out of range".into());
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dimension(&self) -> Result<usize, CliError> {
        Ok(match self.ivp.kind {
            IvpKind::SpringMassDamper => 2,
            IvpKind::Ballistic => 3,
            IvpKind::LinearSystem => self
                .ivp
                .matrix
                .as_ref()
                .ok_or_else(|| CliError::Config("ivp: linear_system needs `matrix`".into()))?
                .len(),
        })
    }

    pub fn objective(&self) -> Objective {
        match self.optimize.objective {
            ObjectiveKind::MinQubits => Objective::MinQubits,
            ObjectiveKind::MinDepth => Objective::MinDepth,
            ObjectiveKind::MinDepthUnderQubitCap => {
                Objective::MinDepthUnderQubitCap(self.optimize.qubit_cap.unwrap_or(0))
            }
        }
    }

    pub fn variable_box(&self) -> VariableBox {
        VariableBox {
            mantissa_bits: self.variable_box.mantissa[0]..=self.variable_box.mantissa[1],
            exponent_bits: self.variable_box.exponent[0]..=self.variable_box.exponent[1],
            margin_bits: self.variable_box.margin[0]..=self.variable_box.margin[1],
            a0: self.variable_box.a0[0]..=self.variable_box.a0[1],
            steps: self.variable_box.steps[0]..=self.variable_box.steps[1],
        }
    }

    pub fn node_limit(&self) -> u64 {
        self.optimize.node_limit.unwrap_or(DEFAULT_NODE_LIMIT)
    }
}

/// On-disk scheme description emitted by `optimize` and consumed by `run`
/// and `search`.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeFile {
    pub k: usize,
    pub a0: u32,
    pub h: f64,
    pub steps: usize,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub dimension: Vec<DimensionFile>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionFile {
    pub mantissa: u32,
    pub exponent: u32,
    pub margin: u32,
    pub offset: i32,
    pub bias: f64,
}
