//! Experiment configuration: a TOML file plus `--set key=value` overrides.
//!
//! ```toml
//! objective = "exp_sin_1d"
//! dim = 1
//! sizes = [5, 10, 15, 20, 30]
//! runs = 1000
//! seed = 7
//! position_box = [-3.0, -1.0]          # broadcast to every coordinate
//! velocity_box = { lower = [1.0], upper = [5.0] }
//!
//! [[methods]]
//! scheme = "sbi_simex"
//!
//! [[methods]]
//! scheme = "sbi_imex"
//! conserve_mass = false
//!
//! [swarm]
//! kappa = 10.0
//!
//! [success]
//! mode = "f_gap"
//! tol = 0.03
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SbiError};
use crate::objectives::Domain;
use crate::schemes::{SbgdParams, SchemeKind};
use crate::swarm::SwarmConfig;

/// Per-coordinate box: either one `[lo, hi]` pair broadcast over all
/// coordinates or explicit `lower`/`upper` vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoxSpec {
    Uniform([f64; 2]),
    Explicit { lower: Vec<f64>, upper: Vec<f64> },
}

impl BoxSpec {
    pub fn to_domain(&self, dim: usize) -> Result<Domain> {
        match self {
            BoxSpec::Uniform([lo, hi]) => Domain::new(vec![*lo; dim], vec![*hi; dim]),
            BoxSpec::Explicit { lower, upper } => {
                if lower.len() != dim {
                    return Err(SbiError::DimensionMismatch {
                        expected: dim,
                        got: lower.len(),
                    });
                }
                Domain::new(lower.clone(), upper.clone())
            }
        }
        .map_err(|e| SbiError::Config(format!("invalid box: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuccessMode {
    /// `F(x) − F* < tol`
    FGap,
    /// `‖x − x*‖∞ < tol`
    XDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuccessCriterion {
    pub mode: SuccessMode,
    pub tol: f64,
}

impl SuccessCriterion {
    pub fn new(mode: SuccessMode, tol: f64) -> Result<Self> {
        let c = Self { mode, tol };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(SbiError::Config(format!("success tol must be > 0, got {}", self.tol)));
        }
        Ok(())
    }
}

/// One row of a results table: a scheme plus the few parameters the tables vary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    pub scheme: SchemeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conserve_mass: Option<bool>,
    /// Mass-transfer exponent `p`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// SBGD descent exponent `q`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
}

impl MethodSpec {
    pub fn of(scheme: SchemeKind) -> Self {
        Self {
            scheme,
            label: None,
            conserve_mass: None,
            p: None,
            q: None,
        }
    }

    pub fn label(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        let mut s = self.scheme.name().to_string();
        if self.conserve_mass == Some(false) {
            s.push_str("_unconstrained");
        }
        if let Some(p) = self.p {
            s.push_str(&format!("_p{p}"));
        }
        if let Some(q) = self.q {
            s.push_str(&format!("_q{q}"));
        }
        s
    }

    /// Swarm and SBGD parameters with this method's overrides applied.
    pub fn apply(&self, swarm: &SwarmConfig, sbgd: &SbgdParams) -> (SwarmConfig, SbgdParams) {
        let mut s = swarm.clone();
        let mut g = *sbgd;
        if let Some(c) = self.conserve_mass {
            s.conserve_mass = c;
        }
        if let Some(p) = self.p {
            s.p = p;
        }
        if let Some(q) = self.q {
            g.q = q;
        }
        (s, g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Also write per-iteration traces (only used by the `trace` verb).
    pub trace: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub objective: String,
    pub dim: usize,
    /// Shorthand for a single method when `methods` is empty.
    pub scheme: SchemeKind,
    pub methods: Vec<MethodSpec>,
    pub sizes: Vec<usize>,
    pub runs: usize,
    pub seed: u64,
    /// Worker threads; 0 uses rayon's default.
    pub threads: usize,
    pub position_box: BoxSpec,
    pub velocity_box: BoxSpec,
    /// `None` selects the benchmark's default criterion.
    pub success: Option<SuccessCriterion>,
    pub swarm: SwarmConfig,
    pub sbgd: SbgdParams,
    /// Hessian samples for the Lipschitz estimate when `swarm.lipschitz` is unset.
    pub lipschitz_samples: usize,
    /// When set, `swarm.kappa` is replaced by this multiple of the Lipschitz
    /// estimate (SIMEX is unconditionally stable for `κ ≥ L`).
    pub kappa_lipschitz_factor: Option<f64>,
    /// Record per-trial wall time. Off by default so reports are byte-reproducible.
    pub record_timing: bool,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            objective: "exp_sin_1d".into(),
            dim: 1,
            scheme: SchemeKind::SbiSimex,
            methods: Vec::new(),
            sizes: vec![10],
            runs: 100,
            seed: 0,
            threads: 1,
            position_box: BoxSpec::Uniform([-3.0, -1.0]),
            velocity_box: BoxSpec::Uniform([1.0, 5.0]),
            success: None,
            swarm: SwarmConfig::default(),
            sbgd: SbgdParams::default(),
            lipschitz_samples: crate::lipschitz::DEFAULT_SAMPLES,
            kappa_lipschitz_factor: None,
            record_timing: false,
            output: OutputConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| SbiError::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| SbiError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| SbiError::Config(format!("config: {e}")))
    }

    /// The configuration as recorded in reports: execution settings (`threads`,
    /// `[output]`) are dropped so results do not depend on where they ran.
    pub fn to_report_toml(&self) -> Result<String> {
        let mut root = toml::Table::try_from(self).map_err(|e| SbiError::Config(format!("config: {e}")))?;
        root.remove("threads");
        root.remove("output");
        toml::to_string(&root).map_err(|e| SbiError::Config(format!("config: {e}")))
    }

    /// Applies `key=value` overrides, where `key` is a dotted path
    /// (`swarm.kappa`, `runs`, `output.dir`) and `value` a TOML literal.
    /// Bare words that are not valid TOML are taken as strings.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut root = toml::Table::try_from(self)
            .map_err(|e| SbiError::Config(format!("config: {e}")))?;
        for item in overrides {
            let item = item.as_ref();
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| SbiError::Config(format!("override {item:?} is not key=value")))?;
            let value = parse_literal(raw.trim());
            set_path(&mut root, key.trim(), value)?;
        }
        let text = toml::to_string(&root).map_err(|e| SbiError::Config(format!("config: {e}")))?;
        Self::from_toml_str(&text)
    }

    pub fn methods(&self) -> Vec<MethodSpec> {
        if self.methods.is_empty() {
            vec![MethodSpec::of(self.scheme)]
        } else {
            self.methods.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(SbiError::Config("runs must be >= 1".into()));
        }
        if self.dim == 0 {
            return Err(SbiError::Config("dim must be >= 1".into()));
        }
        if self.sizes.contains(&0) {
            return Err(SbiError::Config("swarm sizes must be >= 1".into()));
        }
        // reports embed the config as TOML, whose integers are i64
        if self.seed > i64::MAX as u64 {
            return Err(SbiError::Config(format!("seed must be <= {}, got {}", i64::MAX, self.seed)));
        }
        self.position_box.to_domain(self.dim)?;
        self.velocity_box.to_domain(self.dim)?;
        if let Some(c) = &self.success {
            c.validate()?;
        }
        if let Some(f) = self.kappa_lipschitz_factor {
            if !(f >= 0.0) || !f.is_finite() {
                return Err(SbiError::Config(format!("kappa_lipschitz_factor must be >= 0, got {f}")));
            }
        }
        for m in self.methods() {
            let (s, _) = m.apply(&self.swarm, &self.sbgd);
            s.validate()?;
        }
        Ok(())
    }
}

fn parse_literal(raw: &str) -> toml::Value {
    #[derive(Deserialize)]
    struct Wrap {
        v: toml::Value,
    }
    toml::from_str::<Wrap>(&format!("v = {raw}"))
        .map(|w| w.v)
        .unwrap_or_else(|_| toml::Value::String(raw.to_string()))
}

fn set_path(root: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| SbiError::Config(format!("empty override key {key:?}")))?;
    let mut table = root;
    for p in parts {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| SbiError::Config(format!("override {key:?}: {p:?} is not a table")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}
