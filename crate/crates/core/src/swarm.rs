//! Swarm state and the mass dynamics shared by every scheme.
//!
//! Masses follow an explicit Euler step of
//! `ṁ_i = −φ_p(η_i) m_i + α_i Σ_j φ_p(η_j) m_j` (conserved) or
//! `ṁ_i = −φ_p(η_i) m_i` (unconstrained), where `η_i` is the agent's
//! normalized rank between the current best and worst objective values.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SbiError};
use crate::lipschitz::LipschitzEstimate;
use crate::objectives::{Domain, Objective};

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    /// Stable identifier: the agent's index in the initial swarm.
    pub id: usize,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub m: f64,
    /// `F(x)` as of the last position update.
    pub f: f64,
}

impl AgentState {
    pub fn new(id: usize, x: Vec<f64>, v: Vec<f64>, m: f64, obj: &dyn Objective) -> Self {
        let f = obj.value(&x);
        Self { id, x, v, m, f }
    }

    pub fn is_finite(&self) -> bool {
        self.f.is_finite() && self.x.iter().chain(&self.v).all(|c| c.is_finite())
    }
}

#[derive(Debug, Clone)]
pub struct SwarmState {
    pub agents: Vec<AgentState>,
    pub iteration: usize,
    pub rng: ChaCha8Rng,
}

impl SwarmState {
    pub fn new(agents: Vec<AgentState>, seed: u64) -> Result<Self> {
        if agents.is_empty() {
            return Err(SbiError::InvalidArgument("swarm needs at least one agent".into()));
        }
        let d = agents[0].x.len();
        if let Some(a) = agents.iter().find(|a| a.x.len() != d || a.v.len() != d) {
            return Err(SbiError::DimensionMismatch {
                expected: d,
                got: a.x.len().max(a.v.len()),
            });
        }
        Ok(Self {
            agents,
            iteration: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// Builds a swarm with masses `1/N` from position/velocity lists.
    pub fn from_points(
        xs: Vec<Vec<f64>>,
        vs: Vec<Vec<f64>>,
        obj: &dyn Objective,
        seed: u64,
    ) -> Result<Self> {
        if xs.len() != vs.len() {
            return Err(SbiError::DimensionMismatch {
                expected: xs.len(),
                got: vs.len(),
            });
        }
        if let Some(x) = xs.iter().find(|x| x.len() != obj.dim()) {
            return Err(SbiError::DimensionMismatch {
                expected: obj.dim(),
                got: x.len(),
            });
        }
        let m0 = 1.0 / xs.len().max(1) as f64;
        let agents = xs
            .into_iter()
            .zip(vs)
            .enumerate()
            .map(|(id, (x, v))| AgentState::new(id, x, v, m0, obj))
            .collect();
        Self::new(agents, seed)
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.agents[0].x.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.agents.iter().map(|a| a.m).sum()
    }

    pub fn f_values(&self) -> Vec<f64> {
        self.agents.iter().map(|a| a.f).collect()
    }

    pub fn best_index(&self) -> usize {
        argmin(self.agents.iter().map(|a| a.f))
    }

    pub fn best(&self) -> &AgentState {
        &self.agents[self.best_index()]
    }
}

/// Per-agent kinetic/potential balance weights `w_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Weights {
    Shared(f64),
    /// Indexed by [`AgentState::id`].
    PerAgent(Vec<f64>),
}

impl Weights {
    pub fn of(&self, id: usize) -> f64 {
        match self {
            Weights::Shared(w) => *w,
            Weights::PerAgent(ws) => ws[id],
        }
    }

    pub fn max(&self) -> f64 {
        match self {
            Weights::Shared(w) => *w,
            Weights::PerAgent(ws) => ws.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaPolicy {
    /// All Lagrange-multiplier flux goes to the current best agent.
    #[default]
    BestAgent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnderweightAction {
    #[default]
    Remove,
    /// Resample the agent's position in the relocation box, zero its velocity.
    Relocate,
}

/// Scheme and lifecycle parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwarmConfig {
    /// Friction `R`.
    pub friction: f64,
    pub weights: Weights,
    /// Stabilization `κ` (SIMEX only).
    pub kappa: f64,
    pub epsilon: f64,
    pub h: f64,
    /// Exponent of `φ_p(η) = η^p`.
    pub p: f64,
    pub conserve_mass: bool,
    pub alpha_policy: AlphaPolicy,
    pub lipschitz: Option<LipschitzEstimate>,
    pub tol_m: f64,
    pub tol_merge: f64,
    pub tol_res: f64,
    /// Stochastic-acceptance threshold; `None` means `1/N` for the current swarm size.
    pub beta: Option<f64>,
    pub max_iter: usize,
    pub lifecycle_enabled: bool,
    pub underweight_action: UnderweightAction,
    pub relocation_box: Option<Domain>,
    /// Iteration cap of the single-agent gradient-descent fallback.
    pub max_inner: usize,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        Self {
            friction: 1.0,
            weights: Weights::Shared(1e-4),
            kappa: 10.0,
            epsilon: 1e-8,
            h: 0.5,
            p: 1.0,
            conserve_mass: true,
            alpha_policy: AlphaPolicy::BestAgent,
            lipschitz: None,
            tol_m: 1e-4,
            tol_merge: 1e-3,
            tol_res: 1e-5,
            beta: None,
            max_iter: 500,
            lifecycle_enabled: true,
            underweight_action: UnderweightAction::Remove,
            relocation_box: None,
            max_inner: 100_000,
        }
    }
}

impl SwarmConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("friction", self.friction),
            ("epsilon", self.epsilon),
            ("p", self.p),
            ("tol_m", self.tol_m),
            ("tol_merge", self.tol_merge),
            ("tol_res", self.tol_res),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(SbiError::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(SbiError::Config(format!("h must be > 0, got {}", self.h)));
        }
        if self.conserve_mass && self.h > 1.0 {
            return Err(SbiError::StepSizeViolation { h: self.h });
        }
        if !(self.kappa >= 0.0) {
            return Err(SbiError::Config(format!("kappa must be >= 0, got {}", self.kappa)));
        }
        let ok_weight = |w: f64| w > 0.0 && w.is_finite();
        match &self.weights {
            Weights::Shared(w) if !ok_weight(*w) => {
                return Err(SbiError::Config(format!("weight must be > 0, got {w}")))
            }
            Weights::PerAgent(ws) if ws.is_empty() || !ws.iter().all(|&w| ok_weight(w)) => {
                return Err(SbiError::Config("per-agent weights must be non-empty and > 0".into()))
            }
            _ => {}
        }
        if self.underweight_action == UnderweightAction::Relocate && self.relocation_box.is_none() {
            return Err(SbiError::Config(
                "underweight_action = relocate needs a relocation_box".into(),
            ));
        }
        Ok(())
    }

    /// Checks that per-agent weights cover `n` agents.
    pub fn validate_for(&self, n: usize) -> Result<()> {
        self.validate()?;
        if let Weights::PerAgent(ws) = &self.weights {
            if ws.len() < n {
                return Err(SbiError::Config(format!(
                    "{} per-agent weights for {n} agents",
                    ws.len()
                )));
            }
        }
        Ok(())
    }

    /// `min(min_i 2R/(w_i L), 1)`, the step bound for unconditional IMEX dissipation.
    pub fn imex_step_bound(&self, lipschitz: f64) -> f64 {
        if lipschitz <= 0.0 {
            return 1.0;
        }
        (2.0 * self.friction / (self.weights.max() * lipschitz)).min(1.0)
    }
}

/// Index of the smallest value; ties go to the lowest index.
pub fn argmin(values: impl IntoIterator<Item = f64>) -> usize {
    // NaN ranks last
    let key = |v: f64| if v.is_nan() { f64::INFINITY } else { v };
    let mut iter = values.into_iter().map(key).enumerate();
    let Some((mut best, mut best_v)) = iter.next() else {
        return 0;
    };
    for (i, v) in iter {
        if v < best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    argmin(values.into_iter().map(|v| -v))
}

/// `η_i = (F_i − F_min + ε) / (F_max − F_min + ε)`.
pub fn compute_eta(f_values: &[f64], epsilon: f64) -> Vec<f64> {
    let (lo, hi) = min_max(f_values);
    let denom = hi - lo + epsilon;
    f_values.iter().map(|&f| (f - lo + epsilon) / denom).collect()
}

/// `η_i = (F_i − F_min) / (F_max − F_min)`, all zeros when every value is equal.
pub fn compute_eta_unregularized(f_values: &[f64]) -> Vec<f64> {
    let (lo, hi) = min_max(f_values);
    let range = hi - lo;
    if !(range > 0.0) {
        return vec![0.0; f_values.len()];
    }
    f_values.iter().map(|&f| (f - lo) / range).collect()
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// One-hot weights on the best agent.
pub fn select_alpha(f_values: &[f64]) -> Vec<f64> {
    let mut alpha = vec![0.0; f_values.len()];
    if !f_values.is_empty() {
        alpha[argmin(f_values.iter().copied())] = 1.0;
    }
    alpha
}

#[derive(Debug, Clone, PartialEq)]
pub struct MassUpdate {
    pub new_masses: Vec<f64>,
    /// `λ = Σ_j φ_p(η_j) m_j`.
    pub lambda: f64,
}

/// Explicit Euler step of the mass dynamics from the cached `F` values.
pub fn update_masses(state: &SwarmState, cfg: &SwarmConfig) -> Result<MassUpdate> {
    if cfg.conserve_mass && cfg.h > 1.0 {
        return Err(SbiError::StepSizeViolation { h: cfg.h });
    }
    let f = state.f_values();
    let eta = compute_eta(&f, cfg.epsilon);
    let phi: Vec<f64> = eta.iter().map(|e| e.powf(cfg.p)).collect();
    let lambda: f64 = phi.iter().zip(&state.agents).map(|(p, a)| p * a.m).sum();
    let h = cfg.h;
    let new_masses = if cfg.conserve_mass {
        let alpha = match cfg.alpha_policy {
            AlphaPolicy::BestAgent => select_alpha(&f),
        };
        state
            .agents
            .iter()
            .zip(phi.iter().zip(&alpha))
            // exact arithmetic keeps m ≤ 1; cap the receiver's rounding
            .map(|(a, (&p, &al))| (a.m + h * (-p * a.m + al * lambda)).min(1.0))
            .collect()
    } else {
        state
            .agents
            .iter()
            .zip(&phi)
            .map(|(a, &p)| (1.0 - h * p) * a.m)
            .collect()
    };
    Ok(MassUpdate { new_masses, lambda })
}
