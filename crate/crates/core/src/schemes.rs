//! One time step of each optimizer.
//!
//! The inertial schemes update in the order masses → velocities → positions.
//! Both are implicit in `v^{n+1}` only through a positive scalar per agent, so
//! the velocity solve is closed form:
//!
//! ```text
//! v^{n+1} · (1 + hR + Δm/(2(m^n+ε)) + h² w κ/(m^n+ε)) = v^n − h w/(m^n+ε) ∇F(x^n)
//! x^{n+1} = x^n + h v^{n+1}
//! ```
//!
//! with `κ = 0` for SBI-IMEX.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::compute_energy;
use crate::error::{Result, SbiError};
use crate::objectives::Objective;
use crate::swarm::{compute_eta_unregularized, update_masses, SwarmConfig, SwarmState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    SbiImex,
    SbiSimex,
    RsbiSimex,
    Sbgd,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] = [
        SchemeKind::SbiImex,
        SchemeKind::SbiSimex,
        SchemeKind::RsbiSimex,
        SchemeKind::Sbgd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::SbiImex => "sbi_imex",
            SchemeKind::SbiSimex => "sbi_simex",
            SchemeKind::RsbiSimex => "rsbi_simex",
            SchemeKind::Sbgd => "sbgd",
        }
    }

    /// Small stable integer used in seed derivation.
    pub fn id(self) -> u64 {
        match self {
            SchemeKind::SbiImex => 0,
            SchemeKind::SbiSimex => 1,
            SchemeKind::RsbiSimex => 2,
            SchemeKind::Sbgd => 3,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| SbiError::Config(format!("unknown scheme {s:?}")))
    }

    pub fn is_deterministic_inertial(self) -> bool {
        matches!(self, SchemeKind::SbiImex | SchemeKind::SbiSimex)
    }
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-step bookkeeping. The swarm itself is updated in place; this keeps the
/// pre-step quantities needed for energy and acceptance checks.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub prev_x: Vec<Vec<f64>>,
    pub prev_v: Vec<Vec<f64>>,
    pub prev_m: Vec<f64>,
    pub prev_f: Vec<f64>,
    pub energy_before: Vec<f64>,
    pub energy_after: Vec<f64>,
    /// Stochastic acceptance decisions; all `true` for the other schemes.
    pub accepted: Vec<bool>,
    pub lambda: f64,
    /// Agent ids whose SBGD line search underflowed this step.
    pub frozen: Vec<usize>,
}

fn energies(state: &SwarmState, cfg: &SwarmConfig) -> Vec<f64> {
    state
        .agents
        .iter()
        .map(|a| compute_energy(&a.v, a.m, cfg.weights.of(a.id), cfg.epsilon, a.f))
        .collect()
}

fn begin(state: &SwarmState, cfg: &SwarmConfig) -> StepOutcome {
    let n = state.len();
    StepOutcome {
        prev_x: state.agents.iter().map(|a| a.x.clone()).collect(),
        prev_v: state.agents.iter().map(|a| a.v.clone()).collect(),
        prev_m: state.agents.iter().map(|a| a.m).collect(),
        prev_f: state.f_values(),
        energy_before: energies(state, cfg),
        energy_after: Vec::new(),
        accepted: vec![true; n],
        lambda: 0.0,
        frozen: Vec::new(),
    }
}

fn inertial_step(
    state: &mut SwarmState,
    cfg: &SwarmConfig,
    obj: &dyn Objective,
    kappa: f64,
) -> Result<StepOutcome> {
    let mut out = begin(state, cfg);
    let masses = update_masses(state, cfg)?;
    out.lambda = masses.lambda;
    let h = cfg.h;
    let mut grad = vec![0.0; state.dim()];
    for (a, &m_new) in state.agents.iter_mut().zip(&masses.new_masses) {
        let eff = a.m + cfg.epsilon;
        let c = cfg.weights.of(a.id) / eff;
        let bracket = 1.0 + h * cfg.friction + (m_new - a.m) / (2.0 * eff) + h * h * c * kappa;
        if !(bracket > 0.0) || !bracket.is_finite() {
            return Err(SbiError::SingularUpdate { agent: a.id, bracket });
        }
        obj.gradient(&a.x, &mut grad);
        for ((x, v), g) in a.x.iter_mut().zip(a.v.iter_mut()).zip(&grad) {
            *v = (*v - h * c * g) / bracket;
            *x += h * *v;
        }
        a.m = m_new;
        a.f = obj.value(&a.x);
    }
    state.iteration += 1;
    out.energy_after = energies(state, cfg);
    Ok(out)
}

/// SBI-IMEX: explicit gradient, implicit friction and mass-rate term.
pub fn step_imex(state: &mut SwarmState, cfg: &SwarmConfig, obj: &dyn Objective) -> Result<StepOutcome> {
    inertial_step(state, cfg, obj, 0.0)
}

/// SBI-SIMEX: IMEX plus the linear stabilization `κ (x^{n+1} − x^n)`.
pub fn step_simex(state: &mut SwarmState, cfg: &SwarmConfig, obj: &dyn Objective) -> Result<StepOutcome> {
    inertial_step(state, cfg, obj, cfg.kappa)
}

/// `P(m) = ½ − ½ tanh(1000 (m − β))`.
pub fn acceptance_probability(m: f64, beta: f64) -> f64 {
    0.5 - 0.5 * (1000.0 * (m - beta)).tanh()
}

/// Per-agent acceptance of a proposed SIMEX step. Improving moves are kept;
/// others survive with probability `P(m^{n+1})`. A rejected agent returns to
/// its previous position and keeps its proposed velocity and mass.
pub fn stochastic_accept(state: &mut SwarmState, outcome: &mut StepOutcome, cfg: &SwarmConfig) {
    let beta = cfg.beta.unwrap_or(1.0 / state.len() as f64);
    let SwarmState { agents, rng, .. } = state;
    for (k, a) in agents.iter_mut().enumerate() {
        if a.f < outcome.prev_f[k] {
            outcome.accepted[k] = true;
            continue;
        }
        let u: f64 = rng.random();
        let keep = u < acceptance_probability(a.m, beta);
        outcome.accepted[k] = keep;
        if !keep {
            a.x.clone_from(&outcome.prev_x[k]);
            a.f = outcome.prev_f[k];
        }
    }
    outcome.energy_after = energies(state, cfg);
}

/// SIMEX step followed by [`stochastic_accept`].
pub fn step_rsbi(state: &mut SwarmState, cfg: &SwarmConfig, obj: &dyn Objective) -> Result<StepOutcome> {
    let mut out = step_simex(state, cfg, obj)?;
    stochastic_accept(state, &mut out, cfg);
    Ok(out)
}

/// Backtracking parameters of the SBGD baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SbgdParams {
    /// Armijo coefficient `λ`.
    pub lambda: f64,
    /// Exponent of `ψ_q(m̃) = m̃^q`.
    pub q: f64,
    pub h_max: f64,
    pub shrink: f64,
}

impl Default for SbgdParams {
    fn default() -> Self {
        Self {
            lambda: 0.2,
            q: 1.0,
            h_max: 1.0,
            shrink: 0.5,
        }
    }
}

const SBGD_MIN_STEP: f64 = 1e-16;

/// Swarm-based gradient descent: mass shedding from worse agents to the best
/// one, then a per-agent backtracking gradient step whose sufficient-decrease
/// requirement scales with relative mass. Velocities are zeroed.
pub fn step_sbgd(
    state: &mut SwarmState,
    cfg: &SwarmConfig,
    obj: &dyn Objective,
    params: &SbgdParams,
) -> Result<StepOutcome> {
    if !(params.shrink > 0.0 && params.shrink < 1.0) || !(params.h_max > 0.0) {
        return Err(SbiError::Config(format!(
            "SBGD needs 0 < shrink < 1 and h_max > 0, got {params:?}"
        )));
    }
    let mut out = begin(state, cfg);
    let f = state.f_values();
    let eta = compute_eta_unregularized(&f);
    let best = state.best_index();
    let total: f64 = out.prev_m.iter().sum();
    let mut masses: Vec<f64> = state
        .agents
        .iter()
        .zip(&eta)
        .map(|(a, e)| a.m - cfg.h * e.powf(cfg.p) * a.m)
        .collect();
    let others: f64 = masses
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != best)
        .map(|(_, m)| m)
        .sum();
    masses[best] = total - others;
    out.lambda = masses[best] - out.prev_m[best];
    let m_max = masses.iter().copied().fold(0.0_f64, f64::max);

    let mut grad = vec![0.0; state.dim()];
    let mut trial = vec![0.0; state.dim()];
    for (a, &m_new) in state.agents.iter_mut().zip(&masses) {
        a.m = m_new;
        a.v.iter_mut().for_each(|v| *v = 0.0);
        obj.gradient(&a.x, &mut grad);
        let g2: f64 = grad.iter().map(|g| g * g).sum();
        if g2 == 0.0 {
            continue;
        }
        let rel = if m_max > 0.0 { m_new / m_max } else { 0.0 };
        let demand = params.lambda * rel.powf(params.q) * g2;
        let mut step = params.h_max;
        loop {
            for ((t, x), g) in trial.iter_mut().zip(&a.x).zip(&grad) {
                *t = x - step * g;
            }
            let f_trial = obj.value(&trial);
            if f_trial <= a.f - demand * step {
                a.x.copy_from_slice(&trial);
                a.f = f_trial;
                break;
            }
            step *= params.shrink;
            if step < SBGD_MIN_STEP {
                out.frozen.push(a.id);
                break;
            }
        }
    }
    state.iteration += 1;
    out.energy_after = energies(state, cfg);
    Ok(out)
}

/// Dispatches one step of `kind`.
pub fn step(
    kind: SchemeKind,
    state: &mut SwarmState,
    cfg: &SwarmConfig,
    obj: &dyn Objective,
    sbgd: &SbgdParams,
) -> Result<StepOutcome> {
    match kind {
        SchemeKind::SbiImex => step_imex(state, cfg, obj),
        SchemeKind::SbiSimex => step_simex(state, cfg, obj),
        SchemeKind::RsbiSimex => step_rsbi(state, cfg, obj),
        SchemeKind::Sbgd => step_sbgd(state, cfg, obj, sbgd),
    }
}

/// Validation oracle for the SIMEX elimination: solves both equations of the
/// coupled `(x^{n+1}, v^{n+1})` system by relaxed fixed-point iteration,
/// without using the closed-form bracket.
pub mod oracle {
    use super::*;

    pub const TOLERANCE: f64 = 1e-12;
    pub const MAX_ITERATIONS: usize = 10_000;

    /// Returns the stepped swarm; the input is left untouched.
    pub fn solve_simex_oracle(
        state: &SwarmState,
        cfg: &SwarmConfig,
        obj: &dyn Objective,
    ) -> Result<SwarmState> {
        let h = cfg.h;
        let eps = cfg.epsilon;
        let f: Vec<f64> = state.agents.iter().map(|a| a.f).collect();
        let lo = f.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // first index attaining the minimum receives the flux
        let best = f.iter().position(|&v| v == lo).unwrap_or(0);
        let phi: Vec<f64> = f
            .iter()
            .map(|&fi| ((fi - lo + eps) / (hi - lo + eps)).powf(cfg.p))
            .collect();
        let flux: f64 = phi.iter().zip(&state.agents).map(|(p, a)| p * a.m).sum();

        let mut next = state.clone();
        let mut grad = vec![0.0; state.dim()];
        for (i, a) in next.agents.iter_mut().enumerate() {
            let m_old = a.m;
            let mut m_new = m_old - h * phi[i] * m_old;
            if cfg.conserve_mass && i == best {
                m_new += h * flux;
            }
            let eff = m_old + eps;
            let w = cfg.weights.of(a.id);
            obj.gradient(&a.x, &mut grad);
            #[allow(clippy::needless_range_loop)]
            for k in 0..a.x.len() {
                let (x0, v0) = (a.x[k], a.v[k]);
                let (xn, vn) = solve_component(
                    x0,
                    v0,
                    grad[k],
                    h,
                    cfg.friction,
                    (m_new - m_old) / eff,
                    w / eff,
                    cfg.kappa,
                )?;
                a.x[k] = xn;
                a.v[k] = vn;
            }
            a.m = m_new;
            a.f = obj.value(&a.x);
        }
        next.iteration += 1;
        Ok(next)
    }

    /// One coordinate of
    /// `x' − x = h v'` and
    /// `v' − v = −(hR + ½ Δm/(m+ε)) v' − h c κ x' + h c (κ x − g)`.
    #[allow(clippy::too_many_arguments)]
    fn solve_component(
        x0: f64,
        v0: f64,
        g: f64,
        h: f64,
        friction: f64,
        rel_dm: f64,
        c: f64,
        kappa: f64,
    ) -> Result<(f64, f64)> {
        let damping = h * friction + 0.5 * rel_dm;
        let forcing = v0 + h * c * (kappa * x0 - g);
        let mut v = v0;
        let mut omega = 1.0;
        let mut last_change = f64::INFINITY;
        // once within TOLERANCE keep iterating to the rounding floor and
        // return the iterate with the smallest residual
        let mut best: Option<(f64, f64)> = None;
        let mut stalled = 0;
        for _ in 0..MAX_ITERATIONS {
            let x = x0 + h * v;
            // v' = forcing − damping v' − h c κ x'  solved for the leading v'
            let target = forcing - damping * v - h * c * kappa * x;
            let change = (target - v).abs();
            if change <= TOLERANCE * (1.0 + v.abs()) {
                match best {
                    Some((c0, _)) if change >= c0 => stalled += 1,
                    _ => {
                        best = Some((change, target));
                        stalled = 0;
                    }
                }
                if change == 0.0 || stalled >= 20 {
                    break;
                }
            }
            if change > 0.9 * last_change && omega > 1e-12 {
                omega *= 0.5;
            }
            last_change = change;
            v += omega * (target - v);
        }
        if let Some((_, v_final)) = best {
            return Ok((x0 + h * v_final, v_final));
        }
        Err(SbiError::OracleFailure {
            iterations: MAX_ITERATIONS,
            residual: last_change,
        })
    }
}
