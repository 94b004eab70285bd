//! Swarm management between steps and the outer optimization loop.
//!
//! After every step: underweight agents are dropped (their mass goes to the
//! best agent when mass is conserved), agents closer than `tol_merge` are
//! fused, and once a single agent remains the run switches to plain gradient
//! descent until the step length drops below `tol_res`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SbiError};
use crate::objectives::Objective;
use crate::schemes::{step, SbgdParams, SchemeKind, StepOutcome};
use crate::swarm::{AgentState, SwarmConfig, SwarmState, UnderweightAction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Merge,
    Remove,
    Relocate,
    FallbackEntered,
    Converged,
    MaxIter,
    Diverged,
}

impl EventKind {
    const ALL: [EventKind; 7] = [
        EventKind::Merge,
        EventKind::Remove,
        EventKind::Relocate,
        EventKind::FallbackEntered,
        EventKind::Converged,
        EventKind::MaxIter,
        EventKind::Diverged,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EventKind::Merge => "merge",
            EventKind::Remove => "remove",
            EventKind::Relocate => "relocate",
            EventKind::FallbackEntered => "fallback_entered",
            EventKind::Converged => "converged",
            EventKind::MaxIter => "max_iter",
            EventKind::Diverged => "diverged",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifecycleEvent {
    pub kind: EventKind,
    pub iteration: usize,
    pub agents: Vec<usize>,
    /// Merge distance, removed mass, or final step length, depending on `kind`.
    pub detail: f64,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Fuses pairs closer than `tol` until no such pair remains. The survivor keeps
/// the lower index's id and sits at the midpoint with averaged velocity and
/// summed mass.
pub fn merge_agents(state: &mut SwarmState, tol: f64, obj: &dyn Objective) -> Vec<LifecycleEvent> {
    let mut events = Vec::new();
    'scan: loop {
        for i in 0..state.len() {
            for j in i + 1..state.len() {
                let d = dist(&state.agents[i].x, &state.agents[j].x);
                if d <= tol {
                    let b = state.agents.remove(j);
                    let a = &mut state.agents[i];
                    events.push(LifecycleEvent {
                        kind: EventKind::Merge,
                        iteration: state.iteration,
                        agents: vec![a.id, b.id],
                        detail: d,
                    });
                    for (k, (xa, va)) in a.x.iter_mut().zip(a.v.iter_mut()).enumerate() {
                        *xa = 0.5 * (*xa + b.x[k]);
                        *va = 0.5 * (*va + b.v[k]);
                    }
                    a.m += b.m;
                    a.f = obj.value(&a.x);
                    continue 'scan;
                }
            }
        }
        return events;
    }
}

/// Handles agents with `m < tol_m / N`. The best agent is never touched.
pub fn remove_underweight(
    state: &mut SwarmState,
    cfg: &SwarmConfig,
    obj: &dyn Objective,
) -> Result<Vec<LifecycleEvent>> {
    let threshold = cfg.tol_m / state.len() as f64;
    let best_id = state.best().id;
    let light: Vec<usize> = state
        .agents
        .iter()
        .filter(|a| a.m < threshold && a.id != best_id)
        .map(|a| a.id)
        .collect();
    let mut events = Vec::with_capacity(light.len());
    match cfg.underweight_action {
        UnderweightAction::Remove => {
            let mut shed = 0.0;
            state.agents.retain(|a| {
                if light.contains(&a.id) {
                    shed += a.m;
                    events.push(LifecycleEvent {
                        kind: EventKind::Remove,
                        iteration: state.iteration,
                        agents: vec![a.id],
                        detail: a.m,
                    });
                    false
                } else {
                    true
                }
            });
            if cfg.conserve_mass {
                let b = state.best_index();
                state.agents[b].m += shed;
            }
        }
        UnderweightAction::Relocate => {
            let region = cfg
                .relocation_box
                .as_ref()
                .ok_or_else(|| SbiError::Config("relocation needs a relocation_box".into()))?;
            for i in 0..state.len() {
                if !light.contains(&state.agents[i].id) {
                    continue;
                }
                let x = region.sample(&mut state.rng);
                let a = &mut state.agents[i];
                a.f = obj.value(&x);
                a.x = x;
                a.v.iter_mut().for_each(|v| *v = 0.0);
                events.push(LifecycleEvent {
                    kind: EventKind::Relocate,
                    iteration: state.iteration,
                    agents: vec![a.id],
                    detail: a.m,
                });
            }
        }
    }
    Ok(events)
}

/// Result of the single-agent fallback.
#[derive(Debug, Clone, PartialEq)]
pub struct DescentOutcome {
    pub agent: AgentState,
    pub iterations: usize,
    pub converged: bool,
    pub last_step: f64,
}

const ARMIJO_C: f64 = 1e-4;
const MIN_STEP: f64 = 1e-16;

/// Gradient descent `x ← x − s ∇F(x)` with `s` starting at `h` and halved
/// until `F` decreases sufficiently. Stops when `‖Δx‖ < tol_res`, when the
/// gradient vanishes, or after `max_inner` iterations. Velocity is zeroed and
/// mass set to 1.
pub fn single_agent_descent(
    agent: &AgentState,
    obj: &dyn Objective,
    h: f64,
    tol_res: f64,
    max_inner: usize,
) -> DescentOutcome {
    let d = agent.x.len();
    let mut x = agent.x.clone();
    let mut f = obj.value(&x);
    let mut g = vec![0.0; d];
    let mut trial = vec![0.0; d];
    let mut converged = false;
    let mut last_step = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_inner {
        iterations += 1;
        obj.gradient(&x, &mut g);
        let g2: f64 = g.iter().map(|c| c * c).sum();
        if g2 == 0.0 || !(h > 0.0) {
            last_step = 0.0;
            converged = true;
            break;
        }
        let mut s = h;
        let f_trial = loop {
            for ((t, xi), gi) in trial.iter_mut().zip(&x).zip(&g) {
                *t = xi - s * gi;
            }
            let ft = obj.value(&trial);
            if ft <= f - ARMIJO_C * s * g2 || s < MIN_STEP {
                break ft;
            }
            s *= 0.5;
        };
        if !f_trial.is_finite() {
            break;
        }
        last_step = dist(&trial, &x);
        if f_trial <= f {
            x.copy_from_slice(&trial);
            f = f_trial;
        }
        if last_step < tol_res {
            converged = true;
            break;
        }
    }
    let mut out = agent.clone();
    out.x = x;
    out.f = f;
    out.v.iter_mut().for_each(|v| *v = 0.0);
    out.m = 1.0;
    DescentOutcome {
        agent: out,
        iterations,
        converged,
        last_step,
    }
}

/// Hook into the outer loop for tracing.
pub trait RunObserver {
    fn on_start(&mut self, _state: &SwarmState) {}
    /// Called right after a scheme step, before any lifecycle change.
    fn on_step(&mut self, _state: &SwarmState, _outcome: &StepOutcome) {}
    /// Called after each step + lifecycle pass; `outcome` is `None` for the
    /// gradient-descent fallback.
    fn on_iteration(&mut self, _state: &SwarmState, _outcome: Option<&StepOutcome>, _events: &[LifecycleEvent]) {}
    /// Terminal event not tied to a step (`max_iter`).
    fn on_event(&mut self, _event: &LifecycleEvent) {}
}

pub struct NoopObserver;
impl RunObserver for NoopObserver {}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub best_x: Vec<f64>,
    pub best_f: f64,
    /// Swarm iterations (fallback iterations are counted in `fallback_iterations`).
    pub iterations: usize,
    pub fallback_iterations: usize,
    pub final_agents: usize,
    pub converged: bool,
    pub diverged: bool,
    pub events: Vec<LifecycleEvent>,
    pub final_state: SwarmState,
}

/// Runs `scheme` until one agent remains and converges, or `max_iter` swarm
/// iterations pass. A non-finite position or value marks the run diverged.
pub fn run(
    state: SwarmState,
    cfg: &SwarmConfig,
    obj: &dyn Objective,
    scheme: SchemeKind,
    sbgd: &SbgdParams,
) -> Result<RunReport> {
    run_observed(state, cfg, obj, scheme, sbgd, &mut NoopObserver)
}

pub fn run_observed(
    mut state: SwarmState,
    cfg: &SwarmConfig,
    obj: &dyn Objective,
    scheme: SchemeKind,
    sbgd: &SbgdParams,
    observer: &mut dyn RunObserver,
) -> Result<RunReport> {
    cfg.validate_for(state.len())?;
    if state.dim() != obj.dim() {
        return Err(SbiError::DimensionMismatch {
            expected: obj.dim(),
            got: state.dim(),
        });
    }
    observer.on_start(&state);
    let mut events = Vec::new();
    let mut converged = false;
    let mut diverged = false;
    let mut fallback_iterations = 0;
    let mut swarm_iterations = 0;

    loop {
        if cfg.lifecycle_enabled && state.len() == 1 {
            let ev = LifecycleEvent {
                kind: EventKind::FallbackEntered,
                iteration: state.iteration,
                agents: vec![state.agents[0].id],
                detail: 0.0,
            };
            events.push(ev.clone());
            let out = single_agent_descent(&state.agents[0], obj, cfg.h, cfg.tol_res, cfg.max_inner);
            fallback_iterations = out.iterations;
            state.agents[0] = out.agent;
            let mut tail = vec![ev];
            if out.converged {
                converged = true;
                tail.push(LifecycleEvent {
                    kind: EventKind::Converged,
                    iteration: state.iteration,
                    agents: vec![state.agents[0].id],
                    detail: out.last_step,
                });
                events.push(tail[1].clone());
            }
            if !state.agents[0].is_finite() {
                diverged = true;
            }
            observer.on_iteration(&state, None, &tail);
            break;
        }
        if swarm_iterations >= cfg.max_iter {
            let ev = LifecycleEvent {
                kind: EventKind::MaxIter,
                iteration: state.iteration,
                agents: vec![],
                detail: 0.0,
            };
            observer.on_event(&ev);
            events.push(ev);
            break;
        }
        let outcome = step(scheme, &mut state, cfg, obj, sbgd)?;
        swarm_iterations += 1;
        observer.on_step(&state, &outcome);
        if state.agents.iter().any(|a| !a.is_finite()) {
            diverged = true;
            let ev = LifecycleEvent {
                kind: EventKind::Diverged,
                iteration: state.iteration,
                agents: state.agents.iter().filter(|a| !a.is_finite()).map(|a| a.id).collect(),
                detail: 0.0,
            };
            events.push(ev.clone());
            observer.on_iteration(&state, Some(&outcome), &[ev]);
            break;
        }
        let mut iter_events = Vec::new();
        if cfg.lifecycle_enabled {
            iter_events.extend(remove_underweight(&mut state, cfg, obj)?);
            iter_events.extend(merge_agents(&mut state, cfg.tol_merge, obj));
        }
        observer.on_iteration(&state, Some(&outcome), &iter_events);
        events.extend(iter_events);
    }

    let best = state
        .agents
        .iter()
        .filter(|a| a.is_finite())
        .min_by(|a, b| a.f.total_cmp(&b.f))
        .cloned();
    let (best_x, best_f) = match best {
        Some(b) => (b.x, b.f),
        None => (state.agents[0].x.clone(), f64::NAN),
    };
    Ok(RunReport {
        best_x,
        best_f,
        iterations: swarm_iterations,
        fallback_iterations,
        final_agents: state.len(),
        converged,
        diverged,
        events,
        final_state: state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{ExpSin1d, Quadratic};

    fn swarm(xs: &[&[f64]], masses: &[f64], obj: &dyn Objective) -> SwarmState {
        let agents = xs
            .iter()
            .zip(masses)
            .enumerate()
            .map(|(i, (x, &m))| AgentState::new(i, x.to_vec(), vec![0.0; x.len()], m, obj))
            .collect();
        SwarmState::new(agents, 0).unwrap()
    }

    #[test]
    fn two_close_agents_merge_to_midpoint() {
        let q = Quadratic::new(2, 1.0);
        let mut s = swarm(&[&[0.0, 0.0], &[0.0005, 0.0]], &[0.3, 0.7], &q);
        s.agents[0].v = vec![1.0, 0.0];
        s.agents[1].v = vec![3.0, 2.0];
        let ev = merge_agents(&mut s, 1e-3, &q);
        assert_eq!(ev.len(), 1);
        assert_eq!(s.len(), 1);
        assert_eq!(s.agents[0].x, vec![0.00025, 0.0]);
        assert_eq!(s.agents[0].v, vec![2.0, 1.0]);
        assert!((s.agents[0].m - 1.0).abs() < 1e-15);
        assert_eq!(s.agents[0].f, q.value(&s.agents[0].x));
    }

    #[test]
    fn three_coincident_agents_fold_to_one() {
        let q = Quadratic::new(1, 1.0);
        let mut s = swarm(&[&[1.0], &[1.0], &[1.0]], &[0.2, 0.3, 0.5], &q);
        let ev = merge_agents(&mut s, 1e-3, &q);
        assert_eq!(ev.len(), 2);
        assert_eq!(ev[0].agents, vec![0, 1]);
        assert_eq!(ev[1].agents, vec![0, 2]);
        assert_eq!(s.len(), 1);
        assert!((s.agents[0].m - 1.0).abs() < 1e-15);
    }

    #[test]
    fn far_agents_stay() {
        let q = Quadratic::new(1, 1.0);
        let mut s = swarm(&[&[0.0], &[0.0011]], &[0.5, 0.5], &q);
        assert!(merge_agents(&mut s, 1e-3, &q).is_empty());
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn light_agent_is_removed_and_mass_kept() {
        let q = Quadratic::new(1, 1.0);
        let mut s = swarm(&[&[0.1], &[2.0], &[3.0]], &[0.99998, 1e-5, 1e-5], &q);
        let cfg = SwarmConfig::default();
        let ev = remove_underweight(&mut s, &cfg, &q).unwrap();
        assert_eq!(ev.len(), 2);
        assert_eq!(s.len(), 1);
        assert!((s.total_mass() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn best_agent_survives_even_if_light() {
        let q = Quadratic::new(1, 1.0);
        let mut s = swarm(&[&[0.0], &[2.0]], &[1e-9, 1.0 - 1e-9], &q);
        let cfg = SwarmConfig::default();
        remove_underweight(&mut s, &cfg, &q).unwrap();
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn relocation_keeps_count() {
        let q = Quadratic::new(1, 1.0);
        let mut s = swarm(&[&[0.0], &[2.0]], &[1.0 - 1e-9, 1e-9], &q);
        let cfg = SwarmConfig {
            underweight_action: UnderweightAction::Relocate,
            relocation_box: Some(crate::objectives::Domain::cube(1, 10.0, 11.0)),
            ..Default::default()
        };
        let ev = remove_underweight(&mut s, &cfg, &q).unwrap();
        assert_eq!(ev[0].kind, EventKind::Relocate);
        assert_eq!(s.len(), 2);
        assert!((10.0..=11.0).contains(&s.agents[1].x[0]));
        assert_eq!(s.agents[1].v, vec![0.0]);
    }

    #[test]
    fn descent_from_minimum_stops_immediately() {
        let q = Quadratic::new(2, 1.0);
        let a = AgentState::new(0, vec![0.0, 0.0], vec![0.0, 0.0], 1.0, &q);
        let out = single_agent_descent(&a, &q, 0.5, 1e-5, 100);
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
        assert_eq!(out.agent.x, vec![0.0, 0.0]);
    }

    #[test]
    fn descent_converges_on_stiff_1d_problem() {
        let obj = ExpSin1d::new();
        let a = AgentState::new(0, vec![1.4], vec![0.0], 0.2, &obj);
        let out = single_agent_descent(&a, &obj, 0.5, 1e-5, 100_000);
        assert!(out.converged);
        let xs = obj.known_min().unwrap().point[0];
        assert!((out.agent.x[0] - xs).abs() < 1e-4, "{}", out.agent.x[0]);
        assert_eq!(out.agent.m, 1.0);
    }

    #[test]
    fn run_on_quadratic_converges_to_origin() {
        let q = Quadratic::new(2, 1.0);
        let xs = vec![vec![1.0, -1.0], vec![2.0, 0.5], vec![-1.5, 1.0], vec![0.3, 0.3]];
        let vs = vec![vec![0.0; 2]; 4];
        let s = SwarmState::from_points(xs, vs, &q, 4).unwrap();
        let cfg = SwarmConfig {
            max_iter: 5000,
            ..Default::default()
        };
        let r = run(s, &cfg, &q, SchemeKind::SbiSimex, &SbgdParams::default()).unwrap();
        assert!(!r.diverged);
        assert!(r.best_f < 1e-6, "{r:?}");
        assert!(r.final_agents >= 1);
    }

    #[test]
    fn max_iter_event_when_cap_hit() {
        let q = Quadratic::new(1, 1.0);
        let s = SwarmState::from_points(vec![vec![1.0], vec![-1.0]], vec![vec![0.0], vec![0.0]], &q, 0).unwrap();
        let cfg = SwarmConfig {
            max_iter: 3,
            ..Default::default()
        };
        let r = run(s, &cfg, &q, SchemeKind::SbiImex, &SbgdParams::default()).unwrap();
        assert_eq!(r.iterations, 3);
        assert_eq!(r.events.last().unwrap().kind, EventKind::MaxIter);
    }
}
