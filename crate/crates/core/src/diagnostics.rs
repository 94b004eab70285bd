//! Discrete mechanical energy, online dissipation checks and the per-iteration
//! trace format.
//!
//! Trace files are tab-separated with a single header line:
//!
//! ```text
//! iter  agent_id  x0 .. x{d-1}  v0 .. v{d-1}  m  F  E
//! ```
//!
//! one line per surviving agent per recorded iteration, floats written with
//! 17 significant digits. Lifecycle events go to a companion file with
//! columns `iter  kind  agents  detail` (`agents` is a comma-separated id list).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SbiError};
use crate::lifecycle::{EventKind, LifecycleEvent, RunObserver};
use crate::schemes::{SchemeKind, StepOutcome};
use crate::swarm::{SwarmConfig, SwarmState};

/// Absolute slack on every dissipation inequality.
pub const DISSIPATION_SLACK: f64 = 1e-9;

/// `E = (m + ε)/2 ‖v‖² + w F`.
pub fn compute_energy(v: &[f64], m: f64, w: f64, epsilon: f64, f_value: f64) -> f64 {
    let v2: f64 = v.iter().map(|c| c * c).sum();
    0.5 * (m + epsilon) * v2 + w * f_value
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub iteration: usize,
    pub agent: usize,
    /// Amount by which the energy change exceeded the guaranteed bound.
    pub magnitude: f64,
}

fn norm2(a: &[f64]) -> f64 {
    a.iter().map(|c| c * c).sum()
}

fn diff_norm2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Checks one step against the energy law of its scheme.
///
/// * `sbi_imex`: `ΔE ≤ −(m+ε)/2 ‖Δv‖² − h (R (m+ε) − ½ h w L) ‖v^{n+1}‖²`
/// * `sbi_simex`: `ΔE ≤ −(m+ε)/2 ‖Δv‖²`
///
/// Stochastic and gradient-descent steps carry no guarantee and are skipped.
pub fn check_dissipation(
    state_after: &SwarmState,
    outcome: &StepOutcome,
    cfg: &SwarmConfig,
    scheme: SchemeKind,
    lipschitz: f64,
) -> Vec<Violation> {
    if !scheme.is_deterministic_inertial() {
        return Vec::new();
    }
    let h = cfg.h;
    state_after
        .agents
        .iter()
        .enumerate()
        .filter_map(|(k, a)| {
            let eff = outcome.prev_m[k] + cfg.epsilon;
            let dv2 = diff_norm2(&a.v, &outcome.prev_v[k]);
            let mut bound = -0.5 * eff * dv2;
            if scheme == SchemeKind::SbiImex {
                let w = cfg.weights.of(a.id);
                bound -= h * (cfg.friction * eff - 0.5 * h * w * lipschitz) * norm2(&a.v);
            }
            let excess = outcome.energy_after[k] - outcome.energy_before[k] - bound;
            (excess > DISSIPATION_SLACK).then_some(Violation {
                iteration: state_after.iteration,
                agent: a.id,
                magnitude: excess,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub agent_id: usize,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub m: f64,
    pub f: f64,
    pub e: f64,
}

/// Energy history reconstructed from snapshots.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnergyLedger {
    /// One entry per recorded iteration: `(iteration, [(agent id, E)])`.
    pub per_agent: Vec<(usize, Vec<(usize, f64)>)>,
    pub total: Vec<f64>,
    pub dissipation_violations: Vec<Violation>,
    /// Iterations at which merges or removals changed the swarm.
    pub lifecycle_iterations: Vec<usize>,
}

impl EnergyLedger {
    pub fn from_rows(rows: &[TraceRow]) -> Self {
        let mut ledger = EnergyLedger::default();
        for row in rows {
            if ledger.per_agent.last().map(|(it, _)| *it) != Some(row.iter) {
                ledger.per_agent.push((row.iter, Vec::new()));
                ledger.total.push(0.0);
            }
            ledger.per_agent.last_mut().unwrap().1.push((row.agent_id, row.e));
            *ledger.total.last_mut().unwrap() += row.e;
        }
        ledger
    }

    /// Largest increase of the total energy between consecutive snapshots,
    /// skipping transitions into iterations with lifecycle events.
    pub fn max_total_increase(&self) -> f64 {
        self.per_agent
            .windows(2)
            .zip(self.total.windows(2))
            .filter(|(pair, _)| !self.lifecycle_iterations.contains(&pair[1].0))
            .map(|(_, t)| t[1] - t[0])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Observer that records every iteration of a run.
#[derive(Debug, Clone)]
pub struct Trace {
    pub dim: usize,
    pub rows: Vec<TraceRow>,
    pub events: Vec<LifecycleEvent>,
    pub ledger: EnergyLedger,
    cfg: SwarmConfig,
    scheme: SchemeKind,
    lipschitz: f64,
}

impl Trace {
    pub fn new(dim: usize, cfg: &SwarmConfig, scheme: SchemeKind, lipschitz: f64) -> Self {
        Self {
            dim,
            rows: Vec::new(),
            events: Vec::new(),
            ledger: EnergyLedger::default(),
            cfg: cfg.clone(),
            scheme,
            lipschitz,
        }
    }

    fn snapshot(&mut self, state: &SwarmState) {
        let mut energies = Vec::with_capacity(state.len());
        for a in &state.agents {
            let e = compute_energy(&a.v, a.m, self.cfg.weights.of(a.id), self.cfg.epsilon, a.f);
            energies.push((a.id, e));
            self.rows.push(TraceRow {
                iter: state.iteration,
                agent_id: a.id,
                x: a.x.clone(),
                v: a.v.clone(),
                m: a.m,
                f: a.f,
                e,
            });
        }
        self.ledger.total.push(energies.iter().map(|(_, e)| e).sum());
        self.ledger.per_agent.push((state.iteration, energies));
    }

    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        fs::write(path, render_trace(self.dim, &self.rows)).map_err(|e| SbiError::io(path, e))
    }

    pub fn write_events_tsv(&self, path: &Path) -> Result<()> {
        fs::write(path, render_events(&self.events)).map_err(|e| SbiError::io(path, e))
    }
}

impl RunObserver for Trace {
    fn on_start(&mut self, state: &SwarmState) {
        self.snapshot(state);
    }

    fn on_step(&mut self, state: &SwarmState, outcome: &StepOutcome) {
        let v = check_dissipation(state, outcome, &self.cfg, self.scheme, self.lipschitz);
        self.ledger.dissipation_violations.extend(v);
    }

    fn on_iteration(&mut self, state: &SwarmState, _outcome: Option<&StepOutcome>, events: &[LifecycleEvent]) {
        if events
            .iter()
            .any(|e| matches!(e.kind, EventKind::Merge | EventKind::Remove | EventKind::Relocate | EventKind::FallbackEntered))
        {
            self.ledger.lifecycle_iterations.push(state.iteration);
        }
        self.events.extend_from_slice(events);
        self.snapshot(state);
    }

    fn on_event(&mut self, event: &LifecycleEvent) {
        self.events.push(event.clone());
    }
}

fn fmt_f64(out: &mut String, v: f64) {
    let _ = write!(out, "{v:.16e}");
}

pub fn render_trace(dim: usize, rows: &[TraceRow]) -> String {
    let mut s = String::from("iter\tagent_id");
    for k in 0..dim {
        let _ = write!(s, "\tx{k}");
    }
    for k in 0..dim {
        let _ = write!(s, "\tv{k}");
    }
    s.push_str("\tm\tF\tE\n");
    for r in rows {
        let _ = write!(s, "{}\t{}", r.iter, r.agent_id);
        for &c in r.x.iter().chain(&r.v).chain([r.m, r.f, r.e].iter()) {
            s.push('\t');
            fmt_f64(&mut s, c);
        }
        s.push('\n');
    }
    s
}

fn parse_field<T: std::str::FromStr>(field: Option<&str>, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let field = field.ok_or_else(|| SbiError::parse("trace", format!("line {line}: missing column")))?;
    field
        .parse()
        .map_err(|e| SbiError::parse("trace", format!("line {line}: {field:?}: {e}")))
}

/// Parses [`render_trace`] output; returns the dimension and rows.
pub fn parse_trace(text: &str) -> Result<(usize, Vec<TraceRow>)> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| SbiError::parse("trace", "empty file"))?;
    let cols = header.split('\t').count();
    if cols < 5 || (cols - 5) % 2 != 0 {
        return Err(SbiError::parse("trace", format!("bad header {header:?}")));
    }
    let dim = (cols - 5) / 2;
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
        let mut it = line.split('\t');
        let iter = parse_field(it.next(), n + 2)?;
        let agent_id = parse_field(it.next(), n + 2)?;
        let mut floats = Vec::with_capacity(2 * dim + 3);
        for _ in 0..2 * dim + 3 {
            floats.push(parse_field::<f64>(it.next(), n + 2)?);
        }
        let x = floats[..dim].to_vec();
        let v = floats[dim..2 * dim].to_vec();
        rows.push(TraceRow {
            iter,
            agent_id,
            x,
            v,
            m: floats[2 * dim],
            f: floats[2 * dim + 1],
            e: floats[2 * dim + 2],
        });
    }
    Ok((dim, rows))
}

pub fn read_trace(path: &Path) -> Result<(usize, Vec<TraceRow>)> {
    let text = fs::read_to_string(path).map_err(|e| SbiError::io(path, e))?;
    parse_trace(&text)
}

pub fn render_events(events: &[LifecycleEvent]) -> String {
    let mut s = String::from("iter\tkind\tagents\tdetail\n");
    for e in events {
        let ids: Vec<String> = e.agents.iter().map(ToString::to_string).collect();
        let _ = write!(s, "{}\t{}\t{}\t", e.iteration, e.kind.name(), ids.join(","));
        fmt_f64(&mut s, e.detail);
        s.push('\n');
    }
    s
}

pub fn parse_events(text: &str) -> Result<Vec<LifecycleEvent>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1).filter(|(_, l)| !l.is_empty()) {
        let mut it = line.split('\t');
        let iteration = parse_field(it.next(), n + 1)?;
        let kind_s: String = parse_field(it.next(), n + 1)?;
        let kind = EventKind::parse(&kind_s)
            .ok_or_else(|| SbiError::parse("events", format!("line {}: kind {kind_s:?}", n + 1)))?;
        let ids: String = it.next().unwrap_or("").to_string();
        let agents = ids
            .split(',')
            .filter(|s| !s.is_empty())
            .map(|s| parse_field(Some(s), n + 1))
            .collect::<Result<Vec<usize>>>()?;
        let detail = parse_field(it.next(), n + 1)?;
        out.push(LifecycleEvent {
            kind,
            iteration,
            agents,
            detail,
        });
    }
    Ok(out)
}
