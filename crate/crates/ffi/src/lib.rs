//! C ABI over `sbi-core`.
//!
//! Objects cross the boundary as opaque handles created by `*_new` and
//! released by the matching `*_free`. Every fallible call returns an
//! [`SbiStatus`]; on failure [`sbi_last_error`] holds a message for the calling
//! thread. Panics are caught at the boundary and reported as
//! [`SbiStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;
use std::sync::Arc;

use sbi_core::harness::{run_batch, ExperimentConfig};
use sbi_core::objectives::{benchmark, Objective};
use sbi_core::schemes::{step, SbgdParams, SchemeKind};
use sbi_core::swarm::{AgentState, SwarmConfig, SwarmState, Weights};
use sbi_core::SbiError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Numerical = 4,
    Io = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbiScheme {
    Imex = 0,
    Simex = 1,
    Rsbi = 2,
    Sbgd = 3,
}

impl From<SbiScheme> for SchemeKind {
    fn from(s: SbiScheme) -> Self {
        match s {
            SbiScheme::Imex => SchemeKind::SbiImex,
            SbiScheme::Simex => SchemeKind::SbiSimex,
            SbiScheme::Rsbi => SchemeKind::RsbiSimex,
            SbiScheme::Sbgd => SchemeKind::Sbgd,
        }
    }
}

/// Plain-data swarm parameters. `beta` ≤ 0 or NaN selects `1/N`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SbiSwarmParams {
    pub friction: f64,
    pub weight: f64,
    pub kappa: f64,
    pub epsilon: f64,
    pub h: f64,
    pub p: f64,
    pub conserve_mass: bool,
    pub tol_m: f64,
    pub tol_merge: f64,
    pub tol_res: f64,
    pub beta: f64,
    pub max_iter: usize,
    pub lifecycle_enabled: bool,
}

impl SbiSwarmParams {
    fn to_config(self) -> SwarmConfig {
        SwarmConfig {
            friction: self.friction,
            weights: Weights::Shared(self.weight),
            kappa: self.kappa,
            epsilon: self.epsilon,
            h: self.h,
            p: self.p,
            conserve_mass: self.conserve_mass,
            tol_m: self.tol_m,
            tol_merge: self.tol_merge,
            tol_res: self.tol_res,
            beta: (self.beta > 0.0).then_some(self.beta),
            max_iter: self.max_iter,
            lifecycle_enabled: self.lifecycle_enabled,
            ..SwarmConfig::default()
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SbiRunSummary {
    pub best_f: f64,
    pub iterations: usize,
    pub fallback_iterations: usize,
    pub final_agents: usize,
    pub converged: bool,
    pub diverged: bool,
}

/// Opaque objective handle.
pub struct SbiObjective {
    inner: Arc<dyn Objective>,
}

/// Opaque swarm handle: state, parameters, objective and scheme.
pub struct SbiSwarm {
    state: SwarmState,
    cfg: SwarmConfig,
    objective: Arc<dyn Objective>,
    scheme: SchemeKind,
    sbgd: SbgdParams,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(err: &SbiError) -> SbiStatus {
    match err {
        SbiError::InvalidArgument(_) | SbiError::DimensionMismatch { .. } | SbiError::StepSizeViolation { .. } => {
            SbiStatus::InvalidArgument
        }
        SbiError::Config(_) | SbiError::Parse { .. } => SbiStatus::Config,
        SbiError::SingularUpdate { .. } | SbiError::OracleFailure { .. } => SbiStatus::Numerical,
        SbiError::Io { .. } => SbiStatus::Io,
    }
}

/// Runs `f` behind the panic barrier and records any error message.
fn guard(f: impl FnOnce() -> Result<(), (SbiStatus, String)>) -> SbiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SbiStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside sbi");
            SbiStatus::Panic
        }
    }
}

fn core<T>(r: sbi_core::Result<T>) -> Result<T, (SbiStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(name: &str) -> (SbiStatus, String) {
    (SbiStatus::NullPointer, format!("{name} is null"))
}

unsafe fn c_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, (SbiStatus, String)> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (SbiStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

unsafe fn in_slice<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], (SbiStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, name: &str) -> Result<&'a mut [f64], (SbiStatus, String)> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sbi_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Default swarm parameters.
#[no_mangle]
pub extern "C" fn sbi_swarm_params_default() -> SbiSwarmParams {
    let d = SwarmConfig::default();
    SbiSwarmParams {
        friction: d.friction,
        weight: d.weights.max(),
        kappa: d.kappa,
        epsilon: d.epsilon,
        h: d.h,
        p: d.p,
        conserve_mass: d.conserve_mass,
        tol_m: d.tol_m,
        tol_merge: d.tol_merge,
        tol_res: d.tol_res,
        beta: 0.0,
        max_iter: d.max_iter,
        lifecycle_enabled: d.lifecycle_enabled,
    }
}

/// Builds a registered benchmark (`rastrigin`, `rosenbrock`, …) of dimension `dim`.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sbi_objective_new(name: *const c_char, dim: usize, out: *mut *mut SbiObjective) -> SbiStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let name = c_str(name, "name")?;
        let inner = core(benchmark(name, dim))?;
        *out = Box::into_raw(Box::new(SbiObjective { inner }));
        Ok(())
    })
}

/// # Safety
/// `obj` must come from [`sbi_objective_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sbi_objective_free(obj: *mut SbiObjective) {
    if !obj.is_null() {
        drop(Box::from_raw(obj));
    }
}

/// # Safety
/// `obj` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sbi_objective_dim(obj: *const SbiObjective, out: *mut usize) -> SbiStatus {
    guard(|| {
        let obj = obj.as_ref().ok_or_else(|| null("obj"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = obj.inner.dim();
        Ok(())
    })
}

/// Evaluates `F(x)`; `x` holds `len` values, which must equal the dimension.
///
/// # Safety
/// `obj` must be a live handle, `x` readable for `len` values, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sbi_objective_value(
    obj: *const SbiObjective,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> SbiStatus {
    guard(|| {
        let obj = obj.as_ref().ok_or_else(|| null("obj"))?;
        let x = in_slice(x, len, "x")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = core(sbi_core::objectives::eval_objective(obj.inner.as_ref(), x))?;
        Ok(())
    })
}

/// Writes `∇F(x)` into `grad` (both of length `len`).
///
/// # Safety
/// `obj` must be a live handle; `x` and `grad` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn sbi_objective_gradient(
    obj: *const SbiObjective,
    x: *const f64,
    len: usize,
    grad: *mut f64,
) -> SbiStatus {
    guard(|| {
        let obj = obj.as_ref().ok_or_else(|| null("obj"))?;
        let x = in_slice(x, len, "x")?;
        let g = core(sbi_core::objectives::eval_gradient(obj.inner.as_ref(), x))?;
        out_slice(grad, len, "grad")?.copy_from_slice(&g);
        Ok(())
    })
}

/// Creates a swarm of `n` agents with masses `1/n`. `x` and `v` are `n × dim`
/// row-major. The objective handle may be freed afterwards.
///
/// # Safety
/// `obj` must be live, `params` readable, `x`/`v` readable for `n·dim`
/// values, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sbi_swarm_new(
    obj: *const SbiObjective,
    params: *const SbiSwarmParams,
    scheme: SbiScheme,
    n: usize,
    x: *const f64,
    v: *const f64,
    seed: u64,
    out: *mut *mut SbiSwarm,
) -> SbiStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let obj = obj.as_ref().ok_or_else(|| null("obj"))?;
        let params = params.as_ref().ok_or_else(|| null("params"))?;
        let d = obj.inner.dim();
        if n == 0 {
            return Err((SbiStatus::InvalidArgument, "swarm needs at least one agent".into()));
        }
        let x = in_slice(x, n * d, "x")?;
        let v = in_slice(v, n * d, "v")?;
        let cfg = params.to_config();
        core(cfg.validate_for(n))?;
        let f = obj.inner.as_ref();
        let agents = (0..n)
            .map(|i| AgentState::new(i, x[i * d..(i + 1) * d].to_vec(), v[i * d..(i + 1) * d].to_vec(), 1.0 / n as f64, f))
            .collect();
        let state = core(SwarmState::new(agents, seed))?;
        *out = Box::into_raw(Box::new(SbiSwarm {
            state,
            cfg,
            objective: Arc::clone(&obj.inner),
            scheme: scheme.into(),
            sbgd: SbgdParams::default(),
        }));
        Ok(())
    })
}

/// # Safety
/// `swarm` must come from [`sbi_swarm_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sbi_swarm_free(swarm: *mut SbiSwarm) {
    if !swarm.is_null() {
        drop(Box::from_raw(swarm));
    }
}

/// Number of live agents (0 for a null handle).
///
/// # Safety
/// `swarm` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sbi_swarm_len(swarm: *const SbiSwarm) -> usize {
    swarm.as_ref().map_or(0, |s| s.state.len())
}

/// One step of the configured scheme, without lifecycle management.
///
/// # Safety
/// `swarm` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sbi_swarm_step(swarm: *mut SbiSwarm) -> SbiStatus {
    guard(|| {
        let s = swarm.as_mut().ok_or_else(|| null("swarm"))?;
        core(step(s.scheme, &mut s.state, &s.cfg, s.objective.as_ref(), &s.sbgd))?;
        Ok(())
    })
}

/// Copies agent `k` (in current order) into `x`, `v` (length `dim`), `m` and `f`.
/// Any output pointer may be null to skip it.
///
/// # Safety
/// `swarm` must be live; non-null outputs must be writable (`x`, `v` for `dim` values).
#[no_mangle]
pub unsafe extern "C" fn sbi_swarm_agent(
    swarm: *const SbiSwarm,
    k: usize,
    x: *mut f64,
    v: *mut f64,
    m: *mut f64,
    f: *mut f64,
) -> SbiStatus {
    guard(|| {
        let s = swarm.as_ref().ok_or_else(|| null("swarm"))?;
        let a = s.state.agents.get(k).ok_or_else(|| {
            (SbiStatus::InvalidArgument, format!("agent index {k} out of range ({} agents)", s.state.len()))
        })?;
        let d = a.x.len();
        if !x.is_null() {
            slice::from_raw_parts_mut(x, d).copy_from_slice(&a.x);
        }
        if !v.is_null() {
            slice::from_raw_parts_mut(v, d).copy_from_slice(&a.v);
        }
        if let Some(m) = m.as_mut() {
            *m = a.m;
        }
        if let Some(f) = f.as_mut() {
            *f = a.f;
        }
        Ok(())
    })
}

/// Runs to completion with lifecycle management. The swarm handle keeps the
/// final state; `best_x` (length `dim`, may be null) receives the answer.
///
/// # Safety
/// `swarm` must be live; `summary` writable; `best_x` null or writable for `dim` values.
#[no_mangle]
pub unsafe extern "C" fn sbi_swarm_run(swarm: *mut SbiSwarm, summary: *mut SbiRunSummary, best_x: *mut f64) -> SbiStatus {
    guard(|| {
        let s = swarm.as_mut().ok_or_else(|| null("swarm"))?;
        let summary = summary.as_mut().ok_or_else(|| null("summary"))?;
        let report = core(sbi_core::run(s.state.clone(), &s.cfg, s.objective.as_ref(), s.scheme, &s.sbgd))?;
        if !best_x.is_null() {
            slice::from_raw_parts_mut(best_x, report.best_x.len()).copy_from_slice(&report.best_x);
        }
        *summary = SbiRunSummary {
            best_f: report.best_f,
            iterations: report.iterations,
            fallback_iterations: report.fallback_iterations,
            final_agents: report.final_agents,
            converged: report.converged,
            diverged: report.diverged,
        };
        s.state = report.final_state;
        Ok(())
    })
}

/// Runs a batch described by a TOML experiment configuration and returns the
/// JSON report in `*json_out`, to be released with [`sbi_string_free`].
///
/// # Safety
/// `toml` must be a NUL-terminated string; `json_out` writable.
#[no_mangle]
pub unsafe extern "C" fn sbi_batch_run(toml: *const c_char, json_out: *mut *mut c_char) -> SbiStatus {
    guard(|| {
        if json_out.is_null() {
            return Err(null("json_out"));
        }
        let cfg = core(ExperimentConfig::from_toml_str(c_str(toml, "toml")?))?;
        let json = core(run_batch(&cfg).and_then(|r| r.to_json()))?;
        *json_out = CString::new(json)
            .map_err(|_| (SbiStatus::Config, "report contains NUL".to_string()))?
            .into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sbi_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
