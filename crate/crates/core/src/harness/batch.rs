//! Seeding, swarm initialization, success classification and parallel batches.

use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Result, SbiError};
use crate::lifecycle::{run_observed, NoopObserver, RunObserver, RunReport};
use crate::lipschitz::{estimate_lipschitz_on, LipschitzEstimate};
use crate::objectives::{Objective, ObjectiveRegistry};
use crate::swarm::{AgentState, SwarmState};

use super::config::{ExperimentConfig, MethodSpec, SuccessCriterion, SuccessMode};
use super::presets::default_success;
use super::report::{summarize, ExperimentReport, TrialRecord};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one trial: SplitMix64 folded over `(master, trial, n, scheme id)`,
/// `s ← splitmix64(s ⊕ k)` for each key in turn.
pub fn trial_seed(master: u64, trial: usize, n: usize, scheme_id: u64) -> u64 {
    [trial as u64, n as u64, scheme_id]
        .into_iter()
        .fold(splitmix64(master), |s, k| splitmix64(s ^ k))
}

/// `N` agents with positions and velocities drawn uniformly from the
/// configured boxes and masses `1/N`.
pub fn initialize_swarm(
    cfg: &ExperimentConfig,
    obj: &dyn Objective,
    n: usize,
    seed: u64,
) -> Result<SwarmState> {
    let pos = cfg.position_box.to_domain(cfg.dim)?;
    let vel = cfg.velocity_box.to_domain(cfg.dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let agents = (0..n)
        .map(|id| {
            let x = pos.sample(&mut rng);
            let v = vel.sample(&mut rng);
            AgentState::new(id, x, v, 1.0 / n as f64, obj)
        })
        .collect();
    // the swarm's own stream (stochastic acceptance, relocation) is decorrelated
    // from the initialization stream
    SwarmState::new(agents, splitmix64(seed ^ 0x5157_4152_4d00_0000))
}

pub fn classify_success(final_x: &[f64], obj: &dyn Objective, crit: &SuccessCriterion) -> Result<bool> {
    let km = obj.known_min().ok_or_else(|| {
        SbiError::Config(format!("objective {:?} has no known minimum to judge success", obj.name()))
    })?;
    if final_x.len() != km.point.len() {
        return Err(SbiError::DimensionMismatch {
            expected: km.point.len(),
            got: final_x.len(),
        });
    }
    if final_x.iter().any(|c| !c.is_finite()) {
        return Ok(false);
    }
    Ok(match crit.mode {
        SuccessMode::FGap => obj.value(final_x) - km.value < crit.tol,
        SuccessMode::XDistance => {
            final_x
                .iter()
                .zip(&km.point)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
                < crit.tol
        }
    })
}

/// Everything a batch needs, resolved once from the configuration.
pub struct Prepared {
    pub cfg: ExperimentConfig,
    pub objective: Arc<dyn Objective>,
    pub success: SuccessCriterion,
    pub lipschitz: LipschitzEstimate,
    pub methods: Vec<MethodSpec>,
}

impl Prepared {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        Self::with_registry(cfg, &ObjectiveRegistry::with_benchmarks())
    }

    pub fn with_registry(cfg: &ExperimentConfig, registry: &ObjectiveRegistry) -> Result<Self> {
        cfg.validate()?;
        let objective = registry.build(&cfg.objective, cfg.dim)?;
        let success = match cfg.success {
            Some(c) => c,
            None => default_success(&cfg.objective, cfg.dim)?,
        };
        // fail before running anything if success cannot be judged
        if objective.known_min().is_none() {
            return Err(SbiError::Config(format!(
                "objective {:?} has no known minimum to judge success",
                cfg.objective
            )));
        }
        let lipschitz = match cfg.swarm.lipschitz {
            Some(l) => l,
            None => {
                let region = cfg.position_box.to_domain(cfg.dim)?.inflated(2.0);
                estimate_lipschitz_on(objective.as_ref(), &region, cfg.lipschitz_samples.max(1), cfg.seed)?
            }
        };
        let mut cfg = cfg.clone();
        cfg.swarm.lipschitz = Some(lipschitz);
        if let Some(factor) = cfg.kappa_lipschitz_factor {
            cfg.swarm.kappa = factor * lipschitz.value;
        }
        let methods = cfg.methods();
        Ok(Self {
            cfg,
            objective,
            success,
            lipschitz,
            methods,
        })
    }

    fn seed_for(&self, trial: usize, n: usize, method: &MethodSpec) -> u64 {
        trial_seed(self.cfg.seed, trial, n, method.scheme.id())
    }

    /// Runs trial `trial` of cell `(n, method)` with `observer` attached.
    pub fn run_trial_observed(
        &self,
        trial: usize,
        n: usize,
        method: &MethodSpec,
        observer: &mut dyn RunObserver,
    ) -> (TrialRecord, Option<RunReport>) {
        let seed = self.seed_for(trial, n, method);
        let start = self.cfg.record_timing.then(Instant::now);
        let (swarm_cfg, sbgd) = method.apply(&self.cfg.swarm, &self.cfg.sbgd);
        let obj = self.objective.as_ref();
        let outcome = initialize_swarm(&self.cfg, obj, n, seed)
            .and_then(|state| run_observed(state, &swarm_cfg, obj, method.scheme, &sbgd, observer));
        let wall_ms = start.map(|t| t.elapsed().as_secs_f64() * 1e3);
        let mut rec = TrialRecord {
            trial,
            n,
            method: method.label(),
            seed,
            final_x: vec![f64::NAN; self.cfg.dim],
            final_f: f64::NAN,
            success: false,
            iterations: 0,
            fallback_iterations: 0,
            diverged: true,
            error: None,
            wall_ms,
        };
        match outcome {
            Ok(r) => {
                rec.success = !r.diverged
                    && classify_success(&r.best_x, obj, &self.success).unwrap_or(false);
                rec.final_x = r.best_x.clone();
                rec.final_f = r.best_f;
                rec.iterations = r.iterations;
                rec.fallback_iterations = r.fallback_iterations;
                rec.diverged = r.diverged;
                (rec, Some(r))
            }
            Err(e) => {
                rec.error = Some(e.to_string());
                (rec, None)
            }
        }
    }

    pub fn run_trial(&self, trial: usize, n: usize, method: &MethodSpec) -> TrialRecord {
        self.run_trial_observed(trial, n, method, &mut NoopObserver).0
    }

    /// All cells, trials in parallel on a pool of `cfg.threads` workers.
    pub fn run(&self) -> Result<ExperimentReport> {
        let mut jobs = Vec::new();
        let mut order = Vec::new();
        for &n in &self.cfg.sizes {
            for m in &self.methods {
                order.push((n, m.label()));
                jobs.extend((0..self.cfg.runs).map(|t| (n, m, t)));
            }
        }
        let mut builder = rayon::ThreadPoolBuilder::new();
        if self.cfg.threads > 0 {
            builder = builder.num_threads(self.cfg.threads);
        }
        let pool = builder
            .build()
            .map_err(|e| SbiError::Config(format!("thread pool: {e}")))?;
        // indexed collect keeps job order regardless of scheduling
        let trials: Vec<TrialRecord> = pool.install(|| {
            jobs.par_iter()
                .map(|&(n, m, t)| self.run_trial(t, n, m))
                .collect()
        });
        Ok(ExperimentReport {
            objective: self.cfg.objective.clone(),
            dim: self.cfg.dim,
            master_seed: self.cfg.seed,
            success: self.success,
            lipschitz: Some(self.lipschitz),
            config: self.cfg.to_report_toml()?,
            cells: summarize(&trials, &order),
            trials,
        })
    }
}

pub fn run_batch(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    Prepared::new(cfg)?.run()
}
