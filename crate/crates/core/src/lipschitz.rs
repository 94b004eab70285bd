//! Estimates of the gradient Lipschitz constant `L = max ‖D²F‖` over a box.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SbiError};
use crate::objectives::{Domain, Objective};

/// Multiplier applied to the largest sampled Hessian norm.
pub const SAFETY_FACTOR: f64 = 1.5;
pub const DEFAULT_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LipschitzMethod {
    UserSupplied,
    HessianSampling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    pub value: f64,
    pub samples: usize,
    pub method: LipschitzMethod,
}

impl LipschitzEstimate {
    pub fn user_supplied(value: f64) -> Result<Self> {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(SbiError::Config(format!(
                "Lipschitz constant must be finite and >= 0, got {value}"
            )));
        }
        Ok(Self {
            value,
            samples: 1,
            method: LipschitzMethod::UserSupplied,
        })
    }
}

/// Spectral norm of a central-difference Hessian built from the analytic gradient.
pub fn hessian_norm(obj: &dyn Objective, x: &[f64]) -> f64 {
    let d = x.len();
    let mut hess = DMatrix::<f64>::zeros(d, d);
    let mut xp = x.to_vec();
    let mut gp = vec![0.0; d];
    let mut gm = vec![0.0; d];
    for k in 0..d {
        let step = 1e-5 * x[k].abs().max(1.0);
        xp[k] = x[k] + step;
        obj.gradient(&xp, &mut gp);
        xp[k] = x[k] - step;
        obj.gradient(&xp, &mut gm);
        xp[k] = x[k];
        for j in 0..d {
            hess[(j, k)] = (gp[j] - gm[j]) / (2.0 * step);
        }
    }
    let sym = (&hess + hess.transpose()) * 0.5;
    sym.symmetric_eigenvalues()
        .iter()
        .fold(0.0_f64, |acc, e| acc.max(e.abs()))
}

/// Samples `samples` points uniformly in `domain` and returns the largest
/// Hessian norm times [`SAFETY_FACTOR`]. Deterministic in `seed`.
pub fn estimate_lipschitz_on(
    obj: &dyn Objective,
    domain: &Domain,
    samples: usize,
    seed: u64,
) -> Result<LipschitzEstimate> {
    if samples == 0 {
        return Err(SbiError::InvalidArgument("samples must be >= 1".into()));
    }
    if domain.dim() != obj.dim() {
        return Err(SbiError::DimensionMismatch {
            expected: obj.dim(),
            got: domain.dim(),
        });
    }
    if !domain.is_bounded() {
        return Err(SbiError::Config(
            "cannot sample Hessians on an unbounded domain; supply a Lipschitz constant".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_norm = 0.0_f64;
    for _ in 0..samples {
        let x = domain.sample(&mut rng);
        let n = hessian_norm(obj, &x);
        if n.is_finite() {
            max_norm = max_norm.max(n);
        }
    }
    Ok(LipschitzEstimate {
        value: SAFETY_FACTOR * max_norm,
        samples,
        method: LipschitzMethod::HessianSampling,
    })
}

/// [`estimate_lipschitz_on`] over the objective's own domain.
pub fn estimate_lipschitz(obj: &dyn Objective, samples: usize, seed: u64) -> Result<LipschitzEstimate> {
    estimate_lipschitz_on(obj, obj.domain(), samples, seed)
}
