//! Default success tolerances and the table presets behind `bench-suite`.

use crate::error::{Result, SbiError};
use crate::schemes::SchemeKind;

use super::config::{BoxSpec, ExperimentConfig, MethodSpec, SuccessCriterion, SuccessMode};

/// Objective gap between the global minimum and the best other local minimum.
/// Tests recompute each by grid search / multistart.
pub fn second_minimum_gap(objective: &str, dim: usize) -> Option<f64> {
    match objective {
        // nearest lattice minimum (≈ ±0.995 on one axis)
        "rastrigin" => Some(0.994_959),
        // one coordinate in the shallow well at ≈ 2.7468
        "styblinski_tang" => Some(14.136_7),
        "exp_sin_1d" => Some(0.059_40),
        "oscillatory_1d" => Some(2.037_9),
        // no second local minimum for d ≤ 3; near (−1, 1, …, 1) afterwards,
        // converging to ≈ 3.98662 as d grows
        "rosenbrock" if dim >= 4 => Some(match dim {
            4 => 3.701_4,
            5 => 3.930_8,
            6 => 3.973_9,
            7 => 3.983_6,
            8 => 3.985_9,
            9 => 3.986_4,
            _ => 3.986_6,
        }),
        _ => None,
    }
}

/// `f_gap` with half the second-minimum gap; Rosenbrock at d ≤ 3 uses `1e-3`.
pub fn default_success(objective: &str, dim: usize) -> Result<SuccessCriterion> {
    match (objective, second_minimum_gap(objective, dim)) {
        ("rosenbrock", None) => SuccessCriterion::new(SuccessMode::FGap, 1e-3),
        (_, Some(gap)) => SuccessCriterion::new(SuccessMode::FGap, 0.5 * gap),
        _ => Err(SbiError::Config(format!(
            "no default success criterion for {objective:?}; set [success]"
        ))),
    }
}

pub const TABLE_NAMES: [&str; 4] = ["ex1", "rastrigin", "rosenbrock", "styblinski"];

/// One experiment of a table preset (tables with several dimensions expand to
/// one config per dimension).
pub fn table_preset(name: &str) -> Result<Vec<ExperimentConfig>> {
    let high_dim = |objective: &str, dims: &[usize], pos: [f64; 2], vel: [f64; 2], kappa_factor: Option<f64>| {
        dims.iter()
            .map(|&d| ExperimentConfig {
                objective: objective.into(),
                dim: d,
                methods: vec![
                    MethodSpec::of(SchemeKind::SbiSimex),
                    MethodSpec::of(SchemeKind::RsbiSimex),
                    MethodSpec::of(SchemeKind::Sbgd),
                ],
                sizes: vec![10, 25, 50, 100],
                runs: 1000,
                position_box: BoxSpec::Uniform(pos),
                velocity_box: BoxSpec::Uniform(vel),
                swarm: super::high_dim_swarm(),
                kappa_lipschitz_factor: kappa_factor,
                ..Default::default()
            })
            .collect::<Vec<_>>()
    };
    Ok(match name {
        "ex1" => {
            let un = |s| MethodSpec {
                conserve_mass: Some(false),
                ..MethodSpec::of(s)
            };
            let sbgd = |p: f64, q: f64| MethodSpec {
                label: Some(format!("sbgd_{p}{q}")),
                p: Some(p),
                q: Some(q),
                ..MethodSpec::of(SchemeKind::Sbgd)
            };
            vec![ExperimentConfig {
                objective: "exp_sin_1d".into(),
                dim: 1,
                methods: vec![
                    MethodSpec::of(SchemeKind::SbiSimex),
                    un(SchemeKind::SbiSimex),
                    MethodSpec::of(SchemeKind::SbiImex),
                    un(SchemeKind::SbiImex),
                    sbgd(1.0, 1.0),
                    sbgd(2.0, 1.0),
                ],
                sizes: vec![5, 10, 15, 20, 30],
                runs: 1000,
                position_box: BoxSpec::Uniform([-3.0, -1.0]),
                velocity_box: BoxSpec::Uniform([1.0, 5.0]),
                ..Default::default()
            }]
        }
        "rastrigin" => high_dim("rastrigin", &[2, 3, 4, 5, 6], [-3.0, -1.0], [0.0, 4.0], None),
        // κ = 10 lets light agents take explicit steps of ≈ 1/κ across the
        // stiff valley and blow up; use the stability bound κ ≥ L instead
        "rosenbrock" => high_dim("rosenbrock", &[2, 3, 4, 5, 6, 20], [-2.048, 2.048], [-1.0, 1.0], Some(1.0)),
        "styblinski" => high_dim("styblinski_tang", &[2, 4, 6, 8, 10, 12], [-3.0, 3.0], [-1.0, 1.0], None),
        _ => {
            return Err(SbiError::Config(format!(
                "unknown table {name:?}; expected one of {TABLE_NAMES:?}"
            )))
        }
    })
}
