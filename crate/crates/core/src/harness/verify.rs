//! Quick invariant checks for the `verify` verb. The acceptance tests run the
//! same properties at full size.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diagnostics::check_dissipation;
use crate::lifecycle::{merge_agents, remove_underweight};
use crate::lipschitz::estimate_lipschitz;
use crate::objectives::{benchmark, Objective, Quadratic, BENCHMARK_NAMES};
use crate::schemes::{oracle::solve_simex_oracle, step_imex, step_simex, SchemeKind};
use crate::swarm::{AgentState, SwarmConfig, SwarmState, Weights};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn random_swarm(rng: &mut ChaCha8Rng, obj: &dyn Objective, n: usize, spread: f64) -> SwarmState {
    let d = obj.dim();
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let agents = (0..n)
        .map(|i| {
            let x = (0..d).map(|_| rng.random_range(-spread..spread)).collect();
            let v = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            AgentState::new(i, x, v, raw[i] / total, obj)
        })
        .collect();
    SwarmState::new(agents, rng.random()).expect("non-empty swarm")
}

fn mass_bounds(rng: &mut ChaCha8Rng) -> Check {
    let mut worst: f64 = 0.0;
    let mut bounded = true;
    for _ in 0..50 {
        let d = rng.random_range(1..=4);
        let q = Quadratic::new(d, 1.0);
        let n = rng.random_range(1..=20);
        let mut s = random_swarm(rng, &q, n, 3.0);
        let cfg = SwarmConfig {
            h: rng.random_range(0.05..=1.0),
            lifecycle_enabled: false,
            ..Default::default()
        };
        for _ in 0..200 {
            if step_simex(&mut s, &cfg, &q).is_err() {
                bounded = false;
                break;
            }
            worst = worst.max((s.total_mass() - 1.0).abs());
            bounded &= s.agents.iter().all(|a| (0.0..=1.0).contains(&a.m));
        }
    }
    Check {
        name: "mass bounds and conservation",
        passed: bounded && worst < 1e-12,
        detail: format!("max |Σm − 1| = {worst:.2e}"),
    }
}

fn dissipation(rng: &mut ChaCha8Rng, scheme: SchemeKind) -> Check {
    let obj = benchmark("rastrigin", 2).expect("registered");
    let l = estimate_lipschitz(obj.as_ref(), 400, 1).expect("bounded domain").value;
    let mut violations = 0;
    let mut steps = 0;
    for h_case in [0.5, 1.0] {
        let mut cfg = SwarmConfig {
            weights: Weights::Shared(1e-3),
            kappa: 1.1 * l,
            ..Default::default()
        };
        cfg.h = match scheme {
            SchemeKind::SbiImex => 0.9 * cfg.imex_step_bound(l),
            _ => h_case,
        };
        for _ in 0..10 {
            let mut s = random_swarm(rng, obj.as_ref(), 5, 4.0);
            for _ in 0..100 {
                let stepped = match scheme {
                    SchemeKind::SbiImex => step_imex(&mut s, &cfg, obj.as_ref()),
                    _ => step_simex(&mut s, &cfg, obj.as_ref()),
                };
                let Ok(out) = stepped else {
                    violations += 1;
                    break;
                };
                steps += 1;
                violations += check_dissipation(&s, &out, &cfg, scheme, l).len();
                // as in a real run: agents drained to O(ε) mass are removed
                if remove_underweight(&mut s, &cfg, obj.as_ref()).is_err() {
                    violations += 1;
                    break;
                }
                merge_agents(&mut s, cfg.tol_merge, obj.as_ref());
            }
        }
    }
    Check {
        name: if scheme == SchemeKind::SbiImex {
            "imex energy dissipation"
        } else {
            "simex energy dissipation"
        },
        passed: violations == 0,
        detail: format!("{violations} violations in {steps} steps (L = {l:.1})"),
    }
}

fn oracle_agreement(rng: &mut ChaCha8Rng) -> Check {
    let obj = benchmark("styblinski_tang", 3).expect("registered");
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for _ in 0..100 {
        let mut s = random_swarm(rng, obj.as_ref(), 4, 3.0);
        let cfg = SwarmConfig {
            h: rng.random_range(0.05..=1.0),
            kappa: rng.random_range(0.0..100.0),
            weights: Weights::Shared(rng.random_range(1e-4..1.0)),
            ..Default::default()
        };
        let Ok(reference) = solve_simex_oracle(&s, &cfg, obj.as_ref()) else {
            failures += 1;
            continue;
        };
        if step_simex(&mut s, &cfg, obj.as_ref()).is_err() {
            failures += 1;
            continue;
        }
        for (a, b) in s.agents.iter().zip(&reference.agents) {
            for (p, q) in a.x.iter().chain(&a.v).zip(b.x.iter().chain(&b.v)) {
                worst = worst.max((p - q).abs());
            }
        }
    }
    Check {
        name: "closed-form simex vs fixed-point oracle",
        passed: failures == 0 && worst < 1e-10,
        detail: format!("max deviation {worst:.2e}, {failures} failures"),
    }
}

fn gradients(rng: &mut ChaCha8Rng) -> Check {
    let mut worst: f64 = 0.0;
    for name in BENCHMARK_NAMES {
        let obj = benchmark(name, 3).or_else(|_| benchmark(name, 1)).expect("registered");
        let dom = obj.domain().clone();
        let mut g = vec![0.0; obj.dim()];
        for _ in 0..20 {
            let x = dom.sample(rng);
            obj.gradient(&x, &mut g);
            for k in 0..x.len() {
                let step = 1e-6 * x[k].abs().max(1.0);
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[k] += step;
                xm[k] -= step;
                let fd = (obj.value(&xp) - obj.value(&xm)) / (2.0 * step);
                let rel = (fd - g[k]).abs() / g[k].abs().max(1.0);
                worst = worst.max(rel);
            }
        }
    }
    Check {
        name: "gradients vs central differences",
        passed: worst < 1e-6,
        detail: format!("max relative error {worst:.2e}"),
    }
}

pub fn run_all(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    vec![
        mass_bounds(&mut rng),
        dissipation(&mut rng, SchemeKind::SbiImex),
        dissipation(&mut rng, SchemeKind::SbiSimex),
        oracle_agreement(&mut rng),
        gradients(&mut rng),
    ]
}
