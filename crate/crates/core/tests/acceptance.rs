//! Acceptance suite: one PASS/FAIL line per criterion. Runs with a custom
//! harness so the lines are always printed; exits non-zero if any fails.
//!
//! Invariant checks recompute energies and bounds here rather than reusing
//! the library's diagnostics.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config as PtConfig, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sbi_core::harness::{initialize_swarm, run_batch, table_preset, trial_seed, ExperimentConfig, ExperimentReport, MethodSpec};
use sbi_core::lifecycle::{merge_agents, remove_underweight};
use sbi_core::objectives::{benchmark, Objective, Quadratic, Rastrigin, BENCHMARK_NAMES};
use sbi_core::schemes::oracle::solve_simex_oracle;
use sbi_core::schemes::{step_imex, step_rsbi, step_simex, SchemeKind, StepOutcome};
use sbi_core::swarm::{AgentState, SwarmConfig, SwarmState, Weights};

const SLACK: f64 = 1e-9;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

// ---------------------------------------------------------------- helpers

/// Exact global bound on ‖∇²F‖ for the two test objectives.
fn lipschitz_of(obj_kind: usize, curvature: f64) -> f64 {
    match obj_kind {
        0 => curvature,
        _ => 2.0 + 40.0 * PI * PI,
    }
}

fn test_objective(kind: usize, dim: usize, curvature: f64) -> Box<dyn Objective> {
    match kind {
        0 => Box::new(Quadratic::new(dim, curvature)),
        _ => Box::new(Rastrigin::new(dim)),
    }
}

fn random_swarm(rng: &mut ChaCha8Rng, obj: &dyn Objective, n: usize, spread: f64, speed: f64) -> SwarmState {
    let d = obj.dim();
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let agents = (0..n)
        .map(|i| {
            let x = (0..d).map(|_| rng.random_range(-spread..spread)).collect();
            let v = (0..d).map(|_| rng.random_range(-speed..speed)).collect();
            AgentState::new(i, x, v, raw[i] / total, obj)
        })
        .collect();
    SwarmState::new(agents, rng.random()).unwrap()
}

fn energy(v: &[f64], m: f64, w: f64, eps: f64, f: f64) -> f64 {
    0.5 * (m + eps) * v.iter().map(|c| c * c).sum::<f64>() + w * f
}

/// Largest excess of `E^{n+1} − E^n` over the guaranteed bound among the
/// agents of one step. `imex_l` selects the IMEX law with that Lipschitz
/// constant; `None` is the SIMEX law.
fn dissipation_excess(after: &SwarmState, out: &StepOutcome, cfg: &SwarmConfig, imex_l: Option<f64>) -> f64 {
    let eps = cfg.epsilon;
    let h = cfg.h;
    after
        .agents
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let w = cfg.weights.of(a.id);
            let before = energy(&out.prev_v[k], out.prev_m[k], w, eps, out.prev_f[k]);
            let now = energy(&a.v, a.m, w, eps, a.f);
            let eff = out.prev_m[k] + eps;
            let dv2: f64 = a.v.iter().zip(&out.prev_v[k]).map(|(p, q)| (p - q) * (p - q)).sum();
            let mut bound = -0.5 * eff * dv2;
            if let Some(l) = imex_l {
                let v2: f64 = a.v.iter().map(|c| c * c).sum();
                bound -= h * (cfg.friction * eff - 0.5 * h * w * l) * v2;
            }
            now - before - bound
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn first_experiment() -> &'static ExperimentReport {
    static REPORT: OnceLock<ExperimentReport> = OnceLock::new();
    REPORT.get_or_init(|| {
        let mut cfg = table_preset("ex1").unwrap().remove(0);
        cfg.threads = 0;
        run_batch(&cfg).unwrap()
    })
}

fn rate(r: &ExperimentReport, n: usize, method: &str) -> f64 {
    100.0 * r.cell(n, method).unwrap_or_else(|| panic!("no cell {method} N={n}")).rate
}

// ---------------------------------------------------------------- criteria

fn mass_properties() -> Verdict {
    let mut runner = TestRunner::new_with_rng(
        PtConfig { cases: 500, failure_persistence: None, ..PtConfig::default() },
        proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha),
    );
    // the mass rule is shared by every scheme; the unconditionally stable ones
    // keep positions finite for 1000 steps (IMEX overflows once an agent's mass
    // drains, see the dissipation criterion)
    let strategy = (1usize..=50, 1usize..=6, 0.01f64..=1.0, 0usize..2, 0usize..2, any::<u64>());
    let worst = std::cell::Cell::new(0.0f64);
    let result = runner.run(&strategy, |(n, d, h, obj_kind, scheme, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let obj = test_objective(obj_kind, d, 1.0);
        let l = lipschitz_of(obj_kind, 1.0);
        let mut s = random_swarm(&mut rng, obj.as_ref(), n, 4.0, 1.0);
        let cfg = SwarmConfig {
            h,
            kappa: 1.1 * l,
            lifecycle_enabled: false,
            ..Default::default()
        };
        for step in 0..1000 {
            let r = if scheme == 0 {
                step_simex(&mut s, &cfg, obj.as_ref())
            } else {
                step_rsbi(&mut s, &cfg, obj.as_ref())
            };
            r.map_err(|e| TestCaseError::fail(format!("step {step}: {e}")))?;
            let total: f64 = s.agents.iter().map(|a| a.m).sum();
            worst.set(worst.get().max((total - 1.0).abs()));
            prop_assert!((total - 1.0).abs() < 1e-12, "step {}: Σm − 1 = {:e}", step, total - 1.0);
            for a in &s.agents {
                prop_assert!((0.0..=1.0).contains(&a.m), "step {}: m = {}", step, a.m);
            }
        }
        Ok(())
    });
    match result {
        Ok(()) => verdict(true, format!("500 swarms × 1000 steps, max |Σm − 1| = {:.1e}", worst.get())),
        Err(e) => verdict(false, e.to_string()),
    }
}

fn dissipation(imex: bool) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(if imex { 2 } else { 3 });
    let mut violations = 0usize;
    let mut steps = 0usize;
    let mut worst = f64::NEG_INFINITY;
    let mut failures = Vec::new();
    let h_cases: &[f64] = if imex { &[0.0] } else { &[0.5, 1.0] };
    for &h_case in h_cases {
        for traj in 0..100 {
            let obj_kind = traj % 2;
            let d = rng.random_range(1..=6);
            let n = rng.random_range(2..=10);
            let curvature = 10f64.powf(rng.random_range(-1.0..1.0));
            let obj = test_objective(obj_kind, d, curvature);
            let l = lipschitz_of(obj_kind, curvature);
            // IMEX at the working weight 1e-4: with w L ≫ 1 agents close to
            // the removal threshold are explicit-unstable and their energies
            // reach magnitudes where a 1e-9 absolute slack is below one ulp.
            // SIMEX is checked over a wide range of weights.
            let w = if imex { 1e-4 } else { 10f64.powf(rng.random_range(-4.0..-1.0)) };
            let mut cfg = SwarmConfig {
                weights: Weights::Shared(w),
                ..Default::default()
            };
            if imex {
                cfg.kappa = 0.0;
                cfg.h = 0.9 * (2.0 * cfg.friction / (w * l)).min(1.0);
            } else {
                cfg.kappa = 1.1 * l;
                cfg.h = h_case;
            }
            let mut s = random_swarm(&mut rng, obj.as_ref(), n, 4.0, 2.0);
            for _ in 0..200 {
                let out = if imex {
                    step_imex(&mut s, &cfg, obj.as_ref())
                } else {
                    step_simex(&mut s, &cfg, obj.as_ref())
                };
                let out = match out {
                    Ok(o) => o,
                    Err(e) => {
                        failures.push(e.to_string());
                        break;
                    }
                };
                steps += 1;
                let excess = dissipation_excess(&s, &out, &cfg, imex.then_some(l));
                worst = worst.max(excess);
                if excess > SLACK || excess.is_nan() {
                    violations += 1;
                }
                remove_underweight(&mut s, &cfg, obj.as_ref()).unwrap();
                merge_agents(&mut s, cfg.tol_merge, obj.as_ref());
            }
        }
    }
    verdict(
        violations == 0 && failures.is_empty(),
        format!(
            "{violations} violations, {} step errors in {steps} steps; max excess over bound {worst:.1e}",
            failures.len()
        ),
    )
}

fn oracle_agreement() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst_oracle, mut worst_imex) = (0.0f64, 0.0f64);
    let mut failures = 0;
    for k in 0..1000 {
        let name = ["rastrigin", "styblinski_tang", "rosenbrock"][k % 3];
        let d = rng.random_range(1..=5).max(if name == "rosenbrock" { 2 } else { 1 });
        let obj = benchmark(name, d).unwrap();
        let n = rng.random_range(1..=8);
        let s = random_swarm(&mut rng, obj.as_ref(), n, 2.0, 1.0);
        let cfg = SwarmConfig {
            h: rng.random_range(0.05..=1.0),
            kappa: rng.random_range(0.0..50.0),
            weights: Weights::Shared(10f64.powf(rng.random_range(-4.0..-1.0))),
            conserve_mass: rng.random_bool(0.5),
            ..Default::default()
        };
        let mut closed = s.clone();
        match (solve_simex_oracle(&s, &cfg, obj.as_ref()), step_simex(&mut closed, &cfg, obj.as_ref())) {
            (Ok(reference), Ok(_)) => {
                for (a, b) in closed.agents.iter().zip(&reference.agents) {
                    for (p, q) in a.x.iter().chain(&a.v).chain([&a.m]).zip(b.x.iter().chain(&b.v).chain([&b.m])) {
                        worst_oracle = worst_oracle.max((p - q).abs());
                    }
                }
            }
            _ => failures += 1,
        }
        let unstab = SwarmConfig { kappa: 0.0, ..cfg };
        let (mut a, mut b) = (s.clone(), s);
        step_simex(&mut a, &unstab, obj.as_ref()).unwrap();
        step_imex(&mut b, &unstab, obj.as_ref()).unwrap();
        for (p, q) in a.agents.iter().zip(&b.agents) {
            for (u, v) in p.x.iter().chain(&p.v).zip(q.x.iter().chain(&q.v)) {
                worst_imex = worst_imex.max((u - v).abs());
            }
        }
    }
    verdict(
        failures == 0 && worst_oracle < 1e-10 && worst_imex < 1e-14,
        format!("vs oracle {worst_oracle:.1e} (< 1e-10), κ=0 vs imex {worst_imex:.1e} (< 1e-14), {failures} failures"),
    )
}

fn gradient_checks() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for name in BENCHMARK_NAMES {
        for d in [1, 2, 5, 10] {
            let Ok(obj) = benchmark(name, d) else { continue };
            let dom = obj.domain().clone();
            let mut g = vec![0.0; d];
            for _ in 0..100 {
                let x = dom.sample(&mut rng);
                obj.gradient(&x, &mut g);
                for k in 0..d {
                    // fourth-order central difference
                    let step = 1e-4 * x[k].abs().max(1.0);
                    let at = |t: f64| {
                        let mut y = x.clone();
                        y[k] += t;
                        obj.value(&y)
                    };
                    let fd = (-at(2.0 * step) + 8.0 * at(step) - 8.0 * at(-step) + at(-2.0 * step)) / (12.0 * step);
                    worst = worst.max((fd - g[k]).abs() / g[k].abs().max(1.0));
                }
            }
            cases += 1;
        }
    }
    verdict(
        worst < 1e-6,
        format!("{cases} (function, d) pairs × 100 points, max relative error {worst:.1e}"),
    )
}

fn first_table() -> Verdict {
    let r = first_experiment();
    let target = [(5, 78.8), (10, 96.5), (15, 99.1), (20, 99.8), (30, 100.0)];
    let got: Vec<f64> = target.iter().map(|&(n, _)| rate(r, n, "sbi_simex")).collect();
    let in_band: Vec<bool> = target.iter().zip(&got).map(|(&(_, t), g)| (g - t).abs() <= 8.0).collect();
    let monotone = got.windows(2).all(|p| p[1] >= p[0]);
    let top = got[4] > 99.0;
    let cells: Vec<String> = target
        .iter()
        .zip(&got)
        .zip(&in_band)
        .map(|((&(n, t), g), ok)| format!("N={n} {g:.1} (ref {t}{})", if *ok { "" } else { ", outside ±8" }))
        .collect();
    verdict(
        in_band.iter().all(|&b| b) && monotone && top,
        format!("{}; monotone {monotone}; N=30 > 99 {top}", cells.join(", ")),
    )
}

fn variants_agree() -> Verdict {
    let r = first_experiment();
    let labels = ["sbi_simex", "sbi_simex_unconstrained", "sbi_imex", "sbi_imex_unconstrained"];
    let rates: Vec<f64> = labels.iter().map(|m| rate(r, 10, m)).collect();
    let spread = rates.iter().copied().fold(f64::NEG_INFINITY, f64::max) - rates.iter().copied().fold(f64::INFINITY, f64::min);
    let in_range = rates.iter().all(|r| (90.0..=100.0).contains(r));
    let shown: Vec<String> = labels.iter().zip(&rates).map(|(l, r)| format!("{l} {r:.1}")).collect();
    verdict(in_range && spread < 6.0, format!("N=10: {}; max pairwise gap {spread:.1}", shown.join(", ")))
}

struct DecayStats {
    increases: usize,
    runs_with_increase: usize,
    slow: usize,
    worst_ratio: f64,
}

fn decay_stats(kappa: f64, runs: usize) -> DecayStats {
    let cfg = ExperimentConfig::default();
    let obj = benchmark("exp_sin_1d", 1).unwrap();
    let swarm = SwarmConfig { lifecycle_enabled: false, kappa, ..cfg.swarm.clone() };
    let w = swarm.weights.of(0);
    let eps = swarm.epsilon;
    let mut st = DecayStats { increases: 0, runs_with_increase: 0, slow: 0, worst_ratio: 0.0 };
    for trial in 0..runs {
        let seed = trial_seed(cfg.seed, trial, 5, SchemeKind::SbiSimex.id());
        let mut s = initialize_swarm(&cfg, obj.as_ref(), 5, seed).unwrap();
        let per_agent = |s: &SwarmState| -> Vec<f64> { s.agents.iter().map(|a| energy(&a.v, a.m, w, eps, a.f)).collect() };
        let initial = per_agent(&s);
        let initial_total: f64 = initial.iter().sum();
        let mut prev = initial.clone();
        let mut reached = false;
        let mut increased = 0;
        for _ in 0..500 {
            step_simex(&mut s, &swarm, obj.as_ref()).unwrap();
            let now = per_agent(&s);
            let total: f64 = now.iter().sum();
            if now.iter().zip(&prev).any(|(a, b)| a - b > SLACK) || total - prev.iter().sum::<f64>() > 5.0 * SLACK {
                increased += 1;
            }
            reached |= total < 0.01 * initial_total && now.iter().zip(&initial).all(|(a, b)| *a < 0.01 * b);
            prev = now;
        }
        let ratio = prev.iter().zip(&initial).map(|(a, b)| a / b).fold(0.0, f64::max);
        st.worst_ratio = st.worst_ratio.max(ratio);
        st.increases += increased;
        st.runs_with_increase += usize::from(increased > 0);
        st.slow += usize::from(!reached);
    }
    st
}

fn energy_decay() -> Verdict {
    let runs = 100;
    let default_kappa = decay_stats(ExperimentConfig::default().swarm.kappa, runs);
    // same runs with the stabilization the dissipation theorem asks for
    let obj = benchmark("exp_sin_1d", 1).unwrap();
    let region = ExperimentConfig::default().position_box.to_domain(1).unwrap().inflated(2.0);
    let l = sbi_core::lipschitz::estimate_lipschitz_on(obj.as_ref(), &region, 1000, 0).unwrap().value;
    let stable = decay_stats(l, runs);
    verdict(
        default_kappa.increases == 0 && default_kappa.slow == 0,
        format!(
            "κ=10: {} of {runs} seeded runs have energy increases ({} steps), {} not below 1% by iteration 500, worst final E/E0 {:.1e}; \
             κ=L={l:.0}: {} runs with increases, {} not below 1%",
            default_kappa.runs_with_increase, default_kappa.increases, default_kappa.slow, default_kappa.worst_ratio, stable.runs_with_increase, stable.slow
        ),
    )
}

fn high_dim_spot_checks() -> Verdict {
    let spot = |table: &str, n: usize| -> f64 {
        let mut cfg = table_preset(table).unwrap().into_iter().find(|c| c.dim == 2).unwrap();
        cfg.runs = 200;
        cfg.sizes = vec![n];
        cfg.methods = vec![MethodSpec::of(SchemeKind::SbiSimex)];
        cfg.threads = 0;
        rate(&run_batch(&cfg).unwrap(), n, "sbi_simex")
    };
    let rosen = spot("rosenbrock", 10);
    let rast = spot("rastrigin", 50);
    let st = spot("styblinski", 10);
    let ok = [rosen >= 90.0, (rast - 95.9).abs() <= 10.0, (st - 95.5).abs() <= 10.0];
    verdict(
        ok.iter().all(|&b| b),
        format!("rosenbrock N=10 {rosen:.1} (≥ 90), rastrigin N=50 {rast:.1} (95.9 ± 10), styblinski_tang N=10 {st:.1} (95.5 ± 10)"),
    )
}

fn sbgd_below() -> Verdict {
    let r = first_experiment();
    let sbgd = rate(r, 10, "sbgd_11");
    let simex = rate(r, 10, "sbi_simex");
    verdict(sbgd < simex, format!("N=10: sbgd_11 {sbgd:.1} < sbi_simex {simex:.1}"))
}

fn determinism() -> Verdict {
    let base = ExperimentConfig {
        sizes: vec![5, 10],
        runs: 100,
        methods: [SchemeKind::SbiSimex, SchemeKind::RsbiSimex, SchemeKind::SbiImex, SchemeKind::Sbgd]
            .into_iter()
            .map(MethodSpec::of)
            .collect(),
        seed: 11,
        ..Default::default()
    };
    let mut texts = Vec::new();
    for threads in [1, 8, 1, 8] {
        let cfg = ExperimentConfig { threads, ..base.clone() };
        texts.push(run_batch(&cfg).unwrap().to_json().unwrap());
    }
    let same = texts.windows(2).all(|p| p[0] == p[1]);
    verdict(same, format!("4 runs (threads 1, 8, 1, 8), {} bytes each, identical {same}", texts[0].len()))
}

fn main() {
    type Criterion = (&'static str, fn() -> Verdict);
    let criteria: [Criterion; 11] = [
        ("mass bounds and conservation", mass_properties),
        ("imex energy dissipation", || dissipation(true)),
        ("simex unconditional dissipation", || dissipation(false)),
        ("closed form vs oracle", oracle_agreement),
        ("gradient checks", gradient_checks),
        ("exp_sin simex success rates", first_table),
        ("sbi variants agree at N=10", variants_agree),
        ("energy decay, lifecycle off", energy_decay),
        ("high-dimensional spot checks", high_dim_spot_checks),
        ("sbgd baseline below simex", sbgd_below),
        ("thread-count determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        failed += usize::from(!v.passed);
        println!(
            "criterion {:>2} {} — {name}: {} [{:.1}s]",
            i + 1,
            if v.passed { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
