//! Recomputes the second-minimum gaps behind the default success tolerances.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sbi_core::harness::presets::second_minimum_gap;
use sbi_core::objectives::{benchmark, Objective};

fn grad(obj: &dyn Objective, x: &[f64]) -> DVector<f64> {
    let mut g = vec![0.0; x.len()];
    obj.gradient(x, &mut g);
    DVector::from_vec(g)
}

fn hessian(obj: &dyn Objective, x: &[f64]) -> DMatrix<f64> {
    let d = x.len();
    let mut h = DMatrix::zeros(d, d);
    for k in 0..d {
        let step = 1e-5 * x[k].abs().max(1.0);
        let (mut p, mut m) = (x.to_vec(), x.to_vec());
        p[k] += step;
        m[k] -= step;
        h.set_column(k, &((grad(obj, &p) - grad(obj, &m)) / (2.0 * step)));
    }
    (h.clone() + h.transpose()) * 0.5
}

/// Damped Newton with gradient-descent fallback; `None` unless it ends at a
/// point with tiny gradient and positive-definite Hessian.
fn local_min(obj: &dyn Objective, start: Vec<f64>) -> Option<(Vec<f64>, f64)> {
    let mut x = DVector::from_vec(start);
    for _ in 0..500 {
        let g = grad(obj, x.as_slice());
        if g.norm() < 1e-10 {
            break;
        }
        let h = hessian(obj, x.as_slice());
        let dir = match h.clone().cholesky() {
            Some(c) => -c.solve(&g),
            None => -g.clone(),
        };
        let f0 = obj.value(x.as_slice());
        let mut t = 1.0;
        loop {
            let trial = &x + &dir * t;
            if obj.value(trial.as_slice()) <= f0 + 1e-4 * t * g.dot(&dir) {
                x = trial;
                break;
            }
            t *= 0.5;
            if t < 1e-14 {
                return None;
            }
        }
    }
    let x = x.as_slice().to_vec();
    let ok = grad(obj, &x).norm() < 1e-7 && hessian(obj, &x).symmetric_eigenvalues().min() > 0.0;
    ok.then(|| {
        let f = obj.value(&x);
        (x, f)
    })
}

/// Best and second-best distinct local minimum values from random starts.
fn two_lowest_multistart(obj: &dyn Objective, lo: f64, hi: f64, starts: usize) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut minima: Vec<f64> = Vec::new();
    for _ in 0..starts {
        let x0 = (0..obj.dim()).map(|_| rng.random_range(lo..hi)).collect();
        if let Some((_, f)) = local_min(obj, x0) {
            if minima.iter().all(|m| (m - f).abs() > 1e-6) {
                minima.push(f);
            }
        }
    }
    minima.sort_by(f64::total_cmp);
    (minima[0], minima[1])
}

/// Discrete minima of a dense 1-D grid.
fn two_lowest_grid(obj: &dyn Objective, lo: f64, hi: f64, points: usize) -> (f64, f64) {
    let xs: Vec<f64> = (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect();
    let fs: Vec<f64> = xs.iter().map(|&x| obj.value(&[x])).collect();
    let mut minima: Vec<f64> = (1..points - 1)
        .filter(|&i| fs[i] < fs[i - 1] && fs[i] <= fs[i + 1])
        .map(|i| fs[i])
        .collect();
    minima.sort_by(f64::total_cmp);
    (minima[0], minima[1])
}

fn check(name: &str, dim: usize, (best, second): (f64, f64), tol: f64) {
    let gap = second - best;
    let preset = second_minimum_gap(name, dim).unwrap();
    assert!((gap - preset).abs() < tol, "{name} d={dim}: computed gap {gap}, preset {preset}");
    let km = benchmark(name, dim).unwrap().known_min().unwrap().value;
    assert!((best - km).abs() < 1e-6, "{name}: best local minimum {best} vs known {km}");
}

#[test]
fn rastrigin_gap() {
    let obj = benchmark("rastrigin", 2).unwrap();
    check("rastrigin", 2, two_lowest_multistart(obj.as_ref(), -3.0, 3.0, 400), 1e-5);
}

#[test]
fn styblinski_tang_gap() {
    for d in [2, 4] {
        let obj = benchmark("styblinski_tang", d).unwrap();
        check("styblinski_tang", d, two_lowest_multistart(obj.as_ref(), -5.0, 5.0, 300), 1e-4);
    }
}

#[test]
fn rosenbrock_gap_from_dimension_four() {
    for d in [4, 5, 6, 8, 12] {
        let obj = benchmark("rosenbrock", d).unwrap();
        check("rosenbrock", d, two_lowest_multistart(obj.as_ref(), -2.048, 2.048, 300), 1e-3);
    }
    assert_eq!(second_minimum_gap("rosenbrock", 3), None);
    let obj = benchmark("rosenbrock", 3).unwrap();
    let (best, _) = two_lowest_multistart_or_single(obj.as_ref());
    assert!(best.abs() < 1e-10);
}

fn two_lowest_multistart_or_single(obj: &dyn Objective) -> (f64, Option<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut minima: Vec<f64> = Vec::new();
    for _ in 0..200 {
        let x0 = (0..obj.dim()).map(|_| rng.random_range(-2.048..2.048)).collect();
        if let Some((_, f)) = local_min(obj, x0) {
            if minima.iter().all(|m| (m - f).abs() > 1e-6) {
                minima.push(f);
            }
        }
    }
    minima.sort_by(f64::total_cmp);
    // d = 3 has a single local minimum
    assert_eq!(minima.len(), 1, "{minima:?}");
    (minima[0], minima.get(1).copied())
}

#[test]
fn one_dimensional_gaps() {
    let e = benchmark("exp_sin_1d", 1).unwrap();
    check("exp_sin_1d", 1, two_lowest_grid(e.as_ref(), -4.0, 4.0, 400_001), 1e-4);
    let o = benchmark("oscillatory_1d", 1).unwrap();
    let dom = o.domain().clone();
    check("oscillatory_1d", 1, two_lowest_grid(o.as_ref(), dom.lower[0], dom.upper[0], 400_001), 1e-3);
}
