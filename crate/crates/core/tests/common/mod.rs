#![allow(dead_code)]

use impactloc::gpr::{
    lml_with_gradient, log_marginal_likelihood, KernelKind, KernelSpec, TaskCovariance,
};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_problem(rng: &mut ChaCha8Rng, n: usize, m: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let x = DMatrix::from_fn(n, m, |_, _| rng.random_range(0.0..1.0));
    let y = DMatrix::from_fn(n, 2, |i, j| {
        (x[(i, 0)] * 3.0 + j as f64).sin() + x[(i, m - 1)] + 0.1 * rng.random_range(-1.0..1.0)
    });
    (x, y)
}

pub fn random_hyper(
    rng: &mut ChaCha8Rng,
    kind: KernelKind,
) -> (KernelSpec<f64>, TaskCovariance<f64>) {
    let spec = KernelSpec {
        kind,
        log_lengthscale_rbf: rng.random_range(-1.0..1.0),
        log_scale_cos: rng.random_range(-0.5..0.5),
        log_noise_variance: rng.random_range(-4.0..-1.0),
    };
    let b = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
    let v = [rng.random_range(0.05..0.5), rng.random_range(0.05..0.5)];
    (spec, TaskCovariance::from_parts(&b, &v).unwrap())
}

/// Central differences on every hyperparameter, compared with the analytic gradient.
pub fn fd_check(
    spec: &KernelSpec<f64>,
    tasks: &TaskCovariance<f64>,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
) -> f64 {
    let h = 1e-5;
    let (_, g) = lml_with_gradient(spec, tasks, x, y).unwrap();
    let f =
        |s: &KernelSpec<f64>, t: &TaskCovariance<f64>| log_marginal_likelihood(s, t, x, y).unwrap();
    let mut pairs = Vec::new();
    let bump = |which: usize, d: f64| {
        let mut s = *spec;
        match which {
            0 => s.log_lengthscale_rbf += d,
            1 => s.log_scale_cos += d,
            _ => s.log_noise_variance += d,
        }
        s
    };
    for (which, analytic) in [
        (0, g.log_lengthscale_rbf),
        (1, g.log_scale_cos),
        (2, g.log_noise_variance),
    ] {
        let fd = (f(&bump(which, h), tasks) - f(&bump(which, -h), tasks)) / (2.0 * h);
        pairs.push((analytic, fd));
    }
    for i in 0..2 {
        for j in 0..2 {
            let mut tp = tasks.clone();
            tp.factor[i][j] += h;
            let mut tm = tasks.clone();
            tm.factor[i][j] -= h;
            pairs.push((g.factor[(i, j)], (f(spec, &tp) - f(spec, &tm)) / (2.0 * h)));
        }
        let mut tp = tasks.clone();
        tp.log_diag[i] += h;
        let mut tm = tasks.clone();
        tm.log_diag[i] -= h;
        pairs.push((g.log_diag[i], (f(spec, &tp) - f(spec, &tm)) / (2.0 * h)));
    }
    pairs
        .iter()
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-3))
        .fold(0.0, f64::max)
}
