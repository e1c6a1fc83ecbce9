mod common;

use common::{fd_check, random_hyper, random_problem};
use impactloc::gpr::{
    build_joint_kernel, kernel_eval, log_marginal_likelihood, FitOptions, GprModel, KernelKind,
    KernelSpec, TaskCovariance,
};
use impactloc::preprocess::{Standardizer, StdMode};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn analytic_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (x, y) = random_problem(&mut rng, 20, 5);
    for kind in KernelKind::ALL {
        for _ in 0..10 {
            let (spec, tasks) = random_hyper(&mut rng, kind);
            let err = fd_check(&spec, &tasks, &x, &y);
            assert!(err < 1e-4, "{kind}: relative error {err}");
        }
    }
}

#[test]
fn cholesky_lml_matches_dense_determinant() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = DMatrix::from_fn(5, 3, |_, _| rng.random_range(0.0..1.0));
    let y = DMatrix::from_fn(5, 1, |_, _| rng.random_range(-1.0..1.0));
    let spec = KernelSpec {
        kind: KernelKind::Comp,
        log_lengthscale_rbf: 0.2,
        log_scale_cos: 0.1,
        log_noise_variance: (0.05f64).ln(),
    };
    let tasks = TaskCovariance::from_parts(&DMatrix::from_element(1, 1, 0.9), &[0.2]).unwrap();
    let lml = log_marginal_likelihood(&spec, &tasks, &x, &y).unwrap();

    let mut ky = DMatrix::from_fn(5, 5, |i, j| {
        let a: Vec<f64> = x.row(i).iter().copied().collect();
        let b: Vec<f64> = x.row(j).iter().copied().collect();
        kernel_eval(&spec, &a, &b).unwrap() * (0.81 + 0.2)
    });
    for i in 0..5 {
        ky[(i, i)] += 0.05 + 1e-8;
    }
    let yv = y.column(0).into_owned();
    let inv = ky.clone().try_inverse().unwrap();
    let dense = -0.5 * (yv.transpose() * inv * &yv)[0]
        - 0.5 * ky.determinant().ln()
        - 2.5 * std::f64::consts::TAU.ln();
    assert!((lml - dense).abs() < 1e-8, "{lml} vs {dense}");
}

fn fixed_model(
    kind: KernelKind,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    l: f64,
    noise: f64,
) -> GprModel<f64> {
    let spec = KernelSpec {
        kind,
        log_lengthscale_rbf: l.ln(),
        log_scale_cos: 0.0,
        log_noise_variance: noise.ln(),
    };
    let t = y.ncols();
    let tasks = TaskCovariance::from_parts(&DMatrix::identity(t, t), &vec![1e-300; t]).unwrap();
    let none = Standardizer::new(StdMode::None);
    GprModel::condition(x, y, spec, tasks, none.clone(), none).unwrap()
}

#[test]
fn two_point_posterior_matches_hand_solution() {
    let x = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
    let y = DMatrix::from_column_slice(2, 1, &[1.0, 3.0]);
    let m = fixed_model(KernelKind::Rbf, &x, &y, 1.0, 0.1);
    // K = [[a, b], [b, a]], a = 1 + 0.1 + 1e-8, b = e^{-1/2}; k* = [c, c], c = e^{-1/8}
    let a: f64 = 1.1 + 1e-8 + 1e-300;
    let b = (-0.5f64).exp();
    let c = (-0.125f64).exp();
    let det = a * a - b * b;
    let alpha = [(a * 1.0 - b * 3.0) / det, (a * 3.0 - b * 1.0) / det];
    let mean = c * (alpha[0] + alpha[1]);
    let var = 1.0 - c * c * (2.0 * a - 2.0 * b) / det;
    let p = m.predict(&[0.5]).unwrap();
    assert!((p.mean[0] - mean).abs() < 1e-8);
    assert!((p.variance[0] - var).abs() < 1e-8);
}

#[test]
fn far_point_reverts_to_prior() {
    let x = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
    let y = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    let m = fixed_model(KernelKind::Rbf, &x, &y, 0.5, 1e-2);
    let p = m.predict(&[100.0, 100.0]).unwrap();
    let prior = m.prior_variance(&[100.0, 100.0]).unwrap();
    for a in 0..2 {
        assert!((p.variance[a] - prior[a]).abs() < 1e-6);
        assert!(p.mean[a].abs() < 1e-6);
    }
}

#[test]
fn interpolates_training_targets_at_jitter_floor() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = DMatrix::from_fn(12, 3, |_, _| rng.random_range(0.0..1.0));
    let y = DMatrix::from_fn(12, 2, |i, j| 100.0 * x[(i, j)] + 50.0);
    let opts = FitOptions {
        max_iters: 200,
        train_noise: false,
        initial_noise_variance: Some(1e-8),
        input_std: StdMode::Fs,
        ..Default::default()
    };
    let m = GprModel::fit(&x, &y, KernelKind::Rbf, &opts).unwrap();
    for i in 0..12 {
        let row: Vec<f64> = x.row(i).iter().copied().collect();
        let p = m.predict(&row).unwrap();
        for a in 0..2 {
            assert!(
                (p.mean[a] - y[(i, a)]).abs() < 1e-3,
                "point {i}: {} vs {}",
                p.mean[a],
                y[(i, a)]
            );
        }
    }
}

#[test]
fn fit_ascends_and_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (x, y) = random_problem(&mut rng, 15, 4);
    let opts = FitOptions {
        max_iters: 300,
        ..Default::default()
    };
    for kind in KernelKind::ALL {
        let a = GprModel::fit(&x, &y, kind, &opts).unwrap();
        let b = GprModel::fit(&x, &y, kind, &opts).unwrap();
        let t = a.trace().unwrap();
        assert!(t.final_lml > t.initial_lml, "{kind}: {t:?}");
        assert_eq!(a.kernel(), b.kernel());
        assert_eq!(a.tasks(), b.tasks());
    }
}

#[test]
fn cos_prediction_is_scale_invariant_under_ss() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (x, y) = random_problem(&mut rng, 10, 4);
    let opts = FitOptions {
        max_iters: 100,
        ..Default::default()
    };
    let m = GprModel::fit(&x, &y, KernelKind::Cos, &opts).unwrap();
    let q = [0.2, 0.4, 0.1, 0.7];
    let p1 = m.predict(&q).unwrap();
    let p2 = m.predict(&q.map(|v| v * 1.7)).unwrap();
    for a in 0..2 {
        assert!((p1.mean[a] - p2.mean[a]).abs() < 1e-9);
    }
}

#[test]
fn joint_kernel_is_symmetric_psd() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for kind in KernelKind::ALL {
        let (x, _) = random_problem(&mut rng, 30, 5);
        let (spec, tasks) = random_hyper(&mut rng, kind);
        let k = build_joint_kernel(&spec, &tasks, &x, &x).unwrap();
        assert_eq!(k, k.transpose());
        let min = k.symmetric_eigenvalues().min();
        assert!(min >= -1e-8, "{kind}: {min}");
    }
}

#[test]
fn save_and_load_reproduce_predictions_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (x, y) = random_problem(&mut rng, 10, 4);
    let opts = FitOptions {
        max_iters: 50,
        ..Default::default()
    };
    let m = GprModel::fit(&x, &y, KernelKind::Comp, &opts).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("comp.json");
    m.save(&path).unwrap();
    let back = GprModel::<f64>::load(&path).unwrap();
    let q = [0.3, 0.3, 0.6, 0.1];
    assert_eq!(m.predict(&q).unwrap(), back.predict(&q).unwrap());
    assert_eq!(m.log_marginal_likelihood(), back.log_marginal_likelihood());
}
