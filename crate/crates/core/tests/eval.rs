use impactloc::eval::{
    error_stats, run_experiment, summarize, synthetic_pair, ExperimentConfig, LocalisationResult,
    SubsetKind,
};
use impactloc::gpr::{FitOptions, KernelKind};
use impactloc::{DatasetF64, ImpactLocation};
use proptest::prelude::*;

fn quick() -> ExperimentConfig {
    ExperimentConfig {
        fit: FitOptions {
            max_iters: 300,
            ..FitOptions::default()
        },
        ..ExperimentConfig::default()
    }
}

fn pair(cfg: &ExperimentConfig) -> (DatasetF64, DatasetF64) {
    synthetic_pair(cfg).unwrap()
}

#[test]
fn reference_targets_are_interpolated() {
    let cfg = ExperimentConfig {
        kernels: vec![KernelKind::Comp],
        fusion: false,
        fit: FitOptions {
            max_iters: 300,
            train_noise: false,
            initial_noise_variance: Some(1e-8),
            ..FitOptions::default()
        },
        ..ExperimentConfig::default()
    };
    let (reference, _) = pair(&cfg);
    let r = run_experiment(&cfg, &reference, &reference).unwrap();
    let e = r.mean_error("COMP").unwrap();
    assert!(e < 1.0, "{e}");
    assert!(r.results.iter().all(|x| x.inside_hull));
}

#[test]
fn ext9_flags_extrapolated_targets() {
    let cfg = ExperimentConfig {
        reference_subset: SubsetKind::Ext9,
        kernels: vec![KernelKind::Rbf],
        fusion: false,
        ..quick()
    };
    let (reference, targets) = pair(&cfg);
    let r = run_experiment(&cfg, &reference, &targets).unwrap();
    assert_eq!(r.n_reference, 9);
    // the 3×3 block of columns 3-5, rows 2-4 spans x 125..165, y 80..120
    for res in &r.results {
        let p = res.true_location;
        let inside = (125.0..=165.0).contains(&p.x) && (80.0..=120.0).contains(&p.y);
        assert_eq!(res.inside_hull, inside, "impact {}", res.impact_id);
    }
    assert_eq!(r.results.iter().filter(|x| x.inside_hull).count(), 9);
}

#[test]
fn reports_are_deterministic() {
    let cfg = ExperimentConfig {
        reference_subset: SubsetKind::Ri15,
        ..quick()
    };
    let (reference, targets) = pair(&cfg);
    let a = run_experiment(&cfg, &reference, &targets).unwrap();
    let b = run_experiment(&cfg, &reference, &targets).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    assert_eq!(a.n_targets, 35);
    assert!(a.summary.per_kernel.contains_key("BMA"));
}

#[test]
fn bad_sensor_subset_is_rejected() {
    let cfg = ExperimentConfig {
        sensor_subset: Some(vec![0, 9]),
        ..quick()
    };
    let (reference, targets) = pair(&cfg);
    assert!(run_experiment(&cfg, &reference, &targets).is_err());
}

fn result(err: f64) -> LocalisationResult<f64> {
    LocalisationResult::new(
        "1",
        1,
        "RBF",
        ImpactLocation::new(0.0, 0.0),
        &[err, 0.0],
        &[1.0, 1.0],
        true,
    )
}

proptest! {
    #[test]
    fn error_is_symmetric(a in prop::array::uniform2(-500.0..500.0f64), b in prop::array::uniform2(-500.0..500.0f64)) {
        let ab = LocalisationResult::new("1", 1, "RBF", ImpactLocation::new(a[0], a[1]), &b, &[0.0, 0.0], true);
        let ba = LocalisationResult::new("1", 1, "RBF", ImpactLocation::new(b[0], b[1]), &a, &[0.0, 0.0], true);
        prop_assert_eq!(ab.error, ba.error);
    }

    #[test]
    fn halves_recombine(errs in prop::collection::vec(0.0..100.0f64, 2..40), cut in 1usize..39) {
        let cut = cut.min(errs.len() - 1);
        let all = summarize(&errs.iter().map(|&e| result(e)).collect::<Vec<_>>()).unwrap().overall;
        let a = error_stats(&errs[..cut]).unwrap();
        let b = error_stats(&errs[cut..]).unwrap();
        let n = errs.len() as f64;
        let mean = (a.mean * a.count as f64 + b.mean * b.count as f64) / n;
        prop_assert!((mean - all.mean).abs() < 1e-9);
        prop_assert_eq!(a.max.max(b.max), all.max);
    }
}
