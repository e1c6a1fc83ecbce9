use impactloc::extract::{
    bandpass, envelope, envelope_rise_time, extract_tdoa, signal_arrival, ExtractionConfig,
};
use impactloc::num::argsort;
use impactloc::wavesim::{
    analytic_tdoa, default_sensor_array, synthesize_signals, GridSpec, GvpModel, NoiseModel,
    SyntheticSignal,
};
use impactloc::ImpactLocation;

const FS: f64 = 200.0;

fn gvp() -> GvpModel<f64> {
    GvpModel::elliptical(400.0, 1.0, 0.1).unwrap()
}

fn signals(p: &ImpactLocation<f64>) -> Vec<SyntheticSignal<f64>> {
    synthesize_signals(
        &gvp(),
        &default_sensor_array(),
        p,
        1.0,
        FS,
        f64::INFINITY,
        0,
    )
    .unwrap()
}

fn tone(freq: f64, n: usize) -> SyntheticSignal<f64> {
    let s = (0..n)
        .map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / FS).sin())
        .collect();
    SyntheticSignal::new(s, FS, 0.0).unwrap()
}

fn rms(s: &[f64]) -> f64 {
    (s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64).sqrt()
}

#[test]
fn round_trip_on_all_grid_impacts() {
    let cfg = ExtractionConfig::new(1.0).unwrap();
    for (id, p) in GridSpec::standard().locations::<f64>() {
        let sig = signals(&p);
        let got = extract_tdoa(&sig, &cfg).unwrap();
        let want = analytic_tdoa(
            &gvp(),
            &default_sensor_array(),
            &p,
            1.0,
            &NoiseModel::none(),
        )
        .unwrap();
        assert_eq!(argsort(got.values()), argsort(want.values()), "impact {id}");
        let env = envelope(&bandpass(&sig[0], &cfg).unwrap(), &cfg).unwrap();
        let tol = 0.5 * envelope_rise_time(&env).unwrap();
        for (a, b) in got.values().iter().zip(want.values()) {
            assert!((a - b).abs() <= tol, "impact {id}: {a} vs {b} (tol {tol})");
        }
        assert_eq!(got.frequency(), 1.0);
    }
}

#[test]
fn amplitude_and_shift_invariance() {
    let cfg = ExtractionConfig::new(1.0).unwrap();
    let sig = signals(&ImpactLocation::new(125.0, 80.0));
    let base = extract_tdoa(&sig, &cfg).unwrap();

    let loud: Vec<_> = sig
        .iter()
        .map(|s| s.with_samples(s.samples.iter().map(|v| 37.0 * v).collect()))
        .collect();
    let t = extract_tdoa(&loud, &cfg).unwrap();
    for (a, b) in t.values().iter().zip(base.values()) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }

    // whole-sample delay of every channel
    let shift = 40;
    let late: Vec<_> = sig
        .iter()
        .map(|s| {
            let mut v = vec![0.0; shift];
            v.extend_from_slice(&s.samples);
            s.with_samples(v)
        })
        .collect();
    let t = extract_tdoa(&late, &cfg).unwrap();
    for (a, b) in t.values().iter().zip(base.values()) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
    let moved: Vec<_> = sig
        .iter()
        .map(|s| SyntheticSignal::new(s.samples.clone(), s.sample_rate, s.t0 + 3.25).unwrap())
        .collect();
    let t = extract_tdoa(&moved, &cfg).unwrap();
    for (a, b) in t.values().iter().zip(base.values()) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
}

#[test]
fn permuting_sensors_permutes_tdoa() {
    let cfg = ExtractionConfig::new(1.0).unwrap();
    let sig = signals(&ImpactLocation::new(185.0, 120.0));
    let base = extract_tdoa(&sig, &cfg).unwrap();
    let perm = [3usize, 0, 5, 1, 4, 2];
    let shuffled: Vec<_> = perm.iter().map(|&i| sig[i].clone()).collect();
    let t = extract_tdoa(&shuffled, &cfg).unwrap();
    for (k, &i) in perm.iter().enumerate() {
        assert!((t.values()[k] - base.values()[i]).abs() < 1e-12);
    }
}

#[test]
fn bandpass_passband_and_stopband() {
    let cfg = ExtractionConfig::new(1.0).unwrap();
    let n = 4000;
    let inner = 500..3500;
    let pass = tone(1.0, n);
    let out = bandpass(&pass, &cfg).unwrap();
    let gain_db =
        20.0 * (rms(&out.samples[inner.clone()]) / rms(&pass.samples[inner.clone()])).log10();
    assert!(gain_db.abs() < 1.0, "passband gain {gain_db} dB");

    let stop = tone(4.0, n);
    let out = bandpass(&stop, &cfg).unwrap();
    let att_db = 20.0 * (rms(&out.samples[inner.clone()]) / rms(&stop.samples[inner])).log10();
    assert!(att_db <= -40.0, "stopband {att_db} dB");
}

#[test]
fn low_threshold_arrives_earlier() {
    let sig = signals(&ImpactLocation::new(85.0, 60.0));
    let hi = ExtractionConfig::new(1.0).unwrap();
    let lo = ExtractionConfig {
        threshold_fraction: 0.0025,
        ..hi
    }
    .validated()
    .unwrap();
    let a = signal_arrival(&sig[2], &hi).unwrap();
    let b = signal_arrival(&sig[2], &lo).unwrap();
    assert!(b < a);
}

#[test]
fn missing_threshold_names_sensor() {
    let cfg = ExtractionConfig::new(1.0).unwrap();
    let mut sig = signals(&ImpactLocation::new(85.0, 60.0));
    sig[3] = sig[3].with_samples(vec![0.0; sig[3].len()]);
    let err = extract_tdoa(&sig, &cfg).unwrap_err().to_string();
    assert!(err.contains('4') && err.contains("degenerate"), "{err}");
}
