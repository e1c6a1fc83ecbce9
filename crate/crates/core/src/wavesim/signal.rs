//! Synthetic tone-burst sensor signals.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::gvp::GvpModel;
use super::tdoa::arrival_times;
use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::types::{ImpactLocation, SensorArray};

/// Cycles of the carrier inside one burst.
pub const BURST_CYCLES: f64 = 5.0;

/// Minimum ratio between sample rate and carrier frequency.
pub const MIN_OVERSAMPLING: f64 = 10.0;

/// Uniformly sampled waveform; sample `i` sits at `t0 + i / sample_rate` ms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SyntheticSignal<T: Scalar> {
    pub samples: Vec<T>,
    /// kHz (samples per ms)
    pub sample_rate: T,
    /// ms
    pub t0: T,
}

impl<T: Scalar> SyntheticSignal<T> {
    pub fn new(samples: Vec<T>, sample_rate: T, t0: T) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("signal", "no samples"));
        }
        if !(sample_rate > T::zero()) || !sample_rate.is_finite() {
            return Err(Error::invalid(
                "signal",
                format!("sample rate must be positive, got {sample_rate}"),
            ));
        }
        Ok(Self {
            samples,
            sample_rate,
            t0,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dt(&self) -> T {
        T::one() / self.sample_rate
    }

    pub fn time(&self, i: usize) -> T {
        self.t0 + T::lit(i as f64) / self.sample_rate
    }

    pub fn with_samples(&self, samples: Vec<T>) -> Self {
        Self {
            samples,
            sample_rate: self.sample_rate,
            t0: self.t0,
        }
    }

    /// Writes `t_ms,amp` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t_ms", "amp"])?;
        for (i, &a) in self.samples.iter().enumerate() {
            w.write_record([self.time(i).to_f64().to_string(), a.to_f64().to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a `t_ms,amp` file; the sample rate is inferred from the time span.
    pub fn read_csv(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "signal file missing"),
            ));
        }
        let text = fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::Reader::from_reader(text.as_slice());
        let mut times = Vec::new();
        let mut samples = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse = |k: usize| -> Result<f64> {
                rec.get(k)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::Row {
                        row: i + 1,
                        reason: format!("malformed signal row in {}", path.display()),
                    })
            };
            times.push(parse(0)?);
            samples.push(T::lit(parse(1)?));
        }
        if times.len() < 2 {
            return Err(Error::invalid(
                "signal",
                format!("{} has fewer than 2 samples", path.display()),
            ));
        }
        let span = times[times.len() - 1] - times[0];
        let dt = span / (times.len() - 1) as f64;
        if !(dt > 0.0) {
            return Err(Error::invalid("signal", "time column must increase"));
        }
        for (i, w) in times.windows(2).enumerate() {
            if ((w[1] - w[0]) - dt).abs() > 1e-6 * dt.max(1.0) {
                return Err(Error::Row {
                    row: i + 2,
                    reason: "non-uniform sampling".into(),
                });
            }
        }
        Self::new(samples, T::lit(1.0 / dt), T::lit(times[0]))
    }
}

/// Gaussian-windowed tone burst of `BURST_CYCLES` cycles starting at `onset`.
/// The envelope peaks half a window after onset.
pub fn tone_burst<T: Scalar>(t: T, onset: T, frequency: T) -> T {
    let window = T::lit(BURST_CYCLES) / frequency;
    let tau = t - onset;
    if tau < T::zero() || tau > window {
        return T::zero();
    }
    let sigma = window / T::lit(6.0);
    let z = (tau - window * T::lit(0.5)) / sigma;
    (-(z * z) * T::lit(0.5)).exp() * (T::two_pi() * frequency * tau).sin()
}

/// One signal per sensor: a tone burst at `omega` delayed by the travel time,
/// plus white Gaussian noise at `snr_db` (non-finite SNR means noise-free).
/// All signals share a time base starting one burst window before impact.
pub fn synthesize_signals<T: Scalar>(
    g: &GvpModel<T>,
    array: &SensorArray<T>,
    p: &ImpactLocation<T>,
    omega: T,
    sample_rate: T,
    snr_db: T,
    seed: u64,
) -> Result<Vec<SyntheticSignal<T>>> {
    if !(omega > T::zero()) {
        return Err(Error::invalid(
            "frequency",
            format!("must be positive, got {omega}"),
        ));
    }
    if !(sample_rate >= omega * T::lit(MIN_OVERSAMPLING)) {
        return Err(Error::invalid(
            "sample rate",
            format!("{sample_rate} kHz is below {MIN_OVERSAMPLING}x the carrier {omega} kHz"),
        ));
    }
    let delays = arrival_times(g, array, p, omega)?;
    let window = T::lit(BURST_CYCLES) / omega;
    let max_delay = delays.iter().copied().fold(T::zero(), |a, b| a.max(b));
    let t0 = -window;
    let span = window * T::lit(3.0) + max_delay;
    let n = (span * sample_rate).to_f64().ceil() as usize + 1;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    delays
        .iter()
        .map(|&delay| {
            let clean: Vec<T> = (0..n)
                .map(|i| tone_burst(t0 + T::lit(i as f64) / sample_rate, delay, omega))
                .collect();
            let samples = if snr_db.is_finite() {
                let active: Vec<T> = clean.iter().copied().filter(|v| *v != T::zero()).collect();
                let power = active.iter().fold(T::zero(), |a, &v| a + v * v)
                    / T::lit(active.len().max(1) as f64);
                let noise_std = power.sqrt() / T::lit(10f64.powf(snr_db.to_f64() / 20.0));
                clean
                    .iter()
                    .map(|&v| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        v + noise_std * T::lit(z)
                    })
                    .collect()
            } else {
                clean
            };
            SyntheticSignal::new(samples, sample_rate, t0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_array() -> SensorArray<f64> {
        SensorArray::from_positions(vec![
            ImpactLocation::new(0.0, 0.0),
            ImpactLocation::new(10.0, 0.0),
            ImpactLocation::new(20.0, 0.0),
        ])
        .unwrap()
    }

    fn first_nonzero(s: &SyntheticSignal<f64>) -> f64 {
        let i = s.samples.iter().position(|v| v.abs() > 0.0).unwrap();
        s.time(i)
    }

    #[test]
    fn zero_distance_onset_at_zero() {
        let g = GvpModel::isotropic(10.0, 1.0).unwrap();
        let sig = synthesize_signals(
            &g,
            &line_array(),
            &ImpactLocation::new(0.0, 0.0),
            1.0,
            100.0,
            f64::INFINITY,
            1,
        )
        .unwrap();
        assert_eq!(sig.len(), 3);
        assert!(first_nonzero(&sig[0]).abs() <= sig[0].dt());
    }

    #[test]
    fn onset_separation_matches_delay() {
        let g = GvpModel::isotropic(10.0, 1.0).unwrap();
        let sig = synthesize_signals(
            &g,
            &line_array(),
            &ImpactLocation::new(0.0, 0.0),
            1.0,
            100.0,
            f64::INFINITY,
            1,
        )
        .unwrap();
        let sep = first_nonzero(&sig[2]) - first_nonzero(&sig[1]);
        assert!((sep - 1.0).abs() <= sig[0].dt(), "{sep}");
    }

    #[test]
    fn envelope_peak_half_window_after_onset() {
        let g = GvpModel::isotropic(10.0, 1.0).unwrap();
        let sig = synthesize_signals(
            &g,
            &line_array(),
            &ImpactLocation::new(0.0, 0.0),
            1.0,
            200.0,
            f64::INFINITY,
            1,
        )
        .unwrap();
        // carrier peaks sit near the envelope peak; compare against |burst| maximum
        let s = &sig[1];
        let (imax, _) = s.samples.iter().enumerate().fold((0, 0.0), |acc, (i, v)| {
            if v.abs() > acc.1 {
                (i, v.abs())
            } else {
                acc
            }
        });
        let expected = 1.0 + BURST_CYCLES / 2.0;
        // the largest carrier lobe is within a quarter period of the envelope peak
        assert!(
            (s.time(imax) - expected).abs() <= 0.25 + s.dt(),
            "{}",
            s.time(imax)
        );
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let g = GvpModel::isotropic(10.0, 1.0).unwrap();
        let p = ImpactLocation::new(3.0, 0.0);
        let a = synthesize_signals(&g, &line_array(), &p, 1.0, 50.0, 20.0, 9).unwrap();
        let b = synthesize_signals(&g, &line_array(), &p, 1.0, 50.0, 20.0, 9).unwrap();
        let c = synthesize_signals(&g, &line_array(), &p, 1.0, 50.0, 20.0, 10).unwrap();
        let bits = |s: &[SyntheticSignal<f64>]| -> Vec<u64> {
            s.iter()
                .flat_map(|x| x.samples.iter().map(|v| v.to_bits()))
                .collect()
        };
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn rejects_undersampling() {
        let g = GvpModel::isotropic(10.0, 1.0).unwrap();
        let p = ImpactLocation::new(3.0, 0.0);
        assert!(synthesize_signals(&g, &line_array(), &p, 1.0, 9.0, f64::INFINITY, 0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = SyntheticSignal::new(vec![0.0, 0.5, -0.25, 1.0], 200.0, -0.5).unwrap();
        let path = dir.path().join("s.csv");
        s.write_csv(&path).unwrap();
        let r = SyntheticSignal::<f64>::read_csv(&path).unwrap();
        assert_eq!(r.samples, s.samples);
        assert!((r.sample_rate - 200.0).abs() < 1e-9);
        assert!((r.t0 + 0.5).abs() < 1e-15);
        assert!(SyntheticSignal::<f64>::read_csv(&dir.path().join("missing.csv")).is_err());
    }
}
