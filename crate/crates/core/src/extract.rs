//! Envelope-threshold TDOA extraction from sensor waveforms.
//!
//! Each signal is band-limited around the analysis frequency with a
//! zero-phase FFT mask, rectified, smoothed with a centred moving average,
//! normalised to unit peak, and the arrival is taken at the first crossing
//! of a fixed fraction of that peak.

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{FftNum, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::types::TdoaVector;
use crate::wavesim::SyntheticSignal;

/// Default threshold: 2.5 % of the envelope peak.
pub const DEFAULT_THRESHOLD: f64 = 0.025;
/// Lowest threshold used for small-mass impacts: 0.25 % of the peak.
pub const LOW_THRESHOLD: f64 = 0.0025;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ExtractionConfig<T: Scalar> {
    /// kHz
    pub center_frequency: T,
    /// kHz, full width of the flat passband
    pub bandwidth: T,
    /// fraction of the envelope peak, in (0, 1)
    pub threshold_fraction: T,
    /// ms, moving-average width
    pub smoothing_window: T,
}

impl<T: Scalar> ExtractionConfig<T> {
    /// Passband one centre-frequency wide, 2.5 % threshold, smoothing over
    /// two carrier periods.
    pub fn new(center_frequency: T) -> Result<Self> {
        Self {
            center_frequency,
            bandwidth: center_frequency,
            threshold_fraction: T::lit(DEFAULT_THRESHOLD),
            smoothing_window: T::lit(2.0) / center_frequency,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.center_frequency > T::zero()) {
            return Err(Error::invalid(
                "extraction config",
                "center frequency must be positive",
            ));
        }
        if !(self.bandwidth > T::zero()) || !(self.bandwidth < self.center_frequency * T::lit(2.0))
        {
            return Err(Error::invalid(
                "extraction config",
                format!(
                    "bandwidth must lie in (0, 2·center_frequency), got {}",
                    self.bandwidth
                ),
            ));
        }
        if !(self.threshold_fraction > T::zero() && self.threshold_fraction < T::one()) {
            return Err(Error::invalid(
                "extraction config",
                format!(
                    "threshold fraction must lie in (0, 1), got {}",
                    self.threshold_fraction
                ),
            ));
        }
        if !(self.smoothing_window > T::zero()) {
            return Err(Error::invalid(
                "extraction config",
                "smoothing window must be positive",
            ));
        }
        Ok(self)
    }
}

/// Gain of the bandpass mask at frequency `f` (kHz): flat over the band,
/// raised-cosine skirts half a bandwidth wide on either side.
fn mask_gain(f: f64, lo: f64, hi: f64, skirt: f64) -> f64 {
    if f >= lo && f <= hi {
        1.0
    } else if f > hi && f < hi + skirt {
        0.5 * (1.0 + (std::f64::consts::PI * (f - hi) / skirt).cos())
    } else if f < lo && f > lo - skirt {
        0.5 * (1.0 + (std::f64::consts::PI * (lo - f) / skirt).cos())
    } else {
        0.0
    }
}

/// Zero-phase bandpass around `cfg.center_frequency`. Output has the input's
/// length and time base.
pub fn bandpass<T: Scalar + FftNum>(
    signal: &SyntheticSignal<T>,
    cfg: &ExtractionConfig<T>,
) -> Result<SyntheticSignal<T>> {
    let cfg = cfg.validated()?;
    let fs = signal.sample_rate.to_f64();
    let cf = cfg.center_frequency.to_f64();
    let bw = cfg.bandwidth.to_f64();
    let (lo, hi) = (cf - bw / 2.0, cf + bw / 2.0);
    if hi >= fs / 2.0 {
        return Err(Error::invalid(
            "bandpass",
            format!(
                "band edge {hi} kHz is at or beyond Nyquist ({} kHz)",
                fs / 2.0
            ),
        ));
    }
    let n = signal.len();
    // zero padding to at least twice the length keeps circular wrap-around out
    let nfft = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<T>> = signal
        .samples
        .iter()
        .map(|&v| Complex::new(v, T::zero()))
        .chain(std::iter::repeat(Complex::new(T::zero(), T::zero())))
        .take(nfft)
        .collect();
    let mut planner = FftPlanner::<T>::new();
    planner.plan_fft_forward(nfft).process(&mut buf);
    let skirt = bw / 2.0;
    for (k, c) in buf.iter_mut().enumerate() {
        let bin = if k <= nfft / 2 { k } else { nfft - k };
        let f = bin as f64 * fs / nfft as f64;
        let g = T::lit(mask_gain(f, lo, hi, skirt) / nfft as f64);
        *c = Complex::new(c.re * g, c.im * g);
    }
    planner.plan_fft_inverse(nfft).process(&mut buf);
    Ok(signal.with_samples(buf.into_iter().take(n).map(|c| c.re).collect()))
}

/// Rectified, moving-average smoothed envelope normalised to unit peak.
pub fn envelope<T: Scalar>(
    signal: &SyntheticSignal<T>,
    cfg: &ExtractionConfig<T>,
) -> Result<SyntheticSignal<T>> {
    if signal.is_empty() {
        return Err(Error::DegenerateSignal("empty signal".into()));
    }
    let n = signal.len();
    let width = (cfg.smoothing_window.to_f64() * signal.sample_rate.to_f64())
        .round()
        .max(1.0) as usize;
    let half = width / 2;
    let mut prefix = vec![0.0f64; n + 1];
    for (i, v) in signal.samples.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v.to_f64().abs();
    }
    let smoothed: Vec<f64> = (0..n)
        .map(|i| {
            let a = i.saturating_sub(half);
            let b = (i + half + 1).min(n);
            (prefix[b] - prefix[a]) / (b - a) as f64
        })
        .collect();
    let peak = smoothed.iter().copied().fold(0.0f64, f64::max);
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(Error::DegenerateSignal(
            "signal has no nonzero peak to normalise".into(),
        ));
    }
    Ok(signal.with_samples(smoothed.into_iter().map(|v| T::lit(v / peak)).collect()))
}

/// Time (ms) of the first threshold crossing, linearly interpolated between
/// the bracketing samples.
pub fn pick_arrival<T: Scalar>(env: &SyntheticSignal<T>, cfg: &ExtractionConfig<T>) -> Result<T> {
    first_crossing(env, cfg.threshold_fraction)
}

fn first_crossing<T: Scalar>(env: &SyntheticSignal<T>, threshold: T) -> Result<T> {
    let Some(i) = env.samples.iter().position(|&v| v >= threshold) else {
        let peak = env.samples.iter().copied().fold(T::zero(), |a, b| a.max(b));
        return Err(Error::ThresholdNotCrossed {
            threshold: threshold.to_f64(),
            peak: peak.to_f64(),
        });
    };
    if i == 0 {
        return Ok(env.t0);
    }
    let (e0, e1) = (env.samples[i - 1], env.samples[i]);
    let frac = (threshold - e0) / (e1 - e0);
    Ok(env.time(i - 1) + frac * env.dt())
}

/// 10 %–90 % rise time of a normalised envelope.
pub fn envelope_rise_time<T: Scalar>(env: &SyntheticSignal<T>) -> Result<T> {
    Ok(first_crossing(env, T::lit(0.9))? - first_crossing(env, T::lit(0.1))?)
}

/// Arrival time of one raw signal.
pub fn signal_arrival<T: Scalar + FftNum>(
    signal: &SyntheticSignal<T>,
    cfg: &ExtractionConfig<T>,
) -> Result<T> {
    let filtered = bandpass(signal, cfg)?;
    let env = envelope(&filtered, cfg)?;
    pick_arrival(&env, cfg)
}

/// Picks every sensor and assembles the anchored TDOA vector. Errors carry
/// the 1-based sensor number.
pub fn extract_tdoa<T: Scalar + FftNum>(
    signals: &[SyntheticSignal<T>],
    cfg: &ExtractionConfig<T>,
) -> Result<TdoaVector<T>> {
    let cfg = cfg.validated()?;
    let Some(first) = signals.first() else {
        return Err(Error::invalid("extraction", "no signals"));
    };
    let fs = first.sample_rate;
    if let Some(j) = signals
        .iter()
        .position(|s| (s.sample_rate.to_f64() - fs.to_f64()).abs() > fs.to_f64() * 1e-9)
    {
        return Err(Error::Sensor {
            sensor: j + 1,
            source: Box::new(Error::invalid(
                "extraction",
                "sample rate differs from sensor 1",
            )),
        });
    }
    let arrivals = signals
        .par_iter()
        .enumerate()
        .map(|(j, s)| {
            signal_arrival(s, &cfg).map_err(|e| Error::Sensor {
                sensor: j + 1,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<T>>>()?;
    TdoaVector::from_arrivals(&arrivals, cfg.center_frequency)
}
