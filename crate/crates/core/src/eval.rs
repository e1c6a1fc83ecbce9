//! Experiment harness: reference subsets, localisation errors, empirical
//! CDFs, interpolation/extrapolation tagging and report files.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{fuse_predictions, FusedPrediction, KernelPrediction, VarianceRule};
use crate::gpr::{FitOptions, GprModel, KernelKind, TrainingTrace};
use crate::num::Scalar;
use crate::types::{Dataset, ImpactLocation};
use crate::wavesim::Scenario;

/// Grid lines closer than this (mm) are merged when inferring the layout.
pub const GRID_TOLERANCE_MM: f64 = 1.0;
pub const GRID_COLS: usize = 7;
pub const GRID_ROWS: usize = 5;
/// Label used for the fused prediction in results and summaries.
pub const BMA_LABEL: &str = "BMA";

pub const NUMBERING_NOTE: &str =
    "grid rows and columns are numbered from 1 starting at the minimum-y row and minimum-x column";
pub const EXT9_NOTE: &str = "EXT9 is taken as rows 2-4 x columns 3-5, the 9 innermost grid points";
pub const PER_TASK_NOTE: &str =
    "marginal-likelihood weights are shared across x and y; uncertainty and combined weights are per task";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubsetKind {
    Ri35,
    Ri15,
    Ri9,
    Ext9,
    /// 0-based record indices
    Custom(Vec<usize>),
}

impl FromStr for SubsetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "ri35" => Ok(SubsetKind::Ri35),
            "ri15" => Ok(SubsetKind::Ri15),
            "ri9" => Ok(SubsetKind::Ri9),
            "ext9" => Ok(SubsetKind::Ext9),
            _ => match s.strip_prefix("custom:") {
                Some(list) => list
                    .split(',')
                    .map(|v| {
                        v.trim().parse().map_err(|_| {
                            Error::invalid("reference subset", format!("bad index {v:?}"))
                        })
                    })
                    .collect::<Result<Vec<usize>>>()
                    .map(SubsetKind::Custom),
                None => Err(Error::invalid(
                    "reference subset",
                    format!("unknown subset {s:?}"),
                )),
            },
        }
    }
}

impl fmt::Display for SubsetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubsetKind::Ri35 => f.write_str("ri35"),
            SubsetKind::Ri15 => f.write_str("ri15"),
            SubsetKind::Ri9 => f.write_str("ri9"),
            SubsetKind::Ext9 => f.write_str("ext9"),
            SubsetKind::Custom(v) => {
                let items: Vec<String> = v.iter().map(|i| i.to_string()).collect();
                write!(f, "custom:{}", items.join(","))
            }
        }
    }
}

/// Row and column (1-based) of every record on the inferred grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridLayout {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub cells: Vec<(usize, usize)>,
}

fn grid_lines(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mut lines: Vec<(f64, usize)> = Vec::new();
    for x in v {
        match lines.last_mut() {
            Some((c, n)) if (x - *c / *n as f64).abs() <= GRID_TOLERANCE_MM => {
                *c += x;
                *n += 1;
            }
            _ => lines.push((x, 1)),
        }
    }
    lines.into_iter().map(|(c, n)| c / n as f64).collect()
}

fn nearest(lines: &[f64], v: f64) -> Option<usize> {
    lines
        .iter()
        .position(|&l| (l - v).abs() <= GRID_TOLERANCE_MM)
}

/// Infers the 7-column × 5-row impact grid from the record coordinates.
pub fn infer_grid<T: Scalar>(d: &Dataset<T>) -> Result<GridLayout> {
    let not_grid = |reason: String| Error::NotGrid {
        cols: GRID_COLS,
        rows: GRID_ROWS,
        reason,
    };
    let px: Vec<f64> = d.records().iter().map(|r| r.location.x.to_f64()).collect();
    let py: Vec<f64> = d.records().iter().map(|r| r.location.y.to_f64()).collect();
    let xs = grid_lines(&px);
    let ys = grid_lines(&py);
    if xs.len() != GRID_COLS || ys.len() != GRID_ROWS {
        return Err(not_grid(format!(
            "found {} columns and {} rows",
            xs.len(),
            ys.len()
        )));
    }
    let mut seen = [false; GRID_COLS * GRID_ROWS];
    let mut cells = Vec::with_capacity(px.len());
    for (i, (&x, &y)) in px.iter().zip(&py).enumerate() {
        let (c, r) = match (nearest(&xs, x), nearest(&ys, y)) {
            (Some(c), Some(r)) => (c, r),
            _ => {
                return Err(not_grid(format!(
                    "record {} at ({x}, {y}) is off the lattice",
                    i + 1
                )))
            }
        };
        seen[r * GRID_COLS + c] = true;
        cells.push((r + 1, c + 1));
    }
    if let Some(k) = seen.iter().position(|s| !s) {
        return Err(not_grid(format!(
            "no impact at row {}, column {}",
            k / GRID_COLS + 1,
            k % GRID_COLS + 1
        )));
    }
    Ok(GridLayout { xs, ys, cells })
}

/// Selects the reference impacts for a named subset (or explicit indices).
pub fn subset_reference<T: Scalar>(d: &Dataset<T>, kind: &SubsetKind) -> Result<Dataset<T>> {
    if let SubsetKind::Custom(idx) = kind {
        if idx.is_empty() {
            return Err(Error::invalid("reference subset", "custom subset is empty"));
        }
        return d.with_records(idx);
    }
    let grid = infer_grid(d)?;
    let keep = |(r, c): (usize, usize)| match kind {
        SubsetKind::Ri35 => true,
        SubsetKind::Ri15 => matches!(c, 1 | 4 | 7),
        SubsetKind::Ri9 => matches!(c, 1 | 4 | 7) && !matches!(r, 2 | 4),
        SubsetKind::Ext9 => (2..=4).contains(&r) && (3..=5).contains(&c),
        SubsetKind::Custom(_) => unreachable!(),
    };
    let idx: Vec<usize> = grid
        .cells
        .iter()
        .enumerate()
        .filter(|(_, &cell)| keep(cell))
        .map(|(i, _)| i)
        .collect();
    d.with_records(&idx)
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Counter-clockwise convex hull (monotone chain), collinear points dropped.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(p.iter())
        } else {
            Box::new(p.iter().rev())
        };
        for &q in iter {
            while hull.len() >= start + 2
                && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0
            {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    hull
}

/// Point-in-hull test; points on the boundary (within `tol`) count as inside.
pub fn inside_hull(hull: &[[f64; 2]], q: [f64; 2], tol: f64) -> bool {
    match hull.len() {
        0 => false,
        1 => (hull[0][0] - q[0]).hypot(hull[0][1] - q[1]) <= tol,
        2 => {
            let (a, b) = (hull[0], hull[1]);
            let len = (b[0] - a[0]).hypot(b[1] - a[1]);
            let t = ((q[0] - a[0]) * (b[0] - a[0]) + (q[1] - a[1]) * (b[1] - a[1])) / (len * len);
            (-1e-12..=1.0 + 1e-12).contains(&t) && cross(a, b, q).abs() / len <= tol
        }
        n => (0..n).all(|i| {
            let (a, b) = (hull[i], hull[(i + 1) % n]);
            let len = (b[0] - a[0]).hypot(b[1] - a[1]);
            cross(a, b, q) / len >= -tol
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LocalisationResult<T: Scalar> {
    pub impact_id: String,
    pub repetition: u32,
    /// kernel label, or "BMA" for the fused prediction
    pub kernel: String,
    pub true_location: ImpactLocation<T>,
    pub predicted_location: ImpactLocation<T>,
    pub error: T,
    /// predictive standard deviation per task (mm)
    pub sd: Vec<T>,
    pub inside_hull: bool,
}

impl<T: Scalar> LocalisationResult<T> {
    pub fn new(
        impact_id: &str,
        repetition: u32,
        kernel: &str,
        truth: ImpactLocation<T>,
        mean: &[T],
        variance: &[T],
        inside_hull: bool,
    ) -> Self {
        let predicted = ImpactLocation::new(mean[0], mean[1]);
        Self {
            impact_id: impact_id.to_string(),
            repetition,
            kernel: kernel.to_string(),
            true_location: truth,
            predicted_location: predicted,
            error: truth.distance(&predicted),
            sd: variance.iter().map(|v| v.sqrt()).collect(),
            inside_hull,
        }
    }
}

/// Right-continuous empirical CDF: `prob[k]` = fraction of errors ≤ `support[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCdf {
    pub support: Vec<f64>,
    pub prob: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn eval(&self, x: f64) -> f64 {
        match self.support.partition_point(|&s| s <= x) {
            0 => 0.0,
            k => self.prob[k - 1],
        }
    }
}

pub fn error_cdf(errors: &[f64]) -> Result<EmpiricalCdf> {
    if errors.is_empty() {
        return Err(Error::invalid("error cdf", "no errors"));
    }
    if errors.iter().any(|e| !e.is_finite()) {
        return Err(Error::invalid("error cdf", "non-finite error"));
    }
    let mut v = errors.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut support = Vec::new();
    let mut prob = Vec::new();
    for (i, &e) in v.iter().enumerate() {
        if i + 1 < v.len() && v[i + 1] == e {
            continue;
        }
        support.push(e);
        prob.push((i + 1) as f64 / n);
    }
    Ok(EmpiricalCdf { support, prob })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub count: usize,
    pub mean: f64,
    pub max: f64,
    /// population standard deviation
    pub sd: f64,
}

pub fn error_stats(errors: &[f64]) -> Result<ErrorStats> {
    if errors.is_empty() {
        return Err(Error::invalid("summary", "no results"));
    }
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let var = errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
    Ok(ErrorStats {
        count: errors.len(),
        mean,
        max: errors.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        sd: var.sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub overall: ErrorStats,
    pub per_kernel: BTreeMap<String, ErrorStats>,
}

impl Summary {
    pub fn mean_error(&self, kernel: &str) -> Option<f64> {
        self.per_kernel.get(kernel).map(|s| s.mean)
    }
}

pub fn summarize<T: Scalar>(results: &[LocalisationResult<T>]) -> Result<Summary> {
    let all: Vec<f64> = results.iter().map(|r| r.error.to_f64()).collect();
    let overall = error_stats(&all)?;
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in results {
        groups
            .entry(r.kernel.clone())
            .or_default()
            .push(r.error.to_f64());
    }
    let per_kernel = groups
        .into_iter()
        .map(|(k, v)| Ok((k, error_stats(&v)?)))
        .collect::<Result<_>>()?;
    Ok(Summary {
        overall,
        per_kernel,
    })
}

/// Everything that determines one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub reference_subset: SubsetKind,
    /// 0-based sensor indices; `None` keeps every sensor
    pub sensor_subset: Option<Vec<usize>>,
    pub kernels: Vec<KernelKind>,
    pub fusion: bool,
    pub variance_rule: VarianceRule,
    pub fit: FitOptions,
    /// TDOA scale applied to the synthetic targets
    pub temperature_alpha: f64,
    /// ms
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            reference_subset: SubsetKind::Ri35,
            sensor_subset: None,
            kernels: KernelKind::ALL.to_vec(),
            fusion: true,
            variance_rule: VarianceRule::Literal,
            fit: FitOptions::default(),
            temperature_alpha: 1.15,
            noise_sigma: 0.005,
            seed: 42,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self, n_sensors: usize) -> Result<()> {
        if self.kernels.is_empty() {
            return Err(Error::invalid("experiment config", "no kernels selected"));
        }
        for (i, k) in self.kernels.iter().enumerate() {
            if self.kernels[..i].contains(k) {
                return Err(Error::invalid(
                    "experiment config",
                    format!("kernel {k} listed twice"),
                ));
            }
        }
        if let Some(s) = &self.sensor_subset {
            if s.is_empty() {
                return Err(Error::invalid(
                    "experiment config",
                    "sensor subset is empty",
                ));
            }
            if let Some(&j) = s.iter().find(|&&j| j >= n_sensors) {
                return Err(Error::invalid(
                    "experiment config",
                    format!("sensor {} out of range (array has {n_sensors})", j + 1),
                ));
            }
        }
        if let SubsetKind::Custom(v) = &self.reference_subset {
            if v.is_empty() {
                return Err(Error::invalid(
                    "experiment config",
                    "custom reference subset is empty",
                ));
            }
        }
        Ok(())
    }
}

/// Reference (noise-free, α = 1) and target (α-scaled, noisy) campaigns on
/// the default plate, grid and sensor layout.
pub fn synthetic_pair<T: Scalar>(cfg: &ExperimentConfig) -> Result<(Dataset<T>, Dataset<T>)> {
    let reference = Scenario::<T>::default_reference();
    let targets = Scenario {
        temperature_alpha: T::lit(cfg.temperature_alpha),
        noise_sigma: T::lit(cfg.noise_sigma),
        condition: "TEM".into(),
        seed: cfg.seed,
        ..reference.clone()
    };
    Ok((reference.generate()?, targets.generate()?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelFit {
    pub kernel: KernelKind,
    pub log_marginal_likelihood: f64,
    pub trace: Option<TrainingTrace>,
    pub log_lengthscale_rbf: f64,
    pub log_scale_cos: f64,
    pub log_noise_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TargetFusion<T: Scalar> {
    pub impact_id: String,
    pub repetition: u32,
    pub fused: FusedPrediction<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ExperimentReport<T: Scalar> {
    pub notes: Vec<String>,
    pub config: ExperimentConfig,
    pub n_reference: usize,
    pub n_targets: usize,
    pub sensors: Vec<String>,
    pub fits: Vec<KernelFit>,
    pub summary: Summary,
    pub cdfs: BTreeMap<String, EmpiricalCdf>,
    pub results: Vec<LocalisationResult<T>>,
    pub fusion: Vec<TargetFusion<T>>,
}

impl<T: Scalar> ExperimentReport<T> {
    pub fn mean_error(&self, label: &str) -> Option<f64> {
        self.summary.mean_error(label)
    }
}

/// Fits one model per kernel on the same data, in parallel, in kernel order.
pub fn fit_kernels<T: Scalar>(
    reference: &Dataset<T>,
    kernels: &[KernelKind],
    opts: &FitOptions,
) -> Result<Vec<GprModel<T>>> {
    let x = reference.inputs();
    let y = reference.outputs();
    kernels
        .par_iter()
        .map(|&k| {
            GprModel::fit(&x, &y, k, opts).map_err(|e| Error::Kernel {
                kernel: k.label().to_string(),
                source: Box::new(e),
            })
        })
        .collect()
}

/// Per-kernel predictions for one input, in model order.
pub fn kernel_predictions<T: Scalar>(
    models: &[GprModel<T>],
    x: &[T],
) -> Result<Vec<KernelPrediction<T>>> {
    models
        .iter()
        .map(|m| {
            Ok(KernelPrediction {
                kernel: m.kind(),
                log_marginal_likelihood: m.log_marginal_likelihood(),
                prediction: m.predict(x).map_err(|e| Error::Kernel {
                    kernel: m.kind().label().to_string(),
                    source: Box::new(e),
                })?,
            })
        })
        .collect()
}

/// Trains on `reference`, localises every target and assembles the report.
pub fn run_experiment<T: Scalar>(
    cfg: &ExperimentConfig,
    reference: &Dataset<T>,
    targets: &Dataset<T>,
) -> Result<ExperimentReport<T>> {
    cfg.validate(reference.array().len())?;
    let mut reference = subset_reference(reference, &cfg.reference_subset)?;
    let mut targets = targets.clone();
    if let Some(s) = &cfg.sensor_subset {
        reference = reference.select_sensors(s)?;
        targets = targets.select_sensors(s)?;
    }
    if reference.array() != targets.array() {
        return Err(Error::invalid(
            "experiment",
            "reference and target sensor arrays differ",
        ));
    }

    let models = fit_kernels(&reference, &cfg.kernels, &cfg.fit)?;
    let hull = convex_hull(
        &reference
            .records()
            .iter()
            .map(|r| [r.location.x.to_f64(), r.location.y.to_f64()])
            .collect::<Vec<_>>(),
    );

    let per_target: Vec<(Vec<LocalisationResult<T>>, Option<TargetFusion<T>>)> = targets
        .records()
        .par_iter()
        .map(|rec| {
            let loc = rec.location;
            let inside = inside_hull(&hull, [loc.x.to_f64(), loc.y.to_f64()], 1e-9);
            let preds = kernel_predictions(&models, rec.tdoa.values())?;
            let mut out: Vec<LocalisationResult<T>> = preds
                .iter()
                .map(|p| {
                    LocalisationResult::new(
                        &rec.impact_id,
                        rec.repetition,
                        p.kernel.label(),
                        loc,
                        &p.prediction.mean,
                        &p.prediction.variance,
                        inside,
                    )
                })
                .collect();
            let fusion = if cfg.fusion {
                let fused = fuse_predictions(&preds, cfg.variance_rule)?;
                out.push(LocalisationResult::new(
                    &rec.impact_id,
                    rec.repetition,
                    BMA_LABEL,
                    loc,
                    &fused.mean,
                    &fused.variance,
                    inside,
                ));
                Some(TargetFusion {
                    impact_id: rec.impact_id.clone(),
                    repetition: rec.repetition,
                    fused,
                })
            } else {
                None
            };
            Ok((out, fusion))
        })
        .collect::<Result<_>>()?;

    let mut results = Vec::new();
    let mut fusion = Vec::new();
    for (r, f) in per_target {
        results.extend(r);
        fusion.extend(f);
    }
    let summary = summarize(&results)?;
    let mut cdfs = BTreeMap::new();
    for label in summary.per_kernel.keys() {
        let errs: Vec<f64> = results
            .iter()
            .filter(|r| &r.kernel == label)
            .map(|r| r.error.to_f64())
            .collect();
        cdfs.insert(label.clone(), error_cdf(&errs)?);
    }
    let mut notes = vec![NUMBERING_NOTE.to_string()];
    if cfg.reference_subset == SubsetKind::Ext9 {
        notes.push(EXT9_NOTE.to_string());
    }
    if cfg.fusion {
        notes.push(PER_TASK_NOTE.to_string());
        notes.push(format!("fused variance rule: {}", cfg.variance_rule));
    }
    Ok(ExperimentReport {
        notes,
        config: cfg.clone(),
        n_reference: reference.len(),
        n_targets: targets.len(),
        sensors: reference.array().ids().to_vec(),
        fits: models
            .iter()
            .map(|m| KernelFit {
                kernel: m.kind(),
                log_marginal_likelihood: m.log_marginal_likelihood().to_f64(),
                trace: m.trace().copied(),
                log_lengthscale_rbf: m.kernel().log_lengthscale_rbf.to_f64(),
                log_scale_cos: m.kernel().log_scale_cos.to_f64(),
                log_noise_variance: m.kernel().log_noise_variance.to_f64(),
            })
            .collect(),
        summary,
        cdfs,
        results,
        fusion,
    })
}

pub fn results_csv<T: Scalar>(results: &[LocalisationResult<T>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "impact_id",
        "repetition",
        "kernel",
        "x_true_mm",
        "y_true_mm",
        "x_pred_mm",
        "y_pred_mm",
        "error_mm",
        "sd_x_mm",
        "sd_y_mm",
        "inside_hull",
    ])?;
    for r in results {
        w.write_record([
            r.impact_id.clone(),
            r.repetition.to_string(),
            r.kernel.clone(),
            r.true_location.x.to_f64().to_string(),
            r.true_location.y.to_f64().to_string(),
            r.predicted_location.x.to_f64().to_string(),
            r.predicted_location.y.to_f64().to_string(),
            r.error.to_f64().to_string(),
            r.sd.first()
                .map(|v| v.to_f64().to_string())
                .unwrap_or_default(),
            r.sd.get(1)
                .map(|v| v.to_f64().to_string())
                .unwrap_or_default(),
            r.inside_hull.to_string(),
        ])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::invalid("results csv", e.to_string()))?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

pub fn cdf_csv(cdfs: &BTreeMap<String, EmpiricalCdf>) -> String {
    let mut s = String::from("kernel,error_mm,cdf\n");
    for (k, c) in cdfs {
        for (e, p) in c.support.iter().zip(&c.prob) {
            let _ = writeln!(s, "{k},{e},{p}");
        }
    }
    s
}

const SVG_COLOURS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#000000", "#9467bd", "#ff7f0e",
];

/// Step plot of the empirical CDFs.
pub fn cdf_svg(cdfs: &BTreeMap<String, EmpiricalCdf>) -> String {
    let (w, h, m) = (640.0, 400.0, 50.0);
    let xmax = cdfs
        .values()
        .flat_map(|c| c.support.last().copied())
        .fold(0.0f64, f64::max)
        .max(1e-9)
        * 1.05;
    let sx = |e: f64| m + e / xmax * (w - 2.0 * m);
    let sy = |p: f64| h - m - p * (h - 2.0 * m);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{w}" height="{h}" fill="white"/><path d="M{m},{m} V{} H{}" fill="none" stroke="black"/>"#,
        h - m,
        w - m
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">localisation error (mm)</text>"#,
        w / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">CDF</text>"#,
        h / 2.0,
        h / 2.0
    );
    for i in 0..=4 {
        let v = xmax * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{v:.1}</text>"#,
            sx(v),
            h - m + 16.0
        );
        let p = i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{p:.2}</text>"#,
            m - 6.0,
            sy(p) + 4.0
        );
    }
    for (i, (label, c)) in cdfs.iter().enumerate() {
        let colour = SVG_COLOURS[i % SVG_COLOURS.len()];
        let mut d = format!("M{:.2},{:.2}", sx(0.0), sy(0.0));
        let mut prev = 0.0;
        for (e, p) in c.support.iter().zip(&c.prob) {
            let _ = write!(d, " H{:.2} V{:.2}", sx(*e), sy(*p));
            prev = *p;
        }
        let _ = write!(d, " H{:.2} V{:.2}", sx(xmax), sy(prev));
        let _ = writeln!(
            s,
            r#"<path d="{d}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#
        );
        let ly = m + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="2"/><text x="{}" y="{}">{label}</text>"#,
            w - m - 90.0,
            w - m - 70.0,
            w - m - 65.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `report.json`, `results.csv`, `cdf.csv` and `cdf.svg` into `dir`.
pub fn write_report<T: Scalar>(report: &ExperimentReport<T>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let put = |name: &str, body: String| {
        let p = dir.join(name);
        fs::write(&p, body).map_err(|e| Error::io(&p, e))
    };
    put("report.json", serde_json::to_string_pretty(report)? + "\n")?;
    put("results.csv", results_csv(&report.results)?)?;
    put("cdf.csv", cdf_csv(&report.cdfs))?;
    put("cdf.svg", cdf_svg(&report.cdfs))
}
