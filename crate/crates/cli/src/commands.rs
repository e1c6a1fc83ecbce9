use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use log::info;
use serde::{Deserialize, Serialize};
use serde_json::json;

use impactloc::dataset::{
    append_records, load_dataset, meta_path, save_dataset, DatasetMeta, PlateMeta,
};
use impactloc::eval::{
    cdf_csv, cdf_svg, convex_hull, error_cdf, fit_kernels, inside_hull, kernel_predictions,
    results_csv, run_experiment, subset_reference, summarize, synthetic_pair, write_report,
    EmpiricalCdf, LocalisationResult, Summary, BMA_LABEL, PER_TASK_NOTE,
};
use impactloc::extract::signal_arrival;
use impactloc::fusion::{fuse_predictions, FusedPrediction, KernelPrediction};
use impactloc::gpr::{GprModel, KernelKind};
use impactloc::wavesim::{synthesize_signals, GvpKind, SyntheticSignal};
use impactloc::{DatasetF64, ImpactLocation, ImpactRecord, TdoaVector};

use crate::config::Config;
use crate::manifest::{derive_seed, RunManifest};
use crate::Common;

pub fn effective_config(c: &Common) -> Result<Config> {
    let mut cfg = Config::load(c.config.as_deref())?;
    if let Some(s) = c.seed {
        cfg.set("seed", json!(s))?;
    }
    let strings = [
        ("std.input", &c.input_std),
        ("std.output", &c.output_std),
        ("kernels", &c.kernels),
        ("sensors.subset", &c.sensors),
        ("subset", &c.subset),
    ];
    for (key, v) in strings {
        if let Some(v) = v {
            cfg.set(key, json!(v))?;
        }
    }
    if c.fuse {
        cfg.set("fusion.enabled", json!(true))?;
    }
    // fail early on malformed values
    cfg.experiment()?;
    Ok(cfg)
}

fn write_text(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

/// Contents of `impact.json` inside each waveform directory.
#[derive(Debug, Serialize, Deserialize)]
struct ImpactMeta {
    impact_id: String,
    condition: String,
    repetition: u32,
    x_mm: f64,
    y_mm: f64,
    frequency_khz: f64,
    plate: PlateMeta,
    sensors: Vec<[f64; 2]>,
}

pub fn simulate(mut cfg: Config, out: &Path, signals: bool, name: Option<&str>) -> Result<()> {
    if signals {
        cfg.set("signals.write", json!(true))?;
    }
    let seed = cfg.seed()?;
    let scenario = cfg.scenario(derive_seed(seed, "scenario.noise"))?;
    let ds = scenario.generate()?;
    let stem = name
        .map(str::to_string)
        .unwrap_or_else(|| scenario.condition.to_lowercase());
    let path = out.join(format!("{stem}.csv"));
    save_dataset(&ds, &path)?;

    let mut manifest = RunManifest::new("simulate", &cfg)?;
    manifest.output(&path)?;
    manifest.output(&meta_path(&path))?;

    if cfg.bool("signals.write")? {
        // waveforms carry the temperature scaling through a slower wave speed
        let mut gvp = scenario.gvp.clone();
        gvp.base_speed /= scenario.temperature_alpha;
        if let GvpKind::Tabulated { table } = &mut gvp.kind {
            for (_, v) in table.iter_mut() {
                *v /= scenario.temperature_alpha;
            }
        }
        let fs_khz = cfg.f64("signals.sample_rate")?;
        let snr = cfg.opt_f64("signals.snr_db")?.unwrap_or(f64::INFINITY);
        let meta = DatasetMeta::from_parts(&scenario.plate, &scenario.array, "");
        let root = out.join("signals");
        for r in ds.records() {
            let dir = root.join(format!("{}_{}_r{}", r.condition, r.impact_id, r.repetition));
            fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            let label = format!("signals:{}:{}:{}", r.condition, r.impact_id, r.repetition);
            let sigs = synthesize_signals(
                &gvp,
                &scenario.array,
                &r.location,
                scenario.frequency,
                fs_khz,
                snr,
                derive_seed(seed, &label),
            )?;
            for (j, s) in sigs.iter().enumerate() {
                let p = dir.join(format!("sensor_{}.csv", j + 1));
                s.write_csv(&p)?;
            }
            let im = ImpactMeta {
                impact_id: r.impact_id.clone(),
                condition: r.condition.clone(),
                repetition: r.repetition,
                x_mm: r.location.x,
                y_mm: r.location.y,
                frequency_khz: scenario.frequency,
                plate: meta.plate.clone(),
                sensors: meta.sensors.clone(),
            };
            write_text(
                &dir.join("impact.json"),
                &(serde_json::to_string_pretty(&im)? + "\n"),
            )?;
        }
        info!(
            "wrote {} waveform directories under {}",
            ds.len(),
            root.display()
        );
    }
    manifest.write(out)?;
    println!("{}", json!({ "dataset": path, "records": ds.len() }));
    Ok(())
}

fn impact_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .with_context(|| format!("reading {}", root.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("impact.json").is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        bail!(
            "no impact directories (with impact.json) under {}",
            root.display()
        );
    }
    Ok(dirs)
}

pub fn extract(
    mut cfg: Config,
    out: &Path,
    signals: &Path,
    output: &Path,
    threshold: Option<f64>,
) -> Result<()> {
    if let Some(t) = threshold {
        cfg.set("extract.threshold", json!(t))?;
    }
    let mut manifest = RunManifest::new("extract", &cfg)?;
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut layout: Option<(PlateMeta, Vec<[f64; 2]>)> = None;
    for dir in impact_dirs(signals)? {
        let meta_file = dir.join("impact.json");
        let text = fs::read_to_string(&meta_file)
            .with_context(|| format!("reading {}", meta_file.display()))?;
        let im: ImpactMeta = serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", meta_file.display()))?;
        manifest.input(&meta_file)?;
        match &layout {
            None => layout = Some((im.plate.clone(), im.sensors.clone())),
            Some((_, s)) if s != &im.sensors => bail!(
                "{}: sensor layout differs from earlier impacts",
                dir.display()
            ),
            _ => {}
        }
        let ecfg = cfg.extraction(im.frequency_khz)?;
        let mut arrivals = Vec::with_capacity(im.sensors.len());
        for j in 1..=im.sensors.len() {
            let p = dir.join(format!("sensor_{j}.csv"));
            if !p.is_file() {
                failures.push(format!(
                    "impact {}: sensor {j}: missing file {}",
                    im.impact_id,
                    p.display()
                ));
                continue;
            }
            manifest.input(&p)?;
            match SyntheticSignal::<f64>::read_csv(&p).and_then(|s| signal_arrival(&s, &ecfg)) {
                Ok(t) => arrivals.push(t),
                Err(e) => failures.push(format!("impact {}: sensor {j}: {e}", im.impact_id)),
            }
        }
        if arrivals.len() == im.sensors.len() {
            records.push(ImpactRecord {
                impact_id: im.impact_id,
                condition: im.condition,
                repetition: im.repetition,
                location: ImpactLocation::new(im.x_mm, im.y_mm),
                tdoa: TdoaVector::from_arrivals(&arrivals, im.frequency_khz)?,
            });
        }
    }
    if !failures.is_empty() {
        bail!("arrival picking failed:\n  {}", failures.join("\n  "));
    }
    let (plate, sensors) = layout.expect("at least one impact");
    let meta = DatasetMeta {
        plate,
        sensors,
        ids: Vec::new(),
        provenance: String::new(),
    };
    let provenance = format!("extracted from {}", signals.display());
    let ds = append_records(
        output,
        &meta.geometry()?,
        &meta.array()?,
        &records,
        &provenance,
    )?;
    manifest.output(output)?;
    manifest.write(out)?;
    println!(
        "{}",
        json!({ "dataset": output, "appended": records.len(), "records": ds.len() })
    );
    Ok(())
}

fn prepared(cfg: &Config, d: &DatasetF64) -> Result<DatasetF64> {
    Ok(match cfg.sensor_subset()? {
        Some(s) => d.select_sensors(&s)?,
        None => d.clone(),
    })
}

fn model_path(out: &Path, k: KernelKind) -> PathBuf {
    out.join(format!("model_{}.json", k.label().to_lowercase()))
}

pub fn train(cfg: Config, out: &Path, reference: &Path) -> Result<()> {
    let mut manifest = RunManifest::new("train", &cfg)?;
    manifest.input(reference)?;
    manifest.input(&meta_path(reference))?;
    let d = load_dataset::<f64>(reference)?;
    let d = prepared(&cfg, &subset_reference(&d, &cfg.subset()?)?)?;
    let kernels = cfg.kernels()?;
    let models = fit_kernels(&d, &kernels, &cfg.fit_options()?)?;
    for m in &models {
        let p = model_path(out, m.kind());
        m.save(&p)?;
        manifest.output(&p)?;
        manifest.output(&impactloc::gpr::train_data_path(&p))?;
        let trace = m.trace();
        println!(
            "{}",
            json!({
                "kernel": m.kind().label(),
                "log_marginal_likelihood": m.log_marginal_likelihood(),
                "initial_log_marginal_likelihood": trace.map(|t| t.initial_lml),
                "model": p,
            })
        );
    }
    manifest.write(out)?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TargetPrediction {
    pub impact_id: String,
    pub condition: String,
    pub repetition: u32,
    pub inside_hull: bool,
    pub per_kernel: Vec<KernelPrediction<f64>>,
    pub fused: Option<FusedPrediction<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PredictionsFile {
    pub notes: Vec<String>,
    pub kernels: Vec<KernelKind>,
    pub log_marginal_likelihoods: Vec<f64>,
    pub targets: Vec<TargetPrediction>,
}

fn collect_models(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            for k in KernelKind::ALL {
                let f = model_path(p, k);
                if f.is_file() {
                    files.push(f);
                }
            }
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        bail!("no model files found");
    }
    Ok(files)
}

pub fn localise(cfg: Config, out: &Path, models: &[PathBuf], targets: &Path) -> Result<()> {
    let mut manifest = RunManifest::new("localise", &cfg)?;
    let mut loaded = Vec::new();
    for f in collect_models(models)? {
        let m =
            GprModel::<f64>::load(&f).with_context(|| format!("loading model {}", f.display()))?;
        manifest.input(&f)?;
        manifest.input(&impactloc::gpr::train_data_path(&f))?;
        loaded.push(m);
    }
    let kinds: Vec<KernelKind> = loaded.iter().map(|m| m.kind()).collect();
    if kinds.iter().collect::<BTreeSet<_>>().len() != kinds.len() {
        bail!("duplicate kernels among models: {kinds:?}");
    }
    manifest.input(targets)?;
    let d = prepared(&cfg, &load_dataset::<f64>(targets)?)?;
    for m in &loaded {
        if m.n_features() != d.array().len() {
            bail!(
                "model/target mismatch: {} model expects {} TDOA values, targets have {}",
                m.kind(),
                m.n_features(),
                d.array().len()
            );
        }
    }
    let train_y = loaded[0].raw_outputs();
    let hull = convex_hull(
        &(0..train_y.nrows())
            .map(|i| [train_y[(i, 0)], train_y[(i, 1)]])
            .collect::<Vec<_>>(),
    );
    let fuse = cfg.bool("fusion.enabled")?;
    let rule = cfg.variance_rule()?;
    let mut rows = Vec::with_capacity(d.len());
    for r in d.records() {
        let preds = kernel_predictions(&loaded, r.tdoa.values())?;
        let fused = if fuse {
            Some(fuse_predictions(&preds, rule)?)
        } else {
            None
        };
        rows.push(TargetPrediction {
            impact_id: r.impact_id.clone(),
            condition: r.condition.clone(),
            repetition: r.repetition,
            inside_hull: inside_hull(&hull, [r.location.x, r.location.y], 1e-9),
            per_kernel: preds,
            fused,
        });
    }
    let mut notes = Vec::new();
    if fuse {
        notes.push(PER_TASK_NOTE.to_string());
        notes.push(format!("fused variance rule: {rule}"));
    }
    let file = PredictionsFile {
        notes,
        kernels: kinds,
        log_marginal_likelihoods: loaded.iter().map(|m| m.log_marginal_likelihood()).collect(),
        targets: rows,
    };
    let path = out.join("predictions.json");
    write_text(&path, &(serde_json::to_string_pretty(&file)? + "\n"))?;
    let csv_path = out.join("predictions.csv");
    write_text(&csv_path, &predictions_csv(&file))?;
    manifest.output(&path)?;
    manifest.output(&csv_path)?;
    manifest.write(out)?;
    println!(
        "{}",
        json!({ "predictions": path, "targets": file.targets.len() })
    );
    Ok(())
}

fn predictions_csv(f: &PredictionsFile) -> String {
    let mut s =
        String::from("impact_id,condition,repetition,kernel,x_mm,y_mm,var_x_mm2,var_y_mm2\n");
    for t in &f.targets {
        let mut rows: Vec<(&str, &[f64], &[f64])> = t
            .per_kernel
            .iter()
            .map(|k| {
                (
                    k.kernel.label(),
                    &k.prediction.mean[..],
                    &k.prediction.variance[..],
                )
            })
            .collect();
        if let Some(fz) = &t.fused {
            rows.push((BMA_LABEL, &fz.mean[..], &fz.variance[..]));
        }
        for (label, m, v) in rows {
            s.push_str(&format!(
                "{},{},{},{label},{},{},{},{}\n",
                t.impact_id, t.condition, t.repetition, m[0], m[1], v[0], v[1]
            ));
        }
    }
    s
}

#[derive(Debug, Serialize)]
struct EvaluationReport {
    notes: Vec<String>,
    summary: Summary,
    cdfs: BTreeMap<String, EmpiricalCdf>,
    results: Vec<LocalisationResult<f64>>,
}

pub fn evaluate(cfg: Config, out: &Path, predictions: &Path, truth: &Path) -> Result<()> {
    let mut manifest = RunManifest::new("evaluate", &cfg)?;
    manifest.input(predictions)?;
    manifest.input(truth)?;
    let text = fs::read_to_string(predictions)
        .with_context(|| format!("reading {}", predictions.display()))?;
    let preds: PredictionsFile = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", predictions.display()))?;
    let d = load_dataset::<f64>(truth)?;
    let key = |id: &str, c: &str, r: u32| (id.to_string(), c.to_string(), r);
    let truth_map: BTreeMap<_, ImpactLocation<f64>> = d
        .records()
        .iter()
        .map(|r| (key(&r.impact_id, &r.condition, r.repetition), r.location))
        .collect();
    let unmatched: Vec<String> = preds
        .targets
        .iter()
        .filter(|t| !truth_map.contains_key(&key(&t.impact_id, &t.condition, t.repetition)))
        .map(|t| format!("{} ({} rep {})", t.impact_id, t.condition, t.repetition))
        .collect();
    if !unmatched.is_empty() {
        bail!("predictions without ground truth: {}", unmatched.join(", "));
    }
    let mut results = Vec::new();
    for t in &preds.targets {
        let loc = truth_map[&key(&t.impact_id, &t.condition, t.repetition)];
        for k in &t.per_kernel {
            results.push(LocalisationResult::new(
                &t.impact_id,
                t.repetition,
                k.kernel.label(),
                loc,
                &k.prediction.mean,
                &k.prediction.variance,
                t.inside_hull,
            ));
        }
        if let Some(f) = &t.fused {
            results.push(LocalisationResult::new(
                &t.impact_id,
                t.repetition,
                BMA_LABEL,
                loc,
                &f.mean,
                &f.variance,
                t.inside_hull,
            ));
        }
    }
    if results.is_empty() {
        bail!("no predictions to evaluate");
    }
    let summary = summarize(&results)?;
    let mut cdfs = BTreeMap::new();
    for label in summary.per_kernel.keys() {
        let e: Vec<f64> = results
            .iter()
            .filter(|r| &r.kernel == label)
            .map(|r| r.error)
            .collect();
        cdfs.insert(label.clone(), error_cdf(&e)?);
    }
    let report = EvaluationReport {
        notes: preds.notes.clone(),
        summary,
        cdfs,
        results,
    };
    let files = [
        (
            "evaluation.json",
            serde_json::to_string_pretty(&report)? + "\n",
        ),
        ("results.csv", results_csv(&report.results)?),
        ("cdf.csv", cdf_csv(&report.cdfs)),
        ("cdf.svg", cdf_svg(&report.cdfs)),
    ];
    for (name, body) in files {
        let p = out.join(name);
        write_text(&p, &body)?;
        manifest.output(&p)?;
    }
    manifest.write(out)?;
    let means: BTreeMap<&String, f64> = report
        .summary
        .per_kernel
        .iter()
        .map(|(k, s)| (k, s.mean))
        .collect();
    println!("{}", json!({ "mean_error_mm": means }));
    Ok(())
}

pub fn report(
    cfg: Config,
    out: &Path,
    reference: Option<&Path>,
    targets: Option<&Path>,
) -> Result<()> {
    let mut manifest = RunManifest::new("report", &cfg)?;
    let exp = cfg.experiment()?;
    let (r, t) = match (reference, targets) {
        (Some(r), Some(t)) => {
            manifest.input(r)?;
            manifest.input(t)?;
            (load_dataset::<f64>(r)?, load_dataset::<f64>(t)?)
        }
        (None, None) => synthetic_pair::<f64>(&exp)?,
        _ => return Err(anyhow!("--reference and --targets go together")),
    };
    let rep = run_experiment(&exp, &r, &t)?;
    write_report(&rep, out)?;
    for name in ["report.json", "results.csv", "cdf.csv", "cdf.svg"] {
        manifest.output(&out.join(name))?;
    }
    manifest.write(out)?;
    let means: BTreeMap<&String, f64> = rep
        .summary
        .per_kernel
        .iter()
        .map(|(k, s)| (k, s.mean))
        .collect();
    println!(
        "{}",
        json!({ "mean_error_mm": means, "report": out.join("report.json") })
    );
    Ok(())
}
