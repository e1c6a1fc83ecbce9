//! Flat run configuration with dotted keys.
//!
//! Every key has a default; a config file may override any subset and
//! command-line flags override the file. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use impactloc::eval::{ExperimentConfig, SubsetKind};
use impactloc::extract::ExtractionConfig;
use impactloc::fusion::VarianceRule;
use impactloc::gpr::{FitOptions, KernelKind};
use impactloc::preprocess::StdMode;
use impactloc::wavesim::{default_plate, GridSpec, GvpModel, Scenario, DEFAULT_SENSORS_MM};
use impactloc::{ImpactLocation, PlateGeometry, SensorArray};

fn defaults() -> BTreeMap<&'static str, Value> {
    let grid = GridSpec::standard();
    let plate = default_plate::<f64>();
    BTreeMap::from([
        ("seed", json!(42)),
        ("plate.lx", json!(plate.length_x)),
        ("plate.ly", json!(plate.length_y)),
        ("plate.h", json!(plate.thickness)),
        ("sensors.positions", json!(DEFAULT_SENSORS_MM)),
        ("sensors.subset", json!("all")),
        ("gvp.kind", json!("elliptical")),
        ("gvp.speed", json!(400.0)),
        ("gvp.reference_frequency", json!(1.0)),
        ("gvp.anisotropy", json!(0.1)),
        ("grid.nx", json!(grid.nx)),
        ("grid.ny", json!(grid.ny)),
        ("grid.spacing", json!(grid.spacing)),
        ("grid.origin_x", json!(grid.origin_x)),
        ("grid.origin_y", json!(grid.origin_y)),
        ("scenario.condition", json!("REF")),
        ("scenario.frequency", json!(1.0)),
        ("scenario.temperature_alpha", json!(1.0)),
        ("scenario.noise_sigma", json!(0.0)),
        ("scenario.repetitions", json!(1)),
        ("signals.write", json!(false)),
        ("signals.sample_rate", json!(200.0)),
        ("signals.snr_db", json!(null)),
        ("extract.center_frequency", json!(null)),
        ("extract.bandwidth", json!(null)),
        ("extract.threshold", json!(0.025)),
        ("extract.smoothing_window", json!(null)),
        ("fit.learning_rate", json!(0.1)),
        ("fit.max_iters", json!(5000)),
        ("fit.task_rank", json!(null)),
        ("fit.train_noise", json!(true)),
        ("fit.train_cos_scale", json!(true)),
        ("fit.noise_variance", json!(null)),
        ("std.input", json!("ss")),
        ("std.output", json!("fs")),
        ("kernels", json!("rbf,cos,comp")),
        ("fusion.enabled", json!(false)),
        ("fusion.variance_rule", json!("literal")),
        ("subset", json!("ri35")),
        ("experiment.temperature_alpha", json!(1.15)),
        ("experiment.noise_sigma", json!(0.005)),
    ])
}

#[derive(Debug, Clone)]
pub struct Config {
    values: BTreeMap<String, Value>,
    path: Option<PathBuf>,
}

impl Config {
    pub fn new() -> Self {
        Self {
            values: defaults()
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            path: None,
        }
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut c = Self::new();
        if let Some(p) = path {
            let text =
                fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            let v: Value = serde_json::from_str(&text)
                .with_context(|| format!("parsing config {}", p.display()))?;
            let obj = v
                .as_object()
                .ok_or_else(|| anyhow!("config must be a flat JSON object"))?;
            for (k, v) in obj {
                c.set(k, v.clone())?;
            }
            c.path = Some(p.to_path_buf());
        }
        Ok(c)
    }

    pub fn set(&mut self, key: &str, value: Value) -> Result<()> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value;
                Ok(())
            }
            None => bail!("unknown config key {key:?}"),
        }
    }

    pub fn config_path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn values(&self) -> &BTreeMap<String, Value> {
        &self.values
    }

    /// SHA-256 of the canonical (key-sorted) JSON form.
    pub fn digest(&self) -> String {
        let text = serde_json::to_string(&self.values).expect("config serialises");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    fn get(&self, key: &str) -> &Value {
        self.values.get(key).unwrap_or(&Value::Null)
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        self.get(key)
            .as_f64()
            .ok_or_else(|| anyhow!("config key {key:?} must be a number"))
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            Value::Null => Ok(None),
            _ => self.f64(key).map(Some),
        }
    }

    pub fn u64(&self, key: &str) -> Result<u64> {
        self.get(key)
            .as_u64()
            .ok_or_else(|| anyhow!("config key {key:?} must be a non-negative integer"))
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        Ok(self.u64(key)? as usize)
    }

    pub fn bool(&self, key: &str) -> Result<bool> {
        self.get(key)
            .as_bool()
            .ok_or_else(|| anyhow!("config key {key:?} must be true or false"))
    }

    pub fn str(&self, key: &str) -> Result<&str> {
        self.get(key)
            .as_str()
            .ok_or_else(|| anyhow!("config key {key:?} must be a string"))
    }

    pub fn seed(&self) -> Result<u64> {
        self.u64("seed")
    }

    pub fn plate(&self) -> Result<PlateGeometry<f64>> {
        Ok(PlateGeometry::new(
            self.f64("plate.lx")?,
            self.f64("plate.ly")?,
            self.f64("plate.h")?,
        )?)
    }

    pub fn array(&self) -> Result<SensorArray<f64>> {
        let raw: Vec<[f64; 2]> = serde_json::from_value(self.get("sensors.positions").clone())
            .map_err(|_| {
                anyhow!("config key \"sensors.positions\" must be a list of [x, y] pairs")
            })?;
        Ok(SensorArray::from_positions(
            raw.into_iter()
                .map(|[x, y]| ImpactLocation::new(x, y))
                .collect(),
        )?)
    }

    /// 0-based sensor indices, `None` for all sensors.
    pub fn sensor_subset(&self) -> Result<Option<Vec<usize>>> {
        parse_sensor_list(self.str("sensors.subset")?)
    }

    pub fn gvp(&self) -> Result<GvpModel<f64>> {
        let speed = self.f64("gvp.speed")?;
        let f_ref = self.f64("gvp.reference_frequency")?;
        Ok(match self.str("gvp.kind")? {
            "isotropic" => GvpModel::isotropic(speed, f_ref)?,
            "elliptical" => GvpModel::elliptical(speed, f_ref, self.f64("gvp.anisotropy")?)?,
            other => {
                bail!("config key \"gvp.kind\": unknown kind {other:?} (isotropic, elliptical)")
            }
        })
    }

    pub fn grid(&self) -> Result<GridSpec> {
        Ok(GridSpec {
            nx: self.usize("grid.nx")?,
            ny: self.usize("grid.ny")?,
            spacing: self.f64("grid.spacing")?,
            origin_x: self.f64("grid.origin_x")?,
            origin_y: self.f64("grid.origin_y")?,
        })
    }

    pub fn scenario(&self, seed: u64) -> Result<Scenario<f64>> {
        Ok(Scenario {
            plate: self.plate()?,
            array: self.array()?,
            gvp: self.gvp()?,
            grid: self.grid()?,
            frequency: self.f64("scenario.frequency")?,
            noise_sigma: self.f64("scenario.noise_sigma")?,
            temperature_alpha: self.f64("scenario.temperature_alpha")?,
            condition: self.str("scenario.condition")?.to_string(),
            repetitions: self.u64("scenario.repetitions")? as u32,
            seed,
        })
    }

    pub fn extraction(&self, signal_frequency: f64) -> Result<ExtractionConfig<f64>> {
        let cf = self
            .opt_f64("extract.center_frequency")?
            .unwrap_or(signal_frequency);
        let mut c = ExtractionConfig::new(cf)?;
        if let Some(bw) = self.opt_f64("extract.bandwidth")? {
            c.bandwidth = bw;
        }
        c.threshold_fraction = self.f64("extract.threshold")?;
        if let Some(w) = self.opt_f64("extract.smoothing_window")? {
            c.smoothing_window = w;
        }
        Ok(c.validated()?)
    }

    pub fn kernels(&self) -> Result<Vec<KernelKind>> {
        parse_kernels(self.str("kernels")?)
    }

    pub fn fit_options(&self) -> Result<FitOptions> {
        Ok(FitOptions {
            learning_rate: self.f64("fit.learning_rate")?,
            max_iters: self.usize("fit.max_iters")?,
            task_rank: match self.get("fit.task_rank") {
                Value::Null => None,
                _ => Some(self.usize("fit.task_rank")?),
            },
            train_noise: self.bool("fit.train_noise")?,
            train_cos_scale: self.bool("fit.train_cos_scale")?,
            initial_noise_variance: match self.get("fit.noise_variance") {
                Value::Null => None,
                _ => Some(self.f64("fit.noise_variance")?),
            },
            input_std: self.str("std.input")?.parse::<StdMode>()?,
            output_std: self.str("std.output")?.parse::<StdMode>()?,
            ..FitOptions::default()
        })
    }

    pub fn variance_rule(&self) -> Result<VarianceRule> {
        Ok(self.str("fusion.variance_rule")?.parse()?)
    }

    pub fn subset(&self) -> Result<SubsetKind> {
        Ok(self.str("subset")?.parse()?)
    }

    pub fn experiment(&self) -> Result<ExperimentConfig> {
        Ok(ExperimentConfig {
            reference_subset: self.subset()?,
            sensor_subset: self.sensor_subset()?,
            kernels: self.kernels()?,
            fusion: self.bool("fusion.enabled")?,
            variance_rule: self.variance_rule()?,
            fit: self.fit_options()?,
            temperature_alpha: self.f64("experiment.temperature_alpha")?,
            noise_sigma: self.f64("experiment.noise_sigma")?,
            seed: self.seed()?,
        })
    }
}

pub fn parse_kernels(s: &str) -> Result<Vec<KernelKind>> {
    let kinds = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.parse::<KernelKind>().map_err(anyhow::Error::from))
        .collect::<Result<Vec<_>>>()?;
    if kinds.is_empty() {
        bail!("no kernels selected");
    }
    Ok(kinds)
}

/// `"all"` or a 1-based list such as `"1,2,3,4"`.
pub fn parse_sensor_list(s: &str) -> Result<Option<Vec<usize>>> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(None);
    }
    let idx = s
        .split(',')
        .map(|p| match p.trim().parse::<usize>() {
            Ok(j) if j >= 1 => Ok(j - 1),
            _ => Err(anyhow!(
                "bad sensor number {p:?} (sensors are numbered from 1)"
            )),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Some(idx))
}
