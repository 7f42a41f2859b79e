//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Unknown keys are errors.
//! Command-line flags are applied after the file and win.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use pathgan::gan::{EpochMode, GeneratorObjective};
use pathgan::neuralcore::Activation;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub map: Option<PathBuf>,
    pub classes: Option<PathBuf>,
    pub data_dir: Option<PathBuf>,
    pub precision: Precision,

    pub samples_per_class: usize,
    pub detour_rate: f64,

    pub fingerprint_samples: usize,
    pub beacons: Option<PathBuf>,
    pub p0_dbm: f64,
    pub path_loss_exponent: f64,
    pub sigma_db: f64,
    pub split: f64,
    pub k: usize,
    pub cell_size_m: f64,

    pub gan_epochs: usize,
    pub gan_batch_size: usize,
    pub gan_lr: f64,
    pub disc_lr: f64,
    pub generator_activation: Activation,
    pub discriminator_activation: Activation,
    pub discriminator_pack: usize,
    pub real_label: f64,
    /// Epoch at which linear learning-rate decay starts; `None` keeps it constant.
    pub lr_decay_from: Option<usize>,
    pub lr_final_scale: f64,
    /// Generator weight-average decay; `None` samples from the live generator.
    pub generator_ema: Option<f64>,
    pub objective: GeneratorObjective,
    pub epoch_mode: EpochMode,

    pub classifier_epochs: usize,
    pub classifier_batch_size: usize,
    pub classifier_lr: f64,

    pub max_attempts: usize,
    pub validate_plans: bool,

    pub eval_samples: usize,
    pub eval_seeds: usize,
    pub epoch_checkpoints: Vec<usize>,
    pub batch_sizes: Vec<usize>,
    pub sigmas: Vec<f64>,
    pub timing_calls: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            out: PathBuf::from("pathgan-out"),
            map: None,
            classes: None,
            data_dir: None,
            precision: Precision::F64,
            samples_per_class: 52,
            detour_rate: 0.05,
            fingerprint_samples: 1420,
            beacons: None,
            p0_dbm: -60.0,
            path_loss_exponent: 1.8,
            sigma_db: 2.0,
            split: 0.7,
            k: 3,
            cell_size_m: 1.0,
            gan_epochs: 15000,
            gan_batch_size: 32,
            gan_lr: 2e-4,
            disc_lr: 2e-4,
            generator_activation: Activation::Tanh,
            discriminator_activation: Activation::Sigmoid,
            discriminator_pack: 1,
            real_label: 1.0,
            lr_decay_from: None,
            lr_final_scale: 1.0,
            generator_ema: None,
            objective: GeneratorObjective::NonSaturating,
            epoch_mode: EpochMode::SingleBatch,
            classifier_epochs: 200,
            classifier_batch_size: 10,
            classifier_lr: 1e-3,
            max_attempts: 1000,
            validate_plans: true,
            eval_samples: 100,
            eval_seeds: 5,
            epoch_checkpoints: vec![100, 500, 1000, 5000, 15000],
            batch_sizes: vec![5, 10, 20, 50, 100, 200],
            sigmas: vec![0.0, 2.0, 4.0],
            timing_calls: 10_000,
        }
    }
}

fn parse<V: FromStr>(key: &str, value: &str) -> Result<V, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("{key}: cannot parse {value:?}")))
}

fn positive(key: &str, value: &str) -> Result<usize, CliError> {
    match parse::<usize>(key, value)? {
        0 => Err(CliError::Config(format!("{key} must be at least 1"))),
        n => Ok(n),
    }
}

fn list<V: FromStr>(key: &str, value: &str) -> Result<Vec<V>, CliError> {
    let items = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect::<Result<Vec<V>, _>>()?;
    if items.is_empty() {
        return Err(CliError::Config(format!("{key}: empty list")));
    }
    Ok(items)
}

pub fn parse_activation(key: &str, value: &str) -> Result<Activation, CliError> {
    match value {
        "tanh" => Ok(Activation::Tanh),
        "sigmoid" => Ok(Activation::Sigmoid),
        "leaky_relu" => Ok(Activation::LeakyRelu),
        _ => Err(CliError::Config(format!(
            "{key}: expected tanh, sigmoid or leaky_relu, got {value:?}"
        ))),
    }
}

impl RunConfig {
    /// Apply one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        match key.trim() {
            "seed" => self.seed = Some(parse(key, v)?),
            "out" => self.out = PathBuf::from(v),
            "map" => self.map = Some(PathBuf::from(v)),
            "classes" => self.classes = Some(PathBuf::from(v)),
            "data_dir" => self.data_dir = Some(PathBuf::from(v)),
            "precision" => {
                self.precision = match v {
                    "f32" => Precision::F32,
                    "f64" => Precision::F64,
                    _ => {
                        return Err(CliError::Config(format!(
                            "precision: expected f32 or f64, got {v:?}"
                        )))
                    }
                }
            }
            "gan_preset" => {
                let preset = match v {
                    "default" => [
                        ("discriminator_activation", "sigmoid"),
                        ("discriminator_pack", "1"),
                        ("lr_decay_from", "none"),
                        ("lr_final_scale", "1"),
                        ("generator_ema", "none"),
                    ],
                    "stabilized" => [
                        ("discriminator_activation", "leaky_relu"),
                        ("discriminator_pack", "2"),
                        ("lr_decay_from", "2000"),
                        ("lr_final_scale", "0.1"),
                        ("generator_ema", "0.999"),
                    ],
                    _ => {
                        return Err(CliError::Config(format!(
                            "gan_preset: expected default or stabilized, got {v:?}"
                        )))
                    }
                };
                for (k, val) in preset {
                    self.set(k, val)?;
                }
            }
            "samples_per_class" => self.samples_per_class = positive(key, v)?,
            "detour_rate" => self.detour_rate = parse(key, v)?,
            "fingerprint_samples" => self.fingerprint_samples = positive(key, v)?,
            "beacons" => self.beacons = Some(PathBuf::from(v)),
            "p0_dbm" => self.p0_dbm = parse(key, v)?,
            "path_loss_exponent" => self.path_loss_exponent = parse(key, v)?,
            "sigma_db" => self.sigma_db = parse(key, v)?,
            "split" => self.split = parse(key, v)?,
            "k" => self.k = positive(key, v)?,
            "cell_size_m" => self.cell_size_m = parse(key, v)?,
            "gan_epochs" => self.gan_epochs = positive(key, v)?,
            "gan_batch_size" => self.gan_batch_size = positive(key, v)?,
            "gan_lr" => self.gan_lr = parse(key, v)?,
            "disc_lr" => self.disc_lr = parse(key, v)?,
            "generator_activation" => self.generator_activation = parse_activation(key, v)?,
            "discriminator_activation" => self.discriminator_activation = parse_activation(key, v)?,
            "discriminator_pack" => self.discriminator_pack = positive(key, v)?,
            "real_label" => self.real_label = parse(key, v)?,
            "lr_decay_from" => {
                self.lr_decay_from = if v == "none" {
                    None
                } else {
                    Some(parse(key, v)?)
                }
            }
            "lr_final_scale" => self.lr_final_scale = parse(key, v)?,
            "generator_ema" => {
                self.generator_ema = if v == "none" {
                    None
                } else {
                    Some(parse(key, v)?)
                }
            }
            "objective" => {
                self.objective = match v {
                    "non_saturating" => GeneratorObjective::NonSaturating,
                    "minimax" => GeneratorObjective::Minimax,
                    _ => {
                        return Err(CliError::Config(format!(
                            "objective: expected non_saturating or minimax, got {v:?}"
                        )))
                    }
                }
            }
            "epoch_mode" => {
                self.epoch_mode = match v {
                    "single_batch" => EpochMode::SingleBatch,
                    "full_pass" => EpochMode::FullPass,
                    _ => {
                        return Err(CliError::Config(format!(
                            "epoch_mode: expected single_batch or full_pass, got {v:?}"
                        )))
                    }
                }
            }
            "classifier_epochs" => self.classifier_epochs = positive(key, v)?,
            "classifier_batch_size" => self.classifier_batch_size = positive(key, v)?,
            "classifier_lr" => self.classifier_lr = parse(key, v)?,
            "max_attempts" => self.max_attempts = positive(key, v)?,
            "validate_plans" => self.validate_plans = parse(key, v)?,
            "eval_samples" => self.eval_samples = positive(key, v)?,
            "eval_seeds" => self.eval_seeds = positive(key, v)?,
            "epoch_checkpoints" => self.epoch_checkpoints = list(key, v)?,
            "batch_sizes" => self.batch_sizes = list(key, v)?,
            "sigmas" => self.sigmas = list(key, v)?,
            "timing_calls" => self.timing_calls = positive(key, v)?,
            other => return Err(CliError::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(key, value)
                .map_err(|e| CliError::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Apply `key=value` overrides in order.
    pub fn apply_overrides<'a>(
        &mut self,
        items: impl IntoIterator<Item = &'a str>,
    ) -> Result<(), CliError> {
        for item in items {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got {item:?}")))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Referenced input files must exist.
    pub fn check_paths(&self) -> Result<(), CliError> {
        for (key, p) in [
            ("map", &self.map),
            ("classes", &self.classes),
            ("beacons", &self.beacons),
        ] {
            if let Some(p) = p {
                if !p.is_file() {
                    return Err(CliError::Config(format!(
                        "{key} file {} does not exist",
                        p.display()
                    )));
                }
            }
        }
        if !(0.0..=1.0).contains(&self.detour_rate) {
            return Err(CliError::Config(format!(
                "detour_rate {} outside [0, 1]",
                self.detour_rate
            )));
        }
        Ok(())
    }

    pub fn require_seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| {
            CliError::Usage("a seed is required (--seed N or seed = N in the config)".into())
        })
    }

    /// `<out>/seed-<seed>`.
    pub fn run_dir(&self) -> Result<PathBuf, CliError> {
        Ok(self.out.join(format!("seed-{}", self.require_seed()?)))
    }

    pub fn data_dir(&self) -> Result<PathBuf, CliError> {
        match &self.data_dir {
            Some(d) => Ok(d.clone()),
            None => Ok(self.run_dir()?.join("data")),
        }
    }

    pub fn models_dir(&self) -> Result<PathBuf, CliError> {
        Ok(self.run_dir()?.join("models"))
    }

    /// Every setting as `key = value`, in a form [`RunConfig::apply_text`] reads back.
    pub fn to_text(&self) -> String {
        let mut m: BTreeMap<&str, String> = BTreeMap::new();
        let act = |a: Activation| match a {
            Activation::Sigmoid => "sigmoid",
            Activation::LeakyRelu => "leaky_relu",
            _ => "tanh",
        };
        let join = |v: &[usize]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        if let Some(s) = self.seed {
            m.insert("seed", s.to_string());
        }
        m.insert("out", self.out.display().to_string());
        for (k, p) in [
            ("map", &self.map),
            ("classes", &self.classes),
            ("data_dir", &self.data_dir),
            ("beacons", &self.beacons),
        ] {
            if let Some(p) = p {
                m.insert(k, p.display().to_string());
            }
        }
        m.insert(
            "precision",
            if self.precision == Precision::F32 {
                "f32"
            } else {
                "f64"
            }
            .into(),
        );
        m.insert("samples_per_class", self.samples_per_class.to_string());
        m.insert("detour_rate", self.detour_rate.to_string());
        m.insert("fingerprint_samples", self.fingerprint_samples.to_string());
        m.insert("p0_dbm", self.p0_dbm.to_string());
        m.insert("path_loss_exponent", self.path_loss_exponent.to_string());
        m.insert("sigma_db", self.sigma_db.to_string());
        m.insert("split", self.split.to_string());
        m.insert("k", self.k.to_string());
        m.insert("cell_size_m", self.cell_size_m.to_string());
        m.insert("gan_epochs", self.gan_epochs.to_string());
        m.insert("gan_batch_size", self.gan_batch_size.to_string());
        m.insert("gan_lr", self.gan_lr.to_string());
        m.insert("disc_lr", self.disc_lr.to_string());
        m.insert(
            "generator_activation",
            act(self.generator_activation).into(),
        );
        m.insert(
            "discriminator_activation",
            act(self.discriminator_activation).into(),
        );
        m.insert("discriminator_pack", self.discriminator_pack.to_string());
        m.insert("real_label", self.real_label.to_string());
        m.insert(
            "lr_decay_from",
            self.lr_decay_from.map_or("none".into(), |e| e.to_string()),
        );
        m.insert("lr_final_scale", self.lr_final_scale.to_string());
        m.insert(
            "generator_ema",
            self.generator_ema.map_or("none".into(), |b| b.to_string()),
        );
        m.insert(
            "objective",
            match self.objective {
                GeneratorObjective::NonSaturating => "non_saturating",
                GeneratorObjective::Minimax => "minimax",
            }
            .into(),
        );
        m.insert(
            "epoch_mode",
            match self.epoch_mode {
                EpochMode::SingleBatch => "single_batch",
                EpochMode::FullPass => "full_pass",
            }
            .into(),
        );
        m.insert("classifier_epochs", self.classifier_epochs.to_string());
        m.insert(
            "classifier_batch_size",
            self.classifier_batch_size.to_string(),
        );
        m.insert("classifier_lr", self.classifier_lr.to_string());
        m.insert("max_attempts", self.max_attempts.to_string());
        m.insert("validate_plans", self.validate_plans.to_string());
        m.insert("eval_samples", self.eval_samples.to_string());
        m.insert("eval_seeds", self.eval_seeds.to_string());
        m.insert("epoch_checkpoints", join(&self.epoch_checkpoints));
        m.insert("batch_sizes", join(&self.batch_sizes));
        m.insert(
            "sigmas",
            self.sigmas
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        m.insert("timing_calls", self.timing_calls.to_string());
        m.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
