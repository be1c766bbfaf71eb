//! Line-oriented run configuration: `section.key = value`, `#` comments.
//!
//! Missing keys keep their defaults; unknown keys are errors. Ranges are
//! written `lo, hi` and the three oscillator ranges as `lo, hi; lo, hi; lo, hi`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::deepsad::{LossVariant, ModalityMask, TrainConfig};
use crate::error::{Error, Result};
use crate::features::CorruptionSpec;
use crate::force::{AbnormalGenConfig, SignalGenConfig};
use crate::pseudo::{MixupConfig, DEFAULT_NNG_K};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PseudoMethod {
    /// real anomalies only
    None,
    Mixup,
    NngMix,
    /// arc cut-paste for images, mixup for force
    Ours,
}

impl PseudoMethod {
    pub const ALL: [PseudoMethod; 4] = [
        PseudoMethod::None,
        PseudoMethod::Mixup,
        PseudoMethod::NngMix,
        PseudoMethod::Ours,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PseudoMethod::None => "none",
            PseudoMethod::Mixup => "mixup",
            PseudoMethod::NngMix => "nngmix",
            PseudoMethod::Ours => "ours",
        }
    }
}

impl FromStr for PseudoMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PseudoMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown pseudo method {s:?} (none, mixup, nngmix, ours)")))
    }
}

/// Sizes and scene mix of the synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub n_normal_train: usize,
    pub n_test_normal: usize,
    pub n_test_anomaly: usize,
    /// labeled real anomalies written to disk; experiments use a prefix
    pub n_labeled: usize,
    pub day_prob: f64,
    /// opacity range of real arcs pasted into abnormal scenes
    pub arc_opacity: [f64; 2],
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            n_normal_train: 1024,
            n_test_normal: 128,
            n_test_anomaly: 128,
            n_labeled: 5,
            day_prob: 0.5,
            arc_opacity: [0.3, 1.0],
        }
    }
}

impl DataConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_normal_train < 20 || self.n_test_normal < 1 || self.n_test_anomaly < 1 {
            return Err(Error::Config(
                "need at least 20 training normals and one test sample per class".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.day_prob) {
            return Err(Error::Config(format!(
                "day_prob must lie in [0, 1], got {}",
                self.day_prob
            )));
        }
        let [lo, hi] = self.arc_opacity;
        if !(0.0 < lo && lo <= hi && hi <= 1.0) {
            return Err(Error::Config(format!(
                "arc_opacity must be an ordered range in (0, 1], got {:?}",
                self.arc_opacity
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub loss: LossVariant,
    pub modality: ModalityMask,
    pub n_real: usize,
    pub pseudo_method: PseudoMethod,
    pub pseudo_per_real: usize,
    pub nng_k: usize,
    pub eta: f64,
    pub corruptions: Vec<CorruptionSpec>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            loss: LossVariant::DeepSadExp,
            modality: ModalityMask::BOTH,
            n_real: 3,
            pseudo_method: PseudoMethod::Ours,
            pseudo_per_real: 64,
            nng_k: DEFAULT_NNG_K,
            eta: 1.0,
            corruptions: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathsConfig {
    pub data_dir: PathBuf,
    pub checkpoint: PathBuf,
    pub report_dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            data_dir: PathBuf::from("data"),
            checkpoint: PathBuf::from("model.bin"),
            report_dir: PathBuf::from("reports"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub master_seed: u64,
    pub signal: SignalGenConfig,
    pub abnormal: AbnormalGenConfig,
    pub mixup: MixupConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
    pub experiment: ExperimentConfig,
    pub paths: PathsConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.signal.validate()?;
        self.abnormal.validate()?;
        self.mixup.validate()?;
        self.train.validate()?;
        self.data.validate()?;
        let e = &self.experiment;
        e.modality.validate()?;
        if !(e.eta.is_finite() && e.eta > 0.0) {
            return Err(Error::Config(format!("eta must be positive, got {}", e.eta)));
        }
        if e.nng_k == 0 {
            return Err(Error::Config("nng_k must be >= 1".into()));
        }
        if e.pseudo_method != PseudoMethod::None && e.n_real > 0 && e.pseudo_per_real == 0 {
            return Err(Error::Config(
                "pseudo_per_real must be >= 1 when generating pseudo-anomalies".into(),
            ));
        }
        if e.n_real > self.data.n_labeled {
            return Err(Error::Config(format!(
                "n_real = {} exceeds the {} labeled anomalies (data.n_labeled)",
                e.n_real, self.data.n_labeled
            )));
        }
        if e.loss != LossVariant::Svdd && e.n_real == 0 {
            return Err(Error::Config(format!(
                "the {} objective needs labeled anomalies (n_real >= 1)",
                e.loss
            )));
        }
        Ok(())
    }

    /// Training settings with the experiment's modality and a seed derived
    /// from the master seed.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: crate::rng::derive_seed(self.master_seed, 0x0074_7261_696e),
            modality: self.experiment.modality,
            ..self.train.clone()
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `section.key = value`", n + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {}", n + 1, strip_prefix(e))))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::parse(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), strip_prefix(e))))
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let s = &mut self.signal;
        let a = &mut self.abnormal;
        let t = &mut self.train;
        let d = &mut self.data;
        let e = &mut self.experiment;
        match key {
            "run.master_seed" => self.master_seed = num(key, v)?,
            "signal.n_samples" => s.n_samples = num(key, v)?,
            "signal.sample_rate" => s.sample_rate = num(key, v)?,
            "signal.mean_force_range" => s.mean_force_range = range(key, v)?,
            "signal.freq_ranges" => s.freq_ranges = triple(key, v)?,
            "signal.amp_ranges" => s.amp_ranges = triple(key, v)?,
            "signal.meas_noise_sigma" => s.meas_noise_sigma = num(key, v)?,
            "signal.irreg_noise_sigma" => s.irreg_noise_sigma = num(key, v)?,
            "signal.drift_range" => s.drift_range = range(key, v)?,
            "signal.transient_prob" => s.transient_prob = num(key, v)?,
            "signal.transient_amp" => s.transient_amp = num(key, v)?,
            "signal.transient_dur_ms" => s.transient_dur = range(key, v)?,
            "signal.variation_prob" => s.variation_prob = num(key, v)?,
            "signal.variation_amp" => s.variation_amp = num(key, v)?,
            "signal.variation_dur_ms" => s.variation_dur = range(key, v)?,
            "abnormal.type_probs" => {
                let p: Vec<f64> = list(key, v)?;
                a.type_probs = p.try_into().map_err(|_| bad(key, v, "three probabilities"))?;
            }
            "abnormal.drop_range" => a.drop_range = range(key, v)?,
            "abnormal.rise_range" => a.rise_range = range(key, v)?,
            "abnormal.micro_perturb_range" => a.micro_perturb_range = range(key, v)?,
            "abnormal.micro_noise_sigma" => a.micro_noise_sigma = num(key, v)?,
            "abnormal.events_per_sample" => a.events_per_sample = range(key, v)?,
            "abnormal.event_dur_samples" => a.event_dur_samples = range(key, v)?,
            "abnormal.burst_only_prob" => a.burst_only_prob = num(key, v)?,
            "abnormal.burst_noise_sigma" => a.burst_noise_sigma = num(key, v)?,
            "abnormal.burst_region_dur_ms" => a.burst_region_dur = range(key, v)?,
            "mixup.alpha" => self.mixup.alpha = num(key, v)?,
            "mixup.lambda_floor" => self.mixup.lambda_floor = num(key, v)?,
            "train.epochs" => t.epochs = num(key, v)?,
            "train.batch_size" => t.batch_size = num(key, v)?,
            "train.learning_rate" => t.adam.learning_rate = num(key, v)?,
            "train.beta1" => t.adam.beta1 = num(key, v)?,
            "train.beta2" => t.adam.beta2 = num(key, v)?,
            "train.adam_epsilon" => t.adam.epsilon = num(key, v)?,
            "train.pretrain_epochs" => t.pretrain_epochs = num(key, v)?,
            "train.eps_inverse" => t.eps_inverse = num(key, v)?,
            "data.n_normal_train" => d.n_normal_train = num(key, v)?,
            "data.n_test_normal" => d.n_test_normal = num(key, v)?,
            "data.n_test_anomaly" => d.n_test_anomaly = num(key, v)?,
            "data.n_labeled" => d.n_labeled = num(key, v)?,
            "data.day_prob" => d.day_prob = num(key, v)?,
            "data.arc_opacity" => d.arc_opacity = range(key, v)?,
            "experiment.loss" => e.loss = v.parse()?,
            "experiment.modality" => e.modality = v.parse()?,
            "experiment.n_real" => e.n_real = num(key, v)?,
            "experiment.pseudo_method" => e.pseudo_method = v.parse()?,
            "experiment.pseudo_per_real" => e.pseudo_per_real = num(key, v)?,
            "experiment.nng_k" => e.nng_k = num(key, v)?,
            "experiment.eta" => e.eta = num(key, v)?,
            "experiment.corruptions" => e.corruptions = corruptions(key, v)?,
            "paths.data_dir" => self.paths.data_dir = PathBuf::from(v),
            "paths.checkpoint" => self.paths.checkpoint = PathBuf::from(v),
            "paths.report_dir" => self.paths.report_dir = PathBuf::from(v),
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Canonical text of every setting; `parse(emit())` reproduces `self`.
    pub fn emit(&self) -> String {
        let mut o = String::new();
        let mut line = |k: &str, v: String| writeln!(o, "{k} = {v}").expect("string write");
        let (s, a, t, d, e) = (&self.signal, &self.abnormal, &self.train, &self.data, &self.experiment);
        line("run.master_seed", self.master_seed.to_string());
        line("signal.n_samples", s.n_samples.to_string());
        line("signal.sample_rate", s.sample_rate.to_string());
        line("signal.mean_force_range", pair(s.mean_force_range));
        line("signal.freq_ranges", triple_text(&s.freq_ranges));
        line("signal.amp_ranges", triple_text(&s.amp_ranges));
        line("signal.meas_noise_sigma", s.meas_noise_sigma.to_string());
        line("signal.irreg_noise_sigma", s.irreg_noise_sigma.to_string());
        line("signal.drift_range", pair(s.drift_range));
        line("signal.transient_prob", s.transient_prob.to_string());
        line("signal.transient_amp", s.transient_amp.to_string());
        line("signal.transient_dur_ms", pair(s.transient_dur));
        line("signal.variation_prob", s.variation_prob.to_string());
        line("signal.variation_amp", s.variation_amp.to_string());
        line("signal.variation_dur_ms", pair(s.variation_dur));
        line("abnormal.type_probs", join(&a.type_probs));
        line("abnormal.drop_range", pair(a.drop_range));
        line("abnormal.rise_range", pair(a.rise_range));
        line("abnormal.micro_perturb_range", pair(a.micro_perturb_range));
        line("abnormal.micro_noise_sigma", a.micro_noise_sigma.to_string());
        line("abnormal.events_per_sample", pair(a.events_per_sample));
        line("abnormal.event_dur_samples", pair(a.event_dur_samples));
        line("abnormal.burst_only_prob", a.burst_only_prob.to_string());
        line("abnormal.burst_noise_sigma", a.burst_noise_sigma.to_string());
        line("abnormal.burst_region_dur_ms", pair(a.burst_region_dur));
        line("mixup.alpha", self.mixup.alpha.to_string());
        line("mixup.lambda_floor", self.mixup.lambda_floor.to_string());
        line("train.epochs", t.epochs.to_string());
        line("train.batch_size", t.batch_size.to_string());
        line("train.learning_rate", t.adam.learning_rate.to_string());
        line("train.beta1", t.adam.beta1.to_string());
        line("train.beta2", t.adam.beta2.to_string());
        line("train.adam_epsilon", t.adam.epsilon.to_string());
        line("train.pretrain_epochs", t.pretrain_epochs.to_string());
        line("train.eps_inverse", t.eps_inverse.to_string());
        line("data.n_normal_train", d.n_normal_train.to_string());
        line("data.n_test_normal", d.n_test_normal.to_string());
        line("data.n_test_anomaly", d.n_test_anomaly.to_string());
        line("data.n_labeled", d.n_labeled.to_string());
        line("data.day_prob", d.day_prob.to_string());
        line("data.arc_opacity", pair(d.arc_opacity));
        line("experiment.loss", e.loss.to_string());
        line("experiment.modality", e.modality.to_string());
        line("experiment.n_real", e.n_real.to_string());
        line("experiment.pseudo_method", e.pseudo_method.name().to_string());
        line("experiment.pseudo_per_real", e.pseudo_per_real.to_string());
        line("experiment.nng_k", e.nng_k.to_string());
        line("experiment.eta", e.eta.to_string());
        let c: Vec<String> = e.corruptions.iter().map(|c| c.tag()).collect();
        line(
            "experiment.corruptions",
            if c.is_empty() { "none".into() } else { c.join(", ") },
        );
        line("paths.data_dir", self.paths.data_dir.display().to_string());
        line("paths.checkpoint", self.paths.checkpoint.display().to_string());
        line("paths.report_dir", self.paths.report_dir.display().to_string());
        o
    }
}

fn strip_prefix(e: Error) -> String {
    match e {
        Error::Config(m) => m,
        other => other.to_string(),
    }
}

fn bad(key: &str, v: &str, want: &str) -> Error {
    Error::Config(format!("{key}: expected {want}, got {v:?}"))
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| bad(key, v, "a number"))
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|p| num(key, p)).collect()
}

fn range<T: FromStr + Copy>(key: &str, v: &str) -> Result<[T; 2]> {
    let p: Vec<T> = list(key, v)?;
    p.try_into().map_err(|_| bad(key, v, "`lo, hi`"))
}

fn triple(key: &str, v: &str) -> Result<[[f64; 2]; 3]> {
    let parts: Vec<[f64; 2]> = v.split(';').map(|p| range(key, p)).collect::<Result<_>>()?;
    parts
        .try_into()
        .map_err(|_| bad(key, v, "three `lo, hi` ranges separated by `;`"))
}

fn corruptions(key: &str, v: &str) -> Result<Vec<CorruptionSpec>> {
    if v == "none" || v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|item| {
            item.parse::<CorruptionSpec>()
                .map_err(|_| bad(key, v, "`kind@level` items"))
        })
        .collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

fn pair<T: ToString>(v: [T; 2]) -> String {
    join(&v)
}

fn triple_text(v: &[[f64; 2]; 3]) -> String {
    v.iter().map(|r| join(r)).collect::<Vec<_>>().join("; ")
}
