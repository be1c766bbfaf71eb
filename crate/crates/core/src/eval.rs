//! Metrics and experiment harnesses.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, PseudoMethod, RunConfig};
use crate::dataset::{self, features_of, stream, MultimodalSample};
use crate::deepsad::{
    pretrain_force_autoencoder, train_with_encoder, EncoderSpec, HypersphereModel, LossVariant, ModalityMask,
    SampleFeatures, TrainLog,
};
use crate::error::{Error, Result};
use crate::features::{corrupt, CorruptionSpec};
use crate::label::Label;
use crate::rng::{derive_path, derive_seed};
use crate::tensor::ParamStore;

/// Mann–Whitney AUROC: the probability that a random anomaly outscores a
/// random normal, ties counting one half.
pub fn auroc(normal: &[f64], anomaly: &[f64]) -> Result<f64> {
    if normal.is_empty() || anomaly.is_empty() {
        return Err(Error::InvalidInput("AUROC needs scores of both classes".into()));
    }
    if normal.iter().chain(anomaly).any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("NaN score".into()));
    }
    let mut all: Vec<(f64, bool)> = normal
        .iter()
        .map(|&s| (s, false))
        .chain(anomaly.iter().map(|&s| (s, true)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    // average 1-based ranks over runs of equal scores; doubled to stay integral
    let mut rank2_sum: u128 = 0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i + 1;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        let avg2 = (i + 1 + j) as u128; // 2 × mean of ranks i+1..=j
        let hits = all[i..j].iter().filter(|x| x.1).count() as u128;
        rank2_sum += avg2 * hits;
        i = j;
    }
    let (n, m) = (normal.len() as u128, anomaly.len() as u128);
    let u2 = rank2_sum - m * (m + 1); // 2U
    let total2 = 2 * n * m;
    // evaluate from whichever side is smaller so swapping classes gives an
    // exact complement
    Ok(if 2 * u2 <= total2 {
        u2 as f64 / total2 as f64
    } else {
        1.0 - (total2 - u2) as f64 / total2 as f64
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMetrics {
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
}

pub fn threshold_metrics(threshold: f64, normal: &[f64], anomaly: &[f64]) -> ThresholdMetrics {
    let rate = |s: &[f64]| s.iter().filter(|&&x| x > threshold).count() as f64 / s.len().max(1) as f64;
    ThresholdMetrics {
        threshold,
        tpr: rate(anomaly),
        fpr: rate(normal),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tag: String,
    pub auroc: f64,
    pub n_normal: usize,
    pub n_anomaly: usize,
    pub threshold_metrics: ThresholdMetrics,
    pub config_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_corruption: Option<BTreeMap<String, f64>>,
    pub normal_scores: Vec<f64>,
    pub anomaly_scores: Vec<f64>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("bad report JSON: {e}")))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        EvalReport::from_json(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// Hex SHA-256 of the canonical config text.
pub fn config_digest(cfg: &RunConfig) -> String {
    Sha256::digest(cfg.emit().as_bytes())
        .iter()
        .fold(String::new(), |mut s, b| {
            write!(s, "{b:02x}").expect("string write");
            s
        })
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

/// Plain-text table of reports, one row each.
pub fn format_table(reports: &[EvalReport]) -> String {
    let width = reports.iter().map(|r| r.tag.len()).max().unwrap_or(0).max(6);
    let mut out = format!("{:<width$}  {:>6}  {:>6}  {:>6}\n", "method", "AUROC", "TPR", "FPR");
    for r in reports {
        let m = r.threshold_metrics;
        writeln!(
            out,
            "{:<width$}  {:>6.2}  {:>6.2}  {:>6.2}",
            r.tag,
            100.0 * r.auroc,
            100.0 * m.tpr,
            100.0 * m.fpr
        )
        .expect("string write");
    }
    out
}

pub fn model_seed(cfg: &RunConfig) -> u64 {
    derive_seed(cfg.master_seed, 0x006d_6f64_656c)
}

/// Clean test scores split by label, in sample order.
pub fn split_scores(scores: &[f64], labels: &[Label]) -> (Vec<f64>, Vec<f64>) {
    let mut n = Vec::new();
    let mut a = Vec::new();
    for (&s, l) in scores.iter().zip(labels) {
        if l.is_abnormal() {
            a.push(s);
        } else {
            n.push(s);
        }
    }
    (n, a)
}

/// Copies of `test` with corrupted images; forces are untouched. Each
/// sample's noise seed depends on the master seed, the spec and its index.
pub fn corrupt_split(cfg: &RunConfig, test: &[MultimodalSample], spec: CorruptionSpec) -> Vec<MultimodalSample> {
    test.iter()
        .enumerate()
        .map(|(i, s)| {
            let seed = derive_path(
                cfg.master_seed,
                &[stream::CORRUPTION, spec.kind() as u64, spec.level() as u64, i as u64],
            );
            MultimodalSample {
                image: corrupt(&s.image, spec, seed),
                force: s.force.clone(),
                label: s.label,
            }
        })
        .collect()
}

/// Re-scores corrupted copies of the test images with a trained model.
pub fn corruption_sweep(
    cfg: &RunConfig,
    model: &HypersphereModel,
    test: &[MultimodalSample],
    test_features: &[SampleFeatures],
    specs: &[CorruptionSpec],
    mask: ModalityMask,
) -> Result<BTreeMap<String, f64>> {
    let labels: Vec<Label> = test.iter().map(|s| s.label).collect();
    let mut out = BTreeMap::new();
    for &spec in specs {
        let feats: Vec<SampleFeatures> = corrupt_split(cfg, test, spec)
            .into_iter()
            .zip(test_features)
            .map(|(s, f)| SampleFeatures {
                image: s.image.pixels,
                force: f.force.clone(),
            })
            .collect();
        let scores = model.score_all(&feats, mask)?;
        let (n, a) = split_scores(&scores, &labels);
        out.insert(spec.tag(), auroc(&n, &a)?);
    }
    Ok(out)
}

/// Builds a report for a trained model on a labeled test set.
pub fn evaluate(
    cfg: &RunConfig,
    tag: &str,
    model: &HypersphereModel,
    test: &[MultimodalSample],
    test_features: &[SampleFeatures],
) -> Result<EvalReport> {
    let mask = cfg.experiment.modality;
    let scores = model.score_all(test_features, mask)?;
    let labels: Vec<Label> = test.iter().map(|s| s.label).collect();
    let (normal_scores, anomaly_scores) = split_scores(&scores, &labels);
    let threshold = model
        .threshold
        .ok_or_else(|| Error::InvalidInput("model threshold is not calibrated".into()))?;
    let per_corruption = if cfg.experiment.corruptions.is_empty() {
        None
    } else {
        Some(corruption_sweep(
            cfg,
            model,
            test,
            test_features,
            &cfg.experiment.corruptions,
            mask,
        )?)
    };
    Ok(EvalReport {
        tag: tag.to_string(),
        auroc: auroc(&normal_scores, &anomaly_scores)?,
        n_normal: normal_scores.len(),
        n_anomaly: anomaly_scores.len(),
        threshold_metrics: threshold_metrics(threshold, &normal_scores, &anomaly_scores),
        config_digest: config_digest(cfg),
        per_corruption,
        normal_scores,
        anomaly_scores,
    })
}

struct SampleSet {
    samples: Vec<MultimodalSample>,
    features: Vec<SampleFeatures>,
}

impl SampleSet {
    fn new(samples: Vec<MultimodalSample>) -> Result<Self> {
        let features = features_of(&samples)?;
        Ok(SampleSet { samples, features })
    }
}

/// Data and pretraining shared by every experiment on one base config and
/// seed; only the experiment section may differ between runs.
pub struct Workspace {
    base: RunConfig,
    normals: SampleSet,
    test: SampleSet,
    reals: SampleSet,
    pseudo: BTreeMap<PseudoMethod, SampleSet>,
    encoder: Option<ParamStore>,
    /// loaded data: the labeled pool cannot grow on demand
    fixed_reals: bool,
}

impl Workspace {
    pub fn new(base: &RunConfig) -> Result<Self> {
        base.validate()?;
        Ok(Workspace {
            base: base.clone(),
            normals: SampleSet::new(dataset::train_normals(base))?,
            test: SampleSet::new(dataset::test_split(base)?)?,
            reals: SampleSet::new(Vec::new())?,
            pseudo: BTreeMap::new(),
            encoder: None,
            fixed_reals: false,
        })
    }

    /// A workspace over already loaded splits. `reals` is the labeled
    /// anomaly pool experiments take their first `n_real` samples from.
    pub fn from_samples(
        base: &RunConfig,
        normals: Vec<MultimodalSample>,
        reals: Vec<MultimodalSample>,
        test: Vec<MultimodalSample>,
    ) -> Result<Self> {
        base.validate()?;
        Ok(Workspace {
            base: base.clone(),
            normals: SampleSet::new(normals)?,
            test: SampleSet::new(test)?,
            reals: SampleSet::new(reals)?,
            pseudo: BTreeMap::new(),
            encoder: None,
            fixed_reals: true,
        })
    }

    /// Supplies a precomputed pseudo-anomaly set for `method`, laid out as
    /// `pseudo_per_real` samples per real anomaly.
    pub fn set_pseudo(&mut self, method: PseudoMethod, samples: Vec<MultimodalSample>) -> Result<()> {
        self.pseudo.insert(method, SampleSet::new(samples)?);
        Ok(())
    }

    pub fn config(&self) -> &RunConfig {
        &self.base
    }

    fn ensure_reals(&mut self, n: usize) -> Result<()> {
        if self.reals.samples.len() < n {
            if self.fixed_reals {
                return Err(Error::InvalidInput(format!(
                    "experiment needs {n} labeled anomalies but the dataset holds {}",
                    self.reals.samples.len()
                )));
            }
            self.reals = SampleSet::new(dataset::real_anomalies(&self.base, n)?)?;
            // pseudo sets are per-real prefixes; rebuild for the larger pool
            self.pseudo.clear();
        }
        Ok(())
    }

    fn pseudo_prefix(&mut self, method: PseudoMethod, n_real: usize) -> Result<&[SampleFeatures]> {
        if !self.pseudo.contains_key(&method) {
            let set = dataset::pseudo_anomalies(&self.base, &self.normals.samples, &self.reals.samples, method)?;
            self.pseudo.insert(method, SampleSet::new(set)?);
        }
        let per = self.base.experiment.pseudo_per_real;
        let set = &self.pseudo[&method].features;
        if set.len() < n_real * per {
            return Err(Error::InvalidInput(format!(
                "{} pseudo-anomalies available, {} needed",
                set.len(),
                n_real * per
            )));
        }
        Ok(&set[..n_real * per])
    }

    fn pretrained_encoder(&mut self, model: &HypersphereModel, cfg: &RunConfig) -> Result<ParamStore> {
        if self.encoder.is_none() {
            let data: Vec<Vec<f64>> = self.normals.features.iter().map(|f| f.force.clone()).collect();
            let (store, _) = pretrain_force_autoencoder(&model.force_net, &data, &cfg.train_config())?;
            self.encoder = Some(store);
        }
        Ok(self.encoder.clone().expect("encoder cached"))
    }

    /// Trains and evaluates one experiment.
    pub fn run(&mut self, experiment: &ExperimentConfig, tag: &str) -> Result<(EvalReport, HypersphereModel)> {
        let (model, _) = self.train(experiment)?;
        let mut cfg = self.base.clone();
        cfg.experiment = experiment.clone();
        let report = evaluate(&cfg, tag, &model, &self.test.samples, &self.test.features)?;
        Ok((report, model))
    }

    /// Trains one experiment on the workspace data.
    pub fn train(&mut self, experiment: &ExperimentConfig) -> Result<(HypersphereModel, TrainLog)> {
        let mut cfg = self.base.clone();
        cfg.experiment = experiment.clone();
        cfg.validate()?;
        if experiment.pseudo_per_real != self.base.experiment.pseudo_per_real {
            return Err(Error::Config("pseudo_per_real must match the workspace config".into()));
        }
        let model = HypersphereModel::init(
            EncoderSpec::default(),
            experiment.loss,
            experiment.eta,
            model_seed(&cfg),
        )?;
        let encoder = if experiment.modality.force {
            Some(self.pretrained_encoder(&model, &cfg)?)
        } else {
            None
        };
        let n_real = if experiment.loss == LossVariant::Svdd {
            0
        } else {
            experiment.n_real
        };
        self.ensure_reals(n_real)?;
        let mut anomalies: Vec<SampleFeatures> = self.reals.features[..n_real].to_vec();
        if experiment.pseudo_method != PseudoMethod::None && n_real > 0 {
            anomalies.extend_from_slice(self.pseudo_prefix(experiment.pseudo_method, n_real)?);
        }
        train_with_encoder(
            model,
            encoder.as_ref(),
            &self.normals.features,
            &anomalies,
            &cfg.train_config(),
        )
    }
}

/// Generates the data, trains and evaluates the configured experiment.
pub fn run_experiment(cfg: &RunConfig) -> Result<EvalReport> {
    Ok(Workspace::new(cfg)?.run(&cfg.experiment, "experiment")?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_separation_and_ties() {
        assert_eq!(auroc(&[0.1, 0.2], &[0.8, 0.9]).unwrap(), 1.0);
        assert_eq!(auroc(&[0.8, 0.9], &[0.1, 0.2]).unwrap(), 0.0);
        assert_eq!(auroc(&[0.5; 4], &[0.5; 3]).unwrap(), 0.5);
        assert!(auroc(&[], &[1.0]).is_err());
    }

    #[test]
    fn median_values() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn threshold_rates() {
        let m = threshold_metrics(0.5, &[0.1, 0.5, 0.7, 0.2], &[0.6, 0.4]);
        assert_eq!(m.fpr, 0.25);
        assert_eq!(m.tpr, 0.5);
    }

    #[test]
    fn digest_tracks_config() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.master_seed = 1;
        assert_eq!(config_digest(&a).len(), 64);
        assert_eq!(config_digest(&a), config_digest(&a.clone()));
        assert_ne!(config_digest(&a), config_digest(&b));
    }

    #[test]
    fn report_json_round_trip() {
        let r = EvalReport {
            tag: "x".into(),
            auroc: 0.75,
            n_normal: 2,
            n_anomaly: 2,
            threshold_metrics: threshold_metrics(0.5, &[0.1, 0.6], &[0.7, 0.4]),
            config_digest: "ab".into(),
            per_corruption: Some(BTreeMap::from([("fog@1".to_string(), 0.7)])),
            normal_scores: vec![0.1, 0.6],
            anomaly_scores: vec![0.7, 0.4],
        };
        let text = r.to_json();
        assert!(text.find("\"auroc\"").unwrap() < text.find("\"n_normal\"").unwrap());
        assert_eq!(EvalReport::from_json(&text).unwrap(), r);
    }
}
