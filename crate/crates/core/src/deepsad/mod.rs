//! The hypersphere detector: per-modality encoders, late fusion, the fixed
//! center, the three training objectives, scoring and thresholding.

mod model_io;
mod train;

pub use model_io::{decode_model, encode_model, read_model, write_model};
pub use train::{
    calibrate_threshold, pretrain_force_autoencoder, train, train_with_encoder, TrainConfig, TrainLog,
    MIN_CALIBRATION_SCORES,
};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from};
use crate::tensor::{Activation, LayerSpec, Sequential, Tensor};

/// Smallest magnitude allowed for a center coordinate.
pub const CENTER_FLOOR: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LossVariant {
    /// normals only
    Svdd,
    /// normals plus `η / (d² + ε)` on anomalies
    DeepSadInverse,
    /// normals plus `η · exp(−d²)` on anomalies
    DeepSadExp,
}

impl LossVariant {
    pub const ALL: [LossVariant; 3] = [LossVariant::Svdd, LossVariant::DeepSadInverse, LossVariant::DeepSadExp];

    pub fn name(self) -> &'static str {
        match self {
            LossVariant::Svdd => "svdd",
            LossVariant::DeepSadInverse => "inverse",
            LossVariant::DeepSadExp => "exp",
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            LossVariant::Svdd => 0,
            LossVariant::DeepSadInverse => 1,
            LossVariant::DeepSadExp => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        LossVariant::ALL.into_iter().find(|v| v.tag() == tag)
    }

    /// Per-anomaly penalty at squared distance `d2`, before the η weight.
    pub fn anomaly_term(self, d2: f64, eps_inverse: f64) -> f64 {
        match self {
            LossVariant::Svdd => 0.0,
            LossVariant::DeepSadInverse => 1.0 / (d2 + eps_inverse),
            LossVariant::DeepSadExp => (-d2).exp(),
        }
    }

    /// `d/d(d²)` of [`LossVariant::anomaly_term`].
    pub fn anomaly_term_slope(self, d2: f64, eps_inverse: f64) -> f64 {
        match self {
            LossVariant::Svdd => 0.0,
            LossVariant::DeepSadInverse => -1.0 / (d2 + eps_inverse).powi(2),
            LossVariant::DeepSadExp => -(-d2).exp(),
        }
    }
}

impl fmt::Display for LossVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown loss variant {s:?} (svdd, inverse, exp)")))
    }
}

/// Which modality branches feed the fusion head. A disabled branch
/// contributes a zero embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModalityMask {
    pub image: bool,
    pub force: bool,
}

impl ModalityMask {
    pub const BOTH: ModalityMask = ModalityMask {
        image: true,
        force: true,
    };
    pub const IMAGE_ONLY: ModalityMask = ModalityMask {
        image: true,
        force: false,
    };
    pub const FORCE_ONLY: ModalityMask = ModalityMask {
        image: false,
        force: true,
    };

    pub fn validate(self) -> Result<()> {
        if !self.image && !self.force {
            return Err(Error::Config("at least one modality must be enabled".into()));
        }
        Ok(())
    }

    pub fn name(self) -> &'static str {
        match (self.image, self.force) {
            (true, true) => "both",
            (true, false) => "image",
            (false, true) => "force",
            (false, false) => "none",
        }
    }
}

impl fmt::Display for ModalityMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModalityMask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "both" => Ok(ModalityMask::BOTH),
            "image" => Ok(ModalityMask::IMAGE_ONLY),
            "force" => Ok(ModalityMask::FORCE_ONLY),
            _ => Err(Error::Config(format!("unknown modality {s:?} (both, image, force)"))),
        }
    }
}

/// Network inputs of one paired sample: flattened image pixels and the
/// force spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleFeatures {
    pub image: Vec<f64>,
    pub force: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderSpec {
    pub image: Vec<LayerSpec>,
    pub force: Vec<LayerSpec>,
    pub fusion: Vec<LayerSpec>,
    /// channel/height/width of the image input
    pub image_shape: [usize; 3],
}

impl Default for EncoderSpec {
    fn default() -> Self {
        let lrelu = Activation::LeakyRelu;
        let conv = |cin, cout, hw| LayerSpec::Conv2d {
            in_channels: cin,
            out_channels: cout,
            kernel: 3,
            stride: 2,
            padding: 1,
            in_height: hw,
            in_width: hw,
            activation: lrelu,
        };
        EncoderSpec {
            image: vec![
                conv(1, 8, 64),
                conv(8, 16, 32),
                LayerSpec::dense(16 * 16 * 16, 32, lrelu),
            ],
            force: vec![LayerSpec::dense(256, 64, lrelu), LayerSpec::dense(64, 32, lrelu)],
            fusion: vec![
                LayerSpec::dense(64, 32, lrelu),
                LayerSpec::dense(32, 16, Activation::Identity),
            ],
            image_shape: [1, 64, 64],
        }
    }
}

fn out_len(specs: &[LayerSpec]) -> usize {
    specs.last().map_or(0, |s| s.output_len())
}

impl EncoderSpec {
    pub fn validate(&self) -> Result<()> {
        if self.image.is_empty() || self.force.is_empty() || self.fusion.is_empty() {
            return Err(Error::Config("every encoder needs at least one layer".into()));
        }
        let [c, h, w] = self.image_shape;
        if c * h * w != self.image[0].input_len() {
            return Err(Error::Config(format!(
                "image shape {:?} does not match the first image layer ({} inputs)",
                self.image_shape,
                self.image[0].input_len()
            )));
        }
        let fused = out_len(&self.image) + out_len(&self.force);
        if fused != self.fusion[0].input_len() {
            return Err(Error::Config(format!(
                "fusion head expects {} inputs but the encoders produce {fused}",
                self.fusion[0].input_len()
            )));
        }
        Ok(())
    }

    pub fn image_len(&self) -> usize {
        self.image[0].input_len()
    }

    pub fn force_len(&self) -> usize {
        self.force[0].input_len()
    }

    pub fn image_embedding_len(&self) -> usize {
        out_len(&self.image)
    }

    pub fn force_embedding_len(&self) -> usize {
        out_len(&self.force)
    }

    pub fn embedding_dim(&self) -> usize {
        out_len(&self.fusion)
    }
}

#[derive(Debug, Clone)]
pub struct HypersphereModel {
    pub spec: EncoderSpec,
    pub image_net: Sequential,
    pub force_net: Sequential,
    pub fusion: Sequential,
    pub center: Vec<f64>,
    pub variant: LossVariant,
    pub eta: f64,
    pub threshold: Option<f64>,
}

impl HypersphereModel {
    /// Fresh Glorot-initialized networks with a placeholder center of ones.
    pub fn init(spec: EncoderSpec, variant: LossVariant, eta: f64, seed: u64) -> Result<Self> {
        spec.validate()?;
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::Config(format!("eta must be positive, got {eta}")));
        }
        let image_net = Sequential::init(spec.image.clone(), &mut rng_from(derive_seed(seed, 0)))?;
        let force_net = Sequential::init(spec.force.clone(), &mut rng_from(derive_seed(seed, 1)))?;
        let fusion = Sequential::init(spec.fusion.clone(), &mut rng_from(derive_seed(seed, 2)))?;
        let p = spec.embedding_dim();
        Ok(HypersphereModel {
            spec,
            image_net,
            force_net,
            fusion,
            center: vec![1.0; p],
            variant,
            eta,
            threshold: None,
        })
    }

    pub fn embedding_dim(&self) -> usize {
        self.spec.embedding_dim()
    }

    fn check_features(&self, f: &SampleFeatures) -> Result<()> {
        if f.image.len() != self.spec.image_len() || f.force.len() != self.spec.force_len() {
            return Err(Error::InvalidInput(format!(
                "sample features have {} image and {} force values, model expects {} and {}",
                f.image.len(),
                f.force.len(),
                self.spec.image_len(),
                self.spec.force_len()
            )));
        }
        Ok(())
    }

    pub(crate) fn image_batch(&self, samples: &[&SampleFeatures]) -> Result<Tensor> {
        let [c, h, w] = self.spec.image_shape;
        let mut data = Vec::with_capacity(samples.len() * c * h * w);
        for s in samples {
            self.check_features(s)?;
            data.extend_from_slice(&s.image);
        }
        Tensor::new(data, vec![samples.len(), c, h, w])
    }

    pub(crate) fn force_batch(&self, samples: &[&SampleFeatures]) -> Result<Tensor> {
        let mut data = Vec::with_capacity(samples.len() * self.spec.force_len());
        for s in samples {
            self.check_features(s)?;
            data.extend_from_slice(&s.force);
        }
        Tensor::new(data, vec![samples.len(), self.spec.force_len()])
    }

    /// Joins per-branch embeddings into the fusion input, zeros standing in
    /// for a masked branch.
    pub(crate) fn concat(&self, batch: usize, img: Option<&Tensor>, frc: Option<&Tensor>) -> Result<Tensor> {
        let (li, lf) = (self.spec.image_embedding_len(), self.spec.force_embedding_len());
        let mut data = vec![0.0; batch * (li + lf)];
        for (b, row) in data.chunks_mut(li + lf).enumerate() {
            if let Some(t) = img {
                row[..li].copy_from_slice(t.row(b));
            }
            if let Some(t) = frc {
                row[li..].copy_from_slice(t.row(b));
            }
        }
        Tensor::new(data, vec![batch, li + lf])
    }

    /// Embeddings of a batch without gradient bookkeeping, `[n, p]`.
    pub fn embed_batch(&self, samples: &[&SampleFeatures], mask: ModalityMask) -> Result<Tensor> {
        mask.validate()?;
        if samples.is_empty() {
            return Tensor::new(Vec::new(), vec![0, self.embedding_dim()]);
        }
        let img = if mask.image {
            Some(self.image_net.infer(&self.image_batch(samples)?)?)
        } else {
            None
        };
        let frc = if mask.force {
            Some(self.force_net.infer(&self.force_batch(samples)?)?)
        } else {
            None
        };
        let fused = self.concat(samples.len(), img.as_ref(), frc.as_ref())?;
        self.fusion.infer(&fused)
    }

    pub fn embed(&self, sample: &SampleFeatures, mask: ModalityMask) -> Result<Vec<f64>> {
        Ok(self.embed_batch(&[sample], mask)?.into_data())
    }

    pub fn sq_distance(&self, embedding: &[f64]) -> f64 {
        embedding.iter().zip(&self.center).map(|(e, c)| (e - c) * (e - c)).sum()
    }

    pub fn score(&self, sample: &SampleFeatures, mask: ModalityMask) -> Result<f64> {
        Ok(self.sq_distance(&self.embed(sample, mask)?))
    }

    /// Scores in input order, embedded in chunks.
    pub fn score_all(&self, samples: &[SampleFeatures], mask: ModalityMask) -> Result<Vec<f64>> {
        let mut scores = Vec::with_capacity(samples.len());
        for chunk in samples.chunks(SCORE_CHUNK) {
            let refs: Vec<&SampleFeatures> = chunk.iter().collect();
            let emb = self.embed_batch(&refs, mask)?;
            for b in 0..chunk.len() {
                scores.push(self.sq_distance(emb.row(b)));
            }
        }
        Ok(scores)
    }

    /// Sets the center to the mean normal embedding, flooring small
    /// coordinates to ±0.1.
    pub fn init_center(&mut self, normals: &[SampleFeatures], mask: ModalityMask) -> Result<()> {
        if normals.is_empty() {
            return Err(Error::InvalidInput("center initialization needs normal samples".into()));
        }
        let p = self.embedding_dim();
        let mut sum = vec![0.0; p];
        for chunk in normals.chunks(SCORE_CHUNK) {
            let refs: Vec<&SampleFeatures> = chunk.iter().collect();
            let emb = self.embed_batch(&refs, mask)?;
            for b in 0..chunk.len() {
                for (s, e) in sum.iter_mut().zip(emb.row(b)) {
                    *s += e;
                }
            }
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / normals.len() as f64).collect();
        self.center = floor_center(&mean);
        Ok(())
    }

    /// Whether `score` is classified anomalous under the stored threshold.
    pub fn is_anomalous(&self, score: f64) -> Result<bool> {
        let t = self
            .threshold
            .ok_or_else(|| Error::InvalidInput("model threshold is not calibrated".into()))?;
        Ok(score > t)
    }

    /// Loss of one batch; fills the parameter gradients of all three
    /// networks (accumulating into whatever they already hold).
    pub fn loss_batch(
        &mut self,
        normals: &[&SampleFeatures],
        anomalies: &[&SampleFeatures],
        mask: ModalityMask,
        eps_inverse: f64,
    ) -> Result<f64> {
        mask.validate()?;
        let mut all: Vec<&SampleFeatures> = Vec::with_capacity(normals.len() + anomalies.len());
        all.extend_from_slice(normals);
        all.extend_from_slice(anomalies);
        let is_anomaly: Vec<bool> = (0..all.len()).map(|i| i >= normals.len()).collect();
        self.loss_mixed(&all, &is_anomaly, mask, eps_inverse)
    }

    pub(crate) fn loss_mixed(
        &mut self,
        samples: &[&SampleFeatures],
        is_anomaly: &[bool],
        mask: ModalityMask,
        eps_inverse: f64,
    ) -> Result<f64> {
        let batch = samples.len();
        if batch == 0 {
            return Err(Error::InvalidInput("empty training batch".into()));
        }
        let img = if mask.image {
            Some(self.image_net.forward(&self.image_batch(samples)?)?)
        } else {
            None
        };
        let frc = if mask.force {
            Some(self.force_net.forward(&self.force_batch(samples)?)?)
        } else {
            None
        };
        let fused = self.concat(batch, img.as_ref(), frc.as_ref())?;
        let emb = self.fusion.forward(&fused)?;

        let n_a = is_anomaly.iter().filter(|&&a| a).count();
        let n_n = batch - n_a;
        let use_anomalies = self.variant != LossVariant::Svdd && n_a > 0;
        let p = self.embedding_dim();
        let mut loss_n = 0.0;
        let mut loss_a = 0.0;
        let mut grad = vec![0.0; batch * p];
        for (b, &anomalous) in is_anomaly.iter().enumerate() {
            let e = emb.row(b);
            let d2 = self.sq_distance(e);
            let scale = if !anomalous {
                loss_n += d2;
                1.0 / n_n as f64
            } else if use_anomalies {
                loss_a += self.variant.anomaly_term(d2, eps_inverse);
                self.eta / n_a as f64 * self.variant.anomaly_term_slope(d2, eps_inverse)
            } else {
                0.0
            };
            for ((g, x), c) in grad[b * p..(b + 1) * p].iter_mut().zip(e).zip(&self.center) {
                *g = scale * 2.0 * (x - c);
            }
        }
        let mut loss = if n_n > 0 { loss_n / n_n as f64 } else { 0.0 };
        if use_anomalies {
            loss += self.eta * loss_a / n_a as f64;
        }

        let grad = Tensor::new(grad, vec![batch, p])?;
        let g_fused = self.fusion.backward(&grad)?;
        let (li, lf) = (self.spec.image_embedding_len(), self.spec.force_embedding_len());
        if img.is_some() {
            let mut g = Vec::with_capacity(batch * li);
            for b in 0..batch {
                g.extend_from_slice(&g_fused.row(b)[..li]);
            }
            self.image_net.backward_params(&Tensor::new(g, vec![batch, li])?)?;
        }
        if frc.is_some() {
            let mut g = Vec::with_capacity(batch * lf);
            for b in 0..batch {
                g.extend_from_slice(&g_fused.row(b)[li..]);
            }
            self.force_net.backward_params(&Tensor::new(g, vec![batch, lf])?)?;
        }
        Ok(loss)
    }

    pub fn zero_grads(&mut self) {
        self.image_net.params.zero_grads();
        self.force_net.params.zero_grads();
        self.fusion.params.zero_grads();
    }

    /// All parameters (image, force, fusion order).
    pub fn flat_params(&self) -> Vec<f64> {
        let mut v = self.image_net.params.flat_params();
        v.extend(self.force_net.params.flat_params());
        v.extend(self.fusion.params.flat_params());
        v
    }

    pub fn flat_grads(&self) -> Vec<f64> {
        let mut v = self.image_net.params.flat_grads();
        v.extend(self.force_net.params.flat_grads());
        v.extend(self.fusion.params.flat_grads());
        v
    }

    pub fn param_mut(&mut self, mut index: usize) -> &mut f64 {
        for net in [&mut self.image_net, &mut self.force_net, &mut self.fusion] {
            let n = net.params.param_count();
            if index < n {
                return net.params.param_mut(index);
            }
            index -= n;
        }
        panic!("parameter index out of range");
    }
}

const SCORE_CHUNK: usize = 128;

pub(crate) fn floor_center(mean: &[f64]) -> Vec<f64> {
    mean.iter()
        .map(|&m| {
            if m.abs() < CENTER_FLOOR {
                if m < 0.0 {
                    -CENTER_FLOOR
                } else {
                    CENTER_FLOOR
                }
            } else {
                m
            }
        })
        .collect()
}
