use rand::seq::SliceRandom;

use super::{HypersphereModel, ModalityMask, SampleFeatures};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from};
use crate::tensor::{adam_step, Activation, AdamConfig, LayerSpec, ParamStore, Sequential, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub pretrain_epochs: usize,
    pub eps_inverse: f64,
    pub seed: u64,
    pub modality: ModalityMask,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 64,
            adam: AdamConfig::default(),
            pretrain_epochs: 100,
            eps_inverse: 1e-6,
            seed: 0,
            modality: ModalityMask::BOTH,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 || self.batch_size < 1 || self.pretrain_epochs < 1 {
            return Err(Error::Config(
                "epochs, batch_size and pretrain_epochs must be >= 1".into(),
            ));
        }
        if !(self.eps_inverse.is_finite() && self.eps_inverse > 0.0) {
            return Err(Error::Config(format!(
                "eps_inverse must be positive, got {}",
                self.eps_inverse
            )));
        }
        self.adam.validate()?;
        self.modality.validate()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    /// reconstruction MSE over the data before training, then after each epoch
    pub pretrain_mse: Vec<f64>,
    /// mean batch loss per epoch
    pub epoch_loss: Vec<f64>,
    pub initial_normal_distance: f64,
    pub final_normal_distance: f64,
}

fn decoder_specs(encoder: &[LayerSpec]) -> Result<Vec<LayerSpec>> {
    let mut dec = Vec::with_capacity(encoder.len());
    for (i, s) in encoder.iter().enumerate().rev() {
        match *s {
            LayerSpec::Dense { inputs, outputs, .. } => {
                let act = if i == 0 {
                    Activation::Identity
                } else {
                    Activation::LeakyRelu
                };
                dec.push(LayerSpec::dense(outputs, inputs, act));
            }
            LayerSpec::Conv2d { .. } => {
                return Err(Error::Config(
                    "autoencoder pretraining needs a dense force encoder".into(),
                ))
            }
        }
    }
    Ok(dec)
}

fn reconstruction_mse(net: &Sequential, data: &[Vec<f64>]) -> Result<f64> {
    let width = net.input_len();
    let mut total = 0.0;
    for chunk in data.chunks(256) {
        let x = Tensor::from_rows(chunk)?;
        let y = net.infer(&x)?;
        total += y
            .data()
            .iter()
            .zip(x.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    }
    Ok(total / (data.len() * width) as f64)
}

/// Trains `encoder` plus a mirrored decoder to reconstruct `data` and
/// returns the trained encoder layers with fresh optimizer state.
pub fn pretrain_force_autoencoder(
    encoder: &Sequential,
    data: &[Vec<f64>],
    cfg: &TrainConfig,
) -> Result<(ParamStore, Vec<f64>)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidInput("autoencoder pretraining needs data".into()));
    }
    let enc_specs = encoder.specs().to_vec();
    let dec_specs = decoder_specs(&enc_specs)?;
    let decoder = ParamStore::init(&dec_specs, &mut rng_from(derive_seed(cfg.seed, 10)));
    let mut layers = encoder.params.layers.clone();
    layers.extend(decoder.layers);
    let mut specs = enc_specs.clone();
    specs.extend(dec_specs);
    let mut net = Sequential::new(specs, ParamStore::from_layers(layers))?;

    let mut rng = rng_from(derive_seed(cfg.seed, 11));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = vec![reconstruction_mse(&net, data)?];
    let width = net.input_len();
    for epoch in 0..cfg.pretrain_epochs {
        order.shuffle(&mut rng);
        for (bi, idx) in order.chunks(cfg.batch_size).enumerate() {
            let rows: Vec<&Vec<f64>> = idx.iter().map(|&i| &data[i]).collect();
            let x = Tensor::from_rows(&rows)?;
            let y = net.forward(&x).map_err(|e| diverged(e, epoch, bi))?;
            let scale = 2.0 / (idx.len() * width) as f64;
            let mut loss = 0.0;
            let grad: Vec<f64> = y
                .data()
                .iter()
                .zip(x.data())
                .map(|(a, b)| {
                    loss += (a - b) * (a - b);
                    scale * (a - b)
                })
                .collect();
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, batch: bi, loss });
            }
            net.backward_params(&Tensor::new(grad, y.shape().to_vec())?)?;
            adam_step(&mut net.params, &cfg.adam);
        }
        history.push(reconstruction_mse(&net, data).map_err(|e| diverged(e, epoch, 0))?);
    }
    let mut layers = net.into_params().layers;
    layers.truncate(enc_specs.len());
    Ok((ParamStore::from_layers(layers), history))
}

fn diverged(e: Error, epoch: usize, batch: usize) -> Error {
    match e {
        Error::NonFinite { .. } => Error::Divergence {
            epoch,
            batch,
            loss: f64::NAN,
        },
        other => other,
    }
}

fn mean_normal_distance(model: &HypersphereModel, normals: &[SampleFeatures], mask: ModalityMask) -> Result<f64> {
    let s = model.score_all(normals, mask)?;
    Ok(s.iter().sum::<f64>() / s.len() as f64)
}

/// Pretrains the force encoder (when the force branch is enabled), fixes
/// the center, trains for `cfg.epochs` and calibrates the threshold on the
/// normal training scores.
pub fn train(
    model: HypersphereModel,
    normals: &[SampleFeatures],
    anomalies: &[SampleFeatures],
    cfg: &TrainConfig,
) -> Result<(HypersphereModel, TrainLog)> {
    train_with_encoder(model, None, normals, anomalies, cfg)
}

/// [`train`] with an already pretrained force encoder.
pub fn train_with_encoder(
    mut model: HypersphereModel,
    pretrained: Option<&ParamStore>,
    normals: &[SampleFeatures],
    anomalies: &[SampleFeatures],
    cfg: &TrainConfig,
) -> Result<(HypersphereModel, TrainLog)> {
    cfg.validate()?;
    if normals.is_empty() {
        return Err(Error::InvalidInput("training needs normal samples".into()));
    }
    let mask = cfg.modality;
    let mut log = TrainLog::default();
    if mask.force {
        let store = match pretrained {
            Some(p) => p.clone(),
            None => {
                let data: Vec<Vec<f64>> = normals.iter().map(|s| s.force.clone()).collect();
                let (store, hist) = pretrain_force_autoencoder(&model.force_net, &data, cfg)?;
                log.pretrain_mse = hist;
                store
            }
        };
        model.force_net = Sequential::new(model.spec.force.clone(), ParamStore::from_layers(store.layers))?;
    }
    model.init_center(normals, mask).map_err(|e| diverged(e, 0, 0))?;
    model.zero_grads();
    log.initial_normal_distance = mean_normal_distance(&model, normals, mask)?;

    let mut pool: Vec<(&SampleFeatures, bool)> = normals.iter().map(|s| (s, false)).collect();
    pool.extend(anomalies.iter().map(|s| (s, true)));
    let mut rng = rng_from(derive_seed(cfg.seed, 12));
    for epoch in 0..cfg.epochs {
        pool.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for (bi, chunk) in pool.chunks(cfg.batch_size).enumerate() {
            let samples: Vec<&SampleFeatures> = chunk.iter().map(|c| c.0).collect();
            let flags: Vec<bool> = chunk.iter().map(|c| c.1).collect();
            let loss = model
                .loss_mixed(&samples, &flags, mask, cfg.eps_inverse)
                .map_err(|e| diverged(e, epoch, bi))?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, batch: bi, loss });
            }
            for net in [&mut model.image_net, &mut model.force_net, &mut model.fusion] {
                adam_step(&mut net.params, &cfg.adam);
            }
            total += loss;
            batches += 1;
        }
        log.epoch_loss.push(total / batches as f64);
    }
    let scores = model.score_all(normals, mask).map_err(|e| diverged(e, cfg.epochs, 0))?;
    log.final_normal_distance = scores.iter().sum::<f64>() / scores.len() as f64;
    model.threshold = Some(calibrate_threshold(&scores)?);
    Ok((model, log))
}

pub const MIN_CALIBRATION_SCORES: usize = 20;

/// Nearest-rank 95th percentile: `sorted[ceil(0.95 n) − 1]`.
pub fn calibrate_threshold(scores: &[f64]) -> Result<f64> {
    if scores.len() < MIN_CALIBRATION_SCORES {
        return Err(Error::InvalidInput(format!(
            "threshold calibration needs at least {MIN_CALIBRATION_SCORES} scores, got {}",
            scores.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidInput("non-finite calibration score".into()));
    }
    let mut s = scores.to_vec();
    s.sort_by(f64::total_cmp);
    // ceil(0.95 n) in integers: (95 n + 99) / 100
    let rank = (95 * s.len()).div_ceil(100);
    Ok(s[rank - 1])
}
