use rand::Rng;

use super::layer::{LayerKind, LayerSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub kind: LayerKind,
    pub weight_shape: Vec<usize>,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl LayerParams {
    pub fn zeros_like(&self) -> LayerParams {
        LayerParams {
            kind: self.kind,
            weight_shape: self.weight_shape.clone(),
            weights: vec![0.0; self.weights.len()],
            biases: vec![0.0; self.biases.len()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("Adam betas must lie in [0, 1)".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("Adam epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// Weights, gradient buffers and Adam moments of a sequential network.
///
/// `grads`, `first_moment` and `second_moment` always mirror `layers`
/// shape-for-shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    pub layers: Vec<LayerParams>,
    pub grads: Vec<LayerParams>,
    first_moment: Vec<LayerParams>,
    second_moment: Vec<LayerParams>,
    step: u64,
}

impl ParamStore {
    pub fn from_layers(layers: Vec<LayerParams>) -> Self {
        let grads: Vec<_> = layers.iter().map(LayerParams::zeros_like).collect();
        ParamStore {
            first_moment: grads.clone(),
            second_moment: grads.clone(),
            grads,
            layers,
            step: 0,
        }
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init<R: Rng + ?Sized>(specs: &[LayerSpec], rng: &mut R) -> Self {
        let layers = specs
            .iter()
            .map(|spec| {
                let shape = spec.weight_shape();
                let (fan_in, fan_out) = spec.fan_in_out();
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let n: usize = shape.iter().product();
                let weights = (0..n).map(|_| rng.random_range(-limit..limit)).collect();
                LayerParams {
                    kind: spec.kind(),
                    biases: vec![0.0; spec.bias_len()],
                    weight_shape: shape,
                    weights,
                }
            })
            .collect();
        ParamStore::from_layers(layers)
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn zero_grads(&mut self) {
        for g in &mut self.grads {
            g.weights.fill(0.0);
            g.biases.fill(0.0);
        }
    }

    /// Checks that the stored layer shapes match an architecture.
    pub fn check_matches(&self, specs: &[LayerSpec]) -> Result<()> {
        if specs.len() != self.layers.len() {
            return Err(Error::Shape {
                layer: self.layers.len().min(specs.len()),
                detail: format!(
                    "architecture has {} layers, parameters have {}",
                    specs.len(),
                    self.layers.len()
                ),
            });
        }
        for (i, (spec, layer)) in specs.iter().zip(&self.layers).enumerate() {
            if spec.kind() != layer.kind
                || spec.weight_shape() != layer.weight_shape
                || spec.bias_len() != layer.biases.len()
            {
                return Err(Error::Shape {
                    layer: i,
                    detail: format!(
                        "expected {:?} weights {:?}, found {:?} weights {:?}",
                        spec.kind(),
                        spec.weight_shape(),
                        layer.kind,
                        layer.weight_shape
                    ),
                });
            }
        }
        Ok(())
    }

    /// Flat view over every parameter, weights before biases, layer by layer.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn flat_grads(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.grads {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    /// Mutable access to parameter `index` in [`ParamStore::flat_params`] order.
    pub fn param_mut(&mut self, mut index: usize) -> &mut f64 {
        for l in &mut self.layers {
            if index < l.weights.len() {
                return &mut l.weights[index];
            }
            index -= l.weights.len();
            if index < l.biases.len() {
                return &mut l.biases[index];
            }
            index -= l.biases.len();
        }
        panic!("parameter index out of range");
    }
}

fn adam_update(
    params: &mut [f64],
    grads: &mut [f64],
    m: &mut [f64],
    v: &mut [f64],
    cfg: &AdamConfig,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        grads[i] = 0.0;
    }
}

/// One bias-corrected Adam update over every parameter; zeroes the gradients.
pub fn adam_step(store: &mut ParamStore, cfg: &AdamConfig) {
    store.step += 1;
    let t = store.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for (((layer, grad), m), v) in store
        .layers
        .iter_mut()
        .zip(store.grads.iter_mut())
        .zip(store.first_moment.iter_mut())
        .zip(store.second_moment.iter_mut())
    {
        adam_update(
            &mut layer.weights,
            &mut grad.weights,
            &mut m.weights,
            &mut v.weights,
            cfg,
            bc1,
            bc2,
        );
        adam_update(
            &mut layer.biases,
            &mut grad.biases,
            &mut m.biases,
            &mut v.biases,
            cfg,
            bc1,
            bc2,
        );
    }
}
