use super::gemm::{gemm, MatRef};
use super::layer::{Activation, LayerSpec};
use super::params::ParamStore;
use super::Tensor;
use crate::error::{Error, Result};
use rand::Rng;

/// Activations recorded by a training forward pass: the input of every layer
/// plus the final output. Leaky-ReLU derivatives are recovered from the sign
/// of each layer's output, which matches the sign of its pre-activation.
#[derive(Debug, Clone)]
struct ForwardCache {
    batch: usize,
    inputs: Vec<Vec<f64>>,
    output: Vec<f64>,
}

/// A fixed sequential architecture together with its parameters.
///
/// `forward` records the activations the next `backward` call consumes;
/// `infer` evaluates without recording and only needs `&self`.
#[derive(Debug, Clone)]
pub struct Sequential {
    specs: Vec<LayerSpec>,
    pub params: ParamStore,
    cache: Option<ForwardCache>,
    // recycled activation buffers; large fresh allocations page-fault on
    // every batch otherwise
    pool: Vec<Vec<f64>>,
}

const POOL_LIMIT: usize = 48;

fn take_buf(pool: &mut Vec<Vec<f64>>, len: usize) -> Vec<f64> {
    let best = pool
        .iter()
        .enumerate()
        .filter(|(_, v)| v.capacity() >= len)
        .min_by_key(|(_, v)| v.capacity())
        .map(|(i, _)| i);
    let mut v = match best {
        Some(i) => pool.swap_remove(i),
        None => Vec::with_capacity(len),
    };
    v.clear();
    v.resize(len, 0.0);
    v
}

fn give_buf(pool: &mut Vec<Vec<f64>>, v: Vec<f64>) {
    if pool.len() < POOL_LIMIT && v.capacity() > 0 {
        pool.push(v);
    }
}

fn recycle(pool: &mut Vec<Vec<f64>>, cache: ForwardCache) {
    for v in cache.inputs {
        give_buf(pool, v);
    }
    give_buf(pool, cache.output);
}

impl Sequential {
    pub fn new(specs: Vec<LayerSpec>, params: ParamStore) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::Shape {
                layer: 0,
                detail: "network needs at least one layer".into(),
            });
        }
        for (i, s) in specs.iter().enumerate() {
            s.validate(i)?;
        }
        for (i, w) in specs.windows(2).enumerate() {
            if w[0].output_len() != w[1].input_len() {
                return Err(Error::Shape {
                    layer: i + 1,
                    detail: format!(
                        "layer expects {} inputs but previous layer produces {}",
                        w[1].input_len(),
                        w[0].output_len()
                    ),
                });
            }
        }
        params.check_matches(&specs)?;
        Ok(Sequential {
            specs,
            params,
            cache: None,
            pool: Vec::new(),
        })
    }

    pub fn init<R: Rng + ?Sized>(specs: Vec<LayerSpec>, rng: &mut R) -> Result<Self> {
        let params = ParamStore::init(&specs, rng);
        Sequential::new(specs, params)
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn input_len(&self) -> usize {
        self.specs[0].input_len()
    }

    pub fn output_len(&self) -> usize {
        self.specs[self.specs.len() - 1].output_len()
    }

    pub fn into_params(self) -> ParamStore {
        self.params
    }

    fn check_input(&self, input: &Tensor) -> Result<usize> {
        if input.shape().len() < 2 {
            return Err(Error::Shape {
                layer: 0,
                detail: format!("input needs a batch dimension, got shape {:?}", input.shape()),
            });
        }
        if input.item_len() != self.input_len() {
            return Err(Error::Shape {
                layer: 0,
                detail: format!(
                    "layer expects {} inputs per item, got shape {:?}",
                    self.input_len(),
                    input.shape()
                ),
            });
        }
        if !input.all_finite() {
            return Err(Error::InvalidInput("non-finite network input".into()));
        }
        Ok(input.batch())
    }

    /// Evaluates the network on a `[batch, ...]` input and records the
    /// activations for [`Sequential::backward`].
    pub fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let mut pool = std::mem::take(&mut self.pool);
        if let Some(stale) = self.cache.take() {
            recycle(&mut pool, stale);
        }
        let result = self.run(input, true, &mut pool);
        self.pool = pool;
        let (out, cache) = result?;
        self.cache = cache;
        Ok(out)
    }

    /// Evaluation without gradient bookkeeping.
    pub fn infer(&self, input: &Tensor) -> Result<Tensor> {
        Ok(self.run(input, false, &mut Vec::new())?.0)
    }

    fn run(&self, input: &Tensor, record: bool, pool: &mut Vec<Vec<f64>>) -> Result<(Tensor, Option<ForwardCache>)> {
        let batch = self.check_input(input)?;
        let mut act = take_buf(pool, input.len());
        act.copy_from_slice(input.data());
        let mut inputs = Vec::with_capacity(if record { self.specs.len() } else { 0 });
        let mut scratch = Vec::new();
        for (i, (spec, layer)) in self.specs.iter().zip(&self.params.layers).enumerate() {
            let mut out = take_buf(pool, batch * spec.output_len());
            match *spec {
                LayerSpec::Dense {
                    inputs: n_in, outputs, ..
                } => {
                    for row in out.chunks_mut(outputs) {
                        row.copy_from_slice(&layer.biases);
                    }
                    gemm(
                        batch,
                        n_in,
                        outputs,
                        MatRef::rows(&act, n_in),
                        MatRef::transposed(&layer.weights, n_in),
                        1.0,
                        &mut out,
                    );
                }
                LayerSpec::Conv2d { out_channels, .. } => {
                    let (oh, ow) = spec.output_hw().expect("conv output");
                    let positions = oh * ow;
                    let k_len = spec.fan_in_out().0;
                    let in_len = spec.input_len();
                    let item_out = out_channels * positions;
                    scratch.resize(k_len * positions, 0.0);
                    for b in 0..batch {
                        im2col(spec, &act[b * in_len..(b + 1) * in_len], &mut scratch);
                        let zb = &mut out[b * item_out..(b + 1) * item_out];
                        for (o, row) in zb.chunks_mut(positions).enumerate() {
                            row.fill(layer.biases[o]);
                        }
                        gemm(
                            out_channels,
                            k_len,
                            positions,
                            MatRef::rows(&layer.weights, k_len),
                            MatRef::rows(&scratch, positions),
                            1.0,
                            zb,
                        );
                    }
                }
            }
            let activation = spec.activation();
            let mut finite = true;
            for v in out.iter_mut() {
                *v = activation.apply(*v);
                finite &= v.is_finite();
            }
            if !finite {
                return Err(Error::NonFinite { layer: i });
            }
            let layer_input = std::mem::replace(&mut act, out);
            if record {
                inputs.push(layer_input);
            } else {
                give_buf(pool, layer_input);
            }
        }
        let out_len = self.output_len();
        if record {
            let out = Tensor::new(act.clone(), vec![batch, out_len])?;
            Ok((
                out,
                Some(ForwardCache {
                    batch,
                    inputs,
                    output: act,
                }),
            ))
        } else {
            Ok((Tensor::new(act, vec![batch, out_len])?, None))
        }
    }

    /// Accumulates `d loss / d param` into `params.grads` given the gradient
    /// of the loss with respect to the last forward output, and returns the
    /// gradient with respect to the network input.
    pub fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let batch = self.cache.as_ref().map(|c| c.batch).ok_or(Error::NoForward)?;
        let g = self.backprop(grad_output, true)?.expect("input gradient requested");
        Tensor::new(g, vec![batch, self.input_len()])
    }

    /// Like [`Sequential::backward`] but skips the input gradient.
    pub fn backward_params(&mut self, grad_output: &Tensor) -> Result<()> {
        self.backprop(grad_output, false).map(|_| ())
    }

    fn backprop(&mut self, grad_output: &Tensor, want_input: bool) -> Result<Option<Vec<f64>>> {
        let cache = self.cache.take().ok_or(Error::NoForward)?;
        let mut pool = std::mem::take(&mut self.pool);
        let result = self.backprop_cached(&cache, grad_output, want_input, &mut pool);
        recycle(&mut pool, cache);
        self.pool = pool;
        result
    }

    fn backprop_cached(
        &mut self,
        cache: &ForwardCache,
        grad_output: &Tensor,
        want_input: bool,
        pool: &mut Vec<Vec<f64>>,
    ) -> Result<Option<Vec<f64>>> {
        let batch = cache.batch;
        let last = self.specs.len() - 1;
        if grad_output.len() != batch * self.output_len() {
            return Err(Error::Shape {
                layer: last,
                detail: format!(
                    "loss gradient has {} values, expected {}",
                    grad_output.len(),
                    batch * self.output_len()
                ),
            });
        }
        let mut grad = take_buf(pool, grad_output.len());
        grad.copy_from_slice(grad_output.data());
        let mut scratch = Vec::new();
        let mut dcols = Vec::new();
        for i in (0..self.specs.len()).rev() {
            let spec = self.specs[i];
            let weights = &self.params.layers[i].weights;
            let g_store = &mut self.params.grads[i];
            let input = &cache.inputs[i];
            let output = if i == last { &cache.output } else { &cache.inputs[i + 1] };
            scale_by_derivative(&mut grad, output, spec.activation());
            let need_input = i > 0 || want_input;
            let mut gin = if need_input {
                take_buf(pool, batch * spec.input_len())
            } else {
                Vec::new()
            };
            match spec {
                LayerSpec::Dense {
                    inputs: n_in, outputs, ..
                } => {
                    // dW[out, in] += dZ^T X
                    gemm(
                        outputs,
                        batch,
                        n_in,
                        MatRef::transposed(&grad, outputs),
                        MatRef::rows(input, n_in),
                        1.0,
                        &mut g_store.weights,
                    );
                    for row in grad.chunks(outputs) {
                        for (gb, &d) in g_store.biases.iter_mut().zip(row) {
                            *gb += d;
                        }
                    }
                    if need_input {
                        gemm(
                            batch,
                            outputs,
                            n_in,
                            MatRef::rows(&grad, outputs),
                            MatRef::rows(weights, n_in),
                            0.0,
                            &mut gin,
                        );
                    }
                }
                LayerSpec::Conv2d { out_channels, .. } => {
                    let (oh, ow) = spec.output_hw().expect("conv output");
                    let positions = oh * ow;
                    let k_len = spec.fan_in_out().0;
                    let in_len = spec.input_len();
                    let item_out = out_channels * positions;
                    scratch.resize(k_len * positions, 0.0);
                    if need_input {
                        dcols.resize(k_len * positions, 0.0);
                    }
                    for b in 0..batch {
                        let gz = &grad[b * item_out..(b + 1) * item_out];
                        im2col(&spec, &input[b * in_len..(b + 1) * in_len], &mut scratch);
                        // dW[out, K] += dZ_b cols_b^T
                        gemm(
                            out_channels,
                            positions,
                            k_len,
                            MatRef::rows(gz, positions),
                            MatRef::transposed(&scratch, positions),
                            1.0,
                            &mut g_store.weights,
                        );
                        for (o, row) in gz.chunks(positions).enumerate() {
                            g_store.biases[o] += row.iter().sum::<f64>();
                        }
                        if need_input {
                            gemm(
                                k_len,
                                out_channels,
                                positions,
                                MatRef::transposed(weights, k_len),
                                MatRef::rows(gz, positions),
                                0.0,
                                &mut dcols,
                            );
                            col2im(&spec, &dcols, &mut gin[b * in_len..(b + 1) * in_len]);
                        }
                    }
                }
            }
            if need_input {
                give_buf(pool, std::mem::replace(&mut grad, gin));
            }
        }
        if want_input {
            Ok(Some(grad))
        } else {
            give_buf(pool, grad);
            Ok(None)
        }
    }
}

fn scale_by_derivative(grad: &mut [f64], output: &[f64], activation: Activation) {
    if activation == Activation::Identity {
        return;
    }
    for (g, &y) in grad.iter_mut().zip(output) {
        *g *= activation.derivative(y);
    }
}

fn conv_geometry(spec: &LayerSpec) -> (usize, usize, usize, usize, usize, usize) {
    match *spec {
        LayerSpec::Conv2d {
            in_channels,
            kernel,
            stride,
            padding,
            in_height,
            in_width,
            ..
        } => (in_channels, kernel, stride, padding, in_height, in_width),
        LayerSpec::Dense { .. } => unreachable!("dense layer has no conv geometry"),
    }
}

fn im2col(spec: &LayerSpec, input: &[f64], cols: &mut [f64]) {
    let (channels, k, stride, pad, h, w) = conv_geometry(spec);
    let (oh, ow) = spec.output_hw().expect("conv output");
    let positions = oh * ow;
    for c in 0..channels {
        let plane = &input[c * h * w..(c + 1) * h * w];
        for ky in 0..k {
            for kx in 0..k {
                let row = &mut cols[((c * k + ky) * k + kx) * positions..][..positions];
                for oy in 0..oh {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    let dst = &mut row[oy * ow..(oy + 1) * ow];
                    if iy < 0 || iy >= h as isize {
                        dst.fill(0.0);
                        continue;
                    }
                    let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, d) in dst.iter_mut().enumerate() {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        *d = if ix < 0 || ix >= w as isize {
                            0.0
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

fn col2im(spec: &LayerSpec, cols: &[f64], grad_input: &mut [f64]) {
    let (channels, k, stride, pad, h, w) = conv_geometry(spec);
    let (oh, ow) = spec.output_hw().expect("conv output");
    let positions = oh * ow;
    for c in 0..channels {
        for ky in 0..k {
            for kx in 0..k {
                let row = &cols[((c * k + ky) * k + kx) * positions..][..positions];
                for oy in 0..oh {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let base = c * h * w + iy as usize * w;
                    for ox in 0..ow {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix >= 0 && ix < w as isize {
                            grad_input[base + ix as usize] += row[oy * ow + ox];
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use crate::tensor::{LayerKind, LayerParams};
    use rand::Rng;

    fn dense_net(weights: Vec<f64>, biases: Vec<f64>, n_in: usize, n_out: usize) -> Sequential {
        let params = ParamStore::from_layers(vec![LayerParams {
            kind: LayerKind::Dense,
            weight_shape: vec![n_out, n_in],
            weights,
            biases,
        }]);
        Sequential::new(vec![LayerSpec::dense(n_in, n_out, Activation::Identity)], params).unwrap()
    }

    #[test]
    fn identity_dense_layer() {
        let mut net = dense_net(vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0], 2, 2);
        let x = Tensor::new(vec![1.0, 2.0], vec![1, 2]).unwrap();
        assert_eq!(net.forward(&x).unwrap().data(), &[1.0, 2.0]);
    }

    #[test]
    fn hand_multiplied_dense_layer() {
        let net = dense_net(vec![2.0, 0.0, 0.0, 3.0], vec![1.0, 1.0], 2, 2);
        let x = Tensor::new(vec![1.0, 1.0], vec![1, 2]).unwrap();
        assert_eq!(net.infer(&x).unwrap().data(), &[3.0, 4.0]);
    }

    #[test]
    fn linear_scalar_gradient() {
        let mut net = dense_net(vec![0.5], vec![0.0], 1, 1);
        let x = Tensor::new(vec![3.0], vec![1, 1]).unwrap();
        net.forward(&x).unwrap();
        let gin = net.backward(&Tensor::new(vec![1.0], vec![1, 1]).unwrap()).unwrap();
        assert_eq!(net.params.grads[0].weights[0], 3.0);
        assert_eq!(net.params.grads[0].biases[0], 1.0);
        assert_eq!(gin.data(), &[0.5]);
    }

    #[test]
    fn zero_loss_gradient_gives_zero_grads() {
        let specs = vec![
            LayerSpec::dense(4, 5, Activation::LeakyRelu),
            LayerSpec::dense(5, 2, Activation::Identity),
        ];
        let mut net = Sequential::init(specs, &mut rng_from(3)).unwrap();
        let x = Tensor::new(vec![0.3, -0.1, 0.7, 1.2], vec![1, 4]).unwrap();
        net.forward(&x).unwrap();
        net.backward(&Tensor::zeros(vec![1, 2])).unwrap();
        assert!(net.params.flat_grads().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn backward_requires_forward() {
        let mut net = dense_net(vec![1.0], vec![0.0], 1, 1);
        let g = Tensor::new(vec![1.0], vec![1, 1]).unwrap();
        assert!(matches!(net.backward(&g), Err(Error::NoForward)));
        net.forward(&Tensor::new(vec![1.0], vec![1, 1]).unwrap()).unwrap();
        net.backward(&g).unwrap();
        // the cache is consumed by backward
        assert!(matches!(net.backward(&g), Err(Error::NoForward)));
    }

    #[test]
    fn shape_mismatch_names_layer() {
        let specs = vec![
            LayerSpec::dense(3, 4, Activation::LeakyRelu),
            LayerSpec::dense(5, 2, Activation::Identity),
        ];
        let params = ParamStore::init(&specs, &mut rng_from(0));
        let err = Sequential::new(specs, params).unwrap_err();
        assert!(err.to_string().contains("layer 1"), "{err}");

        let net = dense_net(vec![1.0, 1.0], vec![0.0], 2, 1);
        let err = net.infer(&Tensor::new(vec![1.0; 3], vec![1, 3]).unwrap()).unwrap_err();
        assert!(err.to_string().contains("layer 0"), "{err}");
    }

    /// Naive direct convolution used as an independent reference.
    fn reference_conv(spec: &LayerSpec, p: &LayerParams, x: &[f64]) -> Vec<f64> {
        let LayerSpec::Conv2d {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            in_height,
            in_width,
            activation,
        } = *spec
        else {
            unreachable!()
        };
        let (oh, ow) = spec.output_hw().unwrap();
        let mut out = vec![0.0; out_channels * oh * ow];
        for o in 0..out_channels {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = p.biases[o];
                    for c in 0..in_channels {
                        for ky in 0..kernel {
                            for kx in 0..kernel {
                                let iy = (oy * stride + ky) as isize - padding as isize;
                                let ix = (ox * stride + kx) as isize - padding as isize;
                                if iy < 0 || ix < 0 || iy >= in_height as isize || ix >= in_width as isize {
                                    continue;
                                }
                                let w = p.weights[((o * in_channels + c) * kernel + ky) * kernel + kx];
                                acc += w * x[(c * in_height + iy as usize) * in_width + ix as usize];
                            }
                        }
                    }
                    out[(o * oh + oy) * ow + ox] = activation.apply(acc);
                }
            }
        }
        out
    }

    fn reference_dense(p: &LayerParams, act: Activation, x: &[f64]) -> Vec<f64> {
        let (n_out, n_in) = (p.weight_shape[0], p.weight_shape[1]);
        (0..n_out)
            .map(|o| {
                let z: f64 = p.biases[o] + (0..n_in).map(|i| p.weights[o * n_in + i] * x[i]).sum::<f64>();
                act.apply(z)
            })
            .collect()
    }

    fn conv_stack() -> Vec<LayerSpec> {
        vec![
            LayerSpec::Conv2d {
                in_channels: 1,
                out_channels: 3,
                kernel: 3,
                stride: 2,
                padding: 1,
                in_height: 8,
                in_width: 8,
                activation: Activation::LeakyRelu,
            },
            LayerSpec::Conv2d {
                in_channels: 3,
                out_channels: 2,
                kernel: 3,
                stride: 1,
                padding: 1,
                in_height: 4,
                in_width: 4,
                activation: Activation::LeakyRelu,
            },
            LayerSpec::dense(32, 3, Activation::Identity),
        ]
    }

    #[test]
    fn three_layer_forward_matches_layerwise_reference() {
        let mut rng = rng_from(11);
        let specs = conv_stack();
        let mut net = Sequential::init(specs.clone(), &mut rng).unwrap();
        for l in &mut net.params.layers {
            for b in &mut l.biases {
                *b = rng.random_range(-0.3..0.3);
            }
        }
        let batch = 3;
        let x: Vec<f64> = (0..batch * 64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let out = net
            .infer(&Tensor::new(x.clone(), vec![batch, 1, 8, 8]).unwrap())
            .unwrap();
        for b in 0..batch {
            let mut a = x[b * 64..(b + 1) * 64].to_vec();
            a = reference_conv(&specs[0], &net.params.layers[0], &a);
            a = reference_conv(&specs[1], &net.params.layers[1], &a);
            a = reference_dense(&net.params.layers[2], Activation::Identity, &a);
            for (got, want) in out.row(b).iter().zip(&a) {
                assert!((got - want).abs() < 1e-12, "{got} vs {want}");
            }
        }
    }

    /// Central finite differences of `0.5 * sum(out * weights)` for some
    /// fixed projection `weights`.
    fn finite_difference_check(mut net: Sequential, x: Tensor, seed: u64) {
        let mut rng = rng_from(seed);
        let out_len = x.batch() * net.output_len();
        let proj: Vec<f64> = (0..out_len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let loss = |n: &Sequential| -> f64 {
            let y = n.infer(&x).unwrap();
            y.data().iter().zip(&proj).map(|(a, b)| a * b).sum::<f64>()
        };
        net.forward(&x).unwrap();
        net.backward(&Tensor::new(proj.clone(), vec![x.batch(), net.output_len()]).unwrap())
            .unwrap();
        let analytic = net.params.flat_grads();
        let h = 1e-5;
        for i in 0..analytic.len() {
            let orig = *net.params.param_mut(i);
            *net.params.param_mut(i) = orig + h;
            let up = loss(&net);
            *net.params.param_mut(i) = orig - h;
            let down = loss(&net);
            *net.params.param_mut(i) = orig;
            let numeric = (up - down) / (2.0 * h);
            let denom = analytic[i].abs().max(numeric.abs()).max(1e-8);
            let rel = (analytic[i] - numeric).abs() / denom;
            assert!(rel < 1e-4, "param {i}: analytic {} numeric {numeric}", analytic[i]);
        }
    }

    #[test]
    fn conv_gradients_match_finite_differences() {
        let mut rng = rng_from(5);
        let net = Sequential::init(conv_stack(), &mut rng).unwrap();
        let x: Vec<f64> = (0..2 * 64).map(|_| rng.random_range(-1.0..1.0)).collect();
        finite_difference_check(net, Tensor::new(x, vec![2, 1, 8, 8]).unwrap(), 6);
    }

    #[test]
    fn dense_gradients_match_finite_differences() {
        let mut rng = rng_from(8);
        let specs = vec![
            LayerSpec::dense(6, 7, Activation::LeakyRelu),
            LayerSpec::dense(7, 3, Activation::Identity),
        ];
        let net = Sequential::init(specs, &mut rng).unwrap();
        let x: Vec<f64> = (0..4 * 6).map(|_| rng.random_range(-1.0..1.0)).collect();
        finite_difference_check(net, Tensor::new(x, vec![4, 6]).unwrap(), 9);
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut rng = rng_from(21);
        let mut net = Sequential::init(conv_stack(), &mut rng).unwrap();
        let x: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let t = Tensor::new(x.clone(), vec![1, 1, 8, 8]).unwrap();
        net.forward(&t).unwrap();
        let gin = net.backward(&Tensor::new(vec![1.0; 3], vec![1, 3]).unwrap()).unwrap();
        let h = 1e-6;
        for i in [0, 9, 27, 63] {
            let mut xp = x.clone();
            xp[i] += h;
            let mut xm = x.clone();
            xm[i] -= h;
            let f = |v: Vec<f64>| -> f64 {
                net.infer(&Tensor::new(v, vec![1, 1, 8, 8]).unwrap())
                    .unwrap()
                    .data()
                    .iter()
                    .sum()
            };
            let numeric = (f(xp) - f(xm)) / (2.0 * h);
            assert!((gin.data()[i] - numeric).abs() < 1e-6);
        }
    }
}
