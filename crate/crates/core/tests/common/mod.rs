//! Independent reference implementations shared by the integration tests
//! and the acceptance suite.
#![allow(dead_code)]

use std::f64::consts::PI;

use mdsad_core::deepsad::{EncoderSpec, HypersphereModel, LossVariant, ModalityMask, SampleFeatures};
use mdsad_core::tensor::{Activation, LayerParams, LayerSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// O(n²) DFT of a zero-padded real signal, returning (re, im) per bin.
pub fn naive_dft(x: &[f64], n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &v) in x.iter().enumerate() {
                // reduce k·t mod n first so the angle stays accurate
                let a = -2.0 * PI * ((k * t) % n) as f64 / n as f64;
                re += v * a.cos();
                im += v * a.sin();
            }
            (re, im)
        })
        .collect()
}

/// Pairwise count: anomaly above normal is 1, tie is 1/2.
pub fn brute_auroc(normal: &[f64], anomaly: &[f64]) -> f64 {
    let mut wins = 0.0;
    for &a in anomaly {
        for &n in normal {
            if a > n {
                wins += 1.0;
            } else if a == n {
                wins += 0.5;
            }
        }
    }
    wins / (normal.len() * anomaly.len()) as f64
}

/// Arithmetic the reference forward pass can run in.
pub trait Num: Copy + std::ops::Add<Output = Self> + std::ops::Mul<Output = Self> {
    fn of(v: f64) -> Self;
    fn negative(self) -> bool;
}

impl Num for f64 {
    fn of(v: f64) -> Self {
        v
    }
    fn negative(self) -> bool {
        self < 0.0
    }
}

fn act<T: Num>(a: Activation, z: T, signs: &mut Option<&mut Vec<bool>>) -> T {
    if let (Activation::LeakyRelu, Some(v)) = (a, signs.as_mut()) {
        v.push(z.negative());
    }
    match a {
        Activation::LeakyRelu if z.negative() => T::of(0.01) * z,
        _ => z,
    }
}

/// Layer-by-layer evaluation of one item with explicit loops.
pub fn reference_forward(specs: &[LayerSpec], layers: &[LayerParams], input: &[f64]) -> Vec<f64> {
    reference_forward_signs(specs, layers, input, None)
}

/// [`reference_forward`] that also records the sign of every leaky-ReLU
/// pre-activation.
pub fn reference_forward_signs<T: Num>(
    specs: &[LayerSpec],
    layers: &[LayerParams],
    input: &[T],
    mut signs: Option<&mut Vec<bool>>,
) -> Vec<T> {
    let mut x = input.to_vec();
    for (spec, p) in specs.iter().zip(layers) {
        x = match *spec {
            LayerSpec::Dense {
                inputs,
                outputs,
                activation,
            } => (0..outputs)
                .map(|o| {
                    let mut z = T::of(p.biases[o]);
                    for i in 0..inputs {
                        z = z + T::of(p.weights[o * inputs + i]) * x[i];
                    }
                    act(activation, z, &mut signs)
                })
                .collect(),
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
                in_height,
                in_width,
                activation,
            } => {
                let oh = (in_height + 2 * padding - kernel) / stride + 1;
                let ow = (in_width + 2 * padding - kernel) / stride + 1;
                let mut out = vec![T::of(0.0); out_channels * oh * ow];
                for o in 0..out_channels {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let mut z = T::of(p.biases[o]);
                            for c in 0..in_channels {
                                for ky in 0..kernel {
                                    for kx in 0..kernel {
                                        let iy = (oy * stride + ky) as isize - padding as isize;
                                        let ix = (ox * stride + kx) as isize - padding as isize;
                                        if iy < 0 || ix < 0 || iy >= in_height as isize || ix >= in_width as isize {
                                            continue;
                                        }
                                        let w = p.weights[((o * in_channels + c) * kernel + ky) * kernel + kx];
                                        z = z + T::of(w) * x[(c * in_height + iy as usize) * in_width + ix as usize];
                                    }
                                }
                            }
                            out[(o * oh + oy) * ow + ox] = act(activation, z, &mut signs);
                        }
                    }
                }
                out
            }
        };
    }
    x
}

/// Reference embedding: both encoders, zero-masking, concatenation, head.
pub fn reference_embed(model: &HypersphereModel, f: &SampleFeatures, mask: ModalityMask) -> Vec<f64> {
    reference_embed_signs(model, f, mask, None)
}

fn reference_embed_signs<T: Num>(
    model: &HypersphereModel,
    f: &SampleFeatures,
    mask: ModalityMask,
    mut signs: Option<&mut Vec<bool>>,
) -> Vec<T> {
    let li = model.spec.image_embedding_len();
    let lf = model.spec.force_embedding_len();
    let lift = |v: &[f64]| v.iter().map(|&x| T::of(x)).collect::<Vec<T>>();
    let img = if mask.image {
        reference_forward_signs(
            &model.spec.image,
            &model.image_net.params.layers,
            &lift(&f.image),
            signs.as_deref_mut(),
        )
    } else {
        vec![T::of(0.0); li]
    };
    let frc = if mask.force {
        reference_forward_signs(
            &model.spec.force,
            &model.force_net.params.layers,
            &lift(&f.force),
            signs.as_deref_mut(),
        )
    } else {
        vec![T::of(0.0); lf]
    };
    let fused: Vec<T> = img.into_iter().chain(frc).collect();
    reference_forward_signs(&model.spec.fusion, &model.fusion.params.layers, &fused, signs)
}

/// Batch loss evaluated in double-double arithmetic, together with the
/// leaky-ReLU sign pattern of every sample.
fn reference_loss(
    model: &HypersphereModel,
    normals: &[SampleFeatures],
    anomalies: &[SampleFeatures],
    mask: ModalityMask,
    eps: f64,
) -> (Dd, Vec<bool>) {
    let mut signs = Vec::new();
    let mut sq = |f: &SampleFeatures| {
        let e: Vec<Dd> = reference_embed_signs(model, f, mask, Some(&mut signs));
        e.iter().zip(&model.center).fold(Dd::of(0.0), |acc, (&v, &c)| {
            let d = v + Dd::of(-c);
            acc + d * d
        })
    };
    let mut loss = Dd::of(0.0);
    if !normals.is_empty() {
        let s = normals.iter().fold(Dd::of(0.0), |acc, f| acc + sq(f));
        loss = loss + s.div_f64(normals.len() as f64);
    }
    if !anomalies.is_empty() && model.variant != LossVariant::Svdd {
        let s = anomalies.iter().fold(Dd::of(0.0), |acc, f| {
            let d2 = sq(f);
            let term = match model.variant {
                LossVariant::DeepSadInverse => Dd::of(1.0).div(d2 + Dd::of(eps)),
                _ => (Dd::of(-1.0) * d2).exp(),
            };
            acc + term
        });
        loss = loss + Dd::of(model.eta) * s.div_f64(anomalies.len() as f64);
    }
    (loss, signs)
}

/// Double-double number `hi + lo` with |lo| ≤ ulp(hi)/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    Dd { hi: s, lo: b - (s - a) }
}

impl std::ops::Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let r = quick_two_sum(s, e + t);
        quick_two_sum(r.hi, r.lo + f)
    }
}

impl std::ops::Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        quick_two_sum(p, e + (self.hi * o.lo + self.lo * o.hi))
    }
}

impl Num for Dd {
    fn of(v: f64) -> Self {
        Dd { hi: v, lo: 0.0 }
    }
    fn negative(self) -> bool {
        self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0)
    }
}

impl Dd {
    pub fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self + Dd::of(-q1) * o;
        let q2 = r.hi / o.hi;
        let r = r + Dd::of(-q2) * o;
        let q3 = r.hi / o.hi;
        let q = quick_two_sum(q1, q2);
        q + Dd::of(q3)
    }

    pub fn div_f64(self, d: f64) -> Dd {
        self.div(Dd::of(d))
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn exp(self) -> Dd {
        const LN2: Dd = Dd {
            hi: std::f64::consts::LN_2,
            lo: 2.319_046_813_846_299_6e-17,
        };
        const HALVINGS: i32 = 10;
        let k = (self.hi / LN2.hi).round();
        let r = self + Dd::of(-k) * LN2;
        let r = r * Dd::of(0.5f64.powi(HALVINGS));
        // Taylor series of exp(r) − 1, kept small so squaring loses nothing
        let mut term = r;
        let mut sum = r;
        for n in 2..=14 {
            term = (term * r).div_f64(n as f64);
            sum = sum + term;
        }
        for _ in 0..HALVINGS {
            // (1 + s)² − 1 = s (2 + s)
            sum = sum * (Dd::of(2.0) + sum);
        }
        (sum + Dd::of(1.0)) * Dd::of(2f64.powi(k as i32))
    }
}

pub fn kink_signature(model: &HypersphereModel, samples: &[&SampleFeatures], mask: ModalityMask) -> Vec<bool> {
    let mut v = Vec::new();
    for s in samples {
        let _: Vec<f64> = reference_embed_signs(model, s, mask, Some(&mut v));
    }
    v
}

/// Small random architecture with a conv image branch.
pub fn mini_spec(seed: u64) -> EncoderSpec {
    let mut r = rng(seed);
    let lrelu = Activation::LeakyRelu;
    let hw = [6, 8][r.random_range(0..2)];
    let c1 = r.random_range(1..=3);
    let conv = LayerSpec::Conv2d {
        in_channels: 1,
        out_channels: c1,
        kernel: 3,
        stride: r.random_range(1..=2),
        padding: 1,
        in_height: hw,
        in_width: hw,
        activation: lrelu,
    };
    let ie = r.random_range(2..=5);
    let fi = r.random_range(4..=12);
    let fh = r.random_range(3..=8);
    let fe = r.random_range(2..=5);
    let hh = r.random_range(3..=8);
    let p = r.random_range(2..=5);
    EncoderSpec {
        image: vec![conv, LayerSpec::dense(conv.output_len(), ie, lrelu)],
        force: vec![LayerSpec::dense(fi, fh, lrelu), LayerSpec::dense(fh, fe, lrelu)],
        fusion: vec![
            LayerSpec::dense(ie + fe, hh, lrelu),
            LayerSpec::dense(hh, p, Activation::Identity),
        ],
        image_shape: [1, hw, hw],
    }
}

pub fn random_features(spec: &EncoderSpec, n: usize, seed: u64) -> Vec<SampleFeatures> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| SampleFeatures {
            image: (0..spec.image_len()).map(|_| r.random::<f64>()).collect(),
            force: (0..spec.force_len()).map(|_| r.random::<f64>()).collect(),
        })
        .collect()
}

/// A random mini model with a random center near its embeddings.
pub fn mini_model(seed: u64, variant: LossVariant) -> HypersphereModel {
    let spec = mini_spec(seed);
    let mut m = HypersphereModel::init(spec, variant, 1.0, seed ^ 0xabcd).unwrap();
    let mut r = rng(seed ^ 0x1234);
    for c in &mut m.center {
        *c = r.random_range(-0.5..0.5);
    }
    m
}

pub struct FdOutcome {
    pub checked: usize,
    /// coordinates where some leaky-ReLU pre-activation changes sign inside
    /// [θ−h, θ+h], so central differences straddle a kink
    pub kinked: usize,
    pub worst_rel: f64,
    /// (analytic, numeric) at the worst coordinate
    pub worst_pair: (f64, f64),
}

/// Compares the analytic gradient of `loss_batch` with central differences
/// (h = 1e-5) of the double-double reference loss, over every parameter.
pub fn fd_check_model(
    model: &mut HypersphereModel,
    normals: &[SampleFeatures],
    anomalies: &[SampleFeatures],
    mask: ModalityMask,
) -> FdOutcome {
    const H: f64 = 1e-5;
    let eps = 1e-6;
    let nr: Vec<&SampleFeatures> = normals.iter().collect();
    let an: Vec<&SampleFeatures> = anomalies.iter().collect();
    model.zero_grads();
    model.loss_batch(&nr, &an, mask, eps).unwrap();
    let analytic = model.flat_grads();
    model.zero_grads();
    let mut out = FdOutcome {
        checked: 0,
        kinked: 0,
        worst_rel: 0.0,
        worst_pair: (0.0, 0.0),
    };
    for i in 0..analytic.len() {
        let orig = *model.param_mut(i);
        let (up, down) = (orig + H, orig - H);
        *model.param_mut(i) = up;
        let (fp, sp) = reference_loss(model, normals, anomalies, mask, eps);
        *model.param_mut(i) = down;
        let (fm, sm) = reference_loss(model, normals, anomalies, mask, eps);
        *model.param_mut(i) = orig;
        if sp != sm {
            out.kinked += 1;
            continue;
        }
        let numeric = (fp + Dd::of(-1.0) * fm).div_f64(up - down).to_f64();
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        if rel > out.worst_rel {
            out.worst_rel = rel;
            out.worst_pair = (a, numeric);
        }
        out.checked += 1;
    }
    out
}

/// A model whose embedding equals its `p`-dim force input: identity force
/// encoder, a zero-weight one-pixel image branch, and a head that passes
/// the force half through.
pub fn identity_model(p: usize, variant: LossVariant) -> HypersphereModel {
    let id = Activation::Identity;
    let spec = EncoderSpec {
        image: vec![LayerSpec::dense(1, 1, id)],
        force: vec![LayerSpec::dense(p, p, id)],
        fusion: vec![LayerSpec::dense(1 + p, p, id)],
        image_shape: [1, 1, 1],
    };
    let mut m = HypersphereModel::init(spec, variant, 1.0, 0).unwrap();
    m.image_net.params.layers[0].weights = vec![0.0];
    let eye = |rows: usize, cols: usize, shift: usize| {
        let mut w = vec![0.0; rows * cols];
        for r in 0..rows {
            w[r * cols + r + shift] = 1.0;
        }
        w
    };
    m.force_net.params.layers[0].weights = eye(p, p, 0);
    m.fusion.params.layers[0].weights = eye(p, 1 + p, 1);
    m.center = vec![0.0; p];
    m
}

pub fn force_point(v: &[f64]) -> SampleFeatures {
    SampleFeatures {
        image: vec![0.5],
        force: v.to_vec(),
    }
}
