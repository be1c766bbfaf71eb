//! Pseudo-anomaly generation: arc cut-paste for scenes, anomaly-dominant
//! mixup and nearest-normal-neighbour mixup for force signals, plus the
//! pixel-space mixup variants used as comparators.

use rand::Rng as _;
use rand_distr::{Beta, Distribution};

use crate::error::{Error, Result};
use crate::features::fft_magnitude;
use crate::force::{uniform, ForceSignal};
use crate::label::{Label, Provenance};
use crate::rng::{derive_seed, rng_from, Rng};
use crate::scene::{ArcPatch, Rect, SceneImage};

/// Half-width of the square window of paste centers around the contact point.
pub const PASTE_JITTER: usize = 4;
pub const PASTE_SCALE: [f64; 2] = [0.5, 1.5];
pub const DEFAULT_NNG_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixupConfig {
    pub alpha: f64,
    pub lambda_floor: f64,
}

impl Default for MixupConfig {
    fn default() -> Self {
        MixupConfig {
            alpha: 1.0,
            lambda_floor: 0.5,
        }
    }
}

impl MixupConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::Config(format!(
                "mixup alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(0.0..1.0).contains(&self.lambda_floor) {
            return Err(Error::Config(format!(
                "lambda_floor must lie in [0, 1), got {}",
                self.lambda_floor
            )));
        }
        Ok(())
    }

    /// Draws λ ~ Beta(α, α) and folds it onto the anomaly-dominant side.
    pub fn draw_lambda(&self, rng: &mut Rng) -> Result<f64> {
        self.validate()?;
        let beta = Beta::new(self.alpha, self.alpha).map_err(|e| Error::Config(format!("mixup alpha: {e}")))?;
        let l: f64 = beta.sample(rng);
        Ok(l.max(1.0 - l).max(self.lambda_floor))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PastePlacement {
    pub center: (usize, usize),
    pub scale: f64,
    pub rotation_quarter_turns: u8,
}

fn rotate(patch: &ArcPatch, quarter_turns: u8) -> ArcPatch {
    let mut p = patch.clone();
    for _ in 0..quarter_turns % 4 {
        // 90° clockwise: (x, y) -> (h-1-y, x)
        let (w, h) = (p.width, p.height);
        let mut pixels = vec![0.0; w * h];
        let mut mask = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let (nx, ny) = (h - 1 - y, x);
                pixels[ny * h + nx] = p.pixels[y * w + x];
                mask[ny * h + nx] = p.mask[y * w + x];
            }
        }
        p = ArcPatch {
            width: h,
            height: w,
            pixels,
            mask,
        };
    }
    p
}

fn rescale(patch: &ArcPatch, scale: f64) -> ArcPatch {
    let nw = ((patch.width as f64 * scale).round() as usize).max(1);
    let nh = ((patch.height as f64 * scale).round() as usize).max(1);
    let src = |i: usize, n: usize, m: usize| (((i as f64 + 0.5) * m as f64 / n as f64) as usize).min(m - 1);
    let mut pixels = Vec::with_capacity(nw * nh);
    let mut mask = Vec::with_capacity(nw * nh);
    for y in 0..nh {
        let sy = src(y, nh, patch.height);
        for x in 0..nw {
            let sx = src(x, nw, patch.width);
            pixels.push(patch.pixels[sy * patch.width + sx]);
            mask.push(patch.mask[sy * patch.width + sx]);
        }
    }
    ArcPatch {
        width: nw,
        height: nh,
        pixels,
        mask,
    }
}

fn bbox(center: (usize, usize), w: usize, h: usize, img: &SceneImage) -> Option<Rect> {
    let (cx, cy) = center;
    let (x, y) = (cx.checked_sub(w / 2)?, cy.checked_sub(h / 2)?);
    (x + w <= img.width && y + h <= img.height).then_some(Rect { x, y, w, h })
}

/// Composites `patch` onto `normal` with an explicit placement.
pub fn paste_with(
    normal: &SceneImage,
    patch: &ArcPatch,
    placement: PastePlacement,
) -> Result<(SceneImage, PastePlacement)> {
    if normal.label != Label::Normal {
        return Err(Error::InvalidInput("cut-paste needs a normal base image".into()));
    }
    if patch.pixels.len() != patch.width * patch.height || patch.mask.len() != patch.pixels.len() {
        return Err(Error::InvalidInput("arc patch buffers do not match its size".into()));
    }
    if patch.is_blank() {
        return Err(Error::InvalidInput("arc patch has an empty mask".into()));
    }
    let rotated = rotate(patch, placement.rotation_quarter_turns);
    // Near the border, shrink until the patch fits around the drawn center.
    let mut used = placement;
    let mut fitted = None;
    for scale in [placement.scale, 1.0, 0.75, 0.5] {
        let p = if scale == 1.0 {
            rotated.clone()
        } else {
            rescale(&rotated, scale)
        };
        if let Some(r) = bbox(used.center, p.width, p.height, normal) {
            used.scale = scale;
            fitted = Some((p, r));
            break;
        }
    }
    let (p, r) = fitted.ok_or_else(|| {
        Error::InvalidInput(format!(
            "a {}×{} patch does not fit around {:?}",
            rotated.width, rotated.height, used.center
        ))
    })?;
    let mut out = normal.clone();
    for py in 0..p.height {
        for px in 0..p.width {
            let a = p.mask[py * p.width + px] * p.pixels[py * p.width + px];
            let idx = (r.y + py) * out.width + r.x + px;
            out.pixels[idx] = 1.0 - (1.0 - out.pixels[idx]) * (1.0 - a);
        }
    }
    out.label = Label::Abnormal;
    out.arc_region = Some(r);
    out.provenance = Provenance::CutPaste;
    Ok((out, used))
}

pub fn draw_placement(normal: &SceneImage, rng: &mut Rng) -> PastePlacement {
    let j = PASTE_JITTER as i64;
    let (cx, cy) = normal.contact_point;
    let shift = |c: usize, n: usize, d: i64| (c as i64 + d).clamp(0, n as i64 - 1) as usize;
    let dx = rng.random_range(-j..=j);
    let dy = rng.random_range(-j..=j);
    PastePlacement {
        center: (shift(cx, normal.width, dx), shift(cy, normal.height, dy)),
        scale: uniform(rng, PASTE_SCALE),
        rotation_quarter_turns: rng.random_range(0..4u8),
    }
}

/// Pastes an arc patch near the contact point of a normal scene.
pub fn cut_paste(normal: &SceneImage, patch: &ArcPatch, seed: u64) -> Result<SceneImage> {
    let placement = draw_placement(normal, &mut rng_from(seed));
    Ok(paste_with(normal, patch, placement)?.0)
}

fn check_pair(abnormal: &ForceSignal, normal: &ForceSignal) -> Result<()> {
    if abnormal.values.len() != normal.values.len() {
        return Err(Error::InvalidInput(format!(
            "mixup parents differ in length: {} vs {}",
            abnormal.values.len(),
            normal.values.len()
        )));
    }
    if abnormal.label != Label::Abnormal || normal.label != Label::Normal {
        return Err(Error::InvalidInput(
            "mixup needs one abnormal and one normal parent".into(),
        ));
    }
    Ok(())
}

/// `λ·abnormal + (1−λ)·normal`, labeled abnormal.
pub fn mix_force(abnormal: &ForceSignal, normal: &ForceSignal, lambda: f64, seed: u64) -> Result<ForceSignal> {
    check_pair(abnormal, normal)?;
    let values = abnormal
        .values
        .iter()
        .zip(&normal.values)
        .map(|(a, n)| lambda * a + (1.0 - lambda) * n)
        .collect();
    Ok(ForceSignal {
        values,
        label: Label::Abnormal,
        events: abnormal.events.clone(),
        seed,
        provenance: Provenance::Mixup,
    })
}

pub fn mixup_force(abnormal: &ForceSignal, normal: &ForceSignal, cfg: &MixupConfig, seed: u64) -> Result<ForceSignal> {
    check_pair(abnormal, normal)?;
    let lambda = cfg.draw_lambda(&mut rng_from(seed))?;
    mix_force(abnormal, normal, lambda, seed)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices of the k nearest rows, ties broken by index.
fn nearest(query: &[f64], rows: &[Vec<f64>], k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = rows.iter().enumerate().map(|(i, r)| (sq_dist(query, r), i)).collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.into_iter().take(k.clamp(1, rows.len())).map(|(_, i)| i).collect()
}

/// Normal force pool with cached spectra for neighbour search.
#[derive(Debug, Clone)]
pub struct NngPool<'a> {
    signals: &'a [ForceSignal],
    features: Vec<Vec<f64>>,
}

impl<'a> NngPool<'a> {
    pub fn new(signals: &'a [ForceSignal]) -> Result<Self> {
        if signals.is_empty() {
            return Err(Error::InvalidInput("NNG-Mix needs a nonempty normal pool".into()));
        }
        let features = signals
            .iter()
            .map(|s| fft_magnitude(&s.values).map(|f| f.bins))
            .collect::<Result<_>>()?;
        Ok(NngPool { signals, features })
    }

    /// Pool indices of the `k` nearest normals in spectrum space.
    pub fn neighbours(&self, abnormal: &ForceSignal, k: usize) -> Result<Vec<usize>> {
        let q = fft_magnitude(&abnormal.values)?.bins;
        Ok(nearest(&q, &self.features, k))
    }

    pub fn mix(&self, abnormal: &ForceSignal, k: usize, cfg: &MixupConfig, seed: u64) -> Result<ForceSignal> {
        if k == 0 {
            return Err(Error::InvalidInput("NNG-Mix needs k >= 1".into()));
        }
        let near = self.neighbours(abnormal, k)?;
        let pick = near[rng_from(derive_seed(seed, 1)).random_range(0..near.len())];
        let mut out = mixup_force(abnormal, &self.signals[pick], cfg, seed)?;
        out.provenance = Provenance::NngMix;
        Ok(out)
    }
}

pub fn nng_mix_force(
    abnormal: &ForceSignal,
    normal_pool: &[ForceSignal],
    k: usize,
    cfg: &MixupConfig,
    seed: u64,
) -> Result<ForceSignal> {
    NngPool::new(normal_pool)?.mix(abnormal, k, cfg, seed)
}

fn check_images(abnormal: &SceneImage, normal: &SceneImage) -> Result<()> {
    if abnormal.pixels.len() != normal.pixels.len() || abnormal.width != normal.width {
        return Err(Error::InvalidInput("mixup images differ in size".into()));
    }
    if abnormal.label != Label::Abnormal || normal.label != Label::Normal {
        return Err(Error::InvalidInput(
            "mixup needs one abnormal and one normal image".into(),
        ));
    }
    Ok(())
}

/// Pixel-space mixup of an abnormal and a normal scene.
pub fn mixup_image(abnormal: &SceneImage, normal: &SceneImage, cfg: &MixupConfig, seed: u64) -> Result<SceneImage> {
    check_images(abnormal, normal)?;
    let lambda = cfg.draw_lambda(&mut rng_from(seed))?;
    let mut out = abnormal.clone();
    for (o, n) in out.pixels.iter_mut().zip(&normal.pixels) {
        *o = lambda * *o + (1.0 - lambda) * n;
    }
    out.provenance = Provenance::Mixup;
    Ok(out)
}

/// Pixel-space mixup with one of the `k` nearest normal scenes.
pub fn nng_mix_image(
    abnormal: &SceneImage,
    normal_pool: &[SceneImage],
    k: usize,
    cfg: &MixupConfig,
    seed: u64,
) -> Result<SceneImage> {
    if normal_pool.is_empty() || k == 0 {
        return Err(Error::InvalidInput("NNG-Mix needs a nonempty pool and k >= 1".into()));
    }
    let rows: Vec<Vec<f64>> = normal_pool.iter().map(|s| s.pixels.clone()).collect();
    let near = nearest(&abnormal.pixels, &rows, k);
    let pick = near[rng_from(derive_seed(seed, 1)).random_range(0..near.len())];
    let mut out = mixup_image(abnormal, &normal_pool[pick], cfg, seed)?;
    out.provenance = Provenance::NngMix;
    Ok(out)
}
