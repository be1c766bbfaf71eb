//! Synthetic pantograph scenes and arc patches.
//!
//! A scene is a 64×64 grayscale frame: a sky gradient, a horizontal
//! catenary wire and a triangular pantograph whose apex touches the wire.
//! Arc patches are bright radial blobs with a few ray streaks and an alpha
//! mask derived from their intensity.

mod io;

pub use io::{read_index, read_pgm, write_index, write_pgm, IndexRow};

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::force::{gaussian, uniform};
use crate::label::{Label, Provenance};
use crate::rng::rng_from;

pub const IMAGE_SIZE: usize = 64;
pub const MAX_PATCH: usize = 16;
const PIXEL_NOISE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ambient {
    Day,
    Night,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x + self.w && y >= self.y && y < self.y + self.h
    }

    /// Integer center, `(x + w/2, y + h/2)`.
    pub fn center(&self) -> (usize, usize) {
        (self.x + self.w / 2, self.y + self.h / 2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
    pub contact_point: (usize, usize),
    pub arc_region: Option<Rect>,
    pub label: Label,
    pub provenance: Provenance,
}

impl SceneImage {
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }

    pub fn check(&self) -> Result<()> {
        if self.pixels.len() != self.width * self.height {
            return Err(Error::InvalidInput(format!(
                "{}×{} image holds {} pixels",
                self.width,
                self.height,
                self.pixels.len()
            )));
        }
        if self.pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidInput("pixel outside [0, 1]".into()));
        }
        let (cx, cy) = self.contact_point;
        if cx >= self.width || cy >= self.height {
            return Err(Error::InvalidInput(format!("contact point ({cx}, {cy}) outside image")));
        }
        if let Some(r) = self.arc_region {
            if r.w == 0 || r.h == 0 || r.x + r.w > self.width || r.y + r.h > self.height {
                return Err(Error::InvalidInput(format!("arc region {r:?} outside image")));
            }
            if !self.label.is_abnormal() {
                return Err(Error::InvalidInput("normal image with an arc region".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArcPatch {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
    pub mask: Vec<f64>,
}

pub fn smoothstep(e0: f64, e1: f64, x: f64) -> f64 {
    let t = ((x - e0) / (e1 - e0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Alpha of a patch pixel of intensity `v`; zero below 0.2.
pub fn arc_alpha(v: f64) -> f64 {
    smoothstep(0.2, 0.6, v)
}

impl ArcPatch {
    pub fn from_pixels(width: usize, height: usize, pixels: Vec<f64>) -> Self {
        let mask = pixels.iter().map(|&v| arc_alpha(v)).collect();
        ArcPatch {
            width,
            height,
            pixels,
            mask,
        }
    }

    /// Scales the mask by `opacity`, for faint or partly occluded arcs.
    pub fn with_opacity(mut self, opacity: f64) -> Self {
        let o = opacity.clamp(0.0, 1.0);
        for m in &mut self.mask {
            *m *= o;
        }
        self
    }

    pub fn is_blank(&self) -> bool {
        self.mask.iter().zip(&self.pixels).all(|(m, p)| m * p == 0.0)
    }
}

fn set_max(pixels: &mut [f64], w: usize, x: isize, y: isize, v: f64) {
    if x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < pixels.len() / w {
        let p = &mut pixels[y as usize * w + x as usize];
        *p = p.max(v);
    }
}

pub fn render_scene(seed: u64, ambient: Ambient) -> SceneImage {
    let mut rng = rng_from(seed);
    let (w, h) = (IMAGE_SIZE, IMAGE_SIZE);
    let (base, wire, body) = match ambient {
        Ambient::Night => {
            let b = uniform(&mut rng, [0.05, 0.2]);
            (
                b,
                b + uniform(&mut rng, [0.25, 0.35]),
                b + uniform(&mut rng, [0.08, 0.14]),
            )
        }
        Ambient::Day => {
            let b = uniform(&mut rng, [0.5, 0.65]);
            (b, b - uniform(&mut rng, [0.3, 0.4]), b - uniform(&mut rng, [0.12, 0.2]))
        }
    };
    let gradient = uniform(&mut rng, [-0.04, 0.04]);
    let mut pixels = vec![0.0; w * h];
    for y in 0..h {
        let v = base + gradient * (y as f64 / (h - 1) as f64 - 0.5);
        pixels[y * w..(y + 1) * w].fill(v);
    }

    let line_y = rng.random_range(14..=22usize);
    let cx = rng.random_range(20..=44usize);
    let depth = rng.random_range(18..=26usize);
    let half_base = uniform(&mut rng, [10.0, 16.0]);
    let head = rng.random_range(4..=7usize);

    // pantograph: filled triangle with its apex just below the wire, plus a
    // contact strip; the wire is drawn last so it stays on top
    let base_y = (line_y + depth).min(h - 1);
    for y in line_y + 1..=base_y {
        let frac = (y - line_y) as f64 / (base_y - line_y) as f64;
        let half = (frac * half_base).round() as usize;
        let x0 = cx.saturating_sub(half);
        let x1 = (cx + half).min(w - 1);
        pixels[y * w + x0..=y * w + x1].fill(body);
    }
    let strip = line_y + 1;
    pixels[strip * w + cx - head..=strip * w + cx + head].fill(body);
    pixels[line_y * w..(line_y + 1) * w].fill(wire);

    for p in &mut pixels {
        *p = (*p + gaussian(&mut rng, PIXEL_NOISE)).clamp(0.0, 1.0);
    }
    SceneImage {
        width: w,
        height: h,
        pixels,
        contact_point: (cx, line_y),
        arc_region: None,
        label: Label::Normal,
        provenance: Provenance::Real,
    }
}

pub fn render_arc_patch(seed: u64) -> ArcPatch {
    let mut rng = rng_from(seed);
    let size = rng.random_range(9..=15usize);
    let peak = uniform(&mut rng, [0.9, 1.0]);
    let c = (size as f64 - 1.0) / 2.0;
    let radius = uniform(&mut rng, [0.45, 0.6]) * size as f64;
    let mut pixels = vec![0.0; size * size];
    for y in 0..size {
        for x in 0..size {
            let d = (x as f64 - c).hypot(y as f64 - c) / radius;
            pixels[y * size + x] = (peak * (1.0 - d * d)).max(0.0);
        }
    }
    let n_rays = rng.random_range(2..=5usize);
    for _ in 0..n_rays {
        let angle = uniform(&mut rng, [0.0, std::f64::consts::TAU]);
        let length = uniform(&mut rng, [0.8, 1.4]) * radius;
        let steps = (length * 2.0).ceil() as usize;
        for s in 0..=steps {
            let r = length * s as f64 / steps as f64;
            let v = peak * 0.85 * (1.0 - r / (length + 1.0));
            let x = (c + r * angle.cos()).round() as isize;
            let y = (c + r * angle.sin()).round() as isize;
            set_max(&mut pixels, size, x, y, v);
        }
    }
    // the center pixel carries the peak exactly
    let ci = (c.round() as usize) * size + c.round() as usize;
    pixels[ci] = peak;
    ArcPatch::from_pixels(size, size, pixels)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Recovers the arc patch from an annotated abnormal image.
///
/// The background is taken as the median border pixel of the annotated
/// region, and the screen blend is inverted against it.
pub fn extract_arc_patch(image: &SceneImage) -> Result<ArcPatch> {
    let r = image
        .arc_region
        .ok_or_else(|| Error::InvalidInput("image has no annotated arc region".into()))?;
    let mut border = Vec::new();
    for y in r.y..r.y + r.h {
        for x in r.x..r.x + r.w {
            if y == r.y || y + 1 == r.y + r.h || x == r.x || x + 1 == r.x + r.w {
                border.push(image.at(x, y));
            }
        }
    }
    let bg = median(border).min(0.99);
    let mut pixels = Vec::with_capacity(r.w * r.h);
    for y in r.y..r.y + r.h {
        for x in r.x..r.x + r.w {
            let out = image.at(x, y);
            pixels.push((1.0 - (1.0 - out) / (1.0 - bg)).clamp(0.0, 1.0));
        }
    }
    let patch = ArcPatch::from_pixels(r.w, r.h, pixels);
    if patch.is_blank() {
        return Err(Error::InvalidInput("annotated region holds no visible arc".into()));
    }
    Ok(patch)
}
