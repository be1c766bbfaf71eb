use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::force::gaussian;
use crate::rng::rng_from;
use crate::scene::SceneImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CorruptionKind {
    GaussianNoise,
    DefocusBlur,
    Fog,
    Brightness,
    Pixelate,
}

impl CorruptionKind {
    pub const ALL: [CorruptionKind; 5] = [
        CorruptionKind::GaussianNoise,
        CorruptionKind::DefocusBlur,
        CorruptionKind::Fog,
        CorruptionKind::Brightness,
        CorruptionKind::Pixelate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CorruptionKind::GaussianNoise => "gaussian_noise",
            CorruptionKind::DefocusBlur => "defocus_blur",
            CorruptionKind::Fog => "fog",
            CorruptionKind::Brightness => "brightness",
            CorruptionKind::Pixelate => "pixelate",
        }
    }
}

impl fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CorruptionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CorruptionKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown corruption kind {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CorruptionSpec {
    kind: CorruptionKind,
    level: u8,
}

const NOISE_SIGMA: [f64; 5] = [0.04, 0.08, 0.12, 0.18, 0.26];
const BLUR_RADIUS: [usize; 5] = [1, 2, 3, 4, 6];
const FOG_MIX: [f64; 5] = [0.15, 0.30, 0.45, 0.60, 0.75];
const BRIGHTNESS_SHIFT: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];
const PIXEL_BLOCK: [usize; 5] = [2, 4, 8, 12, 16];

impl CorruptionSpec {
    pub fn new(kind: CorruptionKind, level: u8) -> Result<Self> {
        if !(1..=5).contains(&level) {
            return Err(Error::Config(format!("corruption level must be 1..=5, got {level}")));
        }
        Ok(CorruptionSpec { kind, level })
    }

    pub fn kind(&self) -> CorruptionKind {
        self.kind
    }

    pub fn level(&self) -> u8 {
        self.level
    }

    /// `kind@level`, also used in file names and report keys.
    pub fn tag(&self) -> String {
        format!("{}@{}", self.kind, self.level)
    }
}

impl fmt::Display for CorruptionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.kind, self.level)
    }
}

impl FromStr for CorruptionSpec {
    type Err = Error;

    /// Parses `kind@level`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, level) = s
            .trim()
            .split_once('@')
            .ok_or_else(|| Error::Config(format!("corruption {s:?} is not of the form kind@level")))?;
        let level = level
            .parse::<u8>()
            .map_err(|_| Error::Config(format!("corruption level {level:?} is not a number")))?;
        CorruptionSpec::new(kind.parse()?, level)
    }
}

/// Applies one corruption; everything but the pixels is kept.
pub fn corrupt(image: &SceneImage, spec: CorruptionSpec, seed: u64) -> SceneImage {
    let li = spec.level as usize - 1;
    let mut out = image.clone();
    match spec.kind {
        CorruptionKind::GaussianNoise => {
            let mut rng = rng_from(seed);
            for p in &mut out.pixels {
                *p += gaussian(&mut rng, NOISE_SIGMA[li]);
            }
        }
        CorruptionKind::DefocusBlur => {
            out.pixels = disk_blur(&image.pixels, image.width, image.height, BLUR_RADIUS[li]);
        }
        CorruptionKind::Fog => {
            let t = FOG_MIX[li];
            for p in &mut out.pixels {
                *p = (1.0 - t) * *p + t;
            }
        }
        CorruptionKind::Brightness => {
            for p in &mut out.pixels {
                *p += BRIGHTNESS_SHIFT[li];
            }
        }
        CorruptionKind::Pixelate => {
            out.pixels = pixelate(&image.pixels, image.width, image.height, PIXEL_BLOCK[li]);
        }
    }
    for p in &mut out.pixels {
        *p = p.clamp(0.0, 1.0);
    }
    out
}

/// Symmetric (edge-including) reflection of an out-of-range index.
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

pub(crate) fn disk_blur(px: &[f64], w: usize, h: usize, radius: usize) -> Vec<f64> {
    let r = radius as isize;
    let offsets: Vec<(isize, isize)> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
        .filter(|(dx, dy)| dx * dx + dy * dy <= r * r)
        .collect();
    let norm = 1.0 / offsets.len() as f64;
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for &(dx, dy) in &offsets {
                let sx = reflect(x as isize + dx, w);
                let sy = reflect(y as isize + dy, h);
                acc += px[sy * w + sx];
            }
            out[y * w + x] = acc * norm;
        }
    }
    out
}

pub(crate) fn pixelate(px: &[f64], w: usize, h: usize, block: usize) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    for by in (0..h).step_by(block) {
        for bx in (0..w).step_by(block) {
            let (ye, xe) = ((by + block).min(h), (bx + block).min(w));
            let mut sum = 0.0;
            for y in by..ye {
                sum += px[y * w + bx..y * w + xe].iter().sum::<f64>();
            }
            let mean = sum / ((ye - by) * (xe - bx)) as f64;
            for y in by..ye {
                out[y * w + bx..y * w + xe].fill(mean);
            }
        }
    }
    out
}
