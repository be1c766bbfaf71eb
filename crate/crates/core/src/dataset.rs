//! Paired image/force samples, seeded train and test streams, pseudo-anomaly
//! sets, and split directories on disk.
//!
//! A split directory holds `force.bin` (plus a `force.csv` export), one PGM
//! per sample under `images/` named `<provenance>_<index>.pgm`, and
//! `index.csv`.

use std::path::{Path, PathBuf};

use rand::Rng as _;

use crate::config::{PseudoMethod, RunConfig};
use crate::deepsad::SampleFeatures;
use crate::error::{Error, Result};
use crate::features::fft_magnitude;
use crate::force::{self, gen_abnormal, gen_normal, uniform, ForceSignal};
use crate::label::{Label, Provenance};
use crate::pseudo::{cut_paste, mixup_force, mixup_image, nng_mix_image, NngPool};
use crate::rng::{derive_path, derive_seed, rng_from};
use crate::scene::{self, extract_arc_patch, render_arc_patch, render_scene, Ambient, IndexRow, SceneImage};

/// Seed stream indices under the master seed; train and test never share one.
pub mod stream {
    pub const TRAIN_NORMAL: u64 = 1;
    pub const TRAIN_ANOMALY: u64 = 2;
    pub const TEST_NORMAL: u64 = 3;
    pub const TEST_ANOMALY: u64 = 4;
    pub const PSEUDO: u64 = 5;
    pub const CORRUPTION: u64 = 6;
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultimodalSample {
    pub image: SceneImage,
    pub force: ForceSignal,
    pub label: Label,
}

impl MultimodalSample {
    pub fn features(&self) -> Result<SampleFeatures> {
        Ok(SampleFeatures {
            image: self.image.pixels.clone(),
            force: fft_magnitude(&self.force.values)?.bins,
        })
    }
}

pub fn features_of(samples: &[MultimodalSample]) -> Result<Vec<SampleFeatures>> {
    samples.iter().map(|s| s.features()).collect()
}

fn ambient(cfg: &RunConfig, rng: &mut crate::rng::Rng) -> Ambient {
    if rng.random_bool(cfg.data.day_prob) {
        Ambient::Day
    } else {
        Ambient::Night
    }
}

pub fn normal_sample(cfg: &RunConfig, seed: u64) -> MultimodalSample {
    let mut rng = rng_from(derive_seed(seed, 2));
    let image = render_scene(derive_seed(seed, 0), ambient(cfg, &mut rng));
    let force = gen_normal(&cfg.signal, derive_seed(seed, 1));
    MultimodalSample {
        image,
        force,
        label: Label::Normal,
    }
}

/// A real arcing sample: an abnormal force trace and a scene with an arc
/// of random opacity at the contact point.
pub fn anomaly_sample(cfg: &RunConfig, seed: u64) -> Result<MultimodalSample> {
    let mut rng = rng_from(derive_seed(seed, 2));
    let scene = render_scene(derive_seed(seed, 0), ambient(cfg, &mut rng));
    let opacity = uniform(&mut rng, cfg.data.arc_opacity);
    let patch = render_arc_patch(derive_seed(seed, 3)).with_opacity(opacity);
    let mut image = cut_paste(&scene, &patch, derive_seed(seed, 4))?;
    image.provenance = Provenance::Real;
    let force = gen_abnormal(&cfg.signal, &cfg.abnormal, derive_seed(seed, 1));
    Ok(MultimodalSample {
        image,
        force,
        label: Label::Abnormal,
    })
}

fn sample_seed(cfg: &RunConfig, stream: u64, i: usize) -> u64 {
    derive_path(cfg.master_seed, &[stream, i as u64])
}

pub fn train_normals(cfg: &RunConfig) -> Vec<MultimodalSample> {
    (0..cfg.data.n_normal_train)
        .map(|i| normal_sample(cfg, sample_seed(cfg, stream::TRAIN_NORMAL, i)))
        .collect()
}

/// The first `n` labeled real anomalies; smaller sets are prefixes of
/// larger ones.
pub fn real_anomalies(cfg: &RunConfig, n: usize) -> Result<Vec<MultimodalSample>> {
    (0..n)
        .map(|i| anomaly_sample(cfg, sample_seed(cfg, stream::TRAIN_ANOMALY, i)))
        .collect()
}

/// Balanced held-out split: normals first, then anomalies.
pub fn test_split(cfg: &RunConfig) -> Result<Vec<MultimodalSample>> {
    let mut out: Vec<MultimodalSample> = (0..cfg.data.n_test_normal)
        .map(|i| normal_sample(cfg, sample_seed(cfg, stream::TEST_NORMAL, i)))
        .collect();
    for i in 0..cfg.data.n_test_anomaly {
        out.push(anomaly_sample(cfg, sample_seed(cfg, stream::TEST_ANOMALY, i))?);
    }
    Ok(out)
}

/// `per_real` pseudo-anomalies for every real anomaly, each built from the
/// real sample and a randomly chosen training normal.
pub fn pseudo_anomalies(
    cfg: &RunConfig,
    normals: &[MultimodalSample],
    reals: &[MultimodalSample],
    method: PseudoMethod,
) -> Result<Vec<MultimodalSample>> {
    if method == PseudoMethod::None || reals.is_empty() {
        return Ok(Vec::new());
    }
    if normals.is_empty() {
        return Err(Error::InvalidInput("pseudo-anomalies need normal samples".into()));
    }
    let per_real = cfg.experiment.pseudo_per_real;
    let k = cfg.experiment.nng_k;
    let forces: Vec<ForceSignal> = normals.iter().map(|s| s.force.clone()).collect();
    let images: Vec<SceneImage> = normals.iter().map(|s| s.image.clone()).collect();
    let pool = match method {
        PseudoMethod::NngMix => Some(NngPool::new(&forces)?),
        _ => None,
    };
    let mut out = Vec::with_capacity(reals.len() * per_real);
    for (r, real) in reals.iter().enumerate() {
        let patch = match method {
            PseudoMethod::Ours => Some(extract_arc_patch(&real.image)?),
            _ => None,
        };
        for j in 0..per_real {
            let seed = derive_path(cfg.master_seed, &[stream::PSEUDO, r as u64, j as u64]);
            let base = &normals[rng_from(seed).random_range(0..normals.len())];
            let (image, force) = match method {
                PseudoMethod::Ours => (
                    cut_paste(&base.image, patch.as_ref().expect("patch"), derive_seed(seed, 1))?,
                    mixup_force(&real.force, &base.force, &cfg.mixup, derive_seed(seed, 2))?,
                ),
                PseudoMethod::Mixup => (
                    mixup_image(&real.image, &base.image, &cfg.mixup, derive_seed(seed, 1))?,
                    mixup_force(&real.force, &base.force, &cfg.mixup, derive_seed(seed, 2))?,
                ),
                PseudoMethod::NngMix => (
                    nng_mix_image(&real.image, &images, k, &cfg.mixup, derive_seed(seed, 1))?,
                    pool.as_ref()
                        .expect("pool")
                        .mix(&real.force, k, &cfg.mixup, derive_seed(seed, 2))?,
                ),
                PseudoMethod::None => unreachable!(),
            };
            out.push(MultimodalSample {
                image,
                force,
                label: Label::Abnormal,
            });
        }
    }
    Ok(out)
}

fn provenance_name(p: Provenance) -> &'static str {
    match p {
        Provenance::Real => "real",
        Provenance::CutPaste => "cutpaste",
        Provenance::Mixup => "mixup",
        Provenance::NngMix => "nngmix",
    }
}

fn provenance_from_name(name: &str) -> Option<Provenance> {
    [
        Provenance::Real,
        Provenance::CutPaste,
        Provenance::Mixup,
        Provenance::NngMix,
    ]
    .into_iter()
    .find(|&p| provenance_name(p) == name)
}

pub const FORCE_FILE: &str = "force.bin";
pub const FORCE_CSV: &str = "force.csv";
pub const INDEX_FILE: &str = "index.csv";
pub const IMAGE_DIR: &str = "images";

fn mkdir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Writes a split directory, replacing any files of the same names.
pub fn write_split(dir: &Path, samples: &[MultimodalSample]) -> Result<()> {
    let images = dir.join(IMAGE_DIR);
    mkdir(&images)?;
    let forces: Vec<ForceSignal> = samples.iter().map(|s| s.force.clone()).collect();
    force::write_dataset(&dir.join(FORCE_FILE), &forces)?;
    force::write_csv(&dir.join(FORCE_CSV), &forces)?;
    let mut rows = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let name = format!("{}_{i:05}.pgm", provenance_name(s.image.provenance));
        scene::write_pgm(&images.join(&name), s.image.width, s.image.height, &s.image.pixels)?;
        rows.push(IndexRow {
            filename: name,
            label: s.label,
            contact_point: s.image.contact_point,
            arc_region: s.image.arc_region,
        });
    }
    scene::write_index(&dir.join(INDEX_FILE), &rows)
}

fn require(path: PathBuf) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::io(
            &path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "expected dataset file is missing"),
        ))
    }
}

pub fn read_split(dir: &Path) -> Result<Vec<MultimodalSample>> {
    let forces = force::read_dataset(&require(dir.join(FORCE_FILE))?)?;
    let index_path = require(dir.join(INDEX_FILE))?;
    let rows = scene::read_index(&index_path)?;
    if rows.len() != forces.len() {
        return Err(Error::format(
            &index_path,
            format!("{} index rows but {} force records", rows.len(), forces.len()),
        ));
    }
    let mut out = Vec::with_capacity(rows.len());
    for (row, force) in rows.into_iter().zip(forces) {
        if row.label != force.label {
            return Err(Error::format(
                &index_path,
                format!("{}: label differs from force record", row.filename),
            ));
        }
        let prefix = row.filename.split('_').next().unwrap_or("");
        let provenance = provenance_from_name(prefix)
            .ok_or_else(|| Error::format(&index_path, format!("{}: unknown provenance prefix", row.filename)))?;
        let path = require(dir.join(IMAGE_DIR).join(&row.filename))?;
        let (width, height, pixels) = scene::read_pgm(&path)?;
        let image = SceneImage {
            width,
            height,
            pixels,
            contact_point: row.contact_point,
            arc_region: row.arc_region,
            label: row.label,
            provenance,
        };
        image.check().map_err(|e| Error::format(&path, e.to_string()))?;
        out.push(MultimodalSample {
            image,
            force,
            label: row.label,
        });
    }
    Ok(out)
}
