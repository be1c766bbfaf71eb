//! Seeded synthetic contact-force signals.
//!
//! A normal trace is a mean force plus three mechanical oscillations, white
//! measurement and wire-irregularity noise, a linear drift and optional
//! Gaussian transients and short sine bursts. Abnormal traces start from a
//! normal base and either receive one to three arcing events or, for the
//! burst-only class, only localized noise bursts.

mod io;

pub use io::{read_dataset, write_csv, write_dataset, FORCE_MAGIC, FORCE_VERSION};

use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::label::{Label, Provenance};
use crate::rng::{derive_seed, rng_from, Rng};

pub const SIGNAL_LEN: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct SignalGenConfig {
    pub n_samples: usize,
    pub sample_rate: f64,
    pub mean_force_range: [f64; 2],
    pub freq_ranges: [[f64; 2]; 3],
    pub amp_ranges: [[f64; 2]; 3],
    pub meas_noise_sigma: f64,
    pub irreg_noise_sigma: f64,
    pub drift_range: [f64; 2],
    pub transient_prob: f64,
    pub transient_amp: f64,
    /// milliseconds
    pub transient_dur: [f64; 2],
    pub variation_prob: f64,
    pub variation_amp: f64,
    /// milliseconds
    pub variation_dur: [f64; 2],
}

impl Default for SignalGenConfig {
    fn default() -> Self {
        SignalGenConfig {
            n_samples: SIGNAL_LEN,
            sample_rate: 500.0,
            mean_force_range: [20.0, 30.0],
            freq_ranges: [[6.0, 10.0], [10.0, 14.0], [18.0, 25.0]],
            amp_ranges: [[2.5, 4.5], [1.2, 2.5], [0.6, 1.6]],
            meas_noise_sigma: 1.0,
            irreg_noise_sigma: 0.6,
            drift_range: [-1.5, 1.5],
            transient_prob: 0.3,
            transient_amp: 3.0,
            transient_dur: [10.0, 40.0],
            variation_prob: 0.5,
            variation_amp: 2.0,
            variation_dur: [16.0, 50.0],
        }
    }
}

fn check_range(name: &str, r: [f64; 2]) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
        return Err(Error::Config(format!(
            "{name} must be an ordered finite range, got {r:?}"
        )));
    }
    Ok(())
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")));
    }
    Ok(())
}

fn check_sigma(name: &str, s: f64) -> Result<()> {
    if !(s.is_finite() && s >= 0.0) {
        return Err(Error::Config(format!("{name} must be non-negative, got {s}")));
    }
    Ok(())
}

impl SignalGenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples != SIGNAL_LEN {
            return Err(Error::Config(format!(
                "signals have {SIGNAL_LEN} samples, got n_samples = {}",
                self.n_samples
            )));
        }
        if (self.sample_rate - self.n_samples as f64).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "a signal spans one second, so sample_rate must equal n_samples ({}), got {}",
                self.n_samples, self.sample_rate
            )));
        }
        check_range("mean_force_range", self.mean_force_range)?;
        for (i, r) in self.freq_ranges.iter().enumerate() {
            check_range(&format!("freq_ranges[{i}]"), *r)?;
        }
        for (i, r) in self.amp_ranges.iter().enumerate() {
            check_range(&format!("amp_ranges[{i}]"), *r)?;
        }
        check_range("drift_range", self.drift_range)?;
        check_range("transient_dur", self.transient_dur)?;
        check_range("variation_dur", self.variation_dur)?;
        check_sigma("meas_noise_sigma", self.meas_noise_sigma)?;
        check_sigma("irreg_noise_sigma", self.irreg_noise_sigma)?;
        check_sigma("transient_amp", self.transient_amp)?;
        check_sigma("variation_amp", self.variation_amp)?;
        check_prob("transient_prob", self.transient_prob)?;
        check_prob("variation_prob", self.variation_prob)?;
        if self.transient_dur[0] <= 0.0 || self.variation_dur[0] <= 0.0 {
            return Err(Error::Config("event durations must be positive".into()));
        }
        if self.transient_dur[1] > 1000.0 || self.variation_dur[1] > 1000.0 {
            return Err(Error::Config("event durations cannot exceed the 1 s signal".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbnormalGenConfig {
    /// loss of contact, excessive force, micro-arcing
    pub type_probs: [f64; 3],
    pub drop_range: [f64; 2],
    pub rise_range: [f64; 2],
    pub micro_perturb_range: [f64; 2],
    pub micro_noise_sigma: f64,
    pub events_per_sample: [usize; 2],
    pub event_dur_samples: [usize; 2],
    pub burst_only_prob: f64,
    pub burst_noise_sigma: f64,
    /// milliseconds
    pub burst_region_dur: [f64; 2],
}

impl Default for AbnormalGenConfig {
    fn default() -> Self {
        AbnormalGenConfig {
            type_probs: [0.35, 0.30, 0.35],
            drop_range: [0.30, 0.90],
            rise_range: [0.40, 1.50],
            micro_perturb_range: [0.05, 0.20],
            micro_noise_sigma: 0.8,
            events_per_sample: [1, 3],
            event_dur_samples: [5, 30],
            burst_only_prob: 0.20,
            burst_noise_sigma: 1.2,
            burst_region_dur: [20.0, 60.0],
        }
    }
}

impl AbnormalGenConfig {
    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.type_probs.iter().enumerate() {
            check_prob(&format!("type_probs[{i}]"), *p)?;
        }
        let sum: f64 = self.type_probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("type_probs must sum to 1, got {sum}")));
        }
        check_range("drop_range", self.drop_range)?;
        check_range("rise_range", self.rise_range)?;
        check_range("micro_perturb_range", self.micro_perturb_range)?;
        check_range("burst_region_dur", self.burst_region_dur)?;
        check_sigma("micro_noise_sigma", self.micro_noise_sigma)?;
        check_sigma("burst_noise_sigma", self.burst_noise_sigma)?;
        check_prob("burst_only_prob", self.burst_only_prob)?;
        let [e0, e1] = self.events_per_sample;
        if e0 < 1 || e0 > e1 || e1 > 255 {
            return Err(Error::Config(format!(
                "events_per_sample must be an ordered range within [1, 255], got {:?}",
                self.events_per_sample
            )));
        }
        let [d0, d1] = self.event_dur_samples;
        if d0 < 1 || d0 > d1 || d1 > SIGNAL_LEN {
            return Err(Error::Config(format!(
                "event_dur_samples must be an ordered range within [1, {SIGNAL_LEN}], got {:?}",
                self.event_dur_samples
            )));
        }
        if self.burst_region_dur[0] <= 0.0 || self.burst_region_dur[1] > 1000.0 {
            return Err(Error::Config("burst_region_dur must lie within (0, 1000] ms".into()));
        }
        if self.drop_range[1] > 1.0 || self.drop_range[0] < 0.0 {
            return Err(Error::Config("drop_range must lie within [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    LossOfContact,
    ExcessiveForce,
    MicroArcing,
    /// localized noise burst of the burst-only abnormal class
    BurstNoise,
}

impl EventKind {
    pub fn tag(self) -> u8 {
        match self {
            EventKind::LossOfContact => 0,
            EventKind::ExcessiveForce => 1,
            EventKind::MicroArcing => 2,
            EventKind::BurstNoise => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(EventKind::LossOfContact),
            1 => Some(EventKind::ExcessiveForce),
            2 => Some(EventKind::MicroArcing),
            3 => Some(EventKind::BurstNoise),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArcEvent {
    pub kind: EventKind,
    pub start: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForceSignal {
    pub values: Vec<f64>,
    pub label: Label,
    pub events: Vec<ArcEvent>,
    pub seed: u64,
    pub provenance: Provenance,
}

impl ForceSignal {
    /// True for abnormal signals that carry only noise bursts.
    pub fn is_burst_only(&self) -> bool {
        !self.events.is_empty() && self.events.iter().all(|e| e.kind == EventKind::BurstNoise)
    }

    pub fn check(&self) -> Result<()> {
        if self.values.len() != SIGNAL_LEN {
            return Err(Error::InvalidInput(format!(
                "force signal has {} samples, expected {SIGNAL_LEN}",
                self.values.len()
            )));
        }
        for e in &self.events {
            if e.len == 0 || e.start + e.len > SIGNAL_LEN {
                return Err(Error::InvalidInput(format!(
                    "event {e:?} lies outside [0, {SIGNAL_LEN})"
                )));
            }
        }
        if self.label.is_abnormal() == self.events.is_empty() {
            return Err(Error::InvalidInput(
                "abnormal signals need events and normal signals must have none".into(),
            ));
        }
        Ok(())
    }
}

/// The random quantities drawn for one normal trace.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalDraws {
    pub mean_force: f64,
    pub freqs: [f64; 3],
    pub amps: [f64; 3],
    pub phases: [f64; 3],
    pub drift: f64,
    /// (center seconds, signed amplitude, duration seconds)
    pub transient: Option<(f64, f64, f64)>,
    /// (start seconds, signed amplitude, duration seconds, periods)
    pub variation: Option<(f64, f64, f64, u32)>,
}

pub(crate) fn uniform(rng: &mut Rng, r: [f64; 2]) -> f64 {
    r[0] + (r[1] - r[0]) * rng.random::<f64>()
}

pub(crate) fn gaussian(rng: &mut Rng, sigma: f64) -> f64 {
    sigma * rng.sample::<f64, _>(StandardNormal)
}

fn random_sign(rng: &mut Rng) -> f64 {
    if rng.random_bool(0.5) {
        1.0
    } else {
        -1.0
    }
}

pub fn gen_normal(cfg: &SignalGenConfig, seed: u64) -> ForceSignal {
    gen_normal_with_draws(cfg, seed).0
}

/// Like [`gen_normal`] but also reports the drawn parameters.
pub fn gen_normal_with_draws(cfg: &SignalGenConfig, seed: u64) -> (ForceSignal, NormalDraws) {
    let mut rng = rng_from(seed);
    let n = cfg.n_samples;
    let fs = cfg.sample_rate;
    let duration = n as f64 / fs;

    let mean_force = uniform(&mut rng, cfg.mean_force_range);
    let mut freqs = [0.0; 3];
    let mut amps = [0.0; 3];
    let mut phases = [0.0; 3];
    for i in 0..3 {
        freqs[i] = uniform(&mut rng, cfg.freq_ranges[i]);
        amps[i] = uniform(&mut rng, cfg.amp_ranges[i]);
        phases[i] = uniform(&mut rng, [0.0, 2.0 * PI]);
    }
    let drift = uniform(&mut rng, cfg.drift_range);
    let transient = rng.random_bool(cfg.transient_prob).then(|| {
        let dur = uniform(&mut rng, cfg.transient_dur) / 1000.0;
        let center = uniform(&mut rng, [0.0, duration]);
        (center, random_sign(&mut rng) * cfg.transient_amp, dur)
    });
    let variation = rng.random_bool(cfg.variation_prob).then(|| {
        let dur = uniform(&mut rng, cfg.variation_dur) / 1000.0;
        let start = uniform(&mut rng, [0.0, duration - dur]);
        let periods = rng.random_range(1..=3u32);
        (start, random_sign(&mut rng) * cfg.variation_amp, dur, periods)
    });

    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / fs;
        let mut v = mean_force + drift * t;
        for k in 0..3 {
            v += amps[k] * (2.0 * PI * freqs[k] * t + phases[k]).sin();
        }
        v += gaussian(&mut rng, cfg.meas_noise_sigma);
        v += gaussian(&mut rng, cfg.irreg_noise_sigma);
        if let Some((t0, a, dur)) = transient {
            let sigma = dur / 4.0;
            v += a * (-(t - t0).powi(2) / (2.0 * sigma * sigma)).exp();
        }
        if let Some((t0, a, dur, periods)) = variation {
            if t >= t0 && t < t0 + dur {
                v += a * (2.0 * PI * periods as f64 * (t - t0) / dur).sin();
            }
        }
        values.push(v);
    }
    let signal = ForceSignal {
        values,
        label: Label::Normal,
        events: Vec::new(),
        seed,
        provenance: Provenance::Real,
    };
    let draws = NormalDraws {
        mean_force,
        freqs,
        amps,
        phases,
        drift,
        transient,
        variation,
    };
    (signal, draws)
}

/// Severity parameters drawn for one arcing event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct EventDraw {
    pub event: ArcEvent,
    /// multiplicative factor applied to the window
    pub factor: f64,
}

/// Multiplies the event window by the drawn factor.
pub(crate) fn apply_scaling(values: &mut [f64], draw: &EventDraw) {
    let e = draw.event;
    for v in &mut values[e.start..e.start + e.len] {
        *v *= draw.factor;
    }
}

/// Adds the kind-specific noise, impulses or ring-down after scaling.
fn apply_disturbance(
    values: &mut [f64],
    draw: &EventDraw,
    cfg_n: &SignalGenConfig,
    cfg_a: &AbnormalGenConfig,
    rng: &mut Rng,
) {
    let e = draw.event;
    let window = e.start..e.start + e.len;
    match e.kind {
        EventKind::LossOfContact => {
            for v in &mut values[window] {
                *v += gaussian(rng, LOSS_NOISE_SIGMA);
            }
            let impulses = rng.random_range(1..=3usize);
            for _ in 0..impulses {
                let at = if rng.random_bool(0.5) {
                    e.start
                } else {
                    e.start + e.len - 1
                };
                values[at] += random_sign(rng) * uniform(rng, IMPULSE_RANGE);
            }
        }
        EventKind::ExcessiveForce => {
            let amp = uniform(rng, RING_AMP_RANGE);
            let freq = uniform(rng, RING_FREQ_RANGE);
            let tau = 0.5 * e.len as f64 / cfg_n.sample_rate;
            let end = (e.start + 2 * e.len).min(values.len());
            for (j, v) in values[e.start..end].iter_mut().enumerate() {
                let tp = j as f64 / cfg_n.sample_rate;
                *v += amp * (-tp / tau).exp() * (2.0 * PI * freq * tp).sin();
            }
        }
        EventKind::MicroArcing => {
            for v in &mut values[window] {
                *v += gaussian(rng, cfg_a.micro_noise_sigma);
            }
        }
        EventKind::BurstNoise => {
            for v in &mut values[window] {
                *v += gaussian(rng, cfg_a.burst_noise_sigma);
            }
        }
    }
}

const LOSS_NOISE_SIGMA: f64 = 1.5;
const IMPULSE_RANGE: [f64; 2] = [4.0, 8.0];
const RING_AMP_RANGE: [f64; 2] = [3.0, 6.0];
const RING_FREQ_RANGE: [f64; 2] = [30.0, 60.0];

fn draw_kind(rng: &mut Rng, probs: &[f64; 3]) -> EventKind {
    let u: f64 = rng.random();
    if u < probs[0] {
        EventKind::LossOfContact
    } else if u < probs[0] + probs[1] {
        EventKind::ExcessiveForce
    } else {
        EventKind::MicroArcing
    }
}

pub fn gen_abnormal(cfg_n: &SignalGenConfig, cfg_a: &AbnormalGenConfig, seed: u64) -> ForceSignal {
    let mut signal = gen_normal(cfg_n, seed);
    let mut rng = rng_from(derive_seed(seed, 1));
    let n = signal.values.len();
    let count = rng.random_range(cfg_a.events_per_sample[0]..=cfg_a.events_per_sample[1]);
    let mut draws = Vec::with_capacity(count);
    if rng.random_bool(cfg_a.burst_only_prob) {
        for _ in 0..count {
            let ms = uniform(&mut rng, cfg_a.burst_region_dur);
            let len = ((ms / 1000.0 * cfg_n.sample_rate).round() as usize).clamp(1, n);
            let start = rng.random_range(0..=n - len);
            let event = ArcEvent {
                kind: EventKind::BurstNoise,
                start,
                len,
            };
            draws.push(EventDraw { event, factor: 1.0 });
        }
    } else {
        for _ in 0..count {
            let kind = draw_kind(&mut rng, &cfg_a.type_probs);
            let len = rng.random_range(cfg_a.event_dur_samples[0]..=cfg_a.event_dur_samples[1]);
            let start = rng.random_range(0..=n - len);
            let factor = match kind {
                EventKind::LossOfContact => 1.0 - uniform(&mut rng, cfg_a.drop_range),
                EventKind::ExcessiveForce => 1.0 + uniform(&mut rng, cfg_a.rise_range),
                _ => 1.0 + random_sign(&mut rng) * uniform(&mut rng, cfg_a.micro_perturb_range),
            };
            let event = ArcEvent { kind, start, len };
            draws.push(EventDraw { event, factor });
        }
    }
    // overlapping events compose in order: scale, then disturb
    for d in &draws {
        apply_scaling(&mut signal.values, d);
        apply_disturbance(&mut signal.values, d, cfg_n, cfg_a, &mut rng);
    }
    signal.label = Label::Abnormal;
    signal.events = draws.iter().map(|d| d.event).collect();
    signal
}
