//! Force dataset files.
//!
//! `"MDSF"`, version `u16`, provenance `u8`, record count `u32`, then per
//! record: seed `u64`, label `u8`, event count `u8`, events as
//! (kind `u8`, start `u16`, len `u16`), and the 500 samples as `f64`.
//! Everything is little-endian.

use std::fmt::Write as _;
use std::path::Path;

use super::{ArcEvent, EventKind, ForceSignal, SIGNAL_LEN};
use crate::bytes::{read_file, write_file, Reader};
use crate::error::{Error, Result};
use crate::label::{Label, Provenance};

pub const FORCE_MAGIC: &[u8; 4] = b"MDSF";
pub const FORCE_VERSION: u16 = 1;

fn common_provenance(signals: &[ForceSignal], path: &Path) -> Result<Provenance> {
    let p = signals.first().map_or(Provenance::Real, |s| s.provenance);
    if signals.iter().any(|s| s.provenance != p) {
        return Err(Error::format(path, "a dataset file holds signals of one provenance"));
    }
    Ok(p)
}

pub fn encode_dataset(signals: &[ForceSignal], path: &Path) -> Result<Vec<u8>> {
    let provenance = common_provenance(signals, path)?;
    let mut out = Vec::with_capacity(11 + signals.len() * (10 + 8 * SIGNAL_LEN));
    out.extend_from_slice(FORCE_MAGIC);
    out.extend_from_slice(&FORCE_VERSION.to_le_bytes());
    out.push(provenance.tag());
    out.extend_from_slice(&(signals.len() as u32).to_le_bytes());
    for s in signals {
        s.check()?;
        if s.events.len() > 255 {
            return Err(Error::format(path, "at most 255 events per signal"));
        }
        out.extend_from_slice(&s.seed.to_le_bytes());
        out.push(s.label.tag());
        out.push(s.events.len() as u8);
        for e in &s.events {
            out.push(e.kind.tag());
            out.extend_from_slice(&(e.start as u16).to_le_bytes());
            out.extend_from_slice(&(e.len as u16).to_le_bytes());
        }
        for v in &s.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn write_dataset(path: &Path, signals: &[ForceSignal]) -> Result<()> {
    write_file(path, &encode_dataset(signals, path)?)
}

pub fn read_dataset(path: &Path) -> Result<Vec<ForceSignal>> {
    let bytes = read_file(path)?;
    let mut r = Reader::new(&bytes, path);
    if r.take(4)? != FORCE_MAGIC {
        return Err(r.error("not a force dataset (bad magic)"));
    }
    let version = r.u16()?;
    if version != FORCE_VERSION {
        return Err(r.error(format!("unsupported version {version}")));
    }
    let tag = r.u8()?;
    let provenance = Provenance::from_tag(tag).ok_or_else(|| r.error(format!("provenance {tag}")))?;
    let count = r.u32()? as usize;
    let mut signals = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let seed = r.u64()?;
        let tag = r.u8()?;
        let label = Label::from_tag(tag).ok_or_else(|| r.error(format!("label {tag}")))?;
        let n_events = r.u8()? as usize;
        let mut events = Vec::with_capacity(n_events);
        for _ in 0..n_events {
            let tag = r.u8()?;
            let kind = EventKind::from_tag(tag).ok_or_else(|| r.error(format!("event kind {tag}")))?;
            let start = r.u16()? as usize;
            let len = r.u16()? as usize;
            events.push(ArcEvent { kind, start, len });
        }
        let values = r.f64s(SIGNAL_LEN)?;
        let signal = ForceSignal {
            values,
            label,
            events,
            seed,
            provenance,
        };
        signal.check().map_err(|e| r.error(e.to_string()))?;
        signals.push(signal);
    }
    r.finish()?;
    Ok(signals)
}

/// One row per signal: the samples, then the label (0 normal, 1 abnormal).
pub fn write_csv(path: &Path, signals: &[ForceSignal]) -> Result<()> {
    let mut text = String::new();
    for s in signals {
        for v in &s.values {
            write!(text, "{v},").expect("string write");
        }
        writeln!(text, "{}", s.label.tag()).expect("string write");
    }
    write_file(path, text.as_bytes())
}
