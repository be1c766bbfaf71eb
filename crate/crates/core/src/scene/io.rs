//! Binary PGM images and the sidecar index.
//!
//! Index rows are `filename,label,cx,cy,x,y,w,h` where `(cx, cy)` is the
//! contact point and `x,y,w,h` the arc region, `-1` in all four when there
//! is none.

use std::fmt::Write as _;
use std::path::Path;

use super::Rect;
use crate::bytes::{read_file, write_file};
use crate::error::{Error, Result};
use crate::label::Label;

pub fn encode_pgm(width: usize, height: usize, pixels: &[f64]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(pixels.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}

pub fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[f64]) -> Result<()> {
    write_file(path, &encode_pgm(width, height, pixels))
}

/// Reads a maxval-255 P5 image as `(width, height, pixels in [0, 1])`.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let bytes = read_file(path)?;
    let bad = |d: &str| Error::format(path, d);
    // header: four whitespace-separated tokens, then one whitespace byte
    let mut tokens = Vec::with_capacity(4);
    let mut pos = 0;
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        tokens.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ASCII header"))?);
    }
    if tokens[0] != "P5" {
        return Err(bad("not a binary PGM (P5)"));
    }
    let num = |t: &str| t.parse::<usize>().map_err(|_| bad("bad header number"));
    let (w, h, maxval) = (num(tokens[1])?, num(tokens[2])?, num(tokens[3])?);
    if maxval != 255 {
        return Err(bad("only maxval 255 is supported"));
    }
    let data = &bytes[pos + 1..];
    if data.len() != w * h {
        return Err(bad("pixel data length does not match the header"));
    }
    Ok((w, h, data.iter().map(|&b| b as f64 / 255.0).collect()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexRow {
    pub filename: String,
    pub label: Label,
    pub contact_point: (usize, usize),
    pub arc_region: Option<Rect>,
}

pub fn write_index(path: &Path, rows: &[IndexRow]) -> Result<()> {
    let mut text = String::from("filename,label,cx,cy,x,y,w,h\n");
    for r in rows {
        if r.filename.contains(',') || r.filename.contains('\n') {
            return Err(Error::InvalidInput(format!(
                "unusable image file name {:?}",
                r.filename
            )));
        }
        let (cx, cy) = r.contact_point;
        write!(text, "{},{},{cx},{cy},", r.filename, r.label.tag()).expect("string write");
        match r.arc_region {
            Some(a) => writeln!(text, "{},{},{},{}", a.x, a.y, a.w, a.h),
            None => writeln!(text, "-1,-1,-1,-1"),
        }
        .expect("string write");
    }
    write_file(path, text.as_bytes())
}

pub fn read_index(path: &Path) -> Result<Vec<IndexRow>> {
    let text = String::from_utf8(read_file(path)?).map_err(|_| Error::format(path, "not UTF-8"))?;
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        let bad = |d: &str| Error::format(path, format!("line {}: {d}", n + 1));
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(bad("expected 8 fields"));
        }
        let int = |s: &str| s.trim().parse::<i64>().map_err(|_| bad("bad integer"));
        let label = Label::from_tag(int(f[1])? as u8).ok_or_else(|| bad("bad label"))?;
        let (cx, cy) = (int(f[2])?, int(f[3])?);
        if cx < 0 || cy < 0 {
            return Err(bad("negative contact point"));
        }
        let region = [int(f[4])?, int(f[5])?, int(f[6])?, int(f[7])?];
        let arc_region = match region {
            [-1, -1, -1, -1] => None,
            [x, y, w, h] if x >= 0 && y >= 0 && w > 0 && h > 0 => Some(Rect {
                x: x as usize,
                y: y as usize,
                w: w as usize,
                h: h as usize,
            }),
            _ => return Err(bad("bad arc region")),
        };
        rows.push(IndexRow {
            filename: f[0].to_string(),
            label,
            contact_point: (cx as usize, cy as usize),
            arc_region,
        });
    }
    Ok(rows)
}
