//! File formats: sinogram and coefficient CSV, binary coefficients,
//! portable graymaps, plot CSVs, JSON manifests and key=value configs.
//!
//! Sinogram CSV (v1):
//! ```text
//! # limtomo sinogram v1
//! angles_deg,a_0,a_1,...
//! offsets,s_0,s_1,...
//! range_deg,center,half_width
//! <one row of samples per angle>
//! ```
//!
//! Coefficient CSV (v1): `# limtomo coefficients v1`, then `slots,<n>`, then
//! `n` lines `j,l,rows,cols`, then one line of row-major values per slot in
//! the same order. The binary layout holds the same fields: magic `LTCF`,
//! `u32` version, `u32` slot count, per slot `i32 j, i32 l, u32 rows, u32 cols`,
//! then all values as little-endian `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::curvelet::{CoeffSet, CurveletSystem};
use crate::error::{Error, Result};
use crate::geometry::{AngularRange, Image, Sinogram};
use crate::solver::TraceRow;
use crate::visibility::VisibilityPartition;

fn join(v: impl IntoIterator<Item = f64>) -> String {
    let mut s = String::new();
    for (i, x) in v.into_iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        write!(s, "{x:?}").unwrap();
    }
    s
}

fn parse_row(line: &str, what: &str) -> Result<Vec<f64>> {
    line.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number '{t}' in {what}"))))
        .collect()
}

fn tagged<'a>(line: Option<&'a str>, tag: &str) -> Result<&'a str> {
    let line = line.ok_or_else(|| Error::Parse(format!("missing '{tag}' line")))?;
    line.strip_prefix(tag)
        .and_then(|r| r.strip_prefix(','))
        .ok_or_else(|| Error::Parse(format!("expected '{tag}' line, got '{}'", line.chars().take(40).collect::<String>())))
}

pub fn sinogram_to_csv(g: &Sinogram) -> String {
    let mut s = String::from("# limtomo sinogram v1\n");
    writeln!(s, "angles_deg,{}", join(g.angles.iter().map(|a| a.to_degrees()))).unwrap();
    writeln!(s, "offsets,{}", join(g.offsets.iter().cloned())).unwrap();
    writeln!(s, "range_deg,{:?},{:?}", g.range.center.to_degrees(), g.range.half_width.to_degrees()).unwrap();
    for m in 0..g.angles.len() {
        writeln!(s, "{}", join(g.row(m).iter().cloned())).unwrap();
    }
    s
}

pub fn sinogram_from_csv(text: &str) -> Result<Sinogram> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let head = lines.next().ok_or_else(|| Error::Parse("empty sinogram file".into()))?;
    if head.trim() != "# limtomo sinogram v1" {
        return Err(Error::Parse(format!("unsupported sinogram header '{head}'")));
    }
    let angles: Vec<f64> = parse_row(tagged(lines.next(), "angles_deg")?, "angles")?
        .into_iter()
        .map(f64::to_radians)
        .collect();
    let offsets = parse_row(tagged(lines.next(), "offsets")?, "offsets")?;
    let r = parse_row(tagged(lines.next(), "range_deg")?, "range")?;
    if r.len() != 2 {
        return Err(Error::Parse("range_deg needs center and half width".into()));
    }
    let range = AngularRange::from_degrees(r[0], r[1]).map_err(|e| Error::Parse(e.to_string()))?;
    let mut samples = Vec::with_capacity(angles.len() * offsets.len());
    for (m, line) in lines.enumerate() {
        let row = parse_row(line, "samples")?;
        if row.len() != offsets.len() {
            return Err(Error::Parse(format!("sample row {m} has {} values, expected {}", row.len(), offsets.len())));
        }
        samples.extend(row);
    }
    Sinogram::new(angles, offsets, samples, range).map_err(|e| Error::Parse(e.to_string()))
}

pub fn write_sinogram(path: &Path, g: &Sinogram) -> Result<()> {
    Ok(fs::write(path, sinogram_to_csv(g))?)
}

pub fn read_sinogram(path: &Path) -> Result<Sinogram> {
    sinogram_from_csv(&fs::read_to_string(path)?)
}

pub fn coeffs_to_csv(c: &CoeffSet) -> String {
    let mut s = String::from("# limtomo coefficients v1\n");
    writeln!(s, "slots,{}", c.layout.slots.len()).unwrap();
    for sl in &c.layout.slots {
        writeln!(s, "{},{},{},{}", sl.j, sl.l, sl.rows, sl.cols).unwrap();
    }
    for sl in &c.layout.slots {
        writeln!(s, "{}", join(c.slot_data(sl).iter().cloned())).unwrap();
    }
    s
}

pub fn coeffs_from_csv(text: &str, system: &CurveletSystem) -> Result<CoeffSet> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    if lines.next().map(str::trim) != Some("# limtomo coefficients v1") {
        return Err(Error::Parse("unsupported coefficient header".into()));
    }
    let n: usize = tagged(lines.next(), "slots")?
        .trim()
        .parse()
        .map_err(|_| Error::Parse("bad slot count".into()))?;
    check_header_count(n, system)?;
    for sl in &system.layout.slots {
        let h = lines.next().ok_or_else(|| Error::Parse("truncated slot header".into()))?;
        let f: Vec<i64> = h
            .split(',')
            .map(|t| t.trim().parse().map_err(|_| Error::Parse(format!("bad slot header '{h}'"))))
            .collect::<Result<_>>()?;
        if f != [sl.j as i64, sl.l as i64, sl.rows as i64, sl.cols as i64] {
            return Err(Error::Dimension(format!("slot header '{h}' does not match the system")));
        }
    }
    let mut data = Vec::with_capacity(system.num_coefficients());
    for sl in &system.layout.slots {
        let row = parse_row(lines.next().ok_or_else(|| Error::Parse("truncated values".into()))?, "values")?;
        if row.len() != sl.len() {
            return Err(Error::Dimension(format!("slot ({}, {}) has {} values", sl.j, sl.l, row.len())));
        }
        data.extend(row);
    }
    CoeffSet::from_vec(system, data)
}

fn check_header_count(n: usize, system: &CurveletSystem) -> Result<()> {
    if n != system.layout.slots.len() {
        return Err(Error::Dimension(format!("file has {n} slots, system has {}", system.layout.slots.len())));
    }
    Ok(())
}

pub fn coeffs_to_bytes(c: &CoeffSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 16 * c.layout.slots.len() + 8 * c.len());
    out.extend_from_slice(b"LTCF");
    out.extend_from_slice(&1u32.to_le_bytes());
    out.extend_from_slice(&(c.layout.slots.len() as u32).to_le_bytes());
    for sl in &c.layout.slots {
        out.extend_from_slice(&sl.j.to_le_bytes());
        out.extend_from_slice(&sl.l.to_le_bytes());
        out.extend_from_slice(&(sl.rows as u32).to_le_bytes());
        out.extend_from_slice(&(sl.cols as u32).to_le_bytes());
    }
    for v in &c.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn coeffs_from_bytes(bytes: &[u8], system: &CurveletSystem) -> Result<CoeffSet> {
    let word = |at: usize| -> Result<[u8; 4]> {
        bytes
            .get(at..at + 4)
            .map(|b| b.try_into().unwrap())
            .ok_or_else(|| Error::Parse("truncated coefficient file".into()))
    };
    if word(0)? != *b"LTCF" || u32::from_le_bytes(word(4)?) != 1 {
        return Err(Error::Parse("not a version-1 coefficient file".into()));
    }
    check_header_count(u32::from_le_bytes(word(8)?) as usize, system)?;
    let mut at = 12;
    for sl in &system.layout.slots {
        let j = i32::from_le_bytes(word(at)?);
        let l = i32::from_le_bytes(word(at + 4)?);
        let r = u32::from_le_bytes(word(at + 8)?) as usize;
        let c = u32::from_le_bytes(word(at + 12)?) as usize;
        if (j, l, r, c) != (sl.j, sl.l, sl.rows, sl.cols) {
            return Err(Error::Dimension(format!("slot ({j}, {l}) header does not match the system")));
        }
        at += 16;
    }
    let n = system.num_coefficients();
    let body = bytes.get(at..at + 8 * n).ok_or_else(|| Error::Parse("truncated coefficient values".into()))?;
    let data = body.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
    CoeffSet::from_vec(system, data)
}

/// Min-max scaled graymap with `y` pointing up; 16-bit when `wide`.
pub fn image_to_pgm(f: &Image, wide: bool) -> Vec<u8> {
    let lo = f.pixels.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = f.pixels.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let maxval: u32 = if wide { 65535 } else { 255 };
    let mut out = format!("P5\n{} {}\n{}\n", f.width, f.height, maxval).into_bytes();
    for r in (0..f.height).rev() {
        for c in 0..f.width {
            let v = ((f.get(r, c) - lo) / span * maxval as f64).round() as u32;
            if wide {
                out.extend_from_slice(&(v as u16).to_be_bytes());
            } else {
                out.push(v as u8);
            }
        }
    }
    out
}

pub fn write_pgm(path: &Path, f: &Image) -> Result<()> {
    Ok(fs::write(path, image_to_pgm(f, true))?)
}

/// Sinogram rendered as a graymap, one row per angle.
pub fn write_sinogram_pgm(path: &Path, g: &Sinogram) -> Result<()> {
    let mut rows = g.samples.clone();
    // rows are written bottom-up by image_to_pgm, so flip to keep angle 0 on top
    let n = g.offsets.len();
    let m = g.angles.len();
    for i in 0..m {
        rows[(m - 1 - i) * n..(m - i) * n].copy_from_slice(g.row(i));
    }
    let img = Image { width: n, height: m, pixels: rows, extent: 1.0 };
    Ok(fs::write(path, image_to_pgm(&img, true))?)
}

fn pgm_tokens(bytes: &[u8]) -> Result<(Vec<String>, usize)> {
    // header: magic, width, height, maxval, with comments
    let mut tokens = Vec::new();
    let mut i = 0;
    while tokens.len() < 4 && i < bytes.len() {
        let b = bytes[i];
        if b == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
        } else if b.is_ascii_whitespace() {
            i += 1;
        } else {
            let start = i;
            while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            tokens.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
        }
    }
    if tokens.len() < 4 {
        return Err(Error::Parse("truncated graymap header".into()));
    }
    Ok((tokens, i + 1))
}

/// Reads a P2/P5 graymap into `[0, 1]` values, `y` pointing up.
pub fn pgm_to_image(bytes: &[u8]) -> Result<Image> {
    let (t, body) = pgm_tokens(bytes)?;
    let num = |s: &str| s.parse::<usize>().map_err(|_| Error::Parse(format!("bad graymap header field '{s}'")));
    let (w, h, maxval) = (num(&t[1])?, num(&t[2])?, num(&t[3])?);
    if w == 0 || h == 0 || maxval == 0 || maxval > 65535 {
        return Err(Error::Parse("invalid graymap dimensions".into()));
    }
    let vals: Vec<f64> = match t[0].as_str() {
        "P5" => {
            let bpp = if maxval > 255 { 2 } else { 1 };
            let data = bytes.get(body..body + w * h * bpp).ok_or_else(|| Error::Parse("truncated graymap data".into()))?;
            if bpp == 1 {
                data.iter().map(|&b| b as f64).collect()
            } else {
                data.chunks_exact(2).map(|b| u16::from_be_bytes([b[0], b[1]]) as f64).collect()
            }
        }
        "P2" => {
            let text = String::from_utf8_lossy(&bytes[body.min(bytes.len())..]);
            let v: Vec<f64> = text
                .split_whitespace()
                .take(w * h)
                .map(|s| s.parse::<f64>().map_err(|_| Error::Parse(format!("bad graymap value '{s}'"))))
                .collect::<Result<_>>()?;
            if v.len() != w * h {
                return Err(Error::Parse("truncated graymap data".into()));
            }
            v
        }
        m => return Err(Error::Parse(format!("unsupported graymap magic '{m}'"))),
    };
    let mut pixels = vec![0.0; w * h];
    for r in 0..h {
        for c in 0..w {
            pixels[(h - 1 - r) * w + c] = vals[r * w + c] / maxval as f64;
        }
    }
    Image::new(w, h, pixels)
}

/// Plain grid of comma-separated values, first line is the top row.
pub fn grid_csv_to_image(text: &str) -> Result<Image> {
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| parse_row(l, "image grid"))
        .collect::<Result<_>>()?;
    let h = rows.len();
    let w = rows.first().map_or(0, |r| r.len());
    if h == 0 || rows.iter().any(|r| r.len() != w) {
        return Err(Error::Parse("image grid rows must be nonempty and equally long".into()));
    }
    let pixels = rows.into_iter().rev().flatten().collect();
    Image::new(w, h, pixels)
}

pub fn image_to_grid_csv(f: &Image) -> String {
    let mut s = String::new();
    for r in (0..f.height).rev() {
        writeln!(s, "{}", join(f.pixels[r * f.width..(r + 1) * f.width].iter().cloned())).unwrap();
    }
    s
}

/// Loads `.pgm` or a CSV grid, by extension.
pub fn read_image(path: &Path) -> Result<Image> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    match ext.as_str() {
        "pgm" => pgm_to_image(&fs::read(path)?),
        "csv" | "txt" => grid_csv_to_image(&fs::read_to_string(path)?),
        _ => Err(Error::Parse(format!("unsupported image format '{}'", path.display()))),
    }
}

pub fn partition_csv(part: &VisibilityPartition) -> String {
    let mut s = String::from("j,l,visible,theta_deg\n");
    for (sl, &v) in part.slots().iter().zip(&part.slot_visible) {
        let theta = if sl.j < 0 { 0.0 } else { crate::geometry::orientation_angle(sl.j, sl.l).unwrap().to_degrees() };
        writeln!(s, "{},{},{},{theta:?}", sl.j, sl.l, v as u8).unwrap();
    }
    s
}

pub fn profile_csv(rows: &[(f64, usize, usize)]) -> String {
    let mut s = String::from("theta_deg,full_dim,reduced_dim\n");
    for (t, f, r) in rows {
        writeln!(s, "{t:?},{f},{r}").unwrap();
    }
    s
}

pub fn trace_csv(trace: &[TraceRow]) -> String {
    let mut s = String::from("iter,objective,data_residual,fixed_point_residual,sigma_estimate,wall_ms\n");
    for r in trace {
        writeln!(
            s,
            "{},{:?},{:?},{:?},{:?},{:?}",
            r.iter, r.objective, r.data_residual, r.fixed_point_residual, r.sigma_estimate, r.wall_ms
        )
        .unwrap();
    }
    s
}

/// Generic CSV from a header and numeric rows.
pub fn table_csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        writeln!(s, "{}", join(r.iter().cloned())).unwrap();
    }
    s
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    Ok(fs::write(path, text + "\n")?)
}

/// `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("config line {} has no '='", n + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Parse(format!("config line {} has an empty key", n + 1)));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}
