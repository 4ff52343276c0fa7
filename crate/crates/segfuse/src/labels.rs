//! Label maps as graymaps (`.pgm`, sample value = label) or CSV grids.
//!
//! Raw label values are densified to `0..C` on read, sorted by value. A
//! non-identity mapping is kept in a sidecar `<file>.labels` next to the
//! map, one `dense original` pair per line.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use segfuse_core::{LabelMapping, Segmentation};

use crate::error::{read_text, write_file, Error, Result};
use crate::pgm::{read_pgm, write_pgm, GrayImage, PgmEncoding};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelFormat {
    Pgm(PgmEncoding),
    Csv,
}

impl LabelFormat {
    /// CSV for `.csv` files, raw graymap otherwise.
    pub fn for_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => LabelFormat::Csv,
            _ => LabelFormat::Pgm(PgmEncoding::Raw),
        }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".labels");
    PathBuf::from(s)
}

/// Raw grid values of a label map, before densification.
pub fn read_raw_labels(path: &Path) -> Result<(Vec<u32>, usize, usize)> {
    match LabelFormat::for_path(path) {
        LabelFormat::Csv => parse_csv_grid(&read_text(path)?, path),
        LabelFormat::Pgm(_) => {
            let img = read_pgm(path)?;
            Ok((img.data.iter().map(|&v| v as u32).collect(), img.width, img.height))
        }
    }
}

pub fn parse_csv_grid(text: &str, path: &Path) -> Result<(Vec<u32>, usize, usize)> {
    let mut labels = Vec::new();
    let mut width = None;
    let mut height = 0;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let before = labels.len();
        for field in line.split(',') {
            let field = field.trim();
            let v: u32 = field.parse().map_err(|_| {
                Error::parse(path, i + 1, format!("label {field:?} is not a non-negative 32-bit integer"))
            })?;
            labels.push(v);
        }
        let w = labels.len() - before;
        match width {
            None => width = Some(w),
            Some(expected) if expected != w => {
                return Err(Error::parse(path, i + 1, format!("row has {w} labels, expected {expected}")))
            }
            _ => {}
        }
        height += 1;
    }
    let width = width.ok_or_else(|| Error::format(path, "no label rows"))?;
    Ok((labels, width, height))
}

fn read_sidecar(path: &Path) -> Result<Option<LabelMapping>> {
    let side = sidecar_path(path);
    if !side.exists() {
        return Ok(None);
    }
    let text = read_text(&side)?;
    let mut original = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let (Some(d), Some(o), None) = (it.next(), it.next(), it.next()) else {
            return Err(Error::parse(&side, i + 1, "expected `dense original`"));
        };
        let (Ok(d), Ok(o)) = (d.parse::<usize>(), o.parse::<u32>()) else {
            return Err(Error::parse(&side, i + 1, "expected two integers"));
        };
        if d != original.len() {
            return Err(Error::parse(
                &side,
                i + 1,
                format!("dense labels must be listed in order, expected {}", original.len()),
            ));
        }
        original.push(o);
    }
    Ok(Some(LabelMapping::from_original(original)))
}

/// Reads a label map and densifies it. If a sidecar mapping exists the
/// returned mapping leads back to the values it records.
pub fn read_label_map(path: &Path) -> Result<(Segmentation, LabelMapping)> {
    let (raw, w, h) = read_raw_labels(path)?;
    let (seg, mapping) = Segmentation::densify(&raw, w, h)?;
    let Some(side) = read_sidecar(path)? else {
        return Ok((seg, mapping));
    };
    let composed = mapping
        .original()
        .iter()
        .map(|&v| {
            side.original_of(v)
                .ok_or_else(|| Error::format(path, format!("label {v} missing from the sidecar mapping")))
        })
        .collect::<Result<Vec<u32>>>()?;
    Ok((seg, LabelMapping::from_original(composed)))
}

/// Writes dense labels in the format chosen by the extension, plus a
/// sidecar when `mapping` is given and not the identity.
pub fn write_label_map(path: &Path, seg: &Segmentation, mapping: Option<&LabelMapping>) -> Result<()> {
    match LabelFormat::for_path(path) {
        LabelFormat::Csv => {
            let mut out = String::new();
            for row in seg.labels().chunks(seg.width()) {
                let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                out.push_str(&fields.join(","));
                out.push('\n');
            }
            write_file(path, out.as_bytes())?;
        }
        LabelFormat::Pgm(enc) => {
            if let Some(&v) = seg.labels().iter().find(|&&v| v > u16::MAX as u32) {
                return Err(Error::format(path, format!("label {v} does not fit a 16-bit graymap")));
            }
            let data = seg.labels().iter().map(|&v| v as u16).collect();
            write_pgm(path, &GrayImage::new(seg.width(), seg.height(), data), enc)?;
        }
    }
    let side = sidecar_path(path);
    match mapping.filter(|m| !m.is_identity()) {
        Some(m) => {
            let mut out = String::from("# dense original\n");
            for (d, o) in m.original().iter().enumerate() {
                writeln!(out, "{d} {o}").expect("writing to a string");
            }
            write_file(&side, out.as_bytes())?;
        }
        None if side.exists() => std::fs::remove_file(&side).map_err(|e| Error::io(&side, e))?,
        None => {}
    }
    Ok(())
}
