//! Multi-band images on disk: a manifest text file listing one graymap per
//! band, in band order, with paths relative to the manifest's directory.

use std::path::{Path, PathBuf};

use segfuse_core::MultiBandImage;

use crate::error::{read_text, write_file, Error, Result};
use crate::pgm::{read_pgm, write_pgm, GrayImage, PgmEncoding};

/// Band paths listed by a manifest, resolved against its directory.
pub fn read_manifest(path: &Path) -> Result<Vec<PathBuf>> {
    let text = read_text(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let bands: Vec<PathBuf> = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| base.join(l))
        .collect();
    if bands.is_empty() {
        return Err(Error::format(path, "manifest lists no bands"));
    }
    Ok(bands)
}

pub fn read_image(manifest: &Path) -> Result<MultiBandImage> {
    let paths = read_manifest(manifest)?;
    let mut bands = Vec::with_capacity(paths.len());
    let mut names = Vec::with_capacity(paths.len());
    let mut dims = None;
    for p in &paths {
        let img = read_pgm(p)?;
        match dims {
            None => dims = Some((img.width, img.height)),
            Some(d) if d != (img.width, img.height) => {
                return Err(Error::format(p, format!("band is {}x{}, expected {}x{}", img.width, img.height, d.0, d.1)))
            }
            _ => {}
        }
        bands.push(img.data.iter().map(|&v| v as f64).collect());
        names.push(p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned()));
    }
    let (w, h) = dims.expect("at least one band");
    Ok(MultiBandImage::with_names(w, h, bands, names)?)
}

/// Rounds to the nearest integer and clamps into the 16-bit range.
pub fn quantize(v: f64) -> u16 {
    v.round().clamp(0.0, u16::MAX as f64) as u16
}

/// Writes `band_<j>.pgm` files and a `manifest.txt` into `dir`, returning
/// the manifest path. Intensities are quantised with [`quantize`].
pub fn write_image(dir: &Path, img: &MultiBandImage) -> Result<PathBuf> {
    let mut manifest = String::from("# one band per line, in order\n");
    for j in 0..img.num_bands() {
        let name = format!("band_{j:02}.pgm");
        let data = img.band(j).iter().map(|&v| quantize(v)).collect();
        write_pgm(&dir.join(&name), &GrayImage::new(img.width(), img.height(), data), PgmEncoding::Raw)?;
        manifest.push_str(&name);
        manifest.push('\n');
    }
    let path = dir.join("manifest.txt");
    write_file(&path, manifest.as_bytes())?;
    Ok(path)
}
