use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// J co-registered real-valued rasters of the same size.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiBandImage {
    width: usize,
    height: usize,
    bands: Vec<Vec<f64>>,
    band_names: Vec<String>,
}

impl MultiBandImage {
    pub fn new(width: usize, height: usize, bands: Vec<Vec<f64>>) -> Result<Self> {
        let names = (0..bands.len()).map(|j| format!("band-{j}")).collect();
        Self::with_names(width, height, bands, names)
    }

    pub fn with_names(width: usize, height: usize, bands: Vec<Vec<f64>>, band_names: Vec<String>) -> Result<Self> {
        if bands.is_empty() {
            return Err(Error::InvalidParameter("an image needs at least one band"));
        }
        let len = width * height;
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions { width, height, len });
        }
        for b in &bands {
            if b.len() != len {
                return Err(Error::InvalidDimensions { width, height, len: b.len() });
            }
        }
        if band_names.len() != bands.len() {
            return Err(Error::InvalidParameter("one name per band is required"));
        }
        Ok(Self { width, height, bands, band_names })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn num_bands(&self) -> usize {
        self.bands.len()
    }

    pub fn band(&self, j: usize) -> &[f64] {
        &self.bands[j]
    }

    pub fn bands(&self) -> &[Vec<f64>] {
        &self.bands
    }

    pub fn band_names(&self) -> &[String] {
        &self.band_names
    }

    /// Row-major `N x J` feature matrix, one J-vector per pixel.
    pub fn features(&self) -> Vec<f64> {
        let j = self.num_bands();
        let mut out = Vec::with_capacity(self.pixel_count() * j);
        for p in 0..self.pixel_count() {
            out.extend(self.bands.iter().map(|b| b[p]));
        }
        out
    }

    /// Sub-image of rows `[row_start, row_end)`.
    pub fn rows(&self, row_start: usize, row_end: usize) -> Result<Self> {
        if row_start >= row_end || row_end > self.height {
            return Err(Error::InvalidParameter("row range outside the image"));
        }
        let bands = self.bands.iter().map(|b| b[row_start * self.width..row_end * self.width].to_vec()).collect();
        Self::with_names(self.width, row_end - row_start, bands, self.band_names.clone())
    }

    /// The selected pixels as a single-row image.
    pub fn select(&self, pixels: &[usize]) -> Result<Self> {
        if let Some(&p) = pixels.iter().find(|&&p| p >= self.pixel_count()) {
            return Err(Error::PixelOutOfRange { index: p, len: self.pixel_count() });
        }
        let bands = self.bands.iter().map(|b| pixels.iter().map(|&p| b[p]).collect()).collect();
        Self::with_names(pixels.len(), 1, bands, self.band_names.clone())
    }
}
