//! Hard segmentations over a pixel grid and ensembles of them.
//!
//! Pixels are addressed by their row-major linear index `y * width + x`.
//! Labels are dense integers in `[0, num_labels)`; arbitrary label values are
//! brought into that form with [`Segmentation::densify`], which also returns
//! the mapping back to the original values.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Segmentation {
    labels: Vec<u32>,
    width: usize,
    height: usize,
    num_labels: u32,
}

impl Segmentation {
    /// Builds a segmentation, checking the grid size and every label against
    /// `num_labels`.
    pub fn new(labels: Vec<u32>, width: usize, height: usize, num_labels: u32) -> Result<Self> {
        let len = labels.len();
        if width == 0 || height == 0 || width.checked_mul(height) != Some(len) {
            return Err(Error::InvalidDimensions { width, height, len });
        }
        if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= num_labels) {
            return Err(Error::LabelOutOfRange { index, label, num_labels });
        }
        Ok(Self { labels, width, height, num_labels })
    }

    /// Builds a segmentation whose label count is one past the largest label.
    pub fn from_labels(labels: Vec<u32>, width: usize, height: usize) -> Result<Self> {
        let num_labels = labels.iter().copied().max().map_or(0, |m| m + 1);
        Self::new(labels, width, height, num_labels)
    }

    /// Single-row segmentation, handy for pixel sets without grid structure.
    pub fn from_row(labels: Vec<u32>) -> Result<Self> {
        let n = labels.len();
        Self::from_labels(labels, n, 1)
    }

    /// Maps arbitrary label values onto `0..C` in ascending value order.
    pub fn densify(raw: &[u32], width: usize, height: usize) -> Result<(Self, LabelMapping)> {
        let mut distinct: Vec<u32> = raw.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        let index: BTreeMap<u32, u32> = distinct.iter().enumerate().map(|(i, &v)| (v, i as u32)).collect();
        let labels = raw.iter().map(|v| index[v]).collect();
        let seg = Self::new(labels, width, height, distinct.len() as u32)?;
        Ok((seg, LabelMapping { original: distinct }))
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    #[inline]
    pub fn label(&self, pixel: usize) -> u32 {
        self.labels[pixel]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_labels(&self) -> u32 {
        self.num_labels
    }

    /// Number of labels that actually occur.
    pub fn populated_labels(&self) -> usize {
        let mut seen = alloc::vec![false; self.num_labels as usize];
        self.labels.iter().for_each(|&l| seen[l as usize] = true);
        seen.into_iter().filter(|&s| s).count()
    }

    pub fn same_grid(&self, other: &Segmentation) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn check_same_len(&self, other: &Segmentation) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), found: other.len() });
        }
        Ok(())
    }

    /// Drops unused labels, keeping the relative order of the used ones.
    pub fn compacted(&self) -> Segmentation {
        let (seg, _) = Self::densify(&self.labels, self.width, self.height)
            .expect("a valid segmentation stays valid when compacted");
        seg
    }

    /// Restricts the segmentation to `budget` labels; labels at or above the
    /// budget are merged into the last label.
    pub fn with_label_budget(&self, budget: u32) -> Result<Segmentation> {
        if budget == 0 {
            return Err(Error::InvalidParameter("label budget must be at least 1"));
        }
        let last = budget - 1;
        let labels = self.labels.iter().map(|&l| l.min(last)).collect();
        Segmentation::new(labels, self.width, self.height, budget)
    }

    /// Extracts the sub-grid of rows `[row_start, row_end)`.
    pub fn rows(&self, row_start: usize, row_end: usize) -> Result<Segmentation> {
        if row_start >= row_end || row_end > self.height {
            return Err(Error::InvalidParameter("row range outside the grid"));
        }
        let labels = self.labels[row_start * self.width..row_end * self.width].to_vec();
        Segmentation::new(labels, self.width, row_end - row_start, self.num_labels)
    }

    /// Labels of the selected pixels, as a single-row segmentation.
    pub fn select(&self, pixels: &[usize]) -> Result<Segmentation> {
        let mut labels = Vec::with_capacity(pixels.len());
        for &p in pixels {
            if p >= self.len() {
                return Err(Error::PixelOutOfRange { index: p, len: self.len() });
            }
            labels.push(self.labels[p]);
        }
        let n = labels.len();
        Segmentation::new(labels, n, 1, self.num_labels)
    }
}

/// Dense-to-original label mapping recorded by [`Segmentation::densify`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabelMapping {
    original: Vec<u32>,
}

impl LabelMapping {
    pub fn identity(num_labels: u32) -> Self {
        Self { original: (0..num_labels).collect() }
    }

    pub fn from_original(original: Vec<u32>) -> Self {
        Self { original }
    }

    pub fn original(&self) -> &[u32] {
        &self.original
    }

    pub fn original_of(&self, dense: u32) -> Option<u32> {
        self.original.get(dense as usize).copied()
    }

    pub fn dense_of(&self, original: u32) -> Option<u32> {
        self.original.binary_search(&original).ok().map(|i| i as u32)
    }

    pub fn is_identity(&self) -> bool {
        self.original.iter().enumerate().all(|(i, &v)| v == i as u32)
    }
}

/// An ordered collection of K segmentations over one pixel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    members: Vec<Segmentation>,
    provenance: Vec<String>,
}

impl Ensemble {
    pub fn new(members: Vec<Segmentation>, provenance: Vec<String>) -> Result<Self> {
        let first = members.first().ok_or(Error::EmptyEnsemble)?;
        for m in &members[1..] {
            if !m.same_grid(first) {
                return Err(Error::DimensionMismatch { expected: first.len(), found: m.len() });
            }
        }
        if provenance.len() != members.len() {
            return Err(Error::InvalidParameter("provenance must have one entry per member"));
        }
        Ok(Self { members, provenance })
    }

    /// Ensemble with generated `member-i` provenance tags.
    pub fn from_members(members: Vec<Segmentation>) -> Result<Self> {
        let provenance = (0..members.len()).map(|i| format!("member-{i}")).collect();
        Self::new(members, provenance)
    }

    pub fn members(&self) -> &[Segmentation] {
        &self.members
    }

    pub fn member(&self, i: usize) -> &Segmentation {
        &self.members[i]
    }

    pub fn provenance(&self) -> &[String] {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn pixel_count(&self) -> usize {
        self.members[0].len()
    }

    pub fn width(&self) -> usize {
        self.members[0].width()
    }

    pub fn height(&self) -> usize {
        self.members[0].height()
    }

    /// Largest per-member label count.
    pub fn max_labels(&self) -> u32 {
        self.members.iter().map(Segmentation::num_labels).max().unwrap_or(0)
    }
}
