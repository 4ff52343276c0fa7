//! Train/test splits of an image and its ground truth.

use std::path::Path;

use segfuse_core::{MultiBandImage, Segmentation};

use crate::error::{Error, Result};
use crate::labels::read_raw_labels;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SplitSpec {
    /// Half-open row ranges; each part keeps the full width.
    Rows { train: (usize, usize), test: (usize, usize) },
    /// Per-pixel membership: `true` trains, `false` tests. Parts become
    /// single-row images in pixel order.
    Mask(Vec<bool>),
}

impl SplitSpec {
    /// Top half trains, bottom half tests.
    pub fn halves(height: usize) -> Self {
        SplitSpec::Rows { train: (0, height / 2), test: (height / 2, height) }
    }

    /// Parses `a:b` into a half-open row range.
    pub fn parse_rows(s: &str) -> Result<(usize, usize)> {
        let bad = || Error::Usage(format!("row range {s:?} is not `start:end`"));
        let (a, b) = s.split_once(':').ok_or_else(bad)?;
        let (a, b) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a >= b {
            return Err(bad());
        }
        Ok((a, b))
    }

    /// A mask label map: non-zero pixels train, zero pixels test.
    pub fn read_mask(path: &Path) -> Result<Self> {
        let (raw, _, _) = read_raw_labels(path)?;
        Ok(SplitSpec::Mask(raw.iter().map(|&v| v != 0).collect()))
    }

    pub fn describe(&self) -> String {
        match self {
            SplitSpec::Rows { train, test } => {
                format!("train rows {}..{}, test rows {}..{}", train.0, train.1, test.0, test.1)
            }
            SplitSpec::Mask(m) => {
                let t = m.iter().filter(|&&b| b).count();
                format!("mask: {t} train pixels, {} test pixels", m.len() - t)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: (MultiBandImage, Segmentation),
    pub test: (MultiBandImage, Segmentation),
    pub spec: SplitSpec,
}

impl DatasetSplit {
    pub fn new(img: &MultiBandImage, gt: &Segmentation, spec: SplitSpec) -> Result<Self> {
        if (img.width(), img.height()) != (gt.width(), gt.height()) {
            return Err(Error::Usage(format!(
                "image is {}x{} but ground truth is {}x{}",
                img.width(),
                img.height(),
                gt.width(),
                gt.height()
            )));
        }
        let part = |pixels: &[usize]| -> Result<(MultiBandImage, Segmentation)> {
            Ok((img.select(pixels)?, gt.select(pixels)?.compacted()))
        };
        let (train, test) = match &spec {
            SplitSpec::Rows { train, test } => {
                let overlap = train.0 < test.1 && test.0 < train.1;
                if overlap || train.1 > img.height() || test.1 > img.height() || train.0 >= train.1 || test.0 >= test.1
                {
                    return Err(Error::Usage(format!(
                        "invalid row split for height {}: {}",
                        img.height(),
                        spec.describe()
                    )));
                }
                (
                    (img.rows(train.0, train.1)?, gt.rows(train.0, train.1)?.compacted()),
                    (img.rows(test.0, test.1)?, gt.rows(test.0, test.1)?.compacted()),
                )
            }
            SplitSpec::Mask(mask) => {
                if mask.len() != gt.len() {
                    return Err(Error::Usage(format!("mask has {} pixels, image has {}", mask.len(), gt.len())));
                }
                let train: Vec<usize> = (0..mask.len()).filter(|&p| mask[p]).collect();
                let test: Vec<usize> = (0..mask.len()).filter(|&p| !mask[p]).collect();
                if train.len() < 2 || test.len() < 2 {
                    return Err(Error::Usage("both mask parts need at least two pixels".into()));
                }
                (part(&train)?, part(&test)?)
            }
        };
        Ok(Self { train, test, spec })
    }
}
