//! Partition distances and validity indices.
//!
//! Everything here is computed from contingency tables with exact integer
//! pair counts. Pairs are unordered and exclude the diagonal: a double sum
//! over ordered pixel pairs `(m, l)` counts every disagreement twice, so the
//! ordered-pair symmetric distance is exactly `2 * sdd`.

mod validity;

pub use crate::connectivity::bregman_connectivity_distance;
pub use validity::{adjusted_mutual_information, adjusted_rand_index, entropy, mutual_information, rand_index};

use crate::constraints::pairs;
use crate::contingency::{contingency, ContingencyTable};
use crate::error::{Error, Result};
use crate::segmentation::Segmentation;

/// Unordered pixel-pair agreement counts between two segmentations.
///
/// `n10` counts pairs co-segmented in the first segmentation only, `n01`
/// pairs co-segmented in the second only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PairCounts {
    pub n11: u64,
    pub n10: u64,
    pub n01: u64,
    pub n00: u64,
}

impl PairCounts {
    pub fn total(&self) -> u64 {
        self.n11 + self.n10 + self.n01 + self.n00
    }

    /// Pairs co-segmented in exactly one of the two segmentations.
    pub fn disagreements(&self) -> u64 {
        self.n10 + self.n01
    }

    /// Pairs co-segmented in the first segmentation.
    pub fn first_pairs(&self) -> u64 {
        self.n11 + self.n10
    }

    /// Pairs co-segmented in the second segmentation.
    pub fn second_pairs(&self) -> u64 {
        self.n11 + self.n01
    }
}

pub fn pair_counts(t: &ContingencyTable) -> PairCounts {
    let n11: u64 = t.counts().iter().map(|&c| pairs(c)).sum();
    let rows: u64 = t.row_sums().iter().map(|&c| pairs(c)).sum();
    let cols: u64 = t.col_sums().iter().map(|&c| pairs(c)).sum();
    let n10 = rows - n11;
    let n01 = cols - n11;
    PairCounts { n11, n10, n01, n00: pairs(t.total()) - n11 - n10 - n01 }
}

/// Symmetric distance: pixel pairs co-segmented in exactly one of `a`, `b`.
pub fn sdd(a: &Segmentation, b: &Segmentation) -> Result<u64> {
    Ok(pair_counts(&contingency(a, b)?).disagreements())
}

fn check_pixel(s: &Segmentation, p: usize) -> Result<()> {
    if p >= s.len() {
        return Err(Error::PixelOutOfRange { index: p, len: s.len() });
    }
    Ok(())
}

/// Entry of the connectivity matrix: 1 when `m` and `l` share a segment.
pub fn connectivity_entry(s: &Segmentation, m: usize, l: usize) -> Result<u8> {
    check_pixel(s, m)?;
    check_pixel(s, l)?;
    Ok(u8::from(s.label(m) == s.label(l)))
}

/// Squared difference of the connectivity entries of `a` and `b` at `(m, l)`.
pub fn pairwise_d(a: &Segmentation, b: &Segmentation, m: usize, l: usize) -> Result<u8> {
    a.check_same_len(b)?;
    let x = connectivity_entry(a, m, l)?;
    let y = connectivity_entry(b, m, l)?;
    Ok(x ^ y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(labels: &[u32]) -> Segmentation {
        Segmentation::from_row(labels.to_vec()).unwrap()
    }

    #[test]
    fn pair_counts_small() {
        let t = contingency(&seg(&[0, 0, 1, 1]), &seg(&[0, 1, 1, 1])).unwrap();
        assert_eq!(pair_counts(&t), PairCounts { n11: 1, n10: 1, n01: 2, n00: 2 });
    }

    #[test]
    fn sdd_examples() {
        assert_eq!(sdd(&seg(&[0, 0, 1, 1]), &seg(&[0, 1, 1, 1])).unwrap(), 3);
        assert_eq!(sdd(&seg(&[0, 1]), &seg(&[0, 0])).unwrap(), 1);
        let a = seg(&[2, 0, 1, 1, 0]);
        assert_eq!(sdd(&a, &a).unwrap(), 0);
    }

    #[test]
    fn identical_pair_counts_have_no_disagreement() {
        let a = seg(&[0, 1, 1, 2, 0, 2]);
        let pc = pair_counts(&contingency(&a, &a).unwrap());
        assert_eq!((pc.n10, pc.n01), (0, 0));
        assert_eq!(pc.total(), 15);
    }

    #[test]
    fn connectivity_entries() {
        let s = seg(&[0, 0, 1]);
        assert_eq!(connectivity_entry(&s, 0, 1).unwrap(), 1);
        assert_eq!(connectivity_entry(&s, 0, 2).unwrap(), 0);
        for m in 0..3 {
            assert_eq!(connectivity_entry(&s, m, m).unwrap(), 1);
        }
        assert!(matches!(connectivity_entry(&s, 0, 3), Err(Error::PixelOutOfRange { index: 3, len: 3 })));
    }

    #[test]
    fn pairwise_distance_examples() {
        let a = seg(&[0, 0, 1, 1]);
        let b = seg(&[0, 1, 1, 1]);
        assert_eq!(pairwise_d(&a, &b, 0, 1).unwrap(), 1);
        assert_eq!(pairwise_d(&a, &a, 0, 3).unwrap(), 0);
        assert!(pairwise_d(&a, &seg(&[0, 1]), 0, 1).is_err());
    }
}
