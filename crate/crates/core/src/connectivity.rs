//! Weighted consensus connectivity and its squared-Euclidean divergence to a
//! hard segmentation.
//!
//! The consensus connectivity is never materialised as an `N x N` matrix.
//! For a pair `(m, l)` it is
//!
//! * 1 when the pair is must-linked (including through the closure),
//! * 0 when the pair is cannot-linked (including through must-link
//!   components),
//! * `sum_i w_i M_ml(s_i)` otherwise.
//!
//! Summed squared differences against a segmentation `x` expand into
//! co-occurrence counts `G_jk = sum_pairs M(s_j) M(s_k)` (the `n11` of a
//! contingency table) minus the same counts restricted to clamped pairs,
//! which are aggregated per must-link component.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::constraints::{pairs, ConstraintSet};
use crate::contingency::contingency;
use crate::error::{Error, Result};
use crate::metrics::pair_counts;
use crate::segmentation::{Ensemble, Segmentation};
use crate::weights::{is_feasible, WeightVector, SIMPLEX_TOL};

type JointHistogram = Vec<((u32, u32), u64)>;

/// Co-occurrence of `x` and `y` over clamped pairs, split into pairs inside
/// must-link components and pairs across cannot-linked components.
fn clamped_cooccurrence(x: &Segmentation, y: &Segmentation, cons: &ConstraintSet) -> (u64, u64) {
    let histograms: Vec<JointHistogram> = cons
        .components()
        .iter()
        .map(|comp| {
            let mut h: BTreeMap<(u32, u32), u64> = BTreeMap::new();
            for &p in comp {
                *h.entry((x.label(p), y.label(p))).or_insert(0) += 1;
            }
            h.into_iter().collect()
        })
        .collect();

    let within = histograms.iter().flat_map(|h| h.iter().map(|&(_, c)| pairs(c))).sum();

    let mut across = 0;
    for (a, b) in cons.cannot_link_components() {
        let (ha, hb) = (&histograms[a], &histograms[b]);
        let (mut i, mut j) = (0, 0);
        while i < ha.len() && j < hb.len() {
            match ha[i].0.cmp(&hb[j].0) {
                core::cmp::Ordering::Less => i += 1,
                core::cmp::Ordering::Greater => j += 1,
                core::cmp::Ordering::Equal => {
                    across += ha[i].1 * hb[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
    }
    (within, across)
}

/// Pair statistics of one segmentation against the ensemble.
#[derive(Debug, Clone)]
struct TargetStats {
    /// `G_jx - Q_jx` for every member `j`.
    unclamped: Vec<f64>,
    /// `G_xx`: co-segmented pairs of `x`.
    own_pairs: f64,
    /// Co-segmented pairs of `x` inside must-link components.
    own_within: f64,
}

fn target_stats(members: &[Segmentation], cons: &ConstraintSet, x: &Segmentation) -> Result<TargetStats> {
    let mut unclamped = Vec::with_capacity(members.len());
    for m in members {
        let g = pair_counts(&contingency(m, x)?).n11;
        let (w, a) = clamped_cooccurrence(m, x, cons);
        unclamped.push((g - w - a) as f64);
    }
    let mut sizes = vec![0u64; x.num_labels() as usize];
    x.labels().iter().for_each(|&l| sizes[l as usize] += 1);
    let own_pairs = sizes.iter().map(|&c| pairs(c)).sum::<u64>() as f64;
    let (own_within, _) = clamped_cooccurrence(x, x, cons);
    Ok(TargetStats { unclamped, own_pairs, own_within: own_within as f64 })
}

/// Consensus connectivity of an ensemble under weights and constraints.
#[derive(Debug, Clone)]
pub struct SoftConnectivity<'a> {
    members: &'a [Segmentation],
    constraints: &'a ConstraintSet,
    weights: Vec<f64>,
    /// `U_jk = G_jk - Q_jk`, row-major K x K.
    gram: Vec<f64>,
    /// Per-member statistics as a distance target.
    member_stats: Vec<TargetStats>,
    must_link_pairs: f64,
}

/// Weighted-average connectivity of `ens` with constrained pairs clamped.
pub fn consensus_connectivity<'a>(
    ens: &'a Ensemble,
    w: &WeightVector,
    cons: &'a ConstraintSet,
) -> Result<SoftConnectivity<'a>> {
    let mut p = SoftConnectivity::new(ens.members(), cons)?;
    p.set_weights(w.as_slice())?;
    Ok(p)
}

impl<'a> SoftConnectivity<'a> {
    /// Precomputes the member pair statistics; weights start uniform.
    pub fn new(members: &'a [Segmentation], constraints: &'a ConstraintSet) -> Result<Self> {
        let first = members.first().ok_or(Error::EmptyEnsemble)?;
        constraints.check_pixels(first.len())?;
        let k = members.len();
        let mut member_stats = Vec::with_capacity(k);
        for m in members {
            member_stats.push(target_stats(members, constraints, m)?);
        }
        let mut gram = vec![0.0; k * k];
        for (j, st) in member_stats.iter().enumerate() {
            gram[j * k..(j + 1) * k].copy_from_slice(&st.unclamped);
        }
        Ok(Self {
            members,
            constraints,
            weights: vec![1.0 / k as f64; k],
            gram,
            member_stats,
            must_link_pairs: constraints.must_link_count() as f64,
        })
    }

    pub fn set_weights(&mut self, w: &[f64]) -> Result<()> {
        if w.len() != self.members.len() {
            return Err(Error::DimensionMismatch { expected: self.members.len(), found: w.len() });
        }
        if !is_feasible(w, SIMPLEX_TOL) {
            return Err(Error::InvalidParameter("consensus weights must lie on the simplex"));
        }
        self.weights.copy_from_slice(w);
        Ok(())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn pixel_count(&self) -> usize {
        self.members[0].len()
    }

    /// Consensus value for the pair `(m, l)`.
    pub fn entry(&self, m: usize, l: usize) -> Result<f64> {
        let n = self.pixel_count();
        for p in [m, l] {
            if p >= n {
                return Err(Error::PixelOutOfRange { index: p, len: n });
            }
        }
        if m == l || self.constraints.requires_same(m, l) {
            return Ok(1.0);
        }
        if self.constraints.requires_different(m, l) {
            return Ok(0.0);
        }
        Ok(self.members.iter().zip(&self.weights).filter(|(s, _)| s.label(m) == s.label(l)).map(|(_, &w)| w).sum())
    }

    fn quadratic_term(&self) -> f64 {
        let k = self.members.len();
        let w = &self.weights;
        let mut acc = 0.0;
        for j in 0..k {
            let row = &self.gram[j * k..(j + 1) * k];
            acc += w[j] * row.iter().zip(w).map(|(u, wk)| u * wk).sum::<f64>();
        }
        acc
    }

    fn distance_from_stats(&self, quad: f64, st: &TargetStats) -> f64 {
        let cross: f64 = self.weights.iter().zip(&st.unclamped).map(|(w, u)| w * u).sum();
        let d = quad - 2.0 * cross + st.own_pairs - 2.0 * st.own_within + self.must_link_pairs;
        d.max(0.0)
    }

    /// Summed squared difference to the connectivity of `x` over all
    /// unordered pixel pairs.
    pub fn distance_to(&self, x: &Segmentation) -> Result<f64> {
        self.members[0].check_same_len(x)?;
        let st = target_stats(self.members, self.constraints, x)?;
        Ok(self.distance_from_stats(self.quadratic_term(), &st))
    }

    /// [`Self::distance_to`] for every member, from cached statistics.
    pub fn member_distances(&self) -> Vec<f64> {
        let quad = self.quadratic_term();
        self.member_stats.iter().map(|st| self.distance_from_stats(quad, st)).collect()
    }
}

/// Squared-Euclidean Bregman divergence between the consensus connectivity
/// `p` and the hard connectivity of `s`, summed over unordered pairs.
pub fn bregman_connectivity_distance(p: &SoftConnectivity<'_>, s: &Segmentation) -> Result<f64> {
    p.distance_to(s)
}
