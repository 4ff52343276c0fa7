//! Lloyd k-means as a base-layer segmenter.
//!
//! Seeding is k-means++ driven by a ChaCha8 stream, so a run is reproducible
//! bit for bit from its seed. An empty cluster is reseeded at the point
//! farthest from its assigned centroid.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::MultiBandImage;
use crate::segmentation::{Ensemble, Segmentation};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Standardise every feature dimension before clustering.
    pub zscore: bool,
    /// Independent seedings; the run with the lowest final inertia is kept.
    pub restarts: usize,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self { k, seed, max_iter: 100, zscore: false, restarts: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansRun {
    /// Dense labels, numbered in centroid order over populated clusters.
    pub labels: Vec<u32>,
    pub populated: usize,
    /// Centroids of the populated clusters, in label order.
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squares after every assignment step.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

impl KMeansRun {
    pub fn inertia(&self) -> f64 {
        *self.inertia_history.last().expect("at least one assignment")
    }
}

#[inline]
fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn standardise(features: &mut [f64], dim: usize) {
    let n = features.len() / dim;
    for j in 0..dim {
        let mean = (0..n).map(|i| features[i * dim + j]).sum::<f64>() / n as f64;
        let var = (0..n)
            .map(|i| {
                let d = features[i * dim + j] - mean;
                d * d
            })
            .sum::<f64>()
            / n as f64;
        let sd = libm::sqrt(var);
        for i in 0..n {
            let v = features[i * dim + j] - mean;
            features[i * dim + j] = if sd > 0.0 { v / sd } else { v };
        }
    }
}

fn plus_plus_seeds(points: &[f64], dim: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = points.len() / dim;
    let mut centers = Vec::with_capacity(k * dim);
    let first = rng.gen_range(0..n);
    centers.extend_from_slice(&points[first * dim..(first + 1) * dim]);
    let mut nearest: Vec<f64> = (0..n).map(|i| dist2(&points[i * dim..(i + 1) * dim], &centers[..dim])).collect();
    for _ in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in nearest.iter().enumerate() {
                if d > 0.0 && target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            // guard against rounding landing on a zero-weight tail point
            if nearest[chosen] == 0.0 {
                chosen = nearest.iter().enumerate().rev().find(|(_, &d)| d > 0.0).map_or(chosen, |(i, _)| i);
            }
            chosen
        } else {
            first
        };
        let c = points[pick * dim..(pick + 1) * dim].to_vec();
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(dist2(&points[i * dim..(i + 1) * dim], &c));
        }
        centers.extend_from_slice(&c);
    }
    centers
}

/// Assigns every point to its nearest centre (lowest index on ties).
/// Returns the inertia and whether any assignment changed.
fn assign(points: &[f64], centers: &[f64], dim: usize, labels: &mut [usize], dists: &mut [f64]) -> (f64, bool) {
    let k = centers.len() / dim;
    let mut changed = false;
    let mut inertia = 0.0;
    for (i, p) in points.chunks_exact(dim).enumerate() {
        let mut best = (f64::INFINITY, 0);
        for c in 0..k {
            let d = dist2(p, &centers[c * dim..(c + 1) * dim]);
            if d < best.0 {
                best = (d, c);
            }
        }
        if labels[i] != best.1 {
            labels[i] = best.1;
            changed = true;
        }
        dists[i] = best.0;
        inertia += best.0;
    }
    (inertia, changed)
}

fn update(points: &[f64], centers: &mut [f64], dim: usize, labels: &[usize], dists: &mut [f64]) {
    let k = centers.len() / dim;
    let mut sums = vec![0.0; k * dim];
    let mut counts = vec![0usize; k];
    for (i, p) in points.chunks_exact(dim).enumerate() {
        let c = labels[i];
        counts[c] += 1;
        for (s, x) in sums[c * dim..(c + 1) * dim].iter_mut().zip(p) {
            *s += x;
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            for j in 0..dim {
                centers[c * dim + j] = sums[c * dim + j] / counts[c] as f64;
            }
            continue;
        }
        // empty cluster: move it onto the worst-served point
        let (far, &d) = dists
            .iter()
            .enumerate()
            .fold((0, &f64::NEG_INFINITY), |acc, (i, d)| if *d > *acc.1 { (i, d) } else { acc });
        if d > 0.0 {
            centers[c * dim..(c + 1) * dim].copy_from_slice(&points[far * dim..(far + 1) * dim]);
            dists[far] = 0.0;
        }
    }
}

/// Clusters `points` (row-major, `dim` values per point).
pub fn kmeans_features(points: &[f64], dim: usize, cfg: &KMeansConfig) -> Result<KMeansRun> {
    if dim == 0 || points.is_empty() || !points.len().is_multiple_of(dim) {
        return Err(Error::InvalidParameter("feature matrix shape is invalid"));
    }
    if cfg.k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1"));
    }
    if cfg.max_iter == 0 {
        return Err(Error::InvalidParameter("max_iter must be at least 1"));
    }
    if cfg.restarts == 0 {
        return Err(Error::InvalidParameter("restarts must be at least 1"));
    }
    if points.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("features must be finite"));
    }
    let mut data = points.to_vec();
    if cfg.zscore {
        standardise(&mut data, dim);
    }
    // the first run uses `seed` itself, later ones draw their seeds from it
    let mut seeder = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best = lloyd(&data, dim, cfg, cfg.seed);
    for _ in 1..cfg.restarts {
        let run = lloyd(&data, dim, cfg, seeder.gen());
        if run.inertia() < best.inertia() {
            best = run;
        }
    }
    Ok(best)
}

fn lloyd(data: &[f64], dim: usize, cfg: &KMeansConfig, seed: u64) -> KMeansRun {
    let n = data.len() / dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = plus_plus_seeds(data, dim, cfg.k, &mut rng);

    let mut labels = vec![usize::MAX; n];
    let mut dists = vec![0.0; n];
    let mut history = Vec::new();
    let (inertia, _) = assign(data, &centers, dim, &mut labels, &mut dists);
    history.push(inertia);
    let mut iterations = 0;
    for _ in 0..cfg.max_iter {
        iterations += 1;
        update(data, &mut centers, dim, &labels, &mut dists);
        let (inertia, changed) = assign(data, &centers, dim, &mut labels, &mut dists);
        history.push(inertia);
        if !changed {
            break;
        }
    }

    let mut dense = vec![u32::MAX; cfg.k];
    labels.iter().for_each(|&c| dense[c] = 0);
    let mut populated = 0;
    let mut centroids = Vec::new();
    for (c, slot) in dense.iter_mut().enumerate() {
        if *slot == 0 {
            *slot = populated as u32;
            populated += 1;
            centroids.push(centers[c * dim..(c + 1) * dim].to_vec());
        }
    }
    KMeansRun {
        labels: labels.iter().map(|&c| dense[c]).collect(),
        populated,
        centroids,
        inertia_history: history,
        iterations,
    }
}

/// K-means over the per-pixel band vectors of `img`.
pub fn kmeans_segment(img: &MultiBandImage, k: usize, seed: u64, max_iter: usize) -> Result<Segmentation> {
    let cfg = KMeansConfig { max_iter, ..KMeansConfig::new(k, seed) };
    segment_with(img, &cfg)
}

pub fn segment_with(img: &MultiBandImage, cfg: &KMeansConfig) -> Result<Segmentation> {
    let run = kmeans_features(&img.features(), img.num_bands(), cfg)?;
    Segmentation::new(run.labels, img.width(), img.height(), run.populated as u32)
}

/// One k-means run per band on that band's scalar intensities.
///
/// Band `j` uses `seeds[j % seeds.len()]`.
pub fn band_ensemble(img: &MultiBandImage, k: usize, seeds: &[u64]) -> Result<Ensemble> {
    band_ensemble_with(img, &KMeansConfig::new(k, 0), seeds)
}

pub fn band_ensemble_with(img: &MultiBandImage, cfg: &KMeansConfig, seeds: &[u64]) -> Result<Ensemble> {
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("at least one seed is required"));
    }
    let mut members = Vec::with_capacity(img.num_bands());
    let mut provenance = Vec::with_capacity(img.num_bands());
    for j in 0..img.num_bands() {
        let seed = seeds[j % seeds.len()];
        let run = kmeans_features(img.band(j), 1, &KMeansConfig { seed, ..*cfg })?;
        members.push(Segmentation::new(run.labels, img.width(), img.height(), run.populated as u32)?);
        provenance.push(format!(
            "kmeans band={} k={} seed={} max_iter={} restarts={} zscore={}",
            img.band_names()[j],
            cfg.k,
            seed,
            cfg.max_iter,
            cfg.restarts,
            cfg.zscore
        ));
    }
    Ensemble::new(members, provenance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::adjusted_rand_index;

    fn blocks() -> (MultiBandImage, Segmentation) {
        // left half dark in both bands, right half bright
        let (w, h) = (8, 4);
        let mut b0 = Vec::new();
        let mut b1 = Vec::new();
        let mut gt = Vec::new();
        for _y in 0..h {
            for x in 0..w {
                let right = x >= w / 2;
                b0.push(if right { 200.0 } else { 10.0 });
                b1.push(if right { 50.0 } else { 120.0 });
                gt.push(u32::from(right));
            }
        }
        (MultiBandImage::new(w, h, vec![b0, b1]).unwrap(), Segmentation::from_labels(gt, w, h).unwrap())
    }

    #[test]
    fn separable_blocks_are_recovered() {
        let (img, gt) = blocks();
        for seed in 0..5 {
            let s = kmeans_segment(&img, 2, seed, 50).unwrap();
            assert_eq!(adjusted_rand_index(&s, &gt).unwrap(), 1.0);
        }
    }

    #[test]
    fn single_cluster() {
        let (img, _) = blocks();
        let s = kmeans_segment(&img, 1, 3, 10).unwrap();
        assert!(s.labels().iter().all(|&l| l == 0));
        assert_eq!(s.num_labels(), 1);
    }

    #[test]
    fn too_many_clusters_stay_dense() {
        let (img, _) = blocks();
        let s = kmeans_segment(&img, 5, 1, 10).unwrap();
        assert_eq!(s.num_labels(), 2);
        assert_eq!(s.populated_labels(), 2);
    }

    #[test]
    fn inertia_never_increases() {
        let pts: Vec<f64> = (0..200).map(|i| ((i * 37) % 101) as f64 + (i % 7) as f64 * 0.3).collect();
        for seed in 0..10 {
            let run = kmeans_features(&pts, 2, &KMeansConfig::new(4, seed)).unwrap();
            for w in run.inertia_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "{:?}", run.inertia_history);
            }
        }
    }

    #[test]
    fn identical_bands_give_identical_members() {
        let (img, _) = blocks();
        let b = img.band(0).to_vec();
        let three = MultiBandImage::new(8, 4, vec![b.clone(), b.clone(), b]).unwrap();
        let ens = band_ensemble(&three, 2, &[9]).unwrap();
        assert_eq!(ens.len(), 3);
        assert_eq!(ens.member(0), ens.member(1));
        assert_eq!(ens.member(1), ens.member(2));
    }

    #[test]
    fn argument_checks() {
        let (img, _) = blocks();
        assert!(kmeans_segment(&img, 0, 0, 10).is_err());
        assert!(kmeans_segment(&img, 2, 0, 0).is_err());
        assert!(band_ensemble(&img, 2, &[]).is_err());
    }
}
