//! Synthetic multi-band benchmark images and constraint sampling from
//! ground truth.
//!
//! Ground truth is a Voronoi partition of the grid around `classes` random
//! sites. Every band gives each class a mean intensity: classes are put in a
//! random order per band and spaced `gap * noise_sigma` apart, with `gap`
//! drawn per band from `separation`. Gaussian noise is added per pixel.

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use segfuse_core::{close_constraints, ConstraintSet, MultiBandImage, RawConstraints, Segmentation};

use crate::error::{Error, Result};

/// Intensity of the lowest class mean. Keeps noisy values positive for
/// 16-bit graymap output.
pub const BASE_INTENSITY: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    pub classes: usize,
    pub bands: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    /// Range of the per-band gap between neighbouring class means, in units
    /// of `noise_sigma` (in intensity units when `noise_sigma` is 0).
    pub separation: (f64, f64),
}

impl SynthSpec {
    pub fn new(width: usize, height: usize, classes: usize, bands: usize, noise_sigma: f64, seed: u64) -> Self {
        Self { width, height, classes, bands, noise_sigma, seed, separation: (3.0, 6.0) }
    }
}

pub fn generate_synthetic(spec: &SynthSpec) -> Result<(MultiBandImage, Segmentation)> {
    let n = spec.width * spec.height;
    if spec.width == 0 || spec.height == 0 {
        return Err(Error::Usage("image must have at least one pixel".into()));
    }
    if spec.classes < 2 || spec.classes > n {
        return Err(Error::Usage(format!("need 2 <= classes <= {n}, got {}", spec.classes)));
    }
    if spec.bands == 0 {
        return Err(Error::Usage("need at least one band".into()));
    }
    if !(spec.noise_sigma >= 0.0 && spec.noise_sigma.is_finite()) {
        return Err(Error::Usage("noise sigma must be finite and non-negative".into()));
    }
    let (lo, hi) = spec.separation;
    if !(3.0 <= lo && lo <= hi && hi.is_finite()) {
        return Err(Error::Usage("separation range must satisfy 3 <= min <= max".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sites: Vec<(f64, f64)> = sample(&mut rng, n, spec.classes)
        .into_iter()
        .map(|p| ((p % spec.width) as f64, (p / spec.width) as f64))
        .collect();
    let truth: Vec<u32> = (0..n)
        .map(|p| {
            let (x, y) = ((p % spec.width) as f64, (p / spec.width) as f64);
            let mut best = (f64::INFINITY, 0);
            for (c, &(sx, sy)) in sites.iter().enumerate() {
                let d = (x - sx) * (x - sx) + (y - sy) * (y - sy);
                if d < best.0 {
                    best = (d, c);
                }
            }
            best.1 as u32
        })
        .collect();

    let unit = if spec.noise_sigma > 0.0 { spec.noise_sigma } else { 1.0 };
    let mut means = Vec::with_capacity(spec.bands);
    for _ in 0..spec.bands {
        let gap = unit * if hi > lo { rng.gen_range(lo..=hi) } else { lo };
        let mut order: Vec<usize> = (0..spec.classes).collect();
        order.shuffle(&mut rng);
        let mut m = vec![0.0; spec.classes];
        for (rank, &c) in order.iter().enumerate() {
            m[c] = BASE_INTENSITY + rank as f64 * gap;
        }
        means.push(m);
    }
    let noise = Normal::new(0.0, spec.noise_sigma).expect("sigma checked above");
    let bands = means
        .iter()
        .map(|m| {
            truth
                .iter()
                .map(|&c| {
                    let v = m[c as usize];
                    if spec.noise_sigma > 0.0 {
                        v + noise.sample(&mut rng)
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect();
    let img = MultiBandImage::new(spec.width, spec.height, bands)?;
    let gt = Segmentation::new(truth, spec.width, spec.height, spec.classes as u32)?;
    Ok((img, gt))
}

/// `(m, l)` with `m < l` for the `k`-th unordered pair of `0..n` in
/// lexicographic order.
pub fn unrank_pair(k: u64, n: u64) -> (usize, usize) {
    // pairs before row m: m (2n - m - 1) / 2
    let before = |m: u64| m * (2 * n - m - 1) / 2;
    let nf = n as f64;
    let disc = (2.0 * nf - 1.0) * (2.0 * nf - 1.0) - 8.0 * k as f64;
    let mut m = (((2.0 * nf - 1.0) - disc.max(0.0).sqrt()) / 2.0).floor().max(0.0) as u64;
    m = m.min(n.saturating_sub(2));
    while m > 0 && before(m) > k {
        m -= 1;
    }
    while m + 1 < n - 1 && before(m + 1) <= k {
        m += 1;
    }
    let l = m + 1 + (k - before(m));
    (m as usize, l as usize)
}

/// Samples `round(fraction * N(N-1)/2)` distinct pixel pairs uniformly;
/// same-label pairs become must-links and the rest cannot-links.
pub fn constraints_from_ground_truth(gt: &Segmentation, fraction: f64, seed: u64) -> Result<ConstraintSet> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Usage(format!("constraint fraction must lie in (0, 1], got {fraction}")));
    }
    let n = gt.len() as u64;
    let total = n * n.saturating_sub(1) / 2;
    let count = ((fraction * total as f64).round() as u64).min(total);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw = RawConstraints::new();
    for k in sample(&mut rng, total as usize, count as usize).into_iter() {
        let (m, l) = unrank_pair(k as u64, n);
        if gt.label(m) == gt.label(l) {
            raw.must_link.push((m, l));
        } else {
            raw.cannot_link.push((m, l));
        }
    }
    Ok(close_constraints(&raw)?)
}
