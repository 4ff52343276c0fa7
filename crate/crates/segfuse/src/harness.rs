//! Evaluation tables, the (classes, beta) parameter search and the
//! train/test protocol.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use segfuse_core::fusion::LambdaRule;
use segfuse_core::kmeans::band_ensemble_with;
use segfuse_core::{
    adjusted_mutual_information, adjusted_rand_index, fuse, fuse_sssf, fuse_usf, rand_index, ConstraintSet, Ensemble,
    FusionConfig, FusionMode, KMeansConfig, MultiBandImage, Segmentation, WeightVector,
};

use crate::error::{Error, Result};
use crate::split::DatasetSplit;
use crate::synth::constraints_from_ground_truth;

/// Candidate consensus label budgets.
pub const CLASS_GRID: [usize; 9] = [2, 3, 4, 5, 6, 7, 8, 9, 10];
/// Candidate decay values.
pub const BETA_GRID: [f64; 10] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub ri: f64,
    pub ari: f64,
    pub ami: f64,
}

impl Scores {
    pub fn of(output: &Segmentation, truth: &Segmentation) -> Result<Self> {
        Ok(Self {
            ri: rand_index(output, truth)?,
            ari: adjusted_rand_index(output, truth)?,
            ami: adjusted_mutual_information(output, truth)?,
        })
    }

    pub fn mean(all: &[Scores]) -> Self {
        let n = all.len() as f64;
        Self {
            ri: all.iter().map(|s| s.ri).sum::<f64>() / n,
            ari: all.iter().map(|s| s.ari).sum::<f64>() / n,
            ami: all.iter().map(|s| s.ami).sum::<f64>() / n,
        }
    }

    fn get(&self, metric: usize) -> f64 {
        [self.ri, self.ari, self.ami][metric]
    }
}

const METRICS: [&str; 3] = ["RI", "ARI", "AMI"];

/// Metric rows by method columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalTable {
    pub methods: Vec<String>,
    pub scores: Vec<Scores>,
}

impl EvalTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric");
        for m in &self.methods {
            out.push(',');
            out.push_str(m);
        }
        out.push('\n');
        for (i, name) in METRICS.iter().enumerate() {
            out.push_str(name);
            for s in &self.scores {
                write!(out, ",{}", s.get(i)).expect("writing to a string");
            }
            out.push('\n');
        }
        out
    }
}

pub fn evaluate(outputs: &[(String, Segmentation)], truth: &Segmentation) -> Result<EvalTable> {
    let scores = outputs.iter().map(|(_, s)| Scores::of(s, truth)).collect::<Result<Vec<_>>>()?;
    Ok(EvalTable { methods: outputs.iter().map(|(n, _)| n.clone()).collect(), scores })
}

/// Settings shared by the search and the protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub fusion: FusionConfig,
    pub kmeans_max_iter: usize,
    pub kmeans_restarts: usize,
    pub zscore: bool,
    /// Fraction of training pixel pairs turned into constraints (SSSF only).
    pub constraint_fraction: f64,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            fusion: FusionConfig::default(),
            kmeans_max_iter: 100,
            kmeans_restarts: 10,
            zscore: false,
            constraint_fraction: 0.05,
        }
    }
}

/// One k-means member per band, all with `k` clusters.
pub fn per_band_ensemble(img: &MultiBandImage, k: usize, seeds: &[u64], s: &RunSettings) -> Result<Ensemble> {
    let cfg = KMeansConfig { k, seed: 0, max_iter: s.kmeans_max_iter, zscore: s.zscore, restarts: s.kmeans_restarts };
    Ok(band_ensemble_with(img, &cfg, seeds)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchPoint {
    pub classes: usize,
    pub beta: f64,
    pub fusion_seed: u64,
    pub scores: Scores,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchReport {
    /// Grid points in `(classes, beta)` order.
    pub points: Vec<SearchPoint>,
    pub best: SearchPoint,
}

impl SearchReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("classes,beta,seed,ri,ari,ami\n");
        for p in &self.points {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                p.classes, p.beta, p.fusion_seed, p.scores.ri, p.scores.ari, p.scores.ami
            )
            .expect("writing to a string");
        }
        out
    }
}

/// Grid search over consensus label budgets and decay values on training
/// data, keeping the ARI maximiser (smallest classes, then smallest beta on
/// ties). The k-means ensemble for a grid row uses `k = classes`. Every run
/// draws its seeds from `seed` before any work starts, so the report does
/// not depend on `jobs`.
pub fn param_search(
    img: &MultiBandImage,
    truth: &Segmentation,
    classes: &[usize],
    betas: &[f64],
    settings: &RunSettings,
    seed: u64,
    jobs: usize,
) -> Result<SearchReport> {
    if classes.is_empty() || betas.is_empty() {
        return Err(Error::Usage("parameter grid is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let member_seeds: Vec<Vec<u64>> =
        classes.iter().map(|_| (0..img.num_bands()).map(|_| rng.gen()).collect()).collect();
    let constraint_seed: u64 = rng.gen();
    let grid: Vec<(usize, f64, u64)> = classes
        .iter()
        .enumerate()
        .flat_map(|(i, _)| betas.iter().map(move |&b| (i, b)))
        .map(|(i, b)| (i, b, rng.gen()))
        .collect();

    let cons = match settings.fusion.mode {
        FusionMode::Sssf => constraints_from_ground_truth(truth, settings.constraint_fraction, constraint_seed)?,
        FusionMode::Usf => ConstraintSet::empty(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {jobs} worker threads: {e}")))?;
    let points = pool.install(|| -> Result<Vec<SearchPoint>> {
        let ensembles = classes
            .par_iter()
            .zip(&member_seeds)
            .map(|(&c, seeds)| per_band_ensemble(img, c, seeds, settings))
            .collect::<Result<Vec<_>>>()?;
        grid.par_iter()
            .map(|&(i, beta, fusion_seed)| {
                let cfg = FusionConfig {
                    beta,
                    seed: fusion_seed,
                    label_budget: Some(classes[i] as u32),
                    ..settings.fusion.clone()
                };
                let out = fuse(&ensembles[i], &cons, &cfg)?;
                Ok(SearchPoint {
                    classes: classes[i],
                    beta,
                    fusion_seed,
                    scores: Scores::of(&out.segmentation, truth)?,
                })
            })
            .collect()
    })?;
    let best = *points
        .iter()
        .reduce(|best, p| if p.scores.ari > best.scores.ari { p } else { best })
        .expect("grid is non-empty");
    Ok(SearchReport { points, best })
}

/// Scores of the base members and both fusion modes on one part of a split.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseReport {
    pub members: Vec<Scores>,
    pub average_base: Scores,
    pub usf: Scores,
    pub sssf: Scores,
    pub usf_output: Segmentation,
    pub sssf_output: Segmentation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolReport {
    pub train: PhaseReport,
    pub test: PhaseReport,
    /// Weights learned on the training part and reused on the test part.
    pub weights: Vec<f64>,
    pub sparse_weights: Vec<f64>,
    pub lambda: f64,
    pub must_link: usize,
    pub cannot_link: usize,
    pub solver_warnings: usize,
}

impl ProtocolReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("phase,metric,average_base,usf,sssf\n");
        for (phase, r) in [("train", &self.train), ("test", &self.test)] {
            for (i, m) in METRICS.iter().enumerate() {
                writeln!(out, "{phase},{m},{},{},{}", r.average_base.get(i), r.usf.get(i), r.sssf.get(i))
                    .expect("writing to a string");
            }
        }
        out
    }

    pub fn weights_csv(&self) -> String {
        weights_csv(&self.weights, &self.sparse_weights)
    }
}

pub fn weights_csv(weights: &[f64], sparse: &[f64]) -> String {
    let mut out = String::from("member,weight,sparse\n");
    for (i, (w, z)) in weights.iter().zip(sparse).enumerate() {
        writeln!(out, "{i},{w},{z}").expect("writing to a string");
    }
    out
}

/// Train/test protocol: per-band k-means ensembles with `k = classes` on
/// both parts; constraints sampled from the training ground truth; SSSF
/// learns weights and the L1 weight on training and reuses both, frozen and
/// without constraints, on test. USF runs on each part with the same seeds.
pub fn run_protocol(split: &DatasetSplit, classes: usize, settings: &RunSettings, seed: u64) -> Result<ProtocolReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bands = split.train.0.num_bands();
    let member_seeds: Vec<u64> = (0..bands).map(|_| rng.gen()).collect();
    let constraint_seed: u64 = rng.gen();
    let fusion_seed: u64 = rng.gen();

    let base = FusionConfig { seed: fusion_seed, label_budget: Some(classes as u32), ..settings.fusion.clone() };
    let usf_cfg = FusionConfig { mode: FusionMode::Usf, ..base.clone() };
    let sssf_train_cfg = FusionConfig { mode: FusionMode::Sssf, learn_weights: true, ..base.clone() };

    let (train_img, train_gt) = &split.train;
    let train_ens = per_band_ensemble(train_img, classes, &member_seeds, settings)?;
    let cons = constraints_from_ground_truth(train_gt, settings.constraint_fraction, constraint_seed)?;
    let sssf_train = fuse_sssf(&train_ens, &cons, &sssf_train_cfg)?;
    let usf_train = fuse_usf(&train_ens, &usf_cfg)?;
    let train = phase(&train_ens, train_gt, usf_train.segmentation, sssf_train.segmentation.clone())?;

    let (test_img, test_gt) = &split.test;
    let test_ens = per_band_ensemble(test_img, classes, &member_seeds, settings)?;
    let sssf_test_cfg = FusionConfig {
        mode: FusionMode::Sssf,
        learn_weights: false,
        initial_weights: Some(WeightVector::new(sssf_train.weights.clone())?),
        lambda: LambdaRule::Fixed(sssf_train.lambda),
        ..base
    };
    let sssf_test = fuse_sssf(&test_ens, &ConstraintSet::empty(), &sssf_test_cfg)?;
    let usf_test = fuse_usf(&test_ens, &usf_cfg)?;
    let test = phase(&test_ens, test_gt, usf_test.segmentation, sssf_test.segmentation)?;

    Ok(ProtocolReport {
        train,
        test,
        weights: sssf_train.weights,
        sparse_weights: sssf_train.sparse_weights,
        lambda: sssf_train.lambda,
        must_link: cons.declared_must_link().len(),
        cannot_link: cons.cannot_link().len(),
        solver_warnings: sssf_train.solver_warnings,
    })
}

fn phase(ens: &Ensemble, truth: &Segmentation, usf: Segmentation, sssf: Segmentation) -> Result<PhaseReport> {
    let members = ens.members().iter().map(|m| Scores::of(m, truth)).collect::<Result<Vec<_>>>()?;
    Ok(PhaseReport {
        average_base: Scores::mean(&members),
        members,
        usf: Scores::of(&usf, truth)?,
        sssf: Scores::of(&sssf, truth)?,
        usf_output: usf,
        sssf_output: sssf,
    })
}
