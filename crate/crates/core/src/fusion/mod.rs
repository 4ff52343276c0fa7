//! Consensus fusion by best single-pixel moves.
//!
//! Both modes share one engine. The consensus `s` starts from the best-of-K
//! member and is improved one pixel relabelling at a time. For a move of
//! pixel `n` to label `c` the change of `sdd(s_j, s)` is exact and `O(1)`
//! from the contingency table of member `j` against `s`, so the move matrix
//! `[H]` is evaluated from maintained tables instead of being stored.
//!
//! `[H]` is a decayed combination of member terms: every member carries a
//! coefficient that is reset to 1 when the member is selected and multiplied
//! by `beta` at every step it is not. With `beta = 1` `[H]` is the exact
//! change of the (weighted) objective; with `beta = 0` only the member
//! selected last is optimised.
//!
//! The semi-supervised mode additionally
//!
//! * learns member weights every step by solving the L1 weight problem on
//!   the divergences between the clamped consensus connectivity and each
//!   member,
//! * scales every member term by its normalised weight,
//! * gives an infinite entry to moves that would increase the number of
//!   violated constraint pairs, and
//! * repairs any remaining violation after the loop, so the output satisfies
//!   every must-link and cannot-link pair.

mod engine;
mod repair;

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::connectivity::SoftConnectivity;
use crate::constraints::ConstraintSet;
use crate::contingency::ContingencyTable;
use crate::error::{Error, Result};
use crate::metrics::sdd;
use crate::segmentation::{Ensemble, Segmentation};
use crate::weights::{solve_l1, SolverConfig, WeightVector};

use engine::Engine;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FusionMode {
    #[default]
    Usf,
    Sssf,
}

/// How the L1 weight is chosen at every weight update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaRule {
    /// `0.5 * max_i d_i` of the current distance vector.
    Auto,
    /// `0.5 * lambda_max` for a supplied `lambda_max`.
    HalfOf(f64),
    Fixed(f64),
}

impl LambdaRule {
    pub fn resolve(&self, distances: &[f64]) -> f64 {
        match *self {
            LambdaRule::Auto => 0.5 * distances.iter().copied().fold(0.0, f64::max),
            LambdaRule::HalfOf(max) => 0.5 * max,
            LambdaRule::Fixed(l) => l,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionConfig {
    pub mode: FusionMode,
    /// Decay of stale member terms, in `[0, 1]`.
    pub beta: f64,
    /// Outer iteration budget `T`; iterations run for `t = 2..=T`.
    pub max_iter: usize,
    /// Consensus label budget; `None` uses the largest member label count.
    pub label_budget: Option<u32>,
    pub seed: u64,
    pub solver: SolverConfig,
    pub lambda: LambdaRule,
    /// Learn weights every step (semi-supervised mode only). When off, the
    /// initial weights stay fixed.
    pub learn_weights: bool,
    /// Starting weights; uniform when absent.
    pub initial_weights: Option<WeightVector>,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            mode: FusionMode::Usf,
            beta: 0.9,
            max_iter: 1000,
            label_budget: None,
            seed: 0,
            solver: SolverConfig::default(),
            lambda: LambdaRule::Auto,
            learn_weights: true,
            initial_weights: None,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidParameter("beta must lie in [0, 1]"));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("T must be at least 1"));
        }
        if self.label_budget == Some(0) {
            return Err(Error::InvalidParameter("label budget must be at least 1"));
        }
        self.solver.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Move {
    pub pixel: usize,
    pub from: u32,
    pub to: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub t: usize,
    /// Member selected at this step.
    pub member: usize,
    /// Smallest finite `[H]` entry over candidate moves (`+inf` if none).
    pub best_entry: f64,
    pub accepted: Option<Move>,
    /// Weighted objective `sum_i w_i sdd(s_i, s)` after the step, plus the
    /// L1 term in semi-supervised mode.
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionOutcome {
    pub segmentation: Segmentation,
    /// Final weights. All ones in unsupervised mode (unnormalised sum).
    pub weights: Vec<f64>,
    /// Split variable of the last L1 solve: the sparsity pattern.
    pub sparse_weights: Vec<f64>,
    pub lambda: f64,
    pub log: Vec<IterationRecord>,
    /// True when a full pass without improving moves ended the run.
    pub terminated_early: bool,
    /// L1 solves that hit the iteration cap.
    pub solver_warnings: usize,
    /// Pixels relabelled by the final constraint repair.
    pub repaired_pixels: usize,
}

impl FusionOutcome {
    pub fn accepted_moves(&self) -> usize {
        self.log.iter().filter(|r| r.accepted.is_some()).count()
    }
}

/// Index of the member minimising `sum_j w_j sdd(s_i, s_j)`, lowest index on
/// ties. `None` weights means all ones.
pub fn bok_index(ens: &Ensemble, weights: Option<&[f64]>) -> Result<usize> {
    let k = ens.len();
    let mut dist = alloc::vec![0u64; k * k];
    for i in 0..k {
        for j in i + 1..k {
            let d = sdd(ens.member(i), ens.member(j))?;
            dist[i * k + j] = d;
            dist[j * k + i] = d;
        }
    }
    let best = match weights {
        None => {
            (0..k).min_by_key(|&i| (dist[i * k..(i + 1) * k].iter().sum::<u64>(), i)).expect("ensembles are non-empty")
        }
        Some(w) => {
            let mut best = (f64::INFINITY, 0);
            for i in 0..k {
                let cost: f64 = (0..k).map(|j| w[j] * dist[i * k + j] as f64).sum();
                if cost < best.0 {
                    best = (cost, i);
                }
            }
            best.1
        }
    };
    Ok(best)
}

/// The best-of-K member: the one closest to all others under `sdd`.
pub fn bok_init(ens: &Ensemble) -> Segmentation {
    let i = bok_index(ens, None).expect("members share one grid");
    ens.member(i).clone()
}

/// Change of `sdd(reference, current)` when pixel `n` of `current` is
/// relabelled `c`, where `t = contingency(reference, current)`.
pub fn move_delta(
    reference: &Segmentation,
    current: &Segmentation,
    t: &ContingencyTable,
    n: usize,
    c: u32,
) -> Result<i64> {
    reference.check_same_len(current)?;
    if t.total() as usize != current.len()
        || t.rows() != reference.num_labels() as usize
        || t.cols() != current.num_labels() as usize
    {
        return Err(Error::InvalidParameter("contingency table does not match the segmentations"));
    }
    if n >= current.len() {
        return Err(Error::PixelOutOfRange { index: n, len: current.len() });
    }
    if c >= current.num_labels() {
        return Err(Error::LabelOutOfRange { index: n, label: c, num_labels: current.num_labels() });
    }
    let a = current.label(n) as usize;
    let b = reference.label(n) as usize;
    let c = c as usize;
    if a == c {
        return Ok(0);
    }
    let cols = t.col_sums();
    Ok(cols[c] as i64 - cols[a] as i64 - 1 - 2 * (t.get(b, c) as i64 - t.get(b, a) as i64))
}

/// Pseudo-random member order, reshuffled after every full pass.
struct MemberSchedule {
    rng: ChaCha8Rng,
    order: Vec<usize>,
    pos: usize,
}

impl MemberSchedule {
    fn new(k: usize, seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), order: (0..k).collect(), pos: k }
    }

    fn next(&mut self) -> usize {
        if self.pos == self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        self.pos += 1;
        self.order[self.pos - 1]
    }
}

fn label_budget(ens: &Ensemble, cfg: &FusionConfig) -> u32 {
    cfg.label_budget.unwrap_or_else(|| ens.max_labels()).max(1)
}

/// Unsupervised fusion: every member has weight one.
pub fn fuse_usf(ens: &Ensemble, cfg: &FusionConfig) -> Result<FusionOutcome> {
    cfg.validate()?;
    let k = ens.len();
    let ones = alloc::vec![1.0; k];
    let init = ens.member(bok_index(ens, None)?).with_label_budget(label_budget(ens, cfg))?;
    let mut engine = Engine::new(ens.members(), &init, None)?;
    let mut schedule = MemberSchedule::new(k, cfg.seed);
    let mut log = Vec::new();
    let mut idle = 0;
    let mut terminated_early = false;
    for t in 2..=cfg.max_iter {
        let member = schedule.next();
        engine.select(member, cfg.beta);
        let rec = engine.step(t, member, &ones, 0.0);
        idle = if rec.accepted.is_some() { 0 } else { idle + 1 };
        log.push(rec);
        if idle >= k {
            terminated_early = true;
            break;
        }
    }
    Ok(FusionOutcome {
        segmentation: engine.into_segmentation(),
        weights: ones.clone(),
        sparse_weights: ones,
        lambda: 0.0,
        log,
        terminated_early,
        solver_warnings: 0,
        repaired_pixels: 0,
    })
}

/// Semi-supervised fusion with constraint clamping and weight learning.
pub fn fuse_sssf(ens: &Ensemble, cons: &ConstraintSet, cfg: &FusionConfig) -> Result<FusionOutcome> {
    cfg.validate()?;
    let k = ens.len();
    cons.check_pixels(ens.pixel_count())?;
    let mut weights = match &cfg.initial_weights {
        Some(w) if w.len() != k => return Err(Error::DimensionMismatch { expected: k, found: w.len() }),
        Some(w) => w.as_slice().to_vec(),
        None => WeightVector::uniform(k).into_inner(),
    };
    let mut sparse = weights.clone();

    let init = ens.member(bok_index(ens, Some(&weights))?).with_label_budget(label_budget(ens, cfg))?;
    let constrained = if cons.is_empty() { None } else { Some(cons) };
    let mut engine = Engine::new(ens.members(), &init, constrained)?;
    let mut soft = if cfg.learn_weights { Some(SoftConnectivity::new(ens.members(), cons)?) } else { None };

    let mut schedule = MemberSchedule::new(k, cfg.seed);
    let mut lambda = match cfg.lambda {
        LambdaRule::Auto => 0.0,
        rule => rule.resolve(&[]),
    };
    let mut warnings = 0;
    let mut log = Vec::new();
    let mut idle = 0;
    let mut terminated_early = false;
    for t in 2..=cfg.max_iter {
        let member = schedule.next();
        if let Some(soft) = soft.as_mut() {
            soft.set_weights(&weights)?;
            let d = soft.member_distances();
            lambda = cfg.lambda.resolve(&d);
            let solver = SolverConfig { lambda, ..cfg.solver };
            let sol = solve_l1(&d, &solver)?;
            if !sol.converged {
                warnings += 1;
            }
            weights = sol.weights.into_inner();
            sparse = sol.sparse;
        }
        engine.select(member, cfg.beta);
        let rec = engine.step(t, member, &weights, lambda);
        idle = if rec.accepted.is_some() { 0 } else { idle + 1 };
        log.push(rec);
        if idle >= k {
            terminated_early = true;
            break;
        }
    }

    let mut labels = engine.into_labels();
    let budget = label_budget(ens, cfg);
    let (repaired_pixels, used) = repair::repair(&mut labels, budget, cons);
    let segmentation = Segmentation::new(labels, ens.width(), ens.height(), used)?;
    Ok(FusionOutcome {
        segmentation,
        weights,
        sparse_weights: sparse,
        lambda,
        log,
        terminated_early,
        solver_warnings: warnings,
        repaired_pixels,
    })
}

/// Dispatches on `cfg.mode`; the unsupervised mode ignores `cons`.
pub fn fuse(ens: &Ensemble, cons: &ConstraintSet, cfg: &FusionConfig) -> Result<FusionOutcome> {
    match cfg.mode {
        FusionMode::Usf => fuse_usf(ens, cfg),
        FusionMode::Sssf => fuse_sssf(ens, cons, cfg),
    }
}
