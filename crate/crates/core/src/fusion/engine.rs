use alloc::vec;
use alloc::vec::Vec;

use super::{IterationRecord, Move};
use crate::constraints::{pairs, ConstraintSet};
use crate::contingency::{contingency, ContingencyTable};
use crate::error::Result;
use crate::segmentation::Segmentation;

/// Entries at or above this are not improving.
const IMPROVEMENT_EPS: f64 = 1e-9;
const UNCONSTRAINED: u32 = u32::MAX;

/// Per-component label histograms for the violation test.
struct Penalty {
    component: Vec<u32>,
    budget: usize,
    /// component x label counts of the consensus
    hist: Vec<i64>,
    /// component x label counts summed over cannot-linked components
    cl_hist: Vec<i64>,
    neighbors: Vec<Vec<usize>>,
}

impl Penalty {
    fn new(cons: &ConstraintSet, labels: &[u32], budget: usize) -> Self {
        let comps = cons.components();
        let mut component = vec![UNCONSTRAINED; labels.len()];
        let mut hist = vec![0i64; comps.len() * budget];
        for (ci, comp) in comps.iter().enumerate() {
            for &p in comp {
                component[p] = ci as u32;
                hist[ci * budget + labels[p] as usize] += 1;
            }
        }
        let neighbors: Vec<Vec<usize>> = (0..comps.len()).map(|c| cons.cannot_link_neighbors(c).to_vec()).collect();
        let mut cl_hist = vec![0i64; comps.len() * budget];
        for (a, ns) in neighbors.iter().enumerate() {
            for &b in ns {
                for l in 0..budget {
                    cl_hist[a * budget + l] += hist[b * budget + l];
                }
            }
        }
        Self { component, budget, hist, cl_hist, neighbors }
    }

    /// True when moving pixel `n` from `a` to `c` increases the number of
    /// violated constraint pairs that involve `n`.
    #[inline]
    fn forbids(&self, n: usize, a: usize, c: usize) -> bool {
        let comp = self.component[n];
        if comp == UNCONSTRAINED {
            return false;
        }
        let base = comp as usize * self.budget;
        let ml = (self.hist[base + a] - 1) - self.hist[base + c];
        let cl = self.cl_hist[base + c] - self.cl_hist[base + a];
        ml + cl > 0
    }

    fn apply(&mut self, n: usize, a: usize, c: usize) {
        let comp = self.component[n];
        if comp == UNCONSTRAINED {
            return;
        }
        let comp = comp as usize;
        self.hist[comp * self.budget + a] -= 1;
        self.hist[comp * self.budget + c] += 1;
        for &b in &self.neighbors[comp] {
            self.cl_hist[b * self.budget + a] -= 1;
            self.cl_hist[b * self.budget + c] += 1;
        }
    }
}

pub(super) struct Engine<'a> {
    members: &'a [Segmentation],
    labels: Vec<u32>,
    width: usize,
    height: usize,
    budget: usize,
    /// member (rows) x consensus (columns)
    tables: Vec<ContingencyTable>,
    /// `sdd(member_j, consensus)`
    distances: Vec<i64>,
    recency: Vec<f64>,
    penalty: Option<Penalty>,
    coef: Vec<f64>,
    acc: Vec<f64>,
}

impl<'a> Engine<'a> {
    pub(super) fn new(
        members: &'a [Segmentation],
        init: &Segmentation,
        constraints: Option<&ConstraintSet>,
    ) -> Result<Self> {
        let budget = init.num_labels() as usize;
        let mut tables = Vec::with_capacity(members.len());
        let mut distances = Vec::with_capacity(members.len());
        for m in members {
            let t = contingency(m, init)?;
            let n11: u64 = t.counts().iter().map(|&c| pairs(c)).sum();
            let own: u64 = t.row_sums().iter().map(|&c| pairs(c)).sum();
            let cons: u64 = t.col_sums().iter().map(|&c| pairs(c)).sum();
            distances.push((own + cons) as i64 - 2 * n11 as i64);
            tables.push(t);
        }
        let labels = init.labels().to_vec();
        let penalty = constraints.map(|c| Penalty::new(c, &labels, budget));
        Ok(Self {
            members,
            labels,
            width: init.width(),
            height: init.height(),
            budget,
            tables,
            distances,
            recency: vec![1.0; members.len()],
            penalty,
            coef: vec![0.0; members.len()],
            acc: vec![0.0; budget],
        })
    }

    /// Resets the selected member's coefficient and decays the others.
    pub(super) fn select(&mut self, member: usize, beta: f64) {
        for (j, r) in self.recency.iter_mut().enumerate() {
            *r = if j == member { 1.0 } else { *r * beta };
        }
    }

    /// Best `(entry, pixel, label)` over all candidate moves; ties go to the
    /// smallest pixel, then the smallest label.
    fn best_move(&mut self) -> (f64, usize, usize) {
        let budget = self.budget;
        let cols = self.tables[0].col_sums();
        let total: f64 = self.coef.iter().sum();
        let mut best = (f64::INFINITY, usize::MAX, usize::MAX);
        for n in 0..self.labels.len() {
            let a = self.labels[n] as usize;
            self.acc.iter_mut().for_each(|x| *x = 0.0);
            for ((m, t), &w) in self.members.iter().zip(&self.tables).zip(&self.coef) {
                if w == 0.0 {
                    continue;
                }
                let row = t.row(m.label(n) as usize);
                for (acc, &v) in self.acc.iter_mut().zip(row) {
                    *acc += w * v as f64;
                }
            }
            let col_a = cols[a] as f64;
            let acc_a = self.acc[a];
            for (c, (&col, &acc)) in cols.iter().zip(&self.acc).enumerate().take(budget) {
                if c == a {
                    continue;
                }
                let h = total * (col as f64 - col_a - 1.0) - 2.0 * (acc - acc_a);
                if h < best.0 {
                    if let Some(p) = &self.penalty {
                        if p.forbids(n, a, c) {
                            continue;
                        }
                    }
                    best = (h, n, c);
                }
            }
        }
        best
    }

    fn apply(&mut self, n: usize, c: usize) {
        let a = self.labels[n] as usize;
        for ((m, t), d) in self.members.iter().zip(&mut self.tables).zip(&mut self.distances) {
            let b = m.label(n) as usize;
            let cols = t.col_sums();
            *d += cols[c] as i64 - cols[a] as i64 - 1 - 2 * (t.get(b, c) as i64 - t.get(b, a) as i64);
            t.shift(b, a, c);
        }
        if let Some(p) = &mut self.penalty {
            p.apply(n, a, c);
        }
        self.labels[n] = c as u32;
    }

    /// One iteration: evaluate `[H]` under `weights`, apply the best move if
    /// it improves.
    pub(super) fn step(&mut self, t: usize, member: usize, weights: &[f64], lambda: f64) -> IterationRecord {
        let wmax = weights.iter().copied().fold(0.0, f64::max);
        for ((c, r), w) in self.coef.iter_mut().zip(&self.recency).zip(weights) {
            *c = if wmax > 0.0 { r * (w / wmax) } else { 0.0 };
        }
        let (h, n, c) = if self.budget > 1 { self.best_move() } else { (f64::INFINITY, usize::MAX, usize::MAX) };
        let accepted = if h < -IMPROVEMENT_EPS {
            let from = self.labels[n];
            self.apply(n, c);
            Some(Move { pixel: n, from, to: c as u32 })
        } else {
            None
        };
        let l1: f64 = weights.iter().map(|w| w.abs()).sum();
        let objective = self.distances.iter().zip(weights).map(|(&d, w)| w * d as f64).sum::<f64>() + lambda * l1;
        IterationRecord { t, member, best_entry: h, accepted, objective }
    }

    pub(super) fn into_labels(self) -> Vec<u32> {
        self.labels
    }

    pub(super) fn into_segmentation(self) -> Segmentation {
        let (w, h, budget) = (self.width, self.height, self.budget as u32);
        Segmentation::new(self.labels, w, h, budget).expect("moves stay inside the label budget")
    }
}
