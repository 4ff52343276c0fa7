//! Per-segmentation weights on the probability simplex.
//!
//! Two subproblems are solved here for a vector `d` of member distances:
//!
//! * the ridge form `min d·w + lambda_q |w|^2`, solved in closed form by a
//!   sorted-threshold simplex projection;
//! * the lasso form `min d·w + lambda |w|_1`, solved by ADMM on the split
//!   `w = z`, with the simplex indicator on `w` and soft-thresholding on `z`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Feasibility tolerance on the simplex sum.
pub const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Wraps `w`, checking nonnegativity and unit sum within [`SIMPLEX_TOL`].
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidParameter("weight vector must be non-empty"));
        }
        if !is_feasible(&w, SIMPLEX_TOL) {
            return Err(Error::InvalidParameter("weights must be nonnegative and sum to one"));
        }
        Ok(Self(w))
    }

    pub fn uniform(k: usize) -> Self {
        assert!(k > 0, "uniform weights need at least one member");
        Self(vec![1.0 / k as f64; k])
    }

    pub fn vertex(k: usize, i: usize) -> Self {
        let mut w = vec![0.0; k];
        w[i] = 1.0;
        Self(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Number of strictly positive weights.
    pub fn support(&self) -> usize {
        self.0.iter().filter(|&&x| x > 0.0).count()
    }
}

impl core::ops::Index<usize> for WeightVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

pub fn is_feasible(w: &[f64], tol: f64) -> bool {
    w.iter().all(|&x| x.is_finite() && x >= 0.0) && (w.iter().sum::<f64>() - 1.0).abs() <= tol
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// L1 weight (lasso form).
    pub lambda: f64,
    /// L2 weight (ridge form).
    pub lambda_q: f64,
    /// ADMM penalty.
    pub penalty: f64,
    pub max_iter: usize,
    pub tol_primal: f64,
    pub tol_dual: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { lambda: 0.0, lambda_q: 1.0, penalty: 1.0, max_iter: 1000, tol_primal: 1e-6, tol_dual: 1e-6 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.penalty.is_nan() || self.penalty <= 0.0 {
            return Err(Error::InvalidParameter("ADMM penalty must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be at least 1"));
        }
        if !(self.tol_primal > 0.0 && self.tol_dual > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive"));
        }
        if !self.lambda.is_finite() || !self.lambda_q.is_finite() {
            return Err(Error::InvalidParameter("regularisation weights must be finite"));
        }
        Ok(())
    }
}

/// Euclidean projection onto `{w >= 0, sum w = 1}`.
///
/// Panics on an empty input.
pub fn simplex_project(v: &[f64]) -> WeightVector {
    assert!(!v.is_empty(), "cannot project an empty vector");
    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut threshold = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if u - t > 0.0 {
            threshold = t;
        } else {
            break;
        }
    }
    let mut w: Vec<f64> = v.iter().map(|&x| (x - threshold).max(0.0)).collect();
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= sum);
    WeightVector(w)
}

fn check_distances(d: &[f64]) -> Result<()> {
    if d.is_empty() {
        return Err(Error::InvalidParameter("distance vector must be non-empty"));
    }
    if d.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("distances must be finite"));
    }
    Ok(())
}

/// Uniform weights over the minimisers of `d`.
fn argmin_face(d: &[f64]) -> WeightVector {
    let min = d.iter().copied().fold(f64::INFINITY, f64::min);
    let ties = d.iter().filter(|&&x| x == min).count() as f64;
    WeightVector(d.iter().map(|&x| if x == min { 1.0 / ties } else { 0.0 }).collect())
}

/// `argmin_w d·w + lambda_q |w|^2` over the simplex.
///
/// The minimiser is the projection of `-d / (2 lambda_q)`. A nonpositive
/// `lambda_q` is treated as the `lambda_q -> 0+` limit: uniform weight over
/// the smallest distances.
pub fn solve_quadratic(d: &[f64], cfg: &SolverConfig) -> Result<WeightVector> {
    check_distances(d)?;
    if cfg.lambda_q.is_nan() || cfg.lambda_q <= 0.0 {
        return Ok(argmin_face(d));
    }
    let scaled: Vec<f64> = d.iter().map(|&x| -x / (2.0 * cfg.lambda_q)).collect();
    Ok(simplex_project(&scaled))
}

pub fn quadratic_objective(d: &[f64], w: &[f64], lambda_q: f64) -> f64 {
    dot(d, w) + lambda_q * w.iter().map(|x| x * x).sum::<f64>()
}

pub fn l1_objective(d: &[f64], w: &[f64], lambda: f64) -> f64 {
    dot(d, w) + lambda * w.iter().map(|x| x.abs()).sum::<f64>()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    libm::sqrt(v.map(|x| x * x).sum())
}

#[inline]
fn soft_threshold(x: f64, k: f64) -> f64 {
    if x > k {
        x - k
    } else if x < -k {
        x + k
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct L1Solution {
    /// Simplex-feasible weights.
    pub weights: WeightVector,
    /// Soft-thresholded split variable; its zero pattern is the sparsity
    /// pattern selected by the L1 term.
    pub sparse: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
    /// Primal plus dual residual per iteration, on the normalised problem.
    pub residuals: Vec<f64>,
}

/// `argmin_w d·w + lambda |w|_1` over the simplex, by ADMM.
///
/// The problem is solved after dividing `d` and `lambda` by `max |d|`, which
/// leaves the minimiser unchanged and keeps the penalty on a fixed scale.
/// When the residuals do not drop below the tolerances within `max_iter`
/// iterations the best feasible iterate is returned with `converged = false`.
pub fn solve_l1(d: &[f64], cfg: &SolverConfig) -> Result<L1Solution> {
    check_distances(d)?;
    cfg.validate()?;
    let k = d.len();
    let scale = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let dn: Vec<f64> = d.iter().map(|x| x / scale).collect();
    let kappa = (cfg.lambda / scale) / cfg.penalty;

    let mut z = vec![1.0 / k as f64; k];
    let mut u = vec![0.0; k];
    let mut arg = vec![0.0; k];
    let mut w = z.clone();
    let mut best = (f64::INFINITY, w.clone());
    let mut residuals = Vec::new();
    let (mut primal, mut dual) = (f64::INFINITY, f64::INFINITY);
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=cfg.max_iter {
        iterations = it;
        for i in 0..k {
            arg[i] = z[i] - u[i] - dn[i] / cfg.penalty;
        }
        w = simplex_project(&arg).into_inner();
        let mut dz = 0.0;
        for i in 0..k {
            let zi = soft_threshold(w[i] + u[i], kappa);
            dz += (zi - z[i]) * (zi - z[i]);
            z[i] = zi;
            u[i] += w[i] - z[i];
        }
        primal = norm(w.iter().zip(&z).map(|(a, b)| a - b));
        dual = cfg.penalty * libm::sqrt(dz);
        residuals.push(primal + dual);

        let obj = dot(&dn, &w);
        if obj < best.0 {
            best = (obj, w.clone());
        }
        if primal < cfg.tol_primal && dual < cfg.tol_dual {
            converged = true;
            break;
        }
    }

    let weights = if converged { w } else { best.1 };
    debug_assert!(is_feasible(&weights, SIMPLEX_TOL));
    Ok(L1Solution {
        objective: l1_objective(d, &weights, cfg.lambda),
        weights: WeightVector(weights),
        sparse: z,
        iterations,
        primal_residual: primal,
        dual_residual: dual,
        converged,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn projection_fixes_simplex_points() {
        let v = [0.2, 0.5, 0.3];
        assert!(close(simplex_project(&v).as_slice(), &v, 1e-15));
    }

    #[test]
    fn projection_of_outside_points() {
        assert_eq!(simplex_project(&[2.0, 0.0, 0.0]).as_slice(), &[1.0, 0.0, 0.0]);
        let w = simplex_project(&[1.0, 1.0]);
        assert!(close(w.as_slice(), &[0.5, 0.5], 1e-15));
        let w = simplex_project(&[-3.0, -3.0, -3.0]);
        assert!(close(w.as_slice(), &[1.0 / 3.0; 3], 1e-15));
    }

    #[test]
    fn quadratic_symmetric_distances_give_uniform() {
        let cfg = SolverConfig::default();
        for c in [0.0, 1.0, 17.5] {
            let w = solve_quadratic(&[c, c, c], &cfg).unwrap();
            assert!(close(w.as_slice(), &[1.0 / 3.0; 3], 1e-12));
        }
    }

    #[test]
    fn quadratic_small_ridge_goes_to_vertex() {
        let cfg = SolverConfig { lambda_q: 1e-6, ..SolverConfig::default() };
        let w = solve_quadratic(&[0.0, 10.0, 10.0], &cfg).unwrap();
        assert!(close(w.as_slice(), &[1.0, 0.0, 0.0], 1e-12));
        let limit = SolverConfig { lambda_q: 0.0, ..cfg };
        let w = solve_quadratic(&[0.0, 10.0, 0.0], &limit).unwrap();
        assert_eq!(w.as_slice(), &[0.5, 0.0, 0.5]);
    }

    #[test]
    fn l1_symmetric_and_vertex_cases() {
        for lambda in [0.0, 0.3, 5.0, 100.0] {
            let cfg = SolverConfig { lambda, ..SolverConfig::default() };
            let sol = solve_l1(&[2.0, 2.0, 2.0], &cfg).unwrap();
            assert!(close(sol.weights.as_slice(), &[1.0 / 3.0; 3], 1e-6), "{sol:?}");
            let sol = solve_l1(&[0.0, 10.0, 10.0], &cfg).unwrap();
            assert!(close(sol.weights.as_slice(), &[1.0, 0.0, 0.0], 1e-6), "{sol:?}");
            assert!(is_feasible(sol.weights.as_slice(), SIMPLEX_TOL));
        }
    }

    #[test]
    fn l1_reports_non_convergence() {
        let cfg = SolverConfig { lambda: 0.5, max_iter: 1, ..SolverConfig::default() };
        let sol = solve_l1(&[1.0, 2.0, 3.0, 0.5], &cfg).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.iterations, 1);
        assert!(is_feasible(sol.weights.as_slice(), SIMPLEX_TOL));
    }

    #[test]
    fn config_validation() {
        let bad = SolverConfig { penalty: 0.0, ..SolverConfig::default() };
        assert!(solve_l1(&[1.0], &bad).is_err());
        assert!(solve_l1(&[], &SolverConfig::default()).is_err());
        assert!(solve_quadratic(&[f64::NAN], &SolverConfig::default()).is_err());
    }

    #[test]
    fn weight_vector_checks() {
        assert!(WeightVector::new(vec![0.5, 0.6]).is_err());
        assert!(WeightVector::new(vec![-0.1, 1.1]).is_err());
        assert!(WeightVector::new(vec![0.25, 0.75]).is_ok());
        assert_eq!(WeightVector::vertex(3, 1).support(), 1);
    }
}
