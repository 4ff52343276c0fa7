//! Rand index, adjusted Rand index and adjusted mutual information.
//!
//! ARI uses the permutation-model expectation of the pair index; AMI uses
//! the hypergeometric expected mutual information with max-entropy
//! normalisation. Logarithms are natural.

use alloc::vec::Vec;

use super::{pair_counts, PairCounts};
use crate::contingency::{contingency, ContingencyTable};
use crate::error::{Error, Result};
use crate::segmentation::Segmentation;

fn table_for(a: &Segmentation, b: &Segmentation) -> Result<ContingencyTable> {
    let t = contingency(a, b)?;
    if t.total() < 2 {
        return Err(Error::Degenerate("validity indices need at least two pixels"));
    }
    Ok(t)
}

fn identical(pc: &PairCounts) -> bool {
    pc.n10 == 0 && pc.n01 == 0
}

pub fn rand_index(a: &Segmentation, b: &Segmentation) -> Result<f64> {
    let pc = pair_counts(&table_for(a, b)?);
    Ok((pc.n11 + pc.n00) as f64 / pc.total() as f64)
}

pub fn adjusted_rand_index(a: &Segmentation, b: &Segmentation) -> Result<f64> {
    let pc = pair_counts(&table_for(a, b)?);
    if identical(&pc) {
        return Ok(1.0);
    }
    let total = pc.total() as u128;
    let first = pc.first_pairs() as u128;
    let second = pc.second_pairs() as u128;
    let expected = (first * second) as f64 / total as f64;
    let max_index = (first + second) as f64 / 2.0;
    let denom = max_index - expected;
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((pc.n11 as f64 - expected) / denom)
}

/// `ln k!` for `k = 0..=n`.
fn log_factorials(n: u64) -> Vec<f64> {
    let mut table = Vec::with_capacity(n as usize + 1);
    let mut acc = 0.0;
    table.push(0.0);
    for k in 1..=n {
        acc += libm::log(k as f64);
        table.push(acc);
    }
    table
}

fn entropy_of(sums: &[u64], total: u64) -> f64 {
    let ln_total = libm::log(total as f64);
    sums.iter().filter(|&&c| c > 0).map(|&c| (c as f64 / total as f64) * (ln_total - libm::log(c as f64))).sum()
}

/// Entropy of the row labelling of `t`.
pub fn entropy(t: &ContingencyTable) -> f64 {
    entropy_of(t.row_sums(), t.total())
}

pub fn mutual_information(t: &ContingencyTable) -> f64 {
    let n = t.total();
    let ln_n = libm::log(n as f64);
    t.nonzero()
        .map(|(r, c, v)| {
            let a = t.row_sums()[r] as f64;
            let b = t.col_sums()[c] as f64;
            (v as f64 / n as f64) * (ln_n + libm::log(v as f64) - libm::log(a) - libm::log(b))
        })
        .sum()
}

/// Expected mutual information under the hypergeometric model of random
/// labellings with the marginals of `t`.
fn expected_mutual_information(t: &ContingencyTable) -> f64 {
    let n = t.total();
    let lf = log_factorials(n);
    let ln_n = libm::log(n as f64);
    let rows: Vec<u64> = t.row_sums().iter().copied().filter(|&v| v > 0).collect();
    let cols: Vec<u64> = t.col_sums().iter().copied().filter(|&v| v > 0).collect();
    let mut emi = 0.0;
    for &a in &rows {
        for &b in &cols {
            let lo = (a + b).saturating_sub(n).max(1);
            let hi = a.min(b);
            let fixed = lf[a as usize] + lf[b as usize] + lf[(n - a) as usize] + lf[(n - b) as usize] - lf[n as usize];
            let ln_ab = libm::log(a as f64) + libm::log(b as f64);
            for nij in lo..=hi {
                let ln_prob = fixed
                    - lf[nij as usize]
                    - lf[(a - nij) as usize]
                    - lf[(b - nij) as usize]
                    - lf[(n + nij - a - b) as usize];
                let ln_ratio = ln_n + libm::log(nij as f64) - ln_ab;
                emi += (nij as f64 / n as f64) * ln_ratio * libm::exp(ln_prob);
            }
        }
    }
    emi
}

pub fn adjusted_mutual_information(a: &Segmentation, b: &Segmentation) -> Result<f64> {
    let t = table_for(a, b)?;
    if identical(&pair_counts(&t)) {
        return Ok(1.0);
    }
    let mi = mutual_information(&t);
    let emi = expected_mutual_information(&t);
    let h = entropy_of(t.row_sums(), t.total()).max(entropy_of(t.col_sums(), t.total()));
    let denom = h - emi;
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((mi - emi) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(labels: &[u32]) -> Segmentation {
        Segmentation::from_row(labels.to_vec()).unwrap()
    }

    #[test]
    fn identity_scores_one() {
        let a = seg(&[0, 1, 2, 2, 1, 0, 3]);
        assert_eq!(rand_index(&a, &a).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&a, &a).unwrap(), 1.0);
        assert_eq!(adjusted_mutual_information(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn rand_index_small() {
        assert_eq!(rand_index(&seg(&[0, 0, 1, 1]), &seg(&[0, 1, 1, 1])).unwrap(), 0.5);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(rand_index(&seg(&[0]), &seg(&[0])).is_err());
        let one = seg(&[0, 0, 0, 0]);
        assert_eq!(adjusted_rand_index(&one, &one).unwrap(), 1.0);
        assert_eq!(adjusted_mutual_information(&one, &one).unwrap(), 1.0);
    }

    #[test]
    fn single_segment_against_split() {
        let one = seg(&[0, 0, 0, 0]);
        let two = seg(&[0, 0, 1, 1]);
        assert_eq!(adjusted_rand_index(&one, &two).unwrap(), 0.0);
        assert!(adjusted_mutual_information(&one, &two).unwrap().abs() < 1e-12);
    }

    // Reference values from the standard definitions, evaluated by hand:
    // a = [0,0,0,1,1,1], b = [0,0,1,1,2,2].
    #[test]
    fn known_ari_value() {
        let a = seg(&[0, 0, 0, 1, 1, 1]);
        let b = seg(&[0, 0, 1, 1, 2, 2]);
        // n11 = 2, rows = 6, cols = 3, total = 15, E = 18/15 = 1.2,
        // max = 4.5 -> (2 - 1.2) / (4.5 - 1.2)
        let expected = 0.8 / 3.3;
        assert!((adjusted_rand_index(&a, &b).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn mutual_information_of_identity_is_entropy() {
        let a = seg(&[0, 0, 1, 2, 2, 2]);
        let t = contingency(&a, &a).unwrap();
        assert!((mutual_information(&t) - entropy(&t)).abs() < 1e-15);
    }
}
