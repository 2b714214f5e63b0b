use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How estimated angles are matched to true angles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pairing {
    /// Sort both lists and pair by rank.
    Sorted,
    /// Minimum-cost assignment over all permutations (K <= 8).
    Optimal,
}

/// `(1/K) sum_k (est_k - truth_k)^2` in degrees squared, rank-paired.
pub fn doa_mse(estimated: &[f64], truth: &[f64]) -> Result<f64> {
    doa_mse_with(estimated, truth, Pairing::Sorted)
}

pub fn doa_mse_with(estimated: &[f64], truth: &[f64], pairing: Pairing) -> Result<f64> {
    if estimated.len() != truth.len() || truth.is_empty() {
        return Err(Error::invalid(format!(
            "{} estimates for {} true angles",
            estimated.len(),
            truth.len()
        )));
    }
    let k = truth.len() as f64;
    let mut est = estimated.to_vec();
    let mut tru = truth.to_vec();
    est.sort_by(f64::total_cmp);
    tru.sort_by(f64::total_cmp);
    let cost = |perm: &[usize]| -> f64 {
        perm.iter()
            .enumerate()
            .map(|(i, &j)| (est[j] - tru[i]).powi(2))
            .sum::<f64>()
    };
    match pairing {
        Pairing::Sorted => Ok(cost(&(0..est.len()).collect::<Vec<_>>()) / k),
        Pairing::Optimal => {
            if est.len() > 8 {
                return Err(Error::invalid("optimal pairing supports at most 8 sources"));
            }
            let mut perm: Vec<usize> = (0..est.len()).collect();
            let mut best = f64::INFINITY;
            permute(&mut perm, 0, &mut |p| best = best.min(cost(p)));
            Ok(best / k)
        }
    }
}

fn permute(p: &mut Vec<usize>, start: usize, visit: &mut dyn FnMut(&[usize])) {
    if start == p.len() {
        visit(p);
        return;
    }
    for i in start..p.len() {
        p.swap(start, i);
        permute(p, start + 1, visit);
        p.swap(start, i);
    }
}
