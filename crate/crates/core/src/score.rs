//! Factor-matching similarity between an estimate and a known truth.

use crate::error::{GcpError, Result};
use crate::tensor::KruskalModel;

/// Score at or above which a truth counts as recovered.
pub const RECOVERY_THRESHOLD: f64 = 0.9;

/// Largest rank scored by exhaustive permutation search.
pub const EXHAUSTIVE_MAX_RANK: usize = 8;

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na * nb)
}

/// (1/r) max_π Σ_j Π_k cos(a_j^(k), â_π(j)^(k)).
///
/// Exhaustive over permutations up to rank 8; above that, pairs are matched
/// greedily, best remaining pair first.
pub fn cosine_similarity_score(estimate: &KruskalModel, truth: &KruskalModel) -> Result<f64> {
    if estimate.shape() != truth.shape() {
        return Err(GcpError::ShapeMismatch(format!(
            "estimate is {} but truth is {}",
            estimate.shape(),
            truth.shape()
        )));
    }
    if estimate.rank() != truth.rank() {
        return Err(GcpError::ShapeMismatch(format!(
            "estimate has rank {} but truth has rank {}",
            estimate.rank(),
            truth.rank()
        )));
    }
    let r = truth.rank();
    let est_cols: Vec<Vec<Vec<f64>>> = estimate
        .factors()
        .iter()
        .map(|a| (0..r).map(|j| a.column(j)).collect())
        .collect();
    let true_cols: Vec<Vec<Vec<f64>>> = truth
        .factors()
        .iter()
        .map(|a| (0..r).map(|j| a.column(j)).collect())
        .collect();
    // sim[j][l]: truth column j against estimate column l
    let sim: Vec<Vec<f64>> = (0..r)
        .map(|j| {
            (0..r)
                .map(|l| {
                    true_cols
                        .iter()
                        .zip(&est_cols)
                        .map(|(t, e)| cosine(&t[j], &e[l]))
                        .product()
                })
                .collect()
        })
        .collect();

    let best = if r <= EXHAUSTIVE_MAX_RANK {
        best_permutation(&sim)
    } else {
        greedy_matching(&sim)
    };
    Ok(best / r as f64)
}

fn best_permutation(sim: &[Vec<f64>]) -> f64 {
    fn search(sim: &[Vec<f64>], row: usize, used: &mut [bool], acc: f64, best: &mut f64) {
        if row == sim.len() {
            *best = best.max(acc);
            return;
        }
        for l in 0..sim.len() {
            if !used[l] {
                used[l] = true;
                search(sim, row + 1, used, acc + sim[row][l], best);
                used[l] = false;
            }
        }
    }
    let mut best = f64::NEG_INFINITY;
    search(sim, 0, &mut vec![false; sim.len()], 0.0, &mut best);
    best
}

fn greedy_matching(sim: &[Vec<f64>]) -> f64 {
    let r = sim.len();
    let mut pairs: Vec<(usize, usize)> = (0..r).flat_map(|j| (0..r).map(move |l| (j, l))).collect();
    pairs.sort_by(|a, b| sim[b.0][b.1].total_cmp(&sim[a.0][a.1]));
    let mut row_used = vec![false; r];
    let mut col_used = vec![false; r];
    let mut total = 0.0;
    for (j, l) in pairs {
        if !row_used[j] && !col_used[l] {
            row_used[j] = true;
            col_used[l] = true;
            total += sim[j][l];
        }
    }
    total
}
