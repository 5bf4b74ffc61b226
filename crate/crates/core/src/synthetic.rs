//! Synthetic test problems with a known low-rank truth.

use std::collections::HashSet;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Exp1, Normal};

use crate::error::{GcpError, Result};
use crate::rng::IndexSource;
use crate::tensor::{check_dense_size, DenseTensor, KruskalModel, Matrix, Shape, SparseTensor};

/// Dense data x_i ~ Gamma(shape 1, scale m_i) from a model with uniform(0, 1)
/// factors.
pub fn gen_gamma_problem<R: Rng + ?Sized>(shape: &Shape, rank: usize, rng: &mut R) -> Result<(DenseTensor, KruskalModel)> {
    check_dense_size(shape)?;
    let truth = KruskalModel::random_uniform(shape, rank, rng)?;
    let mut data = truth.full()?;
    for v in data.values_mut() {
        let e: f64 = Exp1.sample(rng);
        *v *= e;
    }
    Ok((data, truth))
}

/// Parameters of the sparse binary odds-model generator.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryProblemSpec {
    pub shape: Shape,
    pub rank: usize,
    /// Density of nonzeros in the sparse factor columns.
    pub delta: f64,
    /// Target probability of a one where every mode hits a structural nonzero.
    pub p_high: f64,
    /// Probability of a one from the dense noise column alone.
    pub p_low: f64,
}

impl BinaryProblemSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(GcpError::InvalidArgument("rank must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(GcpError::InvalidArgument(format!("delta must lie in (0, 0.5), got {}", self.delta)));
        }
        if !(0.0 < self.p_low && self.p_low < self.p_high && self.p_high < 1.0) {
            return Err(GcpError::InvalidArgument(format!(
                "need 0 < p_low < p_high < 1, got p_low={} p_high={}",
                self.p_low, self.p_high
            )));
        }
        if self.shape.total() > u64::MAX as u128 {
            return Err(GcpError::InvalidArgument("binary generator needs fewer than 2^64 entries".into()));
        }
        Ok(())
    }

    /// Factor value whose d-th power gives odds p/(1−p).
    fn odds_root(&self, p: f64) -> f64 {
        (p / (1.0 - p)).powf(1.0 / self.shape.ndims() as f64)
    }
}

/// Binary tensor with P(x_i = 1) = m_i/(1 + m_i).
///
/// Columns 0..r−1 of every factor are sparse: each entry is nonzero with
/// probability δ and then drawn from Normal((p_high/(1−p_high))^{1/d}, 0.5),
/// clamped at 0. The last column is the constant (p_low/(1−p_low))^{1/d}.
/// Entries covered by some sparse column get an exact Bernoulli draw; all
/// other entries have probability p_low and are filled in bulk.
pub fn gen_binary_problem<R: Rng + ?Sized>(spec: &BinaryProblemSpec, rng: &mut R) -> Result<(SparseTensor, KruskalModel)> {
    spec.validate()?;
    let shape = &spec.shape;
    let d = shape.ndims();
    let r = spec.rank;
    let high = spec.odds_root(spec.p_high);
    let low = spec.odds_root(spec.p_low);
    let normal = Normal::new(high, 0.5).expect("valid normal parameters");

    let factors: Vec<Matrix> = shape
        .dims()
        .iter()
        .map(|&n| {
            Matrix::from_fn(n, r, |_, j| {
                if j + 1 == r {
                    low
                } else if rng.random::<f64>() < spec.delta {
                    normal.sample(rng).max(0.0)
                } else {
                    0.0
                }
            })
        })
        .collect();
    let truth = KruskalModel::new(factors)?;

    let candidates = structural_candidates(&truth, shape);
    let mut ones: Vec<(u128, f64)> = Vec::new();
    let mut coords = vec![0; d];
    for &key in &candidates {
        shape.unravel_into(key, &mut coords);
        let m = truth.entry(&coords);
        if rng.random::<f64>() < m / (1.0 + m) {
            ones.push((key, 1.0));
        }
    }

    let others = (shape.total() - candidates.len() as u128) as u64;
    let noise = Binomial::new(others, spec.p_low).expect("valid binomial parameters").sample(rng);
    let mut chosen: HashSet<u128> = HashSet::with_capacity(noise as usize);
    while (chosen.len() as u64) < noise {
        for (c, &n) in coords.iter_mut().zip(shape.dims()) {
            *c = rng.below(n);
        }
        let key = shape.linear_unchecked(&coords);
        if candidates.binary_search(&key).is_err() {
            chosen.insert(key);
        }
    }
    ones.extend(chosen.into_iter().map(|k| (k, 1.0)));
    Ok((SparseTensor::from_keyed(shape.clone(), ones), truth))
}

/// Sorted linear keys of every entry where some sparse column is nonzero in
/// all modes.
fn structural_candidates(truth: &KruskalModel, shape: &Shape) -> Vec<u128> {
    let d = shape.ndims();
    let mut keys = Vec::new();
    for j in 0..truth.rank().saturating_sub(1) {
        let support: Vec<Vec<usize>> = truth
            .factors()
            .iter()
            .map(|a| (0..a.rows()).filter(|&i| a[(i, j)] > 0.0).collect())
            .collect();
        if support.iter().any(Vec::is_empty) {
            continue;
        }
        let mut pos = vec![0usize; d];
        let mut coords: Vec<usize> = support.iter().map(|s| s[0]).collect();
        'outer: loop {
            keys.push(shape.linear_unchecked(&coords));
            for k in 0..d {
                pos[k] += 1;
                if pos[k] < support[k].len() {
                    coords[k] = support[k][pos[k]];
                    continue 'outer;
                }
                pos[k] = 0;
                coords[k] = support[k][0];
            }
            break;
        }
    }
    keys.sort_unstable();
    keys.dedup();
    keys
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::GcpRng;

    fn spec(shape: Vec<usize>, delta: f64) -> BinaryProblemSpec {
        BinaryProblemSpec {
            shape: Shape::new(shape).unwrap(),
            rank: 3,
            delta,
            p_high: 0.9,
            p_low: 0.01,
        }
    }

    #[test]
    fn gamma_data_is_nonnegative_and_reproducible() {
        let shape = Shape::new(vec![5, 4, 3]).unwrap();
        let (x1, t1) = gen_gamma_problem(&shape, 2, &mut GcpRng::seed_from_u64(1)).unwrap();
        let (x2, t2) = gen_gamma_problem(&shape, 2, &mut GcpRng::seed_from_u64(1)).unwrap();
        assert_eq!(x1, x2);
        assert_eq!(t1, t2);
        assert!(x1.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn binary_values_are_ones_and_reproducible() {
        let s = spec(vec![20, 15, 10], 0.2);
        let (x1, t1) = gen_binary_problem(&s, &mut GcpRng::seed_from_u64(3)).unwrap();
        let (x2, t2) = gen_binary_problem(&s, &mut GcpRng::seed_from_u64(3)).unwrap();
        assert_eq!(x1, x2);
        assert_eq!(t1, t2);
        assert!(x1.values().iter().all(|&v| v == 1.0));
        assert!(t1.factors().iter().all(|a| a.as_slice().iter().all(|&v| v >= 0.0)));
        let low = (0.01f64 / 0.99).powf(1.0 / 3.0);
        assert!(t1.factors().iter().all(|a| (0..a.rows()).all(|i| a[(i, 2)] == low)));
    }

    #[test]
    fn candidates_cover_structural_support() {
        let s = spec(vec![8, 7, 6], 0.3);
        let (_, truth) = gen_binary_problem(&s, &mut GcpRng::seed_from_u64(5)).unwrap();
        let cand = structural_candidates(&truth, &s.shape);
        let dense = truth.full().unwrap();
        let noise_only = (0.01f64 / 0.99).powf(1.0 / 3.0).powi(3);
        for (k, &m) in dense.values().iter().enumerate() {
            let in_cand = cand.binary_search(&(k as u128)).is_ok();
            if !in_cand {
                assert!((m - noise_only).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = spec(vec![4, 4], 0.5);
        assert!(s.validate().is_err());
        s.delta = 0.1;
        s.p_low = 0.95;
        assert!(s.validate().is_err());
        s.p_low = 0.01;
        s.rank = 0;
        assert!(s.validate().is_err());
    }
}
