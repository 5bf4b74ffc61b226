//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use gcp_core::mttkrp::objective_full;
use gcp_core::{DataTensor, DenseTensor, GcpRng, KruskalModel, LossFunction, LossKind, Matrix, MultiIndex, Shape, SparseTensor};
use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};

pub const ALL_LOSSES: [LossKind; 6] = [
    LossKind::Gaussian,
    LossKind::Poisson,
    LossKind::BernoulliOdds,
    LossKind::Gamma,
    LossKind::BetaHalf,
    LossKind::Huber { delta: 0.25 },
];

pub fn shape(dims: &[usize]) -> Shape {
    Shape::new(dims.to_vec()).unwrap()
}

/// Extents drawn from 1..=max per mode.
pub fn random_shape(rng: &mut GcpRng, max: &[usize]) -> Shape {
    Shape::new(max.iter().map(|&m| rng.random_range(1..=m)).collect::<Vec<usize>>()).unwrap()
}

/// Factors with entries in [lo, hi).
pub fn random_model(shape: &Shape, rank: usize, lo: f64, hi: f64, rng: &mut GcpRng) -> KruskalModel {
    let factors = shape
        .dims()
        .iter()
        .map(|&n| Matrix::from_fn(n, rank, |_, _| rng.random_range(lo..hi)))
        .collect();
    KruskalModel::new(factors).unwrap()
}

/// Data drawn around `model` that lies in the domain of `kind`.
pub fn data_for(kind: LossKind, model: &KruskalModel, rng: &mut GcpRng) -> DenseTensor {
    let mut x = model.full().unwrap();
    for v in x.values_mut() {
        let m = *v;
        *v = match kind {
            LossKind::Gaussian => m + rng.random_range(-0.3..0.3),
            LossKind::Huber { .. } => m + rng.random_range(-0.6..0.6),
            LossKind::Poisson => Poisson::new(m).unwrap().sample(rng),
            LossKind::BernoulliOdds => {
                if rng.random::<f64>() < m / (1.0 + m) {
                    1.0
                } else {
                    0.0
                }
            }
            LossKind::Gamma | LossKind::BetaHalf => {
                let e: f64 = Exp1.sample(rng);
                m * e.max(1e-3)
            }
        };
    }
    x
}

/// Sparse tensor keeping each entry with probability `density`.
pub fn random_sparse(shape: &Shape, density: f64, rng: &mut GcpRng, mut value: impl FnMut(&mut GcpRng) -> f64) -> SparseTensor {
    let d = shape.ndims();
    let mut coords = vec![0usize; d];
    let mut entries = Vec::new();
    for lin in 0..shape.total() {
        let mut rem = lin;
        for (c, &n) in coords.iter_mut().zip(shape.dims()) {
            *c = (rem % n as u128) as usize;
            rem /= n as u128;
        }
        if rng.random::<f64>() < density {
            entries.push((MultiIndex(coords.clone()), value(rng)));
        }
    }
    SparseTensor::from_entries(shape.clone(), entries).unwrap()
}

/// Central finite differences of F over every factor entry.
pub fn fd_gradient(x: &DataTensor, model: &KruskalModel, loss: &LossFunction) -> Vec<f64> {
    let mut out = Vec::new();
    for k in 0..model.ndims() {
        let a = model.factor(k);
        for idx in 0..a.as_slice().len() {
            let base = a.as_slice()[idx];
            let h = 1e-6 * base.abs().max(1.0);
            let eval = |v: f64| {
                let mut factors = model.factors().to_vec();
                factors[k].as_mut_slice()[idx] = v;
                objective_full(x, &KruskalModel::new(factors).unwrap(), loss).unwrap()
            };
            out.push((eval(base + h) - eval(base - h)) / (2.0 * h));
        }
    }
    out
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// ‖a − b‖ / max(‖b‖, floor).
pub fn rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(b).max(floor)
}

/// Mode-k unfolding X_(k) (n_k × Π_{m≠k} n_m), column index first-mode-fastest
/// over the remaining modes.
pub fn unfold(y: &DenseTensor, k: usize) -> Matrix {
    let dims = y.shape().dims();
    let cols: usize = dims.iter().enumerate().filter(|&(m, _)| m != k).map(|(_, &n)| n).product();
    let mut out = Matrix::zeros(dims[k], cols);
    let mut coords = vec![0usize; dims.len()];
    for (lin, &v) in y.values().iter().enumerate() {
        let mut rem = lin;
        for (c, &n) in coords.iter_mut().zip(dims) {
            *c = rem % n;
            rem /= n;
        }
        let mut col = 0;
        let mut stride = 1;
        for (m, (&c, &n)) in coords.iter().zip(dims).enumerate() {
            if m != k {
                col += c * stride;
                stride *= n;
            }
        }
        out[(coords[k], col)] = v;
    }
    out
}

/// Khatri-Rao product A_d ⊙ ... ⊙ A_{k+1} ⊙ A_{k−1} ⊙ ... ⊙ A_1, materialized.
pub fn khatri_rao_skip(model: &KruskalModel, k: usize) -> Matrix {
    let r = model.rank();
    let mut z = Matrix::filled(1, r, 1.0);
    for (m, a) in model.factors().iter().enumerate() {
        if m == k {
            continue;
        }
        // new row index = old + rows(z)·i, so earlier modes vary fastest
        let mut next = Matrix::zeros(z.rows() * a.rows(), r);
        for i in 0..a.rows() {
            for j in 0..z.rows() {
                for c in 0..r {
                    next[(i * z.rows() + j, c)] = z[(j, c)] * a[(i, c)];
                }
            }
        }
        z = next;
    }
    z
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.cols(), b.rows());
    Matrix::from_fn(a.rows(), b.cols(), |i, j| (0..a.cols()).map(|l| a[(i, l)] * b[(l, j)]).sum())
}

/// Negative binomial quantile by summing the pmf in linear space, with the
/// binomial coefficient built as a plain product.
pub fn nb_quantile_bruteforce(successes: u64, p: f64, quantile: f64) -> u64 {
    let s = successes as f64;
    let mut cdf = 0.0;
    let mut k = 0u64;
    loop {
        let mut coef = 1.0;
        for i in 1..=k {
            coef *= (s - 1.0 + i as f64) / i as f64;
        }
        cdf += coef * p.powf(s) * (1.0 - p).powi(k as i32);
        if cdf >= quantile {
            return k;
        }
        k += 1;
    }
}
