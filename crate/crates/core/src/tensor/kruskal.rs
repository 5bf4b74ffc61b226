use rand::Rng;

use super::dense::{check_dense_size, DenseTensor};
use super::matrix::Matrix;
use super::shape::{advance, Shape};
use crate::error::{GcpError, Result};

/// Low-rank model M = Σ_j a_j^(1) ∘ ... ∘ a_j^(d), stored as d factor matrices
/// of size n_k × r.
#[derive(Clone, Debug, PartialEq)]
pub struct KruskalModel {
    shape: Shape,
    rank: usize,
    factors: Vec<Matrix>,
}

impl KruskalModel {
    pub fn new(factors: Vec<Matrix>) -> Result<Self> {
        let rank = factors
            .first()
            .ok_or_else(|| GcpError::InvalidShape("model needs at least one factor".into()))?
            .cols();
        if rank == 0 {
            return Err(GcpError::InvalidArgument("rank must be at least 1".into()));
        }
        for (k, a) in factors.iter().enumerate() {
            if a.cols() != rank {
                return Err(GcpError::ShapeMismatch(format!(
                    "factor {k} has {} columns, expected rank {rank}",
                    a.cols()
                )));
            }
            if !a.is_finite() {
                return Err(GcpError::InvalidArgument(format!("factor {k} has non-finite entries")));
            }
        }
        let shape = Shape::new(factors.iter().map(Matrix::rows).collect::<Vec<_>>())?;
        Ok(KruskalModel {
            shape,
            rank,
            factors,
        })
    }

    pub fn filled(shape: &Shape, rank: usize, value: f64) -> Result<Self> {
        Self::new(shape.dims().iter().map(|&n| Matrix::filled(n, rank, value)).collect())
    }

    /// Factor entries drawn uniformly from [0, 1).
    pub fn random_uniform<R: Rng + ?Sized>(shape: &Shape, rank: usize, rng: &mut R) -> Result<Self> {
        let factors = shape
            .dims()
            .iter()
            .map(|&n| Matrix::from_fn(n, rank, |_, _| rng.random::<f64>()))
            .collect();
        Self::new(factors)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn ndims(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[Matrix] {
        &self.factors
    }

    pub fn factor(&self, k: usize) -> &Matrix {
        &self.factors[k]
    }

    pub(crate) fn factors_mut(&mut self) -> &mut [Matrix] {
        &mut self.factors
    }

    pub fn into_factors(self) -> Vec<Matrix> {
        self.factors
    }

    /// m_i = Σ_j Π_k A_k(i_k, j) for valid coordinates.
    #[inline]
    pub fn entry(&self, coords: &[usize]) -> f64 {
        (0..self.rank)
            .map(|j| {
                self.factors
                    .iter()
                    .zip(coords)
                    .map(|(a, &i)| a[(i, j)])
                    .product::<f64>()
            })
            .sum()
    }

    pub fn model_entry(&self, coords: &[usize]) -> Result<f64> {
        self.shape.check_index(coords)?;
        Ok(self.entry(coords))
    }

    /// Materializes M. Only meant for small problems.
    pub fn full(&self) -> Result<DenseTensor> {
        check_dense_size(&self.shape)?;
        let mut out = DenseTensor::zeros(self.shape.clone())?;
        let mut coords = vec![0; self.ndims()];
        for v in out.values_mut() {
            *v = self.entry(&coords);
            advance(&mut coords, self.shape.dims());
        }
        Ok(out)
    }

    /// Frobenius norm via √(1ᵀ(A_1ᵀA_1 ∗ ⋯ ∗ A_dᵀA_d)1).
    pub fn norm(&self) -> f64 {
        let r = self.rank;
        let mut acc = Matrix::filled(r, r, 1.0);
        for a in &self.factors {
            let g = a.gram();
            for (x, y) in acc.as_mut_slice().iter_mut().zip(g.as_slice()) {
                *x *= y;
            }
        }
        acc.as_slice().iter().sum::<f64>().max(0.0).sqrt()
    }

    /// Multiplies every factor by the same constant so that the model norm
    /// becomes `target`. A zero model is left untouched.
    pub fn scale_to_norm(&mut self, target: f64) {
        let current = self.norm();
        if current <= 0.0 || !current.is_finite() {
            return;
        }
        let per_factor = (target / current).powf(1.0 / self.ndims() as f64);
        for a in &mut self.factors {
            a.scale(per_factor);
        }
    }

    /// Projects every factor entry onto [lower, ∞).
    pub fn clamp_below(&mut self, lower: f64) {
        for a in &mut self.factors {
            for v in a.as_mut_slice() {
                if *v < lower {
                    *v = lower;
                }
            }
        }
    }
}
