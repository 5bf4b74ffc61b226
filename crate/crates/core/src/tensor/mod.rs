//! Tensor containers, index arithmetic and the Kruskal (CP) model.

mod dense;
mod kruskal;
mod matrix;
mod shape;
mod sparse;

pub use dense::{DenseTensor, DENSE_LIMIT};
pub use kruskal::KruskalModel;
pub use matrix::Matrix;
pub use shape::{MultiIndex, Shape, MAX_MODES};
pub use sparse::SparseTensor;

pub(crate) use dense::check_dense_size;
pub(crate) use shape::advance;

use crate::error::{GcpError, Result};

/// Data tensor in either storage format.
#[derive(Clone, Debug, PartialEq)]
pub enum DataTensor {
    Sparse(SparseTensor),
    Dense(DenseTensor),
}

impl DataTensor {
    pub fn shape(&self) -> &Shape {
        match self {
            DataTensor::Sparse(x) => x.shape(),
            DataTensor::Dense(x) => x.shape(),
        }
    }

    /// x_i at valid coordinates; sparse storage costs one binary search.
    #[inline]
    pub fn value_at(&self, coords: &[usize]) -> f64 {
        match self {
            DataTensor::Sparse(x) => x.lookup(coords),
            DataTensor::Dense(x) => x.at(coords),
        }
    }

    pub fn norm(&self) -> f64 {
        match self {
            DataTensor::Sparse(x) => x.norm(),
            DataTensor::Dense(x) => x.norm(),
        }
    }

    pub fn as_sparse(&self) -> Option<&SparseTensor> {
        match self {
            DataTensor::Sparse(x) => Some(x),
            DataTensor::Dense(_) => None,
        }
    }

    /// Visits every explicitly stored value (all entries for dense storage).
    pub fn stored_values(&self) -> &[f64] {
        match self {
            DataTensor::Sparse(x) => x.values(),
            DataTensor::Dense(x) => x.values(),
        }
    }

    /// Whether the tensor has at least one implicit (unstored) zero.
    pub fn has_implicit_zeros(&self) -> bool {
        match self {
            DataTensor::Sparse(x) => x.num_zeros() > 0,
            DataTensor::Dense(_) => false,
        }
    }

    pub fn to_dense(&self) -> Result<DenseTensor> {
        match self {
            DataTensor::Sparse(x) => x.to_dense(),
            DataTensor::Dense(x) => Ok(x.clone()),
        }
    }

    pub(crate) fn check_model(&self, model: &KruskalModel) -> Result<()> {
        if self.shape() != model.shape() {
            return Err(GcpError::ShapeMismatch(format!(
                "data is {} but model is {}",
                self.shape(),
                model.shape()
            )));
        }
        Ok(())
    }
}

impl From<SparseTensor> for DataTensor {
    fn from(x: SparseTensor) -> Self {
        DataTensor::Sparse(x)
    }
}

impl From<DenseTensor> for DataTensor {
    fn from(x: DenseTensor) -> Self {
        DataTensor::Dense(x)
    }
}
