use super::shape::Shape;
use crate::error::{GcpError, Result};

/// Upper bound on entries for any operation that materializes a dense tensor.
pub const DENSE_LIMIT: u128 = 100_000_000;

pub(crate) fn check_dense_size(shape: &Shape) -> Result<()> {
    if shape.total() > DENSE_LIMIT {
        return Err(GcpError::TooLarge {
            total: shape.total(),
            limit: DENSE_LIMIT,
        });
    }
    Ok(())
}

/// Fully stored tensor, values in first-mode-fastest order.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Shape,
    values: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Shape, values: Vec<f64>) -> Result<Self> {
        if values.len() as u128 != shape.total() {
            return Err(GcpError::ShapeMismatch(format!(
                "{} values supplied for shape {shape} ({} entries)",
                values.len(),
                shape.total()
            )));
        }
        Ok(DenseTensor { shape, values })
    }

    pub fn zeros(shape: Shape) -> Result<Self> {
        check_dense_size(&shape)?;
        let n = shape.total() as usize;
        Ok(DenseTensor {
            shape,
            values: vec![0.0; n],
        })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at valid `coords`.
    #[inline]
    pub fn at(&self, coords: &[usize]) -> f64 {
        self.values[self.shape.linear_unchecked(coords) as usize]
    }

    pub fn get(&self, coords: &[usize]) -> Result<f64> {
        Ok(self.values[self.shape.linear_index(coords)? as usize])
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}
