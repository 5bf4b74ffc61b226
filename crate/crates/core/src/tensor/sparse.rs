use super::dense::DenseTensor;
use super::shape::{MultiIndex, Shape};
use crate::error::Result;

/// Coordinate-format tensor. Entries are kept sorted by linear index so
/// membership tests are binary searches over `keys`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseTensor {
    shape: Shape,
    coords: Vec<usize>,
    values: Vec<f64>,
    keys: Vec<u128>,
}

impl SparseTensor {
    pub fn empty(shape: Shape) -> Self {
        SparseTensor {
            shape,
            coords: Vec::new(),
            values: Vec::new(),
            keys: Vec::new(),
        }
    }

    /// Builds a normalized tensor: indices are validated, duplicates summed,
    /// resulting zeros dropped.
    pub fn from_entries<I>(shape: Shape, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, f64)>,
    {
        let mut keyed = Vec::new();
        for (idx, v) in entries {
            keyed.push((shape.linear_index(&idx)?, v));
        }
        Ok(Self::from_keyed(shape, keyed))
    }

    /// Same as [`SparseTensor::from_entries`] but keyed by linear index.
    /// Keys must be below `shape.total()`.
    pub(crate) fn from_keyed(shape: Shape, mut keyed: Vec<(u128, f64)>) -> Self {
        keyed.sort_by_key(|&(k, _)| k);
        let d = shape.ndims();
        let mut keys: Vec<u128> = Vec::with_capacity(keyed.len());
        let mut values: Vec<f64> = Vec::with_capacity(keyed.len());
        for (k, v) in keyed {
            match keys.last() {
                Some(&last) if last == k => *values.last_mut().unwrap() += v,
                _ => {
                    keys.push(k);
                    values.push(v);
                }
            }
        }
        let mut coords = Vec::with_capacity(keys.len() * d);
        let mut buf = vec![0; d];
        let mut kept_keys = Vec::with_capacity(keys.len());
        let mut kept_values = Vec::with_capacity(keys.len());
        for (k, v) in keys.into_iter().zip(values) {
            if v == 0.0 {
                continue;
            }
            shape.unravel_into(k, &mut buf);
            coords.extend_from_slice(&buf);
            kept_keys.push(k);
            kept_values.push(v);
        }
        SparseTensor {
            shape,
            coords,
            values: kept_values,
            keys: kept_keys,
        }
    }

    pub fn from_dense(dense: &DenseTensor) -> Self {
        let keyed = dense
            .values()
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(k, &v)| (k as u128, v))
            .collect();
        Self::from_keyed(dense.shape().clone(), keyed)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// Number of stored nonzeros, η.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Number of zero entries, ζ = n^d − η.
    pub fn num_zeros(&self) -> u128 {
        self.shape.total() - self.nnz() as u128
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn keys(&self) -> &[u128] {
        &self.keys
    }

    /// Coordinates of the `n`th stored nonzero.
    #[inline]
    pub fn coords(&self, n: usize) -> &[usize] {
        let d = self.shape.ndims();
        &self.coords[n * d..(n + 1) * d]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[usize], f64)> + '_ {
        let d = self.shape.ndims();
        self.coords.chunks_exact(d.max(1)).zip(self.values.iter().copied())
    }

    /// Value at `coords`, 0 when not stored. Coordinates are assumed valid.
    #[inline]
    pub fn lookup(&self, coords: &[usize]) -> f64 {
        self.lookup_key(self.shape.linear_unchecked(coords))
    }

    #[inline]
    pub fn lookup_key(&self, key: u128) -> f64 {
        match self.keys.binary_search(&key) {
            Ok(pos) => self.values[pos],
            Err(_) => 0.0,
        }
    }

    #[inline]
    pub fn contains_key(&self, key: u128) -> bool {
        self.keys.binary_search(&key).is_ok()
    }

    /// Checked lookup.
    pub fn get(&self, coords: &[usize]) -> Result<f64> {
        Ok(self.lookup_key(self.shape.linear_index(coords)?))
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self) -> Result<DenseTensor> {
        let mut dense = DenseTensor::zeros(self.shape.clone())?;
        let values = dense.values_mut();
        for (&k, &v) in self.keys.iter().zip(&self.values) {
            values[k as usize] = v;
        }
        Ok(dense)
    }
}
