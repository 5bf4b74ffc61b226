use std::fmt;
use std::ops::Deref;

use crate::error::{GcpError, Result};

/// Largest number of modes accepted at runtime.
pub const MAX_MODES: usize = 16;

/// Extents of a d-way tensor with first-mode-fastest strides.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Shape {
    dims: Vec<usize>,
    strides: Vec<u128>,
    total: u128,
}

impl Shape {
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        if dims.is_empty() {
            return Err(GcpError::InvalidShape("a tensor needs at least one mode".into()));
        }
        if dims.len() > MAX_MODES {
            return Err(GcpError::InvalidShape(format!(
                "{} modes requested, at most {MAX_MODES} supported",
                dims.len()
            )));
        }
        let mut strides = Vec::with_capacity(dims.len());
        let mut total: u128 = 1;
        for (k, &n) in dims.iter().enumerate() {
            if n == 0 {
                return Err(GcpError::InvalidShape(format!("mode {k} has zero extent")));
            }
            strides.push(total);
            total = total.checked_mul(n as u128).ok_or_else(|| {
                GcpError::InvalidShape("number of entries does not fit in 128 bits".into())
            })?;
        }
        Ok(Shape {
            dims,
            strides,
            total,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndims(&self) -> usize {
        self.dims.len()
    }

    /// Total number of entries, n_1 n_2 ... n_d.
    pub fn total(&self) -> u128 {
        self.total
    }

    /// Sum of the extents, the default per-gradient sample budget.
    pub fn dim_sum(&self) -> usize {
        self.dims.iter().sum()
    }

    pub fn check_index(&self, coords: &[usize]) -> Result<()> {
        if coords.len() != self.dims.len() {
            return Err(GcpError::ModeCountMismatch {
                expected: self.dims.len(),
                got: coords.len(),
            });
        }
        for (mode, (&coord, &extent)) in coords.iter().zip(&self.dims).enumerate() {
            if coord >= extent {
                return Err(GcpError::IndexOutOfRange {
                    mode,
                    coord,
                    extent,
                });
            }
        }
        Ok(())
    }

    /// Zero-based linear index, Σ i_k Π_{k'<k} n_{k'}.
    pub fn linear_index(&self, coords: &[usize]) -> Result<u128> {
        self.check_index(coords)?;
        Ok(self.linear_unchecked(coords))
    }

    /// Linearization without bounds checks; callers guarantee validity.
    #[inline]
    pub fn linear_unchecked(&self, coords: &[usize]) -> u128 {
        coords
            .iter()
            .zip(&self.strides)
            .map(|(&i, &stride)| i as u128 * stride)
            .sum()
    }

    pub fn multi_index(&self, linear: u128) -> Result<MultiIndex> {
        if linear >= self.total {
            return Err(GcpError::LinearIndexOutOfRange {
                index: linear,
                total: self.total,
            });
        }
        let mut coords = vec![0; self.dims.len()];
        self.unravel_into(linear, &mut coords);
        Ok(MultiIndex(coords))
    }

    /// Writes the coordinates of `linear` into `coords` (no range check).
    #[inline]
    pub fn unravel_into(&self, mut linear: u128, coords: &mut [usize]) {
        for (c, &n) in coords.iter_mut().zip(&self.dims) {
            let n = n as u128;
            *c = (linear % n) as usize;
            linear /= n;
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|n| n.to_string()).collect();
        f.write_str(&parts.join("x"))
    }
}

/// Zero-based coordinates (i_1, ..., i_d) of one tensor entry.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn new(coords: impl Into<Vec<usize>>) -> Self {
        MultiIndex(coords.into())
    }
}

impl Deref for MultiIndex {
    type Target = [usize];

    fn deref(&self) -> &[usize] {
        &self.0
    }
}

impl From<Vec<usize>> for MultiIndex {
    fn from(coords: Vec<usize>) -> Self {
        MultiIndex(coords)
    }
}

impl From<&[usize]> for MultiIndex {
    fn from(coords: &[usize]) -> Self {
        MultiIndex(coords.to_vec())
    }
}

/// Odometer over all multi-indices in first-mode-fastest order.
pub(crate) fn advance(coords: &mut [usize], dims: &[usize]) {
    for (c, &n) in coords.iter_mut().zip(dims) {
        *c += 1;
        if *c < n {
            return;
        }
        *c = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s342() -> Shape {
        Shape::new(vec![3, 4, 2]).unwrap()
    }

    #[test]
    fn linear_index_examples() {
        let s = s342();
        assert_eq!(s.linear_index(&[0, 0, 0]).unwrap(), 0);
        assert_eq!(s.linear_index(&[2, 3, 1]).unwrap(), 23);
        assert_eq!(s.linear_index(&[1, 0, 0]).unwrap(), 1);
    }

    #[test]
    fn multi_index_examples() {
        let s = s342();
        assert_eq!(s.multi_index(0).unwrap().0, vec![0, 0, 0]);
        assert_eq!(s.multi_index(23).unwrap().0, vec![2, 3, 1]);
        assert_eq!(s.multi_index(12).unwrap().0, vec![0, 0, 1]);
    }

    #[test]
    fn out_of_range_names_the_mode() {
        let err = s342().linear_index(&[0, 4, 0]).unwrap_err();
        assert!(matches!(err, GcpError::IndexOutOfRange { mode: 1, coord: 4, extent: 4 }));
        assert!(matches!(
            s342().multi_index(24),
            Err(GcpError::LinearIndexOutOfRange { index: 24, total: 24 })
        ));
        assert!(matches!(
            s342().linear_index(&[0, 0]),
            Err(GcpError::ModeCountMismatch { .. })
        ));
    }

    #[test]
    fn rejects_degenerate_shapes() {
        assert!(Shape::new(Vec::<usize>::new()).is_err());
        assert!(Shape::new(vec![3, 0]).is_err());
        assert!(Shape::new(vec![2; MAX_MODES + 1]).is_err());
        assert!(Shape::new(vec![usize::MAX; 3]).is_err());
    }

    #[test]
    fn totals_beyond_64_bits() {
        let s = Shape::new(vec![1 << 20; 5]).unwrap();
        assert_eq!(s.total(), 1u128 << 100);
        let last = vec![(1 << 20) - 1; 5];
        let lin = s.linear_index(&last).unwrap();
        assert_eq!(lin, s.total() - 1);
        assert_eq!(s.multi_index(lin).unwrap().0, last);
    }

    #[test]
    fn odometer_matches_linearization() {
        let s = s342();
        let mut coords = vec![0; 3];
        for lin in 0..s.total() {
            assert_eq!(s.linear_unchecked(&coords), lin);
            advance(&mut coords, s.dims());
        }
        assert_eq!(coords, vec![0, 0, 0]);
    }
}
