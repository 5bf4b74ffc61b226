//! MTTKRP kernels and exact gradients.
//!
//! The Khatri-Rao product Z_k is never formed. Every kernel walks tensor
//! entries and adds y_i · (∗_{k'≠k} A_{k'}(i_{k'}, :)) into row i_k of the
//! output.

use rayon::prelude::*;

use crate::error::{GcpError, Result};
use crate::loss::{LossFunction, LossKind};
use crate::tensor::{advance, check_dense_size, DataTensor, DenseTensor, KruskalModel, Matrix, Shape, SparseTensor};

/// Scarce stochastic gradient tensor: weighted (index, value) pairs. Repeated
/// indices are allowed and accumulate.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledY {
    shape: Shape,
    coords: Vec<usize>,
    values: Vec<f64>,
}

impl SampledY {
    pub fn new(shape: Shape) -> Self {
        SampledY {
            shape,
            coords: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn with_capacity(shape: Shape, capacity: usize) -> Self {
        let d = shape.ndims();
        SampledY {
            shape,
            coords: Vec::with_capacity(capacity * d),
            values: Vec::with_capacity(capacity),
        }
    }

    /// Appends a sample; coordinates are trusted to be valid.
    #[inline]
    pub fn push(&mut self, coords: &[usize], value: f64) {
        debug_assert_eq!(coords.len(), self.shape.ndims());
        self.coords.extend_from_slice(coords);
        self.values.push(value);
    }

    /// Checked append.
    pub fn try_push(&mut self, coords: &[usize], value: f64) -> Result<()> {
        self.shape.check_index(coords)?;
        self.push(coords, value);
        Ok(())
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// Number of samples s.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn coords(&self, n: usize) -> &[usize] {
        let d = self.shape.ndims();
        &self.coords[n * d..(n + 1) * d]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[usize], f64)> + '_ {
        self.coords
            .chunks_exact(self.shape.ndims())
            .zip(self.values.iter().copied())
    }

    /// Sums the samples into a dense tensor (small shapes only).
    pub fn to_dense(&self) -> Result<DenseTensor> {
        let mut out = DenseTensor::zeros(self.shape.clone())?;
        for (c, v) in self.iter() {
            out.values_mut()[self.shape.linear_unchecked(c) as usize] += v;
        }
        Ok(out)
    }
}

/// One n_k × r matrix per mode: exact or stochastic partial derivatives of F.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSet {
    pub grads: Vec<Matrix>,
}

impl GradientSet {
    pub fn zeros_like(model: &KruskalModel) -> Self {
        GradientSet {
            grads: model
                .factors()
                .iter()
                .map(|a| Matrix::zeros(a.rows(), a.cols()))
                .collect(),
        }
    }

    pub fn ndims(&self) -> usize {
        self.grads.len()
    }

    /// Concatenation of vec(G_1), ..., vec(G_d).
    pub fn to_vec(&self) -> Vec<f64> {
        self.grads.iter().flat_map(|g| g.as_slice().iter().copied()).collect()
    }

    pub fn norm(&self) -> f64 {
        self.grads.iter().map(Matrix::frobenius_norm_sq).sum::<f64>().sqrt()
    }

    pub fn add_assign(&mut self, other: &GradientSet) {
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.grads.iter_mut().for_each(|g| g.scale(factor));
    }

    pub fn is_finite(&self) -> bool {
        self.grads.iter().all(Matrix::is_finite)
    }
}

/// Thread-level options for the sampled kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KernelOptions {
    /// Split large sample sets across the rayon pool.
    pub parallel: bool,
    /// Reduce per-chunk partial sums in a fixed order.
    pub deterministic: bool,
}

impl Default for KernelOptions {
    fn default() -> Self {
        KernelOptions {
            parallel: false,
            deterministic: true,
        }
    }
}

/// Samples per work item when the kernel runs in parallel.
const CHUNK: usize = 4096;

fn check_mode(model: &KruskalModel, k: usize) -> Result<()> {
    if k >= model.ndims() {
        return Err(GcpError::InvalidArgument(format!(
            "mode {k} out of range for a {}-way model",
            model.ndims()
        )));
    }
    Ok(())
}

pub(crate) fn check_shape(shape: &Shape, model: &KruskalModel) -> Result<()> {
    if shape != model.shape() {
        return Err(GcpError::ShapeMismatch(format!(
            "tensor is {shape} but model is {}",
            model.shape()
        )));
    }
    Ok(())
}

/// Scratch space for the per-entry row products.
struct RowProducts {
    rank: usize,
    prefix: Vec<f64>,
    suffix: Vec<f64>,
}

impl RowProducts {
    fn new(d: usize, rank: usize) -> Self {
        RowProducts {
            rank,
            prefix: vec![0.0; (d + 1) * rank],
            suffix: vec![0.0; (d + 1) * rank],
        }
    }

    /// Fills prefix[k] = ∗_{k'<k} A_{k'}(i_{k'},:) and suffix[k] = ∗_{k'≥k}.
    #[inline]
    fn load(&mut self, factors: &[Matrix], coords: &[usize]) {
        let r = self.rank;
        let d = factors.len();
        self.prefix[..r].fill(1.0);
        for k in 0..d {
            let row = factors[k].row(coords[k]);
            let (done, next) = self.prefix.split_at_mut((k + 1) * r);
            let prev = &done[k * r..];
            for j in 0..r {
                next[j] = prev[j] * row[j];
            }
        }
        self.suffix[d * r..].fill(1.0);
        for k in (0..d).rev() {
            let row = factors[k].row(coords[k]);
            let (head, tail) = self.suffix.split_at_mut((k + 1) * r);
            let cur = &mut head[k * r..];
            for j in 0..r {
                cur[j] = tail[j] * row[j];
            }
        }
    }

    /// Adds `weight · (prefix[k] ∗ suffix[k+1])` into row i_k of each output.
    #[inline]
    fn scatter(&self, out: &mut [Matrix], coords: &[usize], weight: f64) {
        let r = self.rank;
        for (k, g) in out.iter_mut().enumerate() {
            let pre = &self.prefix[k * r..(k + 1) * r];
            let suf = &self.suffix[(k + 1) * r..(k + 2) * r];
            let row = g.row_mut(coords[k]);
            for j in 0..r {
                row[j] += weight * pre[j] * suf[j];
            }
        }
    }

    /// Model value m_i of the loaded index.
    #[inline]
    fn model_value(&self, d: usize) -> f64 {
        self.prefix[d * self.rank..].iter().sum()
    }
}

/// Adds weight · ∗_{k'≠k} A_{k'}(i_{k'},:) into row i_k of `out`.
#[inline]
fn scatter_one(out: &mut Matrix, factors: &[Matrix], coords: &[usize], k: usize, weight: f64, buf: &mut [f64]) {
    buf.fill(weight);
    for (kk, (a, &i)) in factors.iter().zip(coords).enumerate() {
        if kk == k {
            continue;
        }
        for (b, v) in buf.iter_mut().zip(a.row(i)) {
            *b *= v;
        }
    }
    for (o, b) in out.row_mut(coords[k]).iter_mut().zip(buf.iter()) {
        *o += b;
    }
}

/// Mode-k MTTKRP of a dense tensor, Y_(k) (A_d ⊙ ⋯ ⊙ A_{k+1} ⊙ A_{k−1} ⊙ ⋯ ⊙ A_1).
pub fn mttkrp_dense(y: &DenseTensor, model: &KruskalModel, k: usize) -> Result<Matrix> {
    check_shape(y.shape(), model)?;
    check_mode(model, k)?;
    let factors = model.factors();
    let mut out = Matrix::zeros(factors[k].rows(), model.rank());
    let mut buf = vec![0.0; model.rank()];
    let mut coords = vec![0; model.ndims()];
    for &v in y.values() {
        if v != 0.0 {
            scatter_one(&mut out, factors, &coords, k, v, &mut buf);
        }
        advance(&mut coords, y.shape().dims());
    }
    Ok(out)
}

/// All d dense MTTKRPs in one pass over the tensor.
pub fn mttkrp_dense_all(y: &DenseTensor, model: &KruskalModel) -> Result<GradientSet> {
    check_shape(y.shape(), model)?;
    let factors = model.factors();
    let mut out = GradientSet::zeros_like(model);
    let mut rp = RowProducts::new(model.ndims(), model.rank());
    let mut coords = vec![0; model.ndims()];
    for &v in y.values() {
        if v != 0.0 {
            rp.load(factors, &coords);
            rp.scatter(&mut out.grads, &coords, v);
        }
        advance(&mut coords, y.shape().dims());
    }
    Ok(out)
}

/// Mode-k MTTKRP of a sampled tensor, O(s·r·d).
pub fn mttkrp_sampled(y: &SampledY, model: &KruskalModel, k: usize) -> Result<Matrix> {
    check_shape(y.shape(), model)?;
    check_mode(model, k)?;
    let factors = model.factors();
    let mut out = Matrix::zeros(factors[k].rows(), model.rank());
    let mut buf = vec![0.0; model.rank()];
    for (c, v) in y.iter() {
        scatter_one(&mut out, factors, c, k, v, &mut buf);
    }
    Ok(out)
}

fn accumulate_chunk(model: &KruskalModel, coords: &[usize], values: &[f64]) -> GradientSet {
    let d = model.ndims();
    let mut out = GradientSet::zeros_like(model);
    let mut rp = RowProducts::new(d, model.rank());
    for (c, &v) in coords.chunks_exact(d).zip(values) {
        rp.load(model.factors(), c);
        rp.scatter(&mut out.grads, c, v);
    }
    out
}

/// All d sampled MTTKRPs. Cross-mode row products are computed once per
/// sample with prefix/suffix products and shared by every output mode.
pub fn mttkrp_sampled_all(y: &SampledY, model: &KruskalModel, opts: KernelOptions) -> Result<GradientSet> {
    check_shape(y.shape(), model)?;
    let d = model.ndims();
    if !opts.parallel || y.len() < 2 * CHUNK {
        return Ok(accumulate_chunk(model, &y.coords, &y.values));
    }
    let work = y.coords.par_chunks(CHUNK * d).zip(y.values.par_chunks(CHUNK));
    if opts.deterministic {
        let partials: Vec<GradientSet> = work.map(|(c, v)| accumulate_chunk(model, c, v)).collect();
        let mut total = GradientSet::zeros_like(model);
        for p in &partials {
            total.add_assign(p);
        }
        Ok(total)
    } else {
        Ok(work
            .map(|(c, v)| accumulate_chunk(model, c, v))
            .reduce(
                || GradientSet::zeros_like(model),
                |mut a, b| {
                    a.add_assign(&b);
                    a
                },
            ))
    }
}

/// Dense elementwise partial-gradient tensor, y_i = g(x_i, m_i).
pub fn partial_gradient_tensor(x: &DataTensor, model: &KruskalModel, loss: &LossFunction) -> Result<DenseTensor> {
    x.check_model(model)?;
    check_dense_size(x.shape())?;
    loss.check_all(x.stored_values())?;
    if x.has_implicit_zeros() {
        loss.check_data(0.0)?;
    }
    let mut y = DenseTensor::zeros(x.shape().clone())?;
    let mut coords = vec![0; model.ndims()];
    let dims = x.shape().dims().to_vec();
    for v in y.values_mut() {
        *v = loss.grad(x.value_at(&coords), model.entry(&coords));
        advance(&mut coords, &dims);
    }
    Ok(y)
}

/// Exact gradient through a materialized Y. Oracle path for small problems.
pub fn gradient_full(x: &DataTensor, model: &KruskalModel, loss: &LossFunction) -> Result<GradientSet> {
    let y = partial_gradient_tensor(x, model, loss)?;
    mttkrp_dense_all(&y, model)
}

/// Exact objective F = Σ_i f(x_i, m_i) over every entry.
pub fn objective_full(x: &DataTensor, model: &KruskalModel, loss: &LossFunction) -> Result<f64> {
    x.check_model(model)?;
    check_dense_size(x.shape())?;
    loss.check_all(x.stored_values())?;
    let mut coords = vec![0; model.ndims()];
    let dims = x.shape().dims().to_vec();
    let mut total = 0.0;
    for _ in 0..x.shape().total() {
        total += loss.value(x.value_at(&coords), model.entry(&coords));
        advance(&mut coords, &dims);
    }
    Ok(total)
}

/// Poisson gradient without a dense Y: G_k = 1_(k) Z_k − V_(k) Z_k, where
/// v_i = x_i / m_i at the nonzeros. The all-ones term reduces to products of
/// factor column sums. Cost O(nnz·r·d).
pub fn gradient_poisson_implicit(x: &SparseTensor, model: &KruskalModel, loss: &LossFunction) -> Result<GradientSet> {
    if loss.kind != LossKind::Poisson {
        return Err(GcpError::InvalidArgument(format!(
            "implicit gradient requires the poisson loss, got {}",
            loss.kind
        )));
    }
    check_shape(x.shape(), model)?;
    loss.check_all(x.values())?;
    let d = model.ndims();
    let r = model.rank();
    let colsums: Vec<Vec<f64>> = model.factors().iter().map(Matrix::column_sums).collect();

    let mut grads = Vec::with_capacity(d);
    for k in 0..d {
        let mut ones_row = vec![1.0; r];
        for (kk, cs) in colsums.iter().enumerate() {
            if kk != k {
                ones_row.iter_mut().zip(cs).for_each(|(o, c)| *o *= c);
            }
        }
        let n = model.factor(k).rows();
        grads.push(Matrix::from_fn(n, r, |_, j| ones_row[j]));
    }

    let mut rp = RowProducts::new(d, r);
    for (c, xv) in x.iter() {
        rp.load(model.factors(), c);
        let m = rp.model_value(d);
        let v = xv / (m + loss.safe_shift);
        rp.scatter(&mut grads, c, -v);
    }
    Ok(GradientSet { grads })
}
