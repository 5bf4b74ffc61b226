use super::oversample::DEFAULT_OVERSAMPLE;
use super::stratified::draw_zeros_into;
use super::uniform::draw_index;
use crate::error::{GcpError, Result};
use crate::loss::LossFunction;
use crate::rng::IndexSource;
use crate::tensor::{DataTensor, KruskalModel, Shape};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimatorKind {
    Uniform,
    Stratified,
}

/// Distinct sampled indices of one stratum with their multiplicities.
#[derive(Clone, Debug, PartialEq)]
struct Stratum {
    coords: Vec<usize>,
    data: Vec<f64>,
    counts: Vec<u32>,
    weight: f64,
}

impl Stratum {
    fn empty() -> Self {
        Stratum {
            coords: Vec::new(),
            data: Vec::new(),
            counts: Vec::new(),
            weight: 0.0,
        }
    }

    /// Collapses repeated draws given as (linear key, x).
    fn from_draws(shape: &Shape, mut draws: Vec<(u128, f64)>, weight: f64) -> Self {
        draws.sort_by_key(|&(k, _)| k);
        let d = shape.ndims();
        let mut s = Stratum::empty();
        s.weight = weight;
        let mut buf = vec![0; d];
        let mut last = None;
        for (key, x) in draws {
            if last == Some(key) {
                *s.counts.last_mut().unwrap() += 1;
                continue;
            }
            last = Some(key);
            shape.unravel_into(key, &mut buf);
            s.coords.extend_from_slice(&buf);
            s.data.push(x);
            s.counts.push(1);
        }
        s
    }

    fn draws(&self) -> usize {
        self.counts.iter().map(|&c| c as usize).sum()
    }

    fn weighted_sum(&self, d: usize, model: &KruskalModel, loss: &LossFunction) -> f64 {
        let mut sum = 0.0;
        for ((c, &x), &n) in self.coords.chunks_exact(d).zip(&self.data).zip(&self.counts) {
            sum += n as f64 * loss.value(x, model.entry(c));
        }
        self.weight * sum
    }
}

/// Fixed entry samples for estimating F. Drawn once and reused every epoch
/// (and across runs) so estimates are comparable.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorSamples {
    kind: EstimatorKind,
    shape: Shape,
    strata: Vec<Stratum>,
}

impl EstimatorSamples {
    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// Total number of draws, counting repeats.
    pub fn len(&self) -> usize {
        self.strata.iter().map(Stratum::draws).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// (draws, weight) per stratum: one entry for uniform estimators, nonzeros
    /// then zeros for stratified ones.
    pub fn strata(&self) -> Vec<(usize, f64)> {
        self.strata.iter().map(|s| (s.draws(), s.weight)).collect()
    }

    /// Sampled (coords, count) pairs of stratum `n`.
    pub fn stratum_indices(&self, n: usize) -> Vec<(Vec<usize>, u32)> {
        let d = self.shape.ndims();
        let s = &self.strata[n];
        s.coords
            .chunks_exact(d)
            .zip(&s.counts)
            .map(|(c, &k)| (c.to_vec(), k))
            .collect()
    }
}

/// Objective estimates from a fixed model evaluation rule.
pub trait LossEstimator {
    fn estimate(&self, x: &DataTensor, model: &KruskalModel, loss: &LossFunction) -> Result<f64>;
}

impl LossEstimator for EstimatorSamples {
    fn estimate(&self, x: &DataTensor, model: &KruskalModel, loss: &LossFunction) -> Result<f64> {
        estimate_loss(x, model, loss, self)
    }
}

/// Draws `count` estimator samples. Stratified estimators split the budget
/// evenly between nonzeros and zeros (all of it to one side when the other
/// stratum is empty).
pub fn draw_estimator_samples<R: IndexSource + ?Sized>(
    x: &DataTensor,
    kind: EstimatorKind,
    count: usize,
    rng: &mut R,
) -> Result<EstimatorSamples> {
    let shape = x.shape().clone();
    let d = shape.ndims();
    let strata = match kind {
        EstimatorKind::Uniform => {
            if count == 0 {
                vec![]
            } else {
                let mut coords = vec![0; d];
                let mut draws = Vec::with_capacity(count);
                for _ in 0..count {
                    draw_index(shape.dims(), &mut coords, rng);
                    draws.push((shape.linear_unchecked(&coords), x.value_at(&coords)));
                }
                let weight = shape.total() as f64 / count as f64;
                vec![Stratum::from_draws(&shape, draws, weight)]
            }
        }
        EstimatorKind::Stratified => {
            let sp = x.as_sparse().ok_or_else(|| {
                GcpError::InvalidArgument("a stratified estimator requires a sparse tensor".into())
            })?;
            let (mut p, mut q) = super::even_split(count);
            if sp.nnz() == 0 {
                q += p;
                p = 0;
            } else if sp.num_zeros() == 0 {
                p += q;
                q = 0;
            }
            let mut nonzeros = Stratum::empty();
            if p > 0 {
                let draws = (0..p)
                    .map(|_| {
                        let n = rng.below(sp.nnz());
                        (sp.keys()[n], sp.values()[n])
                    })
                    .collect();
                nonzeros = Stratum::from_draws(&shape, draws, sp.nnz() as f64 / p as f64);
            }
            let mut zeros = Stratum::empty();
            if q > 0 {
                let mut flat = Vec::with_capacity(q * d);
                draw_zeros_into(sp, q, DEFAULT_OVERSAMPLE, rng, &mut flat)?;
                let draws = flat.chunks_exact(d).map(|c| (shape.linear_unchecked(c), 0.0)).collect();
                zeros = Stratum::from_draws(&shape, draws, sp.num_zeros() as f64 / q as f64);
            }
            vec![nonzeros, zeros]
        }
    };
    Ok(EstimatorSamples { kind, shape, strata })
}

/// F̂ = Σ (count · weight · f(x_i, m_i)) over the fixed samples.
pub fn estimate_loss(x: &DataTensor, model: &KruskalModel, loss: &LossFunction, est: &EstimatorSamples) -> Result<f64> {
    x.check_model(model)?;
    if est.shape != *x.shape() {
        return Err(GcpError::ShapeMismatch(format!(
            "estimator drawn for {} used with data of shape {}",
            est.shape,
            x.shape()
        )));
    }
    let d = est.shape.ndims();
    Ok(est.strata.iter().map(|s| s.weighted_sum(d, model, loss)).sum())
}
