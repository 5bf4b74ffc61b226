use crate::error::Result;
use crate::loss::LossFunction;
use crate::mttkrp::SampledY;
use crate::rng::IndexSource;
use crate::tensor::{DataTensor, KruskalModel};

/// Fills `coords` with one uniformly drawn multi-index (d mode-wise draws).
#[inline]
pub(crate) fn draw_index<R: IndexSource + ?Sized>(dims: &[usize], coords: &mut [usize], rng: &mut R) {
    for (c, &n) in coords.iter_mut().zip(dims) {
        *c = rng.below(n);
    }
}

/// `s` indices uniformly with replacement; each contributes (n^d/s)·g(x_i, m_i).
/// Sparse data costs one membership search per draw.
pub fn sample_uniform<R: IndexSource + ?Sized>(
    x: &DataTensor,
    model: &KruskalModel,
    loss: &LossFunction,
    samples: usize,
    rng: &mut R,
) -> Result<SampledY> {
    x.check_model(model)?;
    let shape = x.shape();
    let mut y = SampledY::with_capacity(shape.clone(), samples);
    if samples == 0 {
        return Ok(y);
    }
    let weight = shape.total() as f64 / samples as f64;
    let mut coords = vec![0; shape.ndims()];
    for _ in 0..samples {
        draw_index(shape.dims(), &mut coords, rng);
        let m = model.entry(&coords);
        y.push(&coords, weight * loss.grad(x.value_at(&coords), m));
    }
    Ok(y)
}
