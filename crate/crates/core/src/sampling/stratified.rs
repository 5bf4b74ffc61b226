use super::uniform::draw_index;
use crate::error::{GcpError, Result};
use crate::loss::LossFunction;
use crate::mttkrp::SampledY;
use crate::rng::IndexSource;
use crate::tensor::{KruskalModel, MultiIndex, SparseTensor};

/// Bookkeeping from one rejection-sampling call.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RejectionStats {
    /// Candidate indices drawn.
    pub drawn: u64,
    /// Candidates rejected because they hit a nonzero.
    pub rejected: u64,
    /// Bulk rounds needed (more than one means the first round fell short).
    pub rounds: u32,
}

impl RejectionStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.drawn == 0 {
            return 1.0;
        }
        (self.drawn - self.rejected) as f64 / self.drawn as f64
    }
}

/// Appends `count` zero positions to `out` (flat coordinates).
///
/// Each round budgets ⌈ρ·(n^d/ζ)·remaining⌉ candidates; candidates are tested
/// against the sorted nonzero keys and the round ends early once enough zeros
/// are accepted. Rounds repeat on shortfall.
pub(crate) fn draw_zeros_into<R: IndexSource + ?Sized>(
    x: &SparseTensor,
    count: usize,
    oversample: f64,
    rng: &mut R,
    out: &mut Vec<usize>,
) -> Result<RejectionStats> {
    let zeros = x.num_zeros();
    if zeros < count as u128 {
        return Err(GcpError::Infeasible(format!(
            "requested {count} zero samples but the tensor has only {zeros} zeros"
        )));
    }
    let shape = x.shape();
    let inflate = oversample * (shape.total() as f64 / zeros as f64);
    let mut stats = RejectionStats::default();
    let mut coords = vec![0; shape.ndims()];
    let mut remaining = count;
    while remaining > 0 {
        stats.rounds += 1;
        let budget = (inflate * remaining as f64).ceil().max(1.0) as u64;
        for _ in 0..budget {
            draw_index(shape.dims(), &mut coords, rng);
            stats.drawn += 1;
            if x.contains_key(shape.linear_unchecked(&coords)) {
                stats.rejected += 1;
                continue;
            }
            out.extend_from_slice(&coords);
            remaining -= 1;
            if remaining == 0 {
                break;
            }
        }
    }
    Ok(stats)
}

/// Exactly `count` indices drawn uniformly from the zeros of `x`.
pub fn sample_zeros_rejection<R: IndexSource + ?Sized>(
    x: &SparseTensor,
    count: usize,
    oversample: f64,
    rng: &mut R,
) -> Result<Vec<MultiIndex>> {
    Ok(sample_zeros_rejection_with_stats(x, count, oversample, rng)?.0)
}

pub fn sample_zeros_rejection_with_stats<R: IndexSource + ?Sized>(
    x: &SparseTensor,
    count: usize,
    oversample: f64,
    rng: &mut R,
) -> Result<(Vec<MultiIndex>, RejectionStats)> {
    let mut flat = Vec::with_capacity(count * x.shape().ndims());
    let stats = draw_zeros_into(x, count, oversample, rng, &mut flat)?;
    let d = x.shape().ndims();
    Ok((flat.chunks_exact(d).map(MultiIndex::from).collect(), stats))
}

/// Moves the nonzero budget to the other stratum when there are no nonzeros.
fn effective_budgets(x: &SparseTensor, nonzeros: usize, zeros: usize) -> (usize, usize) {
    if x.nnz() == 0 {
        (0, zeros + nonzeros)
    } else {
        (nonzeros, zeros)
    }
}

/// `nonzeros` draws from the nonzero list weighted (η/p)·g(x_i, m_i) and
/// `zeros` rejection-sampled zeros weighted (ζ/q)·g(0, m_i).
pub fn sample_stratified<R: IndexSource + ?Sized>(
    x: &SparseTensor,
    model: &KruskalModel,
    loss: &LossFunction,
    nonzeros: usize,
    zeros: usize,
    oversample: f64,
    rng: &mut R,
) -> Result<SampledY> {
    crate::mttkrp::check_shape(x.shape(), model)?;
    let (p, q) = effective_budgets(x, nonzeros, zeros);
    let mut y = SampledY::with_capacity(x.shape().clone(), p + q);
    push_nonzeros(x, model, p, rng, &mut y, |xv, m| loss.grad(xv, m));

    if q > 0 {
        let weight = x.num_zeros() as f64 / q as f64;
        let mut flat = Vec::with_capacity(q * x.shape().ndims());
        draw_zeros_into(x, q, oversample, rng, &mut flat)?;
        for c in flat.chunks_exact(x.shape().ndims()) {
            y.push(c, weight * loss.grad(0.0, model.entry(c)));
        }
    }
    Ok(y)
}

fn push_nonzeros<R: IndexSource + ?Sized>(
    x: &SparseTensor,
    model: &KruskalModel,
    p: usize,
    rng: &mut R,
    y: &mut SampledY,
    value: impl Fn(f64, f64) -> f64,
) {
    if p == 0 {
        return;
    }
    let eta = x.nnz();
    let weight = eta as f64 / p as f64;
    for _ in 0..p {
        let n = rng.below(eta);
        let c = x.coords(n);
        let m = model.entry(c);
        y.push(c, weight * value(x.values()[n], m));
    }
}

/// `nonzeros` draws from the nonzero list weighted (η/p)·[g(x_i,m_i) − g(0,m_i)]
/// plus `zeros` unrestricted draws weighted (n^d/q)·g(0, m_i). No rejection.
pub fn sample_semistratified<R: IndexSource + ?Sized>(
    x: &SparseTensor,
    model: &KruskalModel,
    loss: &LossFunction,
    nonzeros: usize,
    zeros: usize,
    rng: &mut R,
) -> Result<SampledY> {
    crate::mttkrp::check_shape(x.shape(), model)?;
    let (p, q) = effective_budgets(x, nonzeros, zeros);
    let shape = x.shape();
    let mut y = SampledY::with_capacity(shape.clone(), p + q);
    push_nonzeros(x, model, p, rng, &mut y, |xv, m| loss.grad(xv, m) - loss.grad(0.0, m));

    if q > 0 {
        let weight = shape.total() as f64 / q as f64;
        let mut coords = vec![0; shape.ndims()];
        for _ in 0..q {
            draw_index(shape.dims(), &mut coords, rng);
            y.push(&coords, weight * loss.grad(0.0, model.entry(&coords)));
        }
    }
    Ok(y)
}
