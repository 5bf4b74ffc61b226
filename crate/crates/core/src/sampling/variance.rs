use rayon::prelude::*;

use super::GradientSampler;
use crate::error::{GcpError, Result};
use crate::loss::LossFunction;
use crate::mttkrp::{gradient_full, GradientSet};
use crate::rng::GcpRng;
use crate::tensor::{DataTensor, KruskalModel};

/// Realizations evaluated per parallel batch.
const BATCH: usize = 64;

/// Per-coordinate statistics of N vectorized gradient realizations,
/// accumulated with Welford updates in realization order.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientStats {
    pub count: usize,
    pub mean: Vec<f64>,
    /// Σ_ξ (g_ξ − ĝ)² per coordinate.
    pub sum_sq_dev: Vec<f64>,
}

impl GradientStats {
    /// Standard error of the mean per coordinate, using the N−1 sample
    /// variance.
    pub fn standard_errors(&self) -> Vec<f64> {
        let n = self.count as f64;
        self.sum_sq_dev
            .iter()
            .map(|s| (s / (n - 1.0) / n).sqrt())
            .collect()
    }

    /// (1/N) Σ_ξ ‖g_ξ − ĝ‖².
    pub fn total_variance(&self) -> f64 {
        self.sum_sq_dev.iter().sum::<f64>() / self.count as f64
    }
}

/// Runs `realizations` independent gradient draws; draw ξ uses
/// `rng.stream("realization", ξ)` so results do not depend on thread count.
pub fn gradient_statistics<S: GradientSampler + Sync + ?Sized>(
    sampler: &S,
    x: &DataTensor,
    model: &KruskalModel,
    loss: &LossFunction,
    realizations: usize,
    rng: &GcpRng,
) -> Result<GradientStats> {
    if realizations < 2 {
        return Err(GcpError::InvalidArgument("need at least two realizations".into()));
    }
    let len: usize = model.factors().iter().map(|a| a.rows() * a.cols()).sum();
    let mut stats = GradientStats {
        count: 0,
        mean: vec![0.0; len],
        sum_sq_dev: vec![0.0; len],
    };
    for start in (0..realizations).step_by(BATCH) {
        let end = (start + BATCH).min(realizations);
        let batch: Vec<Vec<f64>> = (start..end)
            .into_par_iter()
            .map(|xi| {
                let mut stream = rng.stream("realization", xi as u64);
                sampler.gradient(x, model, loss, &mut stream).map(|g| g.to_vec())
            })
            .collect::<Result<_>>()?;
        for g in batch {
            stats.count += 1;
            let n = stats.count as f64;
            for ((m, s), v) in stats.mean.iter_mut().zip(&mut stats.sum_sq_dev).zip(g) {
                let delta = v - *m;
                *m += delta / n;
                *s += delta * (v - *m);
            }
        }
    }
    Ok(stats)
}

/// Empirical bias ‖ĝ − g‖₂ and variance (1/N) Σ‖g̃_ξ − ĝ‖₂² against the exact
/// gradient g.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BiasVariance {
    pub bias: f64,
    pub variance: f64,
    /// ‖g‖₂ of the exact gradient.
    pub exact_norm: f64,
}

pub fn empirical_bias_variance<S: GradientSampler + Sync + ?Sized>(
    sampler: &S,
    x: &DataTensor,
    model: &KruskalModel,
    loss: &LossFunction,
    realizations: usize,
    rng: &GcpRng,
) -> Result<BiasVariance> {
    let exact = gradient_full(x, model, loss)?;
    let stats = gradient_statistics(sampler, x, model, loss, realizations, rng)?;
    Ok(bias_variance_from(&stats, &exact))
}

pub(crate) fn bias_variance_from(stats: &GradientStats, exact: &GradientSet) -> BiasVariance {
    let g = exact.to_vec();
    let bias = stats
        .mean
        .iter()
        .zip(&g)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    BiasVariance {
        bias,
        variance: stats.total_variance(),
        exact_norm: exact.norm(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;

    struct Exact;

    impl GradientSampler for Exact {
        fn gradient(&self, x: &DataTensor, model: &KruskalModel, loss: &LossFunction, _: &mut GcpRng) -> Result<GradientSet> {
            gradient_full(x, model, loss)
        }
    }

    #[test]
    fn exact_sampler_has_no_bias_or_variance() {
        let shape = Shape::new(vec![3, 3, 2]).unwrap();
        let mut rng = GcpRng::seed_from_u64(1);
        let model = KruskalModel::random_uniform(&shape, 2, &mut rng).unwrap();
        let data = KruskalModel::random_uniform(&shape, 1, &mut rng).unwrap().full().unwrap();
        let x = DataTensor::Dense(data);
        let bv = empirical_bias_variance(&Exact, &x, &model, &LossFunction::gaussian(), 10, &rng).unwrap();
        assert!(bv.bias < 1e-12);
        assert!(bv.variance < 1e-20);
        assert!(bv.exact_norm > 0.0);
    }

    #[test]
    fn welford_matches_two_pass() {
        let shape = Shape::new(vec![3, 2]).unwrap();
        let mut rng = GcpRng::seed_from_u64(3);
        let model = KruskalModel::random_uniform(&shape, 2, &mut rng).unwrap();
        let x = DataTensor::Dense(KruskalModel::random_uniform(&shape, 2, &mut rng).unwrap().full().unwrap());
        let sampler = super::super::SamplerKind::uniform(2);
        let loss = LossFunction::gaussian();
        let stats = gradient_statistics(&sampler, &x, &model, &loss, 200, &rng).unwrap();
        let draws: Vec<Vec<f64>> = (0..200)
            .map(|xi| {
                let mut s = rng.stream("realization", xi);
                sampler.gradient(&x, &model, &loss, &mut s).unwrap().to_vec()
            })
            .collect();
        let len = draws[0].len();
        let mean: Vec<f64> = (0..len).map(|c| draws.iter().map(|g| g[c]).sum::<f64>() / 200.0).collect();
        let var: f64 = draws
            .iter()
            .map(|g| g.iter().zip(&mean).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
            .sum::<f64>()
            / 200.0;
        for (a, b) in stats.mean.iter().zip(&mean) {
            assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()));
        }
        assert!((stats.total_variance() - var).abs() < 1e-9 * var);
        assert!(gradient_statistics(&sampler, &x, &model, &loss, 1, &rng).is_err());
    }
}
