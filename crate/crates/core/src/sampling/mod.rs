//! Stochastic gradients from sampled tensor entries.
//!
//! Each sampler builds a [`SampledY`] whose expectation is the dense partial
//! gradient tensor Y, then runs the sparse MTTKRP over it.

mod estimator;
mod oversample;
mod stratified;
mod uniform;
mod variance;

pub use estimator::{draw_estimator_samples, estimate_loss, EstimatorKind, EstimatorSamples, LossEstimator};
pub use oversample::{negative_binomial_quantile, oversample_rate, DEFAULT_OVERSAMPLE, DEFAULT_QUANTILE};
pub use stratified::{
    sample_semistratified, sample_stratified, sample_zeros_rejection, sample_zeros_rejection_with_stats,
    RejectionStats,
};
pub use uniform::sample_uniform;
pub use variance::{empirical_bias_variance, gradient_statistics, BiasVariance, GradientStats};

use std::fmt;
use std::str::FromStr;

use crate::error::{GcpError, Result};
use crate::loss::LossFunction;
use crate::mttkrp::{mttkrp_sampled_all, GradientSet, KernelOptions, SampledY};
use crate::rng::{GcpRng, IndexSource};
use crate::tensor::{DataTensor, KruskalModel, SparseTensor};

/// Sampling strategy and its budgets.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SamplerKind {
    /// `samples` indices uniformly with replacement over all entries.
    Uniform { samples: usize },
    /// `nonzeros` from the nonzero list and `zeros` true zeros found by
    /// rejection, oversampling candidate draws by `oversample`.
    Stratified { nonzeros: usize, zeros: usize, oversample: f64 },
    /// `nonzeros` from the nonzero list with a correction term and `zeros`
    /// unrestricted draws treated as zeros.
    SemiStratified { nonzeros: usize, zeros: usize },
}

/// Splits a total budget into ⌊s/2⌋ nonzeros and ⌈s/2⌉ zeros.
pub fn even_split(total: usize) -> (usize, usize) {
    (total / 2, total - total / 2)
}

impl SamplerKind {
    pub fn uniform(samples: usize) -> Self {
        SamplerKind::Uniform { samples }
    }

    pub fn stratified(total: usize) -> Self {
        let (nonzeros, zeros) = even_split(total);
        SamplerKind::Stratified {
            nonzeros,
            zeros,
            oversample: DEFAULT_OVERSAMPLE,
        }
    }

    pub fn semi_stratified(total: usize) -> Self {
        let (nonzeros, zeros) = even_split(total);
        SamplerKind::SemiStratified { nonzeros, zeros }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SamplerKind::Uniform { .. } => "uniform",
            SamplerKind::Stratified { .. } => "stratified",
            SamplerKind::SemiStratified { .. } => "semi-stratified",
        }
    }

    pub fn total_samples(&self) -> usize {
        match *self {
            SamplerKind::Uniform { samples } => samples,
            SamplerKind::Stratified { nonzeros, zeros, .. } | SamplerKind::SemiStratified { nonzeros, zeros } => {
                nonzeros + zeros
            }
        }
    }

    pub fn requires_sparse(&self) -> bool {
        !matches!(self, SamplerKind::Uniform { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SamplerKind::Uniform { samples: 0 } => {
                Err(GcpError::InvalidArgument("uniform sampler needs at least one sample".into()))
            }
            SamplerKind::Stratified { nonzeros, zeros, .. } | SamplerKind::SemiStratified { nonzeros, zeros }
                if nonzeros + zeros == 0 =>
            {
                Err(GcpError::InvalidArgument(format!("{} sampler needs at least one sample", self.name())))
            }
            SamplerKind::Stratified { oversample, .. } if !(oversample > 1.0 && oversample.is_finite()) => Err(
                GcpError::InvalidArgument(format!("oversample rate must exceed 1, got {oversample}")),
            ),
            _ => Ok(()),
        }
    }

    /// Draws one stochastic Ỹ.
    pub fn sample<R: IndexSource + ?Sized>(
        &self,
        x: &DataTensor,
        model: &KruskalModel,
        loss: &LossFunction,
        rng: &mut R,
    ) -> Result<SampledY> {
        self.validate()?;
        match *self {
            SamplerKind::Uniform { samples } => sample_uniform(x, model, loss, samples, rng),
            SamplerKind::Stratified {
                nonzeros,
                zeros,
                oversample,
            } => sample_stratified(require_sparse(self, x)?, model, loss, nonzeros, zeros, oversample, rng),
            SamplerKind::SemiStratified { nonzeros, zeros } => {
                sample_semistratified(require_sparse(self, x)?, model, loss, nonzeros, zeros, rng)
            }
        }
    }

    /// One stochastic gradient G̃_1, ..., G̃_d.
    pub fn stochastic_gradient<R: IndexSource + ?Sized>(
        &self,
        x: &DataTensor,
        model: &KruskalModel,
        loss: &LossFunction,
        rng: &mut R,
        opts: KernelOptions,
    ) -> Result<GradientSet> {
        let y = self.sample(x, model, loss, rng)?;
        mttkrp_sampled_all(&y, model, opts)
    }
}

fn require_sparse<'a>(kind: &SamplerKind, x: &'a DataTensor) -> Result<&'a SparseTensor> {
    x.as_sparse().ok_or_else(|| {
        GcpError::InvalidArgument(format!("the {} sampler requires a sparse tensor", kind.name()))
    })
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Sampler family selected by name; budgets are attached separately.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplerName {
    Uniform,
    Stratified,
    SemiStratified,
}

impl FromStr for SamplerName {
    type Err = GcpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(SamplerName::Uniform),
            "stratified" => Ok(SamplerName::Stratified),
            "semi-stratified" => Ok(SamplerName::SemiStratified),
            other => Err(GcpError::InvalidArgument(format!("unknown sampler '{other}'"))),
        }
    }
}

impl SamplerName {
    /// Builds the sampler for a total budget, with optional explicit split.
    pub fn with_budget(self, total: usize, split: Option<(usize, usize)>, oversample: f64) -> SamplerKind {
        let (nonzeros, zeros) = split.unwrap_or_else(|| even_split(total));
        match self {
            SamplerName::Uniform => SamplerKind::Uniform { samples: total },
            SamplerName::Stratified => SamplerKind::Stratified {
                nonzeros,
                zeros,
                oversample,
            },
            SamplerName::SemiStratified => SamplerKind::SemiStratified { nonzeros, zeros },
        }
    }
}

/// Anything that can produce a (stochastic or exact) gradient for a model.
pub trait GradientSampler {
    fn gradient(
        &self,
        x: &DataTensor,
        model: &KruskalModel,
        loss: &LossFunction,
        rng: &mut GcpRng,
    ) -> Result<GradientSet>;
}

impl GradientSampler for SamplerKind {
    fn gradient(
        &self,
        x: &DataTensor,
        model: &KruskalModel,
        loss: &LossFunction,
        rng: &mut GcpRng,
    ) -> Result<GradientSet> {
        self.stochastic_gradient(x, model, loss, rng, KernelOptions::default())
    }
}
