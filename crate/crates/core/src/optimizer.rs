//! GCP-Adam: Adam on stochastic gradients, grouped into epochs with a fixed
//! sample loss estimate after each one. An epoch that increases the estimate
//! is rolled back and the learning rate decays; the run stops after more
//! than `max_bad_epochs` such failures.

use std::time::Instant;

use crate::error::{GcpError, Result};
use crate::loss::LossFunction;
use crate::mttkrp::{GradientSet, KernelOptions};
use crate::rng::GcpRng;
use crate::sampling::{draw_estimator_samples, EstimatorKind, LossEstimator, SamplerKind};
use crate::tensor::{DataTensor, KruskalModel, Matrix};

/// Adam moments and schedule state.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    /// First moments B_k.
    pub first: Vec<Matrix>,
    /// Second moments C_k.
    pub second: Vec<Matrix>,
    /// Completed iterations.
    pub t: u64,
    pub learning_rate: f64,
    pub bad_epochs: usize,
}

impl AdamState {
    pub fn new(model: &KruskalModel, learning_rate: f64) -> Self {
        let zeros: Vec<Matrix> = model
            .factors()
            .iter()
            .map(|a| Matrix::zeros(a.rows(), a.cols()))
            .collect();
        AdamState {
            first: zeros.clone(),
            second: zeros,
            t: 0,
            learning_rate,
            bad_epochs: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub lower_bound: Option<f64>,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            lower_bound: None,
        }
    }
}

/// One Adam iteration over all modes, followed by projection onto [ℓ, ∞).
///
/// Bias corrections use t+1 so the first step divides by (1 − β); ε sits
/// inside the square root: A ← A − α B̂ ⊘ √(Ĉ + ε).
pub fn adam_step(model: &mut KruskalModel, state: &mut AdamState, grads: &GradientSet, params: &AdamParams) {
    let step = (state.t + 1) as i32;
    let c1 = 1.0 - params.beta1.powi(step);
    let c2 = 1.0 - params.beta2.powi(step);
    let alpha = state.learning_rate;
    for (k, a) in model.factors_mut().iter_mut().enumerate() {
        let g = grads.grads[k].as_slice();
        let b = state.first[k].as_mut_slice();
        let c = state.second[k].as_mut_slice();
        for (n, av) in a.as_mut_slice().iter_mut().enumerate() {
            b[n] = params.beta1 * b[n] + (1.0 - params.beta1) * g[n];
            c[n] = params.beta2 * c[n] + (1.0 - params.beta2) * g[n] * g[n];
            let b_hat = b[n] / c1;
            let c_hat = c[n] / c2;
            *av -= alpha * b_hat / (c_hat + params.epsilon).sqrt();
            if let Some(lb) = params.lower_bound {
                if *av < lb {
                    *av = lb;
                }
            }
        }
    }
    state.t += 1;
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitConfig {
    pub loss: LossFunction,
    pub rank: usize,
    pub sampler: SamplerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Iterations per epoch, τ.
    pub epoch_iters: usize,
    /// Failed epochs tolerated, κ.
    pub max_bad_epochs: usize,
    /// Learning-rate decay on failure, ν.
    pub decay: f64,
    pub lower_bound: Option<f64>,
    pub estimator_count: usize,
    /// `None` picks stratified for stratified samplers on sparse data and
    /// uniform otherwise.
    pub estimator_kind: Option<EstimatorKind>,
    pub max_epochs: usize,
    pub kernel: KernelOptions,
}

impl FitConfig {
    pub fn new(loss: LossFunction, rank: usize, sampler: SamplerKind) -> Self {
        FitConfig {
            loss,
            rank,
            sampler,
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epoch_iters: 1000,
            max_bad_epochs: 1,
            decay: 0.1,
            lower_bound: loss.lower_bound,
            estimator_count: 100_000,
            estimator_kind: None,
            max_epochs: 100,
            kernel: KernelOptions::default(),
        }
    }

    pub fn adam_params(&self) -> AdamParams {
        AdamParams {
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            lower_bound: self.lower_bound,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(GcpError::InvalidArgument(msg));
        if self.rank == 0 {
            return bad("rank must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad(format!("betas must lie in [0, 1), got {} and {}", self.beta1, self.beta2));
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return bad(format!("decay must lie in (0, 1), got {}", self.decay));
        }
        if self.epoch_iters == 0 {
            return bad("epochs need at least one iteration".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if self.epsilon.is_nan() || self.epsilon < 0.0 {
            return bad(format!("epsilon must be nonnegative, got {}", self.epsilon));
        }
        self.sampler.validate()
    }

    fn resolved_estimator_kind(&self, x: &DataTensor) -> EstimatorKind {
        self.estimator_kind.unwrap_or(match (self.sampler.requires_sparse(), x) {
            (true, DataTensor::Sparse(_)) => EstimatorKind::Stratified,
            _ => EstimatorKind::Uniform,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss_estimate: f64,
    pub learning_rate: f64,
    pub seconds: f64,
    pub accepted: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FitTrace {
    pub records: Vec<EpochRecord>,
}

impl FitTrace {
    pub fn accepted_losses(&self) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.accepted)
            .map(|r| r.loss_estimate)
            .collect()
    }

    /// Epochs run after the initial estimate.
    pub fn epochs(&self) -> usize {
        self.records.len().saturating_sub(1)
    }
}

/// State visible to an observer after each epoch decision (rollback already
/// applied).
pub struct EpochEvent<'a> {
    pub record: &'a EpochRecord,
    pub model: &'a KruskalModel,
    pub state: &'a AdamState,
    /// Incumbent loss estimate.
    pub loss_estimate: f64,
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub model: KruskalModel,
    pub trace: FitTrace,
    pub state: AdamState,
    pub loss_estimate: f64,
}

/// Optional overrides for a fit.
#[derive(Default)]
pub struct FitHooks<'a> {
    /// Starting point instead of a random draw.
    pub init: Option<KruskalModel>,
    /// Shared loss estimator instead of a fresh draw.
    pub estimator: Option<&'a dyn LossEstimator>,
    pub observer: Option<&'a mut dyn FnMut(&EpochEvent<'_>)>,
}

/// Initial guess: uniform(0, 1) entries scaled so that ‖M‖ = ‖X‖.
pub fn initial_guess(x: &DataTensor, rank: usize, rng: &mut GcpRng) -> Result<KruskalModel> {
    let mut model = KruskalModel::random_uniform(x.shape(), rank, rng)?;
    model.scale_to_norm(x.norm());
    Ok(model)
}

pub fn fit_gcp_adam(x: &DataTensor, cfg: &FitConfig, rng: &GcpRng) -> Result<FitResult> {
    fit_gcp_adam_with(x, cfg, rng, FitHooks::default())
}

pub fn fit_gcp_adam_with(x: &DataTensor, cfg: &FitConfig, rng: &GcpRng, hooks: FitHooks<'_>) -> Result<FitResult> {
    cfg.validate()?;
    if cfg.sampler.requires_sparse() && x.as_sparse().is_none() {
        return Err(GcpError::InvalidArgument(format!(
            "the {} sampler requires sparse input",
            cfg.sampler.name()
        )));
    }
    cfg.loss.check_all(x.stored_values())?;
    if x.has_implicit_zeros() {
        cfg.loss.check_data(0.0)?;
    }

    let mut model = match hooks.init {
        Some(m) => {
            x.check_model(&m)?;
            if m.rank() != cfg.rank {
                return Err(GcpError::InvalidArgument(format!(
                    "initial guess has rank {}, configuration asks for {}",
                    m.rank(),
                    cfg.rank
                )));
            }
            m
        }
        None => initial_guess(x, cfg.rank, &mut rng.split("init"))?,
    };
    if let Some(lb) = cfg.lower_bound {
        model.clamp_below(lb);
    }

    let drawn;
    let estimator: &dyn LossEstimator = match hooks.estimator {
        Some(e) => e,
        None => {
            let kind = cfg.resolved_estimator_kind(x);
            drawn = draw_estimator_samples(x, kind, cfg.estimator_count, &mut rng.split("estimator"))?;
            &drawn
        }
    };
    let mut observer = hooks.observer;
    let mut grad_rng = rng.split("gradients");
    let params = cfg.adam_params();
    let started = Instant::now();

    let mut state = AdamState::new(&model, cfg.learning_rate);
    let mut loss_estimate = estimator.estimate(x, &model, &cfg.loss)?;
    if !loss_estimate.is_finite() {
        return Err(GcpError::NonFinite {
            epoch: 0,
            value: loss_estimate,
        });
    }
    let mut trace = FitTrace::default();
    let initial = EpochRecord {
        epoch: 0,
        loss_estimate,
        learning_rate: state.learning_rate,
        seconds: started.elapsed().as_secs_f64(),
        accepted: true,
    };
    trace.records.push(initial);
    if let Some(obs) = observer.as_mut() {
        obs(&EpochEvent {
            record: &initial,
            model: &model,
            state: &state,
            loss_estimate,
        });
    }

    let mut epoch = 0;
    while state.bad_epochs <= cfg.max_bad_epochs && epoch < cfg.max_epochs {
        epoch += 1;
        let saved_model = model.clone();
        let saved_first = state.first.clone();
        let saved_second = state.second.clone();
        let saved_t = state.t;
        let previous = loss_estimate;

        for _ in 0..cfg.epoch_iters {
            let g = cfg
                .sampler
                .stochastic_gradient(x, &model, &cfg.loss, &mut grad_rng, cfg.kernel)?;
            adam_step(&mut model, &mut state, &g, &params);
        }

        let current = estimator.estimate(x, &model, &cfg.loss)?;
        if !current.is_finite() {
            return Err(GcpError::NonFinite { epoch, value: current });
        }
        let accepted = current <= previous || previous.is_nan();
        let record = EpochRecord {
            epoch,
            loss_estimate: current,
            learning_rate: state.learning_rate,
            seconds: started.elapsed().as_secs_f64(),
            accepted,
        };
        trace.records.push(record);
        if accepted {
            loss_estimate = current;
        } else {
            model = saved_model;
            state.first = saved_first;
            state.second = saved_second;
            state.t = saved_t;
            loss_estimate = previous;
            state.learning_rate *= cfg.decay;
            state.bad_epochs += 1;
        }
        if let Some(obs) = observer.as_mut() {
            obs(&EpochEvent {
                record: &record,
                model: &model,
                state: &state,
                loss_estimate,
            });
        }
    }

    Ok(FitResult {
        model,
        trace,
        state,
        loss_estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;

    fn tiny_model() -> KruskalModel {
        KruskalModel::new(vec![
            Matrix::from_row_major(2, 1, vec![0.5, 1.0]),
            Matrix::from_row_major(2, 1, vec![2.0, 0.001]),
        ])
        .unwrap()
    }

    #[test]
    fn zero_gradient_leaves_model_unchanged() {
        let mut m = tiny_model();
        let before = m.clone();
        let mut st = AdamState::new(&m, 0.01);
        let g = GradientSet::zeros_like(&m);
        adam_step(&mut m, &mut st, &g, &AdamParams::default());
        assert_eq!(m, before);
        assert_eq!(st.t, 1);
        assert!(st.first.iter().chain(&st.second).all(|x| x.frobenius_norm_sq() == 0.0));
    }

    #[test]
    fn projection_clamps_to_exactly_zero() {
        let mut m = tiny_model();
        let mut st = AdamState::new(&m, 0.01);
        let mut g = GradientSet::zeros_like(&m);
        g.grads[1][(1, 0)] = 5.0;
        let params = AdamParams {
            lower_bound: Some(0.0),
            ..AdamParams::default()
        };
        adam_step(&mut m, &mut st, &g, &params);
        assert_eq!(m.factor(1)[(1, 0)], 0.0);
        assert_eq!(m.factor(1)[(0, 0)], 2.0);
    }

    #[test]
    fn memoryless_step_is_sign_like() {
        let mut m = tiny_model();
        let before = m.clone();
        let mut st = AdamState::new(&m, 0.01);
        let mut g = GradientSet::zeros_like(&m);
        g.grads[0][(0, 0)] = 3.0;
        g.grads[0][(1, 0)] = -0.5;
        let params = AdamParams {
            beta1: 0.0,
            beta2: 0.0,
            ..AdamParams::default()
        };
        adam_step(&mut m, &mut st, &g, &params);
        for (i, gi) in [(0usize, 3.0f64), (1, -0.5)] {
            let step = m.factor(0)[(i, 0)] - before.factor(0)[(i, 0)];
            let expect = -0.01 * gi / (gi * gi + 1e-8).sqrt();
            assert!((step - expect).abs() < 1e-15);
            assert!((step.abs() - 0.01).abs() < 1e-9);
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = FitConfig::new(LossFunction::gaussian(), 2, SamplerKind::uniform(10));
        assert!(cfg.validate().is_ok());
        cfg.beta1 = 1.0;
        assert!(cfg.validate().is_err());
        cfg.beta1 = 0.9;
        cfg.decay = 1.0;
        assert!(cfg.validate().is_err());
        cfg.decay = 0.1;
        cfg.epoch_iters = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn stratified_sampler_rejects_dense_data() {
        let shape = Shape::new(vec![3, 3]).unwrap();
        let x = DataTensor::Dense(KruskalModel::filled(&shape, 1, 1.0).unwrap().full().unwrap());
        let cfg = FitConfig::new(LossFunction::gaussian(), 1, SamplerKind::stratified(4));
        assert!(fit_gcp_adam(&x, &cfg, &GcpRng::seed_from_u64(0)).is_err());
    }
}
