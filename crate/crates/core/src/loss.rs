//! Elementwise loss functions f(x, m) and their derivatives ∂f/∂m.

use std::fmt;
use std::str::FromStr;

use crate::error::{GcpError, Result};

/// Shift added inside logarithms and denominators.
pub const DEFAULT_SAFE_SHIFT: f64 = 1e-10;
pub const DEFAULT_HUBER_DELTA: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LossKind {
    /// (x − m)²
    Gaussian,
    /// m − x log m
    Poisson,
    /// log(m + 1) − x log m, with m the odds of x = 1
    BernoulliOdds,
    /// x/m + log m
    Gamma,
    /// β-divergence with β = 1/2: 2√m + 2x/√m
    BetaHalf,
    /// Quadratic within `delta` of the data, linear beyond.
    Huber { delta: f64 },
}

impl LossKind {
    /// Lower bound ℓ projected onto the factor entries during fitting.
    pub fn default_lower_bound(self) -> Option<f64> {
        match self {
            LossKind::Gaussian | LossKind::Huber { .. } => None,
            _ => Some(0.0),
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossKind::Gaussian => f.write_str("gaussian"),
            LossKind::Poisson => f.write_str("poisson"),
            LossKind::BernoulliOdds => f.write_str("bernoulli-odds"),
            LossKind::Gamma => f.write_str("gamma"),
            LossKind::BetaHalf => f.write_str("beta-half"),
            LossKind::Huber { delta } => write!(f, "huber:{delta}"),
        }
    }
}

impl FromStr for LossKind {
    type Err = GcpError;

    /// Parses `gaussian|poisson|bernoulli-odds|gamma|beta-half|huber[:<delta>]`.
    fn from_str(s: &str) -> Result<Self> {
        let kind = match s {
            "gaussian" => LossKind::Gaussian,
            "poisson" => LossKind::Poisson,
            "bernoulli-odds" => LossKind::BernoulliOdds,
            "gamma" => LossKind::Gamma,
            "beta-half" => LossKind::BetaHalf,
            "huber" => LossKind::Huber {
                delta: DEFAULT_HUBER_DELTA,
            },
            other => {
                let delta = other
                    .strip_prefix("huber:")
                    .and_then(|d| d.parse::<f64>().ok())
                    .ok_or_else(|| GcpError::InvalidArgument(format!("unknown loss '{other}'")))?;
                if !(delta > 0.0 && delta.is_finite()) {
                    return Err(GcpError::InvalidArgument(format!(
                        "huber threshold must be positive, got {delta}"
                    )));
                }
                LossKind::Huber { delta }
            }
        };
        Ok(kind)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossFunction {
    pub kind: LossKind,
    pub lower_bound: Option<f64>,
    pub safe_shift: f64,
}

impl LossFunction {
    pub fn new(kind: LossKind) -> Self {
        LossFunction {
            kind,
            lower_bound: kind.default_lower_bound(),
            safe_shift: DEFAULT_SAFE_SHIFT,
        }
    }

    pub fn gaussian() -> Self {
        Self::new(LossKind::Gaussian)
    }

    pub fn poisson() -> Self {
        Self::new(LossKind::Poisson)
    }

    pub fn bernoulli_odds() -> Self {
        Self::new(LossKind::BernoulliOdds)
    }

    pub fn gamma() -> Self {
        Self::new(LossKind::Gamma)
    }

    pub fn beta_half() -> Self {
        Self::new(LossKind::BetaHalf)
    }

    pub fn huber(delta: f64) -> Self {
        Self::new(LossKind::Huber { delta })
    }

    /// Whether `x` is admissible data for this loss.
    pub fn check_data(&self, x: f64) -> Result<()> {
        let ok = match self.kind {
            LossKind::Gaussian | LossKind::Huber { .. } => x.is_finite(),
            LossKind::BernoulliOdds => x == 0.0 || x == 1.0,
            LossKind::Poisson | LossKind::Gamma | LossKind::BetaHalf => x.is_finite() && x >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(GcpError::Domain(format!("{} loss cannot take data value {x}", self.kind)))
        }
    }

    /// Validates every value in `values`.
    pub fn check_all(&self, values: &[f64]) -> Result<()> {
        values.iter().try_for_each(|&x| self.check_data(x))
    }

    fn check_model_value(&self, m: f64) -> Result<()> {
        if !m.is_finite() {
            return Err(GcpError::Domain(format!("model value {m} is not finite")));
        }
        if let Some(lb) = self.lower_bound {
            if m < lb {
                return Err(GcpError::Domain(format!(
                    "model value {m} below the lower bound {lb} of the {} loss",
                    self.kind
                )));
            }
        }
        Ok(())
    }

    /// Checked f(x, m).
    pub fn loss_value(&self, x: f64, m: f64) -> Result<f64> {
        self.check_data(x)?;
        self.check_model_value(m)?;
        Ok(self.value(x, m))
    }

    /// Checked ∂f/∂m.
    pub fn loss_grad(&self, x: f64, m: f64) -> Result<f64> {
        self.check_data(x)?;
        self.check_model_value(m)?;
        Ok(self.grad(x, m))
    }

    /// f(x, m) without domain checks.
    #[inline]
    pub fn value(&self, x: f64, m: f64) -> f64 {
        let eps = self.safe_shift;
        match self.kind {
            LossKind::Gaussian => (x - m) * (x - m),
            LossKind::Poisson => m - x * (m + eps).ln(),
            LossKind::BernoulliOdds => (m + 1.0).ln() - x * (m + eps).ln(),
            LossKind::Gamma => x / (m + eps) + (m + eps).ln(),
            LossKind::BetaHalf => {
                let s = (m + eps).sqrt();
                2.0 * s + 2.0 * x / s
            }
            LossKind::Huber { delta } => {
                let r = (x - m).abs();
                if r <= delta {
                    r * r
                } else {
                    2.0 * delta * r - delta * delta
                }
            }
        }
    }

    /// ∂f/∂m without domain checks.
    #[inline]
    pub fn grad(&self, x: f64, m: f64) -> f64 {
        let eps = self.safe_shift;
        match self.kind {
            LossKind::Gaussian => 2.0 * (m - x),
            LossKind::Poisson => 1.0 - x / (m + eps),
            LossKind::BernoulliOdds => 1.0 / (m + 1.0) - x / (m + eps),
            LossKind::Gamma => {
                let ms = m + eps;
                1.0 / ms - x / (ms * ms)
            }
            LossKind::BetaHalf => {
                let ms = m + eps;
                let s = ms.sqrt();
                1.0 / s - x / (ms * s)
            }
            LossKind::Huber { delta } => {
                let r = m - x;
                if r.abs() <= delta {
                    2.0 * r
                } else {
                    2.0 * delta * r.signum()
                }
            }
        }
    }
}

impl From<LossKind> for LossFunction {
    fn from(kind: LossKind) -> Self {
        LossFunction::new(kind)
    }
}
