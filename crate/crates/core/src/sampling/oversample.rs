use crate::error::{GcpError, Result};

pub const DEFAULT_OVERSAMPLE: f64 = 1.1;
pub const DEFAULT_QUANTILE: f64 = 0.999_999;

/// Smallest rate ever returned; the rejection loop needs ρ > 1.
const MIN_RATE: f64 = 1.0 + 1e-6;

/// Inverse CDF of the negative binomial distribution counting failures
/// before `successes` successes with per-trial success probability `p`.
///
/// The pmf is accumulated with pmf(k+1) = pmf(k)·(k+s)/(k+1)·(1−p), carried in
/// log space so that p^s may underflow without harm.
pub fn negative_binomial_quantile(successes: u64, p: f64, quantile: f64) -> Result<u64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(GcpError::InvalidArgument(format!(
            "success probability must lie in (0, 1), got {p}"
        )));
    }
    if !(quantile > 0.0 && quantile < 1.0) {
        return Err(GcpError::InvalidArgument(format!("quantile must lie in (0, 1), got {quantile}")));
    }
    if successes == 0 {
        return Err(GcpError::InvalidArgument("need at least one success".into()));
    }
    let s = successes as f64;
    let log_fail = (1.0 - p).ln();
    let target = quantile.ln();
    let mean = s * (1.0 - p) / p;
    let mut log_pmf = s * p.ln();
    let mut log_cdf = log_pmf;
    let mut k: u64 = 0;
    while log_cdf < target {
        log_pmf += ((k as f64 + s) / (k as f64 + 1.0)).ln() + log_fail;
        k += 1;
        log_cdf = log_add_exp(log_cdf, log_pmf);
        // Past the mode the remaining mass is below rounding in the CDF.
        if k as f64 > mean && log_pmf < log_cdf - 60.0 {
            break;
        }
    }
    Ok(k)
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Oversample rate ρ = (s₀ + s_reject)·p₀/s₀, where s_reject bounds the
/// number of nonzeros drawn before `zeros` zeros with probability `quantile`
/// and p₀ is the fraction of zeros.
pub fn oversample_rate(zero_fraction: f64, zeros: u64, quantile: f64) -> Result<f64> {
    let rejects = negative_binomial_quantile(zeros, zero_fraction, quantile)?;
    let s0 = zeros as f64;
    Ok(((s0 + rejects as f64) * zero_fraction / s0).max(MIN_RATE))
}
