//! Exact terminal law of the Volterra Ornstein–Uhlenbeck process.
//!
//! `X_T` is Gaussian with mean `(1 + b₁∫₀ᵀE) x₀ + b₀∫₀ᵀE` and variance
//! `σ₀² ∫₀ᵀ E(u)² du`, `E` the resolvent series.

use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::mittag_leffler::MittagLefflerSeries;
use crate::error::{Error, Result};
use crate::quad;

/// Mean and variance of `X_T`.
pub fn ou_terminal_moments(
    x0: f64,
    b0: f64,
    b1: f64,
    sigma0: f64,
    hurst: f64,
    horizon: f64,
) -> Result<(f64, f64)> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid("horizon must be positive"));
    }
    let ml = MittagLefflerSeries::new(b1, hurst)?;
    let int_e = ml.integral_e(horizon);
    let mean = (1.0 - ml.integral_r(horizon)) * x0 + b0 * int_e;
    // u = v^{1/(2H)} turns u^{2H−1} g(u)² du into g(v^{1/(2H)})² dv / (2H)
    let inv = 1.0 / (2.0 * hurst);
    let g2 = |v: f64| {
        let g = ml.regular_part(v.powf(inv));
        g * g
    };
    let upper = horizon.powf(2.0 * hurst);
    let integral = quad::adaptive(&g2, 0.0, upper, 1e-15, 1e-14) * inv;
    Ok((mean, sigma0 * sigma0 * integral))
}

/// `E[(Z − K)₊]` for `Z ~ N(mean, variance)`.
pub fn gaussian_call(mean: f64, variance: f64, strike: f64) -> Result<f64> {
    if !(variance >= 0.0) {
        return Err(Error::invalid(format!(
            "variance must be non-negative, got {variance}"
        )));
    }
    if variance == 0.0 {
        return Ok((mean - strike).max(0.0));
    }
    let sd = variance.sqrt();
    let d = (mean - strike) / sd;
    let std = Normal::standard();
    Ok((mean - strike) * std.cdf(d) + sd * std.pdf(d))
}

/// `E[(X_T − K)₊]` for the Volterra OU model.
#[allow(clippy::too_many_arguments)]
pub fn ou_call_price(
    x0: f64,
    b0: f64,
    b1: f64,
    sigma0: f64,
    hurst: f64,
    horizon: f64,
    strike: f64,
) -> Result<f64> {
    let (mean, var) = ou_terminal_moments(x0, b0, b1, sigma0, hurst, horizon)?;
    gaussian_call(mean, var, strike)
}
