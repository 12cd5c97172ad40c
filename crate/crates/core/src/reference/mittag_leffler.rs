//! Resolvent of the Volterra OU equation,
//! `E(s) = s^{H−1/2} Σₙ (b₁ s^{H+1/2})ⁿ / Γ((n+1)(H+1/2))`.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const MAX_TERMS: usize = 100_000;

/// `Σₙ xⁿ / Γ((n+1)a + shift)` summed until the terms fall below `tol`
/// relative to the partial sum.
pub(crate) fn power_series(x: f64, a: f64, shift: f64, tol: f64) -> f64 {
    if x == 0.0 {
        return (-ln_gamma(a + shift)).exp();
    }
    let ln_x = x.abs().ln();
    let negative = x < 0.0;
    let mut sum = 0.0;
    let mut prev_abs = f64::INFINITY;
    for n in 0..MAX_TERMS {
        let nf = n as f64;
        let mag = (nf * ln_x - ln_gamma((nf + 1.0) * a + shift)).exp();
        let term = if negative && n % 2 == 1 { -mag } else { mag };
        sum += term;
        // the terms are eventually decreasing; stop once past the peak
        if mag <= prev_abs && mag <= tol * sum.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        prev_abs = mag;
    }
    sum
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MittagLefflerSeries {
    pub b1: f64,
    pub hurst: f64,
    pub tolerance: f64,
}

impl MittagLefflerSeries {
    pub fn new(b1: f64, hurst: f64) -> Result<Self> {
        if !(hurst > 0.0 && hurst < 1.0) {
            return Err(Error::OutOfRange {
                value: hurst,
                lo: 0.0,
                hi: 1.0,
            });
        }
        if !b1.is_finite() {
            return Err(Error::invalid("b1 must be finite"));
        }
        Ok(MittagLefflerSeries {
            b1,
            hurst,
            tolerance: 1e-16,
        })
    }

    fn order(&self) -> f64 {
        self.hurst + 0.5
    }

    /// The series without the `s^{H−1/2}` prefactor.
    pub fn regular_part(&self, s: f64) -> f64 {
        power_series(
            self.b1 * s.powf(self.order()),
            self.order(),
            0.0,
            self.tolerance,
        )
    }

    /// `E(s)`; infinite at `s = 0` when `H < 1/2`.
    pub fn e(&self, s: f64) -> f64 {
        s.powf(self.hurst - 0.5) * self.regular_part(s)
    }

    /// `R(s) = −b₁ E(s)`.
    pub fn r(&self, s: f64) -> f64 {
        -self.b1 * self.e(s)
    }

    /// `∫₀ᵀ E = Σₙ b₁ⁿ T^{(n+1)a} / Γ((n+1)a + 1)`.
    pub fn integral_e(&self, horizon: f64) -> f64 {
        let a = self.order();
        horizon.powf(a) * power_series(self.b1 * horizon.powf(a), a, 1.0, self.tolerance)
    }

    pub fn integral_r(&self, horizon: f64) -> f64 {
        -self.b1 * self.integral_e(horizon)
    }
}

/// `E_{b₁}(s)` for the fractional kernel with Hurst parameter `H`.
pub fn mittag_leffler_e(b1: f64, hurst: f64, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::invalid(format!(
            "argument must be non-negative, got {s}"
        )));
    }
    Ok(MittagLefflerSeries::new(b1, hurst)?.e(s))
}
