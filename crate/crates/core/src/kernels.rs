//! Power kernels `K(t,s) = c·(t−s)^p` and their cell integrals.
//!
//! Every kernel used by the models in this crate is a scaled power of the
//! lag: the normalised fractional kernel `(t−s)^{H−1/2}/Γ(H+1/2)`, the raw
//! `(t−s)^{H−1/2}`, its square `(t−s)^{2H−1}`, constants and zero. Keeping to
//! this family makes the drift weights `∫ K(t,s) ds` analytic.

use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quad;

/// Scalar kernel `c·(t−s)^p` for `s < t`, zero otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerKernel {
    exponent: f64,
    scale: f64,
    zero: bool,
}

impl PowerKernel {
    pub fn new(exponent: f64, scale: f64) -> Result<Self> {
        if !exponent.is_finite() || !scale.is_finite() {
            return Err(Error::invalid("kernel parameters must be finite"));
        }
        if exponent <= -1.0 {
            return Err(Error::invalid(format!(
                "kernel exponent {exponent} is not integrable (needs p > -1)"
            )));
        }
        Ok(PowerKernel {
            exponent,
            scale,
            zero: false,
        })
    }

    pub fn constant(scale: f64) -> Self {
        PowerKernel {
            exponent: 0.0,
            scale,
            zero: false,
        }
    }

    pub fn zero() -> Self {
        PowerKernel {
            exponent: 0.0,
            scale: 0.0,
            zero: true,
        }
    }

    /// `(t−s)^{H−1/2} / Γ(H+1/2)`.
    pub fn fractional(hurst: f64) -> Result<Self> {
        if !(hurst > 0.0) {
            return Err(Error::invalid(format!(
                "Hurst parameter must be positive, got {hurst}"
            )));
        }
        // Γ(1) = 1 exactly; keeps H = 1/2 identical to the constant kernel
        let scale = if hurst == 0.5 {
            1.0
        } else {
            1.0 / gamma(hurst + 0.5)
        };
        PowerKernel::new(hurst - 0.5, scale)
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    /// Constant in the lag (including the zero kernel).
    pub fn is_constant(&self) -> bool {
        self.zero || self.exponent == 0.0
    }

    /// Square-integrable near the diagonal.
    pub fn is_square_integrable(&self) -> bool {
        self.zero || 2.0 * self.exponent > -1.0
    }

    /// Value at lag `t − s`.
    #[inline]
    pub fn at_lag(&self, lag: f64) -> f64 {
        if self.zero || lag <= 0.0 {
            0.0
        } else if self.exponent == 0.0 {
            self.scale
        } else {
            self.scale * lag.powf(self.exponent)
        }
    }

    pub fn eval(&self, t: f64, s: f64) -> f64 {
        self.at_lag(t - s)
    }

    /// `∫ₐᵇ K(t,s) ds` for `a ≤ b ≤ t`.
    pub fn cell_integral(&self, t: f64, a: f64, b: f64) -> Result<f64> {
        if b > t {
            return Err(Error::invalid(format!("cell end {b} lies beyond t = {t}")));
        }
        if a > b {
            return Err(Error::invalid(format!("empty cell [{a}, {b}]")));
        }
        if self.zero {
            return Ok(0.0);
        }
        if self.exponent == 0.0 {
            return Ok(self.scale * (b - a));
        }
        let q = self.exponent + 1.0;
        Ok(self.scale * ((t - a).powf(q) - (t - b).powf(q)) / q)
    }

    /// `∫ₐᵇ K(t₁,r) K(t₂,r) dr`, the covariance of the two Wiener integrals
    /// `∫ₐᵇ K(tᵢ,r) dW_r`.
    pub fn cell_l2_product(&self, t1: f64, t2: f64, a: f64, b: f64) -> Result<f64> {
        let t_min = t1.min(t2);
        let t_max = t1.max(t2);
        if a > b || b > t_min {
            return Err(Error::invalid(format!(
                "cell [{a}, {b}] must lie below min(t1, t2) = {t_min}"
            )));
        }
        if self.zero {
            return Ok(0.0);
        }
        let p = self.exponent;
        let c2 = self.scale * self.scale;
        if p == 0.0 {
            return Ok(c2 * (b - a));
        }
        if b == t_min && 2.0 * p <= -1.0 {
            return Err(Error::invalid(format!(
                "kernel exponent {p} is not square integrable up to the diagonal"
            )));
        }
        if t1 == t2 {
            let q = 2.0 * p + 1.0;
            return Ok(c2 * ((t1 - a).powf(q) - (t1 - b).powf(q)) / q);
        }
        // u = (t_min − r)^{p+1} absorbs the (t_min − r)^p factor.
        let q = p + 1.0;
        let gap = t_max - t_min;
        let u_lo = (t_min - b).powf(q);
        let u_hi = (t_min - a).powf(q);
        let inv_q = 1.0 / q;
        let integral =
            quad::panel_doubling(|u: f64| (gap + u.powf(inv_q)).powf(p), u_lo, u_hi, 1e-10);
        Ok(c2 * integral / q)
    }
}

/// Open interval `(lo, hi)`; `hi` may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OpenInterval {
    pub lo: f64,
    pub hi: f64,
}

/// Regularity exponents governing the strong rates of the schemes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateParams {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha: f64,
    /// Only defined when `alpha1 > 1/2`.
    pub alpha_prime: Option<f64>,
    pub beta1_range: OpenInterval,
    pub beta2_range: OpenInterval,
}

impl RateParams {
    /// Predicted Euler strong rate `α ∧ 1`.
    pub fn euler_rate(&self) -> f64 {
        self.alpha.min(1.0)
    }

    /// Predicted Milstein strong rate `2α′ ∧ 1`.
    pub fn milstein_rate(&self) -> Option<f64> {
        self.alpha_prime.map(|a| (2.0 * a).min(1.0))
    }
}

/// Rate exponents for power kernels: `α₁ = min(p+1)` over drift kernels and
/// `α₂ = min(p+1/2)` over diffusion kernels. Zero kernels are skipped.
pub fn rate_parameters(drift: &[PowerKernel], diffusion: &[PowerKernel]) -> Result<RateParams> {
    let mut alpha1 = f64::INFINITY;
    for k in drift.iter().filter(|k| !k.is_zero()) {
        if k.exponent <= -1.0 {
            return Err(Error::invalid(format!(
                "drift exponent {} must exceed -1",
                k.exponent
            )));
        }
        alpha1 = alpha1.min(k.exponent + 1.0);
    }
    let mut alpha2 = f64::INFINITY;
    for k in diffusion.iter().filter(|k| !k.is_zero()) {
        if k.exponent <= -0.5 {
            return Err(Error::invalid(format!(
                "diffusion exponent {} must exceed -1/2",
                k.exponent
            )));
        }
        alpha2 = alpha2.min(k.exponent + 0.5);
    }
    if alpha1.is_infinite() && alpha2.is_infinite() {
        return Err(Error::invalid("at least one kernel must be non-zero"));
    }
    let alpha = alpha1.min(alpha2);
    let alpha_prime =
        (alpha1 > 0.5).then(|| alpha1.min(2.0 * alpha2).min(alpha1 + alpha2 - 0.5) / 2.0);
    let reciprocal = |x: f64| if x <= 0.0 { f64::INFINITY } else { 1.0 / x };
    Ok(RateParams {
        alpha1,
        alpha2,
        alpha,
        alpha_prime,
        beta1_range: OpenInterval {
            lo: 1.0,
            hi: reciprocal(1.0 - alpha1.min(1.0)),
        },
        beta2_range: OpenInterval {
            lo: 1.0,
            hi: reciprocal(1.0 - (2.0 * alpha2).min(1.0)),
        },
    })
}
