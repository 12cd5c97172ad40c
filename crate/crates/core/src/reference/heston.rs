//! Rough Heston characteristic function through the fractional Riccati
//! equation
//!
//! ```text
//! D^a h = ½(−z² − iz) + (izρν − λ) h + ν²h²/2,   a = H + ½
//! ψ(z) = exp(θ I¹h(T) + V₀ I^{1−a}h(T))
//! ```

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::adams::FractionalAdams;
use super::fourier::lewis_call;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HestonParams {
    pub s0: f64,
    pub v0: f64,
    pub theta: f64,
    pub lambda: f64,
    pub nu: f64,
    pub rho: f64,
    pub hurst: f64,
}

impl HestonParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.s0 > 0.0 && self.v0 >= 0.0 && self.theta >= 0.0 && self.nu >= 0.0) {
            return Err(Error::invalid(
                "S0 must be positive; V0, theta, nu non-negative",
            ));
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(Error::OutOfRange {
                value: self.rho,
                lo: -1.0,
                hi: 1.0,
            });
        }
        if !(self.hurst > 0.0 && self.hurst < 0.5) {
            return Err(Error::OutOfRange {
                value: self.hurst,
                lo: 0.0,
                hi: 0.5,
            });
        }
        Ok(())
    }
}

/// Linear coefficient of the Riccati equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiccatiDrift {
    /// `izρν − λ`, consistent with the drift `θ − λV`.
    #[default]
    MeanReversion,
    /// `izρν − 1` regardless of `λ`.
    LiteralMinusOne,
}

fn charfn_with(
    solver: &FractionalAdams,
    z: Complex64,
    p: &HestonParams,
    drift: RiccatiDrift,
) -> Result<Complex64> {
    let i = Complex64::i();
    let lam = match drift {
        RiccatiDrift::MeanReversion => p.lambda,
        RiccatiDrift::LiteralMinusOne => 1.0,
    };
    let constant = 0.5 * (-z * z - i * z);
    let linear = i * z * p.rho * p.nu - lam;
    let quadratic = 0.5 * p.nu * p.nu;
    let sol = solver.solve(Complex64::new(0.0, 0.0), |_, h| {
        constant + linear * h + quadratic * h * h
    })?;
    let exponent = p.theta * sol.integral + p.v0 * sol.complement_integral;
    let psi = exponent.exp();
    if !(psi.re.is_finite() && psi.im.is_finite()) {
        return Err(Error::OracleFailure(format!(
            "characteristic function overflow at z = {z}"
        )));
    }
    Ok(psi)
}

/// `ψ(z) = E[exp(iz ln(S_T/S₀))]` for complex `z`.
pub fn heston_charfn_complex(
    z: Complex64,
    params: &HestonParams,
    horizon: f64,
    steps: usize,
    drift: RiccatiDrift,
) -> Result<Complex64> {
    params.validate()?;
    let solver = FractionalAdams::new(params.hurst + 0.5, horizon, steps)?;
    charfn_with(&solver, z, params, drift)
}

/// `ψ(u)` for real `u`.
pub fn heston_charfn(
    u: f64,
    params: &HestonParams,
    horizon: f64,
    steps: usize,
) -> Result<Complex64> {
    heston_charfn_complex(
        Complex64::new(u, 0.0),
        params,
        horizon,
        steps,
        RiccatiDrift::MeanReversion,
    )
}

/// Call price by Fourier inversion of `ψ`.
pub fn heston_call_fourier(
    params: &HestonParams,
    strike: f64,
    horizon: f64,
    steps: usize,
    drift: RiccatiDrift,
) -> Result<f64> {
    params.validate()?;
    let solver = FractionalAdams::new(params.hurst + 0.5, horizon, steps)?;
    lewis_call(params.s0, strike, |z| {
        charfn_with(&solver, z, params, drift)
    })
}
