//! Call prices from the characteristic function of `ln(S_T/S₀)`:
//!
//! ```text
//! C = S₀ − (√(S₀K)/π) ∫₀^∞ Re[e^{iuk} ψ(u − i/2)] / (u² + 1/4) du,   k = ln(S₀/K)
//! ```

use num_complex::Complex64;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::quad;

const PANEL: f64 = 10.0;
const TAIL_TOL: f64 = 1e-8;
const MAX_PANELS: usize = 200;

/// Lewis inversion with panel-wise adaptive quadrature; panels are added
/// until two consecutive ones contribute less than `1e-8`.
pub fn lewis_call<F>(s0: f64, strike: f64, psi: F) -> Result<f64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    if !(strike > 0.0 && s0 > 0.0) {
        return Err(Error::invalid("spot and strike must be positive"));
    }
    let k = (s0 / strike).ln();
    let failure = std::cell::RefCell::new(None);
    let integrand = |u: f64| -> f64 {
        if failure.borrow().is_some() {
            return 0.0;
        }
        match psi(Complex64::new(u, -0.5)) {
            Ok(v) => (Complex64::new(0.0, u * k).exp() * v).re / (u * u + 0.25),
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        }
    };
    let mut total = 0.0;
    let mut quiet = 0;
    for p in 0..MAX_PANELS {
        let (a, b) = (p as f64 * PANEL, (p + 1) as f64 * PANEL);
        let part = quad::adaptive(&integrand, a, b, 1e-11, 1e-10);
        if let Some(e) = failure.borrow_mut().take() {
            return Err(e);
        }
        total += part;
        quiet = if part.abs() < TAIL_TOL { quiet + 1 } else { 0 };
        if quiet >= 2 {
            return Ok(s0 - (s0 * strike).sqrt() / std::f64::consts::PI * total);
        }
    }
    Err(Error::OracleFailure(
        "Fourier integrand did not decay".into(),
    ))
}

/// Black–Scholes call with zero rates.
pub fn black_scholes_call(s0: f64, strike: f64, vol: f64, horizon: f64) -> f64 {
    let sd = vol * horizon.sqrt();
    if sd == 0.0 {
        return (s0 - strike).max(0.0);
    }
    let d1 = ((s0 / strike).ln() + 0.5 * sd * sd) / sd;
    let n = Normal::standard();
    s0 * n.cdf(d1) - strike * n.cdf(d1 - sd)
}
