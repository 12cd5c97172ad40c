//! Model descriptions: coefficients, kernels and driver correlation.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernels::{rate_parameters, PowerKernel, RateParams};
use crate::noise::NoiseConfig;

/// Drift `b(t,x) ∈ ℝᵈ` and diffusion `σ(t,x) ∈ ℝ^{d×m}` with optional
/// spatial Jacobians. Implementations must be pure.
pub trait Coefficients: Send + Sync + fmt::Debug {
    fn drift(&self, t: f64, x: &[f64], out: &mut [f64]);

    /// Row-major `d×m`.
    fn diffusion(&self, t: f64, x: &[f64], out: &mut [f64]);

    fn has_drift_jacobian(&self) -> bool {
        false
    }

    /// Row-major `d×d`, `out[i·d + j] = ∂bᵢ/∂xⱼ`.
    fn drift_jacobian(&self, _t: f64, _x: &[f64], _out: &mut [f64]) {
        unimplemented!("drift Jacobian not provided")
    }

    fn has_diffusion_jacobian(&self) -> bool {
        false
    }

    /// `out[(i·m + r)·d + j] = ∂σᵢᵣ/∂xⱼ`.
    fn diffusion_jacobian(&self, _t: f64, _x: &[f64], _out: &mut [f64]) {
        unimplemented!("diffusion Jacobian not provided")
    }

    /// `σ` does not depend on `x`.
    fn state_free_diffusion(&self) -> bool {
        false
    }
}

/// A stochastic Volterra equation with componentwise power kernels.
#[derive(Debug, Clone)]
pub struct SveModel {
    name: String,
    x0: Vec<f64>,
    drivers: usize,
    coefficients: Arc<dyn Coefficients>,
    drift_kernels: Vec<PowerKernel>,
    diffusion_kernels: Vec<PowerKernel>,
    noise: NoiseConfig,
}

impl SveModel {
    pub fn new(
        name: impl Into<String>,
        x0: Vec<f64>,
        drivers: usize,
        coefficients: Arc<dyn Coefficients>,
        drift_kernels: Vec<PowerKernel>,
        diffusion_kernels: Vec<PowerKernel>,
        correlation: Vec<f64>,
    ) -> Result<Self> {
        let d = x0.len();
        if d == 0 {
            return Err(Error::invalid("state dimension must be positive"));
        }
        if drift_kernels.len() != d || diffusion_kernels.len() != d {
            return Err(Error::invalid(
                "one drift and one diffusion kernel per component",
            ));
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("initial value must be finite"));
        }
        let noise = NoiseConfig::new(drivers, correlation, 0, 0)?;
        Ok(SveModel {
            name: name.into(),
            x0,
            drivers,
            coefficients,
            drift_kernels,
            diffusion_kernels,
            noise,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn drivers(&self) -> usize {
        self.drivers
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn coefficients(&self) -> &dyn Coefficients {
        self.coefficients.as_ref()
    }

    pub fn drift_kernels(&self) -> &[PowerKernel] {
        &self.drift_kernels
    }

    pub fn diffusion_kernels(&self) -> &[PowerKernel] {
        &self.diffusion_kernels
    }

    pub fn correlation(&self) -> &[f64] {
        self.noise.correlation()
    }

    /// Driver configuration with the given seed and stream.
    pub fn noise(&self, seed: u64, stream_id: u64) -> NoiseConfig {
        let mut cfg = self.noise.clone();
        cfg.seed = seed;
        cfg.stream_id = stream_id;
        cfg
    }

    pub fn rate_parameters(&self) -> Result<RateParams> {
        rate_parameters(&self.drift_kernels, &self.diffusion_kernels)
    }

    pub fn drift(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.coefficients.drift(t, x, out)
    }

    pub fn diffusion(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.coefficients.diffusion(t, x, out)
    }
}

/// Volterra Ornstein–Uhlenbeck: `b(x) = b₀ + b₁x`, `σ ≡ σ₀`, both kernels
/// `(t−s)^{H−1/2}/Γ(H+1/2)`.
pub fn volterra_ou(x0: f64, b0: f64, b1: f64, sigma0: f64, hurst: f64) -> Result<SveModel> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::OutOfRange {
            value: hurst,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let k = PowerKernel::fractional(hurst)?;
    SveModel::new(
        "volterra_ou",
        vec![x0],
        1,
        Arc::new(OuCoefficients { b0, b1, sigma0 }),
        vec![k],
        vec![k],
        vec![1.0],
    )
}

#[derive(Debug, Clone, Copy)]
pub struct OuCoefficients {
    pub b0: f64,
    pub b1: f64,
    pub sigma0: f64,
}

impl Coefficients for OuCoefficients {
    fn drift(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = self.b0 + self.b1 * x[0];
    }

    fn diffusion(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out[0] = self.sigma0;
    }

    fn has_drift_jacobian(&self) -> bool {
        true
    }

    fn drift_jacobian(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out[0] = self.b1;
    }

    fn has_diffusion_jacobian(&self) -> bool {
        true
    }

    fn diffusion_jacobian(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }

    fn state_free_diffusion(&self) -> bool {
        true
    }
}

/// Generalised Langevin particle in the potential `V(x) = x + α cos x`,
/// written as a three-component Volterra system with the constant `−1` as
/// the third initial value. Kernels are the unnormalised `(t−s)^{H−1/2}`
/// and its square.
pub fn mech_langevin(
    lambda: f64,
    alpha_pot: f64,
    hurst: f64,
    q0: f64,
    p0: f64,
) -> Result<SveModel> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::OutOfRange {
            value: hurst,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let one = PowerKernel::constant(1.0);
    SveModel::new(
        "mech_langevin",
        vec![q0, p0, -1.0],
        1,
        Arc::new(MechCoefficients { lambda, alpha_pot }),
        vec![one, one, PowerKernel::new(2.0 * hurst - 1.0, 1.0)?],
        vec![
            PowerKernel::zero(),
            PowerKernel::zero(),
            PowerKernel::new(hurst - 0.5, 1.0)?,
        ],
        vec![1.0],
    )
}

#[derive(Debug, Clone, Copy)]
pub struct MechCoefficients {
    pub lambda: f64,
    pub alpha_pot: f64,
}

impl MechCoefficients {
    fn potential(&self, x: f64) -> f64 {
        x + self.alpha_pot * x.cos()
    }

    fn potential_slope(&self, x: f64) -> f64 {
        1.0 - self.alpha_pot * x.sin()
    }
}

impl Coefficients for MechCoefficients {
    fn drift(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = x[1];
        out[1] = x[2] * self.potential_slope(x[0]);
        out[2] = -self.lambda * self.lambda * self.potential(x[0]);
    }

    fn diffusion(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
        out[1] = 0.0;
        out[2] = -self.lambda * self.potential(x[0]);
    }

    fn has_drift_jacobian(&self) -> bool {
        true
    }

    fn drift_jacobian(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        let slope = self.potential_slope(x[0]);
        let curvature = -self.alpha_pot * x[0].cos();
        out.copy_from_slice(&[
            0.0,
            1.0,
            0.0,
            x[2] * curvature,
            0.0,
            slope,
            -self.lambda * self.lambda * slope,
            0.0,
            0.0,
        ]);
    }

    fn has_diffusion_jacobian(&self) -> bool {
        true
    }

    fn diffusion_jacobian(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        // only σ₃ = −λ V(x₁) depends on the state
        out[2 * 3] = -self.lambda * self.potential_slope(x[0]);
    }
}

/// Rough Heston on the price itself: `S` with constant kernel and
/// `V` with the fractional kernel, `√V` truncated at zero.
#[allow(clippy::too_many_arguments)]
pub fn rough_heston(
    s0: f64,
    v0: f64,
    theta: f64,
    lambda: f64,
    nu: f64,
    rho: f64,
    hurst: f64,
) -> Result<SveModel> {
    if !(s0 > 0.0) {
        return Err(Error::invalid(format!("S0 must be positive, got {s0}")));
    }
    if !(v0 >= 0.0 && theta >= 0.0 && nu >= 0.0) {
        return Err(Error::invalid("V0, theta and nu must be non-negative"));
    }
    if !lambda.is_finite() {
        return Err(Error::invalid("lambda must be finite"));
    }
    if !(rho > -1.0 && rho < 1.0) {
        return Err(Error::OutOfRange {
            value: rho,
            lo: -1.0,
            hi: 1.0,
        });
    }
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::OutOfRange {
            value: hurst,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let k = PowerKernel::fractional(hurst)?;
    SveModel::new(
        "rough_heston",
        vec![s0, v0],
        2,
        Arc::new(HestonCoefficients { theta, lambda, nu }),
        vec![PowerKernel::zero(), k],
        vec![PowerKernel::constant(1.0), k],
        vec![1.0, rho, rho, 1.0],
    )
}

#[derive(Debug, Clone, Copy)]
pub struct HestonCoefficients {
    pub theta: f64,
    pub lambda: f64,
    pub nu: f64,
}

impl Coefficients for HestonCoefficients {
    fn drift(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
        out[1] = self.theta - self.lambda * x[1];
    }

    fn diffusion(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        let vol = x[1].max(0.0).sqrt();
        out[0] = x[0] * vol;
        out[1] = 0.0;
        out[2] = 0.0;
        out[3] = self.nu * vol;
    }
}

type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// One-dimensional coefficients from closures.
#[derive(Clone)]
pub struct ScalarCoefficients {
    drift: ScalarFn,
    diffusion: ScalarFn,
    drift_slope: Option<ScalarFn>,
    diffusion_slope: Option<ScalarFn>,
    state_free: bool,
}

impl fmt::Debug for ScalarCoefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarCoefficients")
            .field("drift_slope", &self.drift_slope.is_some())
            .field("diffusion_slope", &self.diffusion_slope.is_some())
            .field("state_free", &self.state_free)
            .finish()
    }
}

impl ScalarCoefficients {
    pub fn new(
        drift: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        diffusion: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ScalarCoefficients {
            drift: Arc::new(drift),
            diffusion: Arc::new(diffusion),
            drift_slope: None,
            diffusion_slope: None,
            state_free: false,
        }
    }

    pub fn with_drift_slope(mut self, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.drift_slope = Some(Arc::new(f));
        self
    }

    pub fn with_diffusion_slope(
        mut self,
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.diffusion_slope = Some(Arc::new(f));
        self
    }

    /// Declare `σ(t,x)` independent of `x`; implies a zero diffusion slope.
    pub fn state_free(mut self) -> Self {
        self.state_free = true;
        self.diffusion_slope = Some(Arc::new(|_, _| 0.0));
        self
    }

    pub fn into_model(
        self,
        name: &str,
        x0: f64,
        drift_kernel: PowerKernel,
        diffusion_kernel: PowerKernel,
    ) -> Result<SveModel> {
        SveModel::new(
            name,
            vec![x0],
            1,
            Arc::new(self),
            vec![drift_kernel],
            vec![diffusion_kernel],
            vec![1.0],
        )
    }
}

impl Coefficients for ScalarCoefficients {
    fn drift(&self, t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = (self.drift)(t, x[0]);
    }

    fn diffusion(&self, t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = (self.diffusion)(t, x[0]);
    }

    fn has_drift_jacobian(&self) -> bool {
        self.drift_slope.is_some()
    }

    fn drift_jacobian(&self, t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = self.drift_slope.as_ref().expect("drift slope")(t, x[0]);
    }

    fn has_diffusion_jacobian(&self) -> bool {
        self.diffusion_slope.is_some()
    }

    fn diffusion_jacobian(&self, t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = self.diffusion_slope.as_ref().expect("diffusion slope")(t, x[0]);
    }

    fn state_free_diffusion(&self) -> bool {
        self.state_free
    }
}

/// Geometric Brownian motion `dX = μX dt + sX dW` as a constant-kernel SVE.
pub fn geometric_brownian(x0: f64, mu: f64, vol: f64) -> Result<SveModel> {
    ScalarCoefficients::new(move |_, x| mu * x, move |_, x| vol * x)
        .with_drift_slope(move |_, _| mu)
        .with_diffusion_slope(move |_, _| vol)
        .into_model(
            "gbm",
            x0,
            PowerKernel::constant(1.0),
            PowerKernel::constant(1.0),
        )
}
