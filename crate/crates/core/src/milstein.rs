//! Milstein scheme in the two exactly simulable one-dimensional cases.
//!
//! * State-free diffusion: the correction comes from the drift only,
//!   `b′·A¹`, where `A¹` on cell `k` is the Wiener integral of the kernel
//!   increment `K₂(t_{k+1},r) − K₂(t_k,r)` over `[0, t_k]`.
//! * Constant diffusion kernel `c`: `A¹` vanishes and the within-cell double
//!   integral is `c²σ′σ((ΔW)² − Δt)/2`.
//!
//! Drift weights are the exact cell integrals `∫_{t_k}^{t_{k+1}} K₁(t_j,s) ds`.

use crate::error::{Error, Result};
use crate::euler::{dot, KernelTable, SchemePath};
use crate::grid::TimeGrid;
use crate::models::SveModel;
use crate::noise::{
    sample_increments, IncrementTable, KernelCellSampler, KernelGaussianFamily, NoiseConfig,
};

use std::sync::Arc;

/// Per-cell correction terms of one path.
#[derive(Debug, Clone, PartialEq)]
pub struct MilsteinCorrection {
    /// `A¹` at the right end of each cell.
    pub a1: Vec<f64>,
    /// `σ′σ((ΔW)² − Δt)/2` per cell (constant-kernel case), zero otherwise.
    pub a2_coeff: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilsteinVariant {
    StateFreeSigma,
    ConstantK2,
}

fn check_scalar(model: &SveModel) -> Result<()> {
    if model.dim() != 1 || model.drivers() != 1 {
        return Err(Error::UnsupportedScheme(format!(
            "Milstein needs d = m = 1, model has d = {}, m = {}",
            model.dim(),
            model.drivers()
        )));
    }
    Ok(())
}

/// Picks the special case the model satisfies.
pub fn milstein_variant(model: &SveModel) -> Result<MilsteinVariant> {
    check_scalar(model)?;
    let c = model.coefficients();
    if model.diffusion_kernels()[0].is_constant() {
        if !c.has_drift_jacobian() {
            return Err(Error::MissingGradient("Milstein"));
        }
        if !c.has_diffusion_jacobian() {
            return Err(Error::MissingGradient("Milstein"));
        }
        Ok(MilsteinVariant::ConstantK2)
    } else if c.state_free_diffusion() {
        if !c.has_drift_jacobian() {
            return Err(Error::MissingGradient("Milstein"));
        }
        Ok(MilsteinVariant::StateFreeSigma)
    } else {
        Err(Error::UnsupportedScheme(
            "Milstein needs a state-free diffusion or a constant diffusion kernel".into(),
        ))
    }
}

fn drift_weights(model: &SveModel, grid: &TimeGrid) -> Result<KernelTable> {
    let k1 = model.drift_kernels()[0];
    let h = grid.mesh();
    let g = grid.clone();
    KernelTable::from_weights(
        grid,
        |l| k1.cell_integral(l as f64 * h, 0.0, h),
        move |j, i| k1.cell_integral(g.t(j), g.t(i), g.t(i + 1)),
    )
}

/// Milstein scheme precomputed for one model and grid.
#[derive(Debug, Clone)]
pub struct MilsteinScheme {
    model: SveModel,
    grid: TimeGrid,
    variant: MilsteinVariant,
    weights: KernelTable,
    /// Drift kernel constant `c₁` (Markovian drift), if any.
    markov_drift: Option<f64>,
    sampler: Option<Arc<KernelCellSampler>>,
}

impl MilsteinScheme {
    pub fn new(model: &SveModel, grid: &TimeGrid) -> Result<Self> {
        let variant = milstein_variant(model)?;
        let k1 = model.drift_kernels()[0];
        let markov_drift = k1
            .is_constant()
            .then(|| if k1.is_zero() { 0.0 } else { k1.scale() });
        let weights = drift_weights(model, grid)?;
        let sampler = match variant {
            MilsteinVariant::StateFreeSigma => Some(KernelCellSampler::cached(
                grid,
                model.diffusion_kernels()[0],
            )?),
            MilsteinVariant::ConstantK2 => None,
        };
        Ok(MilsteinScheme {
            model: model.clone(),
            grid: grid.clone(),
            variant,
            weights,
            markov_drift,
            sampler,
        })
    }

    pub fn variant(&self) -> MilsteinVariant {
        self.variant
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Samples the required Gaussian inputs and runs one path.
    pub fn sample_path(&self, noise: &NoiseConfig, path_index: u64) -> Result<SchemePath> {
        match self.variant {
            MilsteinVariant::ConstantK2 => {
                let inc = sample_increments(&self.grid, noise, path_index);
                Ok(self.run_constant_k2(&inc)?.0)
            }
            MilsteinVariant::StateFreeSigma => {
                let z = self
                    .sampler
                    .as_ref()
                    .expect("sampler")
                    .sample(noise, path_index);
                Ok(self.run_state_free(&z)?.0)
            }
        }
    }

    pub fn run_state_free(
        &self,
        z: &KernelGaussianFamily,
    ) -> Result<(SchemePath, MilsteinCorrection)> {
        if self.variant != MilsteinVariant::StateFreeSigma {
            return Err(Error::UnsupportedScheme(
                "model needs the constant-kernel variant".into(),
            ));
        }
        if z.grid() != &self.grid {
            return Err(Error::invalid(
                "kernel integrals were sampled on a different grid",
            ));
        }
        if z.kernel() != &self.model.diffusion_kernels()[0] {
            return Err(Error::invalid(
                "kernel integrals use a different diffusion kernel",
            ));
        }
        let n = self.grid.cells();
        let c = self.model.coefficients();
        let x0 = self.model.x0()[0];
        let mut x = vec![f64::NAN; n + 1];
        x[0] = x0;
        let mut sigma = vec![0.0; n];
        let mut drift_hist = vec![0.0; n];
        let mut a1 = vec![0.0; n];
        let mut buf = [0.0];
        let mut diverged = false;
        for k in 0..n {
            let t = self.grid.t(k);
            let xk = [x[k]];
            c.diffusion(t, &xk, &mut buf);
            sigma[k] = buf[0];
            // A¹ on cell k, right endpoint: Σ_{m<k} (Z[k+1][m] − Z[k][m]) σ_m
            let mut a = 0.0;
            for m in 0..k {
                a += (z.get(k + 1, m) - z.get(k, m)) * sigma[m];
            }
            a1[k] = a;
            c.drift(t, &xk, &mut buf);
            let b = buf[0];
            c.drift_jacobian(t, &xk, &mut buf);
            drift_hist[k] = b + buf[0] * a;

            let drift = dot(self.weights.weights(n, k), &drift_hist[..=k]);
            let mut noise = 0.0;
            for m in 0..=k {
                noise += sigma[m] * z.get(k + 1, m);
            }
            let next = x0 + drift + noise;
            if !next.is_finite() {
                diverged = true;
                break;
            }
            x[k + 1] = next;
        }
        let path = SchemePath::new(self.grid.clone(), 1, x, diverged);
        Ok((
            path,
            MilsteinCorrection {
                a1,
                a2_coeff: vec![0.0; n],
            },
        ))
    }

    pub fn run_constant_k2(
        &self,
        increments: &IncrementTable,
    ) -> Result<(SchemePath, MilsteinCorrection)> {
        if self.variant != MilsteinVariant::ConstantK2 {
            return Err(Error::UnsupportedScheme(
                "model needs the state-free variant".into(),
            ));
        }
        if increments.grid() != &self.grid || increments.drivers() != 1 {
            return Err(Error::invalid("increments do not match the scheme grid"));
        }
        let n = self.grid.cells();
        let c = self.model.coefficients();
        let k2 = self.model.diffusion_kernels()[0];
        let c2 = if k2.is_zero() { 0.0 } else { k2.scale() };
        let x0 = self.model.x0()[0];
        let mut x = vec![f64::NAN; n + 1];
        x[0] = x0;
        let mut drift_hist = vec![0.0; n];
        let mut a2 = vec![0.0; n];
        let mut noise_sum = 0.0;
        let mut buf = [0.0];
        let mut diverged = false;
        for k in 0..n {
            let t = self.grid.t(k);
            let dt = self.grid.dt(k);
            let dw = increments.get(k, 0);
            let xk = [x[k]];
            c.drift(t, &xk, &mut buf);
            drift_hist[k] = buf[0];
            c.diffusion(t, &xk, &mut buf);
            let s = buf[0];
            c.diffusion_jacobian(t, &xk, &mut buf);
            let double = buf[0] * s * (dw * dw - dt) / 2.0;
            a2[k] = double;
            let step_noise = c2 * (s * dw + c2 * double);
            let next = match self.markov_drift {
                Some(c1) => x[k] + c1 * drift_hist[k] * dt + step_noise,
                None => {
                    noise_sum += step_noise;
                    x0 + dot(self.weights.weights(n, k), &drift_hist[..=k]) + noise_sum
                }
            };
            if !next.is_finite() {
                diverged = true;
                break;
            }
            x[k + 1] = next;
        }
        let path = SchemePath::new(self.grid.clone(), 1, x, diverged);
        Ok((
            path,
            MilsteinCorrection {
                a1: vec![0.0; n],
                a2_coeff: a2,
            },
        ))
    }
}

/// Milstein path for a model with state-free `σ`, driven by the Wiener
/// integrals `Z[j][m]` of the diffusion kernel.
pub fn milstein_path_state_free_sigma(
    model: &SveModel,
    grid: &TimeGrid,
    zfam: &KernelGaussianFamily,
) -> Result<SchemePath> {
    check_scalar(model)?;
    if !model.coefficients().state_free_diffusion() {
        return Err(Error::UnsupportedScheme(
            "diffusion depends on the state".into(),
        ));
    }
    if !model.coefficients().has_drift_jacobian() {
        return Err(Error::MissingGradient("Milstein"));
    }
    let scheme = MilsteinScheme {
        model: model.clone(),
        grid: grid.clone(),
        variant: MilsteinVariant::StateFreeSigma,
        weights: drift_weights(model, grid)?,
        markov_drift: None,
        sampler: None,
    };
    Ok(scheme.run_state_free(zfam)?.0)
}

/// Milstein path for a model whose diffusion kernel is a constant.
pub fn milstein_path_constant_k2(
    model: &SveModel,
    grid: &TimeGrid,
    increments: &IncrementTable,
) -> Result<SchemePath> {
    check_scalar(model)?;
    if !model.diffusion_kernels()[0].is_constant() {
        return Err(Error::UnsupportedScheme(
            "diffusion kernel is not constant".into(),
        ));
    }
    let scheme = MilsteinScheme::new(model, grid)?;
    Ok(scheme.run_constant_k2(increments)?.0)
}
