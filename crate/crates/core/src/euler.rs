//! Euler scheme with frozen kernels:
//!
//! ```text
//! X_{k+1} = X_0 + Σ_{i≤k} K₁(t_{k+1},t_i) b(t_i,X_i) Δt_i + Σ_{i≤k} K₂(t_{k+1},t_i) σ(t_i,X_i) ΔW_i
//! ```

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::kernels::PowerKernel;
use crate::models::SveModel;
use crate::noise::IncrementTable;

/// Scheme output at the grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemePath {
    grid: TimeGrid,
    dim: usize,
    values: Vec<f64>,
    diverged: bool,
}

impl SchemePath {
    pub(crate) fn new(grid: TimeGrid, dim: usize, values: Vec<f64>, diverged: bool) -> Self {
        debug_assert_eq!(values.len(), (grid.cells() + 1) * dim);
        SchemePath {
            grid,
            dim,
            values,
            diverged,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// A non-finite value appeared; later values are NaN.
    pub fn diverged(&self) -> bool {
        self.diverged
    }

    /// State at grid point `k`.
    pub fn at(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn value(&self, k: usize, component: usize) -> f64 {
        self.values[k * self.dim + component]
    }

    pub fn terminal(&self) -> &[f64] {
        self.at(self.grid.cells())
    }

    /// One component along the grid.
    pub fn component(&self, component: usize) -> impl Iterator<Item = f64> + '_ {
        self.values
            .iter()
            .skip(component)
            .step_by(self.dim)
            .copied()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// Kernel weights `K(t_{k+1}, t_i)` on a fixed grid.
#[derive(Debug, Clone)]
pub(crate) enum KernelTable {
    Zero,
    Constant(f64),
    /// Uniform grid: `rev[n−l] = K(l·h)` so that the weights for step `k`
    /// are the contiguous slice `rev[n−1−k..n]`.
    Toeplitz(Vec<f64>),
    /// Packed rows: row `k` holds `K(t_{k+1}, t_i)` for `i = 0..=k`.
    Full(Vec<f64>),
}

impl KernelTable {
    pub(crate) fn new(kernel: &PowerKernel, grid: &TimeGrid) -> Self {
        let n = grid.cells();
        if kernel.is_zero() || kernel.scale() == 0.0 {
            KernelTable::Zero
        } else if kernel.is_constant() {
            KernelTable::Constant(kernel.scale())
        } else if grid.is_uniform() {
            let mut rev = vec![0.0; n];
            for l in 1..=n {
                rev[n - l] = kernel.at_lag(grid.t(l));
            }
            KernelTable::Toeplitz(rev)
        } else {
            let mut data = Vec::with_capacity(n * (n + 1) / 2);
            for k in 0..n {
                for i in 0..=k {
                    data.push(kernel.eval(grid.t(k + 1), grid.t(i)));
                }
            }
            KernelTable::Full(data)
        }
    }

    /// Table of `w(j, i)` for `i < j ≤ n` laid out like the kernel tables
    /// (row `k` holds `w(k+1, ·)`). On uniform grids `w` must depend on
    /// `j − i` only; `lag_weight(l)` supplies it.
    pub(crate) fn from_weights(
        grid: &TimeGrid,
        lag_weight: impl Fn(usize) -> Result<f64>,
        weight: impl Fn(usize, usize) -> Result<f64>,
    ) -> Result<Self> {
        let n = grid.cells();
        if grid.is_uniform() {
            let mut rev = vec![0.0; n];
            for l in 1..=n {
                rev[n - l] = lag_weight(l)?;
            }
            Ok(KernelTable::Toeplitz(rev))
        } else {
            let mut data = Vec::with_capacity(n * (n + 1) / 2);
            for k in 0..n {
                for i in 0..=k {
                    data.push(weight(k + 1, i)?);
                }
            }
            Ok(KernelTable::Full(data))
        }
    }

    /// Weights for step `k` aligned with history entries `0..=k`.
    #[inline]
    pub(crate) fn weights(&self, n: usize, k: usize) -> &[f64] {
        match self {
            KernelTable::Toeplitz(rev) => &rev[n - 1 - k..n],
            KernelTable::Full(data) => {
                let start = k * (k + 1) / 2;
                &data[start..start + k + 1]
            }
            _ => &[],
        }
    }
}

/// `Σ a[i]·b[i]` with four independent partial sums.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let len = a.len().min(b.len());
    let (a, b) = (&a[..len], &b[..len]);
    let mut acc = [0.0f64; 4];
    let chunks = len / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..len {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[derive(Debug, Clone)]
enum ComponentPlan {
    /// Both kernels constant: Markovian update `X += c₁·bΔt + c₂·σΔW`.
    Markov { c1: f64, c2: f64 },
    /// Identical non-constant kernels: one convolution of `bΔt + σΔW`.
    Fused(KernelTable),
    Split {
        drift: KernelTable,
        diffusion: KernelTable,
    },
}

/// Euler recursion precomputed for one model and grid.
#[derive(Debug, Clone)]
pub struct EulerScheme {
    model: SveModel,
    grid: TimeGrid,
    plans: Vec<ComponentPlan>,
}

fn constant_value(table: &KernelTable) -> Option<f64> {
    match table {
        KernelTable::Zero => Some(0.0),
        KernelTable::Constant(c) => Some(*c),
        _ => None,
    }
}

impl EulerScheme {
    pub fn new(model: &SveModel, grid: &TimeGrid) -> Self {
        let plans = model
            .drift_kernels()
            .iter()
            .zip(model.diffusion_kernels())
            .map(|(k1, k2)| {
                let drift = KernelTable::new(k1, grid);
                let diffusion = KernelTable::new(k2, grid);
                match (constant_value(&drift), constant_value(&diffusion)) {
                    (Some(c1), Some(c2)) => ComponentPlan::Markov { c1, c2 },
                    _ if k1 == k2 => ComponentPlan::Fused(drift),
                    _ => ComponentPlan::Split { drift, diffusion },
                }
            })
            .collect();
        EulerScheme {
            model: model.clone(),
            grid: grid.clone(),
            plans,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn model(&self) -> &SveModel {
        &self.model
    }

    pub fn run(&self, increments: &IncrementTable) -> Result<SchemePath> {
        let n = self.grid.cells();
        let d = self.model.dim();
        let m = self.model.drivers();
        if increments.grid() != &self.grid {
            return Err(Error::invalid(
                "increments were sampled on a different grid",
            ));
        }
        if increments.drivers() != m {
            return Err(Error::invalid(
                "increment table has the wrong number of drivers",
            ));
        }
        let x0 = self.model.x0();
        let mut values = vec![f64::NAN; (n + 1) * d];
        values[..d].copy_from_slice(x0);
        // History of bΔt and σΔW per component, component-major.
        let mut f_hist = vec![0.0; d * n];
        let mut g_hist = vec![0.0; d * n];
        let mut h_hist = vec![0.0; d * n];
        let mut b = vec![0.0; d];
        let mut sigma = vec![0.0; d * m];
        let mut diverged = false;

        for k in 0..n {
            let t = self.grid.t(k);
            let dt = self.grid.dt(k);
            let dw = increments.row(k);
            let (prev, rest) = values.split_at_mut((k + 1) * d);
            let x = &prev[k * d..];
            let next = &mut rest[..d];
            self.model.drift(t, x, &mut b);
            self.model.diffusion(t, x, &mut sigma);

            for c in 0..d {
                let f = b[c] * dt;
                let g = if m == 1 {
                    sigma[c] * dw[0]
                } else {
                    sigma[c * m..(c + 1) * m]
                        .iter()
                        .zip(dw)
                        .map(|(s, w)| s * w)
                        .sum()
                };
                f_hist[c * n + k] = f;
                g_hist[c * n + k] = g;
                next[c] = match &self.plans[c] {
                    ComponentPlan::Markov { c1, c2 } => x[c] + c1 * f + c2 * g,
                    ComponentPlan::Fused(table) => {
                        h_hist[c * n + k] = f + g;
                        x0[c] + dot(table.weights(n, k), &h_hist[c * n..c * n + k + 1])
                    }
                    ComponentPlan::Split { drift, diffusion } => {
                        x0[c]
                            + convolve(drift, n, k, &f_hist[c * n..c * n + k + 1])
                            + convolve(diffusion, n, k, &g_hist[c * n..c * n + k + 1])
                    }
                };
            }
            if next.iter().any(|v| !v.is_finite()) {
                diverged = true;
                next.fill(f64::NAN);
                break;
            }
        }
        Ok(SchemePath::new(self.grid.clone(), d, values, diverged))
    }
}

#[inline]
fn convolve(table: &KernelTable, n: usize, k: usize, hist: &[f64]) -> f64 {
    match table {
        KernelTable::Zero => 0.0,
        KernelTable::Constant(c) => c * hist.iter().sum::<f64>(),
        _ => dot(table.weights(n, k), hist),
    }
}

/// One Euler path. Rebuilds the kernel tables; use [`EulerScheme`] to
/// simulate many paths on one grid.
pub fn euler_path(
    model: &SveModel,
    grid: &TimeGrid,
    increments: &IncrementTable,
) -> Result<SchemePath> {
    EulerScheme::new(model, grid).run(increments)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::PowerKernel;
    use crate::models::{volterra_ou, ScalarCoefficients};
    use crate::noise::{sample_increments, NoiseConfig};

    fn scalar(b: f64, s: f64, k1: PowerKernel, k2: PowerKernel, x0: f64) -> SveModel {
        ScalarCoefficients::new(move |_, _| b, move |_, _| s)
            .into_model("test", x0, k1, k2)
            .unwrap()
    }

    #[test]
    fn frozen_without_coefficients() {
        let k = PowerKernel::fractional(0.3).unwrap();
        let model = scalar(0.0, 0.0, k, k, 1.7);
        let grid = TimeGrid::uniform(1.0, 16).unwrap();
        let inc = sample_increments(&grid, &NoiseConfig::independent(1, 1, 0), 0);
        let path = euler_path(&model, &grid, &inc).unwrap();
        assert!(path.component(0).all(|v| v == 1.7));
    }

    #[test]
    fn constant_kernels_give_random_walk() {
        let one = PowerKernel::constant(1.0);
        let model = scalar(0.0, 1.0, one, one, 0.3);
        let grid = TimeGrid::uniform(1.0, 32).unwrap();
        let inc = sample_increments(&grid, &NoiseConfig::independent(1, 2, 0), 7);
        let path = euler_path(&model, &grid, &inc).unwrap();
        let mut x: f64 = 0.3;
        for k in 0..32 {
            assert_eq!(path.value(k, 0).to_bits(), x.to_bits());
            x += inc.get(k, 0);
        }
        assert_eq!(path.value(32, 0).to_bits(), x.to_bits());
    }

    #[test]
    fn half_hurst_ou_is_textbook_euler_maruyama() {
        let model = volterra_ou(1.0, 1.0, -0.5, 0.2, 0.5).unwrap();
        let grid = TimeGrid::uniform(1.0, 50).unwrap();
        let inc = sample_increments(&grid, &model.noise(3, 0), 11);
        let path = euler_path(&model, &grid, &inc).unwrap();
        let mut x: f64 = 1.0;
        let dt = 1.0 / 50.0;
        for k in 0..50 {
            x = x + (1.0 - 0.5 * x) * dt + 0.2 * inc.get(k, 0);
            assert_eq!(path.value(k + 1, 0).to_bits(), x.to_bits(), "step {k}");
        }
    }

    #[test]
    fn direct_recursion_oracle() {
        // different drift and diffusion kernels on a non-uniform grid
        let k1 = PowerKernel::new(-0.3, 0.8).unwrap();
        let k2 = PowerKernel::new(0.2, 1.3).unwrap();
        let model = ScalarCoefficients::new(|t, x| 0.5 - x + t, |_, x| 0.3 * x.cos())
            .into_model("test", 0.4, k1, k2)
            .unwrap();
        let grid = TimeGrid::from_points(vec![0.0, 0.05, 0.2, 0.3, 0.55, 0.7, 1.0]).unwrap();
        let inc = sample_increments(&grid, &NoiseConfig::independent(1, 4, 0), 0);
        let path = euler_path(&model, &grid, &inc).unwrap();
        let t = grid.points();
        let mut xs = vec![0.4];
        for k in 0..6 {
            let mut acc = 0.4;
            for i in 0..=k {
                let b = 0.5 - xs[i] + t[i];
                let s = 0.3 * xs[i].cos();
                acc += k1.eval(t[k + 1], t[i]) * b * (t[i + 1] - t[i])
                    + k2.eval(t[k + 1], t[i]) * s * inc.get(i, 0);
            }
            xs.push(acc);
        }
        for (k, x) in xs.iter().enumerate() {
            assert!((path.value(k, 0) - x).abs() < 1e-13, "k={k}");
        }
    }

    #[test]
    fn divergence_is_flagged() {
        let one = PowerKernel::constant(1.0);
        let model = ScalarCoefficients::new(|_, x| x * x * 1e200, |_, _| 0.0)
            .into_model("blowup", 1.0, one, one)
            .unwrap();
        let grid = TimeGrid::uniform(1.0, 8).unwrap();
        let inc = sample_increments(&grid, &NoiseConfig::independent(1, 4, 0), 0);
        let path = euler_path(&model, &grid, &inc).unwrap();
        assert!(path.diverged());
        assert!(path.terminal()[0].is_nan());
    }

    #[test]
    fn wrong_grid_is_rejected() {
        let model = volterra_ou(1.0, 1.0, -0.5, 0.2, 0.3).unwrap();
        let g1 = TimeGrid::uniform(1.0, 8).unwrap();
        let g2 = TimeGrid::uniform(1.0, 4).unwrap();
        let inc = sample_increments(&g2, &model.noise(0, 0), 0);
        assert!(euler_path(&model, &g1, &inc).is_err());
    }

    #[test]
    fn dot_matches_naive() {
        let a: Vec<f64> = (0..23).map(|i| (i as f64).sin()).collect();
        let b: Vec<f64> = (0..23).map(|i| (i as f64 * 0.3).cos()).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-13);
    }
}
