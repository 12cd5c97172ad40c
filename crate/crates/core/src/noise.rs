//! Brownian increments and kernel-weighted Wiener integrals.
//!
//! Every Gaussian draw is addressed by `(seed, stream, domain, path, index)`:
//! the first three select a ChaCha8 key, the path selects the ChaCha stream,
//! and the index fixes the word position. A path can therefore be sampled
//! by any worker in any order and always produces the same numbers.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::sync::{Arc, Mutex, OnceLock};

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::kernels::PowerKernel;
use crate::linalg::{cholesky_psd, LowerFactor};

const DOMAIN_INCREMENTS: u64 = 1;
const DOMAIN_KERNEL_INTEGRALS: u64 = 2;

/// Counter-addressed standard normal generator (Box–Muller on ChaCha8).
///
/// Normal `2i` and `2i+1` come from the two 64-bit words at position `i`.
#[derive(Debug, Clone)]
pub struct NormalStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl NormalStream {
    pub fn new(seed: u64, stream_id: u64, domain: u64, path: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&stream_id.to_le_bytes());
        key[16..24].copy_from_slice(&domain.to_le_bytes());
        key[24..32].copy_from_slice(b"sve-rng1");
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(path);
        NormalStream { rng, spare: None }
    }

    /// Position the stream so that the next draw is normal number `index`.
    pub fn seek(&mut self, index: u64) {
        // two u64 = four 32-bit words per pair of normals
        self.rng.set_word_pos(u128::from(index / 2) * 4);
        self.spare = None;
        if index % 2 == 1 {
            self.next_normal();
        }
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let (z0, z1) = box_muller(self.rng.next_u64(), self.rng.next_u64());
        self.spare = Some(z1);
        z0
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        for z in out {
            *z = self.next_normal();
        }
    }
}

fn box_muller(a: u64, b: u64) -> (f64, f64) {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    // u1 in (0, 1], u2 in [0, 1)
    let u1 = ((a >> 11) + 1) as f64 * SCALE;
    let u2 = (b >> 11) as f64 * SCALE;
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (TAU * u2).sin_cos();
    (r * c, r * s)
}

/// Driver count, correlation and stream key.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseConfig {
    drivers: usize,
    correlation: Vec<f64>,
    factor: LowerFactor,
    pub seed: u64,
    pub stream_id: u64,
}

impl NoiseConfig {
    /// `correlation` is row-major `m×m`, symmetric with unit diagonal.
    pub fn new(drivers: usize, correlation: Vec<f64>, seed: u64, stream_id: u64) -> Result<Self> {
        if drivers == 0 {
            return Err(Error::invalid("need at least one driver"));
        }
        if correlation.len() != drivers * drivers {
            return Err(Error::invalid("correlation matrix has the wrong shape"));
        }
        for i in 0..drivers {
            if correlation[i * drivers + i] != 1.0 {
                return Err(Error::invalid("correlation diagonal must be one"));
            }
            for j in 0..i {
                let (a, b) = (correlation[i * drivers + j], correlation[j * drivers + i]);
                if a != b || !(-1.0..=1.0).contains(&a) {
                    return Err(Error::invalid(
                        "correlation must be symmetric with entries in [-1, 1]",
                    ));
                }
            }
        }
        let factor = cholesky_psd(&correlation, drivers)?;
        Ok(NoiseConfig {
            drivers,
            correlation,
            factor,
            seed,
            stream_id,
        })
    }

    /// Independent drivers.
    pub fn independent(drivers: usize, seed: u64, stream_id: u64) -> Self {
        let mut corr = vec![0.0; drivers * drivers];
        for i in 0..drivers {
            corr[i * drivers + i] = 1.0;
        }
        NoiseConfig::new(drivers, corr, seed, stream_id).expect("identity is a valid correlation")
    }

    pub fn drivers(&self) -> usize {
        self.drivers
    }

    pub fn correlation(&self) -> &[f64] {
        &self.correlation
    }

    pub fn with_stream(&self, stream_id: u64) -> Self {
        NoiseConfig {
            stream_id,
            ..self.clone()
        }
    }

    fn stream(&self, domain: u64, path: u64) -> NormalStream {
        NormalStream::new(self.seed, self.stream_id, domain, path)
    }
}

/// Per-cell Brownian increments `ΔW_{k+1} = W_{t_{k+1}} − W_{t_k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementTable {
    grid: TimeGrid,
    drivers: usize,
    dw: Vec<f64>,
}

impl IncrementTable {
    pub fn new(grid: TimeGrid, drivers: usize, dw: Vec<f64>) -> Result<Self> {
        if dw.len() != grid.cells() * drivers {
            return Err(Error::invalid("increment table has the wrong shape"));
        }
        Ok(IncrementTable { grid, drivers, dw })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn drivers(&self) -> usize {
        self.drivers
    }

    /// Increments over cell `k`, one per driver.
    pub fn row(&self, k: usize) -> &[f64] {
        &self.dw[k * self.drivers..(k + 1) * self.drivers]
    }

    pub fn get(&self, k: usize, driver: usize) -> f64 {
        self.dw[k * self.drivers + driver]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.dw
    }

    /// `W` at every grid point for one driver.
    pub fn brownian_path(&self, driver: usize) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.grid.cells() + 1);
        let mut acc = 0.0;
        w.push(acc);
        for k in 0..self.grid.cells() {
            acc += self.get(k, driver);
            w.push(acc);
        }
        w
    }

    /// Increments on the grid made of every `factor`-th point: each coarse
    /// increment is the sum of its `factor` fine increments.
    pub fn aggregate_to_coarse(&self, factor: usize) -> Result<IncrementTable> {
        let coarse = self.grid.coarsen(factor)?;
        if factor == 1 {
            return Ok(self.clone());
        }
        let m = self.drivers;
        let mut dw = vec![0.0; coarse.cells() * m];
        for (k, out) in dw.chunks_exact_mut(m).enumerate() {
            for f in k * factor..(k + 1) * factor {
                for (o, v) in out.iter_mut().zip(self.row(f)) {
                    *o += v;
                }
            }
        }
        Ok(IncrementTable {
            grid: coarse,
            drivers: m,
            dw,
        })
    }
}

/// Correlated increments for one path. Normal number `k·m + j` feeds
/// cell `k`, driver `j`.
pub fn sample_increments(grid: &TimeGrid, config: &NoiseConfig, path_index: u64) -> IncrementTable {
    let m = config.drivers;
    let n = grid.cells();
    let mut stream = config.stream(DOMAIN_INCREMENTS, path_index);
    let mut xi = vec![0.0; m];
    let mut dw = vec![0.0; n * m];
    for k in 0..n {
        stream.fill(&mut xi);
        let sd = grid.dt(k).sqrt();
        let row = &mut dw[k * m..(k + 1) * m];
        if m == 1 {
            row[0] = sd * xi[0];
        } else {
            config.factor.mul_leading(m, &xi, row);
            for v in row.iter_mut() {
                *v *= sd;
            }
        }
    }
    IncrementTable {
        grid: grid.clone(),
        drivers: m,
        dw,
    }
}

/// The Wiener integrals `Z[j][m] = ∫_{t_m}^{t_{m+1}} K₂(t_j, r) dW_r` for
/// every cell `m` and every later grid point `j > m`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGaussianFamily {
    grid: TimeGrid,
    kernel: PowerKernel,
    z: Vec<f64>,
}

#[inline]
fn cell_offset(n: usize, m: usize) -> usize {
    m * n - m * (m.saturating_sub(1)) / 2
}

impl KernelGaussianFamily {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn kernel(&self) -> &PowerKernel {
        &self.kernel
    }

    /// `Z[j][m]` for `m < j ≤ n`.
    #[inline]
    pub fn get(&self, j: usize, m: usize) -> f64 {
        debug_assert!(m < j && j <= self.grid.cells());
        self.z[cell_offset(self.grid.cells(), m) + (j - m - 1)]
    }

    /// All `Z[j][m]` for fixed cell `m`, indexed by `j − m − 1`.
    pub fn cell(&self, m: usize) -> &[f64] {
        let n = self.grid.cells();
        let start = cell_offset(n, m);
        &self.z[start..start + (n - m)]
    }

    /// The family on the grid of every `factor`-th point, built from the
    /// same Wiener path: coarse `Z[j][m]` sums the fine cells of coarse
    /// cell `m` evaluated at fine point `j·factor`.
    pub fn aggregate_to_coarse(&self, factor: usize) -> Result<KernelGaussianFamily> {
        let coarse = self.grid.coarsen(factor)?;
        if factor == 1 {
            return Ok(self.clone());
        }
        let nc = coarse.cells();
        let mut z = Vec::with_capacity(nc * (nc + 1) / 2);
        for m in 0..nc {
            for j in m + 1..=nc {
                let jf = j * factor;
                let s: f64 = (m * factor..(m + 1) * factor)
                    .map(|mf| self.get(jf, mf))
                    .sum();
                z.push(s);
            }
        }
        Ok(KernelGaussianFamily {
            grid: coarse,
            kernel: self.kernel,
            z,
        })
    }
}

#[derive(Debug)]
enum CellFactors {
    /// Constant kernel `c`: every `Z[j][m]` equals `c·ΔW_m`.
    Constant(f64),
    /// Uniform grid: cell `m` uses the leading `(n−m)` block of one factor.
    Shared(LowerFactor),
    PerCell(Vec<LowerFactor>),
}

/// Cholesky factors of the per-cell covariances
/// `C⁽ᵐ⁾_{j,j′} = ∫_{t_m}^{t_{m+1}} K₂(t_j,r) K₂(t_{j′},r) dr`.
#[derive(Debug)]
pub struct KernelCellSampler {
    grid: TimeGrid,
    kernel: PowerKernel,
    factors: CellFactors,
}

type CacheKey = (Vec<u64>, u64, u64, bool);

fn sampler_cache() -> &'static Mutex<HashMap<CacheKey, Arc<KernelCellSampler>>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, Arc<KernelCellSampler>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

impl KernelCellSampler {
    pub fn new(grid: &TimeGrid, kernel: PowerKernel) -> Result<Self> {
        if !kernel.is_square_integrable() {
            return Err(Error::invalid(format!(
                "diffusion kernel exponent {} is not square integrable",
                kernel.exponent()
            )));
        }
        let n = grid.cells();
        let factors = if kernel.is_constant() {
            CellFactors::Constant(kernel.scale())
        } else if grid.is_uniform() {
            CellFactors::Shared(cell_factor(grid, &kernel, 0)?)
        } else {
            CellFactors::PerCell(
                (0..n)
                    .map(|m| cell_factor(grid, &kernel, m))
                    .collect::<Result<_>>()?,
            )
        };
        Ok(KernelCellSampler {
            grid: grid.clone(),
            kernel,
            factors,
        })
    }

    /// Shared, lazily built sampler for `(grid, kernel)`.
    pub fn cached(grid: &TimeGrid, kernel: PowerKernel) -> Result<Arc<Self>> {
        let key: CacheKey = (
            grid.points().iter().map(|t| t.to_bits()).collect(),
            kernel.exponent().to_bits(),
            kernel.scale().to_bits(),
            kernel.is_zero(),
        );
        if let Some(s) = sampler_cache().lock().unwrap().get(&key) {
            return Ok(Arc::clone(s));
        }
        let sampler = Arc::new(KernelCellSampler::new(grid, kernel)?);
        sampler_cache()
            .lock()
            .unwrap()
            .entry(key)
            .or_insert_with(|| Arc::clone(&sampler));
        Ok(sampler)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Largest jitter used by any factor, relative to that matrix's trace.
    pub fn max_relative_jitter(&self) -> f64 {
        let rel = |f: &LowerFactor| {
            let trace: f64 = (0..f.dim())
                .map(|i| f.row(i).iter().map(|v| v * v).sum::<f64>())
                .sum();
            if trace > 0.0 {
                f.jitter() / trace
            } else {
                0.0
            }
        };
        match &self.factors {
            CellFactors::Constant(_) => 0.0,
            CellFactors::Shared(f) => rel(f),
            CellFactors::PerCell(fs) => fs.iter().map(rel).fold(0.0, f64::max),
        }
    }

    /// Cholesky factor for cell `m` (dimension `n − m`), if one is stored.
    pub fn factor_for_cell(&self, m: usize) -> Option<(&LowerFactor, usize)> {
        let dim = self.grid.cells() - m;
        match &self.factors {
            CellFactors::Constant(_) => None,
            CellFactors::Shared(f) => Some((f, dim)),
            CellFactors::PerCell(fs) => Some((&fs[m], dim)),
        }
    }

    pub fn sample(&self, config: &NoiseConfig, path_index: u64) -> KernelGaussianFamily {
        let n = self.grid.cells();
        let mut z = vec![0.0; n * (n + 1) / 2];
        match &self.factors {
            CellFactors::Constant(c) => {
                // Same normals as `sample_increments`, so Z[j][m] = c·ΔW_m.
                let inc = sample_increments(&self.grid, config, path_index);
                for m in 0..n {
                    let v = c * inc.get(m, 0);
                    let start = cell_offset(n, m);
                    z[start..start + (n - m)].fill(v);
                }
            }
            factors => {
                let mut stream = config.stream(DOMAIN_KERNEL_INTEGRALS, path_index);
                let mut xi = vec![0.0; n];
                for m in 0..n {
                    let dim = n - m;
                    stream.fill(&mut xi[..dim]);
                    let start = cell_offset(n, m);
                    let out = &mut z[start..start + dim];
                    match factors {
                        CellFactors::Shared(f) => f.mul_leading(dim, &xi, out),
                        CellFactors::PerCell(fs) => fs[m].mul_leading(dim, &xi, out),
                        CellFactors::Constant(_) => unreachable!(),
                    }
                }
            }
        }
        KernelGaussianFamily {
            grid: self.grid.clone(),
            kernel: self.kernel,
            z,
        }
    }
}

/// Covariance of `(Z[j][m])_{j>m}` for cell `m`, row-major.
pub fn cell_covariance(grid: &TimeGrid, kernel: &PowerKernel, m: usize) -> Result<Vec<f64>> {
    let n = grid.cells();
    let dim = n - m;
    let (a, b) = (grid.t(m), grid.t(m + 1));
    let mut cov = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..=i {
            let v = kernel.cell_l2_product(grid.t(m + 1 + i), grid.t(m + 1 + j), a, b)?;
            cov[i * dim + j] = v;
            cov[j * dim + i] = v;
        }
    }
    Ok(cov)
}

fn cell_factor(grid: &TimeGrid, kernel: &PowerKernel, m: usize) -> Result<LowerFactor> {
    let dim = grid.cells() - m;
    let cov = cell_covariance(grid, kernel, m)?;
    cholesky_psd(&cov, dim)
}

/// Convenience wrapper: samples `Z` through the shared sampler cache.
pub fn sample_kernel_cell_integrals(
    grid: &TimeGrid,
    kernel: PowerKernel,
    config: &NoiseConfig,
    path_index: u64,
) -> Result<KernelGaussianFamily> {
    Ok(KernelCellSampler::cached(grid, kernel)?.sample(config, path_index))
}
