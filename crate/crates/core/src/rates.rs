//! Empirical strong rates and MLMC complexity.
//!
//! Strong errors are measured against the same scheme on a finer grid
//! driven by the same Brownian motion; the coarse noise is obtained by
//! aggregating the fine noise, so both paths are coupled exactly.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{mc_estimate_stream, parallel_samples, Payoff, Scheme};
use crate::euler::{EulerScheme, SchemePath};
use crate::grid::TimeGrid;
use crate::milstein::{MilsteinScheme, MilsteinVariant};
use crate::mlmc::{mlmc_adaptive, resolve_alpha_circ, MlmcConfig};
use crate::models::SveModel;
use crate::noise::{sample_increments, KernelCellSampler, NoiseConfig};
use crate::stats::{fit_log_log, LineFit, RunningStats};

/// Stream used by the single-level variance pilot, away from the MLMC levels.
const PILOT_STREAM: u64 = 1 << 32;

/// Pilot paths used to size the single-level comparator.
pub const PILOT_PATHS: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub scheme: Scheme,
    /// Ascending grid sizes.
    pub n_list: Vec<usize>,
    pub n_ref: usize,
    pub n_paths: u64,
    pub diverged_count: u64,
    pub delta: Vec<f64>,
    /// `E[|X^n_T − X^ref_T|²]^{1/2}`.
    pub rms_terminal: Vec<f64>,
    pub rms_terminal_se: Vec<f64>,
    /// `E[max_k |X^n_{t_k} − X^ref_{t_k}|²]^{1/2}` over the coarse grid.
    pub rms_sup: Vec<f64>,
    pub rms_sup_se: Vec<f64>,
    pub terminal_fit: LineFit,
    pub sup_fit: LineFit,
    /// `α∧1` for Euler, `2α′∧1` for Milstein.
    pub predicted: Option<f64>,
}

impl RateReport {
    /// Columns `n, delta_n, rms_T, rms_sup`, then slope and half-width rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,delta_n,rms_T,rms_sup\n");
        for i in 0..self.n_list.len() {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{:e}",
                self.n_list[i], self.delta[i], self.rms_terminal[i], self.rms_sup[i]
            );
        }
        let _ = writeln!(
            out,
            "slope,,{},{}",
            self.terminal_fit.slope, self.sup_fit.slope
        );
        let _ = writeln!(
            out,
            "half_width,,{},{}",
            self.terminal_fit.slope_half_width, self.sup_fit.slope_half_width
        );
        out
    }
}

/// Fine reference scheme together with the coarse schemes it feeds.
enum Coupled {
    Euler {
        fine: EulerScheme,
        coarse: Vec<EulerScheme>,
    },
    MilsteinIncrements {
        fine: MilsteinScheme,
        coarse: Vec<MilsteinScheme>,
    },
    MilsteinKernel {
        fine: MilsteinScheme,
        coarse: Vec<MilsteinScheme>,
        sampler: Arc<KernelCellSampler>,
    },
}

impl Coupled {
    fn new(
        model: &SveModel,
        scheme: Scheme,
        fine_grid: &TimeGrid,
        grids: &[TimeGrid],
    ) -> Result<Self> {
        Ok(match scheme {
            Scheme::Euler => Coupled::Euler {
                fine: EulerScheme::new(model, fine_grid),
                coarse: grids.iter().map(|g| EulerScheme::new(model, g)).collect(),
            },
            Scheme::MilsteinAuto => {
                let fine = MilsteinScheme::new(model, fine_grid)?;
                let coarse = grids
                    .iter()
                    .map(|g| MilsteinScheme::new(model, g))
                    .collect::<Result<Vec<_>>>()?;
                match fine.variant() {
                    MilsteinVariant::ConstantK2 => Coupled::MilsteinIncrements { fine, coarse },
                    MilsteinVariant::StateFreeSigma => Coupled::MilsteinKernel {
                        fine,
                        coarse,
                        sampler: KernelCellSampler::cached(
                            fine_grid,
                            model.diffusion_kernels()[0],
                        )?,
                    },
                }
            }
        })
    }

    /// Reference path and one coarse path per grid, all on the same noise.
    fn paths(
        &self,
        noise: &NoiseConfig,
        factors: &[usize],
        index: u64,
    ) -> Result<(SchemePath, Vec<SchemePath>)> {
        match self {
            Coupled::Euler { fine, coarse } => {
                let inc = sample_increments(fine.grid(), noise, index);
                let coarse = coarse
                    .iter()
                    .zip(factors)
                    .map(|(s, &f)| s.run(&inc.aggregate_to_coarse(f)?))
                    .collect::<Result<_>>()?;
                Ok((fine.run(&inc)?, coarse))
            }
            Coupled::MilsteinIncrements { fine, coarse } => {
                let inc = sample_increments(fine.grid(), noise, index);
                let coarse = coarse
                    .iter()
                    .zip(factors)
                    .map(|(s, &f)| Ok(s.run_constant_k2(&inc.aggregate_to_coarse(f)?)?.0))
                    .collect::<Result<_>>()?;
                Ok((fine.run_constant_k2(&inc)?.0, coarse))
            }
            Coupled::MilsteinKernel {
                fine,
                coarse,
                sampler,
            } => {
                let z = sampler.sample(noise, index);
                let coarse = coarse
                    .iter()
                    .zip(factors)
                    .map(|(s, &f)| Ok(s.run_state_free(&z.aggregate_to_coarse(f)?)?.0))
                    .collect::<Result<_>>()?;
                Ok((fine.run_state_free(&z)?.0, coarse))
            }
        }
    }
}

fn distance_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Squared terminal and grid-sup errors of `coarse` against `fine`.
fn squared_errors(fine: &SchemePath, coarse: &SchemePath, factor: usize) -> (f64, f64) {
    let n = coarse.grid().cells();
    let mut sup: f64 = 0.0;
    for k in 0..=n {
        sup = sup.max(distance_sq(coarse.at(k), fine.at(k * factor)));
    }
    (distance_sq(coarse.terminal(), fine.terminal()), sup)
}

fn rms(stats: &RunningStats) -> (f64, f64) {
    let r = stats.mean.sqrt();
    let se = if r > 0.0 {
        stats.std_error() / (2.0 * r)
    } else {
        0.0
    };
    (r, se)
}

/// RMS strong errors of `scheme` on uniform grids of `n_list` cells over
/// `[0, 1]`, against the same scheme on `max(n)·ref_factor` cells.
pub fn strong_rate_experiment(
    model: &SveModel,
    scheme: Scheme,
    n_list: &[usize],
    ref_factor: usize,
    n_paths: u64,
    seed: u64,
) -> Result<RateReport> {
    let mut ns = n_list.to_vec();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < 4 || ns[0] == 0 {
        return Err(Error::invalid(
            "need at least four distinct positive grid sizes",
        ));
    }
    if ref_factor < 2 {
        return Err(Error::invalid(
            "the reference grid must be at least twice as fine",
        ));
    }
    if n_paths < 2 {
        return Err(Error::invalid("need at least two paths"));
    }
    let n_ref = ns[ns.len() - 1]
        .checked_mul(ref_factor)
        .ok_or_else(|| Error::invalid("reference grid too large"))?;
    if let Some(bad) = ns.iter().find(|&&n| n_ref % n != 0) {
        return Err(Error::invalid(format!(
            "{bad} does not divide the reference size {n_ref}"
        )));
    }
    let factors: Vec<usize> = ns.iter().map(|n| n_ref / n).collect();
    let fine_grid = TimeGrid::uniform(1.0, n_ref)?;
    let grids = ns
        .iter()
        .map(|&n| TimeGrid::uniform(1.0, n))
        .collect::<Result<Vec<_>>>()?;
    let coupled = Coupled::new(model, scheme, &fine_grid, &grids)?;
    let noise = model.noise(seed, 0);

    // one row of squared errors per path, `None` if any path diverged
    let rows = parallel_samples(0..n_paths, |p| {
        let (fine, coarse) = coupled.paths(&noise, &factors, p)?;
        if fine.diverged() || coarse.iter().any(SchemePath::diverged) {
            return Ok(None);
        }
        Ok(Some(
            coarse
                .iter()
                .zip(&factors)
                .map(|(c, &f)| squared_errors(&fine, c, f))
                .collect::<Vec<_>>(),
        ))
    })?;

    let mut terminal = vec![RunningStats::default(); ns.len()];
    let mut sup = vec![RunningStats::default(); ns.len()];
    let mut diverged_count = 0;
    for row in &rows {
        match row {
            None => diverged_count += 1,
            Some(errs) => {
                for (i, &(t, s)) in errs.iter().enumerate() {
                    terminal[i].push(t);
                    sup[i].push(s);
                }
            }
        }
    }
    if terminal[0].count < 2 {
        return Err(Error::invalid("fewer than two paths stayed finite"));
    }
    let (rms_terminal, rms_terminal_se): (Vec<f64>, Vec<f64>) = terminal.iter().map(rms).unzip();
    let (rms_sup, rms_sup_se): (Vec<f64>, Vec<f64>) = sup.iter().map(rms).unzip();
    let delta: Vec<f64> = grids.iter().map(TimeGrid::mesh).collect();
    let params = model.rate_parameters()?;
    let predicted = match scheme {
        Scheme::Euler => Some(params.euler_rate()),
        Scheme::MilsteinAuto => params.milstein_rate(),
    };
    Ok(RateReport {
        scheme,
        terminal_fit: fit_log_log(&delta, &rms_terminal),
        sup_fit: fit_log_log(&delta, &rms_sup),
        n_list: ns,
        n_ref,
        n_paths,
        diverged_count,
        delta,
        rms_terminal,
        rms_terminal_se,
        rms_sup,
        rms_sup_se,
        predicted,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityRow {
    pub epsilon: f64,
    pub mlmc_cost: u64,
    pub mlmc_estimate: f64,
    pub mlmc_levels: usize,
    /// `ceil(ε^{−1/α∘})`
    pub single_cells: usize,
    /// `ceil(2σ̂²/ε²)`
    pub single_paths: u64,
    pub pilot_variance: f64,
    /// `N·n²`
    pub single_cost: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityReport {
    pub alpha_circ: f64,
    pub rows: Vec<ComplexityRow>,
    /// `log cost` against `log ε`.
    pub mlmc_fit: LineFit,
    pub single_fit: LineFit,
}

impl ComplexityReport {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("epsilon,mlmc_cost,single_cost,mlmc_levels,single_n,single_paths\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.epsilon,
                r.mlmc_cost,
                r.single_cost,
                r.mlmc_levels,
                r.single_cells,
                r.single_paths
            );
        }
        let _ = writeln!(
            out,
            "slope,{},{},,,",
            self.mlmc_fit.slope, self.single_fit.slope
        );
        out
    }
}

/// MLMC cost against a single-level Euler estimator of the same accuracy
/// for each `ε`. `α∘` is resolved as in [`resolve_alpha_circ`].
pub fn complexity_experiment(
    model: &SveModel,
    payoff: &Payoff,
    epsilon_list: &[f64],
    alpha_circ: Option<f64>,
    seed: u64,
) -> Result<ComplexityReport> {
    if epsilon_list.len() < 3 {
        return Err(Error::invalid("need at least three tolerances"));
    }
    if !epsilon_list.iter().all(|&e| e > 0.0 && e.is_finite())
        || !epsilon_list.windows(2).all(|w| w[1] < w[0])
    {
        return Err(Error::invalid(
            "tolerances must be positive and strictly decreasing",
        ));
    }
    let alpha_circ = resolve_alpha_circ(model, payoff, alpha_circ)?;
    let pilot_noise = model.noise(seed, PILOT_STREAM);
    let mut rows = Vec::with_capacity(epsilon_list.len());
    for &eps in epsilon_list {
        let config = MlmcConfig::adaptive(eps, alpha_circ, seed);
        let mlmc = mlmc_adaptive(model, payoff, &config)?;
        let cells = eps.powf(-1.0 / alpha_circ).ceil() as usize;
        let grid = TimeGrid::uniform(config.horizon, cells)?;
        let pilot = mc_estimate_stream(
            model,
            Scheme::Euler,
            &grid,
            payoff,
            PILOT_PATHS,
            &pilot_noise,
        )?;
        let variance = pilot.stat_error.powi(2) * (pilot.n_paths - pilot.diverged_count) as f64;
        let single_paths = ((2.0 * variance / (eps * eps)).ceil() as u64).max(1);
        rows.push(ComplexityRow {
            epsilon: eps,
            mlmc_cost: mlmc.cost_units,
            mlmc_estimate: mlmc.estimate,
            mlmc_levels: mlmc.max_level(),
            single_cells: cells,
            single_paths,
            pilot_variance: variance,
            single_cost: single_paths * (cells * cells) as u64,
        });
    }
    let eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    let mlmc_cost: Vec<f64> = rows.iter().map(|r| r.mlmc_cost as f64).collect();
    let single_cost: Vec<f64> = rows.iter().map(|r| r.single_cost as f64).collect();
    Ok(ComplexityReport {
        alpha_circ,
        mlmc_fit: fit_log_log(&eps, &mlmc_cost),
        single_fit: fit_log_log(&eps, &single_cost),
        rows,
    })
}
