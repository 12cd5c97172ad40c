//! Payoffs and single-level Monte Carlo.

use std::ops::Range;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::euler::{EulerScheme, SchemePath};
use crate::grid::TimeGrid;
use crate::milstein::MilsteinScheme;
use crate::models::SveModel;
use crate::noise::{sample_increments, NoiseConfig};
use crate::stats::RunningStats;

/// Paths per parallel work item. Results never depend on it.
pub const CHUNK: u64 = 256;

/// Path functionals. Components are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payoff {
    /// `(X_T − K)₊`
    TerminalCall { strike: f64, component: usize },
    /// `((T/n) Σ_{k=1}^n X_{t_k} − K)₊`
    AsianCall { strike: f64, component: usize },
    /// `X_T^k`
    Moment { order: u32, component: usize },
}

impl Payoff {
    pub fn component(&self) -> usize {
        match *self {
            Payoff::TerminalCall { component, .. }
            | Payoff::AsianCall { component, .. }
            | Payoff::Moment { component, .. } => component,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.component() >= dim {
            return Err(Error::invalid(format!(
                "payoff component {} out of range for a {dim}-dimensional model",
                self.component()
            )));
        }
        match *self {
            Payoff::TerminalCall { strike, .. } | Payoff::AsianCall { strike, .. }
                if !strike.is_finite() =>
            {
                Err(Error::invalid("strike must be finite"))
            }
            Payoff::Moment { order: 0, .. } => {
                Err(Error::invalid("moment order must be at least 1"))
            }
            _ => Ok(()),
        }
    }

    /// True for payoffs that only look at `X_T`.
    pub fn is_terminal(&self) -> bool {
        !matches!(self, Payoff::AsianCall { .. })
    }
}

/// Payoff of one path; NaN marks a diverged path.
pub fn evaluate_payoff(payoff: &Payoff, path: &SchemePath) -> f64 {
    if path.diverged() {
        return f64::NAN;
    }
    let grid = path.grid();
    let n = grid.cells();
    match *payoff {
        Payoff::TerminalCall { strike, component } => (path.value(n, component) - strike).max(0.0),
        Payoff::AsianCall { strike, component } => {
            let average = if grid.is_uniform() {
                let s: f64 = (1..=n).map(|k| path.value(k, component)).sum();
                grid.horizon() / n as f64 * s
            } else {
                (0..n)
                    .map(|k| grid.dt(k) * path.value(k + 1, component))
                    .sum()
            };
            (average - strike).max(0.0)
        }
        Payoff::Moment { order, component } => path.value(n, component).powi(order as i32),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Euler,
    /// Whichever Milstein special case the model satisfies.
    #[serde(alias = "milstein")]
    MilsteinAuto,
}

/// A prepared scheme that maps a path index to a path.
#[derive(Debug, Clone)]
pub enum PathSampler {
    Euler(EulerScheme),
    Milstein(MilsteinScheme),
}

impl PathSampler {
    pub fn new(model: &SveModel, scheme: Scheme, grid: &TimeGrid) -> Result<Self> {
        Ok(match scheme {
            Scheme::Euler => PathSampler::Euler(EulerScheme::new(model, grid)),
            Scheme::MilsteinAuto => PathSampler::Milstein(MilsteinScheme::new(model, grid)?),
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        match self {
            PathSampler::Euler(s) => s.grid(),
            PathSampler::Milstein(s) => s.grid(),
        }
    }

    pub fn sample(&self, noise: &NoiseConfig, path_index: u64) -> Result<SchemePath> {
        match self {
            PathSampler::Euler(s) => s.run(&sample_increments(s.grid(), noise, path_index)),
            PathSampler::Milstein(s) => s.sample_path(noise, path_index),
        }
    }
}

/// Evaluates `f` on every index of `range` in parallel and returns the
/// values in index order.
pub(crate) fn parallel_samples<T, F>(range: Range<u64>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    let starts: Vec<u64> = (range.start..range.end).step_by(CHUNK as usize).collect();
    let chunks: Vec<Vec<T>> = starts
        .into_par_iter()
        .map(|s| {
            (s..(s + CHUNK).min(range.end))
                .map(&f)
                .collect::<Result<Vec<T>>>()
        })
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

/// Moments of the finite entries, accumulated in order, and the number of
/// non-finite (diverged) ones.
pub fn summarize(samples: &[f64]) -> (RunningStats, u64) {
    let mut stats = RunningStats::default();
    let mut diverged = 0;
    for &x in samples {
        if x.is_finite() {
            stats.push(x);
        } else {
            diverged += 1;
        }
    }
    (stats, diverged)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    /// `σ̂_N / √N`.
    pub stat_error: f64,
    pub n_paths: u64,
    pub diverged_count: u64,
    pub wall_time: f64,
    /// `N·n²`.
    pub cost_units: u64,
}

/// Plain Monte Carlo over paths `0..n_paths` of stream 0.
pub fn mc_estimate(
    model: &SveModel,
    scheme: Scheme,
    grid: &TimeGrid,
    payoff: &Payoff,
    n_paths: u64,
    seed: u64,
) -> Result<McEstimate> {
    mc_estimate_stream(model, scheme, grid, payoff, n_paths, &model.noise(seed, 0))
}

pub fn mc_estimate_stream(
    model: &SveModel,
    scheme: Scheme,
    grid: &TimeGrid,
    payoff: &Payoff,
    n_paths: u64,
    noise: &NoiseConfig,
) -> Result<McEstimate> {
    let mut all = mc_estimate_payoffs(
        model,
        scheme,
        grid,
        std::slice::from_ref(payoff),
        n_paths,
        noise,
    )?;
    Ok(all.remove(0))
}

/// Several payoffs evaluated on the same paths; every estimate reports the
/// shared wall time and cost.
pub fn mc_estimate_payoffs(
    model: &SveModel,
    scheme: Scheme,
    grid: &TimeGrid,
    payoffs: &[Payoff],
    n_paths: u64,
    noise: &NoiseConfig,
) -> Result<Vec<McEstimate>> {
    if n_paths < 2 {
        return Err(Error::invalid("need at least two paths"));
    }
    if payoffs.is_empty() {
        return Err(Error::invalid("need at least one payoff"));
    }
    for p in payoffs {
        p.validate(model.dim())?;
    }
    let start = Instant::now();
    let sampler = PathSampler::new(model, scheme, grid)?;
    let rows = parallel_samples(0..n_paths, |p| {
        let path = sampler.sample(noise, p)?;
        Ok(payoffs
            .iter()
            .map(|f| evaluate_payoff(f, &path))
            .collect::<Vec<f64>>())
    })?;
    let wall_time = start.elapsed().as_secs_f64();
    let n = grid.cells() as u64;
    Ok((0..payoffs.len())
        .map(|i| {
            let samples: Vec<f64> = rows.iter().map(|r| r[i]).collect();
            let (stats, diverged_count) = summarize(&samples);
            McEstimate {
                mean: stats.mean,
                stat_error: stats.std_error(),
                n_paths,
                diverged_count,
                wall_time,
                cost_units: n_paths * n * n,
            }
        })
        .collect())
}
