//! Multilevel Monte Carlo over Euler levels `n_ℓ = M^ℓ`.
//!
//! Level `ℓ` draws increments on the `M^ℓ` grid from stream `ℓ` and obtains
//! the coarse increments by summing groups of `M`, so both paths of a pair
//! see the same Brownian motion. Samples are keyed by index: growing a
//! level appends samples, shrinking it keeps a prefix.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{evaluate_payoff, parallel_samples, summarize, Payoff};
use crate::euler::EulerScheme;
use crate::grid::TimeGrid;
use crate::models::SveModel;
use crate::noise::{sample_increments, NoiseConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MlmcMode {
    /// Add levels until the bias test passes; size each level for a
    /// statistical error of `ε/√2`.
    Adaptive { epsilon: f64, alpha_circ: f64 },
    /// Levels `0..=levels`, `n_total` samples split by `√V_ℓ`.
    FixedBudget { levels: usize, n_total: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlmcConfig {
    /// Refinement factor `M ≥ 2`.
    pub refinement: usize,
    pub mode: MlmcMode,
    /// Pilot samples per new level.
    pub n_initial: u64,
    pub seed: u64,
    pub horizon: f64,
    /// Highest level the adaptive loop may add.
    pub max_level: usize,
}

impl MlmcConfig {
    pub fn adaptive(epsilon: f64, alpha_circ: f64, seed: u64) -> Self {
        MlmcConfig {
            refinement: 4,
            mode: MlmcMode::Adaptive {
                epsilon,
                alpha_circ,
            },
            n_initial: 100,
            seed,
            horizon: 1.0,
            max_level: 10,
        }
    }

    pub fn fixed_budget(levels: usize, n_total: u64, seed: u64) -> Self {
        MlmcConfig {
            refinement: 4,
            mode: MlmcMode::FixedBudget { levels, n_total },
            n_initial: 100,
            seed,
            horizon: 1.0,
            max_level: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.refinement < 2 {
            return Err(Error::invalid("refinement factor M must be at least 2"));
        }
        if self.n_initial < 2 {
            return Err(Error::invalid("need at least two pilot samples"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::invalid("horizon must be positive"));
        }
        match self.mode {
            MlmcMode::Adaptive {
                epsilon,
                alpha_circ,
            } => {
                if !(epsilon > 0.0 && epsilon.is_finite()) {
                    return Err(Error::invalid("epsilon must be positive"));
                }
                if !(alpha_circ > 0.0 && alpha_circ <= 1.0) {
                    return Err(Error::OutOfRange {
                        value: alpha_circ,
                        lo: 0.0,
                        hi: 1.0,
                    });
                }
            }
            MlmcMode::FixedBudget { levels, n_total } => {
                if n_total < (levels as u64 + 1) * self.n_initial {
                    return Err(Error::invalid(format!(
                        "budget {n_total} is below {} pilot samples",
                        (levels as u64 + 1) * self.n_initial
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn cells(&self, level: usize) -> usize {
        self.refinement.pow(level as u32)
    }
}

/// Per-level summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSummary {
    pub level: usize,
    pub cells: usize,
    pub h: f64,
    pub n_samples: u64,
    /// `Ŷ_ℓ`
    pub mean: f64,
    /// `V_ℓ`
    pub variance: f64,
    pub diverged: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MlmcResult {
    pub levels: Vec<LevelSummary>,
    /// `Σ Ŷ_ℓ`
    pub estimate: f64,
    /// `√(Σ V_ℓ/N_ℓ)`
    pub stat_error: f64,
    /// `Σ N_ℓ n_ℓ²`
    pub cost_units: u64,
    pub diverged_count: u64,
    pub wall_time: f64,
}

impl MlmcResult {
    /// Finest level `L`.
    pub fn max_level(&self) -> usize {
        self.levels.len() - 1
    }

    /// Columns `level,h,N,Y,V,cumulative_cost`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("level,h,N,Y,V,cumulative_cost\n");
        let mut cost = 0u64;
        for l in &self.levels {
            cost += l.n_samples * (l.cells as u64).pow(2);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                l.level, l.h, l.n_samples, l.mean, l.variance, cost
            );
        }
        out
    }
}

/// Coupled fine/coarse Euler pair for one level.
#[derive(Debug, Clone)]
pub struct LevelSampler {
    level: usize,
    refinement: usize,
    fine: EulerScheme,
    coarse: Option<EulerScheme>,
    payoff: Payoff,
    noise: NoiseConfig,
}

impl LevelSampler {
    pub fn new(
        model: &SveModel,
        payoff: &Payoff,
        refinement: usize,
        level: usize,
        horizon: f64,
        seed: u64,
    ) -> Result<Self> {
        payoff.validate(model.dim())?;
        let n = refinement
            .checked_pow(level as u32)
            .ok_or_else(|| Error::invalid("level too deep"))?;
        let fine_grid = TimeGrid::uniform(horizon, n)?;
        let coarse = if level == 0 {
            None
        } else {
            Some(EulerScheme::new(model, &fine_grid.coarsen(refinement)?))
        };
        Ok(LevelSampler {
            level,
            refinement,
            fine: EulerScheme::new(model, &fine_grid),
            coarse,
            payoff: *payoff,
            noise: model.noise(seed, level as u64),
        })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn cells(&self) -> usize {
        self.fine.grid().cells()
    }

    /// `f(X^{n_ℓ}) − f(X^{n_{ℓ−1}})` for one sample; NaN if either diverged.
    pub fn sample(&self, index: u64) -> Result<f64> {
        let inc = sample_increments(self.fine.grid(), &self.noise, index);
        let fine = evaluate_payoff(&self.payoff, &self.fine.run(&inc)?);
        match &self.coarse {
            None => Ok(fine),
            Some(coarse) => {
                let coarse_inc = inc.aggregate_to_coarse(self.refinement)?;
                Ok(fine - evaluate_payoff(&self.payoff, &coarse.run(&coarse_inc)?))
            }
        }
    }

    pub fn samples(&self, range: std::ops::Range<u64>) -> Result<Vec<f64>> {
        parallel_samples(range, |i| self.sample(i))
    }
}

/// Mean, unbiased variance and the samples of level `ℓ`.
pub fn level_pair_estimate(
    model: &SveModel,
    payoff: &Payoff,
    refinement: usize,
    level: usize,
    n_samples: u64,
    seed: u64,
) -> Result<(f64, f64, Vec<f64>)> {
    let sampler = LevelSampler::new(model, payoff, refinement, level, 1.0, seed)?;
    let samples = sampler.samples(0..n_samples)?;
    let (stats, _) = summarize(&samples);
    Ok((stats.mean, stats.variance(), samples))
}

struct LevelState {
    sampler: LevelSampler,
    samples: Vec<f64>,
}

impl LevelState {
    fn resize(&mut self, n: u64) -> Result<()> {
        let have = self.samples.len() as u64;
        if n > have {
            let extra = self.sampler.samples(have..n)?;
            self.samples.extend(extra);
        } else {
            self.samples.truncate(n as usize);
        }
        Ok(())
    }

    fn variance(&self) -> f64 {
        summarize(&self.samples).0.variance()
    }
}

fn assemble(states: &[LevelState], horizon: f64, start: Instant) -> MlmcResult {
    let mut levels = Vec::with_capacity(states.len());
    let (mut estimate, mut var_sum, mut cost, mut diverged_count) = (0.0, 0.0, 0u64, 0u64);
    for s in states {
        let (stats, diverged) = summarize(&s.samples);
        let cells = s.sampler.cells();
        let n = s.samples.len() as u64;
        estimate += stats.mean;
        if stats.count > 0 {
            var_sum += stats.variance() / stats.count as f64;
        }
        cost += n * (cells as u64).pow(2);
        diverged_count += diverged;
        levels.push(LevelSummary {
            level: s.sampler.level(),
            cells,
            h: horizon / cells as f64,
            n_samples: n,
            mean: stats.mean,
            variance: stats.variance(),
            diverged,
        });
    }
    MlmcResult {
        levels,
        estimate,
        stat_error: var_sum.sqrt(),
        cost_units: cost,
        diverged_count,
        wall_time: start.elapsed().as_secs_f64(),
    }
}

/// `α∘` for the bias test: `α∧1` of the model for terminal payoffs. A
/// path-dependent payoff needs a value strictly below `α∧1` from the caller.
pub fn resolve_alpha_circ(model: &SveModel, payoff: &Payoff, given: Option<f64>) -> Result<f64> {
    let rate = model.rate_parameters()?.euler_rate();
    match given {
        None if payoff.is_terminal() => Ok(rate),
        None => Err(Error::invalid(format!(
            "a path-dependent payoff needs alpha_circ in (0, {rate})"
        ))),
        Some(a) if !(a > 0.0 && a <= 1.0) => Err(Error::OutOfRange {
            value: a,
            lo: 0.0,
            hi: 1.0,
        }),
        Some(a) if !payoff.is_terminal() && a >= rate => Err(Error::invalid(format!(
            "alpha_circ must lie below {rate} for a path-dependent payoff"
        ))),
        Some(a) => Ok(a),
    }
}

/// `N_ℓ = ⌈2ε⁻² √(V_ℓ h_ℓ²) Σ_m √(V_m / h_m²)⌉`, the minimiser of the cost
/// `Σ N_ℓ h_ℓ⁻²` subject to `Σ V_ℓ/N_ℓ ≤ ε²/2` before rounding.
pub fn optimal_allocation(variances: &[f64], h: &[f64], epsilon: f64) -> Vec<u64> {
    let total: f64 = variances
        .iter()
        .zip(h)
        .map(|(v, h)| (v / (h * h)).sqrt())
        .sum();
    variances
        .iter()
        .zip(h)
        .map(|(v, h)| (2.0 / (epsilon * epsilon) * (v * h * h).sqrt() * total).ceil() as u64)
        .collect()
}

/// Splits `total` proportionally to `weights`, every share at least
/// `min`, rounding by largest remainder so the shares sum to `total`.
pub fn allocate_budget(weights: &[f64], total: u64, min: u64) -> Vec<u64> {
    let k = weights.len();
    assert!(total >= min * k as u64, "budget too small");
    let w: Vec<f64> = if weights.iter().all(|&x| x <= 0.0) {
        vec![1.0; k]
    } else {
        weights.iter().map(|&x| x.max(0.0)).collect()
    };
    let mut pinned = vec![false; k];
    let mut raw = vec![0.0; k];
    loop {
        let free_total = (total - min * pinned.iter().filter(|&&p| p).count() as u64) as f64;
        let wsum: f64 = (0..k).filter(|&i| !pinned[i]).map(|i| w[i]).sum();
        let mut changed = false;
        for i in 0..k {
            if pinned[i] {
                raw[i] = min as f64;
                continue;
            }
            raw[i] = if wsum > 0.0 {
                free_total * w[i] / wsum
            } else {
                0.0
            };
            if raw[i] < min as f64 {
                pinned[i] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut shares: Vec<u64> = raw.iter().map(|r| r.floor() as u64).collect();
    let assigned: u64 = shares.iter().sum();
    let mut order: Vec<usize> = (0..k).filter(|&i| !pinned[i]).collect();
    order.sort_by(|&a, &b| {
        let fa = raw[a] - raw[a].floor();
        let fb = raw[b] - raw[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take((total - assigned) as usize) {
        shares[i] += 1;
    }
    shares
}

/// Adaptive MLMC: pilot, allocate, top up, test the bias, add a level.
pub fn mlmc_adaptive(model: &SveModel, payoff: &Payoff, config: &MlmcConfig) -> Result<MlmcResult> {
    config.validate()?;
    let MlmcMode::Adaptive {
        epsilon,
        alpha_circ,
    } = config.mode
    else {
        return Err(Error::invalid(
            "adaptive MLMC needs an adaptive configuration",
        ));
    };
    let start = Instant::now();
    let m = config.refinement as f64;
    let mut states: Vec<LevelState> = Vec::new();
    loop {
        let level = states.len();
        let sampler = LevelSampler::new(
            model,
            payoff,
            config.refinement,
            level,
            config.horizon,
            config.seed,
        )?;
        let mut state = LevelState {
            sampler,
            samples: Vec::new(),
        };
        state.resize(config.n_initial)?;
        states.push(state);

        let variances: Vec<f64> = states.iter().map(LevelState::variance).collect();
        let h: Vec<f64> = states
            .iter()
            .map(|s| config.horizon / s.sampler.cells() as f64)
            .collect();
        let targets = optimal_allocation(&variances, &h, epsilon);
        for (s, &n) in states.iter_mut().zip(&targets) {
            if n > s.samples.len() as u64 {
                s.resize(n)?;
            }
        }
        let result = assemble(&states, config.horizon, start);
        let top = result.max_level();
        if top >= 2 {
            let y_l = result.levels[top].mean.abs();
            let y_prev = result.levels[top - 1].mean.abs();
            let bias = (m.powf(-alpha_circ) * y_prev).max(y_l);
            if bias < (m.powf(alpha_circ) - 1.0) * epsilon / std::f64::consts::SQRT_2 {
                return Ok(result);
            }
        }
        if top >= config.max_level {
            return Err(Error::NoConvergence {
                max_level: config.max_level,
                partial: Box::new(result),
            });
        }
    }
}

/// Fixed-budget MLMC: pilots on every level, then `N_ℓ ∝ √V_ℓ`.
pub fn mlmc_fixed_budget(
    model: &SveModel,
    payoff: &Payoff,
    config: &MlmcConfig,
) -> Result<MlmcResult> {
    config.validate()?;
    let MlmcMode::FixedBudget { levels, n_total } = config.mode else {
        return Err(Error::invalid(
            "fixed-budget MLMC needs a fixed-budget configuration",
        ));
    };
    let start = Instant::now();
    let mut states = (0..=levels)
        .map(|level| {
            let sampler = LevelSampler::new(
                model,
                payoff,
                config.refinement,
                level,
                config.horizon,
                config.seed,
            )?;
            let mut s = LevelState {
                sampler,
                samples: Vec::new(),
            };
            s.resize(config.n_initial)?;
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    let weights: Vec<f64> = states.iter().map(|s| s.variance().sqrt()).collect();
    let shares = allocate_budget(&weights, n_total, 2);
    for (s, &n) in states.iter_mut().zip(&shares) {
        s.resize(n)?;
    }
    Ok(assemble(&states, config.horizon, start))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{mc_estimate, Scheme};
    use crate::models::volterra_ou;
    use proptest::prelude::*;

    fn call() -> Payoff {
        Payoff::TerminalCall {
            strike: 1.0,
            component: 0,
        }
    }

    #[test]
    fn alpha_circ_for_path_dependent_payoffs_must_be_given() {
        let model = volterra_ou(1.0, 1.0, -0.5, 0.2, 0.3).unwrap();
        let asian = Payoff::AsianCall {
            strike: 1.0,
            component: 0,
        };
        let rate = model.rate_parameters().unwrap().euler_rate();
        assert_eq!(resolve_alpha_circ(&model, &call(), None).unwrap(), rate);
        assert!(resolve_alpha_circ(&model, &asian, None).is_err());
        assert!(resolve_alpha_circ(&model, &asian, Some(rate)).is_err());
        assert_eq!(resolve_alpha_circ(&model, &asian, Some(0.2)).unwrap(), 0.2);
        assert!(resolve_alpha_circ(&model, &call(), Some(1.5)).is_err());
    }

    #[test]
    fn level_zero_is_plain_monte_carlo() {
        let model = volterra_ou(1.0, 1.0, -0.5, 0.2, 0.75).unwrap();
        let (mean, var, samples) = level_pair_estimate(&model, &call(), 4, 0, 500, 9).unwrap();
        let grid = TimeGrid::uniform(1.0, 1).unwrap();
        let mc = mc_estimate(&model, Scheme::Euler, &grid, &call(), 500, 9).unwrap();
        assert_eq!(mean, mc.mean);
        assert_eq!((var / 500.0).sqrt(), mc.stat_error);
        assert_eq!(samples.len(), 500);
    }

    #[test]
    fn deterministic_levels_have_no_variance() {
        let model = volterra_ou(1.0, 1.0, -0.5, 0.0, 0.75).unwrap();
        for level in 0..3 {
            let (_, var, _) = level_pair_estimate(&model, &call(), 4, level, 50, 1).unwrap();
            assert_eq!(var, 0.0);
        }
        let res = mlmc_adaptive(&model, &call(), &MlmcConfig::adaptive(0.01, 0.75, 1)).unwrap();
        assert!(res
            .levels
            .iter()
            .all(|l| l.n_samples == 100 && l.variance == 0.0));
    }

    #[test]
    fn huge_epsilon_still_reaches_level_two() {
        let model = volterra_ou(1.0, 1.0, -0.5, 0.2, 0.75).unwrap();
        let res = mlmc_adaptive(&model, &call(), &MlmcConfig::adaptive(10.0, 0.75, 3)).unwrap();
        assert_eq!(res.max_level(), 2);
    }

    #[test]
    fn level_cap_reports_partial_result() {
        let mut cfg = MlmcConfig::adaptive(1e-9, 0.75, 3);
        cfg.max_level = 2;
        cfg.n_initial = 10;
        // noiseless model: no samples are added, only the bias test can fail
        let moment = Payoff::Moment {
            order: 1,
            component: 0,
        };
        let det = volterra_ou(1.0, 1.0, -0.5, 0.0, 0.75).unwrap();
        match mlmc_adaptive(&det, &moment, &cfg) {
            Err(Error::NoConvergence { max_level, partial }) => {
                assert_eq!(max_level, 2);
                assert_eq!(partial.max_level(), 2);
            }
            other => panic!("expected no-convergence, got {other:?}"),
        }
    }

    #[test]
    fn fixed_budget_level_zero_is_monte_carlo() {
        let model = volterra_ou(1.0, 1.0, -0.5, 0.2, 0.75).unwrap();
        let res = mlmc_fixed_budget(&model, &call(), &MlmcConfig::fixed_budget(0, 700, 2)).unwrap();
        let mc = mc_estimate(
            &model,
            Scheme::Euler,
            &TimeGrid::uniform(1.0, 1).unwrap(),
            &call(),
            700,
            2,
        )
        .unwrap();
        assert_eq!(res.levels[0].n_samples, 700);
        assert_eq!(res.estimate, mc.mean);
    }

    #[test]
    fn fixed_budget_spends_exactly_the_budget() {
        let model = volterra_ou(1.0, 1.0, -0.5, 0.2, 0.25).unwrap();
        let res =
            mlmc_fixed_budget(&model, &call(), &MlmcConfig::fixed_budget(3, 5000, 2)).unwrap();
        assert_eq!(res.levels.iter().map(|l| l.n_samples).sum::<u64>(), 5000);
        assert!(res.levels.iter().all(|l| l.n_samples >= 2));
        let est: f64 = res.levels.iter().map(|l| l.mean).sum();
        assert_eq!(est, res.estimate);
        assert!(mlmc_fixed_budget(&model, &call(), &MlmcConfig::fixed_budget(3, 399, 2)).is_err());
    }

    #[test]
    fn coarse_path_uses_summed_increments() {
        // driftless, constant σ, constant kernels: both terminal values are
        // X0 + σ·ΣΔW, so every level difference vanishes up to rounding
        let model = volterra_ou(1.0, 0.0, 0.0, 0.3, 0.5).unwrap();
        let m = Payoff::Moment {
            order: 1,
            component: 0,
        };
        let (_, _, samples) = level_pair_estimate(&model, &m, 2, 3, 64, 1).unwrap();
        assert!(samples.iter().all(|d| d.abs() < 1e-15));
    }

    #[test]
    fn equal_variances_give_equal_shares() {
        assert_eq!(
            allocate_budget(&[1.0, 1.0, 1.0], 300, 2),
            vec![100, 100, 100]
        );
        assert_eq!(
            allocate_budget(&[1.0, 1.0, 1.0], 301, 2)
                .iter()
                .sum::<u64>(),
            301
        );
        assert_eq!(allocate_budget(&[0.0, 0.0], 10, 2), vec![5, 5]);
        assert_eq!(allocate_budget(&[1.0, 1e-9], 100, 2), vec![98, 2]);
    }

    #[test]
    fn allocation_beats_exhaustive_search() {
        let v = [0.04, 0.006, 0.0015];
        let h = [1.0, 0.25, 0.0625];
        let eps = 0.05;
        let ours = optimal_allocation(&v, &h, eps);
        let cost = |n: &[u64]| {
            n.iter()
                .zip(&h)
                .map(|(&n, h)| n as f64 / (h * h))
                .sum::<f64>()
        };
        let feasible = |n: &[u64]| {
            n.iter().zip(&v).map(|(&n, v)| v / n as f64).sum::<f64>() <= eps * eps / 2.0
        };
        assert!(feasible(&ours));
        let mut best = f64::INFINITY;
        for a in 1..=200u64 {
            for b in 1..=200u64 {
                for c in 1..=200u64 {
                    let n = [a, b, c];
                    if feasible(&n) {
                        best = best.min(cost(&n));
                    }
                }
            }
        }
        let slack: f64 = h.iter().map(|h| 1.0 / (h * h)).sum();
        assert!(cost(&ours) >= best - 1e-9);
        assert!(cost(&ours) <= best + slack, "{} vs {best}", cost(&ours));
    }

    proptest! {
        #[test]
        fn budget_shares_sum_and_floor(ws in prop::collection::vec(0.0f64..5.0, 1..7), extra in 0u64..10_000) {
            let total = 2 * ws.len() as u64 + extra;
            let shares = allocate_budget(&ws, total, 2);
            prop_assert_eq!(shares.iter().sum::<u64>(), total);
            prop_assert!(shares.iter().all(|&s| s >= 2));
        }
    }
}
