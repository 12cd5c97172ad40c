use std::fmt::Write as _;

use sve_core::estimators::{mc_estimate, Payoff, Scheme};
use sve_core::euler::EulerScheme;
use sve_core::milstein::{MilsteinScheme, MilsteinVariant};
use sve_core::mlmc::{
    mlmc_adaptive, mlmc_fixed_budget, resolve_alpha_circ, MlmcConfig, MlmcResult,
};
use sve_core::noise::sample_increments;
use sve_core::rates::{complexity_experiment, strong_rate_experiment};
use sve_core::reference::{
    black_scholes_call, heston_call_fourier, ou_call_price, ou_terminal_moments,
};
use sve_core::{Error, SchemePath, SveModel, TimeGrid};

use crate::config::{ModelKind, RunConfig};
use crate::error::{CliError, CliResult};
use crate::Output;

fn divergence(count: u64, total: u64) -> Option<CliError> {
    (count > 0).then(|| CliError::Divergence(format!("{count} of {total} samples diverged")))
}

/// Rejects models and schemes that cannot be paired before any work is done.
pub fn check_scheme(model: &SveModel, scheme: Scheme, grid: &TimeGrid) -> CliResult<()> {
    if scheme == Scheme::MilsteinAuto {
        MilsteinScheme::new(model, grid)?;
    }
    Ok(())
}

pub fn simulate(cfg: &mut RunConfig) -> CliResult<Output> {
    let model = cfg.build_model()?;
    let scheme = cfg.scheme();
    let n = cfg.n(100)?;
    let horizon = cfg.horizon()?;
    let seed = cfg.seed();
    let paths = *cfg.paths.get_or_insert(1);
    if paths == 0 {
        return Err(CliError::Validation("paths must be at least 1".into()));
    }
    let grid = TimeGrid::uniform(horizon, n)?;
    let noise = model.noise(seed, 0);
    let milstein = match scheme {
        Scheme::Euler => None,
        Scheme::MilsteinAuto => Some(MilsteinScheme::new(&model, &grid)?),
    };
    // the state-free Milstein variant is driven by kernel-weighted Gaussians,
    // not by W itself, so there is no Brownian column to report
    let with_w = milstein
        .as_ref()
        .is_none_or(|m| m.variant() == MilsteinVariant::ConstantK2);
    let euler = EulerScheme::new(&model, &grid);

    let mut csv = String::new();
    let mut header: Vec<String> = Vec::new();
    if paths > 1 {
        header.push("path".into());
    }
    header.push("t".into());
    header.extend((1..=model.dim()).map(|i| format!("x{i}")));
    if with_w {
        match model.drivers() {
            1 => header.push("W".into()),
            m => header.extend((1..=m).map(|j| format!("W{j}"))),
        }
    }
    let _ = writeln!(csv, "{}", header.join(","));

    let mut diverged = 0;
    for p in 0..paths {
        let (path, w): (SchemePath, Vec<Vec<f64>>) = match &milstein {
            None => {
                let inc = sample_increments(&grid, &noise, p);
                let w = (0..model.drivers()).map(|j| inc.brownian_path(j)).collect();
                (euler.run(&inc)?, w)
            }
            Some(m) if m.variant() == MilsteinVariant::ConstantK2 => {
                let inc = sample_increments(&grid, &noise, p);
                (m.run_constant_k2(&inc)?.0, vec![inc.brownian_path(0)])
            }
            Some(m) => (m.sample_path(&noise, p)?, Vec::new()),
        };
        if path.diverged() {
            diverged += 1;
        }
        for k in 0..=n {
            let mut fields: Vec<String> = Vec::new();
            if paths > 1 {
                fields.push(p.to_string());
            }
            fields.push(grid.t(k).to_string());
            fields.extend(path.at(k).iter().map(f64::to_string));
            fields.extend(w.iter().map(|wj| wj[k].to_string()));
            let _ = writeln!(csv, "{}", fields.join(","));
        }
    }
    Ok(Output {
        csv,
        failure: divergence(diverged, paths),
    })
}

fn scheme_name(s: Scheme) -> &'static str {
    match s {
        Scheme::Euler => "euler",
        Scheme::MilsteinAuto => "milstein",
    }
}

pub fn mc(cfg: &mut RunConfig) -> CliResult<Output> {
    let model = cfg.build_model()?;
    let scheme = cfg.scheme();
    let n = cfg.n(64)?;
    let paths = cfg.paths(10_000)?;
    let horizon = cfg.horizon()?;
    let seed = cfg.seed();
    let payoff = cfg.payoff()?;
    let grid = TimeGrid::uniform(horizon, n)?;
    check_scheme(&model, scheme, &grid)?;
    let est = mc_estimate(&model, scheme, &grid, &payoff, paths, seed)?;
    let mut csv =
        String::from("model,scheme,n,paths,mean,stat_error,diverged,wall_time,cost_units\n");
    let _ = writeln!(
        csv,
        "{},{},{},{},{},{},{},{},{}",
        model.name(),
        scheme_name(scheme),
        n,
        paths,
        est.mean,
        est.stat_error,
        est.diverged_count,
        est.wall_time,
        est.cost_units
    );
    Ok(Output {
        csv,
        failure: divergence(est.diverged_count, paths),
    })
}

/// MLMC configuration from the run configuration: adaptive when `eps` is
/// set, fixed budget otherwise.
pub fn mlmc_config(
    cfg: &mut RunConfig,
    model: &SveModel,
    payoff: &Payoff,
) -> CliResult<MlmcConfig> {
    let seed = cfg.seed();
    let horizon = cfg.horizon()?;
    let mut c = match cfg.eps {
        Some(eps) => {
            if cfg.levels.is_some() || cfg.budget.is_some() {
                return Err(CliError::Validation(
                    "eps selects adaptive MLMC; levels and budget belong to the fixed-budget mode"
                        .into(),
                ));
            }
            let alpha = resolve_alpha_circ(model, payoff, cfg.alpha_circ)?;
            cfg.alpha_circ = Some(alpha);
            MlmcConfig::adaptive(eps, alpha, seed)
        }
        None => MlmcConfig::fixed_budget(
            *cfg.levels.get_or_insert(4),
            *cfg.budget.get_or_insert(100_000),
            seed,
        ),
    };
    c.horizon = horizon;
    c.refinement = *cfg.refinement.get_or_insert(c.refinement);
    c.n_initial = *cfg.n_initial.get_or_insert(c.n_initial);
    c.max_level = *cfg.max_level.get_or_insert(c.max_level);
    Ok(c)
}

fn mlmc_csv(r: &MlmcResult) -> String {
    let mut csv = r.trace_csv();
    let _ = writeln!(
        csv,
        "# estimate={},stat_error={},levels={},cost_units={},diverged={},wall_time={}",
        r.estimate,
        r.stat_error,
        r.max_level(),
        r.cost_units,
        r.diverged_count,
        r.wall_time
    );
    csv
}

pub fn mlmc(cfg: &mut RunConfig) -> CliResult<Output> {
    let model = cfg.build_model()?;
    let payoff = cfg.payoff()?;
    let config = mlmc_config(cfg, &model, &payoff)?;
    let adaptive = cfg.eps.is_some();
    let result = if adaptive {
        mlmc_adaptive(&model, &payoff, &config)
    } else {
        mlmc_fixed_budget(&model, &payoff, &config)
    };
    match result {
        Ok(r) => {
            let total = r.levels.iter().map(|l| l.n_samples).sum();
            Ok(Output {
                csv: mlmc_csv(&r),
                failure: divergence(r.diverged_count, total),
            })
        }
        Err(Error::NoConvergence { max_level, partial }) => Ok(Output {
            csv: mlmc_csv(&partial),
            failure: Some(CliError::NoConvergence(format!(
                "bias test still failing at level {max_level}"
            ))),
        }),
        Err(e) => Err(e.into()),
    }
}

pub fn rates(cfg: &mut RunConfig) -> CliResult<Output> {
    // both experiments work on [0, 1]
    if cfg.horizon.is_some_and(|t| t != 1.0) {
        return Err(CliError::Validation(
            "rate experiments use the horizon T = 1".into(),
        ));
    }
    cfg.horizon = Some(1.0);
    let model = cfg.build_model()?;
    let seed = cfg.seed();
    if let Some(eps_list) = cfg.eps_list.clone() {
        let payoff = cfg.payoff()?;
        let report = complexity_experiment(&model, &payoff, &eps_list, cfg.alpha_circ, seed)?;
        cfg.alpha_circ = Some(report.alpha_circ);
        return Ok(Output::ok(report.to_csv()));
    }
    let scheme = cfg.scheme();
    let n_list = cfg
        .n_list
        .get_or_insert_with(|| vec![8, 16, 32, 64])
        .clone();
    let ref_factor = *cfg.ref_factor.get_or_insert(8);
    let paths = cfg.paths(2000)?;
    let report = strong_rate_experiment(&model, scheme, &n_list, ref_factor, paths, seed)?;
    Ok(Output {
        csv: report.to_csv(),
        failure: divergence(report.diverged_count, paths),
    })
}

pub fn reference(cfg: &mut RunConfig) -> CliResult<Output> {
    let kind = cfg.model_kind()?;
    let horizon = cfg.horizon()?;
    let mut csv = String::from("quantity,value\n");
    match kind {
        ModelKind::Ou => {
            cfg.build_model()?;
            let strike = *cfg.strike.get_or_insert(1.0);
            let (x0, b0, b1, s0, h) = (
                cfg.x0.unwrap(),
                cfg.b0.unwrap(),
                cfg.b1.unwrap(),
                cfg.sigma0.unwrap(),
                cfg.hurst.unwrap(),
            );
            let (mean, var) = ou_terminal_moments(x0, b0, b1, s0, h, horizon)?;
            let call = ou_call_price(x0, b0, b1, s0, h, horizon, strike)?;
            let _ = writeln!(csv, "mean,{mean}\nvariance,{var}\ncall,{call}");
        }
        ModelKind::Heston => {
            let params = cfg.heston_params();
            let strike = *cfg.strike.get_or_insert(1.0);
            let steps = *cfg.adams_steps.get_or_insert(2000);
            let drift = *cfg.riccati_drift.get_or_insert_with(Default::default);
            let call = heston_call_fourier(&params, strike, horizon, steps, drift)?;
            let _ = writeln!(csv, "call,{call}");
        }
        ModelKind::Gbm => {
            cfg.build_model()?;
            let strike = *cfg.strike.get_or_insert(1.0);
            let (x0, mu, vol) = (cfg.x0.unwrap(), cfg.mu.unwrap(), cfg.vol.unwrap());
            if x0 <= 0.0 || strike <= 0.0 {
                return Err(CliError::Validation(
                    "x0 and strike must be positive".into(),
                ));
            }
            let forward = x0 * (mu * horizon).exp();
            let _ = writeln!(csv, "mean,{forward}");
            let _ = writeln!(
                csv,
                "call,{}",
                black_scholes_call(forward, strike, vol, horizon)
            );
        }
        ModelKind::Mech => {
            return Err(CliError::Validation(
                "no reference value is available for the mechanics model".into(),
            ));
        }
    }
    Ok(Output::ok(csv))
}
