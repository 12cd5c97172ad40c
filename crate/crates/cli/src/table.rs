//! Presets for the numerical tables. Output is long format, one row per
//! method, parameter and payoff.

use std::fmt::Write as _;
use std::time::Instant;

use sve_core::estimators::{mc_estimate_payoffs, Payoff, Scheme};
use sve_core::mlmc::{
    mlmc_adaptive, mlmc_fixed_budget, resolve_alpha_circ, MlmcConfig, MlmcResult,
};
use sve_core::reference::{heston_call_fourier, ou_call_price, RiccatiDrift};
use sve_core::{SveModel, TimeGrid};

use crate::config::{ModelKind, RunConfig};
use crate::error::{CliError, CliResult};
use crate::Output;

struct Row {
    method: &'static str,
    param: String,
    payoff: String,
    mean: f64,
    stat_error: f64,
    wall_time: f64,
    cost_units: u64,
}

struct Table {
    rows: Vec<Row>,
    diverged: u64,
}

impl Table {
    fn new() -> Self {
        Table {
            rows: Vec::new(),
            diverged: 0,
        }
    }

    fn reference(&mut self, payoff: &str, f: impl FnOnce() -> CliResult<f64>) -> CliResult<()> {
        let start = Instant::now();
        let mean = f()?;
        self.rows.push(Row {
            method: "reference",
            param: String::new(),
            payoff: payoff.into(),
            mean,
            stat_error: 0.0,
            wall_time: start.elapsed().as_secs_f64(),
            cost_units: 0,
        });
        Ok(())
    }

    fn single_level(
        &mut self,
        model: &SveModel,
        scheme: Scheme,
        grid: &TimeGrid,
        payoffs: &[(String, Payoff)],
        paths: u64,
        seed: u64,
    ) -> CliResult<()> {
        let list: Vec<Payoff> = payoffs.iter().map(|p| p.1).collect();
        let est = mc_estimate_payoffs(model, scheme, grid, &list, paths, &model.noise(seed, 0))?;
        let method = match scheme {
            Scheme::Euler => "euler",
            Scheme::MilsteinAuto => "milstein",
        };
        for ((name, _), e) in payoffs.iter().zip(est) {
            self.diverged = self.diverged.max(e.diverged_count);
            self.rows.push(Row {
                method,
                param: format!("n={}", grid.cells()),
                payoff: name.clone(),
                mean: e.mean,
                stat_error: e.stat_error,
                wall_time: e.wall_time,
                cost_units: e.cost_units,
            });
        }
        Ok(())
    }

    fn mlmc(&mut self, param: String, payoff: &str, r: MlmcResult) {
        self.diverged += r.diverged_count;
        self.rows.push(Row {
            method: "mlmc",
            param,
            payoff: payoff.into(),
            mean: r.estimate,
            stat_error: r.stat_error,
            wall_time: r.wall_time,
            cost_units: r.cost_units,
        });
    }

    fn into_output(self) -> Output {
        let mut csv = String::from("method,param,payoff,mean,stat_error,wall_time,cost_units\n");
        for r in &self.rows {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{}",
                r.method, r.param, r.payoff, r.mean, r.stat_error, r.wall_time, r.cost_units
            );
        }
        let failure = (self.diverged > 0)
            .then(|| CliError::Divergence(format!("{} samples diverged", self.diverged)));
        Output { csv, failure }
    }
}

pub const TABLES: [&str; 6] = [
    "ou_h010", "ou_h025", "ou_h075", "mech_h03", "mech_h07", "heston",
];

fn clear_model(cfg: &mut RunConfig, kind: ModelKind, hurst: f64) -> CliResult<()> {
    if cfg.model.is_some_and(|m| m != kind) || cfg.hurst.is_some_and(|h| h != hurst) {
        return Err(CliError::Validation("a table fixes the model and H".into()));
    }
    cfg.model = Some(kind);
    cfg.hurst = Some(hurst);
    Ok(())
}

/// The preset tolerances, or the single `--eps` when given.
fn eps_list(cfg: &RunConfig, preset: &[f64]) -> Vec<f64> {
    match cfg.eps {
        Some(e) => vec![e],
        None => preset.to_vec(),
    }
}

fn ou_table(cfg: &mut RunConfig, hurst: f64) -> CliResult<Output> {
    clear_model(cfg, ModelKind::Ou, hurst)?;
    let model = cfg.build_model()?;
    let horizon = cfg.horizon()?;
    let seed = cfg.seed();
    let paths = cfg.paths(10_000)?;
    let strike = *cfg.strike.get_or_insert(1.0);
    let call = vec![(
        "call".to_string(),
        Payoff::TerminalCall {
            strike,
            component: 0,
        },
    )];
    let mut t = Table::new();
    let (x0, b0, b1, s0) = (
        cfg.x0.unwrap(),
        cfg.b0.unwrap(),
        cfg.b1.unwrap(),
        cfg.sigma0.unwrap(),
    );
    t.reference("call", || {
        Ok(ou_call_price(x0, b0, b1, s0, hurst, horizon, strike)?)
    })?;
    for n in [8, 20, 40, 80] {
        t.single_level(
            &model,
            Scheme::Euler,
            &TimeGrid::uniform(horizon, n)?,
            &call,
            paths,
            seed,
        )?;
    }
    for n in [8, 20, 40] {
        t.single_level(
            &model,
            Scheme::MilsteinAuto,
            &TimeGrid::uniform(horizon, n)?,
            &call,
            paths,
            seed,
        )?;
    }
    let preset: &[f64] = if hurst < 0.25 {
        &[0.08, 0.05, 0.03]
    } else {
        &[0.01, 0.007, 0.005]
    };
    let alpha = resolve_alpha_circ(&model, &call[0].1, cfg.alpha_circ)?;
    cfg.alpha_circ = Some(alpha);
    for eps in eps_list(cfg, preset) {
        let mut c = MlmcConfig::adaptive(eps, alpha, seed);
        c.horizon = horizon;
        t.mlmc(
            format!("eps={eps}"),
            "call",
            mlmc_adaptive(&model, &call[0].1, &c)?,
        );
    }
    Ok(t.into_output())
}

fn mech_table(cfg: &mut RunConfig, hurst: f64) -> CliResult<Output> {
    clear_model(cfg, ModelKind::Mech, hurst)?;
    let model = cfg.build_model()?;
    let horizon = cfg.horizon()?;
    let seed = cfg.seed();
    let paths = cfg.paths(10_000)?;
    let moments: Vec<(String, Payoff)> = (1..=3)
        .map(|k| {
            (
                format!("q^{k}"),
                Payoff::Moment {
                    order: k,
                    component: 0,
                },
            )
        })
        .collect();
    let mut t = Table::new();
    for n in [100, 500, 1000] {
        t.single_level(
            &model,
            Scheme::Euler,
            &TimeGrid::uniform(horizon, n)?,
            &moments,
            paths,
            seed,
        )?;
    }
    let alpha = resolve_alpha_circ(&model, &moments[0].1, cfg.alpha_circ)?;
    cfg.alpha_circ = Some(alpha);
    for eps in eps_list(cfg, &[0.1, 0.07, 0.05]) {
        for (name, payoff) in &moments {
            let mut c = MlmcConfig::adaptive(eps, alpha, seed);
            c.horizon = horizon;
            t.mlmc(
                format!("eps={eps}"),
                name,
                mlmc_adaptive(&model, payoff, &c)?,
            );
        }
    }
    Ok(t.into_output())
}

fn heston_table(cfg: &mut RunConfig) -> CliResult<Output> {
    clear_model(cfg, ModelKind::Heston, 0.1)?;
    let model = cfg.build_model()?;
    let horizon = cfg.horizon()?;
    let seed = cfg.seed();
    let paths = cfg.paths(100_000)?;
    let budget = *cfg.budget.get_or_insert(100_000);
    let strike = *cfg.strike.get_or_insert(1.0);
    let steps = *cfg.adams_steps.get_or_insert(2000);
    let drift = *cfg.riccati_drift.get_or_insert(RiccatiDrift::MeanReversion);
    let params = cfg.heston_params();
    let payoffs = vec![
        (
            "call".to_string(),
            Payoff::TerminalCall {
                strike,
                component: 0,
            },
        ),
        (
            "asian".to_string(),
            Payoff::AsianCall {
                strike,
                component: 0,
            },
        ),
    ];
    let mut t = Table::new();
    t.reference("call", || {
        Ok(heston_call_fourier(&params, strike, horizon, steps, drift)?)
    })?;
    for n in [4, 10, 20, 40, 80, 160] {
        t.single_level(
            &model,
            Scheme::Euler,
            &TimeGrid::uniform(horizon, n)?,
            &payoffs,
            paths,
            seed,
        )?;
    }
    let max_level = *cfg.levels.get_or_insert(4);
    for levels in 1..=max_level {
        for (name, payoff) in &payoffs {
            let mut c = MlmcConfig::fixed_budget(levels, budget, seed);
            c.horizon = horizon;
            t.mlmc(
                format!("L={levels}"),
                name,
                mlmc_fixed_budget(&model, payoff, &c)?,
            );
        }
    }
    Ok(t.into_output())
}

pub fn run(id: &str, cfg: &mut RunConfig) -> CliResult<Output> {
    if cfg.scheme.is_some() || cfg.n.is_some() {
        return Err(CliError::Validation(
            "a table fixes its schemes and grids".into(),
        ));
    }
    match id {
        "ou_h010" => ou_table(cfg, 0.1),
        "ou_h025" => ou_table(cfg, 0.25),
        "ou_h075" => ou_table(cfg, 0.75),
        "mech_h03" => mech_table(cfg, 0.3),
        "mech_h07" => mech_table(cfg, 0.7),
        "heston" => heston_table(cfg),
        other => Err(CliError::Validation(format!(
            "unknown table {other:?}; expected one of {}",
            TABLES.join(", ")
        ))),
    }
}
