//! Flat run configuration shared by every command. Values come from the
//! JSON file first, then from command-line flags; commands fill in their
//! defaults so the configuration echoed into each CSV is the one used.

use std::path::PathBuf;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use sve_core::estimators::{Payoff, Scheme};
use sve_core::models::{geometric_brownian, mech_langevin, rough_heston, volterra_ou, SveModel};
use sve_core::reference::{HestonParams, RiccatiDrift};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Volterra Ornstein–Uhlenbeck
    Ou,
    /// Generalised Langevin particle
    Mech,
    /// Rough Heston
    Heston,
    /// Geometric Brownian motion
    Gbm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Euler,
    Milstein,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Euler => Scheme::Euler,
            SchemeArg::Milstein => Scheme::MilsteinAuto,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hurst: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,

    // Volterra OU
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma0: Option<f64>,

    // mechanics
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_pot: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p0: Option<f64>,

    // rough Heston; `lambda` is shared
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,

    // geometric Brownian motion; `x0` is shared
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vol: Option<f64>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub payoff: Option<Payoff>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strike: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paths: Option<u64>,

    // MLMC
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_circ: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refinement: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_initial: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_level: Option<usize>,

    // rate experiments
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ref_factor: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_list: Option<Vec<f64>>,

    // reference
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adams_steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub riccati_drift: Option<RiccatiDrift>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn positive(name: &str, v: f64) -> CliResult<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Validation(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config file: {e}")))
    }

    /// `other`'s set fields take precedence.
    pub fn overlay(mut self, other: RunConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            command,
            table,
            model,
            hurst,
            horizon,
            x0,
            b0,
            b1,
            sigma0,
            lambda,
            alpha_pot,
            q0,
            p0,
            s0,
            v0,
            theta,
            nu,
            rho,
            mu,
            vol,
            scheme,
            payoff,
            strike,
            n,
            paths,
            eps,
            alpha_circ,
            levels,
            budget,
            refinement,
            n_initial,
            max_level,
            n_list,
            ref_factor,
            eps_list,
            adams_steps,
            riccati_drift,
            seed,
            workers,
            out
        );
        self
    }

    pub fn model_kind(&mut self) -> CliResult<ModelKind> {
        self.model.ok_or_else(|| {
            CliError::Validation("no model given (use --model or the config file)".into())
        })
    }

    pub fn seed(&mut self) -> u64 {
        *self.seed.get_or_insert(0)
    }

    pub fn scheme(&mut self) -> Scheme {
        *self.scheme.get_or_insert(Scheme::Euler)
    }

    pub fn horizon(&mut self) -> CliResult<f64> {
        let default = match self.model {
            Some(ModelKind::Mech) => 2.0,
            _ => 1.0,
        };
        positive("horizon", *self.horizon.get_or_insert(default))
    }

    pub fn n(&mut self, default: usize) -> CliResult<usize> {
        match *self.n.get_or_insert(default) {
            0 => Err(CliError::Validation("n must be at least 1".into())),
            n => Ok(n),
        }
    }

    pub fn paths(&mut self, default: u64) -> CliResult<u64> {
        match *self.paths.get_or_insert(default) {
            p if p < 2 => Err(CliError::Validation(format!(
                "need at least two paths, got {p}"
            ))),
            p => Ok(p),
        }
    }

    /// Builds the model, filling every unset parameter with the value used
    /// in the numerical examples.
    pub fn build_model(&mut self) -> CliResult<SveModel> {
        let model = match self.model_kind()? {
            ModelKind::Ou => volterra_ou(
                *self.x0.get_or_insert(1.0),
                *self.b0.get_or_insert(1.0),
                *self.b1.get_or_insert(-0.5),
                *self.sigma0.get_or_insert(0.2),
                *self.hurst.get_or_insert(0.1),
            )?,
            ModelKind::Mech => {
                let h = *self.hurst.get_or_insert(0.3);
                if h <= 0.25 {
                    eprintln!(
                        "warning: H = {h} <= 1/4 makes the squared drift kernel non square-integrable; \
                         the convergence results do not cover this case"
                    );
                }
                mech_langevin(
                    *self.lambda.get_or_insert(3.0),
                    *self.alpha_pot.get_or_insert(0.1),
                    h,
                    *self.q0.get_or_insert(0.0),
                    *self.p0.get_or_insert(0.0),
                )?
            }
            ModelKind::Heston => {
                let p = self.heston_params();
                rough_heston(p.s0, p.v0, p.theta, p.lambda, p.nu, p.rho, p.hurst)?
            }
            ModelKind::Gbm => geometric_brownian(
                *self.x0.get_or_insert(1.0),
                *self.mu.get_or_insert(0.05),
                *self.vol.get_or_insert(0.2),
            )?,
        };
        self.horizon()?;
        Ok(model)
    }

    pub fn heston_params(&mut self) -> HestonParams {
        HestonParams {
            s0: *self.s0.get_or_insert(1.0),
            v0: *self.v0.get_or_insert(0.02),
            theta: *self.theta.get_or_insert(0.02),
            lambda: *self.lambda.get_or_insert(0.3),
            nu: *self.nu.get_or_insert(0.3),
            rho: *self.rho.get_or_insert(-0.7),
            hurst: *self.hurst.get_or_insert(0.1),
        }
    }

    /// The configured payoff, else a call on the first component (first
    /// moment of the position for the mechanics model).
    pub fn payoff(&mut self) -> CliResult<Payoff> {
        if let Some(p) = self.payoff {
            if self.strike.is_some() {
                return Err(CliError::Validation(
                    "give either payoff or strike, not both".into(),
                ));
            }
            return Ok(p);
        }
        let p = match self.model_kind()? {
            ModelKind::Mech => Payoff::Moment {
                order: 1,
                component: 0,
            },
            _ => Payoff::TerminalCall {
                strike: *self.strike.get_or_insert(1.0),
                component: 0,
            },
        };
        self.payoff = Some(p);
        self.strike = None;
        Ok(p)
    }

    pub fn echo(&self) -> String {
        serde_json::to_string(self).expect("configuration serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file = RunConfig::from_json(r#"{"model": "ou", "n": 40, "seed": 3}"#).unwrap();
        let flags = RunConfig {
            n: Some(80),
            ..RunConfig::default()
        };
        let merged = file.overlay(flags);
        assert_eq!(merged.n, Some(80));
        assert_eq!(merged.seed, Some(3));
        assert_eq!(merged.model, Some(ModelKind::Ou));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_json(r#"{"modle": "ou"}"#).is_err());
    }

    #[test]
    fn echo_round_trips() {
        let mut c =
            RunConfig::from_json(r#"{"model": "heston", "scheme": "euler", "n": 16}"#).unwrap();
        c.build_model().unwrap();
        c.payoff().unwrap();
        let back = RunConfig::from_json(&c.echo()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn defaults_follow_the_examples() {
        let mut c = RunConfig {
            model: Some(ModelKind::Mech),
            ..RunConfig::default()
        };
        let m = c.build_model().unwrap();
        assert_eq!(m.dim(), 3);
        assert_eq!(c.horizon, Some(2.0));
        assert_eq!(c.lambda, Some(3.0));
        assert_eq!(
            c.payoff().unwrap(),
            Payoff::Moment {
                order: 1,
                component: 0
            }
        );
    }

    #[test]
    fn payoff_and_strike_conflict() {
        let mut c = RunConfig::from_json(
            r#"{"model": "ou", "strike": 1.2, "payoff": {"kind": "moment", "order": 2, "component": 0}}"#,
        )
        .unwrap();
        assert!(matches!(c.payoff(), Err(CliError::Validation(_))));
    }
}
