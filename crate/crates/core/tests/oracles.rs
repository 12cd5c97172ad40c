//! Scheme output against independent closed forms.

use statrs::function::gamma::gamma;
use sve_core::estimators::{mc_estimate, Payoff, Scheme};
use sve_core::grid::TimeGrid;
use sve_core::kernels::PowerKernel;
use sve_core::mlmc::{mlmc_fixed_budget, MlmcConfig};
use sve_core::models::{geometric_brownian, volterra_ou, ScalarCoefficients};
use sve_core::reference::{
    gaussian_call, heston_call_fourier, ou_call_price, HestonParams, RiccatiDrift,
};

fn first_moment() -> Payoff {
    Payoff::Moment {
        order: 1,
        component: 0,
    }
}

#[test]
fn table_reference_values() {
    // reference rows of the three OU tables, quoted to six decimals
    for (h, want) in [(0.1, 0.397800), (0.25, 0.397202), (0.75, 0.373444)] {
        let got = ou_call_price(1.0, 1.0, -0.5, 0.2, h, 1.0, 1.0).unwrap();
        assert!((got - want).abs() < 1e-6, "H={h}: {got}");
    }
}

#[test]
fn heston_riccati_drift_reading() {
    let p = HestonParams {
        s0: 1.0,
        v0: 0.02,
        theta: 0.02,
        lambda: 0.3,
        nu: 0.3,
        rho: -0.7,
        hurst: 0.1,
    };
    let mean_reversion =
        heston_call_fourier(&p, 1.0, 1.0, 500, RiccatiDrift::MeanReversion).unwrap();
    let literal = heston_call_fourier(&p, 1.0, 1.0, 500, RiccatiDrift::LiteralMinusOne).unwrap();
    assert!((mean_reversion - 0.056832).abs() < 5e-4, "{mean_reversion}");
    // the literal coefficient corresponds to λ = 1 and misses the table
    assert!((literal - 0.056832).abs() > 5e-3, "{literal}");
}

#[test]
fn euler_variance_of_pure_noise() {
    // b ≡ 0, σ ≡ σ₀: X^n_T is Gaussian with variance σ₀² Σ K(T − t_i)² h
    let (h, sigma0, n) = (0.3, 0.5, 16);
    let model = volterra_ou(0.0, 0.0, 0.0, sigma0, h).unwrap();
    let grid = TimeGrid::uniform(1.0, n).unwrap();
    let step = 1.0 / n as f64;
    let c = 1.0 / gamma(h + 0.5);
    let var: f64 = (0..n)
        .map(|i| {
            let lag = 1.0 - i as f64 * step;
            sigma0 * sigma0 * (c * lag.powf(h - 0.5)).powi(2) * step
        })
        .sum();
    let est = mc_estimate(
        &model,
        Scheme::Euler,
        &grid,
        &Payoff::Moment {
            order: 2,
            component: 0,
        },
        40_000,
        3,
    )
    .unwrap();
    // E[X²] = var, and Var[X²] = 2 var²
    let se = (2.0 * var * var / 40_000.0).sqrt();
    assert!((est.mean - var).abs() < 4.0 * se, "{} vs {var}", est.mean);
}

#[test]
fn brownian_call_stays_within_chebyshev_bound() {
    // Euler is exact in law for X = x₀ + σW, so |mean − price| > 3 SE can
    // happen for at most a ninth of the seeds
    let model = ScalarCoefficients::new(|_, _| 0.0, |_, _| 0.3)
        .into_model(
            "bm",
            1.0,
            PowerKernel::constant(1.0),
            PowerKernel::constant(1.0),
        )
        .unwrap();
    let price = gaussian_call(1.0, 0.09, 1.0).unwrap();
    let grid = TimeGrid::uniform(1.0, 4).unwrap();
    let call = Payoff::TerminalCall {
        strike: 1.0,
        component: 0,
    };
    let misses = (0..50)
        .filter(|&seed| {
            let e = mc_estimate(&model, Scheme::Euler, &grid, &call, 500, seed).unwrap();
            (e.mean - price).abs() > 3.0 * e.stat_error
        })
        .count();
    assert!(misses <= 5, "{misses} of 50 seeds outside 3 SE");
}

#[test]
fn mlmc_telescopes_to_finest_euler_mean() {
    // for GBM the Euler mean on n cells is x₀(1 + μ/n)ⁿ, so the telescoping
    // sum must be unbiased for the finest level
    let (mu, levels) = (0.3, 3);
    let model = geometric_brownian(1.0, mu, 0.25).unwrap();
    let n_fine = 4usize.pow(levels as u32) as i32;
    let want = (1.0 + mu / n_fine as f64).powi(n_fine);
    let mut misses = 0;
    for seed in 0..30 {
        let r = mlmc_fixed_budget(
            &model,
            &first_moment(),
            &MlmcConfig::fixed_budget(levels, 4000, seed),
        )
        .unwrap();
        let sum: f64 = r.levels.iter().map(|l| l.mean).sum();
        assert!((sum - r.estimate).abs() < 1e-14);
        if (r.estimate - want).abs() > 3.0 * r.stat_error {
            misses += 1;
        }
    }
    assert!(misses <= 3, "{misses} of 30 seeds outside 3 SE");
}

#[test]
fn classical_ou_limit_has_textbook_moments() {
    // H = 1/2 is the Markov OU: mean 2 − e^{−1/2}, variance σ²(1 − e^{−1})
    let model = volterra_ou(1.0, 1.0, -0.5, 0.2, 0.5).unwrap();
    let grid = TimeGrid::uniform(1.0, 200).unwrap();
    let est = mc_estimate(&model, Scheme::Euler, &grid, &first_moment(), 20_000, 8).unwrap();
    let mean = 2.0 - (-0.5f64).exp();
    // Euler bias for the mean is O(h) ≈ 1e-3
    assert!(
        (est.mean - mean).abs() < 4.0 * est.stat_error + 2e-3,
        "{}",
        est.mean
    );
}
