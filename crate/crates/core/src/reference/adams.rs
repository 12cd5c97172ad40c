//! Fractional Adams predictor–corrector for `D^a h = F(t, h)`, `h(0) = h₀`,
//! on a uniform grid, one corrector sweep per step.

use num_complex::Complex64;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// Quadrature weights for a fixed order, step count and step size.
#[derive(Debug, Clone)]
pub struct FractionalAdams {
    order: f64,
    steps: usize,
    dt: f64,
    /// `b_l = (dt^a/Γ(a+1))((l+1)^a − l^a)`, `l = k − j`
    predictor: Vec<f64>,
    /// `(l+2)^{a+1} + l^{a+1} − 2(l+1)^{a+1}`, `l = k − j`, `j ≥ 1`
    corrector: Vec<f64>,
    /// `k^{a+1} − (k−a)(k+1)^a`
    corrector_first: Vec<f64>,
    corrector_scale: f64,
    /// Product-trapezoid weights of `I^{1−a}` at the final time.
    complement: Vec<f64>,
}

/// Solution on the grid and its integrals at the final time.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub times: Vec<f64>,
    pub values: Vec<Complex64>,
    /// `∫₀ᵀ h`
    pub integral: Complex64,
    /// `I^{1−a} h (T)`
    pub complement_integral: Complex64,
}

/// Weights of `I^β f(t_N) ≈ Σ_j w_j f(t_j)` for piecewise-linear `f`.
fn product_trapezoid(beta: f64, steps: usize, dt: f64) -> Vec<f64> {
    let n = steps as f64;
    let scale = dt.powf(beta) / gamma(beta + 2.0);
    let p = |x: f64| x.powf(beta + 1.0);
    let mut w = vec![0.0; steps + 1];
    w[0] = scale * (p(n - 1.0) - (n - 1.0 - beta) * n.powf(beta));
    for (j, wj) in w.iter_mut().enumerate().take(steps).skip(1) {
        let m = (steps - j) as f64;
        *wj = scale * (p(m + 1.0) + p(m - 1.0) - 2.0 * p(m));
    }
    w[steps] = scale;
    w
}

impl FractionalAdams {
    pub fn new(order: f64, horizon: f64, steps: usize) -> Result<Self> {
        if !(order > 0.0 && order < 1.0) {
            return Err(Error::OutOfRange {
                value: order,
                lo: 0.0,
                hi: 1.0,
            });
        }
        if steps == 0 || !(horizon > 0.0) {
            return Err(Error::invalid(
                "need a positive horizon and at least one step",
            ));
        }
        let a = order;
        let dt = horizon / steps as f64;
        let pre_scale = dt.powf(a) / gamma(a + 1.0);
        let predictor = (0..steps)
            .map(|l| {
                let l = l as f64;
                pre_scale * ((l + 1.0).powf(a) - l.powf(a))
            })
            .collect();
        let p = |x: f64| x.powf(a + 1.0);
        let corrector = (0..steps)
            .map(|l| {
                let l = l as f64;
                p(l + 2.0) + p(l) - 2.0 * p(l + 1.0)
            })
            .collect();
        let corrector_first = (0..steps)
            .map(|k| {
                let k = k as f64;
                p(k) - (k - a) * (k + 1.0).powf(a)
            })
            .collect();
        Ok(FractionalAdams {
            order,
            steps,
            dt,
            predictor,
            corrector,
            corrector_first,
            corrector_scale: dt.powf(a) / gamma(a + 2.0),
            complement: product_trapezoid(1.0 - a, steps, horizon / steps as f64),
        })
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn solve<F>(&self, h0: Complex64, rhs: F) -> Result<RiccatiSolution>
    where
        F: Fn(f64, Complex64) -> Complex64,
    {
        let n = self.steps;
        let mut h = Vec::with_capacity(n + 1);
        let mut f = Vec::with_capacity(n + 1);
        h.push(h0);
        f.push(rhs(0.0, h0));
        for k in 0..n {
            let t_next = (k + 1) as f64 * self.dt;
            // both sums run over j = 0..=k with lag l = k − j
            let mut pred = Complex64::new(0.0, 0.0);
            let mut corr = self.corrector_first[k] * f[0];
            for j in 0..=k {
                pred += self.predictor[k - j] * f[j];
            }
            for j in 1..=k {
                corr += self.corrector[k - j] * f[j];
            }
            let h_pred = h0 + pred;
            let h_next = h0 + self.corrector_scale * (rhs(t_next, h_pred) + corr);
            if !(h_next.re.is_finite() && h_next.im.is_finite()) {
                return Err(Error::OracleFailure(format!(
                    "Adams solution diverged at t = {t_next}"
                )));
            }
            h.push(h_next);
            f.push(rhs(t_next, h_next));
        }
        let mut integral = 0.5 * (h[0] + h[n]);
        for v in &h[1..n] {
            integral += v;
        }
        integral *= self.dt;
        let complement_integral = self.complement.iter().zip(&h).map(|(w, v)| w * v).sum();
        Ok(RiccatiSolution {
            times: (0..=n).map(|k| k as f64 * self.dt).collect(),
            values: h,
            integral,
            complement_integral,
        })
    }
}
