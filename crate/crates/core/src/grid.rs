//! Time discretisations `0 = t_0 < t_1 < … < t_n = T`.

use std::sync::Arc;

use crate::error::{Error, Result};

/// An ordered set of grid points covering `[0, T]`.
///
/// Cloning is cheap: the points are shared.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    points: Arc<[f64]>,
    uniform: bool,
}

impl TimeGrid {
    /// Uniform grid with `n` cells of width `T/n`.
    pub fn uniform(horizon: f64, n: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::invalid(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if n == 0 {
            return Err(Error::invalid("grid needs at least one cell"));
        }
        let mut points: Vec<f64> = (0..=n).map(|k| k as f64 * horizon / n as f64).collect();
        points[n] = horizon;
        Ok(TimeGrid {
            points: points.into(),
            uniform: true,
        })
    }

    /// Arbitrary grid from strictly increasing points starting at zero.
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid("grid needs at least two points"));
        }
        if points[0] != 0.0 {
            return Err(Error::invalid("grid must start at 0"));
        }
        if points.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("grid points must be finite"));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("grid points must be strictly increasing"));
        }
        let n = points.len() - 1;
        let h = points[n] / n as f64;
        let uniform = points
            .iter()
            .enumerate()
            .all(|(k, &t)| (t - k as f64 * h).abs() <= 1e-12 * points[n]);
        Ok(TimeGrid {
            points: points.into(),
            uniform,
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Number of cells `n`.
    pub fn cells(&self) -> usize {
        self.points.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    pub fn t(&self, k: usize) -> f64 {
        self.points[k]
    }

    /// Width of cell `k`, i.e. `t_{k+1} − t_k`.
    pub fn dt(&self, k: usize) -> f64 {
        if self.uniform {
            self.step()
        } else {
            self.points[k + 1] - self.points[k]
        }
    }

    fn step(&self) -> f64 {
        self.horizon() / self.cells() as f64
    }

    /// Largest cell width.
    pub fn mesh(&self) -> f64 {
        if self.uniform {
            return self.step();
        }
        self.points
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Left endpoint of the cell containing `s`, with its index.
    ///
    /// `eta(T)` is the terminal point itself (index `n`).
    pub fn eta(&self, s: f64) -> Result<(usize, f64)> {
        let horizon = self.horizon();
        if !(0.0..=horizon).contains(&s) {
            return Err(Error::OutOfRange {
                value: s,
                lo: 0.0,
                hi: horizon,
            });
        }
        // Number of points <= s, minus one.
        let idx = self.points.partition_point(|&t| t <= s) - 1;
        Ok((idx, self.points[idx]))
    }

    /// Every `factor`-th point of a uniform grid.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        let n = self.cells();
        if factor == 0 || !n.is_multiple_of(factor) {
            return Err(Error::invalid(format!(
                "cannot coarsen {n} cells by a factor of {factor}"
            )));
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let points: Vec<f64> = self.points.iter().step_by(factor).copied().collect();
        Ok(TimeGrid {
            points: points.into(),
            uniform: self.uniform,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_points() {
        let g = TimeGrid::uniform(1.0, 2).unwrap();
        assert_eq!(g.points(), &[0.0, 0.5, 1.0]);
        let g = TimeGrid::uniform(2.0, 1).unwrap();
        assert_eq!(g.points(), &[0.0, 2.0]);
        let g = TimeGrid::uniform(1.0, 8).unwrap();
        assert_eq!(g.points().len(), 9);
        assert_eq!(g.mesh(), 0.125);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            TimeGrid::uniform(0.0, 4),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            TimeGrid::uniform(-1.0, 4),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            TimeGrid::uniform(1.0, 0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(TimeGrid::from_points(vec![0.0]).is_err());
        assert!(TimeGrid::from_points(vec![0.1, 1.0]).is_err());
        assert!(TimeGrid::from_points(vec![0.0, 0.5, 0.5, 1.0]).is_err());
    }

    #[test]
    fn eta_examples() {
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        assert_eq!(g.eta(0.3).unwrap(), (1, 0.25));
        assert_eq!(g.eta(0.25).unwrap(), (1, 0.25));
        assert_eq!(g.eta(0.0).unwrap(), (0, 0.0));
        assert_eq!(g.eta(1.0).unwrap(), (4, 1.0));
        assert!(matches!(g.eta(1.5), Err(Error::OutOfRange { .. })));
        assert!(matches!(g.eta(-0.1), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn mesh_examples() {
        assert_eq!(TimeGrid::uniform(1.0, 4).unwrap().mesh(), 0.25);
        assert_eq!(
            TimeGrid::from_points(vec![0.0, 0.1, 1.0]).unwrap().mesh(),
            0.9
        );
        assert_eq!(TimeGrid::uniform(2.0, 8).unwrap().mesh(), 0.25);
    }

    #[test]
    fn uniformity_detection() {
        assert!(TimeGrid::from_points(vec![0.0, 0.5, 1.0])
            .unwrap()
            .is_uniform());
        assert!(!TimeGrid::from_points(vec![0.0, 0.1, 1.0])
            .unwrap()
            .is_uniform());
    }

    #[test]
    fn coarsen_keeps_every_mth_point() {
        let g = TimeGrid::uniform(1.0, 8).unwrap();
        let c = g.coarsen(4).unwrap();
        assert_eq!(c.points(), &[0.0, 0.5, 1.0]);
        assert!(g.coarsen(3).is_err());
    }

    proptest! {
        #[test]
        fn eta_brackets_s(horizon in 0.1f64..10.0, n in 1usize..200, frac in 0.0f64..1.0) {
            let g = TimeGrid::uniform(horizon, n).unwrap();
            let s = frac * horizon;
            let (k, tk) = g.eta(s).unwrap();
            prop_assert!(tk <= s);
            if s < horizon {
                prop_assert!(s < g.t(k + 1));
                prop_assert!(s < tk + g.mesh() * (1.0 + 1e-12));
            }
            // idempotent on grid points
            prop_assert_eq!(g.eta(tk).unwrap(), (k, tk));
        }

        #[test]
        fn uniform_mesh_is_step(horizon in 0.1f64..10.0, n in 1usize..500) {
            let g = TimeGrid::uniform(horizon, n).unwrap();
            prop_assert_eq!(g.mesh(), horizon / n as f64);
        }
    }
}
