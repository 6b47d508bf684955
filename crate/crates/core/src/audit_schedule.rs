//! Minimal audit probabilities for a loss function.
//!
//! For `y < x_hi`:
//!
//! ```text
//! alpha(y) = max{0, sup_{x in (y, x_hi]} (λ(x) - y) / (x - y)}
//! beta(y)  = max{0, sup_{x in [y, x_hi]} (λ(x) - λ(y)) / (x + τ)}
//! ```
//!
//! and both vanish at `y = x_hi`. On each linear piece of `λ` both ratios are
//! monotone in `x`, so the suprema are attained at breakpoints to the right of
//! `y`, except for the open limit `x -> y+` in `alpha` when `λ(y) = y`, where
//! the ratio tends to the right-hand slope of `λ` at `y`.

use serde::{Deserialize, Serialize};

use crate::environment::Environment;
use crate::lambda_space::LossFunction;
use crate::pwl::{PwlFunction, MERGE_TOL};
use crate::{Error, Result};

/// `λ(y)` within this of `y` counts as touching the identity.
const TOUCH_TOL: f64 = 1e-12;
/// Resolution of the crossover bisection.
pub const CROSSOVER_RESOLUTION: f64 = 1e-10;
/// Tolerance of the single-crossing diagnostic.
pub const CROSSING_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct AuditSchedule {
    lam: PwlFunction,
    env: Environment,
}

impl AuditSchedule {
    pub fn new(lam: &LossFunction, env: &Environment) -> Self {
        Self {
            lam: lam.shape().clone(),
            env: *env,
        }
    }

    /// Schedule of a function not (yet) known to be admissible. The suprema are
    /// still computed exactly, but the structural guarantees may fail.
    pub fn from_shape_unchecked(lam: &PwlFunction, env: &Environment) -> Self {
        Self {
            lam: lam.clone(),
            env: *env,
        }
    }

    pub fn shape(&self) -> &PwlFunction {
        &self.lam
    }

    pub fn env(&self) -> &Environment {
        &self.env
    }

    fn check(&self, y: f64) -> Result<()> {
        if self.env.contains(y) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "y = {y} outside [{}, {}]",
                self.env.x_lo, self.env.x_hi
            )))
        }
    }

    /// Breakpoints strictly to the right of `y`.
    fn right_breakpoints(&self, y: f64) -> &[(f64, f64)] {
        let bp = self.lam.breakpoints();
        &bp[bp.partition_point(|p| p.0 <= y)..]
    }

    pub fn alpha(&self, y: f64) -> Result<f64> {
        self.check(y)?;
        Ok(self.alpha_unchecked(y))
    }

    pub fn beta(&self, y: f64) -> Result<f64> {
        self.check(y)?;
        Ok(self.beta_unchecked(y))
    }

    pub fn audit_prob(&self, y: f64) -> Result<f64> {
        self.check(y)?;
        Ok(self.alpha_unchecked(y).max(self.beta_unchecked(y)))
    }

    pub(crate) fn alpha_unchecked(&self, y: f64) -> f64 {
        if y >= self.env.x_hi {
            return 0.0;
        }
        // Breakpoints within MERGE_TOL of y are rounding artifacts (typically a
        // kink of an envelope landing on a grid point); their ratios are noise.
        let bp = self.lam.breakpoints();
        let k = bp.partition_point(|p| p.0 <= y + MERGE_TOL);
        let mut sup = f64::NEG_INFINITY;
        if (self.lam.value(y) - y).abs() <= TOUCH_TOL {
            let (x1, v1) = bp[k.clamp(1, bp.len() - 1) - 1];
            let (x2, v2) = bp[k.clamp(1, bp.len() - 1)];
            sup = (v2 - v1) / (x2 - x1);
        }
        for &(x, v) in &bp[k..] {
            sup = sup.max((v - y) / (x - y));
        }
        sup.clamp(0.0, 1.0)
    }

    pub(crate) fn beta_unchecked(&self, y: f64) -> f64 {
        if y >= self.env.x_hi {
            return 0.0;
        }
        let ly = self.lam.value(y);
        let tau = self.env.tau;
        let sup = self
            .right_breakpoints(y)
            .iter()
            .map(|&(x, v)| (v - ly) / (x + tau))
            .fold(0.0, f64::max);
        sup.min(1.0)
    }

    /// `max{alpha, beta}` sampled on `grid`.
    pub fn audit_table(&self, grid: &[f64]) -> Result<Vec<f64>> {
        grid.iter().map(|&y| self.audit_prob(y)).collect()
    }

    /// The type `y0` at which the binding instrument switches: the supremum of
    /// the initial stretch where `alpha` dominates `beta`, located by
    /// bisection. At `x_lo` a tie counts as dominance;
    /// inside the interval dominance is strict, so a tail on which both
    /// vanish is excluded. Returns `x_lo` when `alpha` does not dominate there.
    pub fn crossover(&self) -> f64 {
        let dominant = |y: f64| self.alpha_unchecked(y) > self.beta_unchecked(y);
        let (a0, b0) = (
            self.alpha_unchecked(self.env.x_lo),
            self.beta_unchecked(self.env.x_lo),
        );
        if a0 <= 0.0 || a0 < b0 - CROSSING_TOL {
            return self.env.x_lo;
        }
        let (mut lo, mut hi) = (self.env.x_lo, self.env.x_hi);
        if dominant(hi) {
            return hi;
        }
        while hi - lo > CROSSOVER_RESOLUTION {
            let mid = 0.5 * (lo + hi);
            if dominant(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if lo == self.env.x_lo {
            lo
        } else {
            0.5 * (lo + hi)
        }
    }

    /// Evaluates `alpha - beta` on a uniform grid and confirms it never goes
    /// from negative back to positive, and that `alpha(x_lo) >= beta(x_lo)`.
    pub fn check_single_crossing(&self, grid_size: usize) -> Result<SingleCrossingReport> {
        let grid = self.env.uniform_grid(grid_size)?;
        let mut report = SingleCrossingReport {
            passed: true,
            at_lower_bound: true,
            first_negative: None,
            positive_after_negative: None,
        };
        let (a0, b0) = (
            self.alpha_unchecked(self.env.x_lo),
            self.beta_unchecked(self.env.x_lo),
        );
        if a0 < b0 - CROSSING_TOL {
            report.passed = false;
            report.at_lower_bound = false;
        }
        for &y in &grid {
            let d = self.alpha_unchecked(y) - self.beta_unchecked(y);
            match report.first_negative {
                None if d < -CROSSING_TOL => report.first_negative = Some(y),
                Some(_) if d > CROSSING_TOL => {
                    report.positive_after_negative = Some(y);
                    report.passed = false;
                    break;
                }
                _ => {}
            }
        }
        Ok(report)
    }
}

/// `max{alpha, beta}` with both suprema restricted to the points of `grid`:
/// the minimal audit probabilities when deviations are only possible to other
/// grid points, as for a finite type set. `lambda` is sampled on `grid`.
pub fn grid_audit_table(grid: &[f64], lambda: &[f64], env: &Environment) -> Result<Vec<f64>> {
    if grid.len() != lambda.len() {
        return Err(Error::Argument(format!(
            "grid has {} points but lambda has {}",
            grid.len(),
            lambda.len()
        )));
    }
    let n = grid.len();
    Ok((0..n)
        .map(|i| {
            let (y, ly) = (grid[i], lambda[i]);
            if y >= env.x_hi {
                return 0.0;
            }
            let mut alpha = 0.0f64;
            let mut beta = 0.0f64;
            for j in i + 1..n {
                alpha = alpha.max((lambda[j] - y) / (grid[j] - y));
                beta = beta.max((lambda[j] - ly) / (grid[j] + env.tau));
            }
            alpha.min(1.0).max(beta.min(1.0))
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleCrossingReport {
    pub passed: bool,
    /// `alpha(x_lo) >= beta(x_lo)` up to tolerance.
    pub at_lower_bound: bool,
    /// First grid point with `alpha < beta`.
    pub first_negative: Option<f64>,
    /// A later grid point with `alpha > beta`, if any: the failure witness.
    pub positive_after_negative: Option<f64>,
}
