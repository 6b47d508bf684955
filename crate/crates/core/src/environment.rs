//! Model primitives: the surplus interval, the principal's funds and the audit cost.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostKind {
    Linear,
    Power,
}

/// Audit cost `c(a)`: `k * a` or `k * a^p`. Both satisfy `c(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostFn {
    pub kind: CostKind,
    pub k: f64,
    #[serde(default = "default_exponent")]
    pub p: f64,
}

fn default_exponent() -> f64 {
    1.0
}

impl CostFn {
    pub fn linear(k: f64) -> Self {
        Self {
            kind: CostKind::Linear,
            k,
            p: 1.0,
        }
    }

    pub fn power(k: f64, p: f64) -> Self {
        Self {
            kind: CostKind::Power,
            k,
            p,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(Error::Argument(format!(
                "cost scale k must be finite and > 0, got {}",
                self.k
            )));
        }
        if self.kind == CostKind::Power && !(self.p.is_finite() && self.p >= 1.0) {
            return Err(Error::Argument(format!(
                "cost exponent p must be >= 1, got {}",
                self.p
            )));
        }
        Ok(())
    }

    /// Evaluates the cost of auditing with probability `a`.
    pub fn eval(&self, a: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::Domain(format!(
                "audit probability {a} outside [0, 1]"
            )));
        }
        Ok(match self.kind {
            CostKind::Linear => self.k * a,
            CostKind::Power => self.k * a.powf(self.p),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub x_lo: f64,
    pub x_hi: f64,
    pub tau: f64,
    pub cost: CostFn,
}

impl Environment {
    pub fn new(x_lo: f64, x_hi: f64, tau: f64, cost: CostFn) -> Result<Self> {
        let env = Self {
            x_lo,
            x_hi,
            tau,
            cost,
        };
        env.validate()?;
        Ok(env)
    }

    /// Unit interval, no private funds, linear cost `0.1 a`.
    pub fn unit(tau: f64) -> Self {
        Self {
            x_lo: 0.0,
            x_hi: 1.0,
            tau,
            cost: CostFn::linear(0.1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_lo.is_finite() && self.x_hi.is_finite()) {
            return Err(Error::Argument("surplus bounds must be finite".into()));
        }
        if !(0.0 <= self.x_lo && self.x_lo < self.x_hi) {
            return Err(Error::Argument(format!(
                "need 0 <= x_lo < x_hi, got [{}, {}]",
                self.x_lo, self.x_hi
            )));
        }
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return Err(Error::Argument(format!(
                "tau must be >= 0, got {}",
                self.tau
            )));
        }
        self.cost.validate()
    }

    pub fn width(&self) -> f64 {
        self.x_hi - self.x_lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.x_lo <= x && x <= self.x_hi
    }

    pub fn cost_eval(&self, a: f64) -> Result<f64> {
        self.cost.eval(a)
    }

    /// `n` evenly spaced points from `x_lo` to `x_hi`, both endpoints exact.
    pub fn uniform_grid(&self, n: usize) -> Result<Vec<f64>> {
        if n < 2 {
            return Err(Error::Argument(format!("grid needs >= 2 points, got {n}")));
        }
        let last = (n - 1) as f64;
        let mut grid: Vec<f64> = (0..n)
            .map(|i| self.x_lo + self.width() * (i as f64 / last))
            .collect();
        grid[n - 1] = self.x_hi;
        Ok(grid)
    }
}
