//! Grid-tabulated tax mechanisms `(a, r_p, r_empty)` and the quantities they
//! induce: revenue, utility, profit and the deviation loss `λ_m`.
//!
//! Reports are restricted to grid points, and the grid is also the agent's
//! deviation menu.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::Environment;
use crate::report::{CheckReport, Witness};
use crate::{Error, Result};

/// Absolute tolerance of the incentive-compatibility check.
pub const IC_TOL: f64 = 1e-9;
/// Absolute tolerance of the inequality system check.
pub const SYSTEM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMechanism")]
pub struct Mechanism {
    grid: Vec<f64>,
    a: Vec<f64>,
    r_p: Vec<f64>,
    r_empty: Vec<f64>,
}

#[derive(Deserialize)]
struct RawMechanism {
    grid: Vec<f64>,
    a: Vec<f64>,
    r_p: Vec<f64>,
    r_empty: Vec<f64>,
}

impl TryFrom<RawMechanism> for Mechanism {
    type Error = Error;

    fn try_from(raw: RawMechanism) -> Result<Self> {
        Mechanism::new(raw.grid, raw.a, raw.r_p, raw.r_empty)
    }
}

impl Mechanism {
    /// Checks table shapes only; feasibility is a separate report.
    pub fn new(grid: Vec<f64>, a: Vec<f64>, r_p: Vec<f64>, r_empty: Vec<f64>) -> Result<Self> {
        let n = grid.len();
        if n == 0 {
            return Err(Error::Argument("mechanism grid is empty".into()));
        }
        if a.len() != n || r_p.len() != n || r_empty.len() != n {
            return Err(Error::Argument(format!(
                "table lengths differ: grid {n}, a {}, r_p {}, r_empty {}",
                a.len(),
                r_p.len(),
                r_empty.len()
            )));
        }
        if grid
            .iter()
            .chain(&a)
            .chain(&r_p)
            .chain(&r_empty)
            .any(|v| !v.is_finite())
        {
            return Err(Error::Argument("mechanism tables must be finite".into()));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Argument("grid must be strictly increasing".into()));
        }
        Ok(Self {
            grid,
            a,
            r_p,
            r_empty,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn r_p(&self) -> &[f64] {
        &self.r_p
    }

    pub fn r_empty(&self) -> &[f64] {
        &self.r_empty
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Grid index of `x`; exact match required.
    pub fn index_of(&self, x: f64) -> Result<usize> {
        let i = self.grid.partition_point(|&g| g < x);
        if i < self.grid.len() && self.grid[i] == x {
            Ok(i)
        } else {
            Err(Error::Domain(format!("x = {x} is not a grid point")))
        }
    }

    pub fn revenue_at(&self, i: usize) -> f64 {
        self.grid[i] - (self.a[i] * self.r_p[i] + (1.0 - self.a[i]) * self.r_empty[i])
    }

    pub fn utility_at(&self, i: usize) -> f64 {
        self.grid[i] - self.revenue_at(i)
    }

    pub fn profit_at(&self, i: usize, env: &Environment) -> Result<f64> {
        Ok(self.revenue_at(i) - env.cost_eval(self.a[i])?)
    }

    /// Loss of type `x = grid[i]` from advancing `y = grid[j] <= x`.
    #[inline]
    fn deviation_term(&self, i: usize, j: usize) -> f64 {
        self.a[j] * self.grid[i] + (1.0 - self.a[j]) * (self.grid[j] - self.r_empty[j])
    }

    /// `λ_m(grid[i]) = min_{j <= i} a_j x_i + (1 - a_j)(y_j - r_empty_j)`.
    pub fn deviation_loss_at(&self, i: usize) -> f64 {
        (0..=i)
            .map(|j| self.deviation_term(i, j))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn revenue(&self, x: f64) -> Result<f64> {
        Ok(self.revenue_at(self.index_of(x)?))
    }

    pub fn utility(&self, x: f64) -> Result<f64> {
        Ok(self.utility_at(self.index_of(x)?))
    }

    pub fn profit(&self, env: &Environment, x: f64) -> Result<f64> {
        self.profit_at(self.index_of(x)?, env)
    }

    pub fn deviation_loss(&self, x: f64) -> Result<f64> {
        Ok(self.deviation_loss_at(self.index_of(x)?))
    }

    pub fn revenue_table(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.revenue_at(i)).collect()
    }

    pub fn utility_table(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.utility_at(i)).collect()
    }

    pub fn profit_table(&self, env: &Environment) -> Result<Vec<f64>> {
        (0..self.len()).map(|i| self.profit_at(i, env)).collect()
    }

    pub fn deviation_loss_table(&self) -> Vec<f64> {
        (0..self.len())
            .into_par_iter()
            .map(|i| self.deviation_loss_at(i))
            .collect()
    }

    pub fn report(&self, env: &Environment) -> Result<MechanismReport> {
        let deviation_loss = self.deviation_loss_table();
        let revenue = self.revenue_table();
        let ic = ic_report(self.grid(), &revenue, &deviation_loss, IC_TOL);
        Ok(MechanismReport {
            utility: self.utility_table(),
            profit: self.profit_table(env)?,
            revenue,
            deviation_loss,
            ic,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismReport {
    pub revenue: Vec<f64>,
    pub utility: Vec<f64>,
    pub profit: Vec<f64>,
    pub deviation_loss: Vec<f64>,
    pub ic: CheckReport,
}

/// Audit probabilities are probabilities and both refunds lie in `[0, y + τ]`;
/// the grid spans the environment's surplus interval.
pub fn check_feasible(m: &Mechanism, env: &Environment) -> CheckReport {
    let mut report = CheckReport::new("feasible");
    let g = m.grid();
    if g[0] != env.x_lo || g[g.len() - 1] != env.x_hi {
        report.record(Witness::at(
            0,
            g[0],
            format!(
                "grid spans [{}, {}] but the environment is [{}, {}]",
                g[0],
                g[g.len() - 1],
                env.x_lo,
                env.x_hi
            ),
        ));
    }
    for (i, &y) in g.iter().enumerate() {
        let cap = y + env.tau;
        if !(0.0..=1.0).contains(&m.a[i]) {
            report.record(Witness::at(
                i,
                y,
                format!("a = {} not a probability", m.a[i]),
            ));
        }
        if !(0.0..=cap).contains(&m.r_p[i]) {
            report.record(Witness::at(
                i,
                y,
                format!("r_p = {} outside [0, {cap}]", m.r_p[i]),
            ));
        }
        if !(0.0..=cap).contains(&m.r_empty[i]) {
            report.record(Witness::at(
                i,
                y,
                format!("r_empty = {} outside [0, {cap}]", m.r_empty[i]),
            ));
        }
    }
    report
}

fn ic_report(grid: &[f64], revenue: &[f64], loss: &[f64], tol: f64) -> CheckReport {
    let mut report = CheckReport::new("incentive-compatible");
    for (i, ((&x, &r), &l)) in grid.iter().zip(revenue).zip(loss).enumerate() {
        if l < r - tol {
            report.record(Witness::at(
                i,
                x,
                format!("deviation loss {l} below revenue {r}"),
            ));
        }
    }
    report
}

/// `λ_m(x) >= R_m(x) - tol` at every grid point.
pub fn check_ic_with(m: &Mechanism, tol: f64) -> CheckReport {
    ic_report(m.grid(), &m.revenue_table(), &m.deviation_loss_table(), tol)
}

pub fn check_ic(m: &Mechanism, _env: &Environment) -> CheckReport {
    check_ic_with(m, IC_TOL)
}

/// Feasibility followed by incentive compatibility; the common precondition.
pub fn require_mechanism(m: &Mechanism, env: &Environment) -> Result<()> {
    check_feasible(m, env).into_result()?;
    check_ic(m, env).into_result()
}

/// Verifies, for all grid pairs `y <= x`,
/// `λ(x) <= a(y) x + min{(1 - a(y)) y, λ(y) + a(y) τ} + tol`.
pub fn system_holds_with(
    grid: &[f64],
    lambda: &[f64],
    a: &[f64],
    env: &Environment,
    tol: f64,
) -> Result<CheckReport> {
    if grid.len() != lambda.len() || grid.len() != a.len() {
        return Err(Error::Argument(format!(
            "misaligned tables: grid {}, lambda {}, a {}",
            grid.len(),
            lambda.len(),
            a.len()
        )));
    }
    let tau = env.tau;
    let phi: Vec<f64> = (0..grid.len())
        .map(|j| ((1.0 - a[j]) * grid[j]).min(lambda[j] + a[j] * tau))
        .collect();
    let failures: Vec<(usize, usize, f64)> = (0..grid.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let x = grid[i];
            let phi = &phi;
            (0..=i).filter_map(move |j| {
                let rhs = a[j] * x + phi[j];
                (lambda[i] > rhs + tol).then_some((i, j, lambda[i] - rhs))
            })
        })
        .collect();
    let mut report = CheckReport::new("inequality-system");
    for (i, j, gap) in failures {
        report.record(Witness::pair(
            grid[i],
            grid[j],
            format!("lambda(x) exceeds the bound by {gap}"),
        ));
    }
    Ok(report)
}

pub fn system_holds(
    grid: &[f64],
    lambda: &[f64],
    a: &[f64],
    env: &Environment,
) -> Result<CheckReport> {
    system_holds_with(grid, lambda, a, env, SYSTEM_TOL)
}
