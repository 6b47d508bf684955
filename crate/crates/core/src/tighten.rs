//! The improvement operator: from any mechanism `m` to a mechanism `m*` that
//! is both more efficient and tighter.
//!
//! Pipeline: `λ_m` (grid deviation loss) -> `λ*` (virtual loss) ->
//! `a* = max{alpha_λ*, beta_λ*}` -> refunds with revenue `λ*`. The guarantees
//! `a* <= a`, `λ_m <= λ* = R_m* <= λ_m*` and `Π_m <= Π_m*` are re-checked on
//! the grid before returning.

use serde::Serialize;

use crate::audit_schedule::grid_audit_table;
use crate::constructor::{build_on_grid, merge_grid, refunds_from, support_points};
use crate::environment::Environment;
use crate::lambda_space::{virtual_loss, LossFunction};
use crate::mechanism::{require_mechanism, Mechanism};
use crate::{Error, Result};

/// Tolerance of the post-condition checks.
pub const GUARANTEE_TOL: f64 = 1e-9;
/// Sup-norm tolerance of the fixed-point probe.
pub const FIXED_POINT_TOL: f64 = 1e-8;

/// Where agents may deviate to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Menu {
    /// Any advance in the surplus interval. `m*` is tabulated on the input grid
    /// refined by the breakpoints and support points of `λ*`.
    #[default]
    Interval,
    /// Only the input grid points (a finite type set). `m*` lives on the input
    /// grid and its audit suprema range over grid points.
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TightenOptions {
    pub menu: Menu,
}

#[derive(Debug, Clone, Serialize)]
pub struct TightenReport {
    pub grid_in: Vec<f64>,
    pub lambda_m_in: Vec<f64>,
    pub lambda_star: LossFunction,
    pub a_in: Vec<f64>,
    /// Audit probabilities of `m*` on its own grid.
    pub a_out: Vec<f64>,
    pub lambda_m_out: Vec<f64>,
    pub mechanism_out: Mechanism,
    /// Position of each input grid point in the output grid.
    pub input_positions: Vec<usize>,
    pub audit_decreased: bool,
    pub revenue_increased: bool,
}

impl TightenReport {
    /// `a*` restricted to the input grid.
    pub fn a_out_on_input(&self) -> Vec<f64> {
        self.input_positions
            .iter()
            .map(|&k| self.a_out[k])
            .collect()
    }

    pub fn revenue_out_on_input(&self) -> Vec<f64> {
        self.input_positions
            .iter()
            .map(|&k| self.mechanism_out.revenue_at(k))
            .collect()
    }
}

pub fn tighten(m: &Mechanism, env: &Environment) -> Result<TightenReport> {
    tighten_with(m, env, TightenOptions::default())
}

pub fn tighten_with(
    m: &Mechanism,
    env: &Environment,
    opts: TightenOptions,
) -> Result<TightenReport> {
    require_mechanism(m, env)?;
    let grid = m.grid();
    let lambda_m = m.deviation_loss_table();
    let star = virtual_loss(grid, &lambda_m, m.a(), env)?;

    let m_star = match opts.menu {
        Menu::Interval => {
            let with_kinks = merge_grid(grid, star.shape().xs());
            build_on_grid(
                &star,
                env,
                merge_grid(&with_kinks, support_points(&star, env)),
            )?
        }
        Menu::Grid => {
            let values: Vec<f64> = grid.iter().map(|&y| star.value(y)).collect();
            let a = grid_audit_table(grid, &values, env)?;
            let refunds = refunds_from(grid, &values, &a, env)?;
            Mechanism::new(grid.to_vec(), a, refunds.r_p, refunds.r_empty)?
        }
    };
    let positions: Vec<usize> = grid
        .iter()
        .map(|x| m_star.grid().partition_point(|g| g < x))
        .collect();
    let lambda_out = m_star.deviation_loss_table();

    let tol = GUARANTEE_TOL;
    let revenue_in = m.revenue_table();
    let revenue_out = m_star.revenue_table();
    let profit_in = m.profit_table(env)?;
    let profit_out = m_star.profit_table(env)?;
    let mut audit_decreased = false;
    let mut revenue_increased = false;
    for (i, &k) in positions.iter().enumerate() {
        let x = grid[i];
        let (a_in, a_out) = (m.a()[i], m_star.a()[k]);
        if a_out > a_in + tol {
            return Err(violation("a* <= a", x, a_out - a_in));
        }
        if lambda_m[i] > star.value(x) + tol {
            return Err(violation("λ_m <= λ*", x, lambda_m[i] - star.value(x)));
        }
        if profit_in[i] > profit_out[k] + tol {
            return Err(violation("Π_m <= Π_m*", x, profit_in[i] - profit_out[k]));
        }
        audit_decreased |= a_out < a_in - tol;
        revenue_increased |= revenue_out[k] > revenue_in[i] + tol;
    }
    for (k, &x) in m_star.grid().iter().enumerate() {
        let target = star.value(x);
        if (revenue_out[k] - target).abs() > tol {
            return Err(violation("λ* = R_m*", x, (revenue_out[k] - target).abs()));
        }
        if revenue_out[k] > lambda_out[k] + tol {
            return Err(violation("R_m* <= λ_m*", x, revenue_out[k] - lambda_out[k]));
        }
    }

    Ok(TightenReport {
        grid_in: grid.to_vec(),
        lambda_m_in: lambda_m,
        lambda_star: star,
        a_in: m.a().to_vec(),
        a_out: m_star.a().to_vec(),
        lambda_m_out: lambda_out,
        mechanism_out: m_star,
        input_positions: positions,
        audit_decreased,
        revenue_increased,
    })
}

fn violation(what: &str, x: f64, by: f64) -> Error {
    Error::Guarantee(format!("{what} fails at x = {x} by {by:e}"))
}

/// Whether tightening leaves audit probabilities and revenue unchanged on the
/// input grid, within [`FIXED_POINT_TOL`].
pub fn is_fixed_point(m: &Mechanism, env: &Environment) -> Result<bool> {
    let report = tighten(m, env)?;
    let a_gap = sup_gap(&report.a_out_on_input(), m.a());
    let r_gap = sup_gap(&report.revenue_out_on_input(), &m.revenue_table());
    Ok(a_gap <= FIXED_POINT_TOL && r_gap <= FIXED_POINT_TOL)
}

pub(crate) fn sup_gap(u: &[f64], v: &[f64]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}
