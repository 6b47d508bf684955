//! Mechanisms from loss functions.
//!
//! Given a pair `(λ, a)` satisfying the inequality system, [`refunds_from`]
//! picks refunds with revenue exactly `λ`: the no-audit refund is kept at zero
//! unless the audit refund is maxed out at `y + τ`. [`build_efficient`] sets
//! `a = max{alpha_λ, beta_λ}` and tabulates the result on a grid rich enough
//! for the grid deviation loss to reproduce `λ`.

use serde::{Deserialize, Serialize};

use crate::audit_schedule::AuditSchedule;
use crate::environment::Environment;
use crate::lambda_space::{LossFunction, IDENTITY_CLAMP};
use crate::mechanism::{system_holds, Mechanism};
use crate::pwl::MERGE_TOL;
use crate::{Error, Result};

/// Default number of uniform grid points.
pub const DEFAULT_GRID: usize = 1001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefundPair {
    pub r_p: Vec<f64>,
    pub r_empty: Vec<f64>,
}

/// Refunds realising revenue `λ` with deviation loss at least `λ`.
///
/// Free choices (`r_empty` when `a = 1`, `r_p` when `a = 0`) are set to zero.
pub fn refunds_from(
    grid: &[f64],
    lambda: &[f64],
    a: &[f64],
    env: &Environment,
) -> Result<RefundPair> {
    for (i, (&y, &l)) in grid.iter().zip(lambda).enumerate() {
        if l < -env.tau - IDENTITY_CLAMP || l > y + IDENTITY_CLAMP {
            return Err(Error::Domain(format!(
                "lambda[{i}] = {l} outside [-tau, y] at y = {y}"
            )));
        }
        if !(0.0..=1.0).contains(&a[i]) {
            return Err(Error::Domain(format!("a[{i}] = {} outside [0, 1]", a[i])));
        }
    }
    system_holds(grid, lambda, a, env)?.into_result()?;

    let tau = env.tau;
    let n = grid.len();
    let mut r_p = Vec::with_capacity(n);
    let mut r_empty = Vec::with_capacity(n);
    for i in 0..n {
        let (y, l, ai) = (grid[i], lambda[i].clamp(-env.tau, grid[i]), a[i]);
        let cap = y + tau;
        let re = if ai == 1.0 {
            0.0
        } else {
            let phi = ((1.0 - ai) * y).min(l + ai * tau);
            y - phi / (1.0 - ai)
        };
        let rp = if ai == 0.0 {
            0.0
        } else {
            y - (l - (1.0 - ai) * y).max(-ai * tau) / ai
        };
        r_p.push(rp.clamp(0.0, cap));
        r_empty.push(re.clamp(0.0, cap));
    }
    Ok(RefundPair { r_p, r_empty })
}

/// Deviation targets whose lines `a(y) x + φ(y)` coincide with a linear piece
/// of `λ`.
///
/// For a piece with slope `s` through `(b, λ(b))` there are two candidates: the
/// point where the extended piece meets the identity (binding when the
/// no-audit refund is zero) and the point `y` with `λ(y) = λ(b) - s (b + τ)`
/// (binding when the audit refund is maxed out). Including them in the grid
/// makes the grid deviation loss equal `λ` at every grid point.
pub fn support_points(lam: &LossFunction, env: &Environment) -> Vec<f64> {
    let bp = lam.shape().breakpoints();
    let mut out = Vec::new();
    for w in bp.windows(2) {
        let (b, vb) = w[0];
        let (b2, vb2) = w[1];
        let s = (vb2 - vb) / (b2 - b);
        if 1.0 - s > 1e-9 {
            let y = (vb - s * b) / (1.0 - s);
            if y >= env.x_lo - MERGE_TOL && y <= b + MERGE_TOL {
                out.push(y.clamp(env.x_lo, b));
            }
        }
        let target = vb - s * (b + env.tau);
        if let Some(y) = first_crossing(lam, target) {
            if y <= b + MERGE_TOL {
                out.push(y.min(b));
            }
        }
    }
    out
}

/// Smallest `y` with `λ(y) = target`, if `target` lies in the range of `λ`.
fn first_crossing(lam: &LossFunction, target: f64) -> Option<f64> {
    let bp = lam.shape().breakpoints();
    if target < bp[0].1 - MERGE_TOL {
        return None;
    }
    if target <= bp[0].1 {
        return Some(bp[0].0);
    }
    for w in bp.windows(2) {
        let (x1, v1) = w[0];
        let (x2, v2) = w[1];
        if v2 >= target && v2 > v1 {
            return Some(x1 + (target - v1) / (v2 - v1) * (x2 - x1));
        }
    }
    None
}

/// `base` plus every point of `extra` not within [`MERGE_TOL`] of a kept point.
pub fn merge_grid(base: &[f64], extra: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut grid = base.to_vec();
    let mut extra: Vec<f64> = extra.into_iter().filter(|x| x.is_finite()).collect();
    extra.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for x in extra {
        let i = grid.partition_point(|&g| g < x);
        let near_left = i > 0 && x - grid[i - 1] <= MERGE_TOL;
        let near_right = i < grid.len() && grid[i] - x <= MERGE_TOL;
        if !near_left && !near_right {
            grid.insert(i, x);
        }
    }
    grid
}

/// Uniform points, the breakpoints of `λ`, and its support points.
pub fn efficient_grid(lam: &LossFunction, env: &Environment, grid_size: usize) -> Result<Vec<f64>> {
    let uniform = env.uniform_grid(grid_size)?;
    let with_kinks = merge_grid(&uniform, lam.shape().xs());
    Ok(merge_grid(&with_kinks, support_points(lam, env)))
}

/// The mechanism with revenue `λ` and audit probability `max{alpha_λ, beta_λ}`
/// tabulated on `grid`.
pub fn build_on_grid(lam: &LossFunction, env: &Environment, grid: Vec<f64>) -> Result<Mechanism> {
    if grid.len() < 2 || grid[0] != env.x_lo || grid[grid.len() - 1] != env.x_hi {
        return Err(Error::GridMismatch(
            "construction grid must run from x_lo to x_hi".into(),
        ));
    }
    let schedule = AuditSchedule::new(lam, env);
    let a = schedule.audit_table(&grid)?;
    let lambda: Vec<f64> = grid.iter().map(|&y| lam.value(y)).collect();
    let refunds = refunds_from(&grid, &lambda, &a, env)?;
    Mechanism::new(grid, a, refunds.r_p, refunds.r_empty)
}

pub fn build_efficient(
    lam: &LossFunction,
    env: &Environment,
    grid_size: usize,
) -> Result<Mechanism> {
    build_on_grid(lam, env, efficient_grid(lam, env, grid_size)?)
}

/// Which refund pattern a grid point follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefundBranch {
    /// `alpha > beta`: no-audit refund zero.
    Alpha,
    /// `beta > alpha`: audit refund maxed out.
    Beta,
    /// `alpha = beta`: both patterns give the same values.
    Boundary,
}

/// Classifies each grid point by which of `alpha`, `beta` is larger.
pub fn refund_branches(schedule: &AuditSchedule, grid: &[f64], tol: f64) -> Vec<RefundBranch> {
    grid.iter()
        .map(|&y| {
            let d = schedule.alpha_unchecked(y) - schedule.beta_unchecked(y);
            if d > tol {
                RefundBranch::Alpha
            } else if d < -tol {
                RefundBranch::Beta
            } else {
                RefundBranch::Boundary
            }
        })
        .collect()
}
