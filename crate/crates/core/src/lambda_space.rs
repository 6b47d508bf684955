//! Admissible loss functions: weakly increasing, weakly concave, anchored at
//! `λ(x_lo) = x_lo` and bounded above by the identity.
//!
//! Also houses the regularisation `λ -> λ⁺ -> λ*` that turns the deviation loss
//! of an arbitrary mechanism into an admissible loss function, and the
//! recognition of debt-contract loss functions `min{y, y0}`.

use serde::{Deserialize, Serialize};

use crate::environment::Environment;
use crate::pwl::{affine_lower_envelope, AffineLine, PwlFunction};
use crate::{Error, Result};

/// Slack for monotonicity and concavity, relative to the domain width.
pub const SHAPE_TOL: f64 = 1e-9;
/// Absolute tolerance for the anchor `λ(x_lo) = x_lo`.
pub const ANCHOR_TOL: f64 = 1e-12;
/// Values at most this far above the identity are clamped onto it.
pub const IDENTITY_CLAMP: f64 = 1e-12;
/// Sup-norm tolerance for recognising `min{y, y0}`.
pub const DEBT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Clause {
    Domain,
    Monotonicity,
    Concavity,
    Anchor,
    BelowIdentity,
    Range,
}

impl std::fmt::Display for Clause {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Clause::Domain => "domain",
            Clause::Monotonicity => "monotonicity",
            Clause::Concavity => "concavity",
            Clause::Anchor => "anchor",
            Clause::BelowIdentity => "below-identity",
            Clause::Range => "range",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub clause: Clause,
    pub x: f64,
    /// How far the clause is missed, in value units.
    pub amount: f64,
}

/// A piecewise-linear function validated to lie in the admissible class.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct LossFunction {
    shape: PwlFunction,
}

impl LossFunction {
    pub fn shape(&self) -> &PwlFunction {
        &self.shape
    }

    pub fn into_shape(self) -> PwlFunction {
        self.shape
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        self.shape.eval(x)
    }

    pub(crate) fn value(&self, x: f64) -> f64 {
        self.shape.value(x)
    }

    pub fn lo(&self) -> f64 {
        self.shape.lo()
    }

    pub fn hi(&self) -> f64 {
        self.shape.hi()
    }

    pub fn identity(env: &Environment) -> Self {
        Self {
            shape: PwlFunction::identity(env.x_lo, env.x_hi).expect("valid environment"),
        }
    }

    /// `y -> min{y, y0}` on the environment's domain.
    pub fn debt(env: &Environment, y0: f64) -> Result<Self> {
        if !env.contains(y0) {
            return Err(Error::Domain(format!(
                "debt threshold {y0} outside [{}, {}]",
                env.x_lo, env.x_hi
            )));
        }
        let mut pts = vec![(env.x_lo, env.x_lo)];
        if y0 > env.x_lo && y0 < env.x_hi {
            pts.push((y0, y0));
        }
        pts.push((env.x_hi, y0));
        validate_lambda(&PwlFunction::new(pts)?, env)
    }
}

/// Checks membership in the admissible class, clamping values within
/// [`IDENTITY_CLAMP`] above the identity and snapping the anchor.
pub fn validate_lambda(f: &PwlFunction, env: &Environment) -> Result<LossFunction> {
    let mut violations = Vec::new();
    if f.lo() != env.x_lo || f.hi() != env.x_hi {
        violations.push(Violation {
            clause: Clause::Domain,
            x: if f.lo() != env.x_lo { f.lo() } else { f.hi() },
            amount: (f.lo() - env.x_lo).abs().max((f.hi() - env.x_hi).abs()),
        });
        return Err(Error::InvalidLambda(violations));
    }

    let slack = SHAPE_TOL * env.width();
    let mut pts: Vec<(f64, f64)> = f.breakpoints().to_vec();

    let anchor_gap = (pts[0].1 - env.x_lo).abs();
    if anchor_gap > ANCHOR_TOL {
        violations.push(Violation {
            clause: Clause::Anchor,
            x: env.x_lo,
            amount: anchor_gap,
        });
    } else {
        pts[0].1 = env.x_lo;
    }

    for p in pts.iter_mut() {
        let excess = p.1 - p.0;
        if excess > IDENTITY_CLAMP {
            violations.push(Violation {
                clause: Clause::BelowIdentity,
                x: p.0,
                amount: excess,
            });
        } else if excess > 0.0 {
            p.1 = p.0;
        }
        if p.1 < env.x_lo - slack {
            violations.push(Violation {
                clause: Clause::Range,
                x: p.0,
                amount: env.x_lo - p.1,
            });
        }
    }

    for w in pts.windows(2) {
        let drop = w[0].1 - w[1].1;
        if drop > slack {
            violations.push(Violation {
                clause: Clause::Monotonicity,
                x: w[1].0,
                amount: drop,
            });
        }
    }

    // Concavity in chord form: each interior breakpoint must not lie below the
    // chord joining its neighbours. Robust to closely spaced breakpoints.
    for w in pts.windows(3) {
        let (x0, v0) = w[0];
        let (x1, v1) = w[1];
        let (x2, v2) = w[2];
        let chord = v0 + (v2 - v0) * ((x1 - x0) / (x2 - x0));
        let gap = chord - v1;
        if gap > slack {
            violations.push(Violation {
                clause: Clause::Concavity,
                x: x1,
                amount: gap,
            });
        }
    }

    if violations.is_empty() {
        Ok(LossFunction {
            shape: PwlFunction::new(pts)?,
        })
    } else {
        Err(Error::InvalidLambda(violations))
    }
}

/// `λ⁺(x) = max{x_lo, max_{y <= x} λ(y)}` of a table sampled on `grid`.
pub fn lambda_plus(grid: &[f64], lambda: &[f64], env: &Environment) -> Result<PwlFunction> {
    Ok(PwlFunction::from_table(grid, lambda)?.running_max_floor(env.x_lo))
}

/// The affine family whose lower envelope is `λ*`: for each grid point `y`,
/// slope `a(y)` and intercept `min{(1 - a(y)) y, λ⁺(y) + a(y) τ}`.
pub fn virtual_lines(
    grid: &[f64],
    lambda: &[f64],
    a: &[f64],
    env: &Environment,
) -> Result<Vec<AffineLine>> {
    check_tables(grid, lambda, a, env)?;
    let plus = lambda_plus(grid, lambda, env)?;
    grid.iter()
        .zip(a)
        .map(|(&y, &ay)| {
            let intercept = ((1.0 - ay) * y).min(plus.value(y) + ay * env.tau);
            AffineLine::new(ay, intercept)
        })
        .collect()
}

/// The virtual loss `λ*(x) = inf_y a(y) x + min{(1 - a(y)) y, λ⁺(y) + a(y) τ}`,
/// computed exactly as a lower envelope and validated before return.
pub fn virtual_loss(
    grid: &[f64],
    lambda: &[f64],
    a: &[f64],
    env: &Environment,
) -> Result<LossFunction> {
    let lines = virtual_lines(grid, lambda, a, env)?;
    let star = affine_lower_envelope(&lines, env.x_lo, env.x_hi)?;
    validate_lambda(&star, env)
}

fn check_tables(grid: &[f64], lambda: &[f64], a: &[f64], env: &Environment) -> Result<()> {
    if grid.len() != lambda.len() || grid.len() != a.len() {
        return Err(Error::Argument(format!(
            "misaligned tables: grid {}, lambda {}, a {}",
            grid.len(),
            lambda.len(),
            a.len()
        )));
    }
    if grid.len() < 2 || grid[0] != env.x_lo || grid[grid.len() - 1] != env.x_hi {
        return Err(Error::GridMismatch(
            "grid must run from x_lo to x_hi with at least 2 points".into(),
        ));
    }
    for (i, ((&y, &l), &ay)) in grid.iter().zip(lambda).zip(a).enumerate() {
        if !(0.0..=1.0).contains(&ay) {
            return Err(Error::Domain(format!("a[{i}] = {ay} outside [0, 1]")));
        }
        if l < -env.tau - IDENTITY_CLAMP || l > y + IDENTITY_CLAMP {
            return Err(Error::Domain(format!(
                "lambda[{i}] = {l} outside [-tau, y] = [{}, {y}]",
                -env.tau
            )));
        }
    }
    Ok(())
}

/// Returns `y0` when `λ(y) = min{y, y0}` within [`DEBT_TOL`], `None` for the
/// random-audit class.
pub fn classify_debt(lam: &LossFunction) -> Option<f64> {
    let shape = lam.shape();
    let y0 = shape.breakpoints()[shape.breakpoints().len() - 1].1;
    let debt = |y: f64| y.min(y0);
    let xs = shape
        .xs()
        .chain(std::iter::once(y0.clamp(lam.lo(), lam.hi())));
    let worst = xs
        .map(|y| (shape.value(y) - debt(y)).abs())
        .fold(0.0, f64::max);
    (worst <= DEBT_TOL).then_some(y0)
}
