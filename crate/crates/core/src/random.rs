//! Seeded generators for loss functions and mechanisms used by test corpora
//! and the CLI.

use rand::Rng;

use crate::environment::Environment;
use crate::lambda_space::{validate_lambda, LossFunction};
use crate::mechanism::Mechanism;
use crate::pwl::PwlFunction;
use crate::Result;

/// Kinks are drawn on `x_lo + width * j / KINK_LATTICE`, which lies on every
/// uniform grid whose size minus one is a multiple of `KINK_LATTICE`.
pub const KINK_LATTICE: usize = 1000;
pub const MAX_KINKS: usize = 10;

fn lattice_point(env: &Environment, j: usize) -> f64 {
    if j == KINK_LATTICE {
        env.x_hi
    } else {
        env.x_lo + env.width() * (j as f64 / KINK_LATTICE as f64)
    }
}

/// A random admissible loss function: up to [`MAX_KINKS`] kinks and slopes in
/// `[0, 1]`, nonincreasing from left to right.
pub fn random_lambda<R: Rng + ?Sized>(rng: &mut R, env: &Environment) -> Result<LossFunction> {
    let k = rng.gen_range(0..=MAX_KINKS);
    let mut kinks: Vec<usize> = (0..k).map(|_| rng.gen_range(1..KINK_LATTICE)).collect();
    kinks.sort_unstable();
    kinks.dedup();

    let mut slopes: Vec<f64> = (0..=kinks.len())
        .map(|_| rng.gen_range(0.0..=1.0))
        .collect();
    slopes.sort_by(|a, b| b.total_cmp(a));
    match rng.gen_range(0..4) {
        0 => slopes[0] = 1.0,
        1 => {
            let n = slopes.len();
            slopes[n - 1] = 0.0;
        }
        _ => {}
    }

    let mut xs = vec![0];
    xs.extend(kinks);
    xs.push(KINK_LATTICE);
    let mut pts = Vec::with_capacity(xs.len());
    let mut v = env.x_lo;
    pts.push((env.x_lo, v));
    for (w, s) in xs.windows(2).zip(&slopes) {
        let (x0, x1) = (lattice_point(env, w[0]), lattice_point(env, w[1]));
        v = (v + s * (x1 - x0)).min(x1);
        pts.push((x1, v));
    }
    validate_lambda(&PwlFunction::new(pts)?, env)
}

/// `min{y, y0}` with `y0` drawn on the kink lattice.
pub fn random_debt_lambda<R: Rng + ?Sized>(rng: &mut R, env: &Environment) -> Result<LossFunction> {
    let y0 = lattice_point(env, rng.gen_range(0..=KINK_LATTICE));
    LossFunction::debt(env, y0)
}

/// A random feasible IC mechanism on the uniform `n`-point grid.
///
/// Audit probabilities and refunds are drawn first; then, in ascending type
/// order, refunds are raised (audit refund first) until revenue no longer
/// exceeds the deviation loss against lower types. Maxed-out refunds give
/// revenue `-τ`, which never exceeds it, so the repair always succeeds.
pub fn random_ic_mechanism<R: Rng + ?Sized>(
    rng: &mut R,
    env: &Environment,
    n: usize,
) -> Result<Mechanism> {
    let grid = env.uniform_grid(n)?;
    let style = rng.gen_range(0..3);
    let mut a = Vec::with_capacity(n);
    let mut r_p = Vec::with_capacity(n);
    let mut r_e = Vec::with_capacity(n);
    for &y in &grid {
        let cap = y + env.tau;
        a.push(match style {
            0 => rng.gen_range(0.0..=1.0),
            1 => f64::from(rng.gen_bool(0.5)),
            _ => (rng.gen_range(0..=4) as f64) / 4.0,
        });
        r_p.push(rng.gen_range(0.0..=1.0) * cap);
        r_e.push(rng.gen_range(0.0..=0.3) * cap);
    }

    for i in 0..n {
        let x = grid[i];
        let cap = x + env.tau;
        let d = (0..i)
            .map(|j| a[j] * x + (1.0 - a[j]) * (grid[j] - r_e[j]))
            .fold(f64::INFINITY, f64::min);
        let revenue = |a: f64, rp: f64, re: f64| x - (a * rp + (1.0 - a) * re);
        let mut excess = revenue(a[i], r_p[i], r_e[i]) - d;
        if excess > 0.0 && a[i] > 0.0 {
            r_p[i] = (r_p[i] + excess / a[i]).min(cap);
            excess = revenue(a[i], r_p[i], r_e[i]) - d;
        }
        if excess > 0.0 && a[i] < 1.0 {
            r_e[i] = (r_e[i] + excess / (1.0 - a[i])).min(cap);
            excess = revenue(a[i], r_p[i], r_e[i]) - d;
        }
        if excess > 0.0 {
            r_p[i] = cap;
            r_e[i] = cap;
        }
    }
    Mechanism::new(grid, a, r_p, r_e)
}
