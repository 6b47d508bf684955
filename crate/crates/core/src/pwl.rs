//! Piecewise-linear functions on a closed interval.
//!
//! A [`PwlFunction`] is stored as its breakpoints and interpolated linearly in
//! between. Besides evaluation, the two operations the audit pipeline needs are
//! provided here: the running maximum with a floor and the lower envelope of a
//! finite family of affine functions.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Breakpoints closer than this in `x` are merged.
pub const MERGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPwl")]
pub struct PwlFunction {
    breakpoints: Vec<(f64, f64)>,
}

#[derive(Deserialize)]
struct RawPwl {
    breakpoints: Vec<(f64, f64)>,
}

impl TryFrom<RawPwl> for PwlFunction {
    type Error = Error;

    fn try_from(raw: RawPwl) -> Result<Self> {
        PwlFunction::new(raw.breakpoints)
    }
}

impl PwlFunction {
    pub fn new(breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::Argument(format!(
                "need at least 2 breakpoints, got {}",
                breakpoints.len()
            )));
        }
        if breakpoints
            .iter()
            .any(|(x, v)| !x.is_finite() || !v.is_finite())
        {
            return Err(Error::Argument("breakpoints must be finite".into()));
        }
        if let Some(w) = breakpoints.windows(2).find(|w| w[1].0 <= w[0].0) {
            return Err(Error::Argument(format!(
                "breakpoint x-coordinates must be strictly increasing ({} then {})",
                w[0].0, w[1].0
            )));
        }
        Ok(Self { breakpoints })
    }

    /// Builds the interpolant of a table sampled on `grid`.
    pub fn from_table(grid: &[f64], values: &[f64]) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::Argument(format!(
                "grid has {} points but table has {}",
                grid.len(),
                values.len()
            )));
        }
        Self::new(grid.iter().copied().zip(values.iter().copied()).collect())
    }

    pub fn identity(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![(lo, lo), (hi, hi)])
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        self.breakpoints.iter().map(|p| p.0)
    }

    pub fn lo(&self) -> f64 {
        self.breakpoints[0].0
    }

    pub fn hi(&self) -> f64 {
        self.breakpoints[self.breakpoints.len() - 1].0
    }

    /// Evaluates at `x`; exact at breakpoints.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(self.lo() <= x && x <= self.hi()) {
            return Err(Error::Domain(format!(
                "x = {x} outside [{}, {}]",
                self.lo(),
                self.hi()
            )));
        }
        Ok(self.value(x))
    }

    /// Evaluation with `x` clamped into the domain.
    pub(crate) fn value(&self, x: f64) -> f64 {
        let bp = &self.breakpoints;
        let n = bp.len();
        if x <= bp[0].0 {
            return bp[0].1;
        }
        if x >= bp[n - 1].0 {
            return bp[n - 1].1;
        }
        let i = bp.partition_point(|p| p.0 <= x) - 1;
        let (x1, v1) = bp[i];
        let (x2, v2) = bp[i + 1];
        v1 + (v2 - v1) * ((x - x1) / (x2 - x1))
    }

    /// Slope of the segment immediately to the right of `x` (0 at the right end).
    pub fn right_slope(&self, x: f64) -> f64 {
        let bp = &self.breakpoints;
        let n = bp.len();
        if x >= bp[n - 1].0 {
            return 0.0;
        }
        let i = bp.partition_point(|p| p.0 <= x).max(1) - 1;
        let (x1, v1) = bp[i];
        let (x2, v2) = bp[i + 1];
        (v2 - v1) / (x2 - x1)
    }

    /// Segment slopes, one per consecutive breakpoint pair.
    pub fn slopes(&self) -> Vec<f64> {
        self.breakpoints
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
            .collect()
    }

    /// Largest absolute difference over the union of both breakpoint sets.
    /// Both functions must share the same domain.
    pub fn sup_distance(&self, other: &PwlFunction) -> f64 {
        self.xs()
            .chain(other.xs())
            .map(|x| (self.value(x) - other.value(x)).abs())
            .fold(0.0, f64::max)
    }

    /// `x -> max{floor, max_{y <= x} f(y)}`.
    pub fn running_max_floor(&self, floor: f64) -> PwlFunction {
        let bp = &self.breakpoints;
        let mut level = floor.max(bp[0].1);
        let mut out = vec![(bp[0].0, level)];
        for w in bp.windows(2) {
            let (x1, v1) = w[0];
            let (x2, v2) = w[1];
            if v2 > level {
                if v1 < level {
                    let xc = x1 + (level - v1) / (v2 - v1) * (x2 - x1);
                    push_merged(&mut out, (xc, level));
                }
                level = v2;
            }
            push_merged(&mut out, (x2, level));
        }
        finish(out, bp[0].0, bp[bp.len() - 1].0)
    }
}

fn push_merged(out: &mut Vec<(f64, f64)>, p: (f64, f64)) {
    let last = out[out.len() - 1];
    if p.0 - last.0 > MERGE_TOL {
        out.push(p);
    } else if p.0 > last.0 && out.len() > 1 {
        // keep the later point when it is only marginally to the right
        let n = out.len();
        out[n - 1] = p;
    }
}

/// Drops collinear interior points and pins the endpoints to the domain.
fn finish(mut pts: Vec<(f64, f64)>, lo: f64, hi: f64) -> PwlFunction {
    pts[0].0 = lo;
    if pts.len() == 1 {
        let v = pts[0].1;
        pts.push((hi, v));
    }
    let n = pts.len();
    pts[n - 1].0 = hi;
    let mut kept: Vec<(f64, f64)> = Vec::with_capacity(n);
    for (i, &p) in pts.iter().enumerate() {
        if i > 0 && i + 1 < n {
            let prev = kept[kept.len() - 1];
            let next = pts[i + 1];
            if prev.1 == p.1 && p.1 == next.1 {
                continue;
            }
        }
        kept.push(p);
    }
    PwlFunction { breakpoints: kept }
}

/// `x -> slope * x + intercept` with `slope` in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineLine {
    pub slope: f64,
    pub intercept: f64,
}

impl AffineLine {
    pub fn new(slope: f64, intercept: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&slope) || !intercept.is_finite() {
            return Err(Error::Argument(format!(
                "line needs slope in [0, 1] and finite intercept, got ({slope}, {intercept})"
            )));
        }
        Ok(Self { slope, intercept })
    }

    #[inline]
    pub fn at(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

/// Pointwise minimum of `lines` restricted to `[lo, hi]`.
///
/// Lines are sorted by decreasing slope (ties keep the lower intercept) and
/// scanned once with a stack, popping every line whose stretch of the envelope
/// is empty. The surviving hull is then clipped to the domain.
pub fn affine_lower_envelope(lines: &[AffineLine], lo: f64, hi: f64) -> Result<PwlFunction> {
    if lines.is_empty() {
        return Err(Error::Argument("lower envelope of an empty family".into()));
    }
    if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
        return Err(Error::Argument(format!("empty domain [{lo}, {hi}]")));
    }
    if let Some(l) = lines
        .iter()
        .find(|l| !(0.0..=1.0).contains(&l.slope) || !l.intercept.is_finite())
    {
        return Err(Error::Argument(format!(
            "line ({}, {}) has slope outside [0, 1]",
            l.slope, l.intercept
        )));
    }

    let mut sorted = lines.to_vec();
    sorted.sort_by(|a, b| {
        b.slope
            .partial_cmp(&a.slope)
            .unwrap_or(Ordering::Equal)
            .then(
                a.intercept
                    .partial_cmp(&b.intercept)
                    .unwrap_or(Ordering::Equal),
            )
    });
    sorted.dedup_by(|later, earlier| later.slope == earlier.slope);

    let mut hull: Vec<AffineLine> = Vec::with_capacity(sorted.len());
    for line in sorted {
        while hull.len() >= 2 {
            let l1 = hull[hull.len() - 2];
            let l2 = hull[hull.len() - 1];
            let redundant = (line.intercept - l1.intercept) * (l1.slope - l2.slope)
                <= (l2.intercept - l1.intercept) * (l1.slope - line.slope);
            if redundant {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(line);
    }

    // crossings[i] is where hull[i + 1] takes over from hull[i]
    let crossings: Vec<f64> = hull
        .windows(2)
        .map(|w| (w[1].intercept - w[0].intercept) / (w[0].slope - w[1].slope))
        .collect();

    let mut active = crossings.partition_point(|&c| c <= lo);
    let mut pts = vec![(lo, hull[active].at(lo))];
    while active < crossings.len() && crossings[active] < hi {
        let x = crossings[active];
        let v = hull[active].at(x).min(hull[active + 1].at(x));
        push_merged(&mut pts, (x, v));
        active += 1;
    }
    push_merged(&mut pts, (hi, hull[active].at(hi)));
    let n = pts.len();
    if pts[n - 1].0 != hi {
        if n > 1 {
            pts[n - 1] = (hi, hull[active].at(hi));
        } else {
            pts.push((hi, hull[active].at(hi)));
        }
    }
    Ok(finish(pts, lo, hi))
}
