//! Brute-force verification on small discrete instances.
//!
//! Types form a finite set, audit probabilities a lattice `{0, 1/q, ..., 1}`
//! and refunds per type `L` evenly spaced levels in `[0, y + τ]`. Every
//! lattice mechanism that is IC against deviations within the type set is
//! enumerated depth-first, types in ascending order and candidates in
//! lexicographic `(a, r_p, r_empty)` order, pruning as soon as a type's IC
//! constraint fails.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::Environment;
use crate::mechanism::Mechanism;
use crate::{Error, Result};

pub const MAX_TYPES: usize = 6;
pub const MAX_Q: usize = 10;
pub const MAX_REFUND_LEVELS: usize = 11;
/// Upper bound on `((q + 1) L²)^n`.
pub const MAX_CANDIDATES: f64 = 1e8;
/// Slack of the IC and dominance comparisons; absorbs lattice rounding only.
pub const ORACLE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteInstance {
    pub types: Vec<f64>,
    pub q: usize,
    pub refund_levels: usize,
    pub env: Environment,
}

impl DiscreteInstance {
    pub fn new(types: Vec<f64>, q: usize, refund_levels: usize, env: Environment) -> Result<Self> {
        let inst = Self {
            types,
            q,
            refund_levels,
            env,
        };
        inst.validate()?;
        Ok(inst)
    }

    /// Checks the lattice bounds, including the candidate budget.
    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        if self.types.is_empty() || self.q == 0 || self.refund_levels == 0 {
            return Err(Error::Argument(
                "types, q and refund levels must all be non-empty".into(),
            ));
        }
        if self.types.len() > MAX_TYPES || self.q > MAX_Q || self.refund_levels > MAX_REFUND_LEVELS
        {
            return Err(Error::Argument(format!(
                "at most {MAX_TYPES} types, q <= {MAX_Q} and {MAX_REFUND_LEVELS} refund levels"
            )));
        }
        if let Some(&t) = self.types.iter().find(|&&t| !self.env.contains(t)) {
            return Err(Error::Domain(format!(
                "type {t} outside the surplus interval"
            )));
        }
        if self.types.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Argument("types must be strictly increasing".into()));
        }
        let estimate = self.candidate_estimate();
        if estimate > MAX_CANDIDATES {
            return Err(Error::InstanceTooLarge {
                estimate,
                limit: MAX_CANDIDATES,
            });
        }
        Ok(())
    }

    /// `((q + 1) L²)^n`, the size of the unpruned search space.
    pub fn candidate_estimate(&self) -> f64 {
        let per_type = (self.q + 1) as f64 * (self.refund_levels as f64).powi(2);
        per_type.powi(self.types.len() as i32)
    }

    pub fn prob_lattice(&self) -> Vec<f64> {
        (0..=self.q).map(|k| k as f64 / self.q as f64).collect()
    }

    /// Refund levels for type `y`; coincident levels (when `y + τ = 0`) are
    /// listed once.
    pub fn refund_lattice(&self, y: f64) -> Vec<f64> {
        let cap = y + self.env.tau;
        if self.refund_levels == 1 || cap == 0.0 {
            return vec![0.0];
        }
        let top = (self.refund_levels - 1) as f64;
        (0..self.refund_levels)
            .map(|l| cap * (l as f64 / top))
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    a: f64,
    r_p: f64,
    r_empty: f64,
    revenue: f64,
    profit: f64,
}

struct Space<'a> {
    types: &'a [f64],
    cands: Vec<Vec<Candidate>>,
}

impl<'a> Space<'a> {
    fn new(inst: &'a DiscreteInstance) -> Result<Self> {
        inst.validate()?;
        let probs = inst.prob_lattice();
        let mut cands = Vec::with_capacity(inst.types.len());
        for &y in &inst.types {
            let refunds = inst.refund_lattice(y);
            let mut list = Vec::with_capacity(probs.len() * refunds.len().pow(2));
            for &a in &probs {
                for &r_p in &refunds {
                    for &r_empty in &refunds {
                        let revenue = y - (a * r_p + (1.0 - a) * r_empty);
                        list.push(Candidate {
                            a,
                            r_p,
                            r_empty,
                            revenue,
                            profit: revenue - inst.env.cost_eval(a)?,
                        });
                    }
                }
            }
            cands.push(list);
        }
        Ok(Self {
            types: &inst.types,
            cands,
        })
    }

    fn cand(&self, level: usize, k: usize) -> &Candidate {
        &self.cands[level][k]
    }

    /// Loss of type `types[i]` from advancing `types[j]`, in the same form as
    /// the mechanism tables.
    fn term(&self, i: usize, j: usize, c: &Candidate) -> f64 {
        c.a * self.types[i] + (1.0 - c.a) * (self.types[j] - c.r_empty)
    }

    /// Deviation loss of the type at `level` against the already chosen lower
    /// types, excluding truth-telling.
    fn lower_loss(&self, level: usize, chosen: &[usize]) -> f64 {
        chosen
            .iter()
            .enumerate()
            .map(|(j, &k)| self.term(level, j, self.cand(j, k)))
            .fold(f64::INFINITY, f64::min)
    }

    fn ic_ok(&self, level: usize, c: &Candidate, chosen: &[usize]) -> bool {
        c.revenue <= self.lower_loss(level, chosen) + ORACLE_TOL
    }

    fn mechanism(&self, chosen: &[usize]) -> Mechanism {
        let mut a = Vec::with_capacity(chosen.len());
        let mut r_p = Vec::with_capacity(chosen.len());
        let mut r_e = Vec::with_capacity(chosen.len());
        for (level, &k) in chosen.iter().enumerate() {
            let c = self.cand(level, k);
            a.push(c.a);
            r_p.push(c.r_p);
            r_e.push(c.r_empty);
        }
        Mechanism::new(self.types.to_vec(), a, r_p, r_e)
            .expect("lattice tables are finite and aligned")
    }

    /// Depth-first search below `chosen`; `accept` filters candidates beyond
    /// IC and `leaf` returns `true` to stop.
    fn dfs<A, L>(&self, chosen: &mut Vec<usize>, accept: &A, leaf: &mut L) -> bool
    where
        A: Fn(usize, &Candidate, &[usize]) -> bool,
        L: FnMut(&[usize]) -> bool,
    {
        let level = chosen.len();
        if level == self.types.len() {
            return leaf(chosen);
        }
        for k in 0..self.cands[level].len() {
            let c = self.cand(level, k);
            if !self.ic_ok(level, c, chosen) || !accept(level, c, chosen) {
                continue;
            }
            chosen.push(k);
            let stop = self.dfs(chosen, accept, leaf);
            chosen.pop();
            if stop {
                return true;
            }
        }
        false
    }

    /// Parallel search over the first type's candidates; returns the first
    /// hit in enumeration order.
    fn find_first<A, P>(&self, accept: &A, is_hit: &P) -> Option<Vec<usize>>
    where
        A: Fn(usize, &Candidate, &[usize]) -> bool + Sync,
        P: Fn(&[usize]) -> bool + Sync,
    {
        (0..self.cands[0].len())
            .into_par_iter()
            .find_map_first(|k| {
                let c = self.cand(0, k);
                if !accept(0, c, &[]) {
                    return None;
                }
                let mut chosen = vec![k];
                let mut found = None;
                self.dfs(&mut chosen, accept, &mut |path: &[usize]| {
                    if is_hit(path) {
                        found = Some(path.to_vec());
                        true
                    } else {
                        false
                    }
                });
                found
            })
    }
}

/// Every feasible IC lattice mechanism, in enumeration order.
pub fn enumerate_feasible_ic(inst: &DiscreteInstance) -> Result<IcEnumeration<'_>> {
    let space = Space::new(inst)?;
    let n = inst.types.len();
    Ok(IcEnumeration {
        space,
        chosen: Vec::with_capacity(n),
        next: vec![0; n],
        done: false,
    })
}

pub struct IcEnumeration<'a> {
    space: Space<'a>,
    chosen: Vec<usize>,
    next: Vec<usize>,
    done: bool,
}

impl Iterator for IcEnumeration<'_> {
    type Item = Mechanism;

    fn next(&mut self) -> Option<Mechanism> {
        let n = self.space.types.len();
        while !self.done {
            let d = self.chosen.len();
            if d == n {
                let m = self.space.mechanism(&self.chosen);
                self.chosen.pop();
                return Some(m);
            }
            let mut advanced = false;
            while self.next[d] < self.space.cands[d].len() {
                let k = self.next[d];
                self.next[d] += 1;
                if self.space.ic_ok(d, self.space.cand(d, k), &self.chosen) {
                    self.chosen.push(k);
                    if d + 1 < n {
                        self.next[d + 1] = 0;
                    }
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                if d == 0 {
                    self.done = true;
                } else {
                    self.chosen.pop();
                }
            }
        }
        None
    }
}

/// Number of feasible IC lattice mechanisms.
pub fn count_feasible_ic(inst: &DiscreteInstance) -> Result<u64> {
    let space = Space::new(inst)?;
    let total = (0..space.cands[0].len())
        .into_par_iter()
        .map(|k| {
            let mut count = 0u64;
            let mut chosen = vec![k];
            space.dfs(&mut chosen, &|_, _, _| true, &mut |_| {
                count += 1;
                false
            });
            count
        })
        .sum();
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Efficiency,
    Tightness,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleVerdict {
    UndominatedWithinLattice,
    Dominated,
}

#[derive(Debug, Clone, Serialize)]
pub struct DominanceReport {
    pub verdict: OracleVerdict,
    pub mode: Mode,
    pub q: usize,
    pub refund_levels: usize,
    /// Largest distance moved by rounding the mechanism onto the lattice.
    pub rounding_error: f64,
    pub rounded: Mechanism,
    pub witness: Option<Mechanism>,
}

/// Nearest lattice mechanism and the rounding error; refuses when the grid
/// is not the type set, the mechanism is infeasible or a value lies more than
/// half a step off the lattice.
pub fn round_to_lattice(m: &Mechanism, inst: &DiscreteInstance) -> Result<(Mechanism, f64)> {
    inst.validate()?;
    if m.len() != inst.types.len()
        || m.grid()
            .iter()
            .zip(&inst.types)
            .any(|(g, t)| (g - t).abs() > ORACLE_TOL)
    {
        return Err(Error::Refused(
            "mechanism grid differs from the instance's type set".into(),
        ));
    }
    for (i, &y) in inst.types.iter().enumerate() {
        let cap = y + inst.env.tau;
        let (a, rp, re) = (m.a()[i], m.r_p()[i], m.r_empty()[i]);
        if !(0.0..=1.0).contains(&a) || !(0.0..=cap).contains(&rp) || !(0.0..=cap).contains(&re) {
            return Err(Error::Refused(format!(
                "mechanism is not feasible at type {y}"
            )));
        }
    }
    let mut error = 0.0f64;
    let mut snap = |v: f64, lattice: &[f64], step: f64, what: &str, y: f64| -> Result<f64> {
        let best = lattice
            .iter()
            .copied()
            .min_by(|p, q| (p - v).abs().total_cmp(&(q - v).abs()))
            .expect("lattices are non-empty");
        let err = (best - v).abs();
        if err > step / 2.0 + ORACLE_TOL {
            return Err(Error::Refused(format!(
                "{what} = {v} at type {y} is {err} from the lattice (half step {})",
                step / 2.0
            )));
        }
        error = error.max(err);
        Ok(best)
    };
    let probs = inst.prob_lattice();
    let prob_step = 1.0 / inst.q as f64;
    let (mut a, mut r_p, mut r_e) = (Vec::new(), Vec::new(), Vec::new());
    for (i, &y) in inst.types.iter().enumerate() {
        let refunds = inst.refund_lattice(y);
        let refund_step = if refunds.len() > 1 { refunds[1] } else { 0.0 };
        a.push(snap(m.a()[i], &probs, prob_step, "a", y)?);
        r_p.push(snap(m.r_p()[i], &refunds, refund_step, "r_p", y)?);
        r_e.push(snap(m.r_empty()[i], &refunds, refund_step, "r_empty", y)?);
    }
    Ok((Mechanism::new(inst.types.clone(), a, r_p, r_e)?, error))
}

/// Scans the lattice for a mechanism dominating `m` (after rounding) in the
/// chosen order. Dominance is certified only within the lattice.
pub fn is_undominated(
    m: &Mechanism,
    inst: &DiscreteInstance,
    mode: Mode,
) -> Result<DominanceReport> {
    let (rounded, rounding_error) = round_to_lattice(m, inst)?;
    let space = Space::new(inst)?;
    let n = inst.types.len();
    let loss = bruteforce_deviation_loss(&rounded);
    if (0..n).any(|i| rounded.revenue_at(i) > loss[i] + ORACLE_TOL) {
        return Err(Error::Refused(
            "the lattice-rounded mechanism is not IC on the type set".into(),
        ));
    }
    let revenue = rounded.revenue_table();
    let profit = rounded.profit_table(&inst.env)?;
    let a = rounded.a().to_vec();
    let tol = ORACLE_TOL;

    let found = match mode {
        Mode::Efficiency => {
            let accept = |i: usize, c: &Candidate, _: &[usize]| {
                c.a <= a[i] + tol && c.revenue >= revenue[i] - tol
            };
            let strict = |path: &[usize]| {
                path.iter().enumerate().any(|(i, &k)| {
                    let c = space.cand(i, k);
                    c.a < a[i] - tol || c.revenue > revenue[i] + tol
                })
            };
            space.find_first(&accept, &strict)
        }
        Mode::Tightness => {
            let own_loss = |i: usize, c: &Candidate, chosen: &[usize]| {
                space.lower_loss(i, chosen).min(space.term(i, i, c))
            };
            let accept = |i: usize, c: &Candidate, chosen: &[usize]| {
                c.profit >= profit[i] - tol && own_loss(i, c, chosen) >= loss[i] - tol
            };
            let strict = |path: &[usize]| {
                path.iter().enumerate().any(|(i, &k)| {
                    let c = space.cand(i, k);
                    c.profit > profit[i] + tol || own_loss(i, c, &path[..i]) > loss[i] + tol
                })
            };
            space.find_first(&accept, &strict)
        }
    };

    Ok(DominanceReport {
        verdict: if found.is_some() {
            OracleVerdict::Dominated
        } else {
            OracleVerdict::UndominatedWithinLattice
        },
        mode,
        q: inst.q,
        refund_levels: inst.refund_levels,
        rounding_error,
        rounded,
        witness: found.map(|path| space.mechanism(&path)),
    })
}

/// `λ_m` by explicit scan over every grid point `y <= x`.
pub fn bruteforce_deviation_loss(m: &Mechanism) -> Vec<f64> {
    let (g, a, r_e) = (m.grid(), m.a(), m.r_empty());
    g.iter()
        .map(|&x| {
            let mut best = f64::INFINITY;
            for j in 0..g.len() {
                if g[j] <= x {
                    best = best.min(a[j] * x + (1.0 - a[j]) * (g[j] - r_e[j]));
                }
            }
            best
        })
        .collect()
}
