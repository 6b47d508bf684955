//! Certificates and the two dominance orders.
//!
//! A feasible IC mechanism is efficient exactly when its deviation loss is
//! admissible, its revenue equals its deviation loss and its audit probability
//! equals `max{alpha, beta}` of that loss. [`certify_efficient`] checks the
//! three clauses on the grid. For tightness only the necessary conditions are
//! checked; refund-pattern clauses are reported but never refute, since refunds
//! can be redefined without changing revenue, utility or audits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audit_schedule::AuditSchedule;
use crate::environment::Environment;
use crate::lambda_space::validate_lambda;
use crate::mechanism::{check_feasible, check_ic, Mechanism};
use crate::pwl::PwlFunction;
use crate::report::{CheckReport, Witness};
use crate::{Error, Result};

/// Tolerance of the certificate clauses.
pub const CERTIFY_TOL: f64 = 1e-8;
/// Tolerance of the pointwise comparisons.
pub const COMPARE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    CertifiedEfficient,
    SatisfiesTightnessNecessaryConditions,
    Refuted,
    /// The mechanism is not feasible and IC, so nothing can be concluded.
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClauseStatus {
    Pass,
    Fail,
    /// Flagged but not refuting.
    Informational,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClauseResult {
    pub name: String,
    pub status: ClauseStatus,
    pub violation_count: usize,
    pub witnesses: Vec<Witness>,
}

impl ClauseResult {
    fn from_report(report: CheckReport, on_failure: ClauseStatus) -> Self {
        Self {
            status: if report.passed {
                ClauseStatus::Pass
            } else {
                on_failure
            },
            name: report.name,
            violation_count: report.violation_count,
            witnesses: report.witnesses,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub verdict: Verdict,
    pub tolerance: f64,
    pub clauses: Vec<ClauseResult>,
}

impl Certificate {
    pub fn clause(&self, name: &str) -> Option<&ClauseResult> {
        self.clauses.iter().find(|c| c.name == name)
    }

    pub fn first_failure(&self) -> Option<&ClauseResult> {
        self.clauses.iter().find(|c| c.status == ClauseStatus::Fail)
    }
}

pub const CLAUSE_ADMISSIBLE: &str = "deviation-loss-admissible";
pub const CLAUSE_REVENUE: &str = "revenue-equals-deviation-loss";
pub const CLAUSE_AUDIT: &str = "audit-equals-schedule";
pub const CLAUSE_NO_AUDIT_REFUND: &str = "no-audit-refund-zero";
pub const CLAUSE_AUDIT_REFUND: &str = "audit-refund-maximal";

/// Feasibility and IC clauses; `None` when both pass.
fn precondition(m: &Mechanism, env: &Environment, tol: f64) -> Option<Certificate> {
    let feasible = check_feasible(m, env);
    let ic = check_ic(m, env);
    if feasible.passed && ic.passed {
        return None;
    }
    Some(Certificate {
        verdict: Verdict::Inconclusive,
        tolerance: tol,
        clauses: vec![
            ClauseResult::from_report(feasible, ClauseStatus::Fail),
            ClauseResult::from_report(ic, ClauseStatus::Fail),
        ],
    })
}

struct Core {
    clauses: Vec<ClauseResult>,
    schedule: AuditSchedule,
}

fn core_clauses(m: &Mechanism, env: &Environment, tol: f64) -> Result<Core> {
    let grid = m.grid();
    let mut loss = m.deviation_loss_table();

    let mut admissible = CheckReport::new(CLAUSE_ADMISSIBLE);
    // Snap the anchor and identity excesses within tolerance before the shape
    // test; larger excesses are left for the validator to reject.
    if (loss[0] - env.x_lo).abs() <= tol {
        loss[0] = env.x_lo;
    }
    for (l, &x) in loss.iter_mut().zip(grid) {
        if *l > x && *l <= x + tol {
            *l = x;
        }
    }
    let shape = PwlFunction::from_table(grid, &loss)?;
    match validate_lambda(&shape, env) {
        Ok(_) => {}
        Err(Error::InvalidLambda(violations)) => {
            for v in violations {
                admissible.record(Witness {
                    index: None,
                    x: v.x,
                    y: None,
                    detail: format!("{} violated by {:e}", v.clause, v.amount),
                });
            }
        }
        Err(e) => return Err(e),
    }

    let mut revenue = CheckReport::new(CLAUSE_REVENUE);
    for (i, (&x, &l)) in grid.iter().zip(&loss).enumerate() {
        let r = m.revenue_at(i);
        if (r - l).abs() > tol {
            revenue.record(Witness::at(
                i,
                x,
                format!("revenue {r} differs from deviation loss {l}"),
            ));
        }
    }

    let schedule = AuditSchedule::from_shape_unchecked(&shape, env);
    let target: Vec<f64> = {
        grid.par_iter()
            .map(|&y| schedule.alpha_unchecked(y).max(schedule.beta_unchecked(y)))
            .collect()
    };
    let mut audit = CheckReport::new(CLAUSE_AUDIT);
    for (i, (&y, &t)) in grid.iter().zip(&target).enumerate() {
        let a = m.a()[i];
        if (a - t).abs() > tol {
            audit.record(Witness::at(
                i,
                y,
                format!("a = {a} but max(alpha, beta) = {t}"),
            ));
        }
    }

    Ok(Core {
        clauses: vec![
            ClauseResult::from_report(admissible, ClauseStatus::Fail),
            ClauseResult::from_report(revenue, ClauseStatus::Fail),
            ClauseResult::from_report(audit, ClauseStatus::Fail),
        ],
        schedule,
    })
}

pub fn certify_efficient(m: &Mechanism, env: &Environment) -> Result<Certificate> {
    certify_efficient_with(m, env, CERTIFY_TOL)
}

pub fn certify_efficient_with(m: &Mechanism, env: &Environment, tol: f64) -> Result<Certificate> {
    if let Some(cert) = precondition(m, env, tol) {
        return Ok(cert);
    }
    let core = core_clauses(m, env, tol)?;
    let verdict = if core.clauses.iter().all(|c| c.status == ClauseStatus::Pass) {
        Verdict::CertifiedEfficient
    } else {
        Verdict::Refuted
    };
    Ok(Certificate {
        verdict,
        tolerance: tol,
        clauses: core.clauses,
    })
}

/// The efficiency clauses plus the refund patterns: `r_empty = 0` where
/// `alpha > beta`, `r_p = y + τ` where `beta > alpha` and `a > 0`.
pub fn certify_tight_necessary(m: &Mechanism, env: &Environment) -> Result<Certificate> {
    certify_tight_necessary_with(m, env, CERTIFY_TOL)
}

pub fn certify_tight_necessary_with(
    m: &Mechanism,
    env: &Environment,
    tol: f64,
) -> Result<Certificate> {
    if let Some(cert) = precondition(m, env, tol) {
        return Ok(cert);
    }
    let Core {
        mut clauses,
        schedule,
    } = core_clauses(m, env, tol)?;
    let refuted = clauses.iter().any(|c| c.status == ClauseStatus::Fail);

    let mut no_audit = CheckReport::new(CLAUSE_NO_AUDIT_REFUND);
    let mut maximal = CheckReport::new(CLAUSE_AUDIT_REFUND);
    for (i, &y) in m.grid().iter().enumerate() {
        let (alpha, beta) = (schedule.alpha_unchecked(y), schedule.beta_unchecked(y));
        if alpha > beta + tol && m.r_empty()[i] > tol {
            no_audit.record(Witness::at(
                i,
                y,
                format!("alpha > beta but r_empty = {}", m.r_empty()[i]),
            ));
        }
        let cap = y + env.tau;
        if beta > alpha + tol && m.a()[i] > tol && m.r_p()[i] < cap - tol {
            maximal.record(Witness::at(
                i,
                y,
                format!("beta > alpha but r_p = {} < {cap}", m.r_p()[i]),
            ));
        }
    }
    clauses.push(ClauseResult::from_report(
        no_audit,
        ClauseStatus::Informational,
    ));
    clauses.push(ClauseResult::from_report(
        maximal,
        ClauseStatus::Informational,
    ));

    Ok(Certificate {
        verdict: if refuted {
            Verdict::Refuted
        } else {
            Verdict::SatisfiesTightnessNecessaryConditions
        },
        tolerance: tol,
        clauses,
    })
}

/// Outcome of a pointwise comparison of `m_star` against `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Comparison {
    /// `m_star` is weakly better everywhere and strictly somewhere.
    Better,
    Worse,
    Equal,
    Incomparable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Efficiency,
    Tightness,
}

impl Comparison {
    pub fn label(self, order: Order) -> &'static str {
        match (self, order) {
            (Comparison::Better, Order::Efficiency) => "more-efficient",
            (Comparison::Worse, Order::Efficiency) => "less-efficient",
            (Comparison::Better, Order::Tightness) => "tighter",
            (Comparison::Worse, Order::Tightness) => "less-tight",
            (Comparison::Equal, _) => "equal",
            (Comparison::Incomparable, _) => "incomparable",
        }
    }
}

/// Index pairs of the points shared by two grids; one grid must contain the
/// other.
pub fn shared_points(g1: &[f64], g2: &[f64]) -> Result<Vec<(usize, usize)>> {
    let mut pairs = Vec::with_capacity(g1.len().min(g2.len()));
    let (mut i, mut j) = (0, 0);
    while i < g1.len() && j < g2.len() {
        if g1[i] == g2[j] {
            pairs.push((i, j));
            i += 1;
            j += 1;
        } else if g1[i] < g2[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    if pairs.len() != g1.len().min(g2.len()) {
        return Err(Error::GridMismatch(format!(
            "neither grid contains the other ({} of {} points shared)",
            pairs.len(),
            g1.len().min(g2.len())
        )));
    }
    Ok(pairs)
}

/// Classifies differences oriented so that positive means `m_star` is better.
fn classify(gains: impl Iterator<Item = f64>, tol: f64) -> Comparison {
    let (mut better, mut worse) = (false, false);
    for d in gains {
        better |= d > tol;
        worse |= d < -tol;
    }
    match (better, worse) {
        (false, false) => Comparison::Equal,
        (true, false) => Comparison::Better,
        (false, true) => Comparison::Worse,
        (true, true) => Comparison::Incomparable,
    }
}

/// Higher revenue and lower audit probability is better.
pub fn compare_efficiency(
    m_star: &Mechanism,
    m: &Mechanism,
    _env: &Environment,
) -> Result<Comparison> {
    let pairs = shared_points(m_star.grid(), m.grid())?;
    let gains = pairs.iter().flat_map(|&(i, j)| {
        [
            m_star.revenue_at(i) - m.revenue_at(j),
            m.a()[j] - m_star.a()[i],
        ]
    });
    Ok(classify(gains, COMPARE_TOL))
}

/// Higher profit and higher deviation loss is better.
pub fn compare_tightness(
    m_star: &Mechanism,
    m: &Mechanism,
    env: &Environment,
) -> Result<Comparison> {
    let pairs = shared_points(m_star.grid(), m.grid())?;
    let (p1, p2) = (m_star.profit_table(env)?, m.profit_table(env)?);
    let (l1, l2) = (m_star.deviation_loss_table(), m.deviation_loss_table());
    let gains = pairs
        .iter()
        .flat_map(|&(i, j)| [p1[i] - p2[j], l1[i] - l2[j]]);
    Ok(classify(gains, COMPARE_TOL))
}
