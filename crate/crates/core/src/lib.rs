//! Construction, tightening and certification of audit mechanisms.
//!
//! An agent with surplus `x` in `[x_lo, x_hi]` advances `y <= x`; the principal
//! audits with probability `a(y)` and refunds `r_p(y)` after an audit or
//! `r_empty(y)` otherwise. Mechanisms are represented by tables on a grid.
//! Admissible deviation losses `λ` (increasing, concave, anchored, below the
//! identity) parameterise the efficient mechanisms: see [`constructor`],
//! [`tighten`] and [`certify`]. [`oracle`] brute-forces small discrete
//! instances.

pub mod audit_schedule;
pub mod certify;
pub mod constructor;
pub mod environment;
mod error;
pub mod lambda_space;
pub mod mechanism;
pub mod oracle;
pub mod pwl;
pub mod random;
pub mod report;
pub mod tighten;

pub use audit_schedule::AuditSchedule;
pub use certify::{Certificate, Comparison, Verdict};
pub use constructor::{build_efficient, DEFAULT_GRID};
pub use environment::{CostFn, CostKind, Environment};
pub use error::{Error, Result};
pub use lambda_space::{validate_lambda, LossFunction};
pub use mechanism::Mechanism;
pub use pwl::PwlFunction;
pub use tighten::{tighten, TightenReport};
