use std::fmt;

use thiserror::Error;

/// Which admissibility bound a parameter triple violates.
#[derive(Debug, Clone, PartialEq)]
pub enum RangeViolation {
    NonFinite,
    DimensionZero,
    PBelowCritical { p: f64, n: u32 },
    PAboveTwo { p: f64 },
    QBelowHalfP { q: f64, p: f64 },
    QAboveQStar { q: f64, q_star: f64 },
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn critical_fraction(n: u32) -> String {
    let (num, den) = (2 * n, n + 1);
    let g = gcd(num, den);
    if den / g == 1 {
        format!("{}", num / g)
    } else {
        format!("{}/{}", num / g, den / g)
    }
}

impl fmt::Display for RangeViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RangeViolation::NonFinite => write!(f, "p and q must be finite"),
            RangeViolation::DimensionZero => write!(f, "N must be at least 1"),
            RangeViolation::PBelowCritical { p, n } => {
                write!(f, "p ≤ p_c = {} (p = {p})", critical_fraction(*n))
            }
            RangeViolation::PAboveTwo { p } => write!(f, "p ≥ 2 (p = {p})"),
            RangeViolation::QBelowHalfP { q, p } => {
                write!(f, "q ≤ p/2 = {} (q = {q})", p / 2.0)
            }
            RangeViolation::QAboveQStar { q, q_star } => {
                write!(f, "q ≥ q_* = {q_star} (q = {q})")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("inadmissible exponents: {0}")]
    Range(RangeViolation),
    #[error("argument outside the domain: {0}")]
    Domain(String),
    #[error("series start near the origin is not self-consistent: {0}")]
    SeriesStart(String),
    #[error("adaptive step size underflow at t = {t:e} (h = {h:e})")]
    StepFailure { t: f64, h: f64 },
    #[error("no valid shooting bracket: {0}")]
    Bracket(String),
    #[error("tail fit failed: {0}")]
    TailFit(String),
    #[error("invalid initial condition: {0}")]
    Spec(String),
    #[error("time step underflow at t = {t:e} (dt = {dt:e})")]
    Stability { t: f64, dt: f64 },
    #[error("step budget of {steps} steps exhausted at t = {t:e}")]
    StepBudget { t: f64, steps: u64 },
    #[error("solution dropped to {value:e} at r = {r:e}, t = {t:e}")]
    Negativity { t: f64, r: f64, value: f64 },
    #[error("inconclusive: {0}")]
    Inconclusive(String),
    #[error("configuration error at `{path}`: {msg}")]
    Config { path: String, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
