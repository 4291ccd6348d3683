//! Exponent algebra for `u_t - Δ_p u + |∇u|^q = 0` and the closed-form barriers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, RangeViolation, Result};

/// Validated `(p, q, N)` with every derived exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentSet {
    pub p: f64,
    pub q: f64,
    #[serde(rename = "N")]
    pub n: u32,
    pub p_c: f64,
    pub q_star: f64,
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
    pub gamma: f64,
    pub tail_barrier_exp: f64,
    pub tail_profile_exp: f64,
}

/// Checks `p_c < p < 2` and `p/2 < q < q_*`.
pub fn check_range(p: f64, q: f64, n: u32) -> std::result::Result<(), RangeViolation> {
    if !p.is_finite() || !q.is_finite() {
        return Err(RangeViolation::NonFinite);
    }
    if n == 0 {
        return Err(RangeViolation::DimensionZero);
    }
    let nf = n as f64;
    let p_c = 2.0 * nf / (nf + 1.0);
    if p <= p_c {
        return Err(RangeViolation::PBelowCritical { p, n });
    }
    if p >= 2.0 {
        return Err(RangeViolation::PAboveTwo { p });
    }
    if q <= p / 2.0 {
        return Err(RangeViolation::QBelowHalfP { q, p });
    }
    let q_star = p - nf / (nf + 1.0);
    if q >= q_star {
        return Err(RangeViolation::QAboveQStar { q, q_star });
    }
    Ok(())
}

/// Builds the full exponent bundle, rejecting inadmissible triples.
pub fn derive_exponents(p: f64, q: f64, n: u32) -> Result<ExponentSet> {
    check_range(p, q, n).map_err(Error::Range)?;
    let nf = n as f64;
    let alpha = (p - q) / (2.0 * q - p);
    let beta = (q - p + 1.0) / (2.0 * q - p);
    let eta = 1.0 / (nf * (p - 2.0) + p);
    let gamma = (q - p + 1.0) / (p - q) * ((p - 1.0) / (q - p + 1.0)).powf(1.0 / (q - p + 1.0));
    Ok(ExponentSet {
        p,
        q,
        n,
        p_c: 2.0 * nf / (nf + 1.0),
        q_star: p - nf / (nf + 1.0),
        alpha,
        beta,
        eta,
        gamma,
        tail_barrier_exp: (p - q) / (q - p + 1.0),
        tail_profile_exp: p / (2.0 - p),
    })
}

impl ExponentSet {
    pub fn nf(&self) -> f64 {
        self.n as f64
    }

    /// `α − Nβ`, the decay exponent of the L¹ norm along self-similar solutions.
    pub fn mass_exponent(&self) -> f64 {
        self.alpha - self.nf() * self.beta
    }

    /// `(N+1)(q_* − q)η`, the small-time rate of the absorption effect.
    pub fn small_time_exponent(&self) -> f64 {
        (self.nf() + 1.0) * (self.q_star - self.q) * self.eta
    }

    /// `|S^{N−1}|`, with `|S^0| = 2`.
    pub fn sphere_area(&self) -> f64 {
        sphere_area(self.n)
    }
}

/// Surface measure of the unit sphere in `R^n`.
pub fn sphere_area(n: u32) -> f64 {
    let half = n as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(half) / gamma_fn(half)
}

fn gamma_fn(x: f64) -> f64 {
    // Exact for the half-integers used here.
    if (x - x.round()).abs() < 1e-12 {
        (1..x.round() as u64).map(|k| k as f64).product()
    } else {
        let mut acc = std::f64::consts::PI.sqrt();
        let mut y = 0.5;
        while y < x - 0.25 {
            acc *= y;
            y += 1.0;
        }
        acc
    }
}

/// Stationary barrier `Γ(r) = γ r^{−α/β}`.
pub fn friendly_giant(exps: &ExponentSet, r: f64) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("friendly_giant needs r > 0, got {r}")));
    }
    Ok(exps.gamma * r.powf(-exps.tail_barrier_exp))
}

/// Radial torsion function of the ball of radius `rho`: `−Δ_p σ = 1`, `σ(rho) = 0`.
pub fn torsion_value(p: f64, n: u32, rho: f64, d: f64) -> Result<f64> {
    if !(p > 1.0 && p < 2.0) {
        return Err(Error::Domain(format!("torsion needs 1 < p < 2, got {p}")));
    }
    if n == 0 || !(rho > 0.0) {
        return Err(Error::Domain("torsion needs N ≥ 1 and rho > 0".into()));
    }
    if !(0.0..=rho).contains(&d) {
        return Err(Error::Domain(format!("distance {d} outside [0, {rho}]")));
    }
    let e = p / (p - 1.0);
    Ok((p - 1.0) / p * (n as f64).powf(-1.0 / (p - 1.0)) * (rho.powf(e) - d.powf(e)))
}
