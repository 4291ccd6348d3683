//! Source-type solution of the pure diffusion problem `u_t = Δ_p u`:
//! `B(t, r) = t^{−Nη} (C + k ξ^{p/(p−1)})^{−(p−1)/(2−p)}`, `ξ = r t^{−η}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ExponentSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Barenblatt {
    pub mass: f64,
    pub c: f64,
    pub k: f64,
    p: f64,
    eta: f64,
    nf: f64,
}

impl Barenblatt {
    pub fn new(exps: &ExponentSet, mass: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::Domain(format!("source mass must be positive, got {mass}")));
        }
        let p = exps.p;
        let nf = exps.nf();
        let m = p / (p - 1.0);
        let g = (p - 1.0) / (2.0 - p);
        let k = (2.0 - p) / p * exps.eta.powf(1.0 / (p - 1.0));
        // ∫ ξ^{N−1}(1 + ξ^m)^{−g} dξ = B(N/m, g − N/m)/m
        let (a, b) = (nf / m, g - nf / m);
        let beta = (libm::lgamma(a) + libm::lgamma(b) - libm::lgamma(a + b)).exp();
        let unit = exps.sphere_area() * beta / m;
        // mass = unit · (C/k)^{N/m} · C^{−g}
        let c = (mass * k.powf(nf / m) / unit).powf(1.0 / (nf / m - g));
        Ok(Self {
            mass,
            c,
            k,
            p,
            eta: exps.eta,
            nf,
        })
    }

    /// Self-similar profile `F(ξ)`.
    pub fn profile(&self, xi: f64) -> f64 {
        let m = self.p / (self.p - 1.0);
        let g = (self.p - 1.0) / (2.0 - self.p);
        (self.c + self.k * xi.abs().powf(m)).powf(-g)
    }

    pub fn eval(&self, t: f64, r: f64) -> f64 {
        t.powf(-self.nf * self.eta) * self.profile(r * t.powf(-self.eta))
    }

    /// Radius in `ξ` where the profile has dropped to `2^{−g}` of its peak.
    pub fn width(&self) -> f64 {
        (self.c / self.k).powf((self.p - 1.0) / self.p)
    }

    /// Age at which the physical width equals `w`.
    pub fn age_for_width(&self, w: f64) -> f64 {
        (w / self.width()).powf(1.0 / self.eta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RadialGrid;
    use crate::params::derive_exponents;

    #[test]
    fn carries_its_mass() {
        for (p, q, n) in [(1.6, 0.85, 2), (1.5, 0.8, 1), (1.9, 0.97, 3)] {
            let e = derive_exponents(p, q, n).unwrap();
            let b = Barenblatt::new(&e, 2.5).unwrap();
            let w = b.width();
            let g = RadialGrid::graded(n, w * 1e-3, 1e-3, w * 1e7).unwrap();
            let u: Vec<f64> = g.nodes.iter().map(|&r| b.eval(1.0, r)).collect();
            let m = g.integrate(&u);
            assert!((m - 2.5).abs() < 2e-3 * 2.5, "{p} {q} {n}: {m}");
        }
    }

    #[test]
    fn solves_the_profile_equation() {
        // Radial −(ξ^{N−1}|F'|^{p−2}F')' = ξ^{N−1} η (N F + ξ F') by central differences.
        let e = derive_exponents(1.6, 0.85, 2).unwrap();
        let b = Barenblatt::new(&e, 1.0).unwrap();
        let n = e.nf();
        let h = 1e-4;
        let w = |x: f64| {
            let d = (b.profile(x + h) - b.profile(x - h)) / (2.0 * h);
            x.powf(n - 1.0) * d.abs().powf(e.p - 2.0) * d
        };
        for xi in [0.3, 1.0, 2.0, 5.0] {
            let lhs = -(w(xi + h) - w(xi - h)) / (2.0 * h);
            let d = (b.profile(xi + h) - b.profile(xi - h)) / (2.0 * h);
            let rhs = xi.powf(n - 1.0) * e.eta * (n * b.profile(xi) + xi * d);
            assert!((lhs - rhs).abs() < 1e-5 * rhs.abs().max(lhs.abs()), "xi {xi}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn mass_scaling() {
        // Height ∝ M^{pη}, width ∝ M^{−(2−p)η}.
        let e = derive_exponents(1.6, 0.85, 2).unwrap();
        let b1 = Barenblatt::new(&e, 1.0).unwrap();
        let b4 = Barenblatt::new(&e, 4.0).unwrap();
        assert!((b4.profile(0.0) / b1.profile(0.0) - 4f64.powf(e.p * e.eta)).abs() < 1e-10);
        assert!((b4.width() / b1.width() - 4f64.powf(-(2.0 - e.p) * e.eta)).abs() < 1e-10);
    }
}
