//! Explicit finite-volume evolution of the radial equation in physical or
//! self-similar variables.
//!
//! In a frame `(a, b, T0)` the unknown is `v(s, y)` with
//! `u(t, r) = τ^{−a} v(s, r τ^{−b})`, `τ = t + T0 = T0 e^s`, and
//! `v_s = a v + b y v_y + τ^{e_d} Δ_p v − τ^{e_a} |v_y|^q`.

use serde::{Deserialize, Serialize};

use crate::barenblatt::Barenblatt;
use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::params::{friendly_giant, sphere_area, ExponentSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    ForwardEuler,
    SspRk2,
    SspRk3,
}

/// Discretization of the frame drift `b y v_y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Drift {
    /// Second-order three-point centered difference.
    Centered,
    /// First-order forward (upwind for the inward drift).
    Upwind,
    /// `a v + b y v_y = (a − N b) v + b ∇·(y v)` with face-averaged transport fluxes.
    Conservative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Dirichlet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub eps_reg: f64,
    pub cfl_safety: f64,
    pub absorption_on: bool,
    pub boundary: Boundary,
    pub integrator: Integrator,
    pub drift: Drift,
    /// Relative undershoot below zero tolerated before `NegativityError`.
    pub neg_tol: f64,
    pub dt_min: f64,
    /// Step budget per evolution call.
    pub max_steps: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eps_reg: 1e-14,
            cfl_safety: 0.8,
            absorption_on: true,
            boundary: Boundary::Dirichlet,
            integrator: Integrator::SspRk2,
            drift: Drift::Conservative,
            neg_tol: 1e-8,
            dt_min: 1e-16,
            max_steps: 20_000_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_reg > 0.0) {
            return Err(Error::Config {
                path: "solver.eps_reg".into(),
                msg: format!("must be positive, got {}", self.eps_reg),
            });
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::Config {
                path: "solver.cfl_safety".into(),
                msg: format!("must lie in (0, 1], got {}", self.cfl_safety),
            });
        }
        Ok(())
    }
}

/// Change of variables between physical `(t, r, u)` and frame `(s, y, v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Frame {
    Physical,
    Similarity { a: f64, b: f64, t0: f64 },
}

impl Frame {
    /// `(α, β)` scaling with `τ = 1 + t`: the rescaled equation has constant coefficients.
    pub fn rescaled(exps: &ExponentSet) -> Self {
        Frame::Similarity {
            a: exps.alpha,
            b: exps.beta,
            t0: 1.0,
        }
    }

    pub fn rescaled_from(exps: &ExponentSet, t0: f64) -> Self {
        Frame::Similarity {
            a: exps.alpha,
            b: exps.beta,
            t0,
        }
    }

    /// `(Nη, η)` scaling: mass preserving, absorption weighted by `τ^{(N+1)(q_*−q)η}`.
    pub fn diffusive(exps: &ExponentSet, t0: f64) -> Self {
        Frame::Similarity {
            a: exps.nf() * exps.eta,
            b: exps.eta,
            t0,
        }
    }

    fn ab(&self) -> (f64, f64) {
        match *self {
            Frame::Physical => (0.0, 0.0),
            Frame::Similarity { a, b, .. } => (a, b),
        }
    }

    /// `τ` at frame time `s` (1 in the physical frame).
    pub fn tau(&self, s: f64) -> f64 {
        match *self {
            Frame::Physical => 1.0,
            Frame::Similarity { t0, .. } => t0 * s.exp(),
        }
    }

    pub fn physical_time(&self, s: f64) -> f64 {
        match *self {
            Frame::Physical => s,
            Frame::Similarity { t0, .. } => t0 * s.exp_m1(),
        }
    }

    pub fn frame_time(&self, t: f64) -> f64 {
        match *self {
            Frame::Physical => t,
            Frame::Similarity { t0, .. } => (t / t0).ln_1p(),
        }
    }

    /// Physical radius of frame coordinate `y` at frame time `s`.
    pub fn radius(&self, s: f64, y: f64) -> f64 {
        let (_, b) = self.ab();
        y * self.tau(s).powf(b)
    }

    pub fn coordinate(&self, s: f64, r: f64) -> f64 {
        let (_, b) = self.ab();
        r * self.tau(s).powf(-b)
    }

    /// Physical value from frame value.
    pub fn value(&self, s: f64, v: f64) -> f64 {
        let (a, _) = self.ab();
        v * self.tau(s).powf(-a)
    }

    pub fn frame_value(&self, s: f64, u: f64) -> f64 {
        let (a, _) = self.ab();
        u * self.tau(s).powf(a)
    }

    fn mass_factor(&self, s: f64, n: u32) -> f64 {
        let (a, b) = self.ab();
        self.tau(s).powf(n as f64 * b - a)
    }

    fn grad_factor(&self, s: f64) -> f64 {
        let (a, b) = self.ab();
        self.tau(s).powf(-a - b)
    }

    /// `(τ^{e_d}, τ^{e_a})`.
    fn coefficients(&self, exps: &ExponentSet, s: f64) -> (f64, f64) {
        match *self {
            Frame::Physical => (1.0, 1.0),
            Frame::Similarity { a, b, .. } => {
                let tau = self.tau(s);
                let ed = 1.0 + a * (2.0 - exps.p) - b * exps.p;
                let ea = 1.0 + a - (a + b) * exps.q;
                (pow_or_one(tau, ed), pow_or_one(tau, ea))
            }
        }
    }
}

/// Peak of the power bump: `mass / (w^N |S^{N−1}| B(N/2, (θ−N)/2)/2)`.
pub fn power_bump_height(n: u32, mass: f64, width: f64, theta: f64) -> f64 {
    let a = n as f64 / 2.0;
    let b = (theta - n as f64) / 2.0;
    let beta = (libm::lgamma(a) + libm::lgamma(b) - libm::lgamma(a + b)).exp();
    mass / (width.powi(n as i32) * sphere_area(n) * 0.5 * beta)
}

fn pow_or_one(x: f64, e: f64) -> f64 {
    if e.abs() < 1e-13 {
        1.0
    } else {
        x.powf(e)
    }
}

/// Initial data `u_0(r)` in physical variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    Zero,
    /// `h·exp(−(r/w)²)`.
    Bump { height: f64, width: f64 },
    /// Gaussian bump normalized to total mass `mass`.
    MassBump { mass: f64, width: f64 },
    /// `c(1 + (r/w)²)^{−θ/2}` normalized to total mass `mass`; needs `θ > N`.
    PowerBump { mass: f64, width: f64, theta: f64 },
    /// Pure-diffusion source solution of mass `mass` at age `age`.
    Source { mass: f64, age: f64 },
    /// `min(h, κ r^{−α/β−δ})`.
    TruncatedPower { height: f64, kappa: f64, delta: f64 },
    /// `h(1 + (r/w)²)^{−θ/2}`, integrable for `θ > N`.
    FatTail { height: f64, width: f64, theta: f64 },
    /// `min(h, Γ(r − offset))`, equal to `h` on `r ≤ offset`.
    BarrierCapped { height: f64, offset: f64 },
    /// Piecewise-linear through `(r, u)` samples, zero past the last one.
    Sampled { r: Vec<f64>, u: Vec<f64> },
}

impl InitialCondition {
    pub fn validate(&self, exps: &ExponentSet) -> Result<()> {
        let bad = |m: String| Err(Error::Spec(m));
        let pos = |name: &str, x: f64| -> Result<()> {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::Spec(format!("{name} must be positive and finite, got {x}")))
            }
        };
        match self {
            InitialCondition::Zero => Ok(()),
            InitialCondition::Bump { height, width } => {
                pos("width", *width)?;
                if !(*height >= 0.0) || !height.is_finite() {
                    return bad(format!("bump height must be nonnegative, got {height}"));
                }
                Ok(())
            }
            InitialCondition::MassBump { mass, width } => {
                pos("width", *width)?;
                if !(*mass >= 0.0) || !mass.is_finite() {
                    return bad(format!("bump mass must be nonnegative, got {mass}"));
                }
                Ok(())
            }
            InitialCondition::PowerBump { mass, width, theta } => {
                pos("mass", *mass)?;
                pos("width", *width)?;
                if !(*theta > exps.nf()) {
                    return bad(format!("power bump needs θ > N for integrability, got θ = {theta}"));
                }
                Ok(())
            }
            InitialCondition::Source { mass, age } => {
                pos("mass", *mass)?;
                pos("age", *age)
            }
            InitialCondition::TruncatedPower { height, kappa, delta } => {
                pos("height", *height)?;
                pos("kappa", *kappa)?;
                if !(*delta > 0.0) {
                    return bad(format!(
                        "truncated power needs δ > 0 so that |x|^(α/β) u0 → 0, got δ = {delta}"
                    ));
                }
                Ok(())
            }
            InitialCondition::FatTail { height, width, theta } => {
                pos("height", *height)?;
                pos("width", *width)?;
                if !(*theta > exps.nf()) {
                    return bad(format!("fat tail needs θ > N for integrability, got θ = {theta}"));
                }
                Ok(())
            }
            InitialCondition::BarrierCapped { height, offset } => {
                pos("height", *height)?;
                if !(*offset >= 0.0) {
                    return bad(format!("barrier offset must be nonnegative, got {offset}"));
                }
                Ok(())
            }
            InitialCondition::Sampled { r, u } => {
                if r.len() != u.len() || r.len() < 2 {
                    return bad("sampled profile needs matching r/u arrays of length ≥ 2".into());
                }
                if r.windows(2).any(|w| !(w[1] > w[0])) {
                    return bad("sampled radii must be strictly increasing".into());
                }
                if u.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
                    return bad("sampled values must be finite and nonnegative".into());
                }
                Ok(())
            }
        }
    }

    /// Whether `|x|^{α/β} u_0(x) → 0` holds.
    pub fn decays_faster_than_barrier(&self, exps: &ExponentSet) -> bool {
        match self {
            InitialCondition::FatTail { theta, .. } | InitialCondition::PowerBump { theta, .. } => {
                *theta > exps.tail_barrier_exp
            }
            InitialCondition::BarrierCapped { .. } => false,
            _ => true,
        }
    }

    pub fn eval(&self, exps: &ExponentSet, r: f64) -> f64 {
        match self {
            InitialCondition::Zero => 0.0,
            InitialCondition::Bump { height, width } => height * (-(r / width).powi(2)).exp(),
            InitialCondition::MassBump { mass, width } => {
                let h = mass / (std::f64::consts::PI.powf(exps.nf() / 2.0) * width.powi(exps.n as i32));
                h * (-(r / width).powi(2)).exp()
            }
            InitialCondition::PowerBump { mass, width, theta } => {
                power_bump_height(exps.n, *mass, *width, *theta) * (1.0 + (r / width).powi(2)).powf(-theta / 2.0)
            }
            InitialCondition::Source { mass, age } => match Barenblatt::new(exps, *mass) {
                Ok(b) => b.eval(*age, r),
                Err(_) => 0.0,
            },
            InitialCondition::TruncatedPower { height, kappa, delta } => {
                if r == 0.0 {
                    *height
                } else {
                    height.min(kappa * r.powf(-exps.tail_barrier_exp - delta))
                }
            }
            InitialCondition::FatTail { height, width, theta } => {
                height * (1.0 + (r / width).powi(2)).powf(-theta / 2.0)
            }
            InitialCondition::BarrierCapped { height, offset } => {
                if r <= *offset {
                    *height
                } else {
                    height.min(friendly_giant(exps, r - offset).unwrap_or(f64::INFINITY))
                }
            }
            InitialCondition::Sampled { r: rs, u } => {
                if r > *rs.last().unwrap() {
                    return 0.0;
                }
                if r <= rs[0] {
                    return u[0];
                }
                let i = rs.partition_point(|&x| x <= r) - 1;
                if i + 1 >= rs.len() {
                    return u[i];
                }
                let s = (r - rs[i]) / (rs[i + 1] - rs[i]);
                u[i] + s * (u[i + 1] - u[i])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialState {
    /// Frame time.
    pub s: f64,
    /// Physical time.
    pub t: f64,
    /// Nodal values of the frame unknown.
    pub u: Vec<f64>,
    pub steps: u64,
}

/// One row of a run log, in physical units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub s: f64,
    pub t: f64,
    pub mass: f64,
    pub sup_norm: f64,
    pub grad_sup_norm: f64,
    pub tail_masses: Vec<Option<f64>>,
    /// `tail_mass(0.9·R_max) > 1e-6·mass` in frame variables.
    pub contaminated: bool,
}

/// Observation plan for [`Solver::evolve_until`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Observers {
    /// Frame times at which to record; steps are clipped to hit them.
    pub times: Vec<f64>,
    /// Physical radii for tail-mass records.
    pub tail_radii: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Solver {
    pub exps: ExponentSet,
    pub grid: RadialGrid,
    pub config: SolverConfig,
    pub frame: Frame,
    area_face: Vec<f64>,
    inv_dr: Vec<f64>,
    face_gain: Vec<f64>,
    inv_vol: Vec<f64>,
    inv_span: Vec<f64>,
    /// Three-point weights of the second-order first derivative at each node.
    deriv: Vec<[f64; 3]>,
}

struct Work {
    l: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
}

impl Solver {
    pub fn new(exps: ExponentSet, grid: RadialGrid, config: SolverConfig, frame: Frame) -> Result<Self> {
        config.validate()?;
        if grid.n != exps.n {
            return Err(Error::Domain(format!(
                "grid dimension {} differs from N = {}",
                grid.n, exps.n
            )));
        }
        let k = grid.len() - 1;
        let area = sphere_area(grid.n);
        let area_face = (0..k)
            .map(|i| area * grid.faces[i].powi(grid.n as i32 - 1))
            .collect();
        let inv_dr = (0..k).map(|i| 1.0 / (grid.nodes[i + 1] - grid.nodes[i])).collect();
        // Face gradients exact for fluxes w ∝ r, the local form at a radial maximum.
        let m = exps.p / (exps.p - 1.0);
        let face_gain = (0..k)
            .map(|i| {
                let (r0, r1, rf) = (grid.nodes[i], grid.nodes[i + 1], grid.faces[i]);
                let scale = r1;
                let (x0, x1, xf) = (r0 / scale, r1 / scale, rf / scale);
                m * xf.powf(1.0 / (exps.p - 1.0)) * (x1 - x0) / (x1.powf(m) - x0.powf(m))
            })
            .collect();
        let inv_vol = grid.volumes.iter().map(|v| 1.0 / v).collect();
        let inv_span = (0..=k)
            .map(|i| {
                if i == 0 || i == k {
                    0.0
                } else {
                    1.0 / (grid.nodes[i + 1] - grid.nodes[i - 1])
                }
            })
            .collect();
        let deriv = (0..=k)
            .map(|i| {
                if i == 0 || i == k {
                    return [0.0; 3];
                }
                let dm = grid.nodes[i] - grid.nodes[i - 1];
                let dp = grid.nodes[i + 1] - grid.nodes[i];
                [
                    -dp / (dm * (dm + dp)),
                    (dp - dm) / (dm * dp),
                    dm / (dp * (dm + dp)),
                ]
            })
            .collect();
        Ok(Self {
            exps,
            grid,
            config,
            frame,
            area_face,
            inv_dr,
            face_gain,
            inv_vol,
            inv_span,
            deriv,
        })
    }

    /// Samples `u_0` at frame time 0: `v(0, y) = T0^a u_0(y T0^b)`.
    pub fn init_state(&self, u0: &InitialCondition) -> Result<RadialState> {
        u0.validate(&self.exps)?;
        let k = self.grid.len() - 1;
        let u = self
            .grid
            .nodes
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                if i == k {
                    0.0
                } else {
                    self.frame
                        .frame_value(0.0, u0.eval(&self.exps, self.frame.radius(0.0, y)))
                }
            })
            .collect();
        Ok(RadialState {
            s: 0.0,
            t: 0.0,
            u,
            steps: 0,
        })
    }

    fn flux(&self, g: f64) -> (f64, f64) {
        let p = self.exps.p;
        let e2 = self.config.eps_reg * self.config.eps_reg;
        let t = g * g + e2;
        let w = t.powf(0.5 * (p - 4.0));
        (w * t * g, w * ((p - 1.0) * g * g + e2))
    }

    /// Semi-discrete right-hand side; returns the largest stiffness rate.
    fn operator(&self, v: &[f64], s: f64, out: &mut [f64], face: &mut [(f64, f64)]) -> f64 {
        self.operator_with_rates(v, s, out, face, None)
    }

    fn operator_with_rates(
        &self,
        v: &[f64],
        s: f64,
        out: &mut [f64],
        face: &mut [(f64, f64)],
        mut rates: Option<&mut [f64]>,
    ) -> f64 {
        let k = v.len() - 1;
        let (cd, ca) = self.frame.coefficients(&self.exps, s);
        let (fa, fb) = self.frame.ab();
        let q = self.exps.q;
        let eps = self.config.eps_reg;
        for i in 0..k {
            let gain = self.face_gain[i];
            let g = (v[i + 1] - v[i]) * self.inv_dr[i] * gain;
            let (phi, dphi) = self.flux(g);
            face[i] = (self.area_face[i] * phi, self.area_face[i] * dphi * gain * self.inv_dr[i]);
        }
        let mut rate: f64 = 0.0;
        for i in 0..k {
            let (fr, dr) = face[i];
            let (fl, dl) = if i == 0 { (0.0, 0.0) } else { face[i - 1] };
            let mut rhs = cd * (fr - fl) * self.inv_vol[i];
            let mut ri = cd * (dr + dl) * self.inv_vol[i];
            if self.config.absorption_on && i > 0 {
                let gm = (v[i] - v[i - 1]) * self.inv_dr[i - 1];
                let gp = (v[i + 1] - v[i]) * self.inv_dr[i];
                let (mag, inv_len) = if gm * gp > 0.0 {
                    let d = self.deriv[i];
                    (
                        (d[0] * v[i - 1] + d[1] * v[i] + d[2] * v[i + 1]).abs(),
                        2.0 * self.inv_span[i],
                    )
                } else {
                    // Godunov upwinding at extrema.
                    let up = gm.max(0.0).max(-gp.min(0.0));
                    (up, self.inv_dr[i - 1].max(self.inv_dr[i]))
                };
                let h = mag.powf(q);
                rhs -= ca * h;
                ri += ca * q * mag.max(eps).powf(q - 1.0) * inv_len;
            }
            match self.config.drift {
                Drift::Conservative => {
                    let flux = |j: usize| self.area_face[j] * self.grid.faces[j] * 0.5 * (v[j] + v[j + 1]);
                    let (tr, tl) = (flux(i), if i == 0 { 0.0 } else { flux(i - 1) });
                    let shift = fa - self.grid.n as f64 * fb;
                    rhs += fb * (tr - tl) * self.inv_vol[i] + shift * v[i];
                    let cr = self.area_face[i] * self.grid.faces[i];
                    let cl = if i == 0 { 0.0 } else { self.area_face[i - 1] * self.grid.faces[i - 1] };
                    ri += fb.abs() * 0.5 * (cr + cl) * self.inv_vol[i] + shift.abs();
                }
                Drift::Centered | Drift::Upwind => {
                    if fb != 0.0 && i > 0 {
                        let y = self.grid.nodes[i];
                        let vy = if self.config.drift == Drift::Centered {
                            let d = self.deriv[i];
                            d[0] * v[i - 1] + d[1] * v[i] + d[2] * v[i + 1]
                        } else {
                            (v[i + 1] - v[i]) * self.inv_dr[i]
                        };
                        rhs += fb * y * vy;
                        ri += fb * y * self.inv_dr[i];
                    }
                    rhs += fa * v[i];
                    ri += fa.abs();
                }
            }
            out[i] = rhs;
            if let Some(r) = rates.as_deref_mut() {
                r[i] = ri;
            }
            rate = rate.max(ri);
        }
        out[k] = 0.0;
        rate
    }

    /// Per-node stiffness rates; the stable step is `cfl_safety / max`.
    pub fn rates(&self, state: &RadialState) -> Vec<f64> {
        let n = state.u.len();
        let mut out = vec![0.0; n];
        let mut face = vec![(0.0, 0.0); n];
        let mut rates = vec![0.0; n];
        self.operator_with_rates(&state.u, state.s, &mut out, &mut face, Some(&mut rates));
        rates
    }

    /// Stable step size for the current state.
    pub fn stable_dt(&self, state: &RadialState) -> f64 {
        let n = state.u.len();
        let mut out = vec![0.0; n];
        let mut face = vec![(0.0, 0.0); n];
        let rate = self.operator(&state.u, state.s, &mut out, &mut face);
        self.config.cfl_safety / rate
    }

    fn advance(&self, state: &mut RadialState, s_target: f64, w: &mut Work, face: &mut [(f64, f64)]) -> Result<()> {
        let s0 = state.s;
        let dt_cap = s_target - s0;
        let rate = self.operator(&state.u, s0, &mut w.l, face);
        let mut dt = self.config.cfl_safety / rate;
        if !dt.is_finite() || state.u.iter().all(|x| *x == 0.0) {
            dt = dt_cap;
        }
        dt = dt.min(dt_cap);
        if !(dt >= self.config.dt_min) && dt < dt_cap {
            return Err(Error::Stability {
                t: self.frame.physical_time(s0),
                dt,
            });
        }
        let n = state.u.len();
        let u = &mut state.u;
        match self.config.integrator {
            Integrator::ForwardEuler => {
                for i in 0..n {
                    u[i] += dt * w.l[i];
                }
            }
            Integrator::SspRk2 => {
                for i in 0..n {
                    w.u1[i] = u[i] + dt * w.l[i];
                }
                self.operator(&w.u1, s0 + dt, &mut w.l, face);
                for i in 0..n {
                    u[i] = 0.5 * u[i] + 0.5 * (w.u1[i] + dt * w.l[i]);
                }
            }
            Integrator::SspRk3 => {
                for i in 0..n {
                    w.u1[i] = u[i] + dt * w.l[i];
                }
                self.operator(&w.u1, s0 + dt, &mut w.l, face);
                for i in 0..n {
                    w.u2[i] = 0.75 * u[i] + 0.25 * (w.u1[i] + dt * w.l[i]);
                }
                self.operator(&w.u2, s0 + 0.5 * dt, &mut w.l, face);
                for i in 0..n {
                    u[i] = u[i] / 3.0 + 2.0 / 3.0 * (w.u2[i] + dt * w.l[i]);
                }
            }
        }
        u[n - 1] = 0.0;
        let sup = u.iter().cloned().fold(0.0, f64::max);
        let floor = -self.config.neg_tol * sup.max(f64::MIN_POSITIVE);
        for (i, x) in u.iter_mut().enumerate() {
            if !x.is_finite() {
                return Err(Error::Stability {
                    t: self.frame.physical_time(s0),
                    dt,
                });
            }
            if *x < 0.0 {
                if *x < floor {
                    return Err(Error::Negativity {
                        t: self.frame.physical_time(s0 + dt),
                        r: self.frame.radius(s0 + dt, self.grid.nodes[i]),
                        value: self.frame.value(s0 + dt, *x),
                    });
                }
                *x = 0.0;
            }
        }
        state.s = if dt == dt_cap { s_target } else { s0 + dt };
        state.t = self.frame.physical_time(state.s);
        state.steps += 1;
        Ok(())
    }

    fn work(&self) -> (Work, Vec<(f64, f64)>) {
        let n = self.grid.len();
        (
            Work {
                l: vec![0.0; n],
                u1: vec![0.0; n],
                u2: vec![0.0; n],
            },
            vec![(0.0, 0.0); n],
        )
    }

    /// One stable step.
    pub fn step(&self, state: &RadialState) -> Result<RadialState> {
        let mut next = state.clone();
        let (mut w, mut face) = self.work();
        self.advance(&mut next, f64::INFINITY, &mut w, &mut face)?;
        Ok(next)
    }

    /// One step of prescribed size `dt` (must not exceed the stable step).
    pub fn step_with(&self, state: &RadialState, dt: f64) -> Result<RadialState> {
        let mut next = state.clone();
        let (mut w, mut face) = self.work();
        let target = next.s + dt;
        self.advance(&mut next, target, &mut w, &mut face)?;
        Ok(next)
    }

    /// Evolves to frame time `s_end`, recording at the observer times.
    ///
    /// `on_observe` sees the state at each observation time.
    pub fn evolve_until(
        &self,
        state: RadialState,
        s_end: f64,
        observers: &Observers,
        on_observe: &mut dyn FnMut(&RadialState, &LogRecord),
    ) -> Result<(RadialState, Vec<LogRecord>)> {
        let mut state = state;
        let mut log = Vec::new();
        let mut times: Vec<f64> = observers
            .times
            .iter()
            .cloned()
            .filter(|&x| x > state.s && x <= s_end)
            .collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let budget = state.steps.saturating_add(self.config.max_steps);
        let (mut w, mut face) = self.work();
        if times.last() != Some(&s_end) {
            times.push(s_end);
        }
        for target in times {
            while state.s < target {
                if state.steps >= budget {
                    return Err(Error::StepBudget {
                        t: state.t,
                        steps: state.steps,
                    });
                }
                self.advance(&mut state, target, &mut w, &mut face)?;
            }
            if target == state.s && observers.times.contains(&target) {
                let rec = self.record(&state, &observers.tail_radii);
                on_observe(&state, &rec);
                log.push(rec);
            }
        }
        Ok((state, log))
    }

    pub fn record(&self, state: &RadialState, tail_radii: &[f64]) -> LogRecord {
        let (sup, grad) = self.norms(state);
        let frame_mass = self.grid.integrate(&state.u);
        let edge = self.grid.tail_integral(&state.u, 0.9 * self.grid.r_max).unwrap_or(0.0);
        LogRecord {
            s: state.s,
            t: state.t,
            mass: self.mass(state),
            sup_norm: sup,
            grad_sup_norm: grad,
            tail_masses: tail_radii.iter().map(|&r| self.tail_mass(state, r).ok()).collect(),
            contaminated: edge > 1e-6 * frame_mass,
        }
    }

    /// Physical `‖u(t)‖_1`.
    pub fn mass(&self, state: &RadialState) -> f64 {
        self.grid.integrate(&state.u) * self.frame.mass_factor(state.s, self.grid.n)
    }

    /// Physical `‖u − w‖_1` between two states on this solver's grid at the same time.
    pub fn l1_distance(&self, a: &RadialState, b: &RadialState) -> f64 {
        let d: Vec<f64> = a.u.iter().zip(&b.u).map(|(x, y)| (x - y).abs()).collect();
        self.grid.integrate(&d) * self.frame.mass_factor(a.s, self.grid.n)
    }

    /// Physical `(‖u‖_∞, ‖∂_r u‖_∞)`.
    pub fn norms(&self, state: &RadialState) -> (f64, f64) {
        let (sup, grad) = frame_norms(&self.grid, &state.u);
        (
            self.frame.value(state.s, sup),
            grad * self.frame.grad_factor(state.s),
        )
    }

    /// Physical `∫_{|x| ≥ R} u`.
    pub fn tail_mass(&self, state: &RadialState, big_r: f64) -> Result<f64> {
        let y = self.frame.coordinate(state.s, big_r);
        Ok(self.grid.tail_integral(&state.u, y)? * self.frame.mass_factor(state.s, self.grid.n))
    }

    /// Physical `u(t, r)` by linear interpolation.
    pub fn physical_value(&self, state: &RadialState, r: f64) -> f64 {
        let y = self.frame.coordinate(state.s, r);
        self.frame.value(state.s, self.grid.interpolate(&state.u, y))
    }

    /// Physical radius of every node at the state's time.
    pub fn physical_radii(&self, state: &RadialState) -> Vec<f64> {
        self.grid.nodes.iter().map(|&y| self.frame.radius(state.s, y)).collect()
    }

    pub fn residual_vec(&self, state: &RadialState) -> Vec<f64> {
        let n = state.u.len();
        let mut out = vec![0.0; n];
        let mut face = vec![(0.0, 0.0); n];
        self.operator(&state.u, state.s, &mut out, &mut face);
        out
    }

    /// Largest `|L_h v|` over the nodes: how far `v` is from a discrete steady state.
    pub fn residual_norm(&self, state: &RadialState) -> f64 {
        let n = state.u.len();
        let mut out = vec![0.0; n];
        let mut face = vec![(0.0, 0.0); n];
        self.operator(&state.u, state.s, &mut out, &mut face);
        out.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// `(max u, max |u_{i+1} − u_i|/(r_{i+1} − r_i))`.
pub fn frame_norms(grid: &RadialGrid, u: &[f64]) -> (f64, f64) {
    let sup = u.iter().cloned().fold(0.0, f64::max);
    let grad = grid
        .nodes
        .windows(2)
        .zip(u.windows(2))
        .map(|(r, v)| (v[1] - v[0]).abs() / (r[1] - r[0]))
        .fold(0.0, f64::max);
    (sup, grad)
}

/// Physical-frame initial state on `grid`.
pub fn init_state(exps: &ExponentSet, grid: &RadialGrid, u0: &InitialCondition) -> Result<RadialState> {
    let solver = Solver::new(*exps, grid.clone(), SolverConfig::default(), Frame::Physical)?;
    solver.init_state(u0)
}

/// Rescaled profile `(s, y_j, v_j)` with `s = ln(1+t)`, `y = r(1+t)^{−β}`, `v = (1+t)^α u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaledProfile {
    pub s: f64,
    pub y: Vec<f64>,
    pub v: Vec<f64>,
}

/// Resamples a state of any frame onto the fixed `y_grid` of the `(α, β, 1)` variables.
pub fn to_selfsimilar(solver: &Solver, state: &RadialState, y_grid: &[f64]) -> RescaledProfile {
    let e = &solver.exps;
    let tau = 1.0 + state.t;
    let v = y_grid
        .iter()
        .map(|&y| tau.powf(e.alpha) * solver.physical_value(state, y * tau.powf(e.beta)))
        .collect();
    RescaledProfile {
        s: tau.ln(),
        y: y_grid.to_vec(),
        v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::derive_exponents;

    fn reference() -> ExponentSet {
        derive_exponents(1.6, 0.85, 2).unwrap()
    }

    fn physical(exps: ExponentSet, grid: RadialGrid) -> Solver {
        Solver::new(exps, grid, SolverConfig::default(), Frame::Physical).unwrap()
    }

    #[test]
    fn constant_is_steady() {
        let e = reference();
        let g = RadialGrid::uniform(2, 5.0, 51).unwrap();
        let s = physical(e, g);
        let mut st = s.init_state(&InitialCondition::Zero).unwrap();
        for x in st.u.iter_mut() {
            *x = 2.0;
        }
        let n = st.u.len();
        st.u[n - 1] = 2.0;
        let mut out = vec![0.0; n];
        let mut face = vec![(0.0, 0.0); n];
        s.operator(&st.u, 0.0, &mut out, &mut face);
        assert!(out[..n - 1].iter().all(|x| *x == 0.0));
    }

    #[test]
    fn zero_stays_zero() {
        let e = reference();
        let g = RadialGrid::graded(2, 0.02, 0.02, 50.0).unwrap();
        let s = Solver::new(e, g, SolverConfig::default(), Frame::rescaled(&e)).unwrap();
        let st = s.init_state(&InitialCondition::Zero).unwrap();
        let (end, _) = s.evolve_until(st, 0.01, &Observers::default(), &mut |_, _| {}).unwrap();
        assert!(end.u.iter().all(|x| *x == 0.0));
        assert_eq!(s.mass(&end), 0.0);
    }

    #[test]
    fn initial_condition_validation() {
        let e = reference();
        let g = RadialGrid::uniform(2, 5.0, 51).unwrap();
        let bad = InitialCondition::TruncatedPower {
            height: 1.0,
            kappa: 1.0,
            delta: 0.0,
        };
        assert!(matches!(init_state(&e, &g, &bad), Err(Error::Spec(_))));
        let bump = init_state(&e, &g, &InitialCondition::Bump { height: 1.0, width: 1.0 }).unwrap();
        assert!(bump.u.windows(2).all(|w| w[1] <= w[0]));
        let neg = InitialCondition::Bump { height: -1.0, width: 1.0 };
        assert!(init_state(&e, &g, &neg).is_err());
    }

    #[test]
    fn mass_bump_has_its_mass() {
        let e = reference();
        let g = RadialGrid::uniform(2, 10.0, 2001).unwrap();
        let st = init_state(&e, &g, &InitialCondition::MassBump { mass: 3.0, width: 0.7 }).unwrap();
        assert!((g.integrate(&st.u) - 3.0).abs() < 1e-4);
    }

    #[test]
    fn power_bump_has_its_mass() {
        // θ = 4, N = 2: ∫ (1 + ρ²)^{-2} 2πρ dρ = π, so the peak is M/(π w²).
        assert!((power_bump_height(2, 2.0, 0.5, 4.0) - 2.0 / (std::f64::consts::PI * 0.25)).abs() < 1e-12);
        let e = reference();
        let g = RadialGrid::graded(2, 0.002, 0.002, 1e4).unwrap();
        let ic = InitialCondition::PowerBump { mass: 3.0, width: 0.1, theta: 5.0 };
        let st = init_state(&e, &g, &ic).unwrap();
        assert!((g.integrate(&st.u) - 3.0).abs() < 1e-3);
        let e3 = crate::params::derive_exponents(1.9, 0.97, 3).unwrap();
        let g3 = RadialGrid::graded(3, 0.002, 0.002, 1e4).unwrap();
        let st3 = init_state(&e3, &g3, &ic).unwrap();
        assert!((g3.integrate(&st3.u) - 3.0).abs() < 1e-3);
    }

    #[test]
    fn frame_round_trips() {
        let e = reference();
        for f in [Frame::rescaled(&e), Frame::diffusive(&e, 1e-3), Frame::Physical] {
            let s = 0.7;
            assert!((f.frame_time(f.physical_time(s)) - s).abs() < 1e-12);
            let r = 1.3;
            assert!((f.radius(s, f.coordinate(s, r)) - r).abs() < 1e-12);
            assert!((f.value(s, f.frame_value(s, 2.0)) - 2.0).abs() < 1e-12);
        }
        // Both exponents of the rescaled frame vanish.
        let (cd, ca) = Frame::rescaled(&e).coefficients(&e, 3.0);
        assert_eq!((cd, ca), (1.0, 1.0));
        let (cd, ca) = Frame::diffusive(&e, 1.0).coefficients(&e, 2.0);
        assert_eq!(cd, 1.0);
        assert!((ca - (2.0f64 * e.small_time_exponent()).exp()).abs() < 1e-12);
    }

    #[test]
    fn norms_of_ramp() {
        let g = RadialGrid::uniform(2, 2.0, 21).unwrap();
        let u: Vec<f64> = g.nodes.iter().map(|r| (1.0 - r / 2.0).max(0.0)).collect();
        let (sup, grad) = frame_norms(&g, &u);
        assert_eq!(sup, 1.0);
        assert!((grad - 0.5).abs() < 1e-12);
    }

    #[test]
    fn near_heat_limit_matches_heat_stencil() {
        let e = derive_exponents(1.999, 1.2, 1).unwrap();
        let g = RadialGrid::uniform(1, 10.0, 201).unwrap();
        let cfg = SolverConfig {
            absorption_on: false,
            integrator: Integrator::ForwardEuler,
            ..SolverConfig::default()
        };
        let s = Solver::new(e, g.clone(), cfg, Frame::Physical).unwrap();
        let st = s.init_state(&InitialCondition::Bump { height: 1.0, width: 1.0 }).unwrap();
        let next = s.step(&st).unwrap();
        let dt = next.s;
        let h = g.nodes[1];
        for i in 1..100 {
            let heat = st.u[i] + dt * (st.u[i + 1] - 2.0 * st.u[i] + st.u[i - 1]) / (h * h);
            let change = (heat - st.u[i]).abs().max(1e-12);
            // Diffusivity |u_r|^{p-2} departs from 1 by at most this factor at the two faces.
            let g = |j: usize| ((st.u[j + 1] - st.u[j]) / h).abs().max(1e-300);
            let x = (2.0 - e.p) * g(i - 1).ln().abs().max(g(i).ln().abs());
            assert!((next.u[i] - heat).abs() <= change * (x.exp_m1() + 1e-3), "node {i}");
        }
    }
}
