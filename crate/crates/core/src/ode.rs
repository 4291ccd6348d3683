//! Dormand–Prince 5(4) with dense output and zero-crossing events.

use crate::error::{Error, Result};

pub trait OdeSystem<const D: usize> {
    fn rhs(&self, t: f64, y: &[f64; D]) -> [f64; D];

    /// Absolute error floor per component at `(t, y)`.
    fn atol(&self, t: f64, y: &[f64; D]) -> [f64; D];
}

#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: 1e-3,
            h_min: 1e-14,
            h_max: 0.25,
            max_steps: 2_000_000,
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn axpy<const D: usize>(y: &[f64; D], h: f64, terms: &[(f64, &[f64; D])]) -> [f64; D] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..D {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// One accepted step with its continuous extension.
#[derive(Debug, Clone, Copy)]
pub struct DenseStep<const D: usize> {
    pub t0: f64,
    pub h: f64,
    pub y0: [f64; D],
    pub y1: [f64; D],
    pub dy1: [f64; D],
    rc: [[f64; D]; 5],
}

impl<const D: usize> DenseStep<D> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval(&self, t: f64) -> [f64; D] {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let mut out = [0.0; D];
        for i in 0..D {
            let r = &self.rc;
            out[i] = r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])));
        }
        out
    }
}

struct Trial<const D: usize> {
    y1: [f64; D],
    k7: [f64; D],
    err: f64,
    rc: [[f64; D]; 5],
}

fn trial_step<S: OdeSystem<D>, const D: usize>(
    sys: &S,
    t: f64,
    y: &[f64; D],
    k1: &[f64; D],
    h: f64,
    rtol: f64,
    atol: f64,
) -> Trial<D> {
    let k2 = sys.rhs(t + C2 * h, &axpy(y, h, &[(A21, k1)]));
    let k3 = sys.rhs(t + C3 * h, &axpy(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = sys.rhs(t + C4 * h, &axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = sys.rhs(
        t + C5 * h,
        &axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
    );
    let k6 = sys.rhs(
        t + h,
        &axpy(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
    );
    let y1 = axpy(y, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
    let k7 = sys.rhs(t + h, &y1);
    let floor = sys.atol(t + h, &y1);
    let mut acc = 0.0;
    let mut rc = [[0.0; D]; 5];
    for i in 0..D {
        let e = h
            * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let sc = atol * floor[i] + rtol * y[i].abs().max(y1[i].abs());
        acc += (e / sc).powi(2);
        let dy = y1[i] - y[i];
        let bspl = h * k1[i] - dy;
        rc[0][i] = y[i];
        rc[1][i] = dy;
        rc[2][i] = bspl;
        rc[3][i] = dy - h * k7[i] - bspl;
        rc[4][i] = h
            * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
    }
    let err = (acc / D as f64).sqrt();
    Trial {
        y1,
        k7,
        err: if err.is_finite() { err } else { f64::INFINITY },
        rc,
    }
}

/// Why [`integrate`] returned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stop<const D: usize> {
    /// Reached `t_end`.
    End,
    /// The event function changed sign; location and state at the root.
    Event { t: f64, y: [f64; D] },
    /// The step observer asked to stop after the last accepted step.
    Observer,
}

#[derive(Debug, Clone, Copy)]
pub struct Outcome<const D: usize> {
    pub t: f64,
    pub y: [f64; D],
    pub stop: Stop<D>,
    pub steps: usize,
}

/// Integrates from `t0` to `t_end` (forward).
///
/// `event(t, y)` is watched for a sign change over every accepted step; the
/// root is located by safeguarded secant iteration on fresh steps taken from
/// the left end of the bracketing step. `observer` sees every accepted step
/// (including the one containing an event) and returns `false` to stop.
pub fn integrate<S, const D: usize>(
    sys: &S,
    t0: f64,
    y0: [f64; D],
    t_end: f64,
    ctrl: &StepControl,
    event: Option<&dyn Fn(f64, &[f64; D]) -> f64>,
    observer: &mut dyn FnMut(&DenseStep<D>) -> bool,
) -> Result<Outcome<D>>
where
    S: OdeSystem<D>,
{
    let mut t = t0;
    let mut y = y0;
    let mut k1 = sys.rhs(t, &y);
    let mut h = ctrl.h_init.min(ctrl.h_max).min(t_end - t0);
    let mut steps = 0;
    let mut g_prev = event.map(|g| g(t, &y));
    while t < t_end {
        if steps >= ctrl.max_steps {
            return Err(Error::StepFailure { t, h });
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        let tr = trial_step(sys, t, &y, &k1, h, ctrl.rtol, ctrl.atol);
        if tr.err > 1.0 {
            let fac = (0.9 * tr.err.powf(-0.2)).clamp(0.1, 0.9);
            h *= fac;
            if h < ctrl.h_min {
                return Err(Error::StepFailure { t, h });
            }
            continue;
        }
        steps += 1;
        let step = DenseStep {
            t0: t,
            h,
            y0: y,
            y1: tr.y1,
            dy1: tr.k7,
            rc: tr.rc,
        };
        let t_new = if last { t_end } else { t + h };
        if let (Some(g), Some(gp)) = (event, g_prev) {
            let gn = g(t_new, &tr.y1);
            if gp != 0.0 && (gn == 0.0 || gn.signum() != gp.signum()) {
                let (te, ye) = locate_root(sys, &step, &k1, g, gp, gn, ctrl);
                observer(&step);
                return Ok(Outcome {
                    t: te,
                    y: ye,
                    stop: Stop::Event { t: te, y: ye },
                    steps,
                });
            }
            g_prev = Some(gn);
        }
        t = t_new;
        y = tr.y1;
        k1 = tr.k7;
        let keep_going = observer(&step);
        if !keep_going {
            return Ok(Outcome {
                t,
                y,
                stop: Stop::Observer,
                steps,
            });
        }
        let fac = if tr.err == 0.0 {
            5.0
        } else {
            (0.9 * tr.err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h = (h * fac).min(ctrl.h_max);
    }
    Ok(Outcome {
        t,
        y,
        stop: Stop::End,
        steps,
    })
}

fn locate_root<S: OdeSystem<D>, const D: usize>(
    sys: &S,
    step: &DenseStep<D>,
    k1: &[f64; D],
    g: &dyn Fn(f64, &[f64; D]) -> f64,
    g0: f64,
    g1: f64,
    ctrl: &StepControl,
) -> (f64, [f64; D]) {
    let (mut a, mut ga) = (0.0, g0);
    let (mut b, mut gb) = (step.h, g1);
    let mut yb = step.y1;
    if gb == 0.0 {
        return (step.t0 + b, yb);
    }
    let mut side = 0i8;
    for _ in 0..60 {
        // Illinois-modified regula falsi in the step-length variable.
        let mut c = (a * gb - b * ga) / (gb - ga);
        if !(c > a && c < b) {
            c = 0.5 * (a + b);
        }
        let tr = trial_step(sys, step.t0, &step.y0, k1, c, ctrl.rtol, ctrl.atol);
        let gc = g(step.t0 + c, &tr.y1);
        if gc == 0.0 {
            return (step.t0 + c, tr.y1);
        }
        if gc.signum() == gb.signum() {
            b = c;
            gb = gc;
            yb = tr.y1;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        } else {
            a = c;
            ga = gc;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        }
        if (b - a) <= 1e-15 * (step.t0.abs() + b.abs()).max(1e-300) {
            break;
        }
    }
    (step.t0 + b, yb)
}
