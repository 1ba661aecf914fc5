use serde::{Deserialize, Serialize};

use super::{first_violation, in_open, out_of_range};
use crate::dynamics::{DynamicalSystem, Region, SystemHandle};
use crate::error::{Result, SrbError};
use crate::linalg::{Matrix, Point};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeutralSlowdownParams {
    pub gamma: f64,
    pub beta: f64,
    pub alpha: f64,
    pub r0: f64,
    pub r1: f64,
    pub integrator_step: f64,
}

impl Default for NeutralSlowdownParams {
    fn default() -> Self {
        NeutralSlowdownParams {
            gamma: 1.0,
            beta: 1.0,
            alpha: 0.5,
            r0: 0.5,
            r1: 1.0,
            integrator_step: 0.01,
        }
    }
}

impl NeutralSlowdownParams {
    pub fn violations(&self) -> Vec<SrbError> {
        const S: &str = "neutral_slowdown";
        let mut v = Vec::new();
        for (field, val) in [("gamma", self.gamma), ("beta", self.beta)] {
            if !(val > 0.0 && val.is_finite()) {
                v.push(out_of_range(S, field, val, "must be positive"));
            }
        }
        if !in_open(self.alpha, 0.0, 1.0) {
            v.push(out_of_range(
                S,
                "alpha",
                self.alpha,
                "alpha must lie in (0, 1)",
            ));
        }
        let r0_ok = in_open(self.r0, 0.0, 1.0);
        if !r0_ok {
            v.push(out_of_range(S, "r0", self.r0, "r0 must lie in (0, 1)"));
        }
        let r1_ok = self.r1.is_finite() && self.r1 > self.r0;
        if !r1_ok {
            v.push(out_of_range(S, "r1", self.r1, "r1 must exceed r0"));
        }
        if !(self.integrator_step > 0.0 && self.integrator_step <= 1.0) {
            v.push(out_of_range(
                S,
                "integrator_step",
                self.integrator_step,
                "step must lie in (0, 1]",
            ));
        }
        if r0_ok && r1_ok && in_open(self.alpha, 0.0, 1.0) {
            // Fritsch-Carlson: with zero end slope the cubic is monotone iff
            // the start slope is at most three secant slopes.
            let secant = (1.0 - self.r0.powf(self.alpha)) / (self.r1 - self.r0);
            let m0 = self.alpha * self.r0.powf(self.alpha - 1.0);
            if m0 > 3.0 * secant {
                v.push(out_of_range(
                    S,
                    "r1",
                    self.r1,
                    format!(
                        "cubic interpolation of psi on (r0, r1) is not monotone (slope ratio {:.3} > 3)",
                        m0 / secant
                    ),
                ));
            }
        }
        v
    }
}

#[derive(Debug, Clone)]
struct NeutralSlowdown {
    p: NeutralSlowdownParams,
    region: Region,
    substeps: usize,
}

/// Time-1 map of `x' = psi(|x|) A x` with `A = diag(gamma, -beta)`, by
/// fixed-step RK4. The Jacobian integrates the variational equation alongside.
pub fn make_neutral_slowdown(p: NeutralSlowdownParams) -> Result<SystemHandle> {
    first_violation(p.violations())?;
    Ok(SystemHandle::new(NeutralSlowdown {
        p,
        region: Region::centered_box(2, 2.0 * p.r1),
        substeps: (1.0 / p.integrator_step).ceil() as usize,
    }))
}

impl NeutralSlowdown {
    /// `(psi(r), psi'(r))`.
    fn psi(&self, r: f64) -> (f64, f64) {
        let NeutralSlowdownParams { alpha, r0, r1, .. } = self.p;
        if r <= r0 {
            if r == 0.0 {
                return (0.0, 0.0);
            }
            let v = r.powf(alpha);
            (v, alpha * v / r)
        } else if r >= r1 {
            (1.0, 0.0)
        } else {
            let h = r1 - r0;
            let t = (r - r0) / h;
            let p0 = r0.powf(alpha);
            let m0 = alpha * p0 / r0;
            let (t2, t3) = (t * t, t * t * t);
            let v = (2.0 * t3 - 3.0 * t2 + 1.0) * p0
                + (t3 - 2.0 * t2 + t) * h * m0
                + (-2.0 * t3 + 3.0 * t2);
            let d = (6.0 * t2 - 6.0 * t) * p0 / h
                + (3.0 * t2 - 4.0 * t + 1.0) * m0
                + (-6.0 * t2 + 6.0 * t) / h;
            (v, d)
        }
    }

    fn field(&self, x: [f64; 2]) -> [f64; 2] {
        let (s, _) = self.psi(x[0].hypot(x[1]));
        [s * self.p.gamma * x[0], -s * self.p.beta * x[1]]
    }

    fn field_derivative(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        let r = x[0].hypot(x[1]);
        if r == 0.0 {
            return [[0.0; 2]; 2];
        }
        let (s, ds) = self.psi(r);
        let ax = [self.p.gamma * x[0], -self.p.beta * x[1]];
        let g = [ds * x[0] / r, ds * x[1] / r];
        [
            [s * self.p.gamma + ax[0] * g[0], ax[0] * g[1]],
            [ax[1] * g[0], -s * self.p.beta + ax[1] * g[1]],
        ]
    }

    /// Right-hand side of the combined state `(x, M)`.
    fn rhs(&self, st: &[f64; 6]) -> [f64; 6] {
        let x = [st[0], st[1]];
        let f = self.field(x);
        let d = self.field_derivative(x);
        let m = [[st[2], st[3]], [st[4], st[5]]];
        let mut out = [f[0], f[1], 0.0, 0.0, 0.0, 0.0];
        for i in 0..2 {
            for j in 0..2 {
                out[2 + 2 * i + j] = d[i][0] * m[0][j] + d[i][1] * m[1][j];
            }
        }
        out
    }

    fn integrate(&self, x: &Point, with_variation: bool) -> [f64; 6] {
        let mut st = [x[0], x[1], 1.0, 0.0, 0.0, 1.0];
        let h = 1.0 / self.substeps as f64;
        let step = |s: &[f64; 6], k: &[f64; 6], c: f64| -> [f64; 6] {
            let mut o = *s;
            for i in 0..6 {
                o[i] += c * k[i];
            }
            o
        };
        for _ in 0..self.substeps {
            let (k1, k2, k3, k4);
            if with_variation {
                k1 = self.rhs(&st);
                k2 = self.rhs(&step(&st, &k1, h / 2.0));
                k3 = self.rhs(&step(&st, &k2, h / 2.0));
                k4 = self.rhs(&step(&st, &k3, h));
            } else {
                let f = |s: &[f64; 6]| {
                    let v = self.field([s[0], s[1]]);
                    [v[0], v[1], 0.0, 0.0, 0.0, 0.0]
                };
                k1 = f(&st);
                k2 = f(&step(&st, &k1, h / 2.0));
                k3 = f(&step(&st, &k2, h / 2.0));
                k4 = f(&step(&st, &k3, h));
            }
            for i in 0..6 {
                st[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        st
    }
}

impl DynamicalSystem for NeutralSlowdown {
    fn name(&self) -> &'static str {
        "neutral_slowdown"
    }

    fn dim(&self) -> usize {
        2
    }

    fn region(&self) -> &Region {
        &self.region
    }

    fn parameters(&self) -> serde_json::Value {
        serde_json::to_value(self.p).expect("plain record")
    }

    fn map(&self, x: &Point) -> Result<Point> {
        if x[0] == 0.0 && x[1] == 0.0 {
            return Ok(*x);
        }
        let st = self.integrate(x, false);
        Ok(Point::new(&[st[0], st[1]]))
    }

    fn jacobian(&self, x: &Point) -> Result<Matrix> {
        if x[0] == 0.0 && x[1] == 0.0 {
            return Ok(Matrix::identity(2, 2));
        }
        let st = self.integrate(x, true);
        Ok(Matrix::from_row_slice(2, 2, &st[2..6]))
    }

    fn invertible_on_attractor(&self) -> bool {
        true
    }
}
