use serde::{Deserialize, Serialize};

use super::{first_violation, in_open, out_of_range};
use crate::dynamics::{DynamicalSystem, Region, SystemHandle};
use crate::error::{Result, SrbError};
use crate::linalg::{Matrix, Point};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorenzMapParams {
    pub a: f64,
    pub b: f64,
    pub nu: f64,
    pub nu0: f64,
}

impl Default for LorenzMapParams {
    fn default() -> Self {
        LorenzMapParams {
            a: 0.5,
            b: 0.25,
            nu: 2.0,
            nu0: 0.8,
        }
    }
}

impl LorenzMapParams {
    pub fn violations(&self) -> Vec<SrbError> {
        let mut v = Vec::new();
        let a_ok = in_open(self.a, 0.0, 1.0);
        if !a_ok {
            v.push(out_of_range(
                "lorenz_map",
                "a",
                self.a,
                "A must lie in (0, 1)",
            ));
        }
        if !in_open(self.b, 0.0, 0.5) {
            v.push(out_of_range(
                "lorenz_map",
                "b",
                self.b,
                "B must lie in (0, 1/2)",
            ));
        }
        if !(self.nu > 1.0 && self.nu.is_finite()) {
            v.push(out_of_range(
                "lorenz_map",
                "nu",
                self.nu,
                "nu must exceed 1",
            ));
        }
        let lo = if a_ok { 1.0 / (1.0 + self.a) } else { 0.5 };
        if !in_open(self.nu0, lo, 1.0) {
            v.push(out_of_range(
                "lorenz_map",
                "nu0",
                self.nu0,
                format!("nu0 must lie in ({lo}, 1)"),
            ));
        }
        v
    }
}

#[derive(Debug, Clone)]
struct LorenzMap {
    p: LorenzMapParams,
    region: Region,
}

/// Two-dimensional return map of a Lorenz-like flow on `(-1, 1)^2`, singular
/// along `y = 0`. The image depends on `y` only, so the Jacobian has rank one.
pub fn make_lorenz_map(p: LorenzMapParams) -> Result<SystemHandle> {
    first_violation(p.violations())?;
    Ok(SystemHandle::new(LorenzMap {
        p,
        region: Region::centered_box(2, 1.0),
    }))
}

impl LorenzMap {
    fn check(&self, x: &Point) -> Result<(f64, f64)> {
        let r = x[1].abs();
        if r <= f64::MIN_POSITIVE {
            return Err(SrbError::SingularInput {
                system: "lorenz_map",
                point: x.as_slice().to_vec(),
            });
        }
        Ok((x[1].signum(), r))
    }
}

impl DynamicalSystem for LorenzMap {
    fn name(&self) -> &'static str {
        "lorenz_map"
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
        let (s, r) = self.check(x)?;
        let LorenzMapParams { a, b, nu, nu0 } = self.p;
        let r0 = r.powf(nu0);
        Ok(Point::new(&[
            (-b * r0 + b * s * r.powf(nu) + 1.0) * s,
            ((1.0 + a) * r0 - a) * s,
        ]))
    }

    fn jacobian(&self, x: &Point) -> Result<Matrix> {
        let (s, r) = self.check(x)?;
        let LorenzMapParams { a, b, nu, nu0 } = self.p;
        let d0 = nu0 * r.powf(nu0 - 1.0);
        let dx = -b * d0 + b * nu * s * r.powf(nu - 1.0);
        let dy = (1.0 + a) * d0;
        Ok(Matrix::from_row_slice(2, 2, &[0.0, dx, 0.0, dy]))
    }

    fn invertible_on_attractor(&self) -> bool {
        false
    }

    fn is_singular(&self) -> bool {
        true
    }

    fn critical_distance(&self, x: &Point) -> Option<f64> {
        Some(x[1].abs())
    }

    fn critical_offset(&self, x: &Point, distance: f64) -> Option<Point> {
        let s = if x[1] < 0.0 { -1.0 } else { 1.0 };
        Some(Point::new(&[x[0], s * distance]))
    }
}
