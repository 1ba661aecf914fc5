use serde::{Deserialize, Serialize};

use super::{first_violation, in_open, out_of_range};
use crate::dynamics::{DynamicalSystem, Region, SystemHandle};
use crate::error::{Result, SrbError};
use crate::linalg::{Matrix, Point};

/// Resolution of the trapping check grid per axis.
const TRAP_GRID: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoziParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Default for LoziParams {
    /// Classical chaotic regime.
    fn default() -> Self {
        LoziParams {
            a: 1.7,
            b: 0.5,
            c: 0.99,
        }
    }
}

impl LoziParams {
    pub fn violations(&self) -> Vec<SrbError> {
        let mut v = Vec::new();
        if !(self.a > 0.0 && self.a.is_finite()) {
            v.push(out_of_range("lozi", "a", self.a, "a must be positive"));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            v.push(out_of_range("lozi", "b", self.b, "b must be positive"));
        }
        if !in_open(self.c, 0.0, 1.0) {
            v.push(out_of_range("lozi", "c", self.c, "c must lie in (0, 1)"));
        }
        v
    }
}

#[derive(Debug, Clone)]
struct Lozi {
    p: LoziParams,
    region: Region,
    trapping: bool,
}

/// Lozi map `(1 + b y - a|x|, x)` on `(-c, c)^2` with `N = {x = 0}`.
///
/// Whether `f(U \ N)` lies inside `U` is checked on a grid of cell centres
/// and recorded on the handle; it is not a construction requirement.
pub fn make_lozi(p: LoziParams) -> Result<SystemHandle> {
    first_violation(p.violations())?;
    let mut sys = Lozi {
        p,
        region: Region::centered_box(2, p.c),
        trapping: false,
    };
    sys.trapping = sys.check_trapping();
    Ok(SystemHandle::new(sys))
}

impl Lozi {
    fn on_n(&self, x: &Point) -> bool {
        x[0].abs() <= f64::EPSILON * self.p.c
    }

    fn check_trapping(&self) -> bool {
        let c = self.p.c;
        let h = 2.0 * c / TRAP_GRID as f64;
        (0..TRAP_GRID).all(|i| {
            (0..TRAP_GRID).all(|j| {
                let x = Point::new(&[-c + (i as f64 + 0.5) * h, -c + (j as f64 + 0.5) * h]);
                self.map(&x).map_or(true, |y| self.region.contains(&y))
            })
        })
    }
}

impl DynamicalSystem for Lozi {
    fn name(&self) -> &'static str {
        "lozi"
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
        if self.on_n(x) {
            return Err(SrbError::SingularInput {
                system: "lozi",
                point: x.as_slice().to_vec(),
            });
        }
        Ok(Point::new(&[
            1.0 + self.p.b * x[1] - self.p.a * x[0].abs(),
            x[0],
        ]))
    }

    fn jacobian(&self, x: &Point) -> Result<Matrix> {
        if self.on_n(x) {
            return Err(SrbError::BoundaryInput {
                system: "lozi",
                point: x.as_slice().to_vec(),
            });
        }
        let s = -self.p.a * x[0].signum();
        Ok(Matrix::from_row_slice(2, 2, &[s, self.p.b, 1.0, 0.0]))
    }

    fn invertible_on_attractor(&self) -> bool {
        true
    }

    fn is_singular(&self) -> bool {
        true
    }

    fn critical_distance(&self, x: &Point) -> Option<f64> {
        Some(x[0].abs())
    }

    fn critical_offset(&self, x: &Point, distance: f64) -> Option<Point> {
        let s = if x[0] < 0.0 { -1.0 } else { 1.0 };
        Some(Point::new(&[s * distance, x[1]]))
    }

    /// `(X, Y) -> (Y, (X - 1 + a|Y|) / b)`; the image of `N` is `{Y = 0}`.
    fn inverse(&self, x: &Point) -> Option<Result<Point>> {
        if x[1].abs() <= f64::EPSILON * self.p.c {
            return Some(Err(SrbError::SingularInput {
                system: "lozi",
                point: x.as_slice().to_vec(),
            }));
        }
        Some(Ok(Point::new(&[
            x[1],
            (x[0] - 1.0 + self.p.a * x[1].abs()) / self.p.b,
        ])))
    }

    fn inverse_critical_distance(&self, x: &Point) -> Option<f64> {
        Some(x[1].abs())
    }

    fn trapping_verified(&self) -> bool {
        self.trapping
    }
}
