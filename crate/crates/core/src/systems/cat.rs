use crate::dynamics::{DynamicalSystem, Region, SystemHandle};
use crate::error::Result;
use crate::linalg::{Matrix, Point};

/// Arnold cat map on the unit 2-torus. Lebesgue is its SRB measure.
#[derive(Debug, Clone)]
struct CatMap {
    region: Region,
}

pub fn make_cat_map() -> SystemHandle {
    SystemHandle::new(CatMap {
        region: Region::unit_torus(2),
    })
}

fn frac(v: f64) -> f64 {
    let r = v.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

impl DynamicalSystem for CatMap {
    fn name(&self) -> &'static str {
        "cat"
    }

    fn dim(&self) -> usize {
        2
    }

    fn region(&self) -> &Region {
        &self.region
    }

    fn parameters(&self) -> serde_json::Value {
        serde_json::json!({})
    }

    fn map(&self, x: &Point) -> Result<Point> {
        Ok(Point::new(&[frac(2.0 * x[0] + x[1]), frac(x[0] + x[1])]))
    }

    fn jacobian(&self, _x: &Point) -> Result<Matrix> {
        Ok(Matrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0]))
    }

    fn invertible_on_attractor(&self) -> bool {
        true
    }

    fn inverse(&self, x: &Point) -> Option<Result<Point>> {
        Some(Ok(Point::new(&[
            frac(x[0] - x[1]),
            frac(2.0 * x[1] - x[0]),
        ])))
    }
}
