use crate::dynamics::{DynamicalSystem, Region, SystemHandle};
use crate::error::Result;
use crate::linalg::{Matrix, Point, Vector};

/// Constant-matrix oracle map `x -> M x`.
#[derive(Debug, Clone)]
struct LinearMap {
    name: &'static str,
    matrix: Matrix,
    region: Region,
}

/// Linear oracle system. Used by tests where every diagnostic has a closed
/// form (diagonal scalings, rotations, the identity, contractions).
pub fn make_linear(name: &'static str, matrix: Matrix, region: Region) -> SystemHandle {
    assert!(matrix.is_square() && matrix.nrows() == region.dim());
    SystemHandle::new(LinearMap {
        name,
        matrix,
        region,
    })
}

impl DynamicalSystem for LinearMap {
    fn name(&self) -> &'static str {
        self.name
    }

    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn region(&self) -> &Region {
        &self.region
    }

    fn parameters(&self) -> serde_json::Value {
        let rows: Vec<Vec<f64>> = self
            .matrix
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect();
        serde_json::json!({ "matrix": rows })
    }

    fn map(&self, x: &Point) -> Result<Point> {
        let v: Vector = &self.matrix * x.to_vector();
        Ok(Point::from_vector(&v))
    }

    fn jacobian(&self, _x: &Point) -> Result<Matrix> {
        Ok(self.matrix.clone())
    }

    fn invertible_on_attractor(&self) -> bool {
        self.matrix.determinant() != 0.0
    }
}
