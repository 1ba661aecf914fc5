use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::{first_violation, in_open, out_of_range};
use crate::dynamics::{DynamicalSystem, Region, SystemHandle};
use crate::error::{Result, SrbError};
use crate::linalg::{Matrix, Point};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolenoidParams {
    pub a: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for SolenoidParams {
    fn default() -> Self {
        SolenoidParams {
            a: 0.5,
            alpha: 0.25,
            beta: 0.25,
        }
    }
}

impl SolenoidParams {
    pub fn violations(&self) -> Vec<SrbError> {
        let mut v = Vec::new();
        if !in_open(self.a, 0.0, 1.0) {
            v.push(out_of_range(
                "solenoid",
                "a",
                self.a,
                "a must lie in (0, 1)",
            ));
        }
        let cap = self.a.min(1.0 - self.a);
        if !in_open(self.alpha, 0.0, cap) {
            v.push(out_of_range(
                "solenoid",
                "alpha",
                self.alpha,
                format!("alpha must lie in (0, {cap})"),
            ));
        }
        if !in_open(self.beta, 0.0, cap) {
            v.push(out_of_range(
                "solenoid",
                "beta",
                self.beta,
                format!("beta must lie in (0, {cap})"),
            ));
        }
        v
    }
}

#[derive(Debug, Clone)]
struct Solenoid {
    p: SolenoidParams,
    region: Region,
}

/// Smale-Williams solenoid on the solid torus `D^2 x S^1`.
pub fn make_solenoid(p: SolenoidParams) -> Result<SystemHandle> {
    first_violation(p.violations())?;
    Ok(SystemHandle::new(Solenoid {
        p,
        region: Region::solid_torus(),
    }))
}

impl DynamicalSystem for Solenoid {
    fn name(&self) -> &'static str {
        "solenoid"
    }

    fn dim(&self) -> usize {
        3
    }

    fn region(&self) -> &Region {
        &self.region
    }

    fn parameters(&self) -> serde_json::Value {
        serde_json::to_value(self.p).expect("plain record")
    }

    fn map(&self, x: &Point) -> Result<Point> {
        let SolenoidParams { a, alpha, beta } = self.p;
        let (s, c) = x[2].sin_cos();
        let mut theta = (2.0 * x[2]).rem_euclid(TAU);
        if theta >= TAU {
            theta = 0.0;
        }
        Ok(Point::new(&[
            alpha * x[0] + a * c,
            beta * x[1] + a * s,
            theta,
        ]))
    }

    fn jacobian(&self, x: &Point) -> Result<Matrix> {
        let SolenoidParams { a, alpha, beta } = self.p;
        let (s, c) = x[2].sin_cos();
        Ok(Matrix::from_row_slice(
            3,
            3,
            &[alpha, 0.0, -a * s, 0.0, beta, a * c, 0.0, 0.0, 2.0],
        ))
    }

    fn invertible_on_attractor(&self) -> bool {
        false
    }
}
