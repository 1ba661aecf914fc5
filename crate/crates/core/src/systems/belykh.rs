use serde::{Deserialize, Serialize};

use super::{first_violation, in_open, out_of_range};
use crate::dynamics::{DynamicalSystem, Region, SystemHandle};
use crate::error::{Result, SrbError};
use crate::linalg::{Matrix, Point};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BelykhParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub k: f64,
}

impl Default for BelykhParams {
    fn default() -> Self {
        BelykhParams {
            lambda1: 0.3,
            lambda2: 1.5,
            mu1: 0.3,
            mu2: 1.5,
            k: 0.2,
        }
    }
}

impl BelykhParams {
    pub fn violations(&self) -> Vec<SrbError> {
        let mut v = Vec::new();
        let k_ok = in_open(self.k, -1.0, 1.0);
        if !k_ok {
            v.push(out_of_range("belykh", "k", self.k, "|k| must be below 1"));
        }
        for (field, val) in [("lambda1", self.lambda1), ("mu1", self.mu1)] {
            if !in_open(val, 0.0, 0.5) {
                v.push(out_of_range("belykh", field, val, "must lie in (0, 1/2)"));
            }
        }
        let cap = if k_ok {
            2.0 / (1.0 - self.k.abs())
        } else {
            f64::INFINITY
        };
        for (field, val) in [("lambda2", self.lambda2), ("mu2", self.mu2)] {
            if !(val > 1.0 && val < cap) {
                v.push(out_of_range(
                    "belykh",
                    field,
                    val,
                    format!("must lie in (1, {cap})"),
                ));
            }
        }
        v
    }
}

#[derive(Debug, Clone)]
struct Belykh {
    p: BelykhParams,
    region: Region,
    norm: f64,
}

/// Belykh map on `(-1, 1)^2` with discontinuity line `y = kx`.
pub fn make_belykh(p: BelykhParams) -> Result<SystemHandle> {
    first_violation(p.violations())?;
    Ok(SystemHandle::new(Belykh {
        p,
        region: Region::centered_box(2, 1.0),
        norm: (1.0 + p.k * p.k).sqrt(),
    }))
}

impl Belykh {
    /// Signed offset from the line, positive on the upper branch.
    fn side(&self, x: &Point) -> f64 {
        (x[1] - self.p.k * x[0]) / self.norm
    }

    fn on_n(&self, x: &Point) -> bool {
        self.side(x).abs() <= f64::EPSILON
    }

    fn singular(&self, x: &Point) -> SrbError {
        SrbError::SingularInput {
            system: "belykh",
            point: x.as_slice().to_vec(),
        }
    }

    /// The two branch images of `N` as segments in the image plane.
    fn image_of_n(&self) -> [([f64; 2], [f64; 2]); 2] {
        let BelykhParams {
            lambda1: l1,
            lambda2: l2,
            mu1: m1,
            mu2: m2,
            k,
        } = self.p;
        let up = |x: f64| [l1 * (x - 1.0) + 1.0, l2 * (k * x - 1.0) + 1.0];
        let lo = |x: f64| [m1 * (x + 1.0) - 1.0, m2 * (k * x + 1.0) - 1.0];
        [(up(-1.0), up(1.0)), (lo(-1.0), lo(1.0))]
    }
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let t = ((ap[0] * ab[0] + ap[1] * ab[1]) / (ab[0] * ab[0] + ab[1] * ab[1])).clamp(0.0, 1.0);
    (ap[0] - t * ab[0]).hypot(ap[1] - t * ab[1])
}

impl DynamicalSystem for Belykh {
    fn name(&self) -> &'static str {
        "belykh"
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
            return Err(self.singular(x));
        }
        let p = &self.p;
        if self.side(x) > 0.0 {
            Ok(Point::new(&[
                p.lambda1 * (x[0] - 1.0) + 1.0,
                p.lambda2 * (x[1] - 1.0) + 1.0,
            ]))
        } else {
            Ok(Point::new(&[
                p.mu1 * (x[0] + 1.0) - 1.0,
                p.mu2 * (x[1] + 1.0) - 1.0,
            ]))
        }
    }

    fn jacobian(&self, x: &Point) -> Result<Matrix> {
        if self.on_n(x) {
            return Err(SrbError::BoundaryInput {
                system: "belykh",
                point: x.as_slice().to_vec(),
            });
        }
        let (a, b) = if self.side(x) > 0.0 {
            (self.p.lambda1, self.p.lambda2)
        } else {
            (self.p.mu1, self.p.mu2)
        };
        Ok(Matrix::from_row_slice(2, 2, &[a, 0.0, 0.0, b]))
    }

    fn invertible_on_attractor(&self) -> bool {
        true
    }

    fn is_singular(&self) -> bool {
        true
    }

    fn critical_distance(&self, x: &Point) -> Option<f64> {
        Some(self.side(x).abs())
    }

    fn critical_offset(&self, x: &Point, distance: f64) -> Option<Point> {
        let s = self.side(x);
        let sign = if s < 0.0 { -1.0 } else { 1.0 };
        let n = [-self.p.k / self.norm, 1.0 / self.norm];
        let foot = [x[0] - s * n[0], x[1] - s * n[1]];
        Some(Point::new(&[
            foot[0] + sign * distance * n[0],
            foot[1] + sign * distance * n[1],
        ]))
    }

    /// Branch chosen by the sign of `X`: the upper branch maps into `X > 0`,
    /// the lower one into `X < 0`. Points whose candidate preimage falls on
    /// the wrong side of the line have no preimage.
    fn inverse(&self, x: &Point) -> Option<Result<Point>> {
        let p = &self.p;
        let (cand, upper) = if x[0] > 0.0 {
            (
                Point::new(&[
                    (x[0] - 1.0) / p.lambda1 + 1.0,
                    (x[1] - 1.0) / p.lambda2 + 1.0,
                ]),
                true,
            )
        } else if x[0] < 0.0 {
            (
                Point::new(&[(x[0] + 1.0) / p.mu1 - 1.0, (x[1] + 1.0) / p.mu2 - 1.0]),
                false,
            )
        } else {
            return Some(Err(self.singular(x)));
        };
        let s = self.side(&cand);
        if (upper && s > 0.0) || (!upper && s < 0.0) {
            Some(Ok(cand))
        } else {
            Some(Err(SrbError::InvalidArgument(format!(
                "{:?} has no preimage under belykh",
                x.as_slice()
            ))))
        }
    }

    fn inverse_critical_distance(&self, x: &Point) -> Option<f64> {
        let q = [x[0], x[1]];
        Some(
            self.image_of_n()
                .iter()
                .map(|(a, b)| segment_distance(q, *a, *b))
                .fold(f64::INFINITY, f64::min),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::distance_to_singularity;
    use crate::exec::stream_rng;

    #[test]
    fn branch_images() {
        let s = make_belykh(BelykhParams::default()).unwrap();
        let y = s.map(&Point::new(&[0.0, 0.5])).unwrap();
        assert!((y[0] - 0.7).abs() < 1e-15 && (y[1] - 0.25).abs() < 1e-15);
        let y = s.map(&Point::new(&[0.0, -0.5])).unwrap();
        assert!((y[0] + 0.7).abs() < 1e-15 && (y[1] + 0.25).abs() < 1e-15);
    }

    #[test]
    fn distance_with_flat_line() {
        let s = make_belykh(BelykhParams {
            k: 0.0,
            ..BelykhParams::default()
        })
        .unwrap();
        assert_eq!(
            distance_to_singularity(&s, &Point::new(&[0.2, 0.5])).unwrap(),
            0.5
        );
    }

    #[test]
    fn jacobian_constant_per_branch() {
        let s = make_belykh(BelykhParams::default()).unwrap();
        let mut rng = stream_rng(5, 0);
        let mut seen = [0, 0];
        for _ in 0..400 {
            let x = s.region().sample(&mut rng).unwrap();
            let j = s.jacobian(&x).unwrap();
            assert_eq!(j.as_slice(), &[0.3, 0.0, 0.0, 1.5]);
            seen[usize::from(x[1] < 0.2 * x[0])] += 1;
        }
        assert!(seen[0] >= 100 && seen[1] >= 100);
        let asym = make_belykh(BelykhParams {
            mu1: 0.2,
            mu2: 1.7,
            ..BelykhParams::default()
        })
        .unwrap();
        assert_eq!(
            asym.jacobian(&Point::new(&[0.0, -0.3])).unwrap().as_slice(),
            &[0.2, 0.0, 0.0, 1.7]
        );
    }

    #[test]
    fn critical_offset_distance() {
        let s = make_belykh(BelykhParams::default()).unwrap();
        let x = Point::new(&[0.4, -0.6]);
        let y = s.critical_offset(&x, 1e-5).unwrap();
        assert!((s.critical_distance(&y).unwrap() - 1e-5).abs() < 1e-15);
        assert!(y[1] < 0.2 * y[0]);
    }

    #[test]
    fn inverse_roundtrip_and_image_distance() {
        let s = make_belykh(BelykhParams::default()).unwrap();
        let mut rng = stream_rng(8, 0);
        for _ in 0..200 {
            let x = s.region().sample(&mut rng).unwrap();
            let y = s.map(&x).unwrap();
            let back = s.inverse(&y).unwrap().unwrap();
            assert!((back[0] - x[0]).abs() < 1e-12 && (back[1] - x[1]).abs() < 1e-12);
        }
        // image of a point on N is on f(N)
        let on = Point::new(&[0.5, 0.1 + 1e-14]);
        let y = s.map(&on).unwrap();
        assert!(s.inverse_critical_distance(&y).unwrap() < 1e-12);
    }
}
