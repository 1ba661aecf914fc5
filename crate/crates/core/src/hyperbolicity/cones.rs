use std::f64::consts::{FRAC_PI_2, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::SystemHandle;
use crate::error::{Result, SrbError};
use crate::exec::stream_rng;
use crate::linalg::{unit, Matrix, Point, Subspace, Vector};

/// Boundary samples per great circle for cone extrema.
pub const DEFAULT_CONE_SAMPLES: usize = 720;

/// Cone of vectors making an angle below `half_angle` with `axis`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cone {
    pub axis: Subspace,
    pub half_angle: f64,
}

impl Cone {
    pub fn new(axis: Subspace, half_angle: f64) -> Result<Self> {
        if !(half_angle > 0.0 && half_angle < FRAC_PI_2) {
            return Err(SrbError::InvalidArgument(format!(
                "cone half angle {half_angle} outside (0, pi/2)"
            )));
        }
        if axis.dim() >= axis.ambient_dim() {
            return Err(SrbError::InvalidArgument(
                "cone axis must be a proper subspace".into(),
            ));
        }
        Ok(Cone { axis, half_angle })
    }

    /// Cone around the line through `v`.
    pub fn around(v: &Vector, half_angle: f64) -> Result<Self> {
        Cone::new(Subspace::line(v)?, half_angle)
    }

    pub fn angle_to(&self, v: &Vector) -> Result<f64> {
        if v.norm() == 0.0 {
            return Err(SrbError::ZeroVector);
        }
        Ok(self.axis.angle_to(v))
    }

    /// Strict membership: the boundary is not part of the cone.
    pub fn contains(&self, v: &Vector) -> Result<bool> {
        Ok(self.angle_to(v)? < self.half_angle)
    }

    /// Random unit vector whose angle to the axis lies in `[lo, hi)`.
    fn sample_at<R: Rng + ?Sized>(&self, rng: &mut R, lo: f64, hi: f64) -> Vector {
        let inside = random_unit_in(&self.axis.basis(), rng);
        let comp = self.axis.complement().expect("proper subspace");
        let outside = random_unit_in(&comp.basis(), rng);
        let phi = lo + (hi - lo) * rng.random::<f64>();
        inside * phi.cos() + outside * phi.sin()
    }
}

fn random_unit_in<R: Rng + ?Sized>(basis: &[Vector], rng: &mut R) -> Vector {
    loop {
        let mut v = Vector::zeros(basis[0].len());
        for b in basis {
            v += b * (2.0 * rng.random::<f64>() - 1.0);
        }
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn cone_contains(k: &Cone, v: &Vector) -> Result<bool> {
    k.contains(v)
}

/// Unstable and stable cones at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConePair {
    pub unstable: Cone,
    pub stable: Cone,
}

impl ConePair {
    /// Smallest angle between a vector of `K^u` and a vector of `K^s`.
    pub fn gap_angle(&self) -> f64 {
        (self.unstable.axis.min_angle(&self.stable.axis)
            - self.unstable.half_angle
            - self.stable.half_angle)
            .max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extremum {
    Min,
    Max,
}

/// Extremum of `log |J v|` over unit `v` in the closed cone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeRate {
    pub value: f64,
    /// Bound on `|value - exact|` from the sampling step and a Lipschitz
    /// bound of `log |J v|` along the sampled curve. Zero when exact.
    pub resolution: f64,
    pub samples: usize,
}

/// Unit-sphere curves covering the cone boundary (or, in the plane, the
/// whole arc), parametrised on `[t0, t1]`, with `|v'(t)|` bound.
struct Boundary {
    curves: Vec<Box<dyn Fn(f64) -> Vector>>,
    span: (f64, f64),
    speed: f64,
    /// For planar arcs the endpoints are the boundary and sampling covers
    /// the interior too.
    planar: bool,
}

fn boundary(cone: &Cone) -> Boundary {
    let a = cone.half_angle;
    let d = cone.axis.ambient_dim();
    let axis = cone.axis.basis();
    let comp = cone.axis.complement().expect("proper subspace").basis();
    if d == 2 {
        let (e, p) = (axis[0].clone(), comp[0].clone());
        Boundary {
            curves: vec![Box::new(move |t: f64| &e * t.cos() + &p * t.sin())],
            span: (-a, a),
            speed: 1.0,
            planar: true,
        }
    } else if axis.len() == 1 {
        let e = axis[0].clone();
        let (p, q) = (comp[0].clone(), comp[1].clone());
        let (ca, sa) = (a.cos(), a.sin());
        Boundary {
            curves: vec![Box::new(move |t: f64| {
                &e * ca + (&p * t.cos() + &q * t.sin()) * sa
            })],
            span: (0.0, TAU),
            speed: sa,
            planar: false,
        }
    } else {
        let (p, q) = (axis[0].clone(), axis[1].clone());
        let n = comp[0].clone();
        let (ca, sa) = (a.cos(), a.sin());
        let mk = |sign: f64| {
            let (p, q, n) = (p.clone(), q.clone(), n.clone());
            Box::new(move |t: f64| (&p * t.cos() + &q * t.sin()) * ca + &n * (sign * sa))
                as Box<dyn Fn(f64) -> Vector>
        };
        Boundary {
            curves: vec![mk(1.0), mk(-1.0)],
            span: (0.0, TAU),
            speed: ca,
            planar: false,
        }
    }
}

/// Extremum of `log |J v|` over the unit vectors of `cone`.
///
/// Samples `samples` points per boundary curve. With `refine`, adds the
/// interior critical directions (eigenvectors of `J^T J` inside the cone)
/// and polishes the best boundary sample by golden-section search.
pub fn cone_log_norm(
    j: &Matrix,
    cone: &Cone,
    samples: usize,
    refine: bool,
    ext: Extremum,
) -> ConeRate {
    let samples = samples.max(2);
    let g = |v: &Vector| (j * v).norm().ln();
    let better = |a: f64, b: f64| match ext {
        Extremum::Min => a < b,
        Extremum::Max => a > b,
    };
    let sv = j.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    let b = boundary(cone);
    let (t0, t1) = b.span;
    let h = if b.planar {
        (t1 - t0) / (samples - 1) as f64
    } else {
        (t1 - t0) / samples as f64
    };
    let lipschitz = if smin > 0.0 {
        b.speed * smax / smin
    } else {
        f64::INFINITY
    };

    let mut best = match ext {
        Extremum::Min => f64::INFINITY,
        Extremum::Max => f64::NEG_INFINITY,
    };
    let mut best_at = (0usize, t0);
    for (ci, curve) in b.curves.iter().enumerate() {
        for i in 0..samples {
            let t = t0 + h * i as f64;
            let val = g(&curve(t));
            if better(val, best) {
                best = val;
                best_at = (ci, t);
            }
        }
    }
    if !refine {
        return ConeRate {
            value: best,
            resolution: lipschitz * h / 2.0,
            samples,
        };
    }

    let mut resolution = 0.0;
    if b.planar {
        // the boundary is the two endpoints; interior extrema are eigenvectors
        let ends = [t0, t1].map(|t| g(&(b.curves[0])(t)));
        best = match ext {
            Extremum::Min => ends[0].min(ends[1]),
            Extremum::Max => ends[0].max(ends[1]),
        };
    } else {
        let (ci, tc) = best_at;
        let curve = &b.curves[ci];
        let f = |t: f64| match ext {
            Extremum::Min => g(&curve(t)),
            Extremum::Max => -g(&curve(t)),
        };
        let (mut lo, mut hi) = (tc - h, tc + h);
        let r = (5f64.sqrt() - 1.0) / 2.0;
        let mut x1 = hi - r * (hi - lo);
        let mut x2 = lo + r * (hi - lo);
        let (mut f1, mut f2) = (f(x1), f(x2));
        for _ in 0..80 {
            if f1 < f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - r * (hi - lo);
                f1 = f(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + r * (hi - lo);
                f2 = f(x2);
            }
        }
        let val = g(&curve(0.5 * (lo + hi)));
        if better(val, best) {
            best = val;
        }
        resolution = lipschitz * (hi - lo).max(f64::EPSILON);
    }
    // interior critical directions
    let jtj = j.transpose() * j;
    let eig = jtj.symmetric_eigen();
    for k in 0..eig.eigenvalues.len() {
        let v = eig.eigenvectors.column(k).into_owned();
        if cone.axis.angle_to(&v) <= cone.half_angle {
            let val = g(&v);
            if better(val, best) {
                best = val;
            }
        }
    }
    ConeRate {
        value: best,
        resolution,
        samples,
    }
}

/// `lambda^u(x)`: infimum of `log |df_x v|` over unit `v` in `K^u`.
pub fn lambda_u(sys: &SystemHandle, ku: &Cone, x: &Point) -> Result<ConeRate> {
    let j = sys.jacobian(x)?;
    Ok(cone_log_norm(
        &j,
        ku,
        DEFAULT_CONE_SAMPLES,
        true,
        Extremum::Min,
    ))
}

/// `lambda^s(x)`: supremum of `log |df_x v|` over unit `v` in `K^s`.
pub fn lambda_s(sys: &SystemHandle, ks: &Cone, x: &Point) -> Result<ConeRate> {
    let j = sys.jacobian(x)?;
    Ok(cone_log_norm(
        &j,
        ks,
        DEFAULT_CONE_SAMPLES,
        true,
        Extremum::Max,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeInvarianceReport {
    pub samples: usize,
    /// Sampled points where the map or its derivative was undefined.
    pub skipped: usize,
    /// `v` in `K^u(x)` with `df v` outside `K^u(f x)`.
    pub unstable_violations: usize,
    /// `v` outside `K^s(x)` with `df v` inside `K^s(f x)`.
    pub stable_violations: usize,
    /// Smallest `a^u(f x) - angle(df v, E^u(f x))` seen.
    pub worst_unstable_margin: f64,
    /// Smallest `angle(df v, E^s(f x)) - a^s(f x)` seen.
    pub worst_stable_margin: f64,
}

/// Sampled check of `df K^u(x) ⊂ K^u(f x)` and of the stable condition in
/// its forward form: vectors outside `K^s(x)` stay outside `K^s(f x)`.
pub fn check_cone_invariance(
    sys: &SystemHandle,
    cone_field: &(dyn Fn(&Point) -> ConePair + Sync),
    samples: usize,
    seed: u64,
) -> Result<ConeInvarianceReport> {
    let mut rep = ConeInvarianceReport {
        samples,
        skipped: 0,
        unstable_violations: 0,
        stable_violations: 0,
        worst_unstable_margin: f64::INFINITY,
        worst_stable_margin: f64::INFINITY,
    };
    for i in 0..samples {
        let mut rng = stream_rng(seed, i as u64);
        let x = sys.region().sample(&mut rng)?;
        let (j, y) = match (sys.jacobian(&x), sys.map(&x)) {
            (Ok(j), Ok(y)) => (j, y),
            _ => {
                rep.skipped += 1;
                continue;
            }
        };
        let here = cone_field(&x);
        let there = cone_field(&y);

        let v = here
            .unstable
            .sample_at(&mut rng, 0.0, here.unstable.half_angle);
        let w = &j * v;
        let margin = match unit(&w) {
            Ok(w) => there.unstable.half_angle - there.unstable.axis.angle_to(&w),
            Err(_) => f64::NEG_INFINITY,
        };
        if margin <= 0.0 {
            rep.unstable_violations += 1;
        }
        rep.worst_unstable_margin = rep.worst_unstable_margin.min(margin);

        let a = here.stable.half_angle;
        let v = here
            .stable
            .sample_at(&mut rng, a + (FRAC_PI_2 - a) * 1e-12, FRAC_PI_2);
        let w = &j * v;
        let margin = match unit(&w) {
            Ok(w) => there.stable.axis.angle_to(&w) - there.stable.half_angle,
            Err(_) => f64::NEG_INFINITY,
        };
        if margin < 0.0 {
            rep.stable_violations += 1;
        }
        rep.worst_stable_margin = rep.worst_stable_margin.min(margin);
    }
    Ok(rep)
}
