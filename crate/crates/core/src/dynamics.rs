//! Uniform interface over every map in the laboratory: evaluation,
//! differentiation, orbit iteration and distance to the singularity set.

use std::f64::consts::TAU;
use std::fmt;
use std::io::Write;
use std::ops::Deref;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SrbError};
use crate::linalg::{Matrix, Point, Vector};

/// Halt threshold used when no other buffer is requested.
pub const DEFAULT_HALT_DISTANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionShape {
    /// Open axis-aligned box.
    Box,
    /// Unit disc times the circle `[0, 2pi)`, coordinates `(x, y, theta)`.
    SolidTorus,
    /// `[0,1)^d` with every axis periodic.
    Torus,
    /// All of R^d; used by linear oracle maps.
    Unbounded,
}

/// Trapping region together with its bounding box and periodic axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub shape: RegionShape,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub periodic: Vec<bool>,
}

impl Region {
    pub fn open_box(lower: &[f64], upper: &[f64]) -> Self {
        assert_eq!(lower.len(), upper.len());
        Region {
            shape: RegionShape::Box,
            lower: lower.to_vec(),
            upper: upper.to_vec(),
            periodic: vec![false; lower.len()],
        }
    }

    /// Symmetric box `(-h, h)^d`.
    pub fn centered_box(dim: usize, half_width: f64) -> Self {
        Region::open_box(&vec![-half_width; dim], &vec![half_width; dim])
    }

    pub fn solid_torus() -> Self {
        Region {
            shape: RegionShape::SolidTorus,
            lower: vec![-1.0, -1.0, 0.0],
            upper: vec![1.0, 1.0, TAU],
            periodic: vec![false, false, true],
        }
    }

    pub fn unit_torus(dim: usize) -> Self {
        Region {
            shape: RegionShape::Torus,
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
            periodic: vec![true; dim],
        }
    }

    pub fn unbounded(dim: usize) -> Self {
        Region {
            shape: RegionShape::Unbounded,
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
            periodic: vec![false; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn is_bounded(&self) -> bool {
        self.shape != RegionShape::Unbounded
    }

    pub fn contains(&self, p: &Point) -> bool {
        if !p.is_finite() || p.dim() != self.dim() {
            return false;
        }
        let c = p.as_slice();
        match self.shape {
            RegionShape::Box => c
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (lo, hi))| lo < x && x < hi),
            RegionShape::SolidTorus => {
                c[0] * c[0] + c[1] * c[1] < 1.0 && (0.0..TAU).contains(&c[2])
            }
            RegionShape::Torus => c.iter().all(|x| (0.0..1.0).contains(x)),
            RegionShape::Unbounded => true,
        }
    }

    /// Euclidean distance to the boundary; infinite for boundaryless regions.
    pub fn boundary_distance(&self, p: &Point) -> f64 {
        match self.shape {
            RegionShape::Box => p
                .as_slice()
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .map(|(x, (lo, hi))| (x - lo).min(hi - x))
                .fold(f64::INFINITY, f64::min)
                .max(0.0),
            RegionShape::SolidTorus => (1.0 - p[0].hypot(p[1])).max(0.0),
            RegionShape::Torus | RegionShape::Unbounded => f64::INFINITY,
        }
    }

    /// Displacement `to - from`, wrapped to the shortest representative on
    /// periodic axes.
    pub fn displacement(&self, from: &Point, to: &Point) -> Vector {
        let d = self.dim();
        Vector::from_fn(d, |i, _| {
            let mut v = to[i] - from[i];
            if self.periodic[i] {
                let period = self.upper[i] - self.lower[i];
                v -= period * (v / period).round();
            }
            v
        })
    }

    pub fn distance(&self, a: &Point, b: &Point) -> f64 {
        self.displacement(a, b).norm()
    }

    /// Reduce periodic coordinates into their fundamental interval.
    pub fn wrap(&self, p: &Point) -> Point {
        let mut q = *p;
        for i in 0..self.dim() {
            if self.periodic[i] {
                let period = self.upper[i] - self.lower[i];
                let mut v = (q[i] - self.lower[i]).rem_euclid(period);
                if v >= period {
                    v = 0.0;
                }
                q[i] = self.lower[i] + v;
            }
        }
        q
    }

    /// Uniform sample from the region (Lebesgue measure restricted to it).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Point> {
        if !self.is_bounded() {
            return Err(SrbError::InvalidArgument(
                "cannot sample an unbounded region".into(),
            ));
        }
        loop {
            let mut c = [0.0; crate::linalg::MAX_DIM];
            for i in 0..self.dim() {
                let u: f64 = rng.random();
                c[i] = self.lower[i] + u * (self.upper[i] - self.lower[i]);
            }
            let p = Point::new(&c[..self.dim()]);
            if self.contains(&p) {
                return Ok(p);
            }
        }
    }
}

/// A concrete map of a region into itself, possibly with singularities.
///
/// Implementations are immutable and shared across workers.
pub trait DynamicalSystem: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;
    fn dim(&self) -> usize;
    fn region(&self) -> &Region;
    /// System-specific parameter record, echoed into artifacts.
    fn parameters(&self) -> serde_json::Value;
    fn map(&self, x: &Point) -> Result<Point>;
    fn jacobian(&self, x: &Point) -> Result<Matrix>;
    fn invertible_on_attractor(&self) -> bool;

    /// True for systems with a singularity set.
    fn is_singular(&self) -> bool {
        false
    }
    /// Distance to the discontinuity/critical set `N` (without the region
    /// boundary). `None` for smooth systems.
    fn critical_distance(&self, _x: &Point) -> Option<f64> {
        None
    }
    /// A point at the given distance from `N`, moved along the normal through
    /// the foot point of `x`. Used to sample near the singularity.
    fn critical_offset(&self, _x: &Point, _distance: f64) -> Option<Point> {
        None
    }
    /// Explicit inverse branch, when the map is invertible onto its image.
    fn inverse(&self, _x: &Point) -> Option<Result<Point>> {
        None
    }
    /// Distance to the singularity set of the inverse, `N^- = f(N)`.
    fn inverse_critical_distance(&self, _x: &Point) -> Option<f64> {
        None
    }
    /// Whether a numerical check confirmed that the region is mapped into itself.
    fn trapping_verified(&self) -> bool {
        true
    }
}

/// Shared, immutable handle to a system.
#[derive(Clone)]
pub struct SystemHandle(Arc<dyn DynamicalSystem>);

impl SystemHandle {
    pub fn new<S: DynamicalSystem + 'static>(system: S) -> Self {
        SystemHandle(Arc::new(system))
    }

    /// Distance to `S+ = N ∪ ∂U`, or `None` for smooth systems.
    pub fn singularity_distance(&self, x: &Point) -> Option<f64> {
        self.0
            .critical_distance(x)
            .map(|d| d.min(self.0.region().boundary_distance(x)))
    }

    /// Distance to `S- = f(N) ∪ ∂U`, when the inverse is available.
    pub fn inverse_singularity_distance(&self, x: &Point) -> Option<f64> {
        self.0
            .inverse_critical_distance(x)
            .map(|d| d.min(self.0.region().boundary_distance(x)))
    }
}

impl Deref for SystemHandle {
    type Target = dyn DynamicalSystem;
    fn deref(&self) -> &Self::Target {
        &*self.0
    }
}

impl fmt::Debug for SystemHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HaltReason {
    Completed,
    HitSingularityBuffer,
    LeftRegion,
}

impl HaltReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            HaltReason::Completed => "completed",
            HaltReason::HitSingularityBuffer => "hit_singularity_buffer",
            HaltReason::LeftRegion => "left_region",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Orbit {
    pub points: Vec<Point>,
    pub halt_reason: HaltReason,
    pub start_seed: Option<u64>,
}

impl Orbit {
    /// Number of map applications recorded.
    pub fn steps(&self) -> usize {
        self.points.len().saturating_sub(1)
    }

    pub fn last(&self) -> &Point {
        self.points
            .last()
            .expect("orbit has at least its start point")
    }

    /// CSV with header `step,x0,...,x{d-1},halt_reason`; the halt reason is
    /// written on the final row only.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let d = self.points.first().map_or(0, |p| p.dim());
        let mut header = String::from("step");
        for i in 0..d {
            header.push_str(&format!(",x{i}"));
        }
        header.push_str(",halt_reason");
        writeln!(w, "{header}")?;
        let last = self.points.len().saturating_sub(1);
        for (k, p) in self.points.iter().enumerate() {
            let mut row = k.to_string();
            for c in p.as_slice() {
                row.push_str(&format!(",{c}"));
            }
            row.push(',');
            if k == last {
                row.push_str(self.halt_reason.as_str());
            }
            writeln!(w, "{row}")?;
        }
        Ok(())
    }
}

pub fn evaluate_map(sys: &SystemHandle, x: &Point) -> Result<Point> {
    sys.map(x)
}

pub fn evaluate_jacobian(sys: &SystemHandle, x: &Point) -> Result<Matrix> {
    sys.jacobian(x)
}

pub fn distance_to_singularity(sys: &SystemHandle, x: &Point) -> Result<f64> {
    sys.singularity_distance(x)
        .ok_or(SrbError::NotSingularSystem(sys.name()))
}

/// Iterate up to `n` steps from `x0`.
///
/// Halts early when the current point is closer than `halt_distance` to the
/// singularity set, or when the next point leaves the trapping region. Halting
/// is recorded in the orbit, never returned as an error.
pub fn iterate_orbit(sys: &SystemHandle, x0: &Point, n: usize, halt_distance: f64) -> Orbit {
    let mut points = Vec::with_capacity(n + 1);
    points.push(*x0);
    if !sys.region().contains(x0) {
        return Orbit {
            points,
            halt_reason: HaltReason::LeftRegion,
            start_seed: None,
        };
    }
    let mut x = *x0;
    let mut halt_reason = HaltReason::Completed;
    for _ in 0..n {
        if let Some(d) = sys.singularity_distance(&x) {
            if d < halt_distance || d == 0.0 {
                halt_reason = HaltReason::HitSingularityBuffer;
                break;
            }
        }
        match sys.map(&x) {
            Ok(y) if sys.region().contains(&y) => {
                points.push(y);
                x = y;
            }
            Ok(_) => {
                halt_reason = HaltReason::LeftRegion;
                break;
            }
            Err(_) => {
                halt_reason = HaltReason::HitSingularityBuffer;
                break;
            }
        }
    }
    Orbit {
        points,
        halt_reason,
        start_seed: None,
    }
}

/// One step under the halting rules of [`iterate_orbit`]; `None` when the
/// orbit would halt at `x`.
#[inline]
pub fn step_within(sys: &SystemHandle, x: &Point, halt_distance: f64) -> Option<Point> {
    if let Some(d) = sys.singularity_distance(x) {
        if d < halt_distance || d == 0.0 {
            return None;
        }
    }
    match sys.map(x) {
        Ok(y) if sys.region().contains(&y) => Some(y),
        _ => None,
    }
}

/// Central-difference Jacobian with step `h`, used to cross-check analytic
/// Jacobians.
pub fn finite_difference_jacobian(sys: &SystemHandle, x: &Point, h: f64) -> Result<Matrix> {
    let d = sys.dim();
    let region = sys.region();
    let mut m = Matrix::zeros(d, d);
    for j in 0..d {
        let mut xp = *x;
        let mut xm = *x;
        xp[j] += h;
        xm[j] -= h;
        let fp = sys.map(&xp)?;
        let fm = sys.map(&xm)?;
        let diff = region.displacement(&fm, &fp);
        for i in 0..d {
            m[(i, j)] = diff[i] / (2.0 * h);
        }
    }
    Ok(m)
}

/// Constants of the second-derivative blow-up bounds near `S+` (forward) and
/// `S-` (inverse), fitted as `|d^2 f| ≈ C d^{-alpha}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularBlowupCheck {
    pub forward: BlowupFit,
    pub backward: Option<BlowupFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupFit {
    pub c: f64,
    pub alpha: f64,
    /// `bounded` when the second derivative stays bounded (piecewise-affine
    /// branches); `power_law` when a log-log fit was made.
    pub kind: BlowupKind,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlowupKind {
    Bounded,
    PowerLaw,
}
