//! Small fixed-dimension points plus the handful of tangent-space helpers the
//! diagnostics need. Phase points are `Copy` so orbit loops never allocate;
//! tangent vectors and Jacobians use nalgebra's dynamic types.

use std::fmt;
use std::ops::{Index, IndexMut};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Result, SrbError};

/// Largest phase-space dimension among the supported systems.
pub const MAX_DIM: usize = 3;

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

#[derive(Clone, Copy, PartialEq)]
pub struct Point {
    coords: [f64; MAX_DIM],
    dim: usize,
}

impl Point {
    pub fn new(coords: &[f64]) -> Self {
        assert!(
            !coords.is_empty() && coords.len() <= MAX_DIM,
            "point dimension {} unsupported",
            coords.len()
        );
        let mut c = [0.0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Point {
            coords: c,
            dim: coords.len(),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Point::new(&vec![0.0; dim])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    pub fn to_vector(&self) -> Vector {
        Vector::from_column_slice(self.as_slice())
    }

    pub fn from_vector(v: &Vector) -> Self {
        Point::new(v.as_slice())
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|c| c.is_finite())
    }

    /// `self + t * v` in ambient coordinates (no periodic reduction).
    pub fn offset(&self, v: &Vector, t: f64) -> Point {
        let mut p = *self;
        for i in 0..self.dim {
            p.coords[i] += t * v[i];
        }
        p
    }
}

impl Index<usize> for Point {
    type Output = f64;
    #[inline]
    fn index(&self, i: usize) -> &f64 {
        &self.as_slice()[i]
    }
}

impl IndexMut<usize> for Point {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        let d = self.dim;
        &mut self.coords[..d][i]
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.as_slice()).finish()
    }
}

impl Serialize for Point {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.as_slice().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        if v.is_empty() || v.len() > MAX_DIM {
            return Err(serde::de::Error::custom(format!(
                "point dimension {} unsupported",
                v.len()
            )));
        }
        Ok(Point::new(&v))
    }
}

pub fn unit(v: &Vector) -> Result<Vector> {
    let n = v.norm();
    if n == 0.0 || !n.is_finite() {
        return Err(SrbError::ZeroVector);
    }
    Ok(v / n)
}

/// Canonical sign for a line representative: largest-magnitude entry positive.
pub fn canonical_sign(mut v: Vector) -> Vector {
    let imax = v.iamax();
    if v[imax] < 0.0 {
        v.neg_mut();
    }
    v
}

/// Angle in `[0, pi/2]` between the lines spanned by `u` and `v`.
pub fn line_angle(u: &Vector, v: &Vector) -> f64 {
    let uh = u / u.norm();
    let along = uh.dot(v);
    let perp = v - &uh * along;
    perp.norm().atan2(along.abs())
}

/// Orthonormal basis of a linear subspace of R^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subspace {
    basis: Vec<Vec<f64>>,
}

impl Subspace {
    /// Span of the given vectors, orthonormalised by Gram-Schmidt.
    pub fn span(vectors: &[Vector]) -> Result<Self> {
        let mut basis: Vec<Vector> = Vec::new();
        for v in vectors {
            let mut w = v.clone();
            for b in &basis {
                w -= b * b.dot(&w);
            }
            if w.norm() <= 1e-12 * v.norm().max(1.0) {
                return Err(SrbError::InvalidArgument(
                    "subspace generators are linearly dependent".into(),
                ));
            }
            basis.push(unit(&w)?);
        }
        if basis.is_empty() {
            return Err(SrbError::InvalidArgument("empty subspace".into()));
        }
        Ok(Subspace {
            basis: basis.iter().map(|b| b.as_slice().to_vec()).collect(),
        })
    }

    pub fn line(v: &Vector) -> Result<Self> {
        Subspace::span(std::slice::from_ref(v))
    }

    /// Orthogonal complement of the line through `normal`.
    pub fn hyperplane(normal: &Vector) -> Result<Self> {
        let n = unit(normal)?;
        let d = n.len();
        let mut gens = Vec::new();
        for i in 0..d {
            let mut e = Vector::zeros(d);
            e[i] = 1.0;
            let w = &e - &n * n.dot(&e);
            gens.push(w);
        }
        // keep the d-1 best-conditioned projections
        gens.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
        let mut basis: Vec<Vector> = Vec::new();
        for g in gens {
            if basis.len() == d - 1 {
                break;
            }
            let mut w = g.clone();
            for b in &basis {
                w -= b * b.dot(&w);
            }
            if w.norm() > 1e-8 {
                basis.push(unit(&w)?);
            }
        }
        Subspace::span(&basis)
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis[0].len()
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> Vec<Vector> {
        self.basis
            .iter()
            .map(|b| Vector::from_column_slice(b))
            .collect()
    }

    pub fn basis_matrix(&self) -> Matrix {
        Matrix::from_columns(&self.basis())
    }

    /// Orthogonal projection of `v` onto the subspace.
    pub fn project(&self, v: &Vector) -> Vector {
        let mut p = Vector::zeros(v.len());
        for b in self.basis() {
            p += &b * b.dot(v);
        }
        p
    }

    /// Angle in `[0, pi/2]` between a nonzero vector and the subspace.
    pub fn angle_to(&self, v: &Vector) -> f64 {
        let p = self.project(v);
        (v - &p).norm().atan2(p.norm())
    }

    /// Smallest principal angle between two subspaces.
    pub fn min_angle(&self, other: &Subspace) -> f64 {
        if self.dim() == 1 {
            return other.angle_to(&self.basis()[0]);
        }
        if other.dim() == 1 {
            return self.angle_to(&other.basis()[0]);
        }
        let cross = self.basis_matrix().transpose() * other.basis_matrix();
        let smax = cross.singular_values().max().min(1.0);
        smax.acos()
    }

    /// An orthonormal basis of the orthogonal complement.
    pub fn complement(&self) -> Option<Subspace> {
        let d = self.ambient_dim();
        if self.dim() == d {
            return None;
        }
        let mut basis: Vec<Vector> = self.basis();
        let k = basis.len();
        for i in 0..d {
            let mut e = Vector::zeros(d);
            e[i] = 1.0;
            for b in &basis {
                e -= b * b.dot(&e);
            }
            if e.norm() > 1e-8 {
                basis.push(e.normalize());
            }
            if basis.len() == d {
                break;
            }
        }
        Subspace::span(&basis[k..]).ok()
    }
}

/// QR factorisation with the diagonal of `R` made nonnegative.
pub fn qr_positive(m: &Matrix) -> (Matrix, Matrix) {
    let qr = m.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for i in 0..r.nrows().min(r.ncols()) {
        if r[(i, i)] < 0.0 {
            for j in 0..r.ncols() {
                r[(i, j)] = -r[(i, j)];
            }
            for j in 0..q.nrows() {
                q[(j, i)] = -q[(j, i)];
            }
        }
    }
    (q, r)
}

/// Operator 2-norm.
pub fn spectral_norm(m: &Matrix) -> f64 {
    m.singular_values().max()
}
