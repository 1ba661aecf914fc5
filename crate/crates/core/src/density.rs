//! Conditional densities of SRB measures along one-dimensional unstable
//! leaves, and their comparison with empirical push-forward histograms.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::SystemHandle;
use crate::error::{Result, SrbError};
use crate::linalg::{Point, Vector};
use crate::measures::{GridHistogram, LeafSegment};

/// `|df_x e_u|`.
pub fn unstable_jacobian(sys: &SystemHandle, x: &Point, e_u: &Vector) -> Result<f64> {
    Ok((sys.jacobian(x)? * e_u).norm())
}

fn check_index(leaf: &LeafSegment, i: usize) -> Result<()> {
    if i >= leaf.samples.len() {
        return Err(SrbError::InvalidArgument(format!(
            "sample index {i} out of range ({} samples)",
            leaf.samples.len()
        )));
    }
    Ok(())
}

/// Log of [`rho_u_n`]; swapping `y` and `z` negates it exactly.
pub fn log_rho_u_n(leaf: &LeafSegment, y: usize, z: usize, n: usize) -> Result<f64> {
    check_index(leaf, y)?;
    check_index(leaf, z)?;
    let h = leaf.n_history();
    if n > h {
        return Err(SrbError::HistoryTooShort {
            available: h,
            requested: n,
        });
    }
    let (ly, lz) = (&leaf.log_jacobians[y], &leaf.log_jacobians[z]);
    Ok((0..n).map(|k| ly[k] - lz[k]).sum())
}

/// `prod_{k=1..n} J^u(f^-k y) / J^u(f^-k z)` along the stored backward chains.
pub fn rho_u_n(leaf: &LeafSegment, y: usize, z: usize, n: usize) -> Result<f64> {
    Ok(log_rho_u_n(leaf, y, z, n)?.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoLimit {
    pub value: f64,
    pub truncation_n: usize,
    /// Bound on the log of the neglected tail.
    pub tail_bound: f64,
    /// Measured geometric contraction rate of the backward chains.
    pub rate: f64,
    /// Empirical Lipschitz constant of `log J^u` along the chains.
    pub holder: f64,
}

/// Truncation of the infinite product once the geometric tail bound
/// `H d(y,z) rate^{n+1} / (1 - rate)` drops below `tol`.
pub fn rho_u_limit(
    sys: &SystemHandle,
    leaf: &LeafSegment,
    y: usize,
    z: usize,
    tol: f64,
) -> Result<RhoLimit> {
    check_index(leaf, y)?;
    check_index(leaf, z)?;
    let h = leaf.n_history();
    if h == 0 {
        return Err(SrbError::HistoryTooShort {
            available: 0,
            requested: 1,
        });
    }
    let dist = |a: &Point, b: &Point| sys.region().distance(a, b);
    let d0 = dist(&leaf.samples[y], &leaf.samples[z]);
    if y == z || d0 == 0.0 {
        return Ok(RhoLimit {
            value: rho_u_n(leaf, y, z, 1)?,
            truncation_n: 1,
            tail_bound: 0.0,
            rate: 0.0,
            holder: 0.0,
        });
    }
    let mut rate: f64 = 0.0;
    let mut holder: f64 = 0.0;
    for k in 1..=h {
        let dk = dist(
            &leaf.backward_chains[y][k - 1],
            &leaf.backward_chains[z][k - 1],
        );
        rate = rate.max((dk / d0).powf(1.0 / k as f64));
        if dk > 0.0 {
            let dl = (leaf.log_jacobians[y][k - 1] - leaf.log_jacobians[z][k - 1]).abs();
            holder = holder.max(dl / dk);
        }
    }
    if !(rate < 1.0) {
        return Err(SrbError::NoContraction { rate });
    }
    let tail = |n: usize| holder * d0 * rate.powi(n as i32 + 1) / (1.0 - rate);
    let n = match (1..=h).find(|&n| tail(n) < tol) {
        Some(n) => n,
        None => {
            let need = ((tol * (1.0 - rate) / (holder * d0)).ln() / rate.ln()).ceil() as usize;
            return Err(SrbError::HistoryTooShort {
                available: h,
                requested: need.max(h + 1),
            });
        }
    };
    Ok(RhoLimit {
        value: rho_u_n(leaf, y, z, n)?,
        truncation_n: n,
        tail_bound: tail(n),
        rate,
        holder,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    pub base_index: usize,
    pub arc_length: Vec<f64>,
    /// `rho(x, y_i)` with `x` the base point.
    pub rho_values: Vec<f64>,
    pub normalizer: f64,
    pub d_values: Vec<f64>,
    /// Largest truncation over the samples.
    pub truncation_n: usize,
    /// Largest tail bound over the samples.
    pub tail_bound: f64,
}

impl DensityProfile {
    /// `arc_length,rho,d`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "arc_length,rho,d")?;
        for i in 0..self.rho_values.len() {
            writeln!(
                w,
                "{},{},{}",
                self.arc_length[i], self.rho_values[i], self.d_values[i]
            )?;
        }
        Ok(())
    }

    /// Trapezoid integral of `d` against the leaf weights.
    pub fn quadrature(&self, leaf: &LeafSegment) -> f64 {
        self.d_values
            .iter()
            .zip(&leaf.weights)
            .map(|(d, w)| d * w)
            .sum()
    }
}

/// `d^u(x, y_i) = rho(x, y_i) / ∫ rho(x, .) dm`, normalised by trapezoid
/// quadrature over the leaf.
pub fn conditional_density_profile(
    sys: &SystemHandle,
    leaf: &LeafSegment,
    tol: f64,
) -> Result<DensityProfile> {
    leaf.validate()?;
    let x = leaf.base_index;
    let mut rho = Vec::with_capacity(leaf.samples.len());
    let mut trunc = 0;
    let mut tail: f64 = 0.0;
    for i in 0..leaf.samples.len() {
        let r = rho_u_limit(sys, leaf, x, i, tol)?;
        trunc = trunc.max(r.truncation_n);
        tail = tail.max(r.tail_bound);
        rho.push(r.value);
    }
    let normalizer: f64 = rho.iter().zip(&leaf.weights).map(|(r, w)| r * w).sum();
    Ok(DensityProfile {
        base_index: x,
        arc_length: leaf.arc_length.clone(),
        d_values: rho.iter().map(|r| r / normalizer).collect(),
        rho_values: rho,
        normalizer,
        truncation_n: trunc,
        tail_bound: tail,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsoluteContinuityReport {
    pub discrepancy: f64,
    pub band_mass: f64,
    pub band_width_cells: f64,
    pub observed: Vec<f64>,
    pub predicted: Vec<f64>,
    pub truncation_n: usize,
    pub tail_bound: f64,
}

/// Default band half-width, in grid cells.
pub const DEFAULT_BAND_CELLS: f64 = 2.0;
/// Upper limit on the default number of leaf-coordinate bins.
pub const MAX_BINS: usize = 16;
/// Grid cells of leaf length per default bin; finer bins only resolve the
/// smearing of leaf mass over whole cells.
pub const CELLS_PER_BIN: f64 = 3.0;
/// Sub-points per axis used to spread a cell's mass.
pub const DEFAULT_SUBSAMPLES: usize = 4;

const MIN_BAND_MASS: f64 = 0.01;

/// L1 distance between the leaf-coordinate distribution of the histogram
/// mass within `band_cells` grid cells of the leaf and the predicted density
/// profile, both normalised over arc-length bins. With `bins = None` the leaf
/// gets one bin per [`CELLS_PER_BIN`] cells of length, between 2 and
/// [`MAX_BINS`].
///
/// Each cell's mass is spread over `sub^d` interior points, which are
/// projected onto the leaf polyline; points projecting past either end of the
/// leaf are dropped. Distances are measured in cell units per axis.
pub fn absolute_continuity_check(
    sys: &SystemHandle,
    leaf: &LeafSegment,
    nu: &GridHistogram,
    profile: &DensityProfile,
    band_cells: f64,
    bins: Option<usize>,
    sub: usize,
) -> Result<AbsoluteContinuityReport> {
    leaf.validate()?;
    if bins == Some(0) || sub == 0 || !(band_cells > 0.0) {
        return Err(SrbError::InvalidArgument(
            "bins, subsamples and band width must be positive".into(),
        ));
    }
    let grid = &nu.grid;
    let region = sys.region();
    let d = grid.dim();
    let scale: Vec<f64> = (0..d).map(|i| 1.0 / grid.cell_width(i)).collect();
    let n = leaf.samples.len();
    let total = *leaf.arc_length.last().unwrap();
    // leaf samples in scaled coordinates relative to the base point
    let base = leaf.samples[leaf.base_index];
    let scaled = |p: &Point| -> Vec<f64> {
        let v = region.displacement(&base, p);
        (0..d).map(|i| v[i] * scale[i]).collect()
    };
    let poly: Vec<Vec<f64>> = leaf.samples.iter().map(&scaled).collect();
    let bins = bins.unwrap_or_else(|| {
        let cells: f64 = poly.windows(2).map(|w| dist2(&w[0], &w[1]).sqrt()).sum();
        ((cells / CELLS_PER_BIN) as usize).clamp(2, MAX_BINS)
    });
    let reach = band_cells + 0.5 * (d as f64).sqrt() + 1e-9;
    let mut observed = vec![0.0; bins];
    let mut band_mass = 0.0;
    let subs = sub.pow(d as u32);
    for (c, m) in nu.masses.iter().enumerate() {
        if *m == 0.0 {
            continue;
        }
        let cq = scaled(&grid.center(c));
        let (near, dist) = nearest(&poly, &cq);
        if dist > reach {
            continue;
        }
        let lo = grid.cell_lower(c);
        let share = m / subs as f64;
        for s in 0..subs {
            let mut q = lo;
            let mut r = s;
            for i in (0..d).rev() {
                q[i] += ((r % sub) as f64 + 0.5) / sub as f64 * grid.cell_width(i);
                r /= sub;
            }
            let qs = scaled(&q);
            let Some((arc, dq)) = project(&poly, &leaf.arc_length, &qs, near) else {
                continue;
            };
            if dq <= band_cells {
                let b = ((arc / total * bins as f64) as usize).min(bins - 1);
                observed[b] += share;
                band_mass += share;
            }
        }
    }
    if band_mass < MIN_BAND_MASS {
        return Err(SrbError::InsufficientMass {
            fraction: band_mass,
            required: MIN_BAND_MASS,
        });
    }
    for o in observed.iter_mut() {
        *o /= band_mass;
    }
    let mut predicted = vec![0.0; bins];
    for i in 1..n {
        let h = leaf.arc_length[i] - leaf.arc_length[i - 1];
        let mid = 0.5 * (leaf.arc_length[i] + leaf.arc_length[i - 1]);
        let b = ((mid / total * bins as f64) as usize).min(bins - 1);
        predicted[b] += 0.5 * (profile.d_values[i] + profile.d_values[i - 1]) * h;
    }
    let ps: f64 = predicted.iter().sum();
    for p in predicted.iter_mut() {
        *p /= ps;
    }
    let discrepancy = observed
        .iter()
        .zip(&predicted)
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(AbsoluteContinuityReport {
        discrepancy,
        band_mass,
        band_width_cells: band_cells,
        observed,
        predicted,
        truncation_n: profile.truncation_n,
        tail_bound: profile.tail_bound,
    })
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(poly: &[Vec<f64>], q: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, p) in poly.iter().enumerate() {
        let d = dist2(p, q);
        if d < best.1 {
            best = (i, d);
        }
    }
    (best.0, best.1.sqrt())
}

/// Arc coordinate and distance of the projection of `q` onto the polyline,
/// searched from the vertex nearest to `q`. `None` past either end.
fn project(poly: &[Vec<f64>], arc: &[f64], q: &[f64], hint: usize) -> Option<(f64, f64)> {
    // the nearest vertex can move away from the hint when q is inside the band
    let (i, _) = {
        let lo = hint.saturating_sub(64);
        let hi = (hint + 64).min(poly.len() - 1);
        let (j, d) = nearest(&poly[lo..=hi], q);
        (lo + j, d)
    };
    let mut best: Option<(f64, f64)> = None;
    let last = poly.len() - 1;
    for seg in [i.checked_sub(1), (i < last).then_some(i)]
        .into_iter()
        .flatten()
    {
        let (a, b) = (&poly[seg], &poly[seg + 1]);
        let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
        let len2: f64 = ab.iter().map(|x| x * x).sum();
        if len2 == 0.0 {
            continue;
        }
        let t = a
            .iter()
            .zip(q)
            .zip(&ab)
            .map(|((x, y), v)| (y - x) * v)
            .sum::<f64>()
            / len2;
        if (seg == 0 && t < 0.0) || (seg + 1 == last && t > 1.0) {
            continue;
        }
        let t = t.clamp(0.0, 1.0);
        let foot: Vec<f64> = a.iter().zip(&ab).map(|(x, v)| x + t * v).collect();
        let dist = dist2(&foot, q).sqrt();
        let s = arc[seg] + t * (arc[seg + 1] - arc[seg]);
        if best.is_none_or(|(_, bd)| dist < bd) {
            best = Some((s, dist));
        }
    }
    best
}
