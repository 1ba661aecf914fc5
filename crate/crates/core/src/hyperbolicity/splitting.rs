use serde::{Deserialize, Serialize};

use super::cones::{Cone, ConePair};
use super::generic_pair;
use crate::dynamics::{Orbit, SystemHandle};
use crate::error::{Result, SrbError};
use crate::linalg::{unit, Matrix, Subspace, Vector};

/// Estimated `E^u` and `E^s` along an orbit, from one forward sweep of the
/// cocycle and one backward sweep of its adjoint. Entry `i` belongs to orbit
/// point `start + i`; the first and last `burn` points are dropped because
/// the sweeps have not converged there.
#[derive(Debug, Clone, PartialEq)]
pub struct SplittingFrames {
    pub start: usize,
    pub unstable: Vec<Vector>,
    pub stable: Vec<Subspace>,
}

impl SplittingFrames {
    pub fn len(&self) -> usize {
        self.unstable.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unstable.is_empty()
    }

    /// The part of `orbit` covered by the frames, plus the image of its last
    /// point, so that `steps()` equals `len()`.
    pub fn sub_orbit(&self, orbit: &Orbit) -> Orbit {
        Orbit {
            points: orbit.points[self.start..=self.start + self.len()].to_vec(),
            halt_reason: orbit.halt_reason,
            start_seed: orbit.start_seed,
        }
    }

    pub fn cone_pair(&self, i: usize, unstable_angle: f64, stable_angle: f64) -> Result<ConePair> {
        Ok(ConePair {
            unstable: Cone::around(&self.unstable[i], unstable_angle)?,
            stable: Cone::new(self.stable[i].clone(), stable_angle)?,
        })
    }

    pub fn splitting_angle(&self, i: usize) -> f64 {
        self.stable[i].angle_to(&self.unstable[i])
    }
}

pub fn compute_splitting(
    sys: &SystemHandle,
    orbit: &Orbit,
    burn: usize,
) -> Result<SplittingFrames> {
    let len = orbit.points.len();
    if len < 2 * burn + 2 {
        return Err(SrbError::HistoryTooShort {
            available: orbit.steps(),
            requested: 2 * burn + 1,
        });
    }
    let jacs: Vec<Matrix> = orbit.points[..len - 1]
        .iter()
        .map(|p| sys.jacobian(p))
        .collect::<Result<_>>()?;
    let d = sys.dim();
    let (mut v, mut w) = generic_pair(d);
    let mut unstable = Vec::with_capacity(len - 1);
    for j in &jacs {
        v = unit(&v).map_err(|_| SrbError::NoDominantDirection { residual: f64::NAN })?;
        unstable.push(v.clone());
        v = j * v;
    }
    let mut normals = vec![Vector::zeros(d); len - 1];
    for k in (0..len - 1).rev() {
        w = unit(&(jacs[k].transpose() * &w))
            .map_err(|_| SrbError::NoDominantDirection { residual: f64::NAN })?;
        normals[k] = w.clone();
    }
    let end = len - 1 - burn;
    let stable = normals[burn..end]
        .iter()
        .map(Subspace::hyperplane)
        .collect::<Result<_>>()?;
    Ok(SplittingFrames {
        start: burn,
        unstable: unstable[burn..end].to_vec(),
        stable,
    })
}

/// Cones of fixed half angles centred on the estimated splitting.
pub fn transported_cones(
    frames: &SplittingFrames,
    unstable_angle: f64,
    stable_angle: f64,
) -> Result<Vec<ConePair>> {
    (0..frames.len())
        .map(|i| frames.cone_pair(i, unstable_angle, stable_angle))
        .collect()
}

/// Finite-time stand-in for the level of a regular set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityProxy {
    /// Largest factor by which any orbit window under-expands `E^u` or
    /// over-expands `E^s` relative to the reference rates.
    pub c_n: f64,
    /// Smallest angle between `E^u` and `E^s` seen.
    pub k_n: f64,
    pub level: usize,
    /// Level after each prefix of the orbit, nondecreasing.
    pub level_history: Vec<usize>,
    pub reference_rates: (f64, f64),
}

fn level_of(c: f64, k: f64) -> usize {
    let v = c.max(1.0 / k);
    if v.is_finite() {
        ((v - 1e-9).ceil() as usize).max(1)
    } else {
        usize::MAX
    }
}

/// Regularity proxy along the frames' valid range of `orbit`.
///
/// `reference` fixes the asymptotic rates `(chi_u, chi_s)`; by default the
/// orbit averages of the one-step rates are used.
pub fn regularity_proxy(
    sys: &SystemHandle,
    orbit: &Orbit,
    frames: &SplittingFrames,
    reference: Option<(f64, f64)>,
) -> Result<RegularityProxy> {
    let n = frames.len();
    if n == 0 {
        return Err(SrbError::EmptySample);
    }
    let mut gu = Vec::with_capacity(n);
    let mut gs = Vec::with_capacity(n);
    for i in 0..n {
        let j = sys.jacobian(&orbit.points[frames.start + i])?;
        gu.push((&j * &frames.unstable[i]).norm().ln());
        gs.push(
            (&j * frames.stable[i].basis_matrix())
                .singular_values()
                .max()
                .ln(),
        );
    }
    let (chi_u, chi_s) = reference.unwrap_or_else(|| {
        (
            gu.iter().sum::<f64>() / n as f64,
            gs.iter().sum::<f64>() / n as f64,
        )
    });
    let (mut end_u, mut end_s, mut worst) = (0.0f64, 0.0f64, 0.0f64);
    let mut k_n = std::f64::consts::FRAC_PI_2;
    let mut level_history = Vec::with_capacity(n);
    for i in 0..n {
        // Kadane: best window ending here
        end_u = (end_u + chi_u - gu[i]).max(0.0);
        end_s = (end_s + gs[i] - chi_s).max(0.0);
        worst = worst.max(end_u).max(end_s);
        let angle = frames.stable[i].angle_to(&frames.unstable[i]);
        k_n = k_n.min(angle);
        level_history.push(level_of(worst.exp(), k_n));
    }
    let c_n = worst.exp();
    Ok(RegularityProxy {
        c_n,
        k_n,
        level: level_of(c_n, k_n),
        level_history,
        reference_rates: (chi_u, chi_s),
    })
}
