//! Tangent-space diagnostics: Lyapunov spectra, dominant directions, cone
//! conditions, effective hyperbolic times and the entropy-formula side.

mod cones;
mod effective;
mod splitting;

pub use cones::{
    check_cone_invariance, cone_contains, cone_log_norm, lambda_s, lambda_u, Cone,
    ConeInvarianceReport, ConePair, ConeRate, Extremum, DEFAULT_CONE_SAMPLES,
};
pub use effective::{
    asymptotic_density, bundle_rates, check_domination, effective_hyperbolic_times,
    effective_hyperbolic_times_brute_force, effective_rates, eh_diagnostics, entropy_formula_rhs,
    nue_averages, BundleRates, EffectiveRates, Eh2Point, HyperbolicityReport, NueAverages,
};
pub use splitting::{
    compute_splitting, regularity_proxy, transported_cones, RegularityProxy, SplittingFrames,
};

use serde::{Deserialize, Serialize};

use crate::dynamics::{HaltReason, Orbit, SystemHandle, DEFAULT_HALT_DISTANCE};
use crate::error::{Result, SrbError};
use crate::linalg::{
    canonical_sign, line_angle, qr_positive, unit, Matrix, Point, Subspace, Vector,
};

/// Residual below which a direction estimate counts as converged.
pub const DIRECTION_TOL: f64 = 1e-10;

const GENERIC_A: [f64; 3] = [0.8017, 0.5377, 0.2611];
const GENERIC_B: [f64; 3] = [-0.3146, 0.7283, 0.6089];

pub(crate) fn generic_pair(d: usize) -> (Vector, Vector) {
    (
        Vector::from_column_slice(&GENERIC_A[..d]),
        Vector::from_column_slice(&GENERIC_B[..d]),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    /// Sorted descending, natural log per step.
    pub exponents: Vec<f64>,
    pub n_steps: usize,
    pub requested_steps: usize,
    pub halt_reason: HaltReason,
    /// `(step, running exponents)` over the last tenth of the run, thinned.
    pub convergence_history: Vec<(usize, Vec<f64>)>,
    /// Largest deviation of the running estimates in the history from the final value.
    pub tolerance: f64,
    /// Average `log |det df|` along the orbit.
    pub mean_log_det: f64,
}

impl LyapunovEstimate {
    pub fn truncated(&self) -> bool {
        self.n_steps < self.requested_steps
    }

    /// Error out when the orbit halted before the requested length.
    pub fn require_complete(&self) -> Result<&Self> {
        if self.truncated() {
            Err(SrbError::OrbitHalted {
                steps: self.n_steps,
                requested: self.requested_steps,
                reason: self.halt_reason.as_str().into(),
            })
        } else {
            Ok(self)
        }
    }

    pub fn positive_sum(&self) -> f64 {
        self.exponents.iter().filter(|c| **c > 0.0).sum()
    }
}

/// Lyapunov spectrum from an orthonormal frame pushed along the orbit of
/// `x0`, re-orthonormalised by QR every `renorm_every` steps.
///
/// A halted orbit yields exponents over the steps actually taken, with
/// `halt_reason` set; see [`LyapunovEstimate::require_complete`].
pub fn lyapunov_spectrum(
    sys: &SystemHandle,
    x0: &Point,
    n: usize,
    renorm_every: usize,
) -> Result<LyapunovEstimate> {
    if renorm_every == 0 {
        return Err(SrbError::InvalidArgument(
            "renorm_every must be positive".into(),
        ));
    }
    let d = sys.dim();
    let mut q = Matrix::identity(d, d);
    let mut sums = vec![0.0; d];
    let mut log_det = 0.0;
    let mut x = *x0;
    let mut steps = 0;
    let mut halt_reason = HaltReason::Completed;
    let history_from = n - n / 10;
    let mut history = Vec::new();
    if !sys.region().contains(&x) {
        halt_reason = HaltReason::LeftRegion;
    }
    while steps < n && halt_reason == HaltReason::Completed {
        if sys
            .singularity_distance(&x)
            .is_some_and(|dist| dist < DEFAULT_HALT_DISTANCE)
        {
            halt_reason = HaltReason::HitSingularityBuffer;
            break;
        }
        let (j, y) = match (sys.jacobian(&x), sys.map(&x)) {
            (Ok(j), Ok(y)) => (j, y),
            _ => {
                halt_reason = HaltReason::HitSingularityBuffer;
                break;
            }
        };
        if !sys.region().contains(&y) {
            halt_reason = HaltReason::LeftRegion;
            break;
        }
        log_det += j.determinant().abs().ln();
        q = &j * q;
        steps += 1;
        x = y;
        if steps % renorm_every == 0 || steps == n {
            let (qn, r) = qr_positive(&q);
            for (i, s) in sums.iter_mut().enumerate() {
                *s += r[(i, i)].ln();
            }
            q = qn;
            if steps >= history_from {
                history.push((
                    steps,
                    sums.iter().map(|s| s / steps as f64).collect::<Vec<_>>(),
                ));
            }
        }
    }
    if steps % renorm_every != 0 && steps < n {
        let (_, r) = qr_positive(&q);
        for (i, s) in sums.iter_mut().enumerate() {
            *s += r[(i, i)].ln();
        }
    }
    let denom = steps.max(1) as f64;
    let mut exponents: Vec<f64> = sums.iter().map(|s| s / denom).collect();
    exponents.sort_by(|a, b| b.total_cmp(a));
    for (_, h) in history.iter_mut() {
        h.sort_by(|a, b| b.total_cmp(a));
    }
    let tolerance = history
        .iter()
        .flat_map(|(_, h)| h.iter().zip(&exponents).map(|(a, b)| (a - b).abs()))
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    let stride = history.len().div_ceil(100).max(1);
    let convergence_history = history.into_iter().step_by(stride).collect();
    Ok(LyapunovEstimate {
        exponents,
        n_steps: steps,
        requested_steps: n,
        halt_reason,
        convergence_history,
        tolerance,
        mean_log_det: log_det / denom,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionEstimate {
    /// Unit vector with canonical sign.
    pub direction: Vec<f64>,
    /// Angle between the lines carried by two generic start vectors.
    pub residual: f64,
    pub converged: bool,
    pub steps: usize,
}

impl DirectionEstimate {
    pub fn vector(&self) -> Vector {
        Vector::from_column_slice(&self.direction)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StableEstimate {
    pub subspace: Subspace,
    /// Unit normal of `E^s` (the dominant direction of the adjoint cocycle).
    pub normal: Vec<f64>,
    pub residual: f64,
    pub converged: bool,
    pub steps: usize,
}

impl StableEstimate {
    /// The stable direction when `E^s` is a line.
    pub fn direction(&self) -> Option<Vector> {
        (self.subspace.dim() == 1).then(|| canonical_sign(self.subspace.basis()[0].clone()))
    }
}

/// Two-vector power iteration; returns the final direction and residual
/// history.
fn power_pair<'a, I>(d: usize, mats: I) -> Result<(Vector, Vec<f64>)>
where
    I: Iterator<Item = Result<Matrix>> + 'a,
{
    let (mut v1, mut v2) = generic_pair(d);
    v1 = unit(&v1)?;
    v2 = unit(&v2)?;
    let mut residuals = Vec::new();
    for m in mats {
        let m = m?;
        let w1 = &m * &v1;
        let w2 = &m * &v2;
        let (n1, n2) = (w1.norm(), w2.norm());
        if n1 == 0.0 && n2 == 0.0 {
            return Err(SrbError::NoDominantDirection { residual: f64::NAN });
        }
        // a vector killed by a singular step is replaced by its partner
        v1 = if n1 > 0.0 { w1 / n1 } else { w2.clone() / n2 };
        v2 = if n2 > 0.0 { w2 / n2 } else { v1.clone() };
        residuals.push(line_angle(&v1, &v2));
    }
    Ok((v1, residuals))
}

fn judge(residuals: &[f64]) -> Result<(f64, bool)> {
    let last = residuals.last().copied().unwrap_or(f64::INFINITY);
    if last < DIRECTION_TOL {
        return Ok((last, true));
    }
    let mid = residuals
        .get(residuals.len() / 2)
        .copied()
        .unwrap_or(f64::INFINITY);
    if residuals.len() < 2 || last > 0.5 * mid {
        return Err(SrbError::NoDominantDirection { residual: last });
    }
    Ok((last, false))
}

/// Unstable direction at the last point of `orbit`, from pushing two generic
/// vectors through `df` along the final `k_back` steps.
pub fn estimate_unstable_direction(
    sys: &SystemHandle,
    orbit: &Orbit,
    k_back: usize,
) -> Result<DirectionEstimate> {
    let steps = orbit.steps();
    if k_back > steps {
        return Err(SrbError::HistoryTooShort {
            available: steps,
            requested: k_back,
        });
    }
    let pts = &orbit.points[steps - k_back..steps];
    let (v, residuals) = power_pair(sys.dim(), pts.iter().map(|p| sys.jacobian(p)))?;
    let (residual, converged) = judge(&residuals)?;
    Ok(DirectionEstimate {
        direction: canonical_sign(v).as_slice().to_vec(),
        residual,
        converged,
        steps: k_back,
    })
}

/// Stable subspace at the first point of `orbit_future`, from the adjoint
/// cocycle `df^T` iterated backwards over the first `k_fwd` steps. Its
/// dominant direction is the normal of `E^s`.
pub fn estimate_stable_direction(
    sys: &SystemHandle,
    orbit_future: &Orbit,
    k_fwd: usize,
) -> Result<StableEstimate> {
    let steps = orbit_future.steps();
    if k_fwd > steps {
        return Err(SrbError::HistoryTooShort {
            available: steps,
            requested: k_fwd,
        });
    }
    let pts = &orbit_future.points[..k_fwd];
    let (w, residuals) = power_pair(
        sys.dim(),
        pts.iter()
            .rev()
            .map(|p| sys.jacobian(p).map(|j| j.transpose())),
    )?;
    let (residual, converged) = judge(&residuals)?;
    let normal = canonical_sign(w);
    Ok(StableEstimate {
        subspace: Subspace::hyperplane(&normal)?,
        normal: normal.as_slice().to_vec(),
        residual,
        converged,
        steps: k_fwd,
    })
}

/// Angle in `[0, pi/2]` between the lines of `e_s` and `e_u`.
pub fn splitting_angle(e_s: &Vector, e_u: &Vector) -> f64 {
    line_angle(e_s, e_u)
}
