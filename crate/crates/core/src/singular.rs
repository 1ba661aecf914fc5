//! Interaction of orbits with the singularity set: membership in the core
//! sets, the measure condition near `S+`, and second-derivative blow-up.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{step_within, BlowupFit, BlowupKind, SingularBlowupCheck, SystemHandle};
use crate::error::{Result, SrbError};
use crate::exec::{stream_rng, Execution};
use crate::linalg::{Matrix, Point};

/// Default horizon for membership checks.
pub const DEFAULT_HORIZON: usize = 1000;
/// Bootstrap resamples behind the confidence interval on `q`.
pub const BOOTSTRAP_RESAMPLES: usize = 200;
/// Stream offset keeping bootstrap draws apart from the sampling streams.
const BOOTSTRAP_STREAM: u64 = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoreDirection {
    Forward,
    Backward,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreMembership {
    pub eps: f64,
    pub ell: u32,
    pub horizon: usize,
    pub verdict_forward: Option<bool>,
    pub verdict_backward: Option<bool>,
    /// Present only when both directions were checked.
    pub verdict_core: Option<bool>,
    /// Earliest step at which a threshold was violated.
    pub first_violation_step: Option<usize>,
    pub violation_direction: Option<CoreDirection>,
}

/// First `n <= horizon` with `d(x_n, S) < exp(-eps n) / ell`, where `x_n`
/// follows `step`. A step that fails or leaves the region is a violation.
fn first_violation(
    z: &Point,
    eps: f64,
    ell: u32,
    horizon: usize,
    dist: impl Fn(&Point) -> Option<f64>,
    step: impl Fn(&Point) -> Option<Point>,
) -> Option<usize> {
    let mut x = *z;
    for n in 0..=horizon {
        let threshold = (-eps * n as f64).exp() / ell as f64;
        if dist(&x).is_some_and(|d| d < threshold) {
            return Some(n);
        }
        if n == horizon {
            break;
        }
        match step(&x) {
            Some(y) => x = y,
            None => return Some(n + 1),
        }
    }
    None
}

/// Finite-horizon test of `d(f^{±n} z, S±) >= exp(-eps n) / ell` for
/// `n = 0..=horizon`.
pub fn core_membership(
    sys: &SystemHandle,
    z: &Point,
    eps: f64,
    ell: u32,
    horizon: usize,
    direction: CoreDirection,
) -> Result<CoreMembership> {
    if !(eps > 0.0) || ell == 0 {
        return Err(SrbError::InvalidArgument("need eps > 0 and ell >= 1".into()));
    }
    if !sys.region().contains(z) {
        return Err(SrbError::InvalidArgument("start point outside the trapping region".into()));
    }
    let region = sys.region();
    let fwd = matches!(direction, CoreDirection::Forward | CoreDirection::Both).then(|| {
        first_violation(
            z,
            eps,
            ell,
            horizon,
            |x| sys.singularity_distance(x),
            |x| sys.map(x).ok().filter(|y| region.contains(y)),
        )
    });
    let bwd = if matches!(direction, CoreDirection::Backward | CoreDirection::Both) {
        if sys.inverse(z).is_none() {
            return Err(SrbError::InverseUnavailable(sys.name()));
        }
        Some(first_violation(
            z,
            eps,
            ell,
            horizon,
            |x| sys.inverse_singularity_distance(x),
            |x| match sys.inverse(x) {
                Some(Ok(y)) if region.contains(&y) => Some(y),
                _ => None,
            },
        ))
    } else {
        None
    };
    let verdict_forward = fwd.map(|v| v.is_none());
    let verdict_backward = bwd.map(|v| v.is_none());
    let verdict_core = match (verdict_forward, verdict_backward) {
        (Some(f), Some(b)) => Some(f && b),
        _ => None,
    };
    let candidates = [
        fwd.flatten().map(|n| (n, CoreDirection::Forward)),
        bwd.flatten().map(|n| (n, CoreDirection::Backward)),
    ];
    let first = candidates.iter().flatten().min_by_key(|(n, _)| *n).copied();
    Ok(CoreMembership {
        eps,
        ell,
        horizon,
        verdict_forward,
        verdict_backward,
        verdict_core,
        first_violation_step: first.map(|f| f.0),
        violation_direction: first.map(|f| f.1),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreConditionFit {
    pub system: String,
    pub n: usize,
    pub eps_grid: Vec<f64>,
    pub masses: Vec<f64>,
    #[serde(rename = "C")]
    pub fitted_c: f64,
    #[serde(rename = "q")]
    pub fitted_q: f64,
    #[serde(rename = "q_ci")]
    pub q_confidence: (f64, f64),
    pub seed: u64,
    pub sample: usize,
    /// Sampled points whose orbit stayed defined for `n` steps.
    pub survivors: usize,
}

fn masses_of(distances: &[f64], eps_grid: &[f64], total: usize) -> Vec<f64> {
    let mut sorted: Vec<f64> = distances.iter().copied().filter(|d| !d.is_nan()).collect();
    sorted.sort_by(|a, b| a.total_cmp(b));
    eps_grid
        .iter()
        .map(|e| sorted.partition_point(|d| d < e) as f64 / total as f64)
        .collect()
}

/// Least squares `log m = log C + q log eps` over the positive entries.
fn power_fit(eps: &[f64], masses: &[f64]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = eps
        .iter()
        .zip(masses)
        .filter(|(e, m)| **e > 0.0 && **m > 0.0)
        .map(|(e, m)| (e.ln(), m.ln()))
        .collect();
    linear_fit(&pts).map(|(a, b)| (a.exp(), b))
}

/// Intercept and slope; `None` with fewer than two distinct abscissae.
fn linear_fit(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((my - slope * mx, slope))
}

/// Monte Carlo estimate of `m{x : f^n x defined, d(f^n x, S+) < eps}` on a
/// grid of `eps`, with a power-law fit and a bootstrap interval on `q`.
///
/// Every `eps` is evaluated on the same sample, so the masses are exactly
/// monotone in `eps`.
pub fn core_condition_estimate(
    sys: &SystemHandle,
    n: usize,
    eps_grid: &[f64],
    sample: usize,
    seed: u64,
    exec: Execution,
) -> Result<CoreConditionFit> {
    if !sys.is_singular() {
        return Err(SrbError::NotSingularSystem(sys.name()));
    }
    if sample == 0 {
        return Err(SrbError::EmptySample);
    }
    if eps_grid.is_empty()
        || eps_grid.iter().any(|e| !(*e >= 0.0) || !e.is_finite())
        || eps_grid.windows(2).any(|w| !(w[1] < w[0]))
    {
        return Err(SrbError::InvalidArgument(
            "eps grid must be nonempty, finite, nonnegative and strictly decreasing".into(),
        ));
    }
    let region = sys.region();
    let distances: Vec<f64> = exec.map_collect(sample, |i| {
        let mut rng = stream_rng(seed, i as u64);
        let mut x = region.sample(&mut rng).expect("bounded region");
        for _ in 0..n {
            match step_within(sys, &x, 0.0) {
                Some(y) => x = y,
                None => return f64::NAN,
            }
        }
        sys.singularity_distance(&x).unwrap_or(f64::INFINITY)
    });
    let survivors = distances.iter().filter(|d| !d.is_nan()).count();
    let masses = masses_of(&distances, eps_grid, sample);
    if masses.iter().zip(eps_grid).all(|(m, e)| *m == 0.0 || *e == 0.0) {
        return Err(SrbError::AllMassZero {
            cells: eps_grid.len(),
        });
    }
    let (c, q) = power_fit(eps_grid, &masses).ok_or_else(|| {
        SrbError::InvalidArgument("fewer than two nonzero masses; widen the eps grid".into())
    })?;
    let mut qs: Vec<f64> = exec
        .map_collect(BOOTSTRAP_RESAMPLES, |b| {
            let mut rng = stream_rng(seed, BOOTSTRAP_STREAM + b as u64);
            let re: Vec<f64> = (0..sample)
                .map(|_| distances[rng.random_range(0..sample)])
                .collect();
            power_fit(eps_grid, &masses_of(&re, eps_grid, sample)).map(|f| f.1)
        })
        .into_iter()
        .flatten()
        .collect();
    qs.sort_by(|a, b| a.total_cmp(b));
    let q_confidence = if qs.is_empty() {
        (q, q)
    } else {
        let at = |p: f64| qs[((p * (qs.len() - 1) as f64).round() as usize).min(qs.len() - 1)];
        (at(0.025), at(0.975))
    };
    Ok(CoreConditionFit {
        system: sys.name().into(),
        n,
        eps_grid: eps_grid.to_vec(),
        masses,
        fitted_c: c,
        fitted_q: q,
        q_confidence,
        seed,
        sample,
        survivors,
    })
}

/// Distances to the singular set drawn log-uniformly from this range.
pub const BLOWUP_DISTANCE_RANGE: (f64, f64) = (1e-7, 1e-2);
/// Second-derivative norms below this are treated as exactly zero.
const BOUNDED_FLOOR: f64 = 1e-9;
/// Finite-difference step relative to the singularity distance.
const FD_RELATIVE_STEP: f64 = 1e-3;

/// Largest Frobenius norm over axes of the central difference of `m`.
fn second_derivative_norm(
    x: &Point,
    h: f64,
    m: impl Fn(&Point) -> Result<Matrix>,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for j in 0..x.dim() {
        let mut xp = *x;
        let mut xm = *x;
        xp[j] += h;
        xm[j] -= h;
        worst = worst.max(((m(&xp)? - m(&xm)?) / (2.0 * h)).norm());
    }
    Ok(worst)
}

fn fit_blowup(pairs: &[(f64, f64)]) -> BlowupFit {
    let top = pairs.iter().map(|p| p.1).fold(0.0, f64::max);
    if top <= BOUNDED_FLOOR {
        return BlowupFit {
            c: top,
            alpha: 0.0,
            kind: BlowupKind::Bounded,
            samples: pairs.len(),
        };
    }
    let pts: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|p| p.1 > 0.0)
        .map(|(d, v)| (d.ln(), v.ln()))
        .collect();
    match linear_fit(&pts) {
        Some((a, b)) => BlowupFit {
            c: a.exp(),
            alpha: -b,
            kind: BlowupKind::PowerLaw,
            samples: pairs.len(),
        },
        None => BlowupFit {
            c: top,
            alpha: 0.0,
            kind: BlowupKind::Bounded,
            samples: pairs.len(),
        },
    }
}

fn log_uniform<R: Rng>(rng: &mut R) -> f64 {
    let (lo, hi) = BLOWUP_DISTANCE_RANGE;
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

/// Draws points at log-uniform distance from `S+`; the singular set, not
/// the region boundary, must be the nearest part of `S+`.
fn near_singular<R: Rng>(sys: &SystemHandle, rng: &mut R) -> Option<(Point, f64)> {
    for _ in 0..1000 {
        let x = sys.region().sample(rng).ok()?;
        let d = log_uniform(rng);
        let Some(y) = sys.critical_offset(&x, d) else { continue };
        if sys.region().contains(&y) && sys.region().boundary_distance(&y) > 2.0 * d {
            if let Some(dc) = sys.critical_distance(&y) {
                if dc > 0.0 {
                    return Some((y, dc));
                }
            }
        }
    }
    None
}

/// Empirical `(C1, alpha1)` in `|d^2 f_x| <= C1 d(x, S+)^{-alpha1}` and, when
/// the system has an inverse branch, `(C2, alpha2)` for `f^{-1}` near `S-`.
pub fn blowup_constants(sys: &SystemHandle, sample: usize, seed: u64) -> Result<SingularBlowupCheck> {
    if !sys.is_singular() {
        return Err(SrbError::NotSingularSystem(sys.name()));
    }
    if sample == 0 {
        return Err(SrbError::EmptySample);
    }
    let mut forward = Vec::with_capacity(sample);
    for i in 0..sample {
        let mut rng = stream_rng(seed, i as u64);
        let Some((y, d)) = near_singular(sys, &mut rng) else { continue };
        let v = second_derivative_norm(&y, FD_RELATIVE_STEP * d, |p| sys.jacobian(p))?;
        forward.push((d, v));
    }
    if forward.is_empty() {
        return Err(SrbError::InvalidArgument("no admissible points near the singular set".into()));
    }
    let backward = match backward_pairs(sys, sample, seed) {
        Ok(p) => Some(fit_blowup(&p)),
        Err(SrbError::InverseUnavailable(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(SingularBlowupCheck {
        forward: fit_blowup(&forward),
        backward,
    })
}

/// Backward pair alone; `InverseUnavailable` for systems without an inverse.
pub fn backward_blowup(sys: &SystemHandle, sample: usize, seed: u64) -> Result<BlowupFit> {
    if !sys.is_singular() {
        return Err(SrbError::NotSingularSystem(sys.name()));
    }
    Ok(fit_blowup(&backward_pairs(sys, sample, seed)?))
}

/// Samples images of points near `S+`, which lie near `f(N) ⊂ S-`, and
/// differentiates `d(f^-1)(y) = (df(f^-1 y))^-1`.
fn backward_pairs(sys: &SystemHandle, sample: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    let probe = sys.region().sample(&mut stream_rng(seed, 0))?;
    if sys.inverse(&probe).is_none() {
        return Err(SrbError::InverseUnavailable(sys.name()));
    }
    let inv_jac = |p: &Point| -> Result<Matrix> {
        let pre = sys.inverse(p).ok_or(SrbError::InverseUnavailable(sys.name()))??;
        sys.jacobian(&pre)?
            .try_inverse()
            .ok_or_else(|| SrbError::InvalidArgument("singular jacobian".into()))
    };
    let mut pairs = Vec::with_capacity(sample);
    for i in 0..sample {
        let mut rng = stream_rng(seed, BOOTSTRAP_STREAM + i as u64);
        let Some((x, _)) = near_singular(sys, &mut rng) else { continue };
        let Ok(y) = sys.map(&x) else { continue };
        if !sys.region().contains(&y) {
            continue;
        }
        let Some(d) = sys.inverse_critical_distance(&y).filter(|d| *d > 0.0) else { continue };
        if let Ok(v) = second_derivative_norm(&y, FD_RELATIVE_STEP * d, inv_jac) {
            pairs.push((d, v));
        }
    }
    if pairs.is_empty() {
        return Err(SrbError::InvalidArgument("no admissible points near f(N)".into()));
    }
    Ok(pairs)
}
