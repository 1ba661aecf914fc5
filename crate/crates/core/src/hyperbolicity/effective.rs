use std::io::Write;

use serde::{Deserialize, Serialize};

use super::cones::{lambda_s, lambda_u, ConePair};
use super::splitting::SplittingFrames;
use super::LyapunovEstimate;
use crate::dynamics::{Orbit, SystemHandle};
use crate::error::{Result, SrbError};
use crate::linalg::{Matrix, Point};

/// Burn-in before the default `lambda_bar` is read off the running average.
const LAMBDA_BAR_BURN_IN: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveRates {
    /// Defect from domination.
    pub delta: f64,
    /// Effective hyperbolicity rate.
    pub lambda: f64,
}

/// `delta = max(0, lambda_s - lambda_u) / alpha`, `lambda = min(lambda_u - delta, -lambda_s)`.
pub fn effective_rates(lambda_u: f64, lambda_s: f64, holder_alpha: f64) -> Result<EffectiveRates> {
    if !(holder_alpha > 0.0 && holder_alpha <= 1.0) {
        return Err(SrbError::InvalidArgument(format!(
            "Hölder exponent {holder_alpha} outside (0, 1]"
        )));
    }
    let delta = (lambda_s - lambda_u).max(0.0) / holder_alpha;
    Ok(EffectiveRates {
        delta,
        lambda: (lambda_u - delta).min(-lambda_s),
    })
}

/// Times `n` in `1..=len` with `sum_{j=k}^{n-1} rate_j >= lambda_bar (n - k)`
/// for every `k < n`.
///
/// With `S_m = sum_{j<m} (rate_j - lambda_bar)` the condition reads
/// `S_n >= max_{k<n} S_k`, so a single running maximum suffices.
pub fn effective_hyperbolic_times(rates: &[f64], lambda_bar: f64) -> Vec<usize> {
    let mut out = Vec::new();
    let mut s = 0.0;
    let mut running_max = 0.0f64;
    for (i, r) in rates.iter().enumerate() {
        s += r - lambda_bar;
        if s >= running_max {
            out.push(i + 1);
        }
        running_max = running_max.max(s);
    }
    out
}

/// Quadratic reference implementation of [`effective_hyperbolic_times`].
pub fn effective_hyperbolic_times_brute_force(rates: &[f64], lambda_bar: f64) -> Vec<usize> {
    (1..=rates.len())
        .filter(|&n| {
            (0..n).all(|k| {
                let sum: f64 = rates[k..n].iter().map(|r| r - lambda_bar).sum();
                sum >= 0.0
            })
        })
        .collect()
}

/// Finite-horizon upper and lower density of `times` over `[0, N)`: the max
/// and min of `#(times ∩ [0, M)) / M` for `M` in `[N/2, N]`.
pub fn asymptotic_density(times: &[usize], horizon: usize) -> Result<(f64, f64)> {
    if horizon < 2 {
        return Err(SrbError::InvalidArgument(
            "horizon must be at least 2".into(),
        ));
    }
    let mut sorted = times.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let m0 = horizon.div_ceil(2);
    let mut count = sorted.iter().filter(|&&t| t < m0).count();
    let mut idx = count;
    let (mut upper, mut lower) = (f64::NEG_INFINITY, f64::INFINITY);
    for m in m0..=horizon {
        while idx < sorted.len() && sorted[idx] < m {
            idx += 1;
            count += 1;
        }
        let dens = count as f64 / m as f64;
        upper = upper.max(dens);
        lower = lower.min(dens);
    }
    Ok((upper, lower))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eh2Point {
    pub threshold: f64,
    pub upper_density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicityReport {
    pub system: String,
    pub steps: usize,
    pub holder_alpha: f64,
    pub lambda_u: Vec<f64>,
    pub lambda_s: Vec<f64>,
    pub delta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub theta: Vec<f64>,
    pub effective_times: Vec<usize>,
    pub lambda_bar: f64,
    /// Upper and lower finite-horizon density of the effective times.
    pub effective_time_density: (f64, f64),
    #[serde(rename = "EH1_running_average")]
    pub eh1_running_average: f64,
    #[serde(rename = "EH2_profile")]
    pub eh2_profile: Vec<Eh2Point>,
    pub domination_ratio_max: f64,
    /// Largest sampling resolution among the cone extrema.
    pub rate_resolution: f64,
}

impl HyperbolicityReport {
    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    /// One row per orbit step `k`; `is_effective_time` marks `k + 1` in the
    /// effective-time set, the time reached after applying step `k`.
    pub fn write_rates_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "step,lambda_u,lambda_s,delta,lambda,theta,is_effective_time"
        )?;
        let mut eff = self.effective_times.iter().peekable();
        for k in 0..self.steps {
            let is_eff = if eff.peek() == Some(&&(k + 1)) {
                eff.next();
                1
            } else {
                0
            };
            writeln!(
                w,
                "{k},{},{},{},{},{},{is_eff}",
                self.lambda_u[k], self.lambda_s[k], self.delta[k], self.lambda[k], self.theta[k]
            )?;
        }
        Ok(())
    }
}

/// Effective-hyperbolicity diagnostics along `orbit`.
///
/// `cone_field(k, x)` gives the cone pair at the `k`-th orbit point. When
/// `lambda_bar` is `None` it defaults to half the running average of
/// `lambda` after a burn-in of 1000 steps (or over the whole orbit if shorter).
pub fn eh_diagnostics(
    sys: &SystemHandle,
    orbit: &Orbit,
    cone_field: &dyn Fn(usize, &Point) -> Result<ConePair>,
    holder_alpha: f64,
    lambda_bar: Option<f64>,
    angle_thresholds: &[f64],
) -> Result<HyperbolicityReport> {
    let n = orbit.steps();
    if n < 100 {
        return Err(SrbError::InvalidArgument(format!(
            "orbit has {n} steps, at least 100 required"
        )));
    }
    let mut rep = HyperbolicityReport {
        system: sys.name().into(),
        steps: n,
        holder_alpha,
        lambda_u: Vec::with_capacity(n),
        lambda_s: Vec::with_capacity(n),
        delta: Vec::with_capacity(n),
        lambda: Vec::with_capacity(n),
        theta: Vec::with_capacity(n),
        effective_times: Vec::new(),
        lambda_bar: 0.0,
        effective_time_density: (0.0, 0.0),
        eh1_running_average: 0.0,
        eh2_profile: Vec::new(),
        domination_ratio_max: 0.0,
        rate_resolution: 0.0,
    };
    for (k, x) in orbit.points[..n].iter().enumerate() {
        let cones = cone_field(k, x)?;
        let lu = lambda_u(sys, &cones.unstable, x)?;
        let ls = lambda_s(sys, &cones.stable, x)?;
        let er = effective_rates(lu.value, ls.value, holder_alpha)?;
        rep.rate_resolution = rep.rate_resolution.max(lu.resolution).max(ls.resolution);
        rep.domination_ratio_max = rep.domination_ratio_max.max((ls.value - lu.value).exp());
        rep.lambda_u.push(lu.value);
        rep.lambda_s.push(ls.value);
        rep.delta.push(er.delta);
        rep.lambda.push(er.lambda);
        rep.theta.push(cones.gap_angle());
    }
    rep.eh1_running_average = rep.lambda.iter().sum::<f64>() / n as f64;
    rep.lambda_bar = match lambda_bar {
        Some(l) => l,
        None => {
            let from = if n > LAMBDA_BAR_BURN_IN {
                LAMBDA_BAR_BURN_IN
            } else {
                0
            };
            let tail = &rep.lambda[from..];
            0.5 * tail.iter().sum::<f64>() / tail.len() as f64
        }
    };
    if !(rep.lambda_bar > 0.0) {
        return Err(SrbError::InvalidArgument(format!(
            "lambda_bar = {} must be positive",
            rep.lambda_bar
        )));
    }
    let rates: Vec<f64> = rep
        .lambda_u
        .iter()
        .zip(&rep.delta)
        .map(|(u, d)| u - d)
        .collect();
    rep.effective_times = effective_hyperbolic_times(&rates, rep.lambda_bar);
    rep.effective_time_density = asymptotic_density(&rep.effective_times, n)?;
    for &t in angle_thresholds {
        let below: Vec<usize> = (0..n).filter(|&k| rep.theta[k] < t).collect();
        rep.eh2_profile.push(Eh2Point {
            threshold: t,
            upper_density: asymptotic_density(&below, n)?.0,
        });
    }
    Ok(rep)
}

/// `|df|E^cs| < chi · m(df|E^cu)` where `m` is the co-norm.
pub fn check_domination(df_s_norm: f64, df_u_conorm: f64, chi: f64) -> bool {
    df_s_norm < chi * df_u_conorm
}

/// Per-step log norms of `df` on the estimated center-stable bundle and log
/// co-norms on the center-unstable bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleRates {
    pub cs_log_norm: Vec<f64>,
    pub cu_log_conorm: Vec<f64>,
}

/// Bundle rates along the frames' valid range of `orbit`.
pub fn bundle_rates(
    sys: &SystemHandle,
    orbit: &Orbit,
    frames: &SplittingFrames,
) -> Result<BundleRates> {
    let mut out = BundleRates {
        cs_log_norm: Vec::with_capacity(frames.len()),
        cu_log_conorm: Vec::with_capacity(frames.len()),
    };
    for i in 0..frames.len() {
        let j = sys.jacobian(&orbit.points[frames.start + i])?;
        let bs: Matrix = frames.stable[i].basis_matrix();
        out.cs_log_norm.push((&j * bs).singular_values().max().ln());
        let bu = Matrix::from_columns(&[frames.unstable[i].clone()]);
        out.cu_log_conorm
            .push((&j * bu).singular_values().min().ln());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NueAverages {
    pub nue1: f64,
    pub nue2: f64,
    pub horizon: usize,
}

/// Finite-horizon averages of the bundle rates.
pub fn nue_averages(rates: &BundleRates) -> Result<NueAverages> {
    let n = rates.cs_log_norm.len();
    if n == 0 || rates.cu_log_conorm.len() != n {
        return Err(SrbError::InvalidArgument(
            "bundle rates must be nonempty and aligned".into(),
        ));
    }
    Ok(NueAverages {
        nue1: rates.cs_log_norm.iter().sum::<f64>() / n as f64,
        nue2: rates.cu_log_conorm.iter().sum::<f64>() / n as f64,
        horizon: n,
    })
}

/// Weighted ensemble average of the positive-exponent sums.
pub fn entropy_formula_rhs(samples: &[(LyapunovEstimate, f64)]) -> Result<f64> {
    if samples.is_empty() {
        return Err(SrbError::EmptyEnsemble);
    }
    let wsum: f64 = samples.iter().map(|(_, w)| w).sum();
    if (wsum - 1.0).abs() > 1e-9 || samples.iter().any(|(_, w)| *w < 0.0) {
        return Err(SrbError::InvalidArgument(format!(
            "weights must be nonnegative and sum to 1 (sum {wsum})"
        )));
    }
    Ok(samples.iter().map(|(e, w)| w * e.positive_sum()).sum())
}
