//! Constructors for every example map plus two analytic oracles (the cat
//! map and constant linear maps).

mod belykh;
mod cat;
mod linear;
mod lorenz_map;
mod lozi;
mod neutral;
mod solenoid;

pub use belykh::{make_belykh, BelykhParams};
pub use cat::make_cat_map;
pub use linear::make_linear;
pub use lorenz_map::{make_lorenz_map, LorenzMapParams};
pub use lozi::{make_lozi, LoziParams};
pub use neutral::{make_neutral_slowdown, NeutralSlowdownParams};
pub use solenoid::{make_solenoid, SolenoidParams};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dynamics::SystemHandle;
use crate::error::{Result, SrbError};

/// A system selected by name with its parameter record, as it appears in
/// experiment configs: `{"name": "solenoid", "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "snake_case")]
pub enum SystemSpec {
    Solenoid(SolenoidParams),
    LorenzMap(LorenzMapParams),
    Lozi(LoziParams),
    Belykh(BelykhParams),
    NeutralSlowdown(NeutralSlowdownParams),
    Cat,
}

impl SystemSpec {
    pub fn name(&self) -> &'static str {
        match self {
            SystemSpec::Solenoid(_) => "solenoid",
            SystemSpec::LorenzMap(_) => "lorenz_map",
            SystemSpec::Lozi(_) => "lozi",
            SystemSpec::Belykh(_) => "belykh",
            SystemSpec::NeutralSlowdown(_) => "neutral_slowdown",
            SystemSpec::Cat => "cat",
        }
    }

    /// Every parameter-range violation, one entry per offending field.
    pub fn violations(&self) -> Vec<SrbError> {
        match self {
            SystemSpec::Solenoid(p) => p.violations(),
            SystemSpec::LorenzMap(p) => p.violations(),
            SystemSpec::Lozi(p) => p.violations(),
            SystemSpec::Belykh(p) => p.violations(),
            SystemSpec::NeutralSlowdown(p) => p.violations(),
            SystemSpec::Cat => Vec::new(),
        }
    }

    pub fn build(&self) -> Result<SystemHandle> {
        match self {
            SystemSpec::Solenoid(p) => make_solenoid(*p),
            SystemSpec::LorenzMap(p) => make_lorenz_map(*p),
            SystemSpec::Lozi(p) => make_lozi(*p),
            SystemSpec::Belykh(p) => make_belykh(*p),
            SystemSpec::NeutralSlowdown(p) => make_neutral_slowdown(*p),
            SystemSpec::Cat => Ok(make_cat_map()),
        }
    }
}

/// Names, parameter schemas and literature references of all systems.
pub fn catalog() -> serde_json::Value {
    json!([
        {
            "name": "solenoid",
            "dimension": 3,
            "formula": "(x, y, theta) -> (alpha x + a cos theta, beta y + a sin theta, 2 theta mod 2pi)",
            "trapping_region": "unit disc x circle",
            "parameters": {
                "a": {"range": "(0, 1)", "default": SolenoidParams::default().a},
                "alpha": {"range": "(0, min(a, 1-a))", "default": SolenoidParams::default().alpha},
                "beta": {"range": "(0, min(a, 1-a))", "default": SolenoidParams::default().beta}
            },
            "reference": "S. Smale, Differentiable dynamical systems, Bull. AMS 73 (1967); R. F. Williams, Expanding attractors, Publ. IHES 43 (1974)"
        },
        {
            "name": "lorenz_map",
            "dimension": 2,
            "formula": "(x, y) -> ((-B|y|^nu0 + B sign(y)|y|^nu + 1) sign(y), ((1+A)|y|^nu0 - A) sign(y))",
            "trapping_region": "(-1,1)^2, singular line y = 0",
            "parameters": {
                "a": {"range": "(0, 1)", "default": LorenzMapParams::default().a},
                "b": {"range": "(0, 1/2)", "default": LorenzMapParams::default().b},
                "nu": {"range": "(1, inf)", "default": LorenzMapParams::default().nu},
                "nu0": {"range": "(1/(1+A), 1)", "default": LorenzMapParams::default().nu0}
            },
            "reference": "V. S. Afraimovich, V. V. Bykov, L. P. Shilnikov, On the origin and structure of the Lorenz attractor, Dokl. Akad. Nauk SSSR 234 (1977)"
        },
        {
            "name": "lozi",
            "dimension": 2,
            "formula": "(x, y) -> (1 + b y - a|x|, x)",
            "trapping_region": "(-c,c)^2, singular line x = 0 (trapping checked numerically and recorded)",
            "parameters": {
                "a": {"range": "(0, inf)", "default": LoziParams::default().a},
                "b": {"range": "(0, inf)", "default": LoziParams::default().b},
                "c": {"range": "(0, 1)", "default": LoziParams::default().c}
            },
            "reference": "R. Lozi, Un attracteur etrange du type attracteur de Henon, J. Physique 39 (1978)"
        },
        {
            "name": "belykh",
            "dimension": 2,
            "formula": "(x, y) -> (l1(x-1)+1, l2(y-1)+1) if y > kx; (m1(x+1)-1, m2(y+1)-1) if y < kx",
            "trapping_region": "(-1,1)^2, singular line y = kx",
            "parameters": {
                "lambda1": {"range": "(0, 1/2)", "default": BelykhParams::default().lambda1},
                "lambda2": {"range": "(1, 2/(1-|k|))", "default": BelykhParams::default().lambda2},
                "mu1": {"range": "(0, 1/2)", "default": BelykhParams::default().mu1},
                "mu2": {"range": "(1, 2/(1-|k|))", "default": BelykhParams::default().mu2},
                "k": {"range": "(-1, 1)", "default": BelykhParams::default().k}
            },
            "reference": "V. N. Belykh, Models of discrete systems of phase synchronization (1982)"
        },
        {
            "name": "neutral_slowdown",
            "dimension": 2,
            "formula": "time-1 map of x' = psi(|x|) diag(gamma, -beta) x, psi = |x|^alpha near 0, 1 far away",
            "trapping_region": "(-2 r1, 2 r1)^2 (local model, orbits escape)",
            "parameters": {
                "gamma": {"range": "(0, inf)", "default": NeutralSlowdownParams::default().gamma},
                "beta": {"range": "(0, inf)", "default": NeutralSlowdownParams::default().beta},
                "alpha": {"range": "(0, 1)", "default": NeutralSlowdownParams::default().alpha},
                "r0": {"range": "(0, min(1, r1))", "default": NeutralSlowdownParams::default().r0},
                "r1": {"range": "(r0, inf)", "default": NeutralSlowdownParams::default().r1},
                "integrator_step": {"range": "(0, 1]", "default": NeutralSlowdownParams::default().integrator_step}
            },
            "reference": "A. Katok, Bernoulli diffeomorphisms on surfaces, Ann. Math. 110 (1979)"
        },
        {
            "name": "cat",
            "dimension": 2,
            "formula": "(x, y) -> (2x + y, x + y) mod 1",
            "trapping_region": "unit 2-torus",
            "parameters": {},
            "reference": "V. I. Arnold, A. Avez, Ergodic Problems of Classical Mechanics (1968); analytic oracle with Lebesgue as SRB measure"
        }
    ])
}

pub(crate) fn out_of_range(
    system: &'static str,
    field: &'static str,
    value: f64,
    reason: impl Into<String>,
) -> SrbError {
    SrbError::ParameterOutOfRange {
        system,
        field,
        value,
        reason: reason.into(),
    }
}

/// Open-interval check that also rejects NaN.
pub(crate) fn in_open(v: f64, lo: f64, hi: f64) -> bool {
    v > lo && v < hi
}

pub(crate) fn first_violation(mut v: Vec<SrbError>) -> Result<()> {
    if v.is_empty() {
        Ok(())
    } else {
        Err(v.swap_remove(0))
    }
}
