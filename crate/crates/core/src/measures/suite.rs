use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dynamics::Region;
use crate::error::{Result, SrbError};
use crate::linalg::Point;

/// Version tag of the observable set below; bump when it changes.
pub const SUITE_VERSION: &str = "v2";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Observable {
    /// `u_i`, the coordinate rescaled to `[-1, 1]`.
    Linear {
        i: usize,
    },
    /// `u_i u_j`.
    Quadratic {
        i: usize,
        j: usize,
    },
    /// `cos(k pi t_i)` with `t_i` the coordinate rescaled to `[0, 1]`;
    /// `k = 2` on periodic axes, `k = 1` (first Neumann mode) otherwise.
    Cos {
        i: usize,
        k: u32,
    },
    /// `sin(k pi t_i)`, the first Dirichlet mode when `k = 1`.
    Sin {
        i: usize,
        k: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub name: String,
    pub observable: Observable,
    /// Lipschitz bound in ambient coordinates.
    pub lipschitz: f64,
}

/// Finite family of bounded observables standing in for all `C^1` functions.
///
/// Per axis: the rescaled coordinate, products of pairs, and the first
/// trigonometric pair. Periodic axes only get the full-period pair, which is
/// continuous on the circle; bounded axes get the half-period pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionSuite {
    pub version: String,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub functions: Vec<TestFunction>,
}

impl TestFunctionSuite {
    pub fn for_region(region: &Region) -> Result<Self> {
        if !region.is_bounded() {
            return Err(SrbError::InvalidArgument(
                "suite needs a bounded region".into(),
            ));
        }
        let d = region.dim();
        let w: Vec<f64> = (0..d).map(|i| region.upper[i] - region.lower[i]).collect();
        let plain: Vec<usize> = (0..d).filter(|i| !region.periodic[*i]).collect();
        let mut functions = Vec::new();
        for &i in &plain {
            functions.push(TestFunction {
                name: format!("u{i}"),
                observable: Observable::Linear { i },
                lipschitz: 2.0 / w[i],
            });
        }
        for (a, &i) in plain.iter().enumerate() {
            for &j in &plain[a..] {
                let lip = if i == j {
                    4.0 / w[i]
                } else {
                    (4.0 / (w[i] * w[i]) + 4.0 / (w[j] * w[j])).sqrt()
                };
                functions.push(TestFunction {
                    name: format!("u{i}*u{j}"),
                    observable: Observable::Quadratic { i, j },
                    lipschitz: lip,
                });
            }
        }
        for i in 0..d {
            let k = if region.periodic[i] { 2 } else { 1 };
            let lip = k as f64 * PI / w[i];
            let tag = if k == 1 { "pi".to_string() } else { format!("{k}pi") };
            functions.push(TestFunction {
                name: format!("cos({tag} t{i})"),
                observable: Observable::Cos { i, k },
                lipschitz: lip,
            });
            functions.push(TestFunction {
                name: format!("sin({tag} t{i})"),
                observable: Observable::Sin { i, k },
                lipschitz: lip,
            });
        }
        Ok(TestFunctionSuite {
            version: SUITE_VERSION.into(),
            lower: region.lower.clone(),
            upper: region.upper.clone(),
            functions,
        })
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    #[inline]
    fn t(&self, p: &Point, i: usize) -> f64 {
        (p[i] - self.lower[i]) / (self.upper[i] - self.lower[i])
    }

    #[inline]
    fn u(&self, p: &Point, i: usize) -> f64 {
        2.0 * self.t(p, i) - 1.0
    }

    #[inline]
    pub fn eval(&self, k: usize, p: &Point) -> f64 {
        match self.functions[k].observable {
            Observable::Linear { i } => self.u(p, i),
            Observable::Quadratic { i, j } => self.u(p, i) * self.u(p, j),
            Observable::Cos { i, k } => (k as f64 * PI * self.t(p, i)).cos(),
            Observable::Sin { i, k } => (k as f64 * PI * self.t(p, i)).sin(),
        }
    }

    /// All observables at `p`, written into `out`.
    pub fn eval_all(&self, p: &Point, out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.eval(k, p);
        }
    }
}
