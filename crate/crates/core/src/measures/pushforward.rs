use rand::Rng;
use serde::{Deserialize, Serialize};

use super::histogram::{Grid, GridHistogram, HistogramAccumulator};
use super::leaf::LeafSegment;
use super::suite::TestFunctionSuite;
use crate::dynamics::{step_within, SystemHandle, DEFAULT_HALT_DISTANCE};
use crate::error::{Result, SrbError};
use crate::exec::{stream_rng, Execution};
use crate::linalg::Point;

/// Orbits that halt before this many steps count as degenerate.
pub const DEGENERATE_WITHIN: usize = 10;

/// Total integer weight given to one leaf per time step.
const LEAF_WEIGHT_SCALE: f64 = (1u64 << 32) as f64;

/// The three checkpoints `n/4, n/2, n` (deduplicated, all at least 1).
pub fn checkpoints(n: usize) -> Vec<usize> {
    let mut c = vec![(n / 4).max(1), (n / 2).max(1), n.max(1)];
    c.dedup();
    c
}

#[derive(Debug, Clone)]
struct Partial {
    /// One accumulator per checkpoint interval `[c_{i-1}, c_i)`.
    segments: Vec<HistogramAccumulator>,
    early_halts: usize,
}

impl Partial {
    fn new(grid: &Grid, k: usize) -> Self {
        Partial {
            segments: vec![HistogramAccumulator::new(grid.clone()); k],
            early_halts: 0,
        }
    }

    fn merge(self, other: Partial) -> Self {
        Partial {
            segments: self
                .segments
                .into_iter()
                .zip(&other.segments)
                .map(|(a, b)| a.merge(b).expect("same grid"))
                .collect(),
            early_halts: self.early_halts + other.early_halts,
        }
    }

    /// Adds the orbit of `x0` with weight `w` per iterate.
    fn run(&mut self, sys: &SystemHandle, x0: Point, w: u64, cps: &[usize]) {
        let n = *cps.last().unwrap();
        let mut x = x0;
        let mut seg = 0;
        for k in 0..n {
            while k >= cps[seg] {
                seg += 1;
            }
            self.segments[seg].add(&x, w);
            if k + 1 == n {
                break;
            }
            match step_within(sys, &x, DEFAULT_HALT_DISTANCE) {
                Some(y) => x = y,
                None => {
                    if k + 1 < DEGENERATE_WITHIN {
                        self.early_halts += 1;
                    }
                    break;
                }
            }
        }
    }

    fn finish(self, cps: &[usize], ensemble: usize) -> Result<Vec<GridHistogram>> {
        if 2 * self.early_halts > ensemble {
            return Err(SrbError::DegenerateEnsemble {
                halted: self.early_halts,
                ensemble,
                within: DEGENERATE_WITHIN,
            });
        }
        let mut out = Vec::with_capacity(cps.len());
        let mut acc: Option<HistogramAccumulator> = None;
        for (seg, c) in self.segments.into_iter().zip(cps) {
            let next = match acc {
                None => seg,
                Some(a) => a.merge(&seg)?,
            };
            out.push(next.normalize(*c)?);
            acc = Some(next);
        }
        Ok(out)
    }
}

/// Cesàro averages of the push-forwards of normalised Lebesgue measure on the
/// trapping region, at checkpoints `n/4, n/2, n`.
pub fn pushforward_lebesgue(
    sys: &SystemHandle,
    n: usize,
    ensemble: usize,
    resolution: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<GridHistogram>> {
    if ensemble == 0 {
        return Err(SrbError::EmptyEnsemble);
    }
    if n == 0 {
        return Err(SrbError::InvalidArgument("n must be positive".into()));
    }
    let grid = Grid::for_region(sys.region(), resolution)?;
    let cps = checkpoints(n);
    let region = sys.region();
    let partial = exec.fold(
        ensemble,
        || Partial::new(&grid, cps.len()),
        |mut p, i| {
            let mut rng = stream_rng(seed, i as u64);
            let x0 = region.sample(&mut rng).expect("bounded region");
            p.run(sys, x0, 1, &cps);
            p
        },
        Partial::merge,
    );
    partial.finish(&cps, ensemble)
}

/// Cesàro averages of the push-forwards of normalised leaf volume.
pub fn pushforward_leaf(
    sys: &SystemHandle,
    leaf: &LeafSegment,
    n: usize,
    resolution: usize,
    exec: Execution,
) -> Result<Vec<GridHistogram>> {
    leaf.validate()?;
    if n == 0 {
        return Err(SrbError::InvalidArgument("n must be positive".into()));
    }
    let grid = Grid::for_region(sys.region(), resolution)?;
    let cps = checkpoints(n);
    let total = leaf.length();
    let weights: Vec<u64> = leaf
        .weights
        .iter()
        .map(|w| (w / total * LEAF_WEIGHT_SCALE).round() as u64)
        .collect();
    let partial = exec.fold(
        leaf.samples.len(),
        || Partial::new(&grid, cps.len()),
        |mut p, i| {
            if weights[i] > 0 {
                p.run(sys, leaf.samples[i], weights[i], &cps);
            }
            p
        },
        Partial::merge,
    );
    partial.finish(&cps, leaf.samples.len())
}

/// `max_h |∫h dµ - ∫h dν|` over the suite, midpoint rule on both sides.
pub fn weak_star_distance(
    mu: &GridHistogram,
    nu: &GridHistogram,
    suite: &TestFunctionSuite,
) -> Result<f64> {
    if mu.grid != nu.grid {
        return Err(SrbError::GridMismatch);
    }
    let mut diff = vec![0.0; suite.len()];
    let mut vals = vec![0.0; suite.len()];
    for (c, (a, b)) in mu.masses.iter().zip(&nu.masses).enumerate() {
        let dm = a - b;
        if dm == 0.0 {
            continue;
        }
        suite.eval_all(&mu.grid.center(c), &mut vals);
        for (d, v) in diff.iter_mut().zip(&vals) {
            *d += dm * v;
        }
    }
    Ok(diff.iter().fold(0.0, |m, d| m.max(d.abs())))
}

/// Integrals of every suite function against a histogram.
pub fn suite_integrals(mu: &GridHistogram, suite: &TestFunctionSuite) -> Vec<f64> {
    let mut acc = vec![0.0; suite.len()];
    let mut vals = vec![0.0; suite.len()];
    for (c, m) in mu.masses.iter().enumerate() {
        if *m == 0.0 {
            continue;
        }
        suite.eval_all(&mu.grid.center(c), &mut vals);
        for (a, v) in acc.iter_mut().zip(&vals) {
            *a += m * v;
        }
    }
    acc
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceDefect {
    pub defect: f64,
    /// One Monte Carlo standard error of the worst function's estimate.
    pub error_bar: f64,
    pub per_function: Vec<f64>,
    /// Probe points whose image could not be evaluated.
    pub skipped: usize,
}

/// `max_h |∫h∘f dµ - ∫h dµ|`, with each cell's mass spread over `probe`
/// uniform points inside the cell.
pub fn invariance_defect(
    sys: &SystemHandle,
    mu: &GridHistogram,
    suite: &TestFunctionSuite,
    probe: usize,
    seed: u64,
) -> Result<InvarianceDefect> {
    if probe == 0 {
        return Err(SrbError::EmptySample);
    }
    let grid = &mu.grid;
    let d = grid.dim();
    let m = suite.len();
    let mut mean = vec![0.0; m];
    let mut var = vec![0.0; m];
    let mut skipped = 0;
    let mut hx = vec![0.0; m];
    let mut hy = vec![0.0; m];
    for (c, mass) in mu.masses.iter().enumerate() {
        if *mass == 0.0 {
            continue;
        }
        let lo = grid.cell_lower(c);
        let mut rng = stream_rng(seed, c as u64);
        let mut s1 = vec![0.0; m];
        let mut s2 = vec![0.0; m];
        let mut used = 0usize;
        for _ in 0..probe {
            let mut x = lo;
            for i in 0..d {
                x[i] += rng.random::<f64>() * grid.cell_width(i);
            }
            let y = match sys.map(&x) {
                Ok(y) => y,
                Err(_) => {
                    skipped += 1;
                    continue;
                }
            };
            suite.eval_all(&x, &mut hx);
            suite.eval_all(&y, &mut hy);
            for k in 0..m {
                let g = hy[k] - hx[k];
                s1[k] += g;
                s2[k] += g * g;
            }
            used += 1;
        }
        if used == 0 {
            continue;
        }
        let u = used as f64;
        for k in 0..m {
            let cm = s1[k] / u;
            let cv = (s2[k] / u - cm * cm).max(0.0);
            mean[k] += mass * cm;
            var[k] += mass * mass * cv / u;
        }
    }
    let (worst, defect) =
        mean.iter().enumerate().fold(
            (0, 0.0),
            |(wi, wv), (i, v)| if v.abs() > wv { (i, v.abs()) } else { (wi, wv) },
        );
    Ok(InvarianceDefect {
        defect,
        error_bar: var.get(worst).map_or(0.0, |v| v.sqrt()),
        per_function: mean.iter().map(|v| v.abs()).collect(),
        skipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffAverage {
    pub value: f64,
    /// Number of terms actually averaged.
    pub terms: usize,
    pub truncated: bool,
}

/// `(1/n) Σ_{k<n} h(f^k x)`; averages the surviving prefix if the orbit halts.
/// The running-mean update returns constants exactly.
pub fn birkhoff_average(
    sys: &SystemHandle,
    x: &Point,
    h: impl Fn(&Point) -> f64,
    n: usize,
) -> BirkhoffAverage {
    let mut mean = 0.0;
    let mut terms = 0;
    let mut p = *x;
    for k in 0..n {
        terms += 1;
        mean += (h(&p) - mean) / terms as f64;
        if k + 1 == n {
            break;
        }
        match step_within(sys, &p, DEFAULT_HALT_DISTANCE) {
            Some(q) => p = q,
            None => break,
        }
    }
    BirkhoffAverage {
        value: mean,
        terms,
        truncated: terms < n,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinEstimate {
    pub fraction: f64,
    pub matched: usize,
    pub sample: usize,
    pub truncated: usize,
    pub tol: f64,
    pub targets: Vec<f64>,
}

/// Fraction of uniformly sampled starting points whose Birkhoff averages of
/// every suite function land within `tol` of the corresponding integral
/// against `mu`. Truncated orbits never match.
#[allow(clippy::too_many_arguments)]
pub fn basin_fraction(
    sys: &SystemHandle,
    mu: &GridHistogram,
    suite: &TestFunctionSuite,
    sample: usize,
    n: usize,
    tol: f64,
    seed: u64,
    exec: Execution,
) -> Result<BasinEstimate> {
    if sample == 0 {
        return Err(SrbError::EmptySample);
    }
    if n == 0 || !(tol > 0.0) {
        return Err(SrbError::InvalidArgument("need n > 0 and tol > 0".into()));
    }
    let targets = suite_integrals(mu, suite);
    let region = sys.region();
    let m = suite.len();
    let (matched, truncated) = exec.fold(
        sample,
        || (0usize, 0usize),
        |(mt, tr), i| {
            let mut rng = stream_rng(seed, i as u64);
            let mut x = region.sample(&mut rng).expect("bounded region");
            let mut sums = vec![0.0; m];
            let mut vals = vec![0.0; m];
            for k in 0..n {
                suite.eval_all(&x, &mut vals);
                for (s, v) in sums.iter_mut().zip(&vals) {
                    *s += v;
                }
                if k + 1 == n {
                    break;
                }
                match step_within(sys, &x, DEFAULT_HALT_DISTANCE) {
                    Some(y) => x = y,
                    None => return (mt, tr + 1),
                }
            }
            let ok = sums
                .iter()
                .zip(&targets)
                .all(|(s, t)| (s / n as f64 - t).abs() < tol);
            (mt + ok as usize, tr)
        },
        |a, b| (a.0 + b.0, a.1 + b.1),
    );
    Ok(BasinEstimate {
        fraction: matched as f64 / sample as f64,
        matched,
        sample,
        truncated,
        tol,
        targets,
    })
}
