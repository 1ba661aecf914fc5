use serde::{Deserialize, Serialize};

use crate::dynamics::{iterate_orbit, HaltReason, SystemHandle, DEFAULT_HALT_DISTANCE};
use crate::error::{Result, SrbError};
use crate::hyperbolicity::estimate_unstable_direction;
use crate::hyperbolicity::Cone;
use crate::linalg::{Point, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafOptions {
    pub target_length: f64,
    pub n_grow: usize,
    pub seed_length: f64,
    /// Maximum distance between consecutive samples; `target_length / 512`
    /// when absent.
    pub spacing: Option<f64>,
    /// Steps from `x_seed` before the leaf is seeded.
    pub burn: usize,
    /// History used to estimate the unstable direction at the seed.
    pub k_back: usize,
}

impl LeafOptions {
    pub fn new(target_length: f64, n_grow: usize) -> Self {
        LeafOptions {
            target_length,
            n_grow,
            seed_length: 1e-6,
            spacing: None,
            burn: 100,
            k_back: 60,
        }
    }

    pub fn spacing(&self) -> f64 {
        self.spacing.unwrap_or(self.target_length / 512.0)
    }
}

/// Piece of a local unstable manifold with arc-length quadrature and the
/// backward history of every sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafSegment {
    /// Index of the base point `x` among the samples.
    pub base_index: usize,
    pub samples: Vec<Point>,
    /// Trapezoid weights; they sum to the leaf length.
    pub weights: Vec<f64>,
    /// Cumulative arc length from the first sample.
    pub arc_length: Vec<f64>,
    /// Unit tangents.
    pub tangents: Vec<Vec<f64>>,
    /// `backward_chains[i][k-1] = f^{-k}(samples[i])` along the construction.
    pub backward_chains: Vec<Vec<Point>>,
    /// `log_jacobians[i][k-1]` is the log expansion of `df` along the leaf
    /// tangent at `f^{-k}(samples[i])`.
    pub log_jacobians: Vec<Vec<f64>>,
    pub max_spacing: f64,
}

impl LeafSegment {
    pub fn base_point(&self) -> &Point {
        &self.samples[self.base_index]
    }

    pub fn length(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn n_history(&self) -> usize {
        self.backward_chains.first().map_or(0, |c| c.len())
    }

    pub fn tangent(&self, i: usize) -> Vector {
        Vector::from_column_slice(&self.tangents[i])
    }

    /// Structural checks; does not need the system.
    pub fn validate(&self) -> Result<()> {
        let n = self.samples.len();
        if n < 2 {
            return Err(SrbError::InvalidLeaf(format!(
                "{n} sample(s), need at least 2"
            )));
        }
        if [
            self.weights.len(),
            self.arc_length.len(),
            self.tangents.len(),
            self.backward_chains.len(),
            self.log_jacobians.len(),
        ]
        .iter()
        .any(|l| *l != n)
        {
            return Err(SrbError::InvalidLeaf(
                "per-sample arrays differ in length".into(),
            ));
        }
        if self.base_index >= n {
            return Err(SrbError::InvalidLeaf("base index out of range".into()));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) || !(self.length() > 0.0) {
            return Err(SrbError::InvalidLeaf(
                "weights must be nonnegative with positive sum".into(),
            ));
        }
        let h = self.n_history();
        if self
            .backward_chains
            .iter()
            .zip(&self.log_jacobians)
            .any(|(c, l)| c.len() != h || l.len() != h)
        {
            return Err(SrbError::InvalidLeaf("ragged backward history".into()));
        }
        Ok(())
    }

    /// Largest angle between a stored tangent and the cone axis.
    pub fn max_tangent_angle(&self, cone: &Cone) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for i in 0..self.samples.len() {
            worst = worst.max(cone.angle_to(&self.tangent(i))?);
        }
        Ok(worst)
    }
}

struct Node {
    s: f64,
    pts: Vec<Point>,
    logs: Vec<f64>,
    t: Vector,
}

struct Grower<'a> {
    sys: &'a SystemHandle,
    p0: Point,
    e: Vector,
}

impl Grower<'_> {
    fn advance(&self, node: &mut Node) -> Result<()> {
        let x = *node.pts.last().unwrap();
        let fail =
            |why: &str| SrbError::LeafConstructionFailed(format!("{why} at {:?}", x.as_slice()));
        let y = self.sys.map(&x).map_err(|_| fail("map undefined"))?;
        if !self.sys.region().contains(&y) {
            return Err(fail("leaf left the trapping region"));
        }
        let j = self
            .sys
            .jacobian(&x)
            .map_err(|_| fail("jacobian undefined"))?;
        let w = j * &node.t;
        let n = w.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(fail("tangent collapsed"));
        }
        node.logs.push(n.ln());
        node.t = w / n;
        node.pts.push(y);
        Ok(())
    }

    fn node(&self, s: f64, steps: usize) -> Result<Node> {
        let mut node = Node {
            s,
            pts: vec![self.sys.region().wrap(&self.p0.offset(&self.e, s))],
            logs: Vec::new(),
            t: self.e.clone(),
        };
        for _ in 0..steps {
            self.advance(&mut node)?;
        }
        Ok(node)
    }

    fn gap(&self, a: &Node, b: &Node) -> f64 {
        self.sys
            .region()
            .distance(a.pts.last().unwrap(), b.pts.last().unwrap())
    }
}

/// Grows a local unstable leaf through the forward orbit of `x_seed`.
///
/// After `burn` steps a segment of length `seed_length` is laid along the
/// estimated unstable direction and pushed forward `n_grow` times, inserting
/// samples whenever neighbours drift further apart than the spacing and
/// discarding the parts beyond the target window. The result is centred on
/// the image of the seed point.
pub fn construct_unstable_leaf(
    sys: &SystemHandle,
    x_seed: &Point,
    target_length: f64,
    n_grow: usize,
    cone: &Cone,
) -> Result<LeafSegment> {
    construct_unstable_leaf_with(sys, x_seed, &LeafOptions::new(target_length, n_grow), cone)
}

pub fn construct_unstable_leaf_with(
    sys: &SystemHandle,
    x_seed: &Point,
    opts: &LeafOptions,
    cone: &Cone,
) -> Result<LeafSegment> {
    let fail = |why: String| SrbError::LeafConstructionFailed(why);
    if !(opts.target_length > 0.0) || opts.n_grow == 0 || !(opts.seed_length > 0.0) {
        return Err(SrbError::InvalidArgument(
            "leaf needs positive target length, seed length and growth steps".into(),
        ));
    }
    let spacing = opts.spacing();
    let orbit = iterate_orbit(sys, x_seed, opts.burn + opts.k_back, DEFAULT_HALT_DISTANCE);
    if orbit.halt_reason != HaltReason::Completed {
        return Err(fail(format!(
            "seed orbit halted after {} steps ({})",
            orbit.steps(),
            orbit.halt_reason.as_str()
        )));
    }
    let dir = estimate_unstable_direction(sys, &orbit, opts.k_back)
        .map_err(|e| fail(format!("no unstable direction at the seed: {e}")))?;
    let g = Grower {
        sys,
        p0: *orbit.last(),
        e: dir.vector(),
    };
    let half = opts.seed_length / 2.0;
    let mut nodes = vec![g.node(-half, 0)?, g.node(0.0, 0)?, g.node(half, 0)?];
    let mut short = false;
    for k in 1..=opts.n_grow {
        for node in nodes.iter_mut() {
            g.advance(node)?;
        }
        let mut refined = Vec::with_capacity(nodes.len() * 3);
        let mut it = nodes.into_iter();
        let mut prev = it.next().unwrap();
        for next in it {
            let mut stack = vec![next];
            while let Some(b) = stack.pop() {
                if g.gap(&prev, &b) > spacing {
                    let mid = 0.5 * (prev.s + b.s);
                    if mid == prev.s || mid == b.s {
                        return Err(fail("seed parameter resolution exhausted".into()));
                    }
                    let m = g.node(mid, k)?;
                    stack.push(b);
                    stack.push(m);
                } else {
                    refined.push(std::mem::replace(&mut prev, b));
                }
            }
        }
        refined.push(prev);
        let (kept, reaches) = trim(&g, refined, opts.target_length / 2.0);
        nodes = kept;
        short = !reaches;
    }
    if short {
        return Err(fail(format!(
            "expansion insufficient: leaf shorter than {} after {} steps",
            opts.target_length, opts.n_grow
        )));
    }
    // exact window around the base point
    let arcs = arcs(&g, &nodes);
    let c = center(&nodes);
    let lim = opts.target_length / 2.0 + 1e-12 * opts.target_length;
    let keep: Vec<bool> = arcs.iter().map(|a| (a - arcs[c]).abs() <= lim).collect();
    let nodes: Vec<Node> = nodes
        .into_iter()
        .zip(keep)
        .filter_map(|(n, k)| k.then_some(n))
        .collect();
    finish(&g, nodes, spacing, cone)
}

fn arcs(g: &Grower, nodes: &[Node]) -> Vec<f64> {
    let mut a = vec![0.0; nodes.len()];
    for i in 1..nodes.len() {
        a[i] = a[i - 1] + g.gap(&nodes[i - 1], &nodes[i]);
    }
    a
}

fn center(nodes: &[Node]) -> usize {
    nodes
        .iter()
        .position(|n| n.s == 0.0)
        .expect("base node is never trimmed")
}

/// Keeps the nodes within `half` arc length of the base node plus one beyond
/// on each side; reports whether both sides reach `half`.
fn trim(g: &Grower, nodes: Vec<Node>, half: f64) -> (Vec<Node>, bool) {
    let a = arcs(g, &nodes);
    let c = center(&nodes);
    let lo = (0..=c).rev().find(|&i| a[c] - a[i] > half);
    let hi = (c..nodes.len()).find(|&i| a[i] - a[c] > half);
    let reaches = lo.is_some() && hi.is_some();
    let (lo, hi) = (lo.unwrap_or(0), hi.unwrap_or(nodes.len() - 1));
    let kept = nodes
        .into_iter()
        .enumerate()
        .filter_map(|(i, n)| (lo..=hi).contains(&i).then_some(n))
        .collect();
    (kept, reaches)
}

fn finish(g: &Grower, nodes: Vec<Node>, spacing: f64, cone: &Cone) -> Result<LeafSegment> {
    let arc = arcs(g, &nodes);
    let n = nodes.len();
    if n < 2 {
        return Err(SrbError::LeafConstructionFailed(
            "leaf collapsed to a point".into(),
        ));
    }
    let mut weights = vec![0.0; n];
    for i in 1..n {
        let h = arc[i] - arc[i - 1];
        weights[i - 1] += h / 2.0;
        weights[i] += h / 2.0;
    }
    let base_index = center(&nodes);
    let mut samples = Vec::with_capacity(n);
    let mut tangents = Vec::with_capacity(n);
    let mut chains = Vec::with_capacity(n);
    let mut logs = Vec::with_capacity(n);
    for node in nodes {
        if !cone.contains(&node.t)? {
            return Err(SrbError::LeafConstructionFailed(format!(
                "tangent left the cone at {:?}",
                node.pts.last().unwrap().as_slice()
            )));
        }
        let m = node.logs.len();
        samples.push(*node.pts.last().unwrap());
        tangents.push(node.t.as_slice().to_vec());
        chains.push((1..=m).map(|k| node.pts[m - k]).collect::<Vec<_>>());
        logs.push((1..=m).map(|k| node.logs[m - k]).collect::<Vec<_>>());
    }
    let leaf = LeafSegment {
        base_index,
        samples,
        weights,
        arc_length: arc,
        tangents,
        backward_chains: chains,
        log_jacobians: logs,
        max_spacing: spacing,
    };
    leaf.validate()?;
    Ok(leaf)
}
