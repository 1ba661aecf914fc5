//! One function per subcommand. Each returns its artifacts as named byte
//! buffers; the runner writes them and hashes them into the manifest.

use serde::Serialize;
use serde_json::json;
use srb_lab::density::{
    absolute_continuity_check, conditional_density_profile, DEFAULT_BAND_CELLS, DEFAULT_SUBSAMPLES,
};
use srb_lab::dynamics::DEFAULT_HALT_DISTANCE;
use srb_lab::exec::stream_rng;
use srb_lab::hyperbolicity::{
    compute_splitting, eh_diagnostics, entropy_formula_rhs, estimate_unstable_direction,
    lyapunov_spectrum, Cone,
};
use srb_lab::linalg::Vector;
use srb_lab::measures::{
    basin_fraction, construct_unstable_leaf_with, invariance_defect,
    pushforward_lebesgue, pushforward_leaf, weak_star_distance, Grid, GridHistogram,
    HistogramHeader, LeafOptions, LeafSegment, TestFunctionSuite, SUITE_VERSION,
};
use srb_lab::singular::{blowup_constants, core_condition_estimate};
use srb_lab::{iterate_orbit, Execution, Point, Result, SrbError, SystemHandle};

use crate::config::{Experiment, Settings};

pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    fn json<T: Serialize>(name: &str, value: &T) -> Result<Self> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        Ok(Artifact { name: name.into(), bytes })
    }

    fn text(name: &str, s: String) -> Self {
        Artifact { name: name.into(), bytes: s.into_bytes() }
    }
}

/// Everything an experiment needs besides its settings.
pub struct Context {
    pub sys: SystemHandle,
    pub seed: u64,
    pub exec: Execution,
}

pub fn run(kind: Experiment, ctx: &Context, s: &Settings) -> Result<Vec<Artifact>> {
    match kind {
        Experiment::Lyapunov => lyapunov(ctx, s),
        Experiment::PushforwardLebesgue => pushforward_lebesgue_run(ctx, s),
        Experiment::PushforwardLeaf => pushforward_leaf_run(ctx, s),
        Experiment::DensityCheck => density_check(ctx, s),
        Experiment::EhDiagnostics => eh_run(ctx, s),
        Experiment::CoreCondition => core_condition(ctx, s),
        Experiment::Basin => basin(ctx, s),
        Experiment::EntropyCheck => entropy_check(ctx, s),
    }
}

/// `settings.x0`, or a uniform draw from the region on stream 0.
fn start_point(ctx: &Context, s: &Settings) -> Result<Point> {
    match &s.x0 {
        Some(x) => Ok(Point::new(x)),
        None => ctx.sys.region().sample(&mut stream_rng(ctx.seed, 0)),
    }
}

fn grid(ctx: &Context, s: &Settings) -> Result<Grid> {
    let res = s.grid.unwrap_or_else(|| Grid::default_resolution(ctx.sys.dim()));
    Grid::for_region(ctx.sys.region(), res)
}

fn header(ctx: &Context, h: &GridHistogram, n: usize) -> HistogramHeader {
    HistogramHeader {
        system: ctx.sys.name().into(),
        parameters: ctx.sys.parameters(),
        grid: h.grid.clone(),
        n,
        seed: ctx.seed,
        checkpoint: h.n,
    }
}

fn histogram_artifact(prefix: &str, ctx: &Context, h: &GridHistogram, n: usize) -> Result<Artifact> {
    let mut bytes = Vec::new();
    h.write(&mut bytes, &header(ctx, h, n))?;
    Ok(Artifact { name: format!("{prefix}_n{}.csv", h.n), bytes })
}

fn lyapunov(ctx: &Context, s: &Settings) -> Result<Vec<Artifact>> {
    let x0 = start_point(ctx, s)?;
    let n = s.n.unwrap_or(100_000);
    let est = lyapunov_spectrum(&ctx.sys, &x0, n, s.renorm_every.unwrap_or(1))?;
    let mut csv = String::from("step");
    for i in 0..ctx.sys.dim() {
        csv.push_str(&format!(",exponent_{i}"));
    }
    csv.push('\n');
    for (k, ex) in &est.convergence_history {
        csv.push_str(&k.to_string());
        for e in ex {
            csv.push_str(&format!(",{e}"));
        }
        csv.push('\n');
    }
    Ok(vec![
        Artifact::json(
            "lyapunov.json",
            &json!({
                "system": ctx.sys.name(),
                "parameters": ctx.sys.parameters(),
                "x0": x0.as_slice(),
                "exponents": est.exponents,
                "positive_sum": est.positive_sum(),
                "n_steps": est.n_steps,
                "requested_steps": est.requested_steps,
                "halt_reason": est.halt_reason,
                "tolerance": est.tolerance,
                "mean_log_det": est.mean_log_det,
            }),
        )?,
        Artifact::text("lyapunov_convergence.csv", csv),
    ])
}

/// Weak-star distances between consecutive checkpoints and the invariance
/// defect of the last one.
fn convergence_report(ctx: &Context, s: &Settings, hists: &[GridHistogram]) -> Result<serde_json::Value> {
    let suite = TestFunctionSuite::for_region(ctx.sys.region())?;
    let mut steps = Vec::new();
    for w in hists.windows(2) {
        steps.push(json!({
            "from": w[0].n,
            "to": w[1].n,
            "distance": weak_star_distance(&w[0], &w[1], &suite)?,
        }));
    }
    let last = hists.last().ok_or(SrbError::EmptyEnsemble)?;
    let defect = invariance_defect(&ctx.sys, last, &suite, s.probe.unwrap_or(16), ctx.seed)?;
    Ok(json!({
        "system": ctx.sys.name(),
        "parameters": ctx.sys.parameters(),
        "suite_version": SUITE_VERSION,
        "checkpoints": hists.iter().map(|h| h.n).collect::<Vec<_>>(),
        "weak_star": steps,
        "invariance_defect": defect,
    }))
}

fn pushforward_lebesgue_run(ctx: &Context, s: &Settings) -> Result<Vec<Artifact>> {
    let n = s.n.unwrap_or(1000);
    let g = grid(ctx, s)?;
    let hists = pushforward_lebesgue(&ctx.sys, n, s.ensemble.unwrap_or(10_000), g.resolution, ctx.seed, ctx.exec)?;
    let mut out = hists
        .iter()
        .map(|h| histogram_artifact("mu", ctx, h, n))
        .collect::<Result<Vec<_>>>()?;
    let mut rep = convergence_report(ctx, s, &hists)?;
    rep["ensemble"] = json!(s.ensemble.unwrap_or(10_000));
    out.push(Artifact::json("pushforward_report.json", &rep)?);
    Ok(out)
}

/// Leaf through the image of the start point after the burn-in. Without an
/// explicit axis the cone is centred on the estimated unstable direction
/// there, with a wide default opening, so it only rules out folding.
fn build_leaf(ctx: &Context, s: &Settings) -> Result<LeafSegment> {
    let x0 = start_point(ctx, s)?;
    let mut opts = LeafOptions::new(s.target_length.unwrap_or(1.0), s.n_grow.unwrap_or(40));
    if let Some(b) = s.burn {
        opts.burn = b;
    }
    let cone = match &s.cone_axis {
        Some(axis) => Cone::around(&Vector::from_column_slice(axis), s.cone_angle.unwrap_or(0.35))?,
        None => {
            let orbit = iterate_orbit(&ctx.sys, &x0, opts.burn, DEFAULT_HALT_DISTANCE);
            let dir = estimate_unstable_direction(&ctx.sys, &orbit, opts.k_back.min(orbit.steps()))?;
            Cone::around(&dir.vector(), s.cone_angle.unwrap_or(1.0))?
        }
    };
    construct_unstable_leaf_with(&ctx.sys, &x0, &opts, &cone)
}

fn leaf_csv(leaf: &LeafSegment) -> String {
    let d = leaf.samples.first().map_or(0, |p| p.dim());
    let mut csv = String::from("index,arc_length,weight");
    for i in 0..d {
        csv.push_str(&format!(",x_{i}"));
    }
    for i in 0..d {
        csv.push_str(&format!(",t_{i}"));
    }
    csv.push('\n');
    for (i, p) in leaf.samples.iter().enumerate() {
        csv.push_str(&format!("{i},{},{}", leaf.arc_length[i], leaf.weights[i]));
        for c in p.as_slice().iter().chain(&leaf.tangents[i]) {
            csv.push_str(&format!(",{c}"));
        }
        csv.push('\n');
    }
    csv
}

fn leaf_summary(leaf: &LeafSegment) -> serde_json::Value {
    json!({
        "samples": leaf.samples.len(),
        "length": leaf.length(),
        "base_index": leaf.base_index,
        "base_point": leaf.base_point().as_slice(),
        "history": leaf.n_history(),
        "max_spacing": leaf.max_spacing,
    })
}

fn pushforward_leaf_run(ctx: &Context, s: &Settings) -> Result<Vec<Artifact>> {
    let leaf = build_leaf(ctx, s)?;
    let n = s.n.unwrap_or(10_000);
    let g = grid(ctx, s)?;
    let hists = pushforward_leaf(&ctx.sys, &leaf, n, g.resolution, ctx.exec)?;
    let mut out = vec![Artifact::text("leaf.csv", leaf_csv(&leaf))];
    for h in &hists {
        out.push(histogram_artifact("nu", ctx, h, n)?);
    }
    let mut rep = convergence_report(ctx, s, &hists)?;
    rep["leaf"] = leaf_summary(&leaf);
    out.push(Artifact::json("leaf_report.json", &rep)?);
    Ok(out)
}

fn density_check(ctx: &Context, s: &Settings) -> Result<Vec<Artifact>> {
    let leaf = build_leaf(ctx, s)?;
    let profile = conditional_density_profile(&ctx.sys, &leaf, s.tol.unwrap_or(1e-8))?;
    let g = grid(ctx, s)?;
    let n = s.n.unwrap_or(10_000);
    let hists = pushforward_leaf(&ctx.sys, &leaf, n, g.resolution, ctx.exec)?;
    let nu = hists.last().ok_or(SrbError::EmptyEnsemble)?;
    let rep = absolute_continuity_check(
        &ctx.sys,
        &leaf,
        nu,
        &profile,
        s.band_cells.unwrap_or(DEFAULT_BAND_CELLS),
        s.bins,
        DEFAULT_SUBSAMPLES,
    )?;
    let mut prof = Vec::new();
    profile.write_csv(&mut prof)?;
    Ok(vec![
        Artifact::text("leaf.csv", leaf_csv(&leaf)),
        Artifact { name: "density_profile.csv".into(), bytes: prof },
        Artifact::json(
            "density_check.json",
            &json!({
                "system": ctx.sys.name(),
                "parameters": ctx.sys.parameters(),
                "leaf": leaf_summary(&leaf),
                "n": n,
                "normalizer": profile.normalizer,
                "report": rep,
            }),
        )?,
    ])
}

fn eh_run(ctx: &Context, s: &Settings) -> Result<Vec<Artifact>> {
    let x0 = start_point(ctx, s)?;
    let burn = s.burn.unwrap_or(100);
    let n = s.n.unwrap_or(2000);
    let orbit = iterate_orbit(&ctx.sys, &x0, n + 2 * burn, DEFAULT_HALT_DISTANCE);
    let frames = compute_splitting(&ctx.sys, &orbit, burn)?;
    let sub = frames.sub_orbit(&orbit);
    let (ua, sa) = (s.unstable_angle.unwrap_or(1e-3), s.stable_angle.unwrap_or(1e-3));
    let field = |k: usize, _: &Point| frames.cone_pair(k, ua, sa);
    let thresholds = s.angle_thresholds.clone().unwrap_or_else(|| vec![0.05, 0.1, 0.2]);
    let rep = eh_diagnostics(&ctx.sys, &sub, &field, s.holder_alpha.unwrap_or(1.0), s.lambda_bar, &thresholds)?;
    let mut rates = Vec::new();
    rep.write_rates_csv(&mut rates)?;
    let mut report = Vec::new();
    rep.write_json(&mut report)?;
    report.push(b'\n');
    Ok(vec![
        Artifact { name: "eh_report.json".into(), bytes: report },
        Artifact { name: "eh_rates.csv".into(), bytes: rates },
    ])
}

fn core_condition(ctx: &Context, s: &Settings) -> Result<Vec<Artifact>> {
    let eps = s
        .eps_grid
        .clone()
        .unwrap_or_else(|| (4..=10).map(|k| 2f64.powi(-k)).collect());
    let fit = core_condition_estimate(
        &ctx.sys,
        s.n.unwrap_or(8),
        &eps,
        s.sample.unwrap_or(10_000),
        ctx.seed,
        ctx.exec,
    )?;
    let blowup = blowup_constants(&ctx.sys, s.blowup_sample.unwrap_or(200), ctx.seed)?;
    Ok(vec![
        Artifact::json("core_condition.json", &fit)?,
        Artifact::json("blowup.json", &blowup)?,
    ])
}

fn basin(ctx: &Context, s: &Settings) -> Result<Vec<Artifact>> {
    let g = grid(ctx, s)?;
    let reference_n = s.reference_n.unwrap_or(1000);
    let ensemble = s.ensemble.unwrap_or(10_000);
    let hists = pushforward_lebesgue(&ctx.sys, reference_n, ensemble, g.resolution, ctx.seed, ctx.exec)?;
    let mu = hists.last().ok_or(SrbError::EmptyEnsemble)?;
    let suite = TestFunctionSuite::for_region(ctx.sys.region())?;
    // separate streams from the reference ensemble
    let est = basin_fraction(
        &ctx.sys,
        mu,
        &suite,
        s.sample.unwrap_or(1000),
        s.n.unwrap_or(10_000),
        s.tol.unwrap_or(0.02),
        ctx.seed.wrapping_add(1),
        ctx.exec,
    )?;
    Ok(vec![
        histogram_artifact("basin_reference", ctx, mu, reference_n)?,
        Artifact::json(
            "basin.json",
            &json!({
                "system": ctx.sys.name(),
                "parameters": ctx.sys.parameters(),
                "suite_version": SUITE_VERSION,
                "reference_n": reference_n,
                "reference_ensemble": ensemble,
                "estimate": est,
            }),
        )?,
    ])
}

fn entropy_check(ctx: &Context, s: &Settings) -> Result<Vec<Artifact>> {
    let ensemble = s.ensemble.unwrap_or(8);
    let n = s.n.unwrap_or(10_000);
    let renorm = s.renorm_every.unwrap_or(1);
    let starts: Vec<Point> = match &s.x0 {
        Some(x) => vec![Point::new(x)],
        None => (0..ensemble)
            .map(|i| ctx.sys.region().sample(&mut stream_rng(ctx.seed, i as u64)))
            .collect::<Result<_>>()?,
    };
    let ests = ctx
        .exec
        .map_collect(starts.len(), |i| lyapunov_spectrum(&ctx.sys, &starts[i], n, renorm))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    for e in &ests {
        e.require_complete()?;
    }
    let w = 1.0 / ests.len() as f64;
    let samples: Vec<_> = ests.into_iter().map(|e| (e, w)).collect();
    let rhs = entropy_formula_rhs(&samples)?;
    let rows: Vec<_> = starts
        .iter()
        .zip(&samples)
        .map(|(x, (e, _))| {
            json!({
                "x0": x.as_slice(),
                "exponents": e.exponents,
                "positive_sum": e.positive_sum(),
            })
        })
        .collect();
    Ok(vec![Artifact::json(
        "entropy.json",
        &json!({
            "system": ctx.sys.name(),
            "parameters": ctx.sys.parameters(),
            "n": n,
            "entropy_rhs": rhs,
            "samples": rows,
        }),
    )?])
}
