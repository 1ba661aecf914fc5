//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::Rng;
use srb_lab::density::{
    absolute_continuity_check, conditional_density_profile, log_rho_u_n, rho_u_limit, rho_u_n,
    DEFAULT_BAND_CELLS, DEFAULT_SUBSAMPLES,
};
use srb_lab::exec::stream_rng;
use srb_lab::hyperbolicity::{
    compute_splitting, eh_diagnostics, effective_hyperbolic_times,
    effective_hyperbolic_times_brute_force, entropy_formula_rhs, lyapunov_spectrum, Cone, ConePair,
    HyperbolicityReport,
};
use srb_lab::linalg::Vector;
use srb_lab::measures::{
    basin_fraction, construct_unstable_leaf, invariance_defect, pushforward_lebesgue,
    pushforward_leaf, weak_star_distance, Grid, GridHistogram, HistogramAccumulator, LeafSegment,
    TestFunctionSuite,
};
use srb_lab::singular::{blowup_constants, core_condition_estimate};
use srb_lab::systems::*;
use srb_lab::{iterate_orbit, Execution, Point, Result, SystemHandle};

type Check = fn() -> Result<Outcome>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome {
        pass,
        detail: detail.into(),
    })
}

fn solenoid() -> SystemHandle {
    make_solenoid(SolenoidParams::default()).unwrap()
}

fn theta_cone() -> Cone {
    Cone::around(&Vector::from_column_slice(&[0.0, 0.0, 1.0]), 0.35).unwrap()
}

fn cat_eu() -> Vector {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    Vector::from_column_slice(&[phi, 1.0]).normalize()
}

fn solenoid_leaf(length: f64) -> Result<LeafSegment> {
    construct_unstable_leaf(&solenoid(), &Point::new(&[0.1, 0.2, 0.3]), length, 40, &theta_cone())
}

fn cat_leaf() -> Result<LeafSegment> {
    let cone = Cone::around(&cat_eu(), 0.1)?;
    construct_unstable_leaf(&make_cat_map(), &Point::new(&[0.3, 0.2]), 0.5, 30, &cone)
}

fn c1_solenoid_spectrum() -> Result<Outcome> {
    let start = Instant::now();
    let est = lyapunov_spectrum(&solenoid(), &Point::new(&[0.1, 0.2, 0.3]), 100_000, 1)?;
    let secs = start.elapsed().as_secs_f64();
    let expect = [2f64.ln(), 0.25f64.ln(), 0.25f64.ln()];
    let err = est
        .exponents
        .iter()
        .zip(expect)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    outcome(
        err <= 1e-3 && secs < 5.0,
        format!("exponents {:?}, max error {err:.2e} (tol 1e-3), {secs:.2} s (limit 5 s)", est.exponents),
    )
}

fn c2_cat_oracle() -> Result<Outcome> {
    let cat = make_cat_map();
    let mu = pushforward_lebesgue(&cat, 1000, 10_000, 64, 1, Execution::Parallel)?;
    let grid = Grid::for_region(cat.region(), 64)?;
    let l1 = mu.last().unwrap().l1_distance(&GridHistogram::uniform(grid))?;

    let leaf = cat_leaf()?;
    let h = leaf.n_history();
    let mut rho_err: f64 = 0.0;
    for i in 0..leaf.samples.len() {
        rho_err = rho_err.max((rho_u_n(&leaf, leaf.base_index, i, h)? - 1.0).abs());
    }
    let profile = conditional_density_profile(&cat, &leaf, 1e-10)?;
    for r in &profile.rho_values {
        rho_err = rho_err.max((r - 1.0).abs());
    }

    let mut samples = Vec::new();
    for i in 0..4 {
        let x = cat.region().sample(&mut stream_rng(2, i))?;
        samples.push((lyapunov_spectrum(&cat, &x, 10_000, 1)?, 0.25));
    }
    let rhs = entropy_formula_rhs(&samples)?;
    let expect = 0.9624;
    outcome(
        l1 <= 0.05 && rho_err <= 1e-12 && (rhs - expect).abs() <= 1e-3,
        format!(
            "L1 to uniform {l1:.4} (tol 0.05), max |rho-1| {rho_err:.1e} (tol 1e-12), entropy rhs {rhs:.5} (expected {expect} +- 1e-3)"
        ),
    )
}

fn c3_solenoid_entropy() -> Result<Outcome> {
    let sol = solenoid();
    let mut samples = Vec::new();
    for i in 0..4 {
        let x = sol.region().sample(&mut stream_rng(3, i))?;
        samples.push((lyapunov_spectrum(&sol, &x, 100_000, 1)?, 0.25));
    }
    let rhs = entropy_formula_rhs(&samples)?;
    let err = (rhs - 2f64.ln()).abs();
    outcome(err <= 1e-3, format!("positive-exponent sum {rhs:.6}, |diff to log 2| {err:.2e} (tol 1e-3)"))
}

fn c4_pushforward_convergence() -> Result<Outcome> {
    let sol = solenoid();
    let leaf = solenoid_leaf(1.0)?;
    let nus = pushforward_leaf(&sol, &leaf, 20_000, Grid::default_resolution(3), Execution::Parallel)?;
    let suite = TestFunctionSuite::for_region(sol.region())?;
    let d: Vec<f64> = nus
        .windows(2)
        .map(|w| weak_star_distance(&w[0], &w[1], &suite))
        .collect::<Result<_>>()?;
    let checkpoints: Vec<usize> = nus.iter().map(|h| h.n).collect();
    let last = *d.last().unwrap();
    let monotone = d.windows(2).all(|w| w[1] <= w[0]);
    outcome(
        last < 0.02 && monotone,
        format!("checkpoints {checkpoints:?}, consecutive distances {d:.5?}; d(nu_1e4, nu_2e4) {last:.5} (tol 0.02), nonincreasing {monotone}"),
    )
}

fn c5_absolute_continuity() -> Result<Outcome> {
    let sol = solenoid();
    let leaf = solenoid_leaf(3.0)?;
    let profile = conditional_density_profile(&sol, &leaf, 1e-8)?;
    let nu = pushforward_leaf(&sol, &leaf, 10_000, 32, Execution::Parallel)?;
    let rs = absolute_continuity_check(&sol, &leaf, nu.last().unwrap(), &profile, DEFAULT_BAND_CELLS, None, DEFAULT_SUBSAMPLES)?;

    let cat = make_cat_map();
    let cleaf = cat_leaf()?;
    let cprofile = conditional_density_profile(&cat, &cleaf, 1e-10)?;
    let cnu = pushforward_leaf(&cat, &cleaf, 1000, 64, Execution::Parallel)?;
    let rc = absolute_continuity_check(&cat, &cleaf, cnu.last().unwrap(), &cprofile, DEFAULT_BAND_CELLS, None, DEFAULT_SUBSAMPLES)?;
    outcome(
        rs.discrepancy <= 0.1 && rc.discrepancy <= 0.05,
        format!(
            "solenoid discrepancy {:.4} (tol 0.1), cat discrepancy {:.4} (tol 0.05)",
            rs.discrepancy, rc.discrepancy
        ),
    )
}

fn c6_invariance_defects() -> Result<Outcome> {
    let sol = solenoid();
    let cat = make_cat_map();
    let cases: Vec<(&str, SystemHandle, GridHistogram)> = vec![
        ("cat mu", cat.clone(), pushforward_lebesgue(&cat, 1000, 10_000, 64, 6, Execution::Parallel)?.pop().unwrap()),
        ("solenoid mu", sol.clone(), pushforward_lebesgue(&sol, 1000, 10_000, 32, 6, Execution::Parallel)?.pop().unwrap()),
        ("solenoid nu", sol.clone(), pushforward_leaf(&sol, &solenoid_leaf(1.0)?, 10_000, 32, Execution::Parallel)?.pop().unwrap()),
    ];
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (name, sys, h) in &cases {
        let suite = TestFunctionSuite::for_region(sys.region())?;
        let d = invariance_defect(sys, h, &suite, 16, 6)?;
        worst = worst.max(d.defect);
        parts.push(format!("{name} {:.4} (+- {:.4})", d.defect, d.error_bar));
    }
    outcome(worst <= 0.02, format!("max over suite: {} (tol 0.02)", parts.join(", ")))
}

fn c7_basin() -> Result<Outcome> {
    let sol = solenoid();
    let mu = pushforward_lebesgue(&sol, 1000, 10_000, 32, 7, Execution::Parallel)?.pop().unwrap();
    let suite = TestFunctionSuite::for_region(sol.region())?;
    let b = basin_fraction(&sol, &mu, &suite, 10_000, 10_000, 0.02, 8, Execution::Parallel)?;
    outcome(
        b.fraction >= 0.95,
        format!("fraction {:.4} ({} of {}, {} truncated) (need >= 0.95)", b.fraction, b.matched, b.sample, b.truncated),
    )
}

fn c8_effective_times() -> Result<Outcome> {
    let mut agree = 0;
    for s in 0..1000u64 {
        let mut rng = stream_rng(8, s);
        let len = rng.random_range(1..200);
        let rates: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..2.0)).collect();
        let lb = rng.random_range(0.0..1.0);
        if effective_hyperbolic_times(&rates, lb) == effective_hyperbolic_times_brute_force(&rates, lb) {
            agree += 1;
        }
    }
    let p = BelykhParams::default();
    let sys = make_belykh(p)?;
    let lb = p.lambda2.min(p.mu2).ln() - 1e-6;
    let e = |i: usize| {
        let mut v = Vector::zeros(2);
        v[i] = 1.0;
        v
    };
    let field = |_: usize, _: &Point| {
        Ok(ConePair {
            unstable: Cone::around(&e(1), 1e-4)?,
            stable: Cone::around(&e(0), 1e-4)?,
        })
    };
    let mut min_density: f64 = 1.0;
    let mut orbits = 0;
    for i in 0..5 {
        let x = sys.region().sample(&mut stream_rng(80, i))?;
        let orbit = iterate_orbit(&sys, &x, 3000, 0.0);
        if orbit.steps() < 1000 {
            continue;
        }
        orbits += 1;
        let rep = eh_diagnostics(&sys, &orbit, &field, 1.0, Some(lb), &[])?;
        min_density = min_density.min(rep.effective_time_density.0);
    }
    outcome(
        agree == 1000 && orbits > 0 && min_density >= 1.0 - 1.0 / 1000.0,
        format!("O(n) = brute force on {agree}/1000 sequences; Belykh effective-time density {min_density:.5} over {orbits} orbits"),
    )
}

fn c9_core_condition() -> Result<Outcome> {
    let eps: Vec<f64> = (4..=10).map(|k| 2f64.powi(-k)).collect();
    let mut parts = Vec::new();
    let mut pass = true;
    let bp = BelykhParams::default();
    for (name, sys) in [
        ("lozi", make_lozi(LoziParams::default())?),
        ("belykh", make_belykh(bp)?),
    ] {
        let fit = core_condition_estimate(&sys, 8, &eps, 20_000, 9, Execution::Parallel)?;
        let monotone = fit.masses.windows(2).all(|w| w[1] <= w[0]);
        pass &= monotone && (0.5..=1.5).contains(&fit.fitted_q);
        parts.push(format!(
            "{name} q {:.3} (CI {:.3}..{:.3}), masses monotone {monotone}",
            fit.fitted_q, fit.q_confidence.0, fit.q_confidence.1
        ));
    }
    // mass near the x = +-1 edges of the square scales with this exponent
    let edge_q = bp.lambda2.min(bp.mu2).ln() / bp.lambda1.max(bp.mu1).recip().ln();
    parts.push(format!("belykh boundary-scaling prediction q {edge_q:.3}"));
    let lp = LorenzMapParams::default();
    let blow = blowup_constants(&make_lorenz_map(lp)?, 200, 9)?;
    let expect = 2.0 - lp.nu0;
    pass &= (blow.forward.alpha - expect).abs() <= 0.1;
    parts.push(format!("lorenz alpha {:.4} (expected {expect:.4} +- 0.1)", blow.forward.alpha));
    outcome(pass, parts.join("; "))
}

fn cone_invariants(rep: &HyperbolicityReport) -> bool {
    (0..rep.steps).all(|k| {
        rep.delta[k] >= 0.0
            && rep.lambda[k] <= rep.lambda_u[k] + 1e-12
            && rep.lambda[k] <= -rep.lambda_s[k] + 1e-12
    })
}

fn artifact_bytes(out: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

fn c10_properties() -> Result<Outcome> {
    // rho^u cocycle
    let leaf = solenoid_leaf(1.0)?;
    let sol = solenoid();
    let m = leaf.samples.len();
    let mut cocycle: f64 = 0.0;
    let mut rng = stream_rng(10, 0);
    for _ in 0..2000 {
        let (x, y, z) = (rng.random_range(0..m), rng.random_range(0..m), rng.random_range(0..m));
        let n = rng.random_range(1..=leaf.n_history());
        let lhs = rho_u_n(&leaf, x, y, n)? * rho_u_n(&leaf, y, z, n)?;
        let rhs = rho_u_n(&leaf, x, z, n)?;
        cocycle = cocycle.max((lhs / rhs - 1.0).abs());
        let anti = log_rho_u_n(&leaf, x, y, n)? + log_rho_u_n(&leaf, y, x, n)?;
        cocycle = cocycle.max(anti.abs());
    }
    let lim = rho_u_limit(&sol, &leaf, leaf.base_index, 0, 1e-10)?;

    // merge associativity and partition independence
    let grid = Grid::for_region(sol.region(), 16)?;
    let pts: Vec<Point> = (0..3000)
        .map(|i| sol.region().sample(&mut stream_rng(11, i)))
        .collect::<Result<_>>()?;
    let acc_of = |r: std::ops::Range<usize>| {
        let mut a = HistogramAccumulator::new(grid.clone());
        for p in &pts[r] {
            a.add(p, 3);
        }
        a
    };
    let (a, b, c) = (acc_of(0..700), acc_of(700..1900), acc_of(1900..3000));
    let left = a.clone().merge(&b)?.merge(&c)?;
    let right = a.merge(&b.merge(&c)?)?;
    let whole = acc_of(0..3000);
    let merge_ok = left.counts == right.counts && left.counts == whole.counts && left.total == whole.total;

    // artifacts across worker counts
    let dir = std::env::temp_dir().join(format!("srb-lab-acceptance-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("config.json");
    fs::write(
        &cfg,
        r#"{"version": 1, "seed": 10, "system": {"name": "solenoid"}, "settings": {"n": 400, "ensemble": 2000}}"#,
    )
    .unwrap();
    let mut runs = Vec::new();
    for w in ["1", "2", "4", "4"] {
        let out = dir.join(format!("w{w}-{}", runs.len()));
        let status = Command::new(env!("CARGO_BIN_EXE_srb-lab"))
            .args(["pushforward-lebesgue", "--workers", w, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .env_remove("SRB_LAB_SEED")
            .output()
            .unwrap()
            .status;
        assert!(status.success());
        runs.push(artifact_bytes(&out));
    }
    let _ = fs::remove_dir_all(&dir);
    let deterministic = runs.iter().all(|r| r == &runs[0]) && !runs[0].is_empty();

    // cone and rate invariants
    let mut cones_ok = true;
    let mut steps = 0;
    // the slowdown orbit escapes after a few hundred steps, hence the short burn
    for (sys, x0, burn) in [
        (sol.clone(), Point::new(&[0.1, -0.3, 1.0]), 20),
        (make_cat_map(), Point::new(&[0.3, 0.7]), 20),
        (make_neutral_slowdown(NeutralSlowdownParams::default())?, Point::new(&[1e-5, 0.05]), 5),
    ] {
        let orbit = iterate_orbit(&sys, &x0, 600, 0.0);
        let frames = compute_splitting(&sys, &orbit, burn)?;
        let sub = frames.sub_orbit(&orbit);
        for (ua, sa) in [(1e-3, 1e-3), (0.2, 0.3)] {
            let field = |k: usize, _: &Point| frames.cone_pair(k, ua, sa);
            for alpha in [0.5, 1.0] {
                let rep = eh_diagnostics(&sys, &sub, &field, alpha, Some(0.01), &[])?;
                cones_ok &= cone_invariants(&rep);
                steps += rep.steps;
            }
        }
    }
    outcome(
        cocycle <= 1e-12 && lim.rate < 1.0 && merge_ok && deterministic && cones_ok,
        format!(
            "cocycle max rel error {cocycle:.1e} (tol 1e-12); merge bit-exact {merge_ok}; artifacts identical across 1/2/4 workers {deterministic}; cone invariants on {steps} steps {cones_ok}"
        ),
    )
}

fn main() {
    let criteria: [(&str, Check); 10] = [
        ("solenoid Lyapunov spectrum", c1_solenoid_spectrum),
        ("cat map oracle", c2_cat_oracle),
        ("solenoid entropy", c3_solenoid_entropy),
        ("push-forward convergence", c4_pushforward_convergence),
        ("absolute continuity", c5_absolute_continuity),
        ("invariance defect", c6_invariance_defects),
        ("basin fraction", c7_basin),
        ("effective hyperbolic times", c8_effective_times),
        ("core condition and blow-up", c9_core_condition),
        ("property suites", c10_properties),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match f() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error {}: {e}", e.name())),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {:>2} {name}: {detail} [{:.1} s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
