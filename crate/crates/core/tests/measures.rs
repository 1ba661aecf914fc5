use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use srb_lab::hyperbolicity::Cone;
use srb_lab::measures::*;
use srb_lab::systems::*;
use srb_lab::{Execution, Point, Region, SrbError};

fn cat_suite() -> TestFunctionSuite {
    TestFunctionSuite::for_region(&Region::unit_torus(2)).unwrap()
}

#[test]
fn cat_lebesgue_pushforward_is_uniform() {
    let sys = make_cat_map();
    let hs = pushforward_lebesgue(&sys, 1000, 10_000, 64, 11, Execution::Parallel).unwrap();
    assert_eq!(
        hs.iter().map(|h| h.n).collect::<Vec<_>>(),
        vec![250, 500, 1000]
    );
    let u = GridHistogram::uniform(hs[0].grid.clone());
    for h in &hs {
        assert_eq!(h.total_mass, 1.0);
        assert!((h.mass_sum() - 1.0).abs() < 1e-12);
        let l1 = h.l1_distance(&u).unwrap();
        assert!(l1 < 0.05, "L1 {l1}");
    }
}

#[test]
fn ensemble_is_worker_independent() {
    let sys = make_solenoid(SolenoidParams::default()).unwrap();
    let a = pushforward_lebesgue(&sys, 200, 500, 16, 5, Execution::Parallel).unwrap();
    let b = pushforward_lebesgue(&sys, 200, 500, 16, 5, Execution::Sequential).unwrap();
    assert_eq!(a, b);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap();
    let c =
        pool.install(|| pushforward_lebesgue(&sys, 200, 500, 16, 5, Execution::Parallel).unwrap());
    assert_eq!(a, c);
}

#[test]
fn contraction_concentrates_at_origin() {
    let m = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]);
    let sys = make_linear("half", m, Region::centered_box(2, 1.0));
    let hs = pushforward_lebesgue(&sys, 4000, 100, 64, 1, Execution::Parallel).unwrap();
    let h = hs.last().unwrap();
    let g = &h.grid;
    // the origin sits on a cell corner; all four neighbours together hold the mass
    let near: f64 = (0..g.cells())
        .filter(|c| {
            g.center(*c)
                .as_slice()
                .iter()
                .all(|x| x.abs() < g.cell_width(0))
        })
        .map(|c| h.masses[c])
        .sum();
    assert!(near > 0.99, "{near}");
}

#[test]
fn degenerate_ensemble_detected() {
    // x -> 4x leaves (-1,1)^2 within a few steps from almost every start
    let m = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 4.0]);
    let sys = make_linear("blowup", m, Region::centered_box(2, 1.0));
    let err = pushforward_lebesgue(&sys, 100, 1000, 16, 1, Execution::Parallel).unwrap_err();
    assert!(matches!(err, SrbError::DegenerateEnsemble { .. }));
}

#[test]
fn weak_star_examples() {
    let grid = Grid::for_region(&Region::centered_box(2, 1.0), 64).unwrap();
    let suite = TestFunctionSuite::for_region(&Region::centered_box(2, 1.0)).unwrap();
    let p = Point::new(&[0.5, -0.3]);
    let a = GridHistogram::dirac(grid.clone(), &Point::new(&[0.0, 0.0])).unwrap();
    let b = GridHistogram::dirac(grid.clone(), &p).unwrap();
    assert_eq!(weak_star_distance(&a, &a, &suite).unwrap(), 0.0);
    assert_eq!(
        weak_star_distance(&a, &b, &suite).unwrap(),
        weak_star_distance(&b, &a, &suite).unwrap()
    );
    // h = u0 = x1 on this box
    let lin = suite.functions.iter().position(|f| f.name == "u0").unwrap();
    let ha = a.integrate(|x| suite.eval(lin, x));
    let hb = b.integrate(|x| suite.eval(lin, x));
    assert!(((ha - hb).abs() - 0.5).abs() <= grid.cell_width(0));
    let other = Grid::for_region(&Region::centered_box(2, 1.0), 32).unwrap();
    let c = GridHistogram::uniform(other);
    assert_eq!(
        weak_star_distance(&a, &c, &suite),
        Err(SrbError::GridMismatch)
    );
}

#[test]
fn cesaro_identity_for_single_orbit() {
    let sys = make_solenoid(SolenoidParams::default()).unwrap();
    let suite = TestFunctionSuite::for_region(sys.region()).unwrap();
    let x0 = Point::new(&[0.3, -0.2, 1.0]);
    let h = pushforward_lebesgue_single(&sys, &x0, 5000);
    let g = &h.grid;
    let diam = (0..3).map(|i| g.cell_width(i).powi(2)).sum::<f64>().sqrt() / 2.0;
    for (k, f) in suite.functions.iter().enumerate() {
        let direct = birkhoff_average(&sys, &x0, |p| suite.eval(k, p), 5000);
        let hist = h.integrate(|p| suite.eval(k, p));
        assert!(
            (direct.value - hist).abs() <= f.lipschitz * diam,
            "{}",
            f.name
        );
    }
}

fn pushforward_lebesgue_single(sys: &srb_lab::SystemHandle, x0: &Point, n: usize) -> GridHistogram {
    let grid = Grid::for_region(sys.region(), 32).unwrap();
    let mut acc = HistogramAccumulator::new(grid);
    let orbit = srb_lab::iterate_orbit(sys, x0, n - 1, 1e-12);
    for p in &orbit.points {
        acc.add(p, 1);
    }
    acc.normalize(n).unwrap()
}

#[test]
fn invariance_defect_examples() {
    let sys = make_cat_map();
    let suite = cat_suite();
    let u = GridHistogram::uniform(Grid::for_region(sys.region(), 64).unwrap());
    let d = invariance_defect(&sys, &u, &suite, 16, 3).unwrap();
    assert!(d.defect <= 0.02, "{d:?}");

    let sol = make_solenoid(SolenoidParams::default()).unwrap();
    let ssuite = TestFunctionSuite::for_region(sol.region()).unwrap();
    let g = Grid::for_region(sol.region(), 32).unwrap();
    let p = Point::new(&[0.5 / 0.75, 0.0, 0.0]);
    let fixed = GridHistogram::dirac(g.clone(), &p).unwrap();
    let d = invariance_defect(&sol, &fixed, &ssuite, 64, 3).unwrap();
    // probe points fill the cell, whose theta-width doubles under the map
    let lip = ssuite
        .functions
        .iter()
        .map(|f| f.lipschitz)
        .fold(0.0, f64::max);
    assert!(d.defect <= lip * 2.0 * g.cell_width(2), "{d:?}");

    let q = Point::new(&[0.1, 0.1, 1.0]);
    let dq = GridHistogram::dirac(g.clone(), &q).unwrap();
    let d = invariance_defect(&sol, &dq, &ssuite, 64, 3).unwrap();
    let u0 = ssuite
        .functions
        .iter()
        .position(|f| f.name == "u0")
        .unwrap();
    let fq = sol.map(&q).unwrap();
    let expected = (ssuite.eval(u0, &fq) - ssuite.eval(u0, &q)).abs();
    assert!(
        (d.per_function[u0] - expected).abs() < 0.05,
        "{} vs {expected}",
        d.per_function[u0]
    );
}

#[test]
fn birkhoff_examples() {
    let sys = make_cat_map();
    let x = Point::new(&[0.1234, 0.5678]);
    assert_eq!(birkhoff_average(&sys, &x, |_| 0.7, 1000).value, 0.7);
    assert!(
        birkhoff_average(&sys, &x, |p| (TAU * p[0]).cos(), 100_000)
            .value
            .abs()
            < 0.01
    );
    let fp = Point::new(&[0.0, 0.0]);
    assert_eq!(birkhoff_average(&sys, &fp, |p| p[0] + 3.0, 50).value, 3.0);
}

#[test]
fn basin_examples() {
    let sys = make_cat_map();
    let suite = cat_suite();
    let grid = Grid::for_region(sys.region(), 64).unwrap();
    let u = GridHistogram::uniform(grid.clone());
    let e = basin_fraction(&sys, &u, &suite, 0, 10, 0.1, 1, Execution::Parallel).unwrap_err();
    assert_eq!(e, SrbError::EmptySample);
    // the fixed point at the origin repels almost everything
    let dirac = GridHistogram::dirac(grid, &Point::new(&[0.001, 0.001])).unwrap();
    let b = basin_fraction(
        &sys,
        &dirac,
        &suite,
        500,
        2000,
        0.05,
        1,
        Execution::Parallel,
    )
    .unwrap();
    assert!(b.fraction < 0.01, "{b:?}");
    let b = basin_fraction(&sys, &u, &suite, 500, 20_000, 0.05, 1, Execution::Parallel).unwrap();
    assert!(b.fraction > 0.95, "{b:?}");
}

#[test]
fn cat_leaf_is_straight() {
    let sys = make_cat_map();
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let eu = DVector::from_column_slice(&[phi, 1.0]).normalize();
    let cone = Cone::around(&eu, 0.1).unwrap();
    let leaf = construct_unstable_leaf(&sys, &Point::new(&[0.3, 0.2]), 0.4, 30, &cone).unwrap();
    leaf.validate().unwrap();
    assert_eq!(leaf.n_history(), 30);
    assert!((leaf.length() - 0.4).abs() < 2.0 * 0.4 / 512.0);
    for i in 0..leaf.samples.len() {
        assert!(srb_lab::linalg::line_angle(&leaf.tangent(i), &eu) < 1e-8);
    }
    for w in leaf.samples.windows(2) {
        assert!(sys.region().distance(&w[0], &w[1]) <= leaf.max_spacing * (1.0 + 1e-9));
    }
    let hs = pushforward_leaf(&sys, &leaf, 20_000, 64, Execution::Parallel).unwrap();
    let u = GridHistogram::uniform(hs[0].grid.clone());
    let l1 = hs.last().unwrap().l1_distance(&u).unwrap();
    assert!(l1 < 0.05, "L1 {l1}");
}

#[test]
fn single_point_leaf_rejected() {
    let sys = make_cat_map();
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let eu = DVector::from_column_slice(&[phi, 1.0]).normalize();
    let cone = Cone::around(&eu, 0.1).unwrap();
    let mut leaf = construct_unstable_leaf(&sys, &Point::new(&[0.3, 0.2]), 0.1, 20, &cone).unwrap();
    let b = leaf.base_index;
    leaf.samples = vec![leaf.samples[b]];
    leaf.weights = vec![0.0];
    leaf.arc_length = vec![0.0];
    leaf.tangents = vec![leaf.tangents[b].clone()];
    leaf.backward_chains = vec![leaf.backward_chains[b].clone()];
    leaf.log_jacobians = vec![leaf.log_jacobians[b].clone()];
    leaf.base_index = 0;
    let e = pushforward_leaf(&sys, &leaf, 10, 64, Execution::Parallel).unwrap_err();
    assert!(matches!(e, SrbError::InvalidLeaf(_)));
}

#[test]
fn solenoid_leaf_and_pushforward() {
    let sys = make_solenoid(SolenoidParams::default()).unwrap();
    let cone = Cone::around(&DVector::from_column_slice(&[0.0, 0.0, 1.0]), 0.35).unwrap();
    let leaf =
        construct_unstable_leaf(&sys, &Point::new(&[0.1, 0.2, 0.3]), 1.0, 40, &cone).unwrap();
    assert!((leaf.length() - 1.0).abs() < 0.01);
    let th: Vec<f64> = leaf.samples.iter().map(|p| p[2]).collect();
    assert!(leaf
        .samples
        .iter()
        .all(|p| (p[0] * p[0] + p[1] * p[1]).sqrt() < 0.5 / 0.75 + 1e-9));
    // arc length is mostly in theta
    let span = leaf
        .samples
        .windows(2)
        .map(|w| sys.region().displacement(&w[0], &w[1])[2].abs())
        .sum::<f64>();
    assert!(
        span > 0.9 && span <= 1.0,
        "theta span {span} ({} samples)",
        th.len()
    );
    let hs = pushforward_leaf(&sys, &leaf, 4000, 32, Execution::Parallel).unwrap();
    for h in &hs {
        assert!((h.mass_sum() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn contraction_has_no_leaf() {
    let m = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.25]);
    let sys = make_linear("contract", m, Region::centered_box(2, 1.0));
    let cone = Cone::around(&DVector::from_column_slice(&[1.0, 0.0]), 0.3).unwrap();
    let e = construct_unstable_leaf(&sys, &Point::new(&[0.3, 0.2]), 0.1, 20, &cone).unwrap_err();
    assert!(matches!(e, SrbError::LeafConstructionFailed(_)), "{e:?}");
}
