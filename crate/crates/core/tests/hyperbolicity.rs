use srb_lab::dynamics::{iterate_orbit, Region};
use srb_lab::hyperbolicity::*;
use srb_lab::linalg::{Matrix, Point, Vector};
use srb_lab::systems::*;
use srb_lab::SrbError;

fn e(d: usize, i: usize) -> Vector {
    let mut v = Vector::zeros(d);
    v[i] = 1.0;
    v
}

#[test]
fn solenoid_spectrum() {
    let sol = make_solenoid(SolenoidParams::default()).unwrap();
    let est = lyapunov_spectrum(&sol, &Point::new(&[0.1, 0.2, 0.3]), 100_000, 10).unwrap();
    let expect = [2f64.ln(), 0.25f64.ln(), 0.25f64.ln()];
    for (a, b) in est.exponents.iter().zip(expect) {
        assert!((a - b).abs() < 1e-3, "{:?}", est.exponents);
    }
}

#[test]
fn solenoid_eh1_and_eh2() {
    let sol = make_solenoid(SolenoidParams::default()).unwrap();
    let orbit = iterate_orbit(&sol, &Point::new(&[0.1, -0.3, 1.0]), 2200, 0.0);
    let frames = compute_splitting(&sol, &orbit, 100).unwrap();
    let sub = frames.sub_orbit(&orbit);
    let field = |k: usize, _: &Point| frames.cone_pair(k, 1e-3, 1e-3);
    let rep = eh_diagnostics(&sol, &sub, &field, 1.0, None, &[0.1, 0.5, 2.0]).unwrap();
    assert!(
        (rep.eh1_running_average - 2f64.ln()).abs() < 0.01,
        "{}",
        rep.eh1_running_average
    );
    assert!(rep.delta.iter().all(|d| *d == 0.0));
    let min_theta = rep.theta.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(min_theta > 0.1);
    assert_eq!(rep.eh2_profile[0].upper_density, 0.0);
    assert!(rep
        .eh2_profile
        .windows(2)
        .all(|w| w[0].upper_density <= w[1].upper_density));
}

#[test]
fn solenoid_nue() {
    let sol = make_solenoid(SolenoidParams::default()).unwrap();
    let orbit = iterate_orbit(&sol, &Point::new(&[0.1, -0.3, 1.0]), 10_200, 0.0);
    let frames = compute_splitting(&sol, &orbit, 100).unwrap();
    let a = nue_averages(&bundle_rates(&sol, &orbit, &frames).unwrap()).unwrap();
    assert!((a.nue1 - 0.25f64.ln()).abs() < 1e-3, "{a:?}");
    assert!((a.nue2 - 2f64.ln()).abs() < 1e-3, "{a:?}");
}

#[test]
fn belykh_effective_times_have_density_one() {
    let p = BelykhParams::default();
    let sys = make_belykh(p).unwrap();
    let orbit = iterate_orbit(&sys, &Point::new(&[0.13, 0.41]), 3000, 0.0);
    assert_eq!(orbit.steps(), 3000);
    let field = |_: usize, _: &Point| {
        Ok(ConePair {
            unstable: Cone::around(&e(2, 1), 1e-4)?,
            stable: Cone::around(&e(2, 0), 1e-4)?,
        })
    };
    let lb = p.lambda2.min(p.mu2).ln() - 1e-6;
    let rep = eh_diagnostics(&sys, &orbit, &field, 1.0, Some(lb), &[]).unwrap();
    assert!(rep.delta.iter().all(|d| *d == 0.0));
    // every n in 1..=N qualifies; the density over [0, M) misses only n = 0
    assert_eq!(rep.effective_times, (1..=3000).collect::<Vec<_>>());
    let (u, _) = rep.effective_time_density;
    assert!((u - 1.0).abs() <= 1.0 / orbit.steps() as f64, "{u}");
}

#[test]
fn neutral_slowdown_reduces_effective_hyperbolicity() {
    let sys = make_neutral_slowdown(NeutralSlowdownParams::default()).unwrap();
    let orbit = iterate_orbit(&sys, &Point::new(&[1e-5, 0.05]), 400, 0.0);
    assert!(orbit.steps() > 120, "{}", orbit.steps());
    let field = |_: usize, _: &Point| {
        Ok(ConePair {
            unstable: Cone::around(&e(2, 0), 0.05)?,
            stable: Cone::around(&e(2, 1), 0.05)?,
        })
    };
    let rep = eh_diagnostics(&sys, &orbit, &field, 0.5, None, &[]).unwrap();
    assert!(rep.eh1_running_average > 0.0 && rep.eh1_running_average < 1.0);
    let (u, _) = rep.effective_time_density;
    assert!(u > 0.0 && u < 1.0, "{u}");

    let frames = compute_splitting(&sys, &orbit, 5).unwrap();
    let reg = regularity_proxy(&sys, &orbit, &frames, None).unwrap();
    assert!(reg.level_history.windows(2).all(|w| w[0] <= w[1]));
    assert!(reg.level > reg.level_history[0]);
}

#[test]
fn cat_regularity_is_constant() {
    let cat = make_cat_map();
    let orbit = iterate_orbit(&cat, &Point::new(&[0.2, 0.7]), 300, 0.0);
    let frames = compute_splitting(&cat, &orbit, 50).unwrap();
    let reg = regularity_proxy(&cat, &orbit, &frames, None).unwrap();
    assert!((reg.c_n - 1.0).abs() < 1e-9);
    // the cat map is symmetric, so its eigendirections are orthogonal
    assert!((reg.k_n - std::f64::consts::FRAC_PI_2).abs() < 1e-9);
    assert_eq!(reg.level, 1);
}

#[test]
fn hyperbolic_linear_regularity() {
    let m = make_linear(
        "shear",
        Matrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 0.5]),
        Region::unbounded(2),
    );
    let orbit = iterate_orbit(&m, &Point::new(&[0.0, 1e-30]), 200, 0.0);
    let frames = compute_splitting(&m, &orbit, 60).unwrap();
    let reg = regularity_proxy(&m, &orbit, &frames, None).unwrap();
    assert!((reg.c_n - 1.0).abs() < 1e-9);
    // E^u = e1, E^s = (1, -1.5)/|.|: angle atan(1.5)
    assert!((reg.k_n - 1.5f64.atan()).abs() < 1e-9);
    assert_eq!(reg.level, (1.0 / 1.5f64.atan()).ceil() as usize);
}

#[test]
fn entropy_rhs_examples() {
    let sol = make_solenoid(SolenoidParams::default()).unwrap();
    let starts = [
        [0.1, 0.2, 0.3],
        [-0.4, 0.1, 5.0],
        [0.0, 0.5, 2.2],
        [0.3, -0.3, 4.4],
    ];
    let samples: Vec<_> = starts
        .iter()
        .map(|s| {
            (
                lyapunov_spectrum(&sol, &Point::new(s), 20_000, 10).unwrap(),
                0.25,
            )
        })
        .collect();
    assert!((entropy_formula_rhs(&samples).unwrap() - 2f64.ln()).abs() < 1e-3);

    let half = make_linear(
        "half",
        Matrix::identity(2, 2) * 0.5,
        Region::centered_box(2, 1.0),
    );
    let est = lyapunov_spectrum(&half, &Point::new(&[0.5, 0.5]), 100, 10).unwrap();
    assert_eq!(entropy_formula_rhs(&[(est, 1.0)]).unwrap(), 0.0);
}

#[test]
fn stable_plane_for_solenoid() {
    let sol = make_solenoid(SolenoidParams::default()).unwrap();
    let orbit = iterate_orbit(&sol, &Point::new(&[0.1, 0.2, 0.3]), 60, 0.0);
    let s = estimate_stable_direction(&sol, &orbit, 60).unwrap();
    assert_eq!(s.subspace.dim(), 2);
    assert!(s.subspace.angle_to(&e(3, 0)) < 1e-9 && s.subspace.angle_to(&e(3, 1)) < 1e-9);
    assert!(matches!(
        estimate_stable_direction(&sol, &orbit, 61),
        Err(SrbError::HistoryTooShort { .. })
    ));
}
