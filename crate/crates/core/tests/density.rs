use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use srb_lab::density::*;
use srb_lab::hyperbolicity::Cone;
use srb_lab::measures::*;
use srb_lab::systems::*;
use srb_lab::{Execution, Point, Region, SrbError, SystemHandle};

fn solenoid() -> SystemHandle {
    make_solenoid(SolenoidParams::default()).unwrap()
}

fn theta_cone() -> Cone {
    Cone::around(&DVector::from_column_slice(&[0.0, 0.0, 1.0]), 0.35).unwrap()
}

fn solenoid_leaf() -> &'static LeafSegment {
    static LEAF: OnceLock<LeafSegment> = OnceLock::new();
    LEAF.get_or_init(|| {
        construct_unstable_leaf(&solenoid(), &Point::new(&[0.1, 0.2, 0.3]), 1.0, 40, &theta_cone())
            .unwrap()
    })
}

fn long_solenoid_leaf() -> LeafSegment {
    construct_unstable_leaf(&solenoid(), &Point::new(&[0.1, 0.2, 0.3]), 3.0, 40, &theta_cone()).unwrap()
}

fn cat_eu() -> DVector<f64> {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    DVector::from_column_slice(&[phi, 1.0]).normalize()
}

fn cat_leaf(len: f64) -> LeafSegment {
    let cone = Cone::around(&cat_eu(), 0.1).unwrap();
    construct_unstable_leaf(&make_cat_map(), &Point::new(&[0.3, 0.2]), len, 30, &cone).unwrap()
}

#[test]
fn unstable_jacobian_examples() {
    let cat = make_cat_map();
    let j = unstable_jacobian(&cat, &Point::new(&[0.2, 0.7]), &cat_eu()).unwrap();
    assert!((j - (3.0 + 5f64.sqrt()) / 2.0).abs() < 1e-14);
    let lin = make_linear("diag", DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]), Region::unbounded(2));
    let e1 = DVector::from_column_slice(&[1.0, 0.0]);
    assert_eq!(unstable_jacobian(&lin, &Point::new(&[3.0, 1.0]), &e1).unwrap(), 2.0);
    // near-theta tangent on the solenoid: |J t| within the coupling bound of 2
    let sys = solenoid();
    let leaf = solenoid_leaf();
    let eps_c = 0.5 * (0.35f64).tan() + 0.5;
    for i in (0..leaf.samples.len()).step_by(37) {
        let j = unstable_jacobian(&sys, &leaf.samples[i], &leaf.tangent(i)).unwrap();
        assert!((j - 2.0).abs() <= eps_c, "{j}");
    }
}

#[test]
fn rho_trivial_cases() {
    let leaf = solenoid_leaf();
    for n in [1, 5, 40] {
        assert_eq!(rho_u_n(leaf, 7, 7, n).unwrap(), 1.0);
    }
    assert_eq!(
        rho_u_n(leaf, 0, 1, 41),
        Err(SrbError::HistoryTooShort { available: 40, requested: 41 })
    );
    let cl = cat_leaf(0.3);
    let last = cl.samples.len() - 1;
    for n in 1..=30 {
        assert_eq!(rho_u_n(&cl, 0, last, n).unwrap(), 1.0);
    }
}

/// Independent product: push the theta axis forward from the deepest chain
/// point through the raw chain, then multiply the expansions over the last
/// `n` steps.
fn raw_log_product(sys: &SystemHandle, chain: &[Point], n: usize) -> f64 {
    let h = chain.len();
    let mut t = DVector::from_column_slice(&[0.0, 0.0, 1.0]);
    let mut acc = 0.0;
    for k in (1..=h).rev() {
        let w = sys.jacobian(&chain[k - 1]).unwrap() * &t;
        if k <= n {
            acc += w.norm().ln();
        }
        t = w.normalize();
    }
    acc
}

#[test]
fn rho_matches_raw_chain_oracle() {
    let sys = solenoid();
    let leaf = solenoid_leaf();
    let (y, z) = (0, leaf.samples.len() - 1);
    let oracle = (raw_log_product(&sys, &leaf.backward_chains[y], 20)
        - raw_log_product(&sys, &leaf.backward_chains[z], 20))
    .exp();
    let r = rho_u_n(leaf, y, z, 20).unwrap();
    assert!((r / oracle - 1.0).abs() < 1e-10, "{r} vs {oracle}");
}

#[test]
fn rho_limit_examples() {
    let cl = cat_leaf(0.3);
    let cat = make_cat_map();
    let r = rho_u_limit(&cat, &cl, 0, cl.samples.len() - 1, 1e-8).unwrap();
    assert_eq!(r.value, 1.0);
    assert_eq!(r.truncation_n, 1);
    let sys = solenoid();
    let leaf = solenoid_leaf();
    let r = rho_u_limit(&sys, leaf, 3, 3, 1e-8).unwrap();
    assert_eq!((r.value, r.tail_bound), (1.0, 0.0));
    let (y, z) = (0, leaf.samples.len() - 1);
    let r = rho_u_limit(&sys, leaf, y, z, 1e-8).unwrap();
    assert!(r.rate < 0.6 && r.rate > 0.4, "{r:?}");
    assert!(r.truncation_n + 10 <= leaf.n_history(), "{r:?}");
    for n in r.truncation_n..=leaf.n_history() - 10 {
        let a = rho_u_n(leaf, y, z, n).unwrap();
        let b = rho_u_n(leaf, y, z, n + 10).unwrap();
        assert!((a - b).abs() < 1e-8, "n={n}: {a} {b}");
    }
    // tail bounds shrink geometrically with the requested tolerance
    let r2 = rho_u_limit(&sys, leaf, y, z, 1e-10).unwrap();
    assert!(r2.truncation_n > r.truncation_n);
    assert!(r2.tail_bound <= r.tail_bound * r.rate.powi((r2.truncation_n - r.truncation_n) as i32) * 1.000001);
}

#[test]
fn expanding_chains_rejected() {
    let sys = solenoid();
    let mut leaf = solenoid_leaf().clone();
    // reverse the chain geometry: deep points spread out instead of merging
    let base = leaf.backward_chains[0].clone();
    for (i, chain) in leaf.backward_chains.iter_mut().enumerate() {
        for (k, p) in chain.iter_mut().enumerate() {
            *p = base[k];
            p[2] = (p[2] + 1e-3 * i as f64 * 2f64.powi(k as i32 / 4)).rem_euclid(std::f64::consts::TAU);
        }
    }
    let e = rho_u_limit(&sys, &leaf, 0, leaf.samples.len() - 1, 1e-8).unwrap_err();
    assert!(matches!(e, SrbError::NoContraction { .. }), "{e:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]
    #[test]
    fn cocycle_and_symmetry(a in 0usize..10_000, b in 0usize..10_000, c in 0usize..10_000, n in 1usize..=40) {
        let leaf = solenoid_leaf();
        let m = leaf.samples.len();
        let (y, z, w) = (a % m, b % m, c % m);
        let yz = rho_u_n(leaf, y, z, n).unwrap();
        let zw = rho_u_n(leaf, z, w, n).unwrap();
        let yw = rho_u_n(leaf, y, w, n).unwrap();
        prop_assert!((yz * zw / yw - 1.0).abs() < 1e-12);
        prop_assert_eq!(log_rho_u_n(leaf, y, z, n).unwrap(), -log_rho_u_n(leaf, z, y, n).unwrap());
        let zy = rho_u_n(leaf, z, y, n).unwrap();
        prop_assert!((yz * zy - 1.0).abs() <= 4.0 * f64::EPSILON);
    }
}

#[test]
fn profile_examples() {
    let cat = make_cat_map();
    let cl = cat_leaf(0.3);
    let p = conditional_density_profile(&cat, &cl, 1e-8).unwrap();
    let l = cl.length();
    assert!(p.d_values.iter().all(|d| (d * l - 1.0).abs() < 1e-12));
    assert_eq!(p.rho_values[p.base_index], 1.0);

    let sys = solenoid();
    let leaf = solenoid_leaf();
    let p = conditional_density_profile(&sys, leaf, 1e-8).unwrap();
    assert_eq!(p.rho_values[p.base_index], 1.0);
    assert!((p.quadrature(leaf) - 1.0).abs() < 1e-6);
    assert!(p.d_values.iter().all(|d| *d > 0.0));
    let (lo, hi) = p.d_values.iter().fold((f64::MAX, 0.0f64), |(a, b), d| (a.min(*d), b.max(*d)));
    assert!(hi / lo > 1.0 + 1e-6, "profile is flat: {lo} {hi}");
    let mut buf = Vec::new();
    p.write_csv(&mut buf).unwrap();
    assert!(String::from_utf8(buf).unwrap().starts_with("arc_length,rho,d\n"));
}

#[test]
fn profile_continuity_under_refinement() {
    let sys = solenoid();
    let mut jumps = Vec::new();
    for div in [128.0, 256.0, 512.0] {
        let mut o = LeafOptions::new(1.0, 40);
        o.spacing = Some(1.0 / div);
        let leaf = construct_unstable_leaf_with(&sys, &Point::new(&[0.1, 0.2, 0.3]), &o, &theta_cone()).unwrap();
        let p = conditional_density_profile(&sys, &leaf, 1e-8).unwrap();
        let j = p.d_values.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        jumps.push(j);
    }
    assert!(jumps[1] < jumps[0] && jumps[2] < jumps[1], "{jumps:?}");
}

#[test]
fn cat_absolute_continuity() {
    let cat = make_cat_map();
    let cl = cat_leaf(0.5);
    let p = conditional_density_profile(&cat, &cl, 1e-8).unwrap();
    let u = GridHistogram::uniform(Grid::for_region(cat.region(), 64).unwrap());
    let r = absolute_continuity_check(&cat, &cl, &u, &p, DEFAULT_BAND_CELLS, None, DEFAULT_SUBSAMPLES).unwrap();
    assert!(r.discrepancy <= 0.05, "{r:?}");
}

#[test]
fn synthetic_histogram_from_profile() {
    let sys = solenoid();
    let leaf = &long_solenoid_leaf();
    let p = conditional_density_profile(&sys, leaf, 1e-8).unwrap();
    let grid = Grid::for_region(sys.region(), 32).unwrap();
    let mut acc = HistogramAccumulator::new(grid);
    for (i, s) in leaf.samples.iter().enumerate() {
        acc.add(s, (p.d_values[i] * leaf.weights[i] * 1e12) as u64);
    }
    let h = acc.normalize(1).unwrap();
    let r = absolute_continuity_check(&sys, leaf, &h, &p, DEFAULT_BAND_CELLS, None, DEFAULT_SUBSAMPLES).unwrap();
    println!("{r:?}");
    assert!(r.discrepancy < 0.1, "{r:?}");
    // nothing near the leaf
    let far = GridHistogram::dirac(h.grid.clone(), &Point::new(&[-0.9, 0.0, 5.0])).unwrap();
    let e = absolute_continuity_check(&sys, leaf, &far, &p, DEFAULT_BAND_CELLS, None, DEFAULT_SUBSAMPLES);
    assert!(matches!(e, Err(SrbError::InsufficientMass { .. })), "{e:?}");
}

#[test]
fn solenoid_absolute_continuity() {
    let sys = solenoid();
    let leaf = &long_solenoid_leaf();
    let p = conditional_density_profile(&sys, leaf, 1e-8).unwrap();
    let hs = pushforward_leaf(&sys, leaf, 10_000, 32, Execution::Parallel).unwrap();
    let r = absolute_continuity_check(&sys, leaf, hs.last().unwrap(), &p, DEFAULT_BAND_CELLS, None, DEFAULT_SUBSAMPLES).unwrap();
    println!("{r:?}");
    assert!(r.discrepancy <= 0.1, "{r:?}");
}
