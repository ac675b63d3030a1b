use proptest::prelude::*;
use quasilattice_core::correlation::{
    ks_series_continuum, ks_series_discrete, pi_weights, rho_dilute_direct, rho_direct,
    KsTruncation,
};
use quasilattice_core::energy::global_bounds;
use quasilattice_core::partition::{
    joint_estimate, DiluteMode, EnsembleParams, McBudget, SubsetQuadrature, TermCut,
};
use quasilattice_core::potential::activity_radius;
use quasilattice_core::sampling::Sequential;
use quasilattice_core::{Configuration, CubeGrid, Error, Potential, Region};

const SQRT_PI: f64 = 1.772_453_850_905_516;

fn repulsive() -> Potential {
    Potential::pure_repulsive(1.0, 2.0, 1).unwrap()
}

fn trunc(order: usize) -> KsTruncation {
    KsTruncation {
        order,
        samples: 1 << 14,
        seed: 11,
        ..KsTruncation::default()
    }
}

fn exact_quad() -> SubsetQuadrature {
    SubsetQuadrature {
        nodes: 1,
        adjacent_nodes: 1,
        max_gl_dims: 64,
        max_adjacent_dims: 64,
        ..SubsetQuadrature::default()
    }
}

#[test]
fn continuum_order_zero_is_z_on_singletons() {
    let ens = EnsembleParams::new(0.05, 1.0).unwrap();
    let one = Configuration::line(&[0.3]).unwrap();
    let two = Configuration::line(&[0.3, 2.0]).unwrap();
    let s1 = ks_series_continuum(&repulsive(), &ens, 0.0, &one, &trunc(0), &Sequential).unwrap();
    let s2 = ks_series_continuum(&repulsive(), &ens, 0.0, &two, &trunc(0), &Sequential).unwrap();
    assert_eq!(s1.estimate.value, 0.05);
    assert_eq!(s1.estimate.stat_err, 0.0);
    assert_eq!(s2.estimate.value, 0.0);
}

#[test]
fn continuum_first_order_singleton() {
    // (K̃δ)(x) = -C(β), and C = 2√π for 1/r² in one dimension
    let z = 0.05;
    let ens = EnsembleParams::new(z, 1.0).unwrap();
    let eta = Configuration::line(&[0.3]).unwrap();
    let s = ks_series_continuum(&repulsive(), &ens, 0.0, &eta, &trunc(1), &Sequential).unwrap();
    let expect = z - z * z * 2.0 * SQRT_PI;
    assert!(
        s.estimate.contains(expect, 4.0),
        "{:?} vs {expect}",
        s.estimate
    );
    assert!(s.estimate.stat_err < 1e-3 * expect);
}

#[test]
fn continuum_first_order_pair() {
    let z = 0.05;
    let ens = EnsembleParams::new(z, 1.0).unwrap();
    let eta = Configuration::line(&[0.0, 0.8]).unwrap();
    let s = ks_series_continuum(&repulsive(), &ens, 0.0, &eta, &trunc(1), &Sequential).unwrap();
    let expect = z * z * (-1.0f64 / 0.64).exp();
    assert!(
        (s.estimate.value - expect).abs() < 1e-15,
        "{:?} vs {expect}",
        s.estimate
    );
}

#[test]
fn zero_potential_gives_z_to_the_size() {
    let z = 0.7;
    let ens = EnsembleParams::new(z, 1.0).unwrap();
    let p = Potential::test_zero(1).unwrap();
    let t = KsTruncation {
        override_radius: true,
        ..trunc(3)
    };
    for xs in [&[0.1][..], &[0.1, 0.2], &[0.1, 0.2, 5.0]] {
        let eta = Configuration::line(xs).unwrap();
        let s = ks_series_continuum(&p, &ens, 0.0, &eta, &t, &Sequential).unwrap();
        let expect = z.powi(xs.len() as i32);
        assert!(
            (s.estimate.value - expect).abs() < 1e-14,
            "{xs:?}: {:?}",
            s.estimate
        );
    }
}

#[test]
fn discrete_single_cube_ideal_gas() {
    // Only the own cube interacts, with Mayer factor -1: z Σ (-z a)^n.
    let (z, a) = (0.5, 0.5);
    let ens = EnsembleParams::new(z, 1.0).unwrap();
    let p = Potential::test_zero(1).unwrap();
    let grid = CubeGrid::new(a, 1).unwrap();
    let region = Region::boxed(grid, &[1]).unwrap();
    let eta = Configuration::line(&[0.2]).unwrap();
    let mut prev_err = f64::INFINITY;
    for order in [0, 2, 5, 11] {
        let t = KsTruncation {
            order,
            ..KsTruncation::default()
        };
        let s = ks_series_discrete(&p, &grid, &ens, 0.0, &eta, Some(&region), &t).unwrap();
        let partial: f64 = (0..=order).map(|n| z * (-z * a).powi(n as i32)).sum();
        assert!(
            (s.estimate.value - partial).abs() < 1e-14,
            "order {order}: {:?}",
            s.estimate
        );
        let err = (s.estimate.value - z / (1.0 + z * a)).abs();
        assert!(err < prev_err);
        assert!(err <= s.bounds.tail, "{err} > {:?}", s.bounds);
        prev_err = err;
    }
}

#[test]
fn discrete_adjacent_pair_factorizes() {
    // Independent cubes: ρ⁻(x1, x2) = (z/(1+za))², with z² Σ (m+1)(-za)^m.
    let (z, a) = (0.4, 0.5);
    let ens = EnsembleParams::new(z, 1.0).unwrap();
    let p = Potential::test_zero(1).unwrap();
    let grid = CubeGrid::new(a, 1).unwrap();
    let region = Region::boxed(grid, &[3]).unwrap();
    let eta = Configuration::line(&[0.1, 0.7]).unwrap();
    for order in 1..=6 {
        let t = KsTruncation {
            order,
            ..KsTruncation::default()
        };
        let s = ks_series_discrete(&p, &grid, &ens, 0.0, &eta, Some(&region), &t).unwrap();
        let partial: f64 = (0..order)
            .map(|m| z * z * (m + 1) as f64 * (-z * a).powi(m as i32))
            .sum();
        assert!(
            (s.estimate.value - partial).abs() < 1e-14,
            "order {order}: {:?}",
            s.estimate
        );
    }
}

#[test]
fn discrete_matches_dilute_enumeration() {
    let p = repulsive();
    let a = 0.5;
    let grid = CubeGrid::new(a, 1).unwrap();
    let region = Region::boxed(grid, &[6]).unwrap();
    let c = p.mayer_c_beta(1.0, 1e-10).unwrap().value;
    let z = 0.5 * activity_radius(c + a, 1.0, 0.0);
    let ens = EnsembleParams::new(z, 1.0).unwrap();
    let eta = Configuration::line(&[1.3]).unwrap();
    let t = KsTruncation {
        order: 6,
        nodes: 8,
        ..KsTruncation::default()
    };
    let s = ks_series_discrete(&p, &grid, &ens, 0.0, &eta, Some(&region), &t).unwrap();
    let direct = rho_dilute_direct(
        &p,
        &region,
        &ens,
        &eta,
        &DiluteMode::Enumerate(SubsetQuadrature::default()),
        &Sequential,
    )
    .unwrap();
    let diff = (s.estimate.value - direct.value).abs();
    assert!(
        diff <= s.estimate.trunc_bound + direct.trunc_bound + 4.0 * direct.stat_err,
        "{s:?} vs {direct:?}"
    );
    assert!(diff / direct.value < 1e-3, "{s:?} vs {direct:?}");
}

#[test]
fn depth_bound_and_repeated_cubes_vanish() {
    let ens = EnsembleParams::new(0.05, 1.0).unwrap();
    let eta = Configuration::line(&[0.0, 1.0, 2.0, 3.0]).unwrap();
    let c = ks_series_continuum(&repulsive(), &ens, 0.0, &eta, &trunc(2), &Sequential).unwrap();
    assert_eq!(c.estimate.value, 0.0);
    let grid = CubeGrid::new(0.5, 1).unwrap();
    let d = ks_series_discrete(
        &repulsive(),
        &grid,
        &ens,
        0.0,
        &eta,
        None,
        &KsTruncation {
            order: 2,
            ..KsTruncation::default()
        },
    )
    .unwrap();
    assert_eq!(d.estimate.value, 0.0);
    let same_cube = Configuration::line(&[0.1, 0.2]).unwrap();
    let d = ks_series_discrete(
        &repulsive(),
        &grid,
        &ens,
        0.0,
        &same_cube,
        None,
        &KsTruncation::default(),
    )
    .unwrap();
    assert_eq!(d.estimate.value, 0.0);
}

#[test]
fn discrete_is_symmetric_in_eta() {
    let p = repulsive();
    let grid = CubeGrid::new(0.5, 1).unwrap();
    let region = Region::boxed(grid, &[5]).unwrap();
    let ens = EnsembleParams::new(0.03, 1.0).unwrap();
    let t = KsTruncation {
        order: 3,
        nodes: 6,
        ..KsTruncation::default()
    };
    let fwd = Configuration::line(&[0.3, 1.2]).unwrap();
    let rev = Configuration::line(&[1.2, 0.3]).unwrap();
    let f = ks_series_discrete(&p, &grid, &ens, 0.0, &fwd, Some(&region), &t).unwrap();
    let r = ks_series_discrete(&p, &grid, &ens, 0.0, &rev, Some(&region), &t).unwrap();
    let diff = (f.estimate.value - r.estimate.value).abs();
    assert!(
        diff <= f.quadrature + r.quadrature + 1e-15 * f.estimate.value,
        "{f:?} vs {r:?}"
    );
}

#[test]
fn joint_parts_satisfy_the_split() {
    let p = repulsive();
    let region = Region::boxed(CubeGrid::new(0.5, 1).unwrap(), &[8]).unwrap();
    let ens = EnsembleParams::new(0.3, 1.0).unwrap();
    let eta = Configuration::line(&[1.1]).unwrap();
    let j = joint_estimate(
        &p,
        &region,
        &ens,
        Some(&eta),
        0.0,
        &TermCut::default(),
        &McBudget::new(1 << 12, 5),
        &Sequential,
    )
    .unwrap();
    let c = j.correlation.unwrap();
    let rebuilt = j.minus_ratio.value * c.rho_minus.value + c.remainder.value;
    assert!(
        (rebuilt - c.rho.value).abs() <= 1e-12 * c.rho.value,
        "{c:?}"
    );
    assert!(c.rho.value > 0.0 && c.rho.value < ens.z);
}

#[test]
fn ideal_gas_direct_correlations() {
    let p = Potential::test_zero(1).unwrap();
    let region = Region::boxed(CubeGrid::new(1.0, 1).unwrap(), &[4]).unwrap();
    let ens = EnsembleParams::new(1.0, 1.0).unwrap();
    let eta = Configuration::line(&[2.5]).unwrap();
    let m = rho_dilute_direct(
        &p,
        &region,
        &ens,
        &eta,
        &DiluteMode::Enumerate(exact_quad()),
        &Sequential,
    )
    .unwrap();
    assert!((m.value - 0.5).abs() < 1e-14, "{m:?}");
    let dense = Configuration::line(&[2.5, 2.7]).unwrap();
    let m = rho_dilute_direct(
        &p,
        &region,
        &ens,
        &dense,
        &DiluteMode::Enumerate(exact_quad()),
        &Sequential,
    )
    .unwrap();
    assert_eq!(m.value, 0.0);
    let cut = TermCut::default();
    let full = rho_direct(
        &p,
        &region,
        &ens,
        &eta,
        0.0,
        &cut,
        &McBudget::new(256, 2),
        &Sequential,
    )
    .unwrap();
    assert!(full.contains(1.0, 3.0), "{full:?}");
    let empty = Configuration::empty(1);
    let one = rho_direct(
        &p,
        &region,
        &ens,
        &empty,
        0.0,
        &cut,
        &McBudget::new(256, 2),
        &Sequential,
    )
    .unwrap();
    assert_eq!(one.value, 1.0);
}

#[test]
fn refuses_above_the_radius() {
    let c = 2.0 * SQRT_PI;
    let z = 1.01 * activity_radius(c, 1.0, 0.0);
    let ens = EnsembleParams::new(z, 1.0).unwrap();
    let eta = Configuration::line(&[0.0]).unwrap();
    let err =
        ks_series_continuum(&repulsive(), &ens, 0.0, &eta, &trunc(1), &Sequential).unwrap_err();
    assert!(matches!(err, Error::AboveRadius { .. }), "{err:?}");
    let forced = KsTruncation {
        override_radius: true,
        ..trunc(1)
    };
    let s = ks_series_continuum(&repulsive(), &ens, 0.0, &eta, &forced, &Sequential).unwrap();
    assert!(s.bounds.tail.is_infinite());
    let grid = CubeGrid::new(0.5, 1).unwrap();
    let err = ks_series_discrete(
        &repulsive(),
        &grid,
        &ens,
        0.0,
        &eta,
        None,
        &KsTruncation::default(),
    )
    .unwrap_err();
    assert!(matches!(err, Error::AboveRadius { .. }), "{err:?}");
}

#[test]
fn empty_eta_is_rejected_by_the_series() {
    let ens = EnsembleParams::new(0.05, 1.0).unwrap();
    let empty = Configuration::empty(1);
    assert!(ks_series_continuum(&repulsive(), &ens, 0.0, &empty, &trunc(1), &Sequential).is_err());
    let grid = CubeGrid::new(0.5, 1).unwrap();
    assert!(ks_series_discrete(
        &repulsive(),
        &grid,
        &ens,
        0.0,
        &empty,
        None,
        &KsTruncation::default()
    )
    .is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pi_weights_are_a_distribution(xs in proptest::collection::vec(0.0f64..3.0, 1..8)) {
        let p = Potential::power_core_with_tail(1.0, 4.0, 0.1, 1.0, 1).unwrap();
        let b = global_bounds(&p, 1e-6).unwrap().b_global;
        let mut xs = xs;
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let pts: Vec<_> = Configuration::line(&xs).unwrap().points().to_vec();
        let w = pi_weights(&p, b, &pts);
        prop_assert!(!w.fallback);
        prop_assert!((w.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn discrete_ideal_gas_closes(z in 0.05f64..0.6, a in 0.1f64..0.6, x in 0.0f64..1.0) {
        prop_assume!(z * a < (-1.0f64).exp());
        let ens = EnsembleParams::new(z, 1.0).unwrap();
        let p = Potential::test_zero(1).unwrap();
        let grid = CubeGrid::new(a, 1).unwrap();
        let region = Region::boxed(grid, &[2]).unwrap();
        let eta = Configuration::line(&[(2.0 * x - 0.5) * a]).unwrap();
        let t = KsTruncation { order: 11, ..KsTruncation::default() };
        let s = ks_series_discrete(&p, &grid, &ens, 0.0, &eta, Some(&region), &t).unwrap();
        let exact = z / (1.0 + z * a);
        prop_assert!((s.estimate.value - exact).abs() <= s.estimate.trunc_bound + 1e-15);
    }

    #[test]
    fn continuum_pair_first_order_is_boltzmann(r in 0.2f64..4.0) {
        let ens = EnsembleParams::new(0.05, 1.0).unwrap();
        let eta = Configuration::line(&[0.0, r]).unwrap();
        let s = ks_series_continuum(&repulsive(), &ens, 0.0, &eta, &KsTruncation { samples: 16, ..trunc(1) }, &Sequential).unwrap();
        let expect = 0.0025 * (-1.0 / (r * r)).exp();
        prop_assert!((s.estimate.value - expect).abs() <= 1e-15);
    }
}
