use proptest::prelude::*;
use quasilattice_core::energy::CubeSums;
use quasilattice_core::partition::{
    epsilon1, epsilon1_series, indicator_decomposition, joint_estimate, poisson_tail_bound,
    pressures, z_dilute, z_grand, z_plus, z_plus_direct, DiluteMode, EnsembleParams, McBudget,
    PressureDilute, SubsetQuadrature, TermCut,
};
use quasilattice_core::sampling::Sequential;
use quasilattice_core::{CubeGrid, Error, Potential, Region};

fn line(a: f64, n: usize) -> Region {
    Region::boxed(CubeGrid::new(a, 1).unwrap(), &[n]).unwrap()
}

#[test]
fn ideal_gas_grand_partition_function() {
    let p = Potential::test_zero(1).unwrap();
    let ens = EnsembleParams::new(0.5, 1.0).unwrap();
    let region = line(0.5, 8);
    let z = z_grand(
        &p,
        &region,
        &ens,
        0.0,
        &TermCut::fixed(12),
        &McBudget::new(64, 1),
        &Sequential,
    )
    .unwrap();
    assert!(z.contains(2.0f64.exp(), 3.0), "{z:?}");
    assert!(z.trunc_bound > 0.0 && z.trunc_bound < 1e-5);
    let adaptive = z_grand(
        &p,
        &region,
        &ens,
        0.0,
        &TermCut::default(),
        &McBudget::new(64, 1),
        &Sequential,
    )
    .unwrap();
    assert!(((adaptive.value - 2.0f64.exp()) / 2.0f64.exp()).abs() < 1e-6);
}

#[test]
fn ideal_gas_dilute_partition_function_is_exact() {
    let p = Potential::test_zero(2).unwrap();
    let ens = EnsembleParams::new(0.7, 1.0).unwrap();
    let region = Region::boxed(CubeGrid::new(0.5, 2).unwrap(), &[3, 3]).unwrap();
    let zm = z_dilute(
        &p,
        &region,
        &ens,
        &DiluteMode::Enumerate(SubsetQuadrature::default()),
        &Sequential,
    )
    .unwrap();
    let exact = (1.0f64 + 0.7 * 0.25).powi(9);
    assert!(((zm.value - exact) / exact).abs() < 1e-12, "{zm:?}");
}

#[test]
fn ideal_gas_dilute_pressure_converges_to_z() {
    let p = Potential::test_zero(1).unwrap();
    let ens = EnsembleParams::new(0.5, 1.0).unwrap();
    let regions: Vec<Region> = [0.4, 0.2, 0.1]
        .iter()
        .map(|&a| Region::with_extent(CubeGrid::new(a, 1).unwrap(), &[2.0]).unwrap())
        .collect();
    let scan = pressures(
        &p,
        &regions,
        &ens,
        0.0,
        &PressureDilute::Enumerate(SubsetQuadrature::default()),
        1e-8,
        &TermCut::default(),
        &McBudget::new(64, 3),
        &Sequential,
    )
    .unwrap();
    let mut prev_gap = f64::INFINITY;
    for row in &scan.rows {
        let a = row.a;
        let analytic = (1.0 + 0.5 * a).ln() / a;
        assert!((row.p_minus.value - analytic).abs() < 1e-12, "{row:?}");
        let gap = 0.5 - row.p_minus.value;
        // gap/z = za/2 (1 + O(a))
        let ratio = gap / 0.5 / (0.5 * a / 2.0);
        assert!((ratio - 1.0).abs() < 0.5 * a, "a = {a}: ratio {ratio}");
        assert!(gap < prev_gap);
        prev_gap = gap;
    }
}

#[test]
fn enumeration_and_bernoulli_sampler_agree() {
    let p = Potential::pure_repulsive(1.0, 2.0, 1).unwrap();
    let ens = EnsembleParams::new(0.8, 1.0).unwrap();
    let region = line(0.5, 6);
    let e = z_dilute(
        &p,
        &region,
        &ens,
        &DiluteMode::Enumerate(SubsetQuadrature::default()),
        &Sequential,
    )
    .unwrap();
    let m = z_dilute(
        &p,
        &region,
        &ens,
        &DiluteMode::MonteCarlo(McBudget::new(1 << 16, 5)),
        &Sequential,
    )
    .unwrap();
    assert!(e.agrees_with(&m, 3.0), "{e:?} vs {m:?}");
    assert!(e.trunc_bound < 1e-6 * e.value);
}

#[test]
fn factorization_through_direct_plus_series() {
    let p = Potential::pure_repulsive(1.0, 2.0, 1).unwrap();
    let ens = EnsembleParams::new(0.5, 1.0).unwrap();
    let region = line(1.0, 4);
    let budget = McBudget::new(1 << 13, 11);
    let quad = SubsetQuadrature::default();
    let z = z_grand(
        &p,
        &region,
        &ens,
        0.0,
        &TermCut::default(),
        &budget,
        &Sequential,
    )
    .unwrap();
    let zm = z_dilute(&p, &region, &ens, &DiluteMode::Enumerate(quad), &Sequential).unwrap();
    let zp = z_plus_direct(&p, &region, &ens, &quad, &budget, &Sequential).unwrap();
    let resid = z.value.ln() - zm.value.ln() - zp.value.ln();
    let sigma = ((z.stat_err / z.value).powi(2)
        + (zm.stat_err / zm.value).powi(2)
        + (zp.stat_err / zp.value).powi(2))
    .sqrt();
    let slack = z.trunc_bound / z.value + zm.trunc_bound / zm.value + zp.trunc_bound / zp.value;
    assert!(
        resid.abs() <= 3.0 * sigma + slack,
        "resid {resid} sigma {sigma}"
    );
    let ratio = z_plus(
        &p,
        &region,
        &ens,
        0.0,
        &TermCut::default(),
        &budget,
        &Sequential,
    )
    .unwrap();
    assert!(ratio.value >= 1.0);
}

#[test]
fn indicator_assignments_rebuild_z() {
    let p = Potential::pure_repulsive(1.0, 2.0, 1).unwrap();
    let ens = EnsembleParams::new(0.5, 1.0).unwrap();
    let region = line(1.0, 4);
    let budget = McBudget::new(1 << 12, 2);
    let dec = indicator_decomposition(
        &p,
        &region,
        &ens,
        0.0,
        &TermCut::default(),
        &budget,
        &Sequential,
    )
    .unwrap();
    assert_eq!(dec.parts.len(), 16);
    let z = z_grand(
        &p,
        &region,
        &ens,
        0.0,
        &TermCut::default(),
        &McBudget::new(1 << 13, 9),
        &Sequential,
    )
    .unwrap();
    assert!(dec.total.agrees_with(&z, 3.0), "{:?} vs {z:?}", dec.total);
    assert!(matches!(
        indicator_decomposition(
            &p,
            &line(1.0, 13),
            &ens,
            0.0,
            &TermCut::default(),
            &budget,
            &Sequential
        ),
        Err(Error::RegionTooLarge { .. })
    ));
}

#[test]
fn joint_sampler_is_reproducible() {
    let p = Potential::pure_repulsive(1.0, 2.0, 1).unwrap();
    let ens = EnsembleParams::new(0.5, 1.0).unwrap();
    let region = line(0.5, 8);
    let run = |seed| {
        joint_estimate(
            &p,
            &region,
            &ens,
            None,
            0.0,
            &TermCut::default(),
            &McBudget::new(4096, seed),
            &Sequential,
        )
        .unwrap()
    };
    assert_eq!(run(4), run(4));
    assert_ne!(run(4).z_full.value, run(5).z_full.value);
    let j = run(4);
    assert!((j.z_minus.value + j.z_dense.value - j.z_full.value).abs() <= 1e-12 * j.z_full.value);
    assert!((j.minus_ratio.value + j.dense_ratio.value - 1.0).abs() < 1e-15);
}

#[test]
fn epsilon1_frozen_value() {
    let sums = CubeSums {
        b: 4.0,
        v0: 0.0,
        v0_tail: 0.0,
        shells: 0,
    };
    let ens = EnsembleParams::new(1.0, 1.0).unwrap();
    let e = epsilon1(&sums, 1.0, 1, &ens);
    assert!((e - 0.009327096232436384).abs() < 1e-17, "{e}");
    assert!(epsilon1_series(&sums, 1.0, 1, &ens) <= e);
}

#[test]
fn enumeration_cost_estimate() {
    let exact = SubsetQuadrature {
        nodes: 1,
        max_gl_dims: 64,
        ..SubsetQuadrature::default()
    };
    assert_eq!(exact.evaluations(10, 1), 1024.0);
    assert_eq!(
        SubsetQuadrature::default().evaluations(2, 1),
        1.0 + 2.0 * 8.0 + 64.0
    );
    // beyond max_gl_dims every subset costs mc_samples
    assert_eq!(
        SubsetQuadrature::default().evaluations(3, 3),
        1.0 + 3.0 * 512.0 + 3.0 * 262144.0 + 4096.0
    );
}

#[test]
fn invalid_ensemble() {
    assert!(EnsembleParams::new(-0.1, 1.0).is_err());
    assert!(EnsembleParams::new(0.1, 0.0).is_err());
    assert!(EnsembleParams::new(f64::NAN, 1.0).is_err());
}

proptest! {
    #[test]
    fn epsilon1_bounds_its_series(z in 0.01f64..2.0, a in 0.05f64..1.0, b in 0.1f64..20.0, frac in 0.0f64..0.25, beta in 0.2f64..3.0) {
        // the closed form dominates once b >= 4 v0
        let sums = CubeSums { b, v0: frac * b, v0_tail: 0.0, shells: 0 };
        let ens = EnsembleParams::new(z, beta).unwrap();
        let series = epsilon1_series(&sums, a, 1, &ens);
        let closed = epsilon1(&sums, a, 1, &ens);
        prop_assert!(series <= closed * (1.0 + 1e-12), "{series} > {closed}");
    }

    #[test]
    fn poisson_tail_dominates(x in 0.01f64..5.0, n in 5usize..40) {
        let mut exact = 0.0;
        let mut t = 1.0f64;
        for k in 1..=200usize {
            t *= x / k as f64;
            if k > n { exact += t; }
        }
        prop_assert!(poisson_tail_bound(x, n) >= exact * (1.0 - 1e-12));
    }
}
