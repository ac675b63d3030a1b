use std::sync::OnceLock;

use proptest::prelude::*;
use quasilattice_core::energy::{
    check_superstability, cube_sums, global_bounds, hardcore_energy, interaction_energy,
    stability_constants, total_energy, Energy, StabilityConstants,
};
use quasilattice_core::{Configuration, CubeGrid, Error, Potential};

fn repulsive() -> Potential {
    Potential::pure_repulsive(1.0, 2.0, 1).unwrap()
}

fn power_core() -> Potential {
    Potential::power_core_with_tail(1.0, 4.0, 0.1, 1.0, 1).unwrap()
}

fn naive_energy(p: &Potential, xs: &[f64]) -> f64 {
    let mut u = 0.0;
    for i in 0..xs.len() {
        for j in 0..xs.len() {
            if i != j {
                u += 0.5 * p.phi((xs[i] - xs[j]).abs());
            }
        }
    }
    u
}

#[test]
fn energy_examples() {
    let p = repulsive();
    let u = total_energy(&p, &Configuration::line(&[0.0, 1.0, 3.0]).unwrap()).unwrap();
    assert!((u - (1.0 + 1.0 / 9.0 + 0.25)).abs() < 1e-15);
    assert_eq!(
        total_energy(&p, &Configuration::line(&[0.3]).unwrap()).unwrap(),
        0.0
    );
    let w = interaction_energy(
        &p,
        &Configuration::line(&[0.0]).unwrap(),
        &Configuration::line(&[1.0, 2.0]).unwrap(),
    );
    assert_eq!(w.unwrap(), 1.25);
    let w0 = interaction_energy(
        &p,
        &Configuration::empty(1),
        &Configuration::line(&[1.0]).unwrap(),
    );
    assert_eq!(w0.unwrap(), 0.0);
    let overlap = interaction_energy(
        &p,
        &Configuration::line(&[1.0]).unwrap(),
        &Configuration::line(&[1.0]).unwrap(),
    );
    assert!(matches!(overlap, Err(Error::Domain(_))));
    assert!(Configuration::line(&[1.0, 1.0]).is_err());
}

#[test]
fn hardcore_energy_examples() {
    let p = repulsive();
    let g1 = CubeGrid::new(1.0, 1).unwrap();
    let g = Configuration::line(&[0.1, 0.2]).unwrap();
    assert_eq!(hardcore_energy(&p, &g1, &g).unwrap(), Energy::Infinite);
    assert_eq!(Energy::Infinite.boltzmann(1.0), 0.0);
    let g5 = CubeGrid::new(0.5, 1).unwrap();
    let g = Configuration::line(&[0.1, 0.6]).unwrap();
    assert_eq!(
        hardcore_energy(&p, &g5, &g).unwrap(),
        Energy::Finite(p.phi(0.5))
    );
}

#[test]
fn repulsive_constants_example() {
    let p = repulsive();
    let c = stability_constants(&p, &CubeGrid::new(0.5, 1).unwrap(), 1e-10).unwrap();
    assert_eq!(c.b, 4.0);
    assert_eq!(c.v0, 0.0);
    assert_eq!(c.big_a, 1.0);
    assert_eq!(c.b_local, 0.0);
    assert!((c.c_d - 2.0).abs() < 1e-14);
    assert_eq!(c.b_global, 0.0);
}

#[test]
fn logarithmic_branch_and_coarse_edge_rejected() {
    let p = Potential::pure_repulsive(1.0, 1.0, 1).unwrap();
    let e = stability_constants(&p, &CubeGrid::new(0.5, 1).unwrap(), 1e-6).unwrap_err();
    assert!(matches!(e, Error::LogarithmicBranch { .. }));
    assert!(e.to_string().contains("s > d"));
    let pc = Potential::power_core_with_tail(1.0, 4.0, 1.0, 1.0, 1).unwrap();
    let e = stability_constants(&pc, &CubeGrid::new(0.8, 1).unwrap(), 1e-6).unwrap_err();
    assert!(matches!(e, Error::EdgeTooCoarse { .. }), "{e}");
    assert!(e.to_string().contains("2·v0"));
    let e = stability_constants(&repulsive(), &CubeGrid::new(1.5, 1).unwrap(), 1e-6).unwrap_err();
    assert!(matches!(e, Error::Precondition(_)));
}

#[test]
fn v0_matches_double_grid_oracle() {
    let p = power_core();
    let a = 0.25;
    let sums = cube_sums(&p, a, 1e-6).unwrap();
    let m = 32;
    let mut oracle = 0.0;
    for k in -1000i64..=1000 {
        let mut sup: f64 = 0.0;
        for i in 0..=m {
            let x = a * i as f64 / m as f64;
            for j in 0..=m {
                let y = a * (k as f64 + j as f64 / m as f64);
                let r = (x - y).abs();
                if r > 0.0 {
                    sup = sup.max(p.negative_part(r));
                }
            }
        }
        oracle += sup;
    }
    // the oracle drops |k| > 1000, whose sup is at most c_a (1000a)^{-2} per cube
    let omitted = 2.0 * 0.1 / (a * a * 1000.0);
    assert!(oracle <= sums.v0 * (1.0 + 1e-12), "{oracle} vs {}", sums.v0);
    assert!(
        sums.v0 - oracle <= omitted + 1e-3 * oracle,
        "{oracle} vs {}",
        sums.v0
    );
}

#[test]
fn v0_scaled_approaches_phi_minus_integral() {
    let p = power_core();
    let target = p.phi_minus_integral(1e-10).unwrap().value;
    let gaps: Vec<f64> = [0.4, 0.2, 0.1, 0.05]
        .iter()
        .map(|&a| (cube_sums(&p, a, 1e-6).unwrap().v0 * a - target).abs())
        .collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
}

#[test]
fn a_m_matches_scan_bracket() {
    let p = power_core();
    let tol = 1e-6;
    let g = global_bounds(&p, tol).unwrap();
    assert!(g.bracketed);
    let r0 = p.certify_assumption_a().unwrap().r0;
    let gap = |a: f64| {
        let s = cube_sums(&p, a, 1e-4).unwrap();
        s.b - 2.0 * s.v0
    };
    assert!(
        g.residual <= tol * p.positive_part(g.a_m) || g.residual <= 1e-6 * gap(g.a_m / 2.0),
        "{g:?}"
    );
    // dense scan of [r0/10, r0]; the gap is positive at the left end
    let n = 1000;
    let at = |i: usize| r0 * (0.1 + 0.9 * i as f64 / n as f64);
    assert!(gap(at(0)) > 0.0);
    let mut bracket = None;
    for i in 1..=n {
        if gap(at(i)) <= 0.0 {
            bracket = Some((at(i - 1), at(i)));
            break;
        }
    }
    let (lo, hi) = bracket.expect("sign change on the scan");
    assert!(
        g.a_m >= lo * (1.0 - 1e-6) && g.a_m <= hi * (1.0 + 1e-6),
        "{} not in [{lo}, {hi}]",
        g.a_m
    );
    assert!(g.b_global > 0.0);
    assert!(g.a_m_lower.is_finite() && g.b_closed_form > 0.0 && g.b_closed_form_core > 0.0);
}

#[test]
fn global_b_is_edge_free() {
    let p = power_core();
    let g = global_bounds(&p, 1e-6).unwrap();
    let c1 = stability_constants(&p, &CubeGrid::new(0.5 * g.a_m, 1).unwrap(), 1e-6).unwrap();
    let c2 = stability_constants(&p, &CubeGrid::new(0.25 * g.a_m, 1).unwrap(), 1e-6).unwrap();
    assert_eq!(c1.b_global, c2.b_global);
    assert_eq!(c1.a_m, g.a_m);
    assert_eq!(global_bounds(&repulsive(), 1e-6).unwrap().b_global, 0.0);
}

#[test]
fn superstability_margin_trivial_cases() {
    let p = power_core();
    let a = 0.5 * global_bounds(&p, 1e-6).unwrap().a_m;
    let grid = CubeGrid::new(a, 1).unwrap();
    let c = stability_constants(&p, &grid, 1e-6).unwrap();
    assert_eq!(
        check_superstability(&p, &c, &grid, &Configuration::empty(1)).unwrap(),
        0.0
    );
    let m = check_superstability(&p, &c, &grid, &Configuration::line(&[0.3]).unwrap()).unwrap();
    assert_eq!(m, c.b_local);
    assert!(check_superstability(
        &p,
        &c,
        &CubeGrid::new(2.0 * a, 1).unwrap(),
        &Configuration::empty(1)
    )
    .is_err());
}

/// Constants at a = 0.2 and a = 0.1 for both audited potentials.
fn audit_constants() -> &'static [(Potential, Vec<StabilityConstants>)] {
    static CONSTS: OnceLock<Vec<(Potential, Vec<StabilityConstants>)>> = OnceLock::new();
    CONSTS.get_or_init(|| {
        [repulsive(), power_core()]
            .into_iter()
            .map(|p| {
                let cs = [0.2, 0.1]
                    .iter()
                    .map(|&a| stability_constants(&p, &CubeGrid::new(a, 1).unwrap(), 1e-6).unwrap())
                    .collect();
                (p, cs)
            })
            .collect()
    })
}

fn cube_config(counts: Vec<(usize, Vec<f64>)>, a: f64) -> Vec<f64> {
    let mut xs = Vec::new();
    for (cube, (n, offsets)) in counts.into_iter().enumerate() {
        for u in offsets.into_iter().take(n) {
            xs.push(a * (cube as f64 - 0.5 + u));
        }
    }
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

fn occupied(a: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0usize..=5, prop::collection::vec(0.0f64..1.0, 5)), 1..8)
        .prop_map(move |c| cube_config(c, a))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn energy_matches_naive_and_is_additive(xs in prop::collection::vec(-5.0f64..5.0, 0..20), cut in 0usize..20) {
        let mut xs = xs;
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let p = power_core();
        let u = total_energy(&p, &Configuration::line(&xs).unwrap()).unwrap();
        let naive = naive_energy(&p, &xs);
        prop_assert!((u - naive).abs() <= 1e-12 * naive.abs().max(1.0));
        let k = cut.min(xs.len());
        let (eta, gamma) = (Configuration::line(&xs[..k]).unwrap(), Configuration::line(&xs[k..]).unwrap());
        let sum = total_energy(&p, &eta).unwrap() + total_energy(&p, &gamma).unwrap() + interaction_energy(&p, &eta, &gamma).unwrap();
        prop_assert!((u - sum).abs() <= 1e-12 * u.abs().max(1.0));
    }

    #[test]
    fn superstability_holds_below_threshold(xs in occupied(0.2), ys in occupied(0.1)) {
        for (p, consts) in audit_constants() {
            for (c, pts) in consts.iter().zip([&xs, &ys]) {
                let grid = CubeGrid::new(c.a, 1).unwrap();
                let gamma = Configuration::line(pts).unwrap();
                let m = check_superstability(p, c, &grid, &gamma).unwrap();
                prop_assert!(m >= 0.0, "{p:?} a={} margin {m}", c.a);
                prop_assert!(total_energy(p, &gamma).unwrap() >= -c.b_global * gamma.len() as f64);
            }
        }
    }

    #[test]
    fn hardcore_finite_iff_dilute(xs in prop::collection::vec(0.0f64..4.0, 0..8)) {
        let mut xs = xs;
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let grid = CubeGrid::new(0.5, 1).unwrap();
        let gamma = Configuration::line(&xs).unwrap();
        let finite = matches!(hardcore_energy(&repulsive(), &grid, &gamma).unwrap(), Energy::Finite(_));
        let dilute = quasilattice_core::lattice::occupancy(&grid, &gamma).values().all(|&n| n <= 1);
        prop_assert_eq!(finite, dilute);
    }
}
