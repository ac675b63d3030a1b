use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::direct::rho_dilute_direct;
use crate::error::Result;
use crate::estimate::Estimate;
use crate::lattice::{has_repeat, CubeIndex, Region};
use crate::partition::{
    joint_estimate, DiluteMode, EnsembleParams, McBudget, SubsetQuadrature, TermCut, ENUMERATE_MAX,
};
use crate::potential::Potential;
use crate::sampling::BatchExecutor;
use crate::{math, Configuration};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceOptions {
    /// Regions with at most this many cubes get `ρ⁻` by subset enumeration.
    pub enumerate_max: usize,
    pub quad: SubsetQuadrature,
    pub cut: TermCut,
    pub budget: McBudget,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        Self {
            enumerate_max: ENUMERATE_MAX,
            quad: SubsetQuadrature::default(),
            cut: TermCut::default(),
            budget: McBudget::new(1 << 14, 0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub a: f64,
    pub n_cubes: usize,
    pub rho_full: Estimate,
    pub rho_minus: Estimate,
    /// `ρ - ρ⁻`.
    pub diff: Estimate,
    /// `R = ρ - (Z⁻/Z)ρ⁻`.
    pub remainder: Estimate,
    /// `Z⁻/Z`.
    pub z_ratio: Estimate,
    /// `1 - Z⁻/Z`.
    pub dense_ratio: Estimate,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// Edges where `η` was not dilute, with the reason.
    pub skipped: Vec<(f64, String)>,
}

/// `ρ_Λ(η)` against `ρ⁻_Λ(η)` on a sequence of regions (typically one
/// physical box at decreasing edge `a`).
///
/// `ρ`, `R` and `Z⁻/Z` come from one joint sampler run per region; `ρ⁻` is
/// enumerated when the region is small enough.
pub fn convergence_report<E: BatchExecutor>(
    p: &Potential,
    ens: &EnsembleParams,
    eta: &Configuration,
    regions: &[Region],
    b_stability: f64,
    opts: &ConvergenceOptions,
    exec: &E,
) -> Result<ConvergenceReport> {
    let mut out = ConvergenceReport::default();
    for region in regions {
        let grid = region.grid();
        let a = grid.edge();
        let cubes: Vec<CubeIndex> = eta.points().iter().map(|x| grid.cube_of(x)).collect();
        if has_repeat(&cubes) {
            out.skipped.push((
                a,
                format!("eta is not dilute at a = {a}: two points share a cube"),
            ));
            continue;
        }
        let j = joint_estimate(
            p,
            region,
            ens,
            Some(eta),
            b_stability,
            &opts.cut,
            &opts.budget,
            exec,
        )?;
        let parts = j.correlation.expect("eta given");
        let rho_minus = if region.n_cubes() <= opts.enumerate_max.min(ENUMERATE_MAX) {
            rho_dilute_direct(p, region, ens, eta, &DiluteMode::Enumerate(opts.quad), exec)?
        } else {
            parts.rho_minus
        };
        let rho_full = parts.rho;
        let diff = Estimate::new(
            rho_full.value - rho_minus.value,
            math::sqrt(
                rho_full.stat_err * rho_full.stat_err + rho_minus.stat_err * rho_minus.stat_err,
            ),
            rho_full.trunc_bound + rho_minus.trunc_bound,
            Estimate::weakest(rho_full.method, rho_minus.method),
        );
        out.rows.push(ConvergenceRow {
            a,
            n_cubes: region.n_cubes(),
            rho_full,
            rho_minus,
            diff,
            remainder: parts.remainder,
            z_ratio: j.minus_ratio,
            dense_ratio: j.dense_ratio,
        });
    }
    Ok(out)
}
