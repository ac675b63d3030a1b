use alloc::format;
use alloc::vec::Vec;

use crate::energy::pair_sum;
use crate::error::{Error, Result};
use crate::estimate::{Estimate, Method};
use crate::lattice::{has_repeat, CubeIndex, Region};
use crate::partition::{
    dilute_bernoulli, dilute_enumeration, joint_estimate, DiluteMode, EnsembleParams, McBudget,
    TermCut,
};
use crate::potential::Potential;
use crate::sampling::{BatchExecutor, Tag};
use crate::{math, Configuration};

/// `ρ_Λ(η)` from its definition, by the joint sampler.
#[allow(clippy::too_many_arguments)]
pub fn rho_direct<E: BatchExecutor>(
    p: &Potential,
    region: &Region,
    ens: &EnsembleParams,
    eta: &Configuration,
    b_stability: f64,
    cut: &TermCut,
    budget: &McBudget,
    exec: &E,
) -> Result<Estimate> {
    if eta.is_empty() {
        return Ok(Estimate::exact(1.0));
    }
    let j = joint_estimate(p, region, ens, Some(eta), b_stability, cut, budget, exec)?;
    Ok(j.correlation.expect("eta given").rho)
}

/// `ρ⁻_Λ(η) = z^{|η|} e^{-βU(η)} S(Λ∖Λ_η; η) / Z⁻_Λ`, where `S` sums over dilute
/// cube subsets with the external field of `η`. Non-dilute `η` gives exactly 0.
pub fn rho_dilute_direct<E: BatchExecutor>(
    p: &Potential,
    region: &Region,
    ens: &EnsembleParams,
    eta: &Configuration,
    mode: &DiluteMode,
    exec: &E,
) -> Result<Estimate> {
    let grid = region.grid();
    if let Some(x) = eta.points().iter().find(|x| !region.contains(x)) {
        return Err(Error::Precondition(format!(
            "eta point {x:?} lies outside the region"
        )));
    }
    let eta_cubes: Vec<CubeIndex> = eta.points().iter().map(|x| grid.cube_of(x)).collect();
    if has_repeat(&eta_cubes) {
        return Ok(Estimate::exact(0.0));
    }
    let rest: Vec<CubeIndex> = region
        .cubes()
        .iter()
        .filter(|c| !eta_cubes.contains(c))
        .copied()
        .collect();
    let field = eta.points();
    let (num, den) = match mode {
        DiluteMode::Enumerate(q) => (
            dilute_enumeration(p, grid, &rest, field, ens, q, exec)?,
            dilute_enumeration(p, grid, region.cubes(), &[], ens, q, exec)?,
        ),
        DiluteMode::MonteCarlo(b) => (
            dilute_bernoulli(p, grid, &rest, field, ens, b, Tag::DiluteCorrelation, exec)?,
            dilute_bernoulli(p, grid, region.cubes(), &[], ens, b, Tag::Dilute, exec)?,
        ),
    };
    let pre = math::powi(ens.z, eta.len() as i32) * math::exp(-ens.beta * pair_sum(p, field));
    let value = pre * num.value / den.value;
    let sq = |x: f64| x * x;
    let rel = math::sqrt(sq(num.stat_err / num.value) + sq(den.stat_err / den.value));
    let trunc = value * (num.trunc_bound / num.value + den.trunc_bound / den.value);
    let method = Estimate::weakest(num.method, den.method);
    let method = if method == Method::Enumeration {
        Method::Quadrature
    } else {
        method
    };
    Ok(Estimate::new(value, value.abs() * rel, trunc.abs(), method))
}
