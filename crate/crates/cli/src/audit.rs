//! Sampled audit of the stability inequalities on Poisson configurations.

use quasilattice_core::correlation::pi_weights;
use quasilattice_core::energy::{check_superstability, total_energy, StabilityConstants};
use quasilattice_core::sampling::{substream, uniform, uniform_in_cube, BatchExecutor, Tag};
use quasilattice_core::{Configuration, Potential, Region};
use rand_distr::{Distribution, Poisson};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct AuditResult {
    pub configs: usize,
    pub points: usize,
    /// Configurations with a negative superstability margin.
    pub negative: usize,
    pub worst_margin: f64,
    /// Configurations with `U(γ) < -B_global |γ|`.
    pub unstable: usize,
    /// Smallest `U(γ) + B_global |γ|`.
    pub worst_stability: f64,
    /// Configurations where no point had `W >= -2B_global`.
    pub pi_fallbacks: usize,
}

struct One {
    points: usize,
    margin: f64,
    stability: f64,
    fallback: bool,
}

/// Draws `n_configs` configurations in `region`. Each draws an intensity
/// uniformly from `(0, max_intensity]` and then a Poisson count per cube.
pub fn superstability_audit<E: BatchExecutor>(
    p: &Potential,
    region: &Region,
    consts: &StabilityConstants,
    n_configs: usize,
    max_intensity: f64,
    seed: u64,
    exec: &E,
) -> Result<AuditResult, CliError> {
    if max_intensity.is_nan() || max_intensity <= 0.0 {
        return Err(CliError::Config(format!(
            "max_intensity = {max_intensity} must be positive"
        )));
    }
    let grid = *region.grid();
    let d = grid.dim();
    let per = exec.map(n_configs, |i| -> Result<One, CliError> {
        let mut rng = substream(seed, Tag::Audit, i as u64, 0);
        let lambda = max_intensity * (1.0 - uniform(&mut rng));
        let poisson = Poisson::new(lambda).map_err(|e| CliError::Config(e.to_string()))?;
        let mut pts = Vec::new();
        for c in region.cubes() {
            let n = poisson.sample(&mut rng) as usize;
            let lo = grid.lower_corner(c);
            for _ in 0..n {
                pts.push(uniform_in_cube(&mut rng, &lo, grid.edge(), d));
            }
        }
        let gamma = Configuration::new(d, pts)?;
        let margin = check_superstability(p, consts, &grid, &gamma)?;
        let stability = total_energy(p, &gamma)? + consts.b_global * gamma.len() as f64;
        let fallback = pi_weights(p, consts.b_global, gamma.points()).fallback;
        Ok(One {
            points: gamma.len(),
            margin,
            stability,
            fallback,
        })
    });
    let mut out = AuditResult {
        configs: n_configs,
        points: 0,
        negative: 0,
        worst_margin: f64::INFINITY,
        unstable: 0,
        worst_stability: f64::INFINITY,
        pi_fallbacks: 0,
    };
    for r in per {
        let r = r?;
        out.points += r.points;
        out.negative += (r.margin < 0.0) as usize;
        out.worst_margin = out.worst_margin.min(r.margin);
        out.unstable += (r.stability < 0.0) as usize;
        out.worst_stability = out.worst_stability.min(r.stability);
        out.pi_fallbacks += r.fallback as usize;
    }
    Ok(out)
}
