//! Correlation functions: by definition (full and dilute), by truncated
//! Kirkwood–Salzburg series (continuum and cube variants), and the `a → 0`
//! convergence report.

mod continuum;
mod direct;
mod discrete;
mod report;

pub use continuum::{
    ks_apply_continuum, ks_series_continuum, ContinuumKernel, Delta, KsApplied, KsFunction,
};
pub use direct::{rho_dilute_direct, rho_direct};
pub use discrete::{ks_series_discrete, DiscreteKs};

pub use report::{convergence_report, ConvergenceOptions, ConvergenceReport, ConvergenceRow};

use alloc::vec::Vec;

use crate::energy::distance;
use crate::error::{Error, Result};
use crate::estimate::Estimate;
use crate::potential::Potential;
use crate::{math, Point};

/// Truncation data shared by both series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsTruncation {
    /// Last power `N` in `Σ_{n<=N} z^{n+1} K̃ⁿδ`.
    pub order: usize,
    /// Mayer factors are dropped beyond this radius; `None` uses `mayer_tol`.
    pub cutoff_radius: Option<f64>,
    /// `|e^{-βφ} - 1|` threshold defining the default cutoff.
    pub mayer_tol: f64,
    /// Top-level samples per series term (continuum).
    pub samples: usize,
    /// Norm scale of the tail bound; `None` uses `1/C`.
    pub xi: Option<f64>,
    pub seed: u64,
    /// Gauss–Legendre nodes per axis per cube (discrete).
    pub nodes: usize,
    /// Evaluate even above the convergence radius.
    pub override_radius: bool,
}

impl Default for KsTruncation {
    fn default() -> Self {
        Self {
            order: 4,
            cutoff_radius: None,
            mayer_tol: 1e-8,
            samples: 4096,
            xi: None,
            seed: 0,
            nodes: 8,
            override_radius: false,
        }
    }
}

/// Tail and cutoff bounds of a truncated KS series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesBounds {
    /// `z C e^{2βB}` times `ξ e^{ξC}/(ξC)`; the geometric ratio of the norm bound.
    pub ratio: f64,
    /// Bound on `Σ_{n>N}` in the `E_ξ` norm.
    pub tail: f64,
    /// Bound on the effect of the Mayer cutoff on the kept terms.
    pub cutoff: f64,
}

/// A truncated KS series with its error budget split by source.
#[derive(Debug, Clone, PartialEq)]
pub struct KsSeries {
    /// `trunc_bound` is the sum of the three bounds below.
    pub estimate: Estimate,
    pub bounds: SeriesBounds,
    /// `|S(nodes) - S(nodes/2)|` for the discrete series, 0 for the Monte Carlo one.
    pub quadrature: f64,
}

/// `|z| ξ^{|η|-1} (|z|r)^{N+1}/(1-|z|r)` with `r = ξ^{-1} e^{2βB} e^{ξC}`, plus the
/// cutoff term `Σ_{n<=N} |z|^{n+1} n r^{n-1} δr ξ^{|η|-1}`.
pub(crate) fn series_bounds(
    z: f64,
    beta: f64,
    b: f64,
    c: f64,
    tau: f64,
    xi: f64,
    order: usize,
    len: usize,
) -> SeriesBounds {
    let r = math::exp(2.0 * beta * b + xi * c) / xi;
    let ratio = z.abs() * r;
    let scale = z.abs() * math::powi(xi, len as i32 - 1);
    let tail = if ratio < 1.0 {
        scale * math::powi(ratio, order as i32 + 1) / (1.0 - ratio)
    } else {
        f64::INFINITY
    };
    let dr = math::exp(2.0 * beta * b) * (math::exp(xi * c) - math::exp(xi * (c - tau))) / xi;
    let mut cutoff = 0.0;
    for n in 1..=order {
        cutoff += math::powi(z.abs(), n as i32) * n as f64 * math::powi(r, n as i32 - 1) * dr;
    }
    SeriesBounds {
        ratio,
        tail,
        cutoff: cutoff * scale,
    }
}

/// `W(x; η∖x) >= -2B`, with a little slack for rounding.
pub(crate) fn pi_threshold(b: f64) -> f64 {
    -2.0 * b - 1e-12 * (2.0 * b).max(1.0)
}

/// The selection weights `π̃(·; η)` used by both series.
#[derive(Debug, Clone, PartialEq)]
pub struct PiWeights {
    /// Uniform over the points with `W(x; η∖x) >= -2B`, zero elsewhere.
    pub weights: Vec<f64>,
    /// No point qualified and every point got the same weight. Cannot happen
    /// when `B` is a stability constant of the potential.
    pub fallback: bool,
}

pub fn pi_weights(p: &Potential, b_stability: f64, eta: &[Point]) -> PiWeights {
    let n = eta.len();
    let d = p.dim();
    let mut w = alloc::vec![0.0; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = p.phi(distance(&eta[i], &eta[j], d));
            w[i] += v;
            w[j] += v;
        }
    }
    let thresh = pi_threshold(b_stability);
    let m = w.iter().filter(|&&v| v >= thresh).count();
    if m == 0 {
        return PiWeights {
            weights: alloc::vec![1.0 / n as f64; n],
            fallback: n > 0,
        };
    }
    let weights = w
        .iter()
        .map(|&v| if v >= thresh { 1.0 / m as f64 } else { 0.0 })
        .collect();
    PiWeights {
        weights,
        fallback: false,
    }
}

pub(crate) fn check_radius(z: f64, z_max: f64, override_radius: bool) -> Result<()> {
    if z > z_max && !override_radius {
        return Err(Error::AboveRadius { z, z_max });
    }
    Ok(())
}
