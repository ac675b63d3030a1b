//! Continuum KS operator by recursive unbiased sampling.
//!
//! `(K̃f)(η)` is estimated from one draw per Mayer integral: radii are drawn
//! from a tabulated density proportional to `|e^{-βφ(r)} - 1| r^{d-1}` inside
//! the cutoff, directions uniformly. Powers `K̃ⁿδ` are nested estimators with
//! fresh randomness at every level, so each sample is unbiased.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use rand::RngCore;

use super::{check_radius, pi_threshold, series_bounds, KsSeries, KsTruncation};
use crate::energy::cross_sum;
use crate::error::{Error, Result};
use crate::estimate::{Estimate, Method};
use crate::partition::EnsembleParams;
use crate::potential::{activity_radius, Potential};
use crate::sampling::{batches, reduce, substream, uniform, BatchExecutor, Moments, Tag};
use crate::{math, quadrature, Configuration, Point, MAX_DIM};

/// A symmetric function on finite configurations, evaluated by an unbiased
/// single-sample estimator.
pub trait KsFunction: Send + Sync {
    fn sample(&self, eta: &[Point], rng: &mut dyn RngCore) -> f64;
    /// Largest `|η|` at which the function can be nonzero.
    fn support(&self) -> usize;
}

/// `δ(η) = 1` iff `|η| = 1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Delta;

impl KsFunction for Delta {
    fn sample(&self, eta: &[Point], _: &mut dyn RngCore) -> f64 {
        (eta.len() == 1) as u8 as f64
    }

    fn support(&self) -> usize {
        1
    }
}

const RADIAL_BINS: usize = 512;

/// Shared data of the continuum operator.
#[derive(Debug)]
pub struct ContinuumKernel {
    p: Potential,
    beta: f64,
    b: f64,
    /// `C(β)`.
    pub c_beta: f64,
    pub cutoff: f64,
    /// `∫_{|x|>cutoff} |e^{-βφ}-1|` bound.
    pub tau: f64,
    /// Bin edges `r_0 < … < r_M` and cumulative masses.
    edges: Vec<f64>,
    cumulative: Vec<f64>,
    mass: f64,
    degenerate: AtomicU64,
}

impl ContinuumKernel {
    pub fn new(
        p: &Potential,
        ens: &EnsembleParams,
        b_stability: f64,
        trunc: &KsTruncation,
    ) -> Result<Self> {
        let beta = ens.beta;
        let c_beta = p.mayer_c_beta(beta, 1e-10)?.value;
        let cutoff = trunc
            .cutoff_radius
            .unwrap_or_else(|| p.cutoff_radius(beta, trunc.mayer_tol));
        let tau = p.mayer_tail_bound(beta, cutoff).min(c_beta);
        let d = p.dim();
        let surf = math::sphere_surface(d);
        let mut edges = Vec::with_capacity(RADIAL_BINS + 2);
        let mut cumulative = Vec::with_capacity(RADIAL_BINS + 1);
        let mut mass = 0.0;
        if cutoff > 0.0 && c_beta > 0.0 {
            edges.push(0.0);
            edges.extend(math::log_grid(cutoff * 1e-7, cutoff, RADIAL_BINS));
            for w in edges.windows(2) {
                let q = quadrature::integrate(
                    |r| p.mayer(beta, r).abs() * surf * math::powi(r, d as i32 - 1),
                    w[0],
                    w[1],
                    1e-14 * (w[1] - w[0]).max(1e-300),
                    64,
                );
                mass += q.value;
                cumulative.push(mass);
            }
        }
        Ok(Self {
            p: *p,
            beta,
            b: b_stability,
            c_beta,
            cutoff,
            tau,
            edges,
            cumulative,
            mass,
            degenerate: AtomicU64::new(0),
        })
    }

    /// Mass `∫_{|y|<cutoff} |f|` of the proposal.
    pub fn proposal_mass(&self) -> f64 {
        self.mass
    }

    /// Number of `π̃` evaluations that fell back to uniform weights.
    pub fn degenerate_weights(&self) -> u64 {
        self.degenerate.load(Ordering::Relaxed)
    }

    /// `y` near `x` and the weight `f(|y-x|)/q(y)`.
    fn draw(&self, x: &Point, rng: &mut dyn RngCore) -> (Point, f64) {
        let d = self.p.dim();
        let u = uniform(rng) * self.mass;
        let j = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1);
        let (lo, hi) = (self.edges[j], self.edges[j + 1]);
        let h = self.cumulative[j] - if j == 0 { 0.0 } else { self.cumulative[j - 1] };
        let (lo_d, hi_d) = (math::powi(lo, d as i32), math::powi(hi, d as i32));
        let r = math::powf(lo_d + uniform(rng) * (hi_d - lo_d), 1.0 / d as f64);
        let shell = math::ball_volume(d) * (hi_d - lo_d);
        let dir = unit_vector(d, rng);
        let mut y = *x;
        for i in 0..d {
            y[i] += r * dir[i];
        }
        let f = if r > 0.0 {
            self.p.mayer(self.beta, r)
        } else {
            -1.0
        };
        (y, f * shell * self.mass / h)
    }

    /// Indices of `η` with `W(x; η∖x) >= -2B`, and their Boltzmann factors.
    fn selected(&self, eta: &[Point]) -> Vec<(usize, f64)> {
        let thresh = pi_threshold(self.b);
        let mut all = Vec::with_capacity(eta.len());
        for i in 0..eta.len() {
            let (x, rest) = split_out(eta, i);
            let w = cross_sum(&self.p, &[x], &rest);
            all.push((i, w));
        }
        let mut keep: Vec<(usize, f64)> = all
            .iter()
            .filter(|(_, w)| *w >= thresh)
            .map(|&(i, w)| (i, math::exp(-self.beta * w)))
            .collect();
        if keep.is_empty() {
            self.degenerate.fetch_add(1, Ordering::Relaxed);
            keep = all
                .iter()
                .map(|&(i, w)| (i, math::exp(-self.beta * w)))
                .collect();
        }
        keep
    }
}

fn split_out(eta: &[Point], i: usize) -> (Point, Vec<Point>) {
    let mut rest = Vec::with_capacity(eta.len() - 1);
    rest.extend_from_slice(&eta[..i]);
    rest.extend_from_slice(&eta[i + 1..]);
    (eta[i], rest)
}

fn unit_vector(d: usize, rng: &mut dyn RngCore) -> Point {
    let mut v = [0.0; MAX_DIM];
    if d == 1 {
        v[0] = if uniform(rng) < 0.5 { -1.0 } else { 1.0 };
        return v;
    }
    loop {
        let mut n2 = 0.0;
        for vi in v.iter_mut().take(d) {
            *vi = 2.0 * uniform(rng) - 1.0;
            n2 += *vi * *vi;
        }
        if n2 > 1e-12 && n2 <= 1.0 {
            let n = math::sqrt(n2);
            v.iter_mut().take(d).for_each(|vi| *vi /= n);
            return v;
        }
    }
}

/// `K̃f` as a new sampled function.
pub struct KsApplied {
    kernel: Arc<ContinuumKernel>,
    inner: Arc<dyn KsFunction>,
}

impl KsApplied {
    /// `Σ_{k=1}^{kmax} (1/k!) ∫ ∏ f(y_i - x) g(base ∪ Y) dY`, one draw per `k`.
    fn mayer_sum(&self, x: &Point, base: &[Point], kmax: usize, rng: &mut dyn RngCore) -> f64 {
        if self.kernel.mass == 0.0 {
            return 0.0;
        }
        let mut total = 0.0;
        let mut fact = 1.0;
        let mut pts = Vec::with_capacity(base.len() + kmax);
        for k in 1..=kmax {
            fact *= k as f64;
            pts.clear();
            pts.extend_from_slice(base);
            let mut w = 1.0;
            for _ in 0..k {
                let (y, wy) = self.kernel.draw(x, rng);
                w *= wy;
                pts.push(y);
            }
            total += w / fact * self.inner.sample(&pts, rng);
        }
        total
    }
}

impl KsFunction for KsApplied {
    fn sample(&self, eta: &[Point], rng: &mut dyn RngCore) -> f64 {
        let cap = self.inner.support();
        let n = eta.len();
        if n == 0 || n > cap + 1 {
            return 0.0;
        }
        if n == 1 {
            return self.mayer_sum(&eta[0], &[], cap, rng);
        }
        let sel = self.kernel.selected(eta);
        let norm = sel.len() as f64;
        let mut total = 0.0;
        for (i, boltz) in sel {
            let (x, rest) = split_out(eta, i);
            let mut v = self.inner.sample(&rest, rng);
            v += self.mayer_sum(&x, &rest, cap + 1 - n, rng);
            total += boltz * v / norm;
        }
        total
    }

    fn support(&self) -> usize {
        self.inner.support() + 1
    }
}

/// `K̃f`.
pub fn ks_apply_continuum(kernel: &Arc<ContinuumKernel>, f: Arc<dyn KsFunction>) -> KsApplied {
    KsApplied {
        kernel: kernel.clone(),
        inner: f,
    }
}

/// `Σ_{n=0}^{N} z^{n+1} (K̃ⁿδ)(η)` with its `E_ξ` tail and cutoff bounds.
pub fn ks_series_continuum<E: BatchExecutor>(
    p: &Potential,
    ens: &EnsembleParams,
    b_stability: f64,
    eta: &Configuration,
    trunc: &KsTruncation,
    exec: &E,
) -> Result<KsSeries> {
    if eta.is_empty() {
        return Err(Error::Domain(
            "KS series needs a nonempty configuration".into(),
        ));
    }
    if trunc.samples < 2 {
        return Err(Error::Domain(
            "KS series needs at least 2 samples per term".into(),
        ));
    }
    let kernel = Arc::new(ContinuumKernel::new(p, ens, b_stability, trunc)?);
    let z_max = activity_radius(kernel.c_beta, ens.beta, b_stability);
    check_radius(ens.z, z_max, trunc.override_radius)?;
    let pts = eta.points();
    let mut powers: Vec<Arc<dyn KsFunction>> = Vec::with_capacity(trunc.order + 1);
    powers.push(Arc::new(Delta));
    for n in 1..=trunc.order {
        let prev = powers[n - 1].clone();
        powers.push(Arc::new(ks_apply_continuum(&kernel, prev)));
    }
    let mut value = 0.0;
    let mut var = 0.0;
    let mut zn = ens.z;
    for (n, t) in powers.iter().enumerate() {
        // depth bound: K̃ⁿδ vanishes beyond n+1 points
        if pts.len() <= n + 1 {
            let parts = batches(trunc.samples, 256);
            let res = exec.map(parts.len(), |b| {
                let mut rng = substream(trunc.seed, Tag::KsContinuum, n as u64, b as u64);
                let mut m = Moments::<1>::default();
                for _ in 0..parts[b] {
                    m.push(&[t.sample(pts, &mut rng)]);
                }
                m
            });
            let m = reduce(&res);
            value += zn * m.mean[0];
            var += zn * zn * m.mean_var(0);
        }
        zn *= ens.z;
    }
    let xi = trunc.xi.unwrap_or(if kernel.c_beta > 0.0 {
        1.0 / kernel.c_beta
    } else {
        1.0
    });
    let bounds = series_bounds(
        ens.z,
        ens.beta,
        b_stability,
        kernel.c_beta,
        kernel.tau,
        xi,
        trunc.order,
        pts.len(),
    );
    let mut est = Estimate::new(
        value,
        math::sqrt(var),
        bounds.tail + bounds.cutoff,
        Method::MonteCarlo,
    );
    let deg = kernel.degenerate_weights();
    if deg > 0 {
        est = est.with_warning(format!(
            "{deg} weight evaluations had no particle with W >= -2B; used uniform weights"
        ));
    }
    Ok(KsSeries {
        estimate: est,
        bounds,
        quadrature: 0.0,
    })
}
