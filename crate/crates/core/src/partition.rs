//! Grand partition functions `Z`, `Z⁻`, `Z⁺`, pressures and the `ε₁(a)` bound.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::energy::{cross_sum, cube_sums, pair_sum, CubeSums};
use crate::error::{Error, Result};
use crate::estimate::{Estimate, Method};
use crate::lattice::{has_repeat, CubeGrid, CubeIndex, Region};
use crate::potential::{Family, Potential};
use crate::quadrature::GaussLegendre;
use crate::sampling::{
    batches, reduce, substream, uniform, uniform_in_cube, BatchExecutor, Moments, Tag,
};
use crate::{math, Configuration, Point, MAX_DIM};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleParams {
    pub z: f64,
    pub beta: f64,
}

impl EnsembleParams {
    pub fn new(z: f64, beta: f64) -> Result<Self> {
        if !(z >= 0.0 && z.is_finite()) {
            return Err(Error::Domain(format!(
                "activity z = {z} must be finite and nonnegative"
            )));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Domain(format!(
                "inverse temperature beta = {beta} must be positive"
            )));
        }
        Ok(Self { z, beta })
    }
}

/// Monte-Carlo sample budget and seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McBudget {
    /// Draws per series term (or per subset / per assignment).
    pub samples: usize,
    /// Draws per independently seeded batch.
    pub batch: usize,
    pub seed: u64,
}

impl McBudget {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self {
            samples,
            batch: 1024,
            seed,
        }
    }
}

/// Where to cut the particle-number series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermCut {
    /// Fixed last term; `None` stops once the stability tail bound is below
    /// `rel_tol` times the partial sum.
    pub n_max: Option<usize>,
    pub rel_tol: f64,
    pub max_terms: usize,
}

impl Default for TermCut {
    fn default() -> Self {
        Self {
            n_max: None,
            rel_tol: 1e-6,
            max_terms: 400,
        }
    }
}

impl TermCut {
    pub fn fixed(n_max: usize) -> Self {
        Self {
            n_max: Some(n_max),
            ..Self::default()
        }
    }
}

/// `Σ_{n>N} xⁿ/n!` bounded by `t_{N+1}/(1 - x/(N+2))`; infinite while the ratio is >= 1.
pub fn poisson_tail_bound(x: f64, n: usize) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let ratio = x / (n as f64 + 2.0);
    if ratio >= 1.0 {
        return f64::INFINITY;
    }
    let ln_t = (n as f64 + 1.0) * math::ln(x) - math::ln_gamma(n as f64 + 2.0);
    math::exp(ln_t) / (1.0 - ratio)
}

/// Components of the joint per-sample vector.
const W: usize = 0;
const W_DIL: usize = 1;
const W_DEN: usize = 2;
const WE: usize = 3;
const WE_DIL: usize = 4;
const WE_DEN: usize = 5;

/// Correlation quantities from the joint sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationParts {
    /// `ρ_Λ(η)`.
    pub rho: Estimate,
    /// `ρ⁻_Λ(η)`, restricted to dilute configurations.
    pub rho_minus: Estimate,
    /// `R = ρ - (Z⁻/Z)ρ⁻`.
    pub remainder: Estimate,
}

/// Everything estimated from one shared set of uniform samples of `Λⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointEstimate {
    pub z_full: Estimate,
    pub z_minus: Estimate,
    /// `Z - Z⁻`, the dense part.
    pub z_dense: Estimate,
    pub log_z_plus: Estimate,
    /// `Z⁻/Z`.
    pub minus_ratio: Estimate,
    /// `1 - Z⁻/Z`, computed without cancellation.
    pub dense_ratio: Estimate,
    pub correlation: Option<CorrelationParts>,
    /// Last term included.
    pub n_max: usize,
}

fn ratio_estimate(
    num: f64,
    den: f64,
    var_num: f64,
    var_den: f64,
    cov: f64,
    tn: f64,
    td: f64,
    method: Method,
) -> Estimate {
    let r = num / den;
    let var = (var_num - 2.0 * r * cov + r * r * var_den) / (den * den);
    let trunc = tn / den + r.abs() * td / den;
    Estimate::new(r, math::sqrt(var.max(0.0)), trunc, method)
}

/// Uniform samples over `Λⁿ` for each `n`, accumulating `e^{-βU}` with and
/// without the dilute indicator, and optionally the same with `η` added.
#[allow(clippy::too_many_arguments)]
pub fn joint_estimate<E: BatchExecutor>(
    p: &Potential,
    region: &Region,
    ens: &EnsembleParams,
    eta: Option<&Configuration>,
    b_stability: f64,
    cut: &TermCut,
    budget: &McBudget,
    exec: &E,
) -> Result<JointEstimate> {
    let grid = *region.grid();
    let dim = grid.dim();
    if p.dim() != dim {
        return Err(Error::Domain(
            "potential and region dimensions differ".into(),
        ));
    }
    if let Some(eta) = eta {
        if let Some(x) = eta.points().iter().find(|x| !region.contains(x)) {
            return Err(Error::Precondition(format!(
                "eta point {x:?} lies outside the region"
            )));
        }
    }
    if budget.samples < 2 {
        return Err(Error::Domain(
            "Monte-Carlo budget needs at least 2 samples".into(),
        ));
    }
    let eta_pts: Vec<Point> = eta.map(|e| e.points().to_vec()).unwrap_or_default();
    let eta_cubes: Vec<CubeIndex> = eta_pts.iter().map(|x| grid.cube_of(x)).collect();
    let eta_dilute = !has_repeat(&eta_cubes);
    let boltz_eta = math::exp(-ens.beta * pair_sum(p, &eta_pts));
    let vol = region.volume();
    let x = ens.z * vol * math::exp(ens.beta * b_stability);

    let mut sums = [0.0f64; 6];
    let mut cov = [[0.0f64; 6]; 6];
    let mut coef = 1.0;
    let mut n = 0usize;
    let mut warning: Option<String> = None;
    let mut mc = false;
    loop {
        let m = if n == 0 {
            let mut m = Moments::<6>::default();
            let dil = if eta_dilute { 1.0 } else { 0.0 };
            m.push(&[
                1.0,
                1.0,
                0.0,
                boltz_eta,
                boltz_eta * dil,
                boltz_eta * (1.0 - dil),
            ]);
            m
        } else if coef == 0.0 {
            Moments::<6>::default()
        } else {
            mc = true;
            let parts = batches(budget.samples, budget.batch);
            let results = exec.map(parts.len(), |b| {
                let mut rng = substream(budget.seed, Tag::Grand, n as u64, b as u64);
                joint_batch(
                    p, region, ens.beta, n, parts[b], &eta_pts, &eta_cubes, boltz_eta, &mut rng,
                )
            });
            reduce(&results)
        };
        for i in 0..6 {
            sums[i] += coef * m.mean[i];
            for j in 0..6 {
                cov[i][j] += coef * coef * m.mean_cov(i, j);
            }
        }
        let tail = poisson_tail_bound(x, n);
        let stop = match cut.n_max {
            Some(nm) => n >= nm,
            None => tail <= cut.rel_tol * sums[W] || n + 1 >= cut.max_terms,
        };
        if stop {
            if cut.n_max.is_none() && tail > cut.rel_tol * sums[W] {
                warning = Some(format!("series cut at the term cap {n}; tail bound {tail:e} exceeds requested tolerance"));
            }
            break;
        }
        n += 1;
        coef *= ens.z * vol / n as f64;
    }
    let tail = poisson_tail_bound(x, n);
    let method = if mc {
        Method::MonteCarlo
    } else {
        Method::Enumeration
    };
    let est = |i: usize, t: f64| Estimate::new(sums[i], math::sqrt(cov[i][i].max(0.0)), t, method);
    let mut z_full = est(W, tail);
    if let Some(w) = &warning {
        z_full = z_full.with_warning(w.clone());
    }
    let z_minus = est(W_DIL, tail);
    let z_dense = est(W_DEN, tail);
    let dense_ratio = ratio_estimate(
        sums[W_DEN],
        sums[W],
        cov[W_DEN][W_DEN],
        cov[W][W],
        cov[W_DEN][W],
        tail,
        tail,
        method,
    );
    let minus_ratio = Estimate {
        value: 1.0 - dense_ratio.value,
        ..dense_ratio.clone()
    };
    let r = dense_ratio.value;
    let log_z_plus = Estimate::new(
        -math::ln_1p(-r),
        dense_ratio.stat_err / (1.0 - r),
        dense_ratio.trunc_bound / (1.0 - r - dense_ratio.trunc_bound).max(f64::MIN_POSITIVE),
        method,
    );
    let correlation = eta.map(|e| {
        let ze = math::powi(ens.z, e.len() as i32);
        let te = tail * math::exp(ens.beta * b_stability * e.len() as f64);
        let scale = |mut es: Estimate| {
            es.value *= ze;
            es.stat_err *= ze;
            es.trunc_bound *= ze;
            es
        };
        let rho = scale(ratio_estimate(
            sums[WE],
            sums[W],
            cov[WE][WE],
            cov[W][W],
            cov[WE][W],
            te,
            tail,
            method,
        ));
        let rho_minus = scale(ratio_estimate(
            sums[WE_DIL],
            sums[W_DIL],
            cov[WE_DIL][WE_DIL],
            cov[W_DIL][W_DIL],
            cov[WE_DIL][W_DIL],
            te,
            tail,
            method,
        ));
        let remainder = scale(ratio_estimate(
            sums[WE_DEN],
            sums[W],
            cov[WE_DEN][WE_DEN],
            cov[W][W],
            cov[WE_DEN][W],
            te,
            tail,
            method,
        ));
        CorrelationParts {
            rho,
            rho_minus,
            remainder,
        }
    });
    Ok(JointEstimate {
        z_full,
        z_minus,
        z_dense,
        log_z_plus,
        minus_ratio,
        dense_ratio,
        correlation,
        n_max: n,
    })
}

#[allow(clippy::too_many_arguments)]
fn joint_batch(
    p: &Potential,
    region: &Region,
    beta: f64,
    n: usize,
    count: usize,
    eta: &[Point],
    eta_cubes: &[CubeIndex],
    boltz_eta: f64,
    rng: &mut impl RngCore,
) -> Moments<6> {
    let grid = region.grid();
    let dim = grid.dim();
    let a = grid.edge();
    let cubes = region.cubes();
    let mut pts: Vec<Point> = Vec::with_capacity(n);
    let mut ids: Vec<CubeIndex> = Vec::with_capacity(n + eta.len());
    let mut m = Moments::<6>::default();
    for _ in 0..count {
        pts.clear();
        ids.clear();
        for _ in 0..n {
            let c = &cubes[rng.random_range(0..cubes.len())];
            let x = uniform_in_cube(rng, &grid.lower_corner(c), a, dim);
            ids.push(grid.cube_of(&x));
            pts.push(x);
        }
        let w = math::exp(-beta * pair_sum(p, &pts));
        let dil = !has_repeat(&ids);
        let mut v = [w, 0.0, 0.0, 0.0, 0.0, 0.0];
        if dil {
            v[W_DIL] = w;
        } else {
            v[W_DEN] = w;
        }
        if !eta.is_empty() {
            let we = if w == 0.0 {
                0.0
            } else {
                w * boltz_eta * math::exp(-beta * cross_sum(p, eta, &pts))
            };
            ids.extend_from_slice(eta_cubes);
            let dil_e = dil && !has_repeat(&ids);
            v[WE] = we;
            if dil_e {
                v[WE_DIL] = we;
            } else {
                v[WE_DEN] = we;
            }
        }
        m.push(&v);
    }
    m
}

/// `Z_Λ` by term-wise Monte Carlo over `Λⁿ`.
#[allow(clippy::too_many_arguments)]
pub fn z_grand<E: BatchExecutor>(
    p: &Potential,
    region: &Region,
    ens: &EnsembleParams,
    b_stability: f64,
    cut: &TermCut,
    budget: &McBudget,
    exec: &E,
) -> Result<Estimate> {
    Ok(joint_estimate(p, region, ens, None, b_stability, cut, budget, exec)?.z_full)
}

/// Per-subset integration policy for dilute enumeration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsetQuadrature {
    /// Gauss–Legendre nodes per axis.
    pub nodes: usize,
    /// Nodes per axis when two cubes of the subset touch.
    pub adjacent_nodes: usize,
    /// Largest `d·k` integrated by tensor rules; Monte Carlo beyond.
    pub max_gl_dims: usize,
    /// Largest `d·k` that gets `adjacent_nodes`.
    pub max_adjacent_dims: usize,
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for SubsetQuadrature {
    fn default() -> Self {
        Self {
            nodes: 8,
            adjacent_nodes: 16,
            max_gl_dims: 6,
            max_adjacent_dims: 3,
            mc_samples: 4096,
            seed: 0,
        }
    }
}

impl SubsetQuadrature {
    /// Rough integrand evaluations for enumerating all subsets of `n_cubes`
    /// cubes (adjacent-pair refinement ignored).
    pub fn evaluations(&self, n_cubes: usize, dim: usize) -> f64 {
        (0..=n_cubes)
            .map(|k| {
                let per = if dim * k <= self.max_gl_dims {
                    math::powi(self.nodes as f64, (dim * k) as i32)
                } else {
                    self.mc_samples as f64
                };
                math::binomial(n_cubes, k) as f64 * per
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiluteMode {
    /// Sum over all cube subsets (at most [`ENUMERATE_MAX`] cubes).
    Enumerate(SubsetQuadrature),
    /// Independent Bernoulli occupation of every cube.
    MonteCarlo(McBudget),
}

pub const ENUMERATE_MAX: usize = 24;

/// Tensor rule over one cube: offsets from the lower corner and weights.
struct CubeRule {
    offsets: Vec<(Point, f64)>,
}

impl CubeRule {
    fn new(n: usize, a: f64, dim: usize) -> Self {
        let gl = GaussLegendre::new(n);
        let one: Vec<(f64, f64)> = gl.on(0.0, a).collect();
        let total = n.pow(dim as u32);
        let offsets = (0..total)
            .map(|flat| {
                let mut x = [0.0; MAX_DIM];
                let mut w = 1.0;
                let mut rest = flat;
                for xi in x.iter_mut().take(dim) {
                    let (node, wt) = one[rest % n];
                    *xi = node;
                    w *= wt;
                    rest /= n;
                }
                (x, w)
            })
            .collect();
        Self { offsets }
    }
}

struct Rules {
    fine: CubeRule,
    coarse: CubeRule,
    fine_adj: CubeRule,
    coarse_adj: CubeRule,
}

/// `∫_{Δ₁}…∫_{Δ_k} e^{-βU(Y) - βW(field; Y)} dY` with an error estimate.
struct SubsetValue {
    value: f64,
    /// Quadrature error estimate (rule vs half rule).
    quad_err: f64,
    /// Monte-Carlo standard error.
    stat_err: f64,
    mc: bool,
}

#[allow(clippy::too_many_arguments)]
fn subset_integral(
    p: &Potential,
    grid: &CubeGrid,
    cubes: &[CubeIndex],
    field: &[Point],
    beta: f64,
    quad: &SubsetQuadrature,
    rules: &Rules,
    stream: (u64, u64),
) -> SubsetValue {
    let k = cubes.len();
    let dim = grid.dim();
    if k == 0 {
        return SubsetValue {
            value: 1.0,
            quad_err: 0.0,
            stat_err: 0.0,
            mc: false,
        };
    }
    if matches!(p.family(), Family::Zero) {
        let value = math::powi(grid.cube_volume(), k as i32);
        return SubsetValue {
            value,
            quad_err: 0.0,
            stat_err: 0.0,
            mc: false,
        };
    }
    let corners: Vec<Point> = cubes.iter().map(|c| grid.lower_corner(c)).collect();
    let dims = dim * k;
    if dims <= quad.max_gl_dims {
        let adjacent = (1..k).any(|i| (0..i).any(|j| grid.touching(&cubes[i], &cubes[j])))
            && dims <= quad.max_adjacent_dims;
        let (fine, coarse) = if adjacent {
            (&rules.fine_adj, &rules.coarse_adj)
        } else {
            (&rules.fine, &rules.coarse)
        };
        let vf = tensor_sum(p, &corners, field, beta, fine);
        let vc = tensor_sum(p, &corners, field, beta, coarse);
        return SubsetValue {
            value: vf,
            quad_err: (vf - vc).abs(),
            stat_err: 0.0,
            mc: false,
        };
    }
    let vol = math::powi(grid.cube_volume(), k as i32);
    let mut rng = substream(quad.seed, Tag::Subset, stream.0, stream.1);
    let mut m = Moments::<1>::default();
    let mut pts = alloc::vec![[0.0; MAX_DIM]; k];
    for _ in 0..quad.mc_samples.max(2) {
        for (x, c) in pts.iter_mut().zip(&corners) {
            *x = uniform_in_cube(&mut rng, c, grid.edge(), dim);
        }
        let u = pair_sum(p, &pts) + cross_sum(p, field, &pts);
        m.push(&[math::exp(-beta * u)]);
    }
    SubsetValue {
        value: vol * m.mean[0],
        quad_err: 0.0,
        stat_err: vol * math::sqrt(m.mean_var(0)),
        mc: true,
    }
}

fn tensor_sum(
    p: &Potential,
    corners: &[Point],
    field: &[Point],
    beta: f64,
    rule: &CubeRule,
) -> f64 {
    let k = corners.len();
    let m = rule.offsets.len();
    let dim = p.dim();
    let mut idx = alloc::vec![0usize; k];
    let mut pts = alloc::vec![[0.0; MAX_DIM]; k];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        for j in 0..k {
            let (off, wt) = &rule.offsets[idx[j]];
            for i in 0..dim {
                pts[j][i] = corners[j][i] + off[i];
            }
            w *= wt;
        }
        let u = pair_sum(p, &pts) + cross_sum(p, field, &pts);
        total += w * math::exp(-beta * u);
        // odometer
        let mut j = 0;
        loop {
            if j == k {
                return total;
            }
            idx[j] += 1;
            if idx[j] < m {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

/// `Σ_k z^k Σ_{|S|=k} ∫_S e^{-βU - βW(field;·)}` over subsets of `cubes`.
pub(crate) fn dilute_enumeration<E: BatchExecutor>(
    p: &Potential,
    grid: &CubeGrid,
    cubes: &[CubeIndex],
    field: &[Point],
    ens: &EnsembleParams,
    quad: &SubsetQuadrature,
    exec: &E,
) -> Result<Estimate> {
    if cubes.len() > ENUMERATE_MAX {
        return Err(Error::RegionTooLarge {
            cubes: cubes.len(),
            limit: ENUMERATE_MAX,
        });
    }
    let dim = grid.dim();
    let a = grid.edge();
    let half = |n: usize| (n / 2).max(1);
    let rules = Rules {
        fine: CubeRule::new(quad.nodes, a, dim),
        coarse: CubeRule::new(half(quad.nodes), a, dim),
        fine_adj: CubeRule::new(quad.adjacent_nodes, a, dim),
        coarse_adj: CubeRule::new(half(quad.adjacent_nodes), a, dim),
    };
    let sub = Region::from_cubes(*grid, cubes.to_vec())?;
    let mut value = 0.0;
    let mut var = 0.0;
    let mut err = 0.0;
    let mut mc = false;
    let mut zk = 1.0;
    for k in 0..=cubes.len() {
        if k > 0 && zk == 0.0 {
            break;
        }
        let subsets: Vec<_> = sub.cube_subsets(k).collect();
        let vals = exec.map(subsets.len(), |i| {
            subset_integral(
                p,
                grid,
                subsets[i].cubes(),
                field,
                ens.beta,
                quad,
                &rules,
                (k as u64, i as u64),
            )
        });
        let level: Vec<f64> = vals.iter().map(|v| v.value).collect();
        value += zk * math::pairwise_sum(&level);
        for v in &vals {
            var += zk * zk * v.stat_err * v.stat_err;
            err += zk * v.quad_err;
            mc |= v.mc;
        }
        zk *= ens.z;
    }
    let method = if mc {
        Method::MonteCarlo
    } else {
        Method::Quadrature
    };
    Ok(Estimate::new(value, math::sqrt(var), err, method))
}

/// Bernoulli occupation sampler: `(1+za^d)^N E[e^{-βU - βW(field;·)}]`.
pub(crate) fn dilute_bernoulli<E: BatchExecutor>(
    p: &Potential,
    grid: &CubeGrid,
    cubes: &[CubeIndex],
    field: &[Point],
    ens: &EnsembleParams,
    budget: &McBudget,
    tag: Tag,
    exec: &E,
) -> Result<Estimate> {
    if budget.samples < 2 {
        return Err(Error::Domain(
            "Monte-Carlo budget needs at least 2 samples".into(),
        ));
    }
    let mu = ens.z * grid.cube_volume();
    let q = mu / (1.0 + mu);
    let parts = batches(budget.samples, budget.batch);
    let results = exec.map(parts.len(), |b| {
        let mut rng = substream(budget.seed, tag, 0, b as u64);
        let mut m = Moments::<1>::default();
        let mut pts: Vec<Point> = Vec::with_capacity(cubes.len());
        for _ in 0..parts[b] {
            pts.clear();
            for c in cubes {
                if uniform(&mut rng) < q {
                    pts.push(uniform_in_cube(
                        &mut rng,
                        &grid.lower_corner(c),
                        grid.edge(),
                        grid.dim(),
                    ));
                }
            }
            let u = pair_sum(p, &pts) + cross_sum(p, field, &pts);
            m.push(&[math::exp(-ens.beta * u)]);
        }
        m
    });
    let m = reduce(&results);
    let scale = math::powi(1.0 + mu, cubes.len() as i32);
    Ok(Estimate::new(
        scale * m.mean[0],
        scale * math::sqrt(m.mean_var(0)),
        0.0,
        Method::MonteCarlo,
    ))
}

/// `Z⁻_Λ`, the dilute-restricted partition function.
pub fn z_dilute<E: BatchExecutor>(
    p: &Potential,
    region: &Region,
    ens: &EnsembleParams,
    mode: &DiluteMode,
    exec: &E,
) -> Result<Estimate> {
    match mode {
        DiluteMode::Enumerate(q) => {
            dilute_enumeration(p, region.grid(), region.cubes(), &[], ens, q, exec)
        }
        DiluteMode::MonteCarlo(b) => dilute_bernoulli(
            p,
            region.grid(),
            region.cubes(),
            &[],
            ens,
            b,
            Tag::Dilute,
            exec,
        ),
    }
}

/// `Z⁺ = Z/Z⁻` from the joint sampler.
#[allow(clippy::too_many_arguments)]
pub fn z_plus<E: BatchExecutor>(
    p: &Potential,
    region: &Region,
    ens: &EnsembleParams,
    b_stability: f64,
    cut: &TermCut,
    budget: &McBudget,
    exec: &E,
) -> Result<Estimate> {
    let j = joint_estimate(p, region, ens, None, b_stability, cut, budget, exec)?;
    let lz = j.log_z_plus;
    let v = math::exp(lz.value);
    Ok(Estimate::new(
        v,
        v * lz.stat_err,
        v * math::exp_m1(lz.trunc_bound),
        lz.method,
    ))
}

/// `Z⁺` from the bracketed series `1 + Σ_{X≠∅} (1/Z⁻) ∫ χ₊^X χ₋^{Λ∖X} e^{-βU} dλ_z`.
///
/// Cubes of `X` draw `Poisson(za^d)` counts conditioned on `>= 2`, the others
/// at most one point; `Z⁻` comes from enumeration.
pub fn z_plus_direct<E: BatchExecutor>(
    p: &Potential,
    region: &Region,
    ens: &EnsembleParams,
    quad: &SubsetQuadrature,
    budget: &McBudget,
    exec: &E,
) -> Result<Estimate> {
    let nc = region.n_cubes();
    if nc > 20 {
        return Err(Error::RegionTooLarge {
            cubes: nc,
            limit: 20,
        });
    }
    let z_minus = z_dilute(p, region, ens, &DiluteMode::Enumerate(*quad), exec)?;
    let grid = *region.grid();
    let mu = ens.z * grid.cube_volume();
    if mu == 0.0 {
        return Ok(Estimate::exact(1.0));
    }
    let excess = math::exp_m1(mu) - mu;
    let masks: Vec<u32> = (1..(1u32 << nc)).collect();
    let terms = exec.map(masks.len(), |i| {
        plus_term(p, region, ens.beta, mu, excess, masks[i], budget)
    });
    let mut sum = 0.0;
    let mut var = 0.0;
    for (v, s) in &terms {
        sum += v;
        var += s * s;
    }
    let zm = z_minus.value;
    let value = 1.0 + sum / zm;
    let rel_zm = z_minus.stat_err / zm;
    let stat = math::sqrt(var / (zm * zm) + (sum / zm * rel_zm) * (sum / zm * rel_zm));
    let trunc = sum / zm * z_minus.trunc_bound / zm;
    Ok(Estimate::new(value, stat, trunc, Method::MonteCarlo))
}

fn plus_term(
    p: &Potential,
    region: &Region,
    beta: f64,
    mu: f64,
    excess: f64,
    mask: u32,
    budget: &McBudget,
) -> (f64, f64) {
    let grid = region.grid();
    let cubes = region.cubes();
    let mut mass = 1.0;
    for i in 0..cubes.len() {
        mass *= if mask & (1 << i) != 0 {
            excess
        } else {
            1.0 + mu
        };
    }
    let q = mu / (1.0 + mu);
    let parts = batches(budget.samples.max(2), budget.batch);
    let mut all = Vec::with_capacity(parts.len());
    for (b, &count) in parts.iter().enumerate() {
        let mut rng = substream(budget.seed, Tag::PlusSeries, mask as u64, b as u64);
        let mut m = Moments::<1>::default();
        let mut pts: Vec<Point> = Vec::new();
        for _ in 0..count {
            pts.clear();
            for (i, c) in cubes.iter().enumerate() {
                let n = if mask & (1 << i) != 0 {
                    poisson_at_least_two(&mut rng, mu, excess)
                } else {
                    (uniform(&mut rng) < q) as usize
                };
                let lo = grid.lower_corner(c);
                for _ in 0..n {
                    pts.push(uniform_in_cube(&mut rng, &lo, grid.edge(), grid.dim()));
                }
            }
            m.push(&[math::exp(-beta * pair_sum(p, &pts))]);
        }
        all.push(m);
    }
    let m = reduce(&all);
    (mass * m.mean[0], mass * math::sqrt(m.mean_var(0)))
}

/// Inverse-CDF draw from `Poisson(μ)` conditioned on `n >= 2`.
fn poisson_at_least_two(rng: &mut impl RngCore, mu: f64, excess: f64) -> usize {
    let u = uniform(rng) * excess;
    let mut n = 2usize;
    let mut term = mu * mu / 2.0;
    let mut acc = term;
    while acc < u && n < 10_000 {
        n += 1;
        term *= mu / n as f64;
        acc += term;
    }
    n
}

/// Indicator-restricted estimates of `Z` for every assignment of `χ₋`/`χ₊`
/// to the cubes; the assignments partition configuration space.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorDecomposition {
    /// Bit `i` set means cube `i` carries `χ₊`.
    pub parts: Vec<(u32, Estimate)>,
    pub total: Estimate,
}

#[allow(clippy::too_many_arguments)]
pub fn indicator_decomposition<E: BatchExecutor>(
    p: &Potential,
    region: &Region,
    ens: &EnsembleParams,
    b_stability: f64,
    cut: &TermCut,
    budget: &McBudget,
    exec: &E,
) -> Result<IndicatorDecomposition> {
    let nc = region.n_cubes();
    if nc > 12 {
        return Err(Error::RegionTooLarge {
            cubes: nc,
            limit: 12,
        });
    }
    let n_max = cut.n_max.unwrap_or_else(|| {
        default_n_max(
            ens.z * region.volume() * math::exp(ens.beta * b_stability),
            cut,
        )
    });
    let tail = poisson_tail_bound(
        ens.z * region.volume() * math::exp(ens.beta * b_stability),
        n_max,
    );
    let assignments: Vec<u32> = (0..(1u32 << nc)).collect();
    let parts = exec.map(assignments.len(), |i| {
        let mask = assignments[i];
        let mut value = 0.0;
        let mut var = 0.0;
        let mut coef = 1.0;
        for n in 0..=n_max {
            if n > 0 {
                coef *= ens.z * region.volume() / n as f64;
            }
            let m = indicator_term(p, region, ens.beta, n, mask, budget, i as u64);
            value += coef * m.mean[0];
            var += coef * coef * m.mean_var(0);
        }
        (
            mask,
            Estimate::new(value, math::sqrt(var), 0.0, Method::MonteCarlo),
        )
    });
    let value = math::pairwise_sum(&parts.iter().map(|(_, e)| e.value).collect::<Vec<_>>());
    let var: f64 = parts.iter().map(|(_, e)| e.stat_err * e.stat_err).sum();
    Ok(IndicatorDecomposition {
        total: Estimate::new(value, math::sqrt(var), tail, Method::MonteCarlo),
        parts,
    })
}

fn indicator_term(
    p: &Potential,
    region: &Region,
    beta: f64,
    n: usize,
    mask: u32,
    budget: &McBudget,
    assignment: u64,
) -> Moments<1> {
    let grid = region.grid();
    let cubes = region.cubes();
    let mut m = Moments::<1>::default();
    let mut pts: Vec<Point> = Vec::with_capacity(n);
    let mut counts = alloc::vec![0usize; cubes.len()];
    let parts = batches(budget.samples.max(2), budget.batch);
    for (b, &count) in parts.iter().enumerate() {
        let mut rng = substream(
            budget.seed,
            Tag::Indicator,
            n as u64,
            (assignment << 20) | b as u64,
        );
        for _ in 0..count {
            pts.clear();
            counts.iter_mut().for_each(|c| *c = 0);
            for _ in 0..n {
                let i = rng.random_range(0..cubes.len());
                let x = uniform_in_cube(
                    &mut rng,
                    &grid.lower_corner(&cubes[i]),
                    grid.edge(),
                    grid.dim(),
                );
                if let Some(j) = region.index_of(&grid.cube_of(&x)) {
                    counts[j] += 1;
                }
                pts.push(x);
            }
            let keep =
                counts
                    .iter()
                    .enumerate()
                    .all(|(i, &c)| if mask & (1 << i) != 0 { c >= 2 } else { c <= 1 });
            let w = if keep {
                math::exp(-beta * pair_sum(p, &pts))
            } else {
                0.0
            };
            m.push(&[w]);
        }
    }
    m
}

/// Smallest `N` whose stability tail is below `rel_tol` of the bounding series itself.
fn default_n_max(x: f64, cut: &TermCut) -> usize {
    let total = math::exp(x);
    (0..cut.max_terms)
        .find(|&n| poisson_tail_bound(x, n) <= cut.rel_tol * total)
        .unwrap_or(cut.max_terms)
}

/// `ε₁(a) = ½ z² a^{2d} e^{-β(b-5υ₀)} exp{z a^d e^{-β(b-3υ₀)}}`.
pub fn epsilon1(sums: &CubeSums, a: f64, dim: usize, ens: &EnsembleParams) -> f64 {
    let mu = ens.z * math::powi(a, dim as i32);
    let (b, v0, beta) = (sums.b, sums.v0, ens.beta);
    0.5 * mu
        * mu
        * math::exp(-beta * (b - 5.0 * v0))
        * math::exp(mu * math::exp(-beta * (b - 3.0 * v0)))
}

/// `Σ_{n>=2} (a^d z)ⁿ/n! e^{-¼β(b-2υ₀)n² + (3/2)βυ₀ n}`, summed until terms drop below `1e-30`.
pub fn epsilon1_series(sums: &CubeSums, a: f64, dim: usize, ens: &EnsembleParams) -> f64 {
    let mu = ens.z * math::powi(a, dim as i32);
    if mu == 0.0 {
        return 0.0;
    }
    let (b, v0, beta) = (sums.b, sums.v0, ens.beta);
    let mut total = 0.0;
    let mut prev = f64::INFINITY;
    for n in 2..100_000usize {
        let nf = n as f64;
        let ln_t =
            nf * math::ln(mu) - math::ln_gamma(nf + 1.0) - 0.25 * beta * (b - 2.0 * v0) * nf * nf
                + 1.5 * beta * v0 * nf;
        let t = math::exp(ln_t);
        total += t;
        if t < 1e-30 && t <= prev {
            break;
        }
        prev = t;
    }
    total
}

/// One row of a pressure scan.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureRow {
    pub a: f64,
    pub n_cubes: usize,
    pub volume: f64,
    pub p_full: Estimate,
    pub p_minus: Estimate,
    pub p_plus: Estimate,
    pub eps1: f64,
    /// `(1/βa^d) log(1 + ε₁)`.
    pub bound: f64,
    /// `p⁺ <= bound + 3σ`.
    pub bound_ok: bool,
    /// `1 - Z⁻/Z`.
    pub dense_ratio: Estimate,
    pub minus_ratio: Estimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PressureScan {
    pub rows: Vec<PressureRow>,
    /// Fitted slope of `ln(ε₁ a^{-2d})` against `b(a)`; `-β` when `ε₁ ~ a^{2d} e^{-βb}`.
    pub eps1_slope: Option<f64>,
}

/// How `Z⁻` is obtained in a pressure scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PressureDilute {
    /// From the same samples as `Z` (indicator restriction).
    Joint,
    /// Exact cube-subset enumeration.
    Enumerate(SubsetQuadrature),
}

/// Pressures over a sequence of regions (typically the same volume at decreasing `a`).
#[allow(clippy::too_many_arguments)]
pub fn pressures<E: BatchExecutor>(
    p: &Potential,
    regions: &[Region],
    ens: &EnsembleParams,
    b_stability: f64,
    dilute: &PressureDilute,
    tol: f64,
    cut: &TermCut,
    budget: &McBudget,
    exec: &E,
) -> Result<PressureScan> {
    let mut rows = Vec::with_capacity(regions.len());
    for region in regions {
        let grid = region.grid();
        let (a, d) = (grid.edge(), grid.dim());
        let sums = cube_sums(p, a, tol)?;
        let eps1 = epsilon1(&sums, a, d, ens);
        let bound = math::ln_1p(eps1) / (ens.beta * grid.cube_volume());
        let scale = 1.0 / (ens.beta * region.volume());
        let j = joint_estimate(p, region, ens, None, b_stability, cut, budget, exec)?;
        let log_est = |e: &Estimate| {
            Estimate::new(
                scale * math::ln(e.value),
                scale * e.stat_err / e.value,
                scale * e.trunc_bound / e.value,
                e.method,
            )
        };
        let p_full = log_est(&j.z_full);
        let (p_minus, p_plus, dense_ratio, minus_ratio) = match dilute {
            PressureDilute::Joint => {
                let lp = &j.log_z_plus;
                let p_plus = Estimate::new(
                    scale * lp.value,
                    scale * lp.stat_err,
                    scale * lp.trunc_bound,
                    lp.method,
                );
                (
                    log_est(&j.z_minus),
                    p_plus,
                    j.dense_ratio.clone(),
                    j.minus_ratio.clone(),
                )
            }
            PressureDilute::Enumerate(q) => {
                let zm = dilute_enumeration(p, grid, region.cubes(), &[], ens, q, exec)?;
                let p_minus = log_est(&zm);
                let p_plus = Estimate::new(
                    p_full.value - p_minus.value,
                    math::sqrt(
                        p_full.stat_err * p_full.stat_err + p_minus.stat_err * p_minus.stat_err,
                    ),
                    p_full.trunc_bound + p_minus.trunc_bound,
                    Estimate::weakest(p_full.method, p_minus.method),
                );
                let ratio = zm.value / j.z_full.value;
                let rel = math::sqrt(
                    (zm.stat_err / zm.value) * (zm.stat_err / zm.value)
                        + (j.z_full.stat_err / j.z_full.value)
                            * (j.z_full.stat_err / j.z_full.value),
                );
                let minus_ratio = Estimate::new(ratio, ratio * rel, 0.0, Method::MonteCarlo);
                let dense_ratio = Estimate::new(1.0 - ratio, ratio * rel, 0.0, Method::MonteCarlo);
                (p_minus, p_plus, dense_ratio, minus_ratio)
            }
        };
        let bound_ok = p_plus.value <= bound + 3.0 * p_plus.stat_err;
        rows.push(PressureRow {
            a,
            n_cubes: region.n_cubes(),
            volume: region.volume(),
            p_full,
            p_minus,
            p_plus,
            eps1,
            bound,
            bound_ok,
            dense_ratio,
            minus_ratio,
        });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.eps1 > 0.0)
        .map(|r| {
            let sums = cube_sums(p, r.a, tol).map(|s| s.b).unwrap_or(0.0);
            (
                sums,
                math::ln(r.eps1) - 2.0 * region_dim(regions) as f64 * math::ln(r.a),
            )
        })
        .unzip();
    let eps1_slope = math::fit_slope(&xs, &ys);
    Ok(PressureScan { rows, eps1_slope })
}

fn region_dim(regions: &[Region]) -> usize {
    regions.first().map(|r| r.grid().dim()).unwrap_or(1)
}
