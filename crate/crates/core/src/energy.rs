//! Configuration energies and the superstability constants.

use alloc::format;

use crate::error::{Error, Result};
use crate::lattice::{occupancy, CubeGrid, CubeIndex};
use crate::potential::Potential;
use crate::{math, Configuration, Point, MAX_DIM};

/// Energy under the hard-core corrected potential, which is `+∞` whenever a
/// cube holds two points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Energy {
    Finite(f64),
    Infinite,
}

impl Energy {
    /// `e^{-βU}`, exactly 0 for the infinite marker.
    pub fn boltzmann(self, beta: f64) -> f64 {
        match self {
            Energy::Finite(u) => math::exp(-beta * u),
            Energy::Infinite => 0.0,
        }
    }
}

#[inline]
pub fn distance(x: &Point, y: &Point, dim: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..dim {
        let t = x[i] - y[i];
        s += t * t;
    }
    math::sqrt(s)
}

/// `Σ_{i<j} φ(|x_i - x_j|)`; coincident points give `+∞`.
#[inline]
pub(crate) fn pair_sum(p: &Potential, pts: &[Point]) -> f64 {
    let d = p.dim();
    let mut u = 0.0;
    for i in 1..pts.len() {
        for j in 0..i {
            let r = distance(&pts[i], &pts[j], d);
            if r == 0.0 {
                return f64::INFINITY;
            }
            u += p.phi(r);
        }
    }
    u
}

/// `Σ_{x∈xs, y∈ys} φ(|x - y|)`; coincident points give `+∞`.
#[inline]
pub(crate) fn cross_sum(p: &Potential, xs: &[Point], ys: &[Point]) -> f64 {
    let d = p.dim();
    let mut w = 0.0;
    for x in xs {
        for y in ys {
            let r = distance(x, y, d);
            if r == 0.0 {
                return f64::INFINITY;
            }
            w += p.phi(r);
        }
    }
    w
}

fn check_dim(p: &Potential, g: &Configuration) -> Result<()> {
    if p.dim() != g.dim() {
        return Err(Error::Domain(format!(
            "configuration dimension {} differs from potential dimension {}",
            g.dim(),
            p.dim()
        )));
    }
    Ok(())
}

/// `U(γ)`.
pub fn total_energy(p: &Potential, gamma: &Configuration) -> Result<f64> {
    check_dim(p, gamma)?;
    // Configuration already rejects coincident points
    Ok(pair_sum(p, gamma.points()))
}

/// `W(η; γ)`.
pub fn interaction_energy(
    p: &Potential,
    eta: &Configuration,
    gamma: &Configuration,
) -> Result<f64> {
    check_dim(p, eta)?;
    check_dim(p, gamma)?;
    if let Some(x) = eta.points().iter().find(|x| gamma.points().contains(x)) {
        return Err(Error::Domain(format!("configurations overlap at {x:?}")));
    }
    Ok(cross_sum(p, eta.points(), gamma.points()))
}

/// `U` under the hard-core corrected potential `φ̂`.
pub fn hardcore_energy(p: &Potential, grid: &CubeGrid, gamma: &Configuration) -> Result<Energy> {
    let u = total_energy(p, gamma)?;
    if occupancy(grid, gamma).values().any(|&n| n >= 2) {
        Ok(Energy::Infinite)
    } else {
        Ok(Energy::Finite(u))
    }
}

/// Superstability constants at one cube edge, plus the partition-free bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityConstants {
    /// Edge `a` these were computed at.
    pub a: f64,
    pub dim: usize,
    /// `inf φ⁺` over pairs in one cube.
    pub b: f64,
    /// Lattice sum of `sup φ⁻` over cube pairs (tail bound included).
    pub v0: f64,
    /// Analytic bound on the omitted part of the `v0` lattice sum.
    pub v0_tail: f64,
    /// `A = (b - 2 v0)/4`.
    pub big_a: f64,
    /// `B(a) = v0/2`.
    pub b_local: f64,
    pub c_d: f64,
    pub a_m: f64,
    pub b_global: f64,
}

/// Partition-independent stability data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalBounds {
    /// Root of `b(a) = 2 v0(a)` on `(0, r0)`, or `r0` when there is none.
    pub a_m: f64,
    /// `v0(a_m)/2`.
    pub b_global: f64,
    /// Whether `b - 2 v0` changed sign on `(0, r0)`.
    pub bracketed: bool,
    /// `|b(a_m) - 2 v0(a_m)|`.
    pub residual: f64,
    /// `∫ φ⁻`.
    pub phi_minus_integral: f64,
    /// Closed form `(2^{2d-s} d^{sd/2} Φ^s / φ₀^d)^{1/(s-d)}` with `Φ = ∫φ⁻`.
    pub b_closed_form: f64,
    /// The same closed form with the core constant `φ₀` in place of `Φ`.
    pub b_closed_form_core: f64,
    /// Lower bound `(φ₀/2Φ)^{1/(s-d)} / d^{s/(2(s-d))}` on `a_m`.
    pub a_m_lower: f64,
}

/// `b(a)` and the `v0(a)` lattice sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubeSums {
    pub b: f64,
    pub v0: f64,
    pub v0_tail: f64,
    pub shells: usize,
}

/// Stops the shell loop after this many cube offsets; the tail bound is still added.
const MAX_OFFSETS: usize = 1 << 22;

/// Computes `b(a)` and `v0(a)`; `tol` bounds the omitted lattice tail relative to the sum.
pub fn cube_sums(p: &Potential, a: f64, tol: f64) -> Result<CubeSums> {
    let dim = p.dim();
    let grid = CubeGrid::new(a, dim)?;
    let b = p.positive_part(a * math::sqrt(dim as f64));
    let Some((c, pw)) = p.negative_envelope() else {
        return Ok(CubeSums {
            b,
            v0: 0.0,
            v0_tail: 0.0,
            shells: 0,
        });
    };
    let d = dim as f64;
    if pw <= d {
        return Err(Error::Precondition(
            "attractive tail decays too slowly for a finite v0".into(),
        ));
    }
    // Σ_{j >= m} 2d 5^{d-1} c a^{-p} j^{d-1-p} bounds every shell beyond m
    let q = pw - d + 1.0;
    let pref = 2.0 * d * math::powi(5.0, dim as i32 - 1) * c * math::powf(a, -pw);
    let tail_from = |m: f64| pref * (math::powf(m, -q) + math::powf(m, 1.0 - q) / (q - 1.0));
    let origin: CubeIndex = [0; MAX_DIM];
    let peak = p.attraction_peak();
    let sup = |lo: f64, hi: f64| match peak {
        Some(r) => {
            let r = r.clamp(lo, hi);
            if r > 0.0 {
                p.negative_part(r)
            } else {
                0.0
            }
        }
        None => 0.0,
    };
    let mut sum = 0.0;
    let mut evaluated = 0usize;
    let mut m = 0usize;
    loop {
        let mut shell = 0.0;
        for_each_shell_offset(dim, m as i64, |k| {
            let (lo, hi) = grid.distance_range(&origin, k);
            shell += sup(lo, hi);
            evaluated += 1;
        });
        sum += shell;
        m += 1;
        let tail = if m >= 1 {
            tail_from(m as f64)
        } else {
            f64::INFINITY
        };
        let target = if sum > 0.0 { tol * sum } else { tol };
        if tail <= target || evaluated >= MAX_OFFSETS {
            return Ok(CubeSums {
                b,
                v0: sum + tail,
                v0_tail: tail,
                shells: m,
            });
        }
    }
}

/// Calls `f` on every offset `k ∈ ℤ^d` with `max |k_i| = m`.
///
/// Axis `i` is the first with `|k_i| = m`; earlier axes range over `(-m, m)`,
/// later ones over `[-m, m]`.
fn for_each_shell_offset(dim: usize, m: i64, mut f: impl FnMut(&CubeIndex)) {
    if m == 0 {
        f(&[0; MAX_DIM]);
        return;
    }
    let inner = (2 * m - 1) as usize;
    let full = (2 * m + 1) as usize;
    for i in 0..dim {
        let before = inner.pow(i as u32);
        let after = full.pow((dim - 1 - i) as u32);
        for sign in [-m, m] {
            for lo in 0..before {
                for hi in 0..after {
                    let mut k = [0i64; MAX_DIM];
                    let mut rest = lo;
                    for kj in k.iter_mut().take(i) {
                        *kj = (rest % inner) as i64 - (m - 1);
                        rest /= inner;
                    }
                    k[i] = sign;
                    let mut rest = hi;
                    for kj in k.iter_mut().take(dim).skip(i + 1) {
                        *kj = (rest % full) as i64 - m;
                        rest /= full;
                    }
                    f(&k);
                }
            }
        }
    }
}

/// Superstability constants at the grid's edge `a`.
pub fn stability_constants(p: &Potential, grid: &CubeGrid, tol: f64) -> Result<StabilityConstants> {
    let cert = p.certify_assumption_a()?;
    let d = grid.dim();
    if d != p.dim() {
        return Err(Error::Domain(format!(
            "grid dimension {d} differs from potential dimension {}",
            p.dim()
        )));
    }
    if cert.s <= d as f64 {
        return Err(Error::LogarithmicBranch { s: cert.s, d });
    }
    let a = grid.edge();
    if a >= cert.r0 {
        return Err(Error::Precondition(format!(
            "cube edge a = {a} must be below r0 = {}",
            cert.r0
        )));
    }
    let sums = cube_sums(p, a, tol)?;
    if sums.b <= 2.0 * sums.v0 {
        return Err(Error::EdgeTooCoarse {
            a,
            b: sums.b,
            two_v0: 2.0 * sums.v0,
        });
    }
    let global = global_bounds(p, tol)?;
    let h = d as f64 / 2.0;
    let c_d = math::powf(a, -(d as f64)) * math::powf(core::f64::consts::PI, h)
        / (d as f64 * math::gamma(h))
        * cert.phi0;
    Ok(StabilityConstants {
        a,
        dim: d,
        b: sums.b,
        v0: sums.v0,
        v0_tail: sums.v0_tail,
        big_a: (sums.b - 2.0 * sums.v0) / 4.0,
        b_local: sums.v0 / 2.0,
        c_d,
        a_m: global.a_m,
        b_global: global.b_global,
    })
}

/// Solves `b(a) = 2 v0(a)` by bisection and evaluates the partition-free `B`.
pub fn global_bounds(p: &Potential, tol: f64) -> Result<GlobalBounds> {
    let cert = p.certify_assumption_a()?;
    let d = p.dim() as f64;
    if cert.s <= d {
        return Err(Error::LogarithmicBranch {
            s: cert.s,
            d: p.dim(),
        });
    }
    let phi_minus = p.phi_minus_integral(tol.min(1e-8))?.value;
    let e = 1.0 / (cert.s - d);
    let b_closed = |phi: f64| {
        math::powf(
            math::powf(2.0, 2.0 * d - cert.s)
                * math::powf(d, cert.s * d / 2.0)
                * math::powf(phi, cert.s)
                / math::powf(cert.phi0, d),
            e,
        )
    };
    let a_m_lower = if phi_minus > 0.0 {
        math::powf(cert.phi0 / (2.0 * phi_minus), e) / math::powf(d, cert.s * e / 2.0)
    } else {
        f64::INFINITY
    };
    let mut out = GlobalBounds {
        a_m: cert.r0,
        b_global: 0.0,
        bracketed: false,
        residual: 0.0,
        phi_minus_integral: phi_minus,
        b_closed_form: b_closed(phi_minus),
        b_closed_form_core: b_closed(cert.phi0),
        a_m_lower,
    };
    if p.is_purely_repulsive() {
        return Ok(out);
    }
    // an upper bound on v0 keeps the root on the safe side; finer lattice
    // tolerances only move a_m by O(tol) at a large cost
    let lattice_tol = tol.max(1e-4);
    let gap = |a: f64| -> Result<(f64, CubeSums)> {
        let s = cube_sums(p, a, lattice_tol)?;
        Ok((s.b - 2.0 * s.v0, s))
    };
    let (g_hi, s_hi) = gap(cert.r0)?;
    if g_hi > 0.0 {
        // no sign change: A(a) > 0 on the whole interval
        out.b_global = s_hi.v0 / 2.0;
        out.residual = g_hi.abs();
        return Ok(out);
    }
    // b blows up as a -> 0, so some small edge has a positive gap
    let mut lo = cert.r0 / 2.0;
    let mut s_lo = gap(lo)?;
    while s_lo.0 <= 0.0 {
        lo /= 2.0;
        if lo < cert.r0 * 1e-12 {
            return Err(Error::Precondition(
                "no edge with b(a) > 2 v0(a) found".into(),
            ));
        }
        s_lo = gap(lo)?;
    }
    let mut hi = 2.0 * lo;
    let mut best = s_lo;
    let mut best_a = lo;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let (g, s) = gap(mid)?;
        if g > 0.0 {
            lo = mid;
            best = (g, s);
            best_a = mid;
        } else {
            hi = mid;
        }
        if best.0.abs() <= tol * best.1.b || (hi - lo) <= tol * lo {
            break;
        }
    }
    out.a_m = best_a;
    out.b_global = best.1.v0 / 2.0;
    out.bracketed = true;
    out.residual = best.0.abs();
    Ok(out)
}

/// `U(γ) - [A Σ_{|γ_Δ|>=2} |γ_Δ|² - B(a)|γ|]`.
pub fn check_superstability(
    p: &Potential,
    consts: &StabilityConstants,
    grid: &CubeGrid,
    gamma: &Configuration,
) -> Result<f64> {
    if (grid.edge() - consts.a).abs() > 1e-12 * consts.a {
        return Err(Error::Precondition(format!(
            "constants were computed at a = {}, grid has a = {}",
            consts.a,
            grid.edge()
        )));
    }
    let u = total_energy(p, gamma)?;
    let dense: f64 = occupancy(grid, gamma)
        .values()
        .filter(|&&n| n >= 2)
        .map(|&n| (n * n) as f64)
        .sum();
    Ok(u - (consts.big_a * dense - consts.b_local * gamma.len() as f64))
}
