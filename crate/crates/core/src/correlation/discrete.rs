//! KS series for the dilute (hard-core corrected) cube system.
//!
//! Cube integrals are tensor Gauss–Legendre sums, so every configuration the
//! series visits is a set of lattice nodes (plus the anchor points of `η`),
//! and the powers `K̃ⁿδ` are memoized exactly on that finite support.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;
use core::cell::RefCell;

use hashbrown::HashMap;

use super::{check_radius, pi_threshold, series_bounds, KsSeries, KsTruncation, SeriesBounds};
use crate::energy::distance;
use crate::error::{Error, Result};
use crate::estimate::{Estimate, Method};
use crate::lattice::{has_repeat, CubeGrid, CubeIndex, Region};
use crate::partition::EnsembleParams;
use crate::potential::{activity_radius, Potential};
use crate::quadrature::GaussLegendre;
use crate::{math, Configuration, Point, MAX_DIM};

const KEY_LEN: usize = 12;
const MAX_WORKING: usize = 4096;

type Key = (u8, u8, [u32; KEY_LEN]);

/// Node lattice and memo table of the cube KS operator.
pub struct DiscreteKs {
    p: Potential,
    beta: f64,
    b: f64,
    pos: Vec<Point>,
    /// Cube ordinal of every point id.
    cube: Vec<usize>,
    weight: Vec<f64>,
    n_anchor: usize,
    /// Node ids per cube ordinal (empty for cubes Q may not use).
    cube_nodes: Vec<Vec<u32>>,
    working: Vec<usize>,
    memo: RefCell<HashMap<Key, f64>>,
}

impl DiscreteKs {
    /// Builds the lattice: `anchors` become ids `0..|η|`, then `nodes^d`
    /// Gauss–Legendre points per working cube. The working cubes are the
    /// ambient region, or all cubes within `cutoff` of an anchor.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        p: &Potential,
        grid: &CubeGrid,
        ens: &EnsembleParams,
        b_stability: f64,
        anchors: &Configuration,
        ambient: Option<&Region>,
        cutoff: f64,
        nodes: usize,
    ) -> Result<Self> {
        let dim = grid.dim();
        if nodes == 0 {
            return Err(Error::Domain(
                "discrete KS needs at least one node per axis".into(),
            ));
        }
        let anchor_cubes: Vec<CubeIndex> =
            anchors.points().iter().map(|x| grid.cube_of(x)).collect();
        let working_cubes: Vec<CubeIndex> = match ambient {
            Some(r) => {
                if let Some(x) = anchors.points().iter().find(|x| !r.contains(x)) {
                    return Err(Error::Precondition(format!(
                        "anchor {x:?} lies outside the ambient region"
                    )));
                }
                r.cubes().to_vec()
            }
            None => cubes_near(grid, &anchor_cubes, cutoff)?,
        };
        let mut all: BTreeSet<CubeIndex> = working_cubes.iter().copied().collect();
        all.extend(anchor_cubes.iter().copied());
        let all: Vec<CubeIndex> = all.into_iter().collect();
        let ordinal = |c: &CubeIndex| all.binary_search(c).expect("cube registered");

        let mut pos = Vec::new();
        let mut cube = Vec::new();
        let mut weight = Vec::new();
        for (x, c) in anchors.points().iter().zip(&anchor_cubes) {
            pos.push(*x);
            cube.push(ordinal(c));
            weight.push(1.0);
        }
        let gl = GaussLegendre::new(nodes);
        let one: Vec<(f64, f64)> = gl.on(0.0, grid.edge()).collect();
        let mut cube_nodes = alloc::vec![Vec::new(); all.len()];
        let mut working = Vec::with_capacity(working_cubes.len());
        for c in &working_cubes {
            let o = ordinal(c);
            working.push(o);
            let lo = grid.lower_corner(c);
            for flat in 0..nodes.pow(dim as u32) {
                let mut x = [0.0; MAX_DIM];
                let mut w = 1.0;
                let mut rest = flat;
                for i in 0..dim {
                    let (t, wt) = one[rest % nodes];
                    x[i] = lo[i] + t;
                    w *= wt;
                    rest /= nodes;
                }
                cube_nodes[o].push(pos.len() as u32);
                pos.push(x);
                cube.push(o);
                weight.push(w);
            }
        }
        working.sort_unstable();
        Ok(Self {
            p: *p,
            beta: ens.beta,
            b: b_stability,
            pos,
            cube,
            weight,
            n_anchor: anchors.len(),
            cube_nodes,
            working,
            memo: RefCell::new(HashMap::new()),
        })
    }

    /// Ids of the anchor points, in the order given.
    pub fn anchor_ids(&self) -> Vec<u32> {
        (0..self.n_anchor as u32).collect()
    }

    pub fn n_points(&self) -> usize {
        self.pos.len()
    }

    /// `(K̃f)(s)` for a function `f` on id sets vanishing beyond `support` points.
    pub fn apply(&self, f: &dyn Fn(&[u32]) -> f64, support: usize, s: &[u32]) -> f64 {
        let n = s.len();
        if n == 0 || n > support + 1 || self.repeats_cube(s) {
            return 0.0;
        }
        if n == 1 {
            return self.q_sum(s[0], &[], support, f);
        }
        let sel = self.selected(s);
        let norm = sel.len() as f64;
        let mut total = 0.0;
        for (i, boltz) in sel {
            let rest: Vec<u32> = s
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &v)| v)
                .collect();
            let v = f(&rest) + self.q_sum(s[i], &rest, support + 1 - n, f);
            total += boltz * v / norm;
        }
        total
    }

    /// `(K̃ⁿδ)(s)`, memoized.
    pub fn power_delta(&self, n: usize, s: &[u32]) -> f64 {
        let len = s.len();
        if len == 0 || len > n + 1 {
            return 0.0;
        }
        if n == 0 {
            return (len == 1) as u8 as f64;
        }
        let mut ids = [0u32; KEY_LEN];
        ids[..len].copy_from_slice(s);
        ids[..len].sort_unstable();
        let key: Key = (n as u8, len as u8, ids);
        if let Some(v) = self.memo.borrow().get(&key) {
            return *v;
        }
        let f = |t: &[u32]| self.power_delta(n - 1, t);
        let v = self.apply(&f, n, &ids[..len]);
        self.memo.borrow_mut().insert(key, v);
        v
    }

    fn repeats_cube(&self, s: &[u32]) -> bool {
        s.iter().enumerate().any(|(i, a)| {
            s[..i]
                .iter()
                .any(|b| self.cube[*a as usize] == self.cube[*b as usize])
        })
    }

    /// `π̃`-selected ids of `s` with their Boltzmann factors `e^{-βW(x; s∖x)}`.
    fn selected(&self, s: &[u32]) -> Vec<(usize, f64)> {
        let d = self.p.dim();
        let thresh = pi_threshold(self.b);
        let all: Vec<(usize, f64)> = (0..s.len())
            .map(|i| {
                let x = &self.pos[s[i] as usize];
                let w: f64 = s
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &y)| self.p.phi(distance(x, &self.pos[y as usize], d)))
                    .sum();
                (i, w)
            })
            .collect();
        let mut keep: Vec<(usize, f64)> = all
            .iter()
            .filter(|(_, w)| *w >= thresh)
            .map(|&(i, w)| (i, math::exp(-self.beta * w)))
            .collect();
        if keep.is_empty() {
            keep = all
                .iter()
                .map(|&(i, w)| (i, math::exp(-self.beta * w)))
                .collect();
        }
        keep
    }

    /// `Σ_{Q≠∅, |Q|<=kmax, Q∩cubes(base)=∅} ∏_{y∈Q} (e^{-βφ̂(x,y)} - 1) f(base ∪ Q)`.
    fn q_sum(&self, x: u32, base: &[u32], kmax: usize, f: &dyn Fn(&[u32]) -> f64) -> f64 {
        if kmax == 0 {
            return 0.0;
        }
        let blocked: Vec<usize> = base.iter().map(|&y| self.cube[y as usize]).collect();
        let mut ids: Vec<u32> = base.to_vec();
        self.q_rec(x, 0, kmax, 1.0, &blocked, &mut ids, f)
    }

    #[allow(clippy::too_many_arguments)]
    fn q_rec(
        &self,
        x: u32,
        start: usize,
        left: usize,
        acc: f64,
        blocked: &[usize],
        ids: &mut Vec<u32>,
        f: &dyn Fn(&[u32]) -> f64,
    ) -> f64 {
        let d = self.p.dim();
        let xc = self.cube[x as usize];
        let xp = self.pos[x as usize];
        let mut total = 0.0;
        for wi in start..self.working.len() {
            let c = self.working[wi];
            if blocked.contains(&c) {
                continue;
            }
            for &y in &self.cube_nodes[c] {
                let m = if c == xc {
                    -1.0
                } else {
                    let r = distance(&xp, &self.pos[y as usize], d);
                    if r > 0.0 {
                        self.p.mayer(self.beta, r)
                    } else {
                        -1.0
                    }
                };
                let w = acc * self.weight[y as usize] * m;
                if w == 0.0 {
                    continue;
                }
                ids.push(y);
                total += w * f(ids);
                if left > 1 {
                    total += self.q_rec(x, wi + 1, left - 1, w, blocked, ids, f);
                }
                ids.pop();
            }
        }
        total
    }
}

fn cubes_near(grid: &CubeGrid, anchors: &[CubeIndex], cutoff: f64) -> Result<Vec<CubeIndex>> {
    let dim = grid.dim();
    let reach = (cutoff / grid.edge()).ceil_int() + 1;
    let side = (2 * reach + 1) as usize;
    let total = side.checked_pow(dim as u32).unwrap_or(usize::MAX);
    if total > MAX_WORKING * 64 {
        return Err(Error::Precondition(format!(
            "Mayer cutoff {cutoff} spans too many cubes of edge {}; give an ambient region",
            grid.edge()
        )));
    }
    let mut out = BTreeSet::new();
    for a in anchors {
        for flat in 0..total {
            let mut c = *a;
            let mut rest = flat;
            for ci in c.iter_mut().take(dim) {
                *ci += (rest % side) as i64 - reach;
                rest /= side;
            }
            let (lo, _) = grid.distance_range(a, &c);
            if lo <= cutoff {
                out.insert(c);
            }
        }
    }
    if out.len() > MAX_WORKING {
        return Err(Error::Precondition(format!(
            "Mayer cutoff {cutoff} needs {} working cubes (limit {MAX_WORKING}); give an ambient region",
            out.len()
        )));
    }
    Ok(out.into_iter().collect())
}

trait CeilInt {
    fn ceil_int(self) -> i64;
}

impl CeilInt for f64 {
    fn ceil_int(self) -> i64 {
        libm::ceil(self) as i64
    }
}

/// `Σ_{n=0}^{N} z^{n+1} ((K̃⁻)ⁿδ)(s)` at the cubes of `η`, anchored at `η`'s points.
///
/// With `ambient` the series is the finite-volume one (`Q ⊂ Λ`) and needs no
/// spatial cutoff. The tail bound uses `C(β) + a^d`, since the own cube enters
/// with Mayer factor `-1`.
#[allow(clippy::too_many_arguments)]
pub fn ks_series_discrete(
    p: &Potential,
    grid: &CubeGrid,
    ens: &EnsembleParams,
    b_stability: f64,
    eta: &Configuration,
    ambient: Option<&Region>,
    trunc: &KsTruncation,
) -> Result<KsSeries> {
    if eta.is_empty() {
        return Err(Error::Domain(
            "KS series needs a nonempty configuration".into(),
        ));
    }
    if eta.len() > trunc.order + 1 {
        let bounds = SeriesBounds {
            ratio: 0.0,
            tail: 0.0,
            cutoff: 0.0,
        };
        return Ok(KsSeries {
            estimate: Estimate::new(0.0, 0.0, 0.0, Method::Quadrature),
            bounds,
            quadrature: 0.0,
        });
    }
    if trunc.order + 1 > KEY_LEN {
        return Err(Error::Domain(format!(
            "discrete KS order is limited to {}",
            KEY_LEN - 1
        )));
    }
    let c_beta = p.mayer_c_beta(ens.beta, 1e-10)?.value;
    let c_disc = c_beta + grid.cube_volume();
    check_radius(
        ens.z,
        activity_radius(c_disc, ens.beta, b_stability),
        trunc.override_radius,
    )?;
    let cubes: Vec<CubeIndex> = eta.points().iter().map(|x| grid.cube_of(x)).collect();
    let xi = trunc.xi.unwrap_or(1.0 / c_disc);
    if has_repeat(&cubes) {
        let bounds = SeriesBounds {
            ratio: 0.0,
            tail: 0.0,
            cutoff: 0.0,
        };
        return Ok(KsSeries {
            estimate: Estimate::exact(0.0),
            bounds,
            quadrature: 0.0,
        });
    }
    let (cutoff, tau) = match ambient {
        Some(_) => (f64::INFINITY, 0.0),
        None => {
            let rc = trunc
                .cutoff_radius
                .unwrap_or_else(|| p.cutoff_radius(ens.beta, trunc.mayer_tol));
            (rc, p.mayer_tail_bound(ens.beta, rc).min(c_beta))
        }
    };
    let sum = |nodes: usize| -> Result<f64> {
        let ks = DiscreteKs::new(p, grid, ens, b_stability, eta, ambient, cutoff, nodes)?;
        let ids = ks.anchor_ids();
        let mut v = 0.0;
        let mut zn = ens.z;
        for n in 0..=trunc.order {
            v += zn * ks.power_delta(n, &ids);
            zn *= ens.z;
        }
        Ok(v)
    };
    let value = sum(trunc.nodes)?;
    let coarse = sum((trunc.nodes / 2).max(1))?;
    let quadrature = (value - coarse).abs();
    let bounds = series_bounds(
        ens.z,
        ens.beta,
        b_stability,
        c_disc,
        tau,
        xi,
        trunc.order,
        eta.len(),
    );
    let estimate = Estimate::new(
        value,
        0.0,
        bounds.tail + bounds.cutoff + quadrature,
        Method::Quadrature,
    );
    Ok(KsSeries {
        estimate,
        bounds,
        quadrature,
    })
}
