//! Experiment configuration, read from a TOML file.
//!
//! ```toml
//! seed = 7
//!
//! [potential]
//! family = "pure_repulsive"
//! dimension = 1
//! params = { c_r = 1.0, s = 2.0 }
//!
//! [ensemble]
//! z = 0.5
//! beta = 1.0
//!
//! [region]
//! edge_a = 0.4
//! extent = [16.0]
//! sweep = [0.4, 0.2, 0.1]
//!
//! [[eta]]
//! points = [0.9]
//! ```

use std::path::Path;

use quasilattice_core::correlation::KsTruncation;
use quasilattice_core::partition::{
    EnsembleParams, McBudget, SubsetQuadrature, TermCut, ENUMERATE_MAX,
};
use quasilattice_core::{Configuration, CubeGrid, CubeIndex, Family, Potential, Region};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub potential: PotentialSpec,
    pub ensemble: EnsembleSpec,
    pub region: RegionSpec,
    #[serde(default)]
    pub truncation: TruncationSpec,
    #[serde(default)]
    pub eta: Vec<EtaSpec>,
    #[serde(default)]
    pub verify: VerifySpec,
}

#[derive(Debug, Clone, Deserialize)]
pub struct PotentialSpec {
    pub dimension: usize,
    /// Required for the `zero` and `hard_core` families.
    #[serde(default)]
    pub test_only: bool,
    #[serde(flatten)]
    pub family: FamilySpec,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(
    tag = "family",
    content = "params",
    rename_all = "snake_case",
    deny_unknown_fields
)]
pub enum FamilySpec {
    PureRepulsive {
        c_r: f64,
        s: f64,
    },
    PowerCoreWithTail {
        c_r: f64,
        s: f64,
        c_a: f64,
        eps0: f64,
    },
    LennardJones {
        epsilon: f64,
        sigma: f64,
    },
    Zero,
    HardCore {
        sigma: f64,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub z: f64,
    pub beta: f64,
}

/// Exactly one of `box`, `extent` and `cubes` must be given.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub edge_a: f64,
    pub dimension: Option<usize>,
    /// Cube counts per axis at `edge_a`; the physical box is kept across the sweep.
    #[serde(rename = "box")]
    pub box_counts: Option<Vec<usize>>,
    /// Physical side lengths.
    pub extent: Option<Vec<f64>>,
    /// Explicit cube indices at `edge_a`; no sweep.
    pub cubes: Option<Vec<Vec<i64>>>,
    /// Strictly decreasing edges; defaults to `[edge_a]`.
    pub sweep: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DiluteChoice {
    /// Enumerate when every region is small enough, else the joint sampler.
    #[default]
    Auto,
    Joint,
    Enumerate,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TruncationSpec {
    pub n_max: Option<usize>,
    pub rel_tol: f64,
    pub max_terms: usize,
    pub samples: usize,
    pub batch: usize,
    /// Tolerance for lattice sums and `C(β)`.
    pub tol: f64,
    pub dilute: DiluteChoice,
    pub enumerate_max: usize,
    /// `auto` enumerates only below this many estimated integrand evaluations.
    pub enumerate_budget: f64,
    pub gl_nodes: usize,
    pub adjacent_nodes: usize,
    pub max_gl_dims: usize,
    pub max_adjacent_dims: usize,
    pub subset_samples: usize,
    pub ks_order: usize,
    pub ks_nodes: usize,
    pub ks_samples: usize,
    pub mayer_tol: f64,
    pub cutoff_radius: Option<f64>,
    pub xi: Option<f64>,
}

impl Default for TruncationSpec {
    fn default() -> Self {
        let q = SubsetQuadrature::default();
        let k = KsTruncation::default();
        let c = TermCut::default();
        Self {
            n_max: None,
            rel_tol: c.rel_tol,
            max_terms: c.max_terms,
            samples: 1 << 14,
            batch: 1024,
            tol: 1e-6,
            dilute: DiluteChoice::Auto,
            enumerate_max: ENUMERATE_MAX,
            enumerate_budget: 2e7,
            gl_nodes: q.nodes,
            adjacent_nodes: q.adjacent_nodes,
            max_gl_dims: q.max_gl_dims,
            max_adjacent_dims: q.max_adjacent_dims,
            subset_samples: q.mc_samples,
            ks_order: k.order,
            ks_nodes: k.nodes,
            ks_samples: k.samples,
            mayer_tol: k.mayer_tol,
            cutoff_radius: None,
            xi: None,
        }
    }
}

/// One point may be written as a bare number in one dimension.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PointSpec {
    Scalar(f64),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EtaSpec {
    pub points: Vec<PointSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySpec {
    pub audit_configs: usize,
    /// Poisson intensities are drawn uniformly from `(0, max_intensity]` points per cube.
    pub max_intensity: f64,
    /// Cubes of the factorization check; at most 6.
    pub factor_cubes: usize,
    /// Cubes of the indicator reconstruction; at most 12.
    pub indicator_cubes: usize,
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self {
            audit_configs: 1000,
            max_intensity: 5.0,
            factor_cubes: 4,
            indicator_cubes: 4,
        }
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parses and checks everything that does not need numerical work.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        let d = self.potential.dimension;
        if d == 0 || d > quasilattice_core::MAX_DIM {
            return bad(format!(
                "potential.dimension = {d} outside 1..={}",
                quasilattice_core::MAX_DIM
            ));
        }
        if let Some(rd) = self.region.dimension {
            if rd != d {
                return bad(format!(
                    "region.dimension = {rd} differs from potential.dimension = {d}"
                ));
            }
        }
        let r = &self.region;
        let given = [
            r.box_counts.is_some(),
            r.extent.is_some(),
            r.cubes.is_some(),
        ]
        .iter()
        .filter(|&&b| b)
        .count();
        if given != 1 {
            return bad("region needs exactly one of `box`, `extent`, `cubes`".into());
        }
        let axes = r
            .box_counts
            .as_ref()
            .map(Vec::len)
            .or(r.extent.as_ref().map(Vec::len));
        if let Some(n) = axes {
            if n != d {
                return bad(format!(
                    "region box/extent has {n} entries for dimension {d}"
                ));
            }
        }
        if let Some(cubes) = &r.cubes {
            if r.sweep.is_some() {
                return bad("region.sweep cannot be combined with explicit `cubes`".into());
            }
            if let Some(c) = cubes.iter().find(|c| c.len() != d) {
                return bad(format!("cube index {c:?} does not have {d} components"));
            }
        }
        if !(r.edge_a > 0.0 && r.edge_a.is_finite()) {
            return bad(format!("region.edge_a = {} must be positive", r.edge_a));
        }
        if let Some(sweep) = &r.sweep {
            if sweep.is_empty() {
                return bad("region.sweep is empty".into());
            }
            if sweep.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
                return bad("region.sweep entries must be positive".into());
            }
            if sweep.windows(2).any(|w| w[1] >= w[0]) {
                return bad(format!(
                    "region.sweep must be strictly decreasing, got {sweep:?}"
                ));
            }
        }
        let test_family = matches!(
            self.potential.family,
            FamilySpec::Zero | FamilySpec::HardCore { .. }
        );
        if test_family && !self.potential.test_only {
            return bad("the zero and hard_core families need `potential.test_only = true`".into());
        }
        for (i, e) in self.eta.iter().enumerate() {
            for p in &e.points {
                let n = match p {
                    PointSpec::Scalar(_) => 1,
                    PointSpec::Vector(v) => v.len(),
                };
                if n != d {
                    return bad(format!(
                        "eta[{i}] has a point with {n} coordinates in dimension {d}"
                    ));
                }
            }
        }
        if self.truncation.samples < 2 {
            return bad("truncation.samples must be at least 2".into());
        }
        if self.verify.factor_cubes > 6 || self.verify.indicator_cubes > 12 {
            return bad("verify.factor_cubes <= 6 and verify.indicator_cubes <= 12".into());
        }
        Ok(())
    }

    pub fn potential(&self) -> Result<Potential, CliError> {
        let f = match self.potential.family {
            FamilySpec::PureRepulsive { c_r, s } => Family::PureRepulsive { c_r, s },
            FamilySpec::PowerCoreWithTail { c_r, s, c_a, eps0 } => {
                Family::PowerCoreWithTail { c_r, s, c_a, eps0 }
            }
            FamilySpec::LennardJones { epsilon, sigma } => Family::LennardJones { epsilon, sigma },
            FamilySpec::Zero => Family::Zero,
            FamilySpec::HardCore { sigma } => Family::HardCore { sigma },
        };
        Ok(Potential::new(f, self.potential.dimension)?)
    }

    pub fn ensemble(&self) -> Result<EnsembleParams, CliError> {
        Ok(EnsembleParams::new(self.ensemble.z, self.ensemble.beta)?)
    }

    pub fn sweep(&self) -> Vec<f64> {
        self.region
            .sweep
            .clone()
            .unwrap_or_else(|| vec![self.region.edge_a])
    }

    /// The region at each edge of the sweep.
    pub fn regions(&self) -> Result<Vec<Region>, CliError> {
        let d = self.potential.dimension;
        let r = &self.region;
        if let Some(cubes) = &r.cubes {
            let idx: Vec<CubeIndex> = cubes
                .iter()
                .map(|c| {
                    let mut i = [0; quasilattice_core::MAX_DIM];
                    i[..d].copy_from_slice(c);
                    i
                })
                .collect();
            return Ok(vec![Region::from_cubes(CubeGrid::new(r.edge_a, d)?, idx)?]);
        }
        let lengths: Vec<f64> = match (&r.box_counts, &r.extent) {
            (Some(b), _) => b.iter().map(|&n| n as f64 * r.edge_a).collect(),
            (_, Some(e)) => e.clone(),
            _ => unreachable!("validated"),
        };
        self.sweep()
            .iter()
            .map(|&a| {
                let grid = CubeGrid::new(a, d)?;
                if lengths.contains(&0.0) {
                    return Ok(Region::from_cubes(grid, Vec::new())?);
                }
                Ok(Region::with_extent(grid, &lengths)?)
            })
            .collect()
    }

    pub fn etas(&self) -> Result<Vec<Configuration>, CliError> {
        let d = self.potential.dimension;
        self.eta
            .iter()
            .map(|e| {
                let pts = e
                    .points
                    .iter()
                    .map(|p| {
                        let mut x = [0.0; quasilattice_core::MAX_DIM];
                        match p {
                            PointSpec::Scalar(v) => x[0] = *v,
                            PointSpec::Vector(v) => x[..d].copy_from_slice(v),
                        }
                        x
                    })
                    .collect();
                Ok(Configuration::new(d, pts)?)
            })
            .collect()
    }

    pub fn term_cut(&self) -> TermCut {
        let t = &self.truncation;
        TermCut {
            n_max: t.n_max,
            rel_tol: t.rel_tol,
            max_terms: t.max_terms,
        }
    }

    pub fn budget(&self, seed: u64) -> McBudget {
        McBudget {
            samples: self.truncation.samples,
            batch: self.truncation.batch,
            seed,
        }
    }

    pub fn quadrature(&self, seed: u64) -> SubsetQuadrature {
        let t = &self.truncation;
        SubsetQuadrature {
            nodes: t.gl_nodes,
            adjacent_nodes: t.adjacent_nodes,
            max_gl_dims: t.max_gl_dims,
            max_adjacent_dims: t.max_adjacent_dims,
            mc_samples: t.subset_samples,
            seed,
        }
    }

    /// Whether subset enumeration over `n_cubes` cubes is affordable.
    pub fn enumerable(&self, n_cubes: usize) -> bool {
        let t = &self.truncation;
        n_cubes <= t.enumerate_max.min(ENUMERATE_MAX)
            && self
                .quadrature(0)
                .evaluations(n_cubes, self.potential.dimension)
                <= t.enumerate_budget
    }

    pub fn ks_truncation(&self, seed: u64, override_radius: bool) -> KsTruncation {
        let t = &self.truncation;
        KsTruncation {
            order: t.ks_order,
            cutoff_radius: t.cutoff_radius,
            mayer_tol: t.mayer_tol,
            samples: t.ks_samples,
            xi: t.xi,
            seed,
            nodes: t.ks_nodes,
            override_radius,
        }
    }
}
