use std::fs;
use std::path::{Path, PathBuf};

use quasilattice_core::correlation::{
    convergence_report, ks_series_continuum, ks_series_discrete, rho_dilute_direct,
    ConvergenceOptions,
};
use quasilattice_core::energy::{cube_sums, global_bounds, stability_constants};
use quasilattice_core::partition::{
    epsilon1, indicator_decomposition, pressures, z_dilute, z_grand, z_plus_direct, DiluteMode,
    PressureDilute, ENUMERATE_MAX,
};
use quasilattice_core::potential::activity_radius;
use quasilattice_core::{Configuration, Error, Estimate, Potential, Region};

use crate::audit::superstability_audit;
use crate::config::{DiluteChoice, ExperimentConfig};
use crate::error::CliError;
use crate::exec::RayonExecutor;
use crate::output::{num, Outcome, Report, Table};

pub const CONSTANTS_HEADER: &str = "a, b, v0, v0_tail, A, B, c_d, a_m, B_global, C_beta, z_max";
pub const PRESSURE_HEADER: &str =
    "a, n_cubes, volume, p_full, p_full_err, p_minus, p_minus_err, p_plus, p_plus_err, eps1, bound";
pub const CONVERGENCE_HEADER: &str =
    "a, rho_full, rho_full_err, rho_minus, rho_minus_err, diff, remainder_R, z_ratio";
pub const KS_HEADER: &str =
    "eta, variant, a, value, stat_err, trunc_bound, tail, cutoff, quadrature";
pub const VERIFY_HEADER: &str = "check, a, passed, count, failures, worst_margin";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Constants,
    PressureScan,
    CorrScan,
    Ks,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Constants => "constants",
            Command::PressureScan => "pressure-scan",
            Command::CorrScan => "corr-scan",
            Command::Ks => "ks",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: PathBuf,
    /// Replaces the config's seed.
    pub seed: Option<u64>,
    pub override_radius: bool,
    /// Worker threads; `None` uses rayon's default.
    pub threads: Option<usize>,
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    seed: u64,
    override_radius: bool,
    exec: RayonExecutor,
    p: Potential,
}

impl Ctx<'_> {
    /// A stability constant `B` valid at every edge; 0 for the test families.
    fn b_stability(&self) -> Result<f64, CliError> {
        if self.p.is_test_only() {
            return Ok(0.0);
        }
        Ok(global_bounds(&self.p, self.cfg.truncation.tol)?.b_global)
    }

    fn c_beta(&self) -> Result<f64, CliError> {
        Ok(self
            .p
            .mayer_c_beta(self.cfg.ensemble.beta, self.cfg.truncation.tol)?
            .value)
    }
}

pub fn run(cmd: Command, cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Outcome, CliError> {
    let exec = RayonExecutor::new(opts.threads)
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let ctx = Ctx {
        cfg,
        seed: opts.seed.unwrap_or(cfg.seed),
        override_radius: opts.override_radius,
        exec,
        p: cfg.potential()?,
    };
    let mut report = Report::default();
    report.note(format!("seed = {}", ctx.seed));
    let table = match cmd {
        Command::Constants => constants(&ctx, &mut report)?,
        Command::PressureScan => pressure_scan(&ctx, &mut report)?,
        Command::CorrScan => corr_scan(&ctx, &mut report)?,
        Command::Ks => ks(&ctx, &mut report)?,
        Command::Verify => verify(&ctx, &mut report)?,
    };
    write_outputs(cmd, &opts.out, &table, &report)
}

fn write_outputs(
    cmd: Command,
    out: &Path,
    table: &Table,
    report: &Report,
) -> Result<Outcome, CliError> {
    fs::create_dir_all(out)?;
    let csv = out.join(format!("{}.csv", cmd.name()));
    let rep = out.join("report.txt");
    table.write(&csv)?;
    fs::write(&rep, report.render(cmd.name()))?;
    Ok(Outcome {
        passed: report.failures() == 0,
        checks: report.checks(),
        failures: report.failures(),
        csv,
        report: rep,
    })
}

fn constants(ctx: &Ctx, report: &mut Report) -> Result<Table, CliError> {
    let mut t = Table::new(CONSTANTS_HEADER);
    let beta = ctx.cfg.ensemble.beta;
    let tol = ctx.cfg.truncation.tol;
    let g = global_bounds(&ctx.p, tol)?;
    let c = ctx.c_beta()?;
    let z_max = activity_radius(c, beta, g.b_global);
    report.note(format!(
        "a_m = {}, B_global = {}, bracketed = {}, phi_minus_integral = {}",
        num(g.a_m),
        num(g.b_global),
        g.bracketed,
        num(g.phi_minus_integral)
    ));
    report.note(format!("C(beta) = {}, z_max = {}", num(c), num(z_max)));
    for region in ctx.cfg.regions()? {
        let a = region.grid().edge();
        match stability_constants(&ctx.p, region.grid(), tol) {
            Ok(s) => {
                report.check(
                    &format!("b > 2 v0 at a = {}", num(a)),
                    true,
                    format!("A = {}", num(s.big_a)),
                );
                t.push(&[
                    num(a),
                    num(s.b),
                    num(s.v0),
                    num(s.v0_tail),
                    num(s.big_a),
                    num(s.b_local),
                    num(s.c_d),
                    num(s.a_m),
                    num(s.b_global),
                    num(c),
                    num(z_max),
                ]);
            }
            Err(e @ Error::EdgeTooCoarse { .. }) => {
                report.check(&format!("b > 2 v0 at a = {}", num(a)), false, e.to_string());
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(t)
}

fn strictly(values: &[f64], increasing: bool) -> bool {
    values
        .windows(2)
        .all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] })
}

fn list(values: &[f64]) -> String {
    values
        .iter()
        .map(|&v| num(v))
        .collect::<Vec<_>>()
        .join(", ")
}

fn pressure_scan(ctx: &Ctx, report: &mut Report) -> Result<Table, CliError> {
    let cfg = ctx.cfg;
    let regions = cfg.regions()?;
    let ens = cfg.ensemble()?;
    let quad = cfg.quadrature(ctx.seed);
    let small = regions.iter().all(|r| cfg.enumerable(r.n_cubes()));
    let dilute = match cfg.truncation.dilute {
        DiluteChoice::Joint => PressureDilute::Joint,
        DiluteChoice::Enumerate => PressureDilute::Enumerate(quad),
        DiluteChoice::Auto if small => PressureDilute::Enumerate(quad),
        DiluteChoice::Auto => PressureDilute::Joint,
    };
    report.note(format!(
        "dilute partition function by {}",
        if matches!(dilute, PressureDilute::Joint) {
            "joint sampling"
        } else {
            "enumeration"
        }
    ));
    let b = ctx.b_stability()?;
    let scan = pressures(
        &ctx.p,
        &regions,
        &ens,
        b,
        &dilute,
        cfg.truncation.tol,
        &cfg.term_cut(),
        &cfg.budget(ctx.seed),
        &ctx.exec,
    )?;
    let mut t = Table::new(PRESSURE_HEADER);
    for r in &scan.rows {
        t.push(&[
            num(r.a),
            r.n_cubes.to_string(),
            num(r.volume),
            num(r.p_full.value),
            num(r.p_full.stat_err),
            num(r.p_minus.value),
            num(r.p_minus.stat_err),
            num(r.p_plus.value),
            num(r.p_plus.stat_err),
            num(r.eps1),
            num(r.bound),
        ]);
        report.check(
            &format!("p_plus <= bound + 3 sigma at a = {}", num(r.a)),
            r.bound_ok,
            format!(
                "p_plus = {} +- {}, bound = {}",
                num(r.p_plus.value),
                num(r.p_plus.stat_err),
                num(r.bound)
            ),
        );
        report.note(format!(
            "a = {}: 1 - Z-/Z = {} +- {}",
            num(r.a),
            num(r.dense_ratio.value),
            num(r.dense_ratio.stat_err)
        ));
    }
    if let Some(s) = scan.eps1_slope {
        report.note(format!("slope of ln(eps1 a^-2d) against b(a): {}", num(s)));
    }
    if scan.rows.len() >= 2 {
        let diffs: Vec<f64> = scan
            .rows
            .iter()
            .map(|r| (r.p_full.value - r.p_minus.value).abs())
            .collect();
        report.check(
            "|p - p_minus| strictly decreasing",
            strictly(&diffs, false),
            list(&diffs),
        );
    }
    Ok(t)
}

fn single_eta(ctx: &Ctx) -> Result<Configuration, CliError> {
    let mut etas = ctx.cfg.etas()?;
    if etas.len() != 1 {
        return Err(CliError::Config(format!(
            "corr-scan needs exactly one [[eta]] entry, found {}",
            etas.len()
        )));
    }
    Ok(etas.remove(0))
}

fn corr_scan(ctx: &Ctx, report: &mut Report) -> Result<Table, CliError> {
    let cfg = ctx.cfg;
    let eta = single_eta(ctx)?;
    let ens = cfg.ensemble()?;
    let b = ctx.b_stability()?;
    let z_max = activity_radius(ctx.c_beta()?, ens.beta, b);
    if ens.z > z_max && !ctx.override_radius {
        return Err(Error::AboveRadius { z: ens.z, z_max }.into());
    }
    let regions = cfg.regions()?;
    let opts = ConvergenceOptions {
        enumerate_max: (0..=ENUMERATE_MAX)
            .take_while(|&n| cfg.enumerable(n))
            .last()
            .unwrap_or(0),
        quad: cfg.quadrature(ctx.seed),
        cut: cfg.term_cut(),
        budget: cfg.budget(ctx.seed),
    };
    let conv = convergence_report(&ctx.p, &ens, &eta, &regions, b, &opts, &ctx.exec)?;
    for (a, why) in &conv.skipped {
        report.note(format!("skipped a = {}: {why}", num(*a)));
    }
    let mut t = Table::new(CONVERGENCE_HEADER);
    for r in &conv.rows {
        t.push(&[
            num(r.a),
            num(r.rho_full.value),
            num(r.rho_full.stat_err),
            num(r.rho_minus.value),
            num(r.rho_minus.stat_err),
            num(r.diff.value),
            num(r.remainder.value),
            num(r.z_ratio.value),
        ]);
        let sums = cube_sums(&ctx.p, r.a, cfg.truncation.tol)?;
        let eps1 = epsilon1(&sums, r.a, ctx.cfg.potential.dimension, &ens);
        let envelope = (r.n_cubes as f64 * eps1.ln_1p()).exp_m1();
        let d = &r.dense_ratio;
        report.check(
            &format!("1 - Z-/Z <= (1 + eps1)^N - 1 at a = {}", num(r.a)),
            d.value <= envelope + 3.0 * d.stat_err + d.trunc_bound,
            format!(
                "{} +- {} vs {}",
                num(d.value),
                num(d.stat_err),
                num(envelope)
            ),
        );
    }
    if conv.rows.len() >= 2 {
        let ratio: Vec<f64> = conv.rows.iter().map(|r| r.z_ratio.value).collect();
        report.check(
            "Z-/Z strictly increasing",
            strictly(&ratio, true),
            list(&ratio),
        );
        let rem: Vec<f64> = conv.rows.iter().map(|r| r.remainder.value.abs()).collect();
        report.check("|R| strictly decreasing", strictly(&rem, false), list(&rem));
        let diff: Vec<f64> = conv.rows.iter().map(|r| r.diff.value.abs()).collect();
        report.note(format!("|rho - rho_minus| over the sweep: {}", list(&diff)));
    }
    Ok(t)
}

fn estimate_cells(
    eta: usize,
    variant: &str,
    a: f64,
    e: &Estimate,
    tail: f64,
    cutoff: f64,
    quad: f64,
) -> Vec<String> {
    vec![
        eta.to_string(),
        variant.to_string(),
        num(a),
        num(e.value),
        num(e.stat_err),
        num(e.trunc_bound),
        num(tail),
        num(cutoff),
        num(quad),
    ]
}

fn ks(ctx: &Ctx, report: &mut Report) -> Result<Table, CliError> {
    let cfg = ctx.cfg;
    let etas = cfg.etas()?;
    if etas.is_empty() {
        return Err(CliError::Config(
            "ks needs at least one [[eta]] entry".into(),
        ));
    }
    let ens = cfg.ensemble()?;
    let b = ctx.b_stability()?;
    let regions = cfg.regions()?;
    let trunc = cfg.ks_truncation(ctx.seed, ctx.override_radius);
    let mut t = Table::new(KS_HEADER);
    for (i, eta) in etas.iter().enumerate() {
        for region in &regions {
            let a = region.grid().edge();
            let s = ks_series_discrete(&ctx.p, region.grid(), &ens, b, eta, Some(region), &trunc)?;
            t.push(&estimate_cells(
                i,
                "discrete",
                a,
                &s.estimate,
                s.bounds.tail,
                s.bounds.cutoff,
                s.quadrature,
            ));
            if !cfg.enumerable(region.n_cubes()) {
                report.note(format!(
                    "eta {i}, a = {}: {} cubes, no enumeration",
                    num(a),
                    region.n_cubes()
                ));
                continue;
            }
            let mode = DiluteMode::Enumerate(cfg.quadrature(ctx.seed));
            let d = rho_dilute_direct(&ctx.p, region, &ens, eta, &mode, &ctx.exec)?;
            t.push(&estimate_cells(i, "direct", a, &d, 0.0, 0.0, 0.0));
            let diff = (s.estimate.value - d.value).abs();
            let budget = s.estimate.trunc_bound + d.trunc_bound + 3.0 * d.stat_err;
            let rel = if d.value != 0.0 {
                diff / d.value.abs()
            } else {
                diff
            };
            report.check(
                &format!("discrete series vs enumeration, eta {i}, a = {}", num(a)),
                diff <= budget,
                format!(
                    "|diff| = {}, relative {}, budget {}",
                    num(diff),
                    num(rel),
                    num(budget)
                ),
            );
        }
        let c = ks_series_continuum(&ctx.p, &ens, b, eta, &trunc, &ctx.exec)?;
        t.push(&estimate_cells(
            i,
            "continuum",
            0.0,
            &c.estimate,
            c.bounds.tail,
            c.bounds.cutoff,
            0.0,
        ));
        if let Some(w) = &c.estimate.warning {
            report.note(format!("eta {i} continuum: {w}"));
        }
        report.note(format!("eta {i}: series ratio {}", num(c.bounds.ratio)));
    }
    Ok(t)
}

fn verify_row(
    t: &mut Table,
    check: &str,
    a: f64,
    ok: bool,
    count: usize,
    failures: usize,
    worst: f64,
) {
    t.push(&[
        check.to_string(),
        num(a),
        ok.to_string(),
        count.to_string(),
        failures.to_string(),
        num(worst),
    ]);
}

fn verify(ctx: &Ctx, report: &mut Report) -> Result<Table, CliError> {
    let cfg = ctx.cfg;
    let v = &cfg.verify;
    let ens = cfg.ensemble()?;
    let regions = cfg.regions()?;
    let mut t = Table::new(VERIFY_HEADER);
    if regions.iter().all(|r| r.n_cubes() == 0) {
        report.note("empty region: every check holds vacuously");
        report.check("region checks", true, "vacuous");
        verify_row(&mut t, "vacuous", cfg.region.edge_a, true, 0, 0, 0.0);
        return Ok(t);
    }
    let b = ctx.b_stability()?;
    for region in &regions {
        let a = region.grid().edge();
        if ctx.p.is_test_only() {
            report.note(format!(
                "a = {}: test potential, no stability constants to audit",
                num(a)
            ));
            continue;
        }
        let consts = match stability_constants(&ctx.p, region.grid(), cfg.truncation.tol) {
            Ok(c) => c,
            Err(e @ Error::EdgeTooCoarse { .. }) => {
                report.check(
                    &format!("constants at a = {}", num(a)),
                    false,
                    e.to_string(),
                );
                verify_row(&mut t, "constants", a, false, 1, 1, f64::NAN);
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        report.check(
            &format!("constants at a = {}", num(a)),
            true,
            format!("A = {}, B = {}", num(consts.big_a), num(consts.b_local)),
        );
        verify_row(
            &mut t,
            "constants",
            a,
            true,
            1,
            0,
            consts.b - 2.0 * consts.v0,
        );
        let au = superstability_audit(
            &ctx.p,
            region,
            &consts,
            v.audit_configs,
            v.max_intensity,
            ctx.seed,
            &ctx.exec,
        )?;
        let detail = |bad: usize, worst: f64| {
            format!(
                "{bad} of {} configurations ({} points), worst margin {}",
                au.configs,
                au.points,
                num(worst)
            )
        };
        let ok = au.negative == 0;
        report.check(
            &format!("superstability at a = {}", num(a)),
            ok,
            detail(au.negative, au.worst_margin),
        );
        verify_row(
            &mut t,
            "superstability",
            a,
            ok,
            au.configs,
            au.negative,
            au.worst_margin,
        );
        let ok = au.unstable == 0;
        report.check(
            &format!("stability at a = {}", num(a)),
            ok,
            detail(au.unstable, au.worst_stability),
        );
        verify_row(
            &mut t,
            "stability",
            a,
            ok,
            au.configs,
            au.unstable,
            au.worst_stability,
        );
        let ok = au.pi_fallbacks == 0;
        report.check(
            &format!("pi normalization at a = {}", num(a)),
            ok,
            format!("{} fallbacks", au.pi_fallbacks),
        );
        verify_row(
            &mut t,
            "pi_normalization",
            a,
            ok,
            au.configs,
            au.pi_fallbacks,
            0.0,
        );
    }

    let first = &regions[0];
    let a = first.grid().edge();
    let cut = cfg.term_cut();
    let budget = cfg.budget(ctx.seed);
    let quad = cfg.quadrature(ctx.seed);
    let sub = |n: usize| {
        Region::from_cubes(
            *first.grid(),
            first.cubes().iter().take(n).copied().collect(),
        )
    };
    let small = sub(v.factor_cubes)?;
    if small.n_cubes() > 0 {
        let z = z_grand(&ctx.p, &small, &ens, b, &cut, &budget, &ctx.exec)?;
        let zm = z_dilute(
            &ctx.p,
            &small,
            &ens,
            &DiluteMode::Enumerate(quad),
            &ctx.exec,
        )?;
        let zp = z_plus_direct(&ctx.p, &small, &ens, &quad, &budget, &ctx.exec)?;
        let resid = z.value.ln() - zm.value.ln() - zp.value.ln();
        let rel = |e: &Estimate| e.stat_err / e.value;
        let sigma = (rel(&z).powi(2) + rel(&zm).powi(2) + rel(&zp).powi(2)).sqrt();
        let slack = z.trunc_bound / z.value + zm.trunc_bound / zm.value + zp.trunc_bound / zp.value;
        let ok = resid.abs() <= 3.0 * sigma + slack;
        report.check(
            &format!("log Z = log Z- + log Z+ on {} cubes", small.n_cubes()),
            ok,
            format!(
                "residual {}, 3 sigma {}, truncation {}",
                num(resid),
                num(3.0 * sigma),
                num(slack)
            ),
        );
        verify_row(
            &mut t,
            "factorization",
            a,
            ok,
            small.n_cubes(),
            (!ok) as usize,
            resid,
        );
    }
    let small = sub(v.indicator_cubes)?;
    if small.n_cubes() > 0 {
        let dec = indicator_decomposition(&ctx.p, &small, &ens, b, &cut, &budget, &ctx.exec)?;
        let z = z_grand(
            &ctx.p,
            &small,
            &ens,
            b,
            &cut,
            &cfg.budget(ctx.seed ^ 0x5eed),
            &ctx.exec,
        )?;
        let ok = dec.total.agrees_with(&z, 3.0);
        report.check(
            &format!(
                "indicator assignments rebuild Z on {} cubes",
                small.n_cubes()
            ),
            ok,
            format!(
                "{} assignments: {} vs {}",
                dec.parts.len(),
                num(dec.total.value),
                num(z.value)
            ),
        );
        verify_row(
            &mut t,
            "indicator",
            a,
            ok,
            dec.parts.len(),
            (!ok) as usize,
            dec.total.value - z.value,
        );
    }

    // K̃ⁿδ vanishes on more than n+1 points; the radius does not matter for this.
    let trunc = cfg.ks_truncation(ctx.seed, true);
    let pts: Vec<_> = (0..trunc.order + 2)
        .map(|k| {
            let mut x = first.grid().center(&first.cubes()[0]);
            x[0] += k as f64 * a;
            x
        })
        .collect();
    let eta = Configuration::new(ctx.cfg.potential.dimension, pts)?;
    let disc = ks_series_discrete(&ctx.p, first.grid(), &ens, b, &eta, None, &trunc)?;
    let cont = ks_series_continuum(&ctx.p, &ens, b, &eta, &trunc, &ctx.exec)?;
    let ok = disc.estimate.value == 0.0 && cont.estimate.value == 0.0;
    report.check(
        &format!("KS depth bound at order {}", trunc.order),
        ok,
        format!(
            "{} points: discrete {}, continuum {}",
            eta.len(),
            num(disc.estimate.value),
            num(cont.estimate.value)
        ),
    );
    verify_row(
        &mut t,
        "ks_depth",
        a,
        ok,
        2,
        (!ok) as usize,
        disc.estimate.value.abs().max(cont.estimate.value.abs()),
    );
    Ok(t)
}
