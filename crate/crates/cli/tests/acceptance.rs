//! End-to-end acceptance run: one line per criterion, nonzero exit on any failure.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use quasilattice::audit::superstability_audit;
use quasilattice::{run, Command, ExperimentConfig, Outcome, RayonExecutor, RunOptions};
use quasilattice_core::energy::{global_bounds, stability_constants};
use quasilattice_core::partition::{
    pressures, z_dilute, z_grand, DiluteMode, EnsembleParams, McBudget, PressureDilute,
    SubsetQuadrature, TermCut,
};
use quasilattice_core::potential::activity_radius;
use quasilattice_core::sampling::Sequential;
use quasilattice_core::{CubeGrid, Potential, Region};
use tempfile::TempDir;

struct Verdict {
    ok: bool,
    detail: String,
}

fn verdict(ok: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        ok,
        detail: detail.into(),
    }
}

fn line(a: f64, n: usize) -> Region {
    Region::boxed(CubeGrid::new(a, 1).unwrap(), &[n]).unwrap()
}

fn ideal_gas() -> Verdict {
    let p = Potential::test_zero(1).unwrap();
    let ens = EnsembleParams::new(0.5, 1.0).unwrap();
    let region = line(0.5, 8);
    let z = z_grand(
        &p,
        &region,
        &ens,
        0.0,
        &TermCut::fixed(12),
        &McBudget::new(256, 1),
        &Sequential,
    )
    .unwrap();
    let grand_ok = z.contains(2.0f64.exp(), 3.0);

    let zm = z_dilute(
        &p,
        &region,
        &ens,
        &DiluteMode::Enumerate(SubsetQuadrature::default()),
        &Sequential,
    )
    .unwrap();
    let exact = 1.25f64.powi(8);
    let rel = ((zm.value - exact) / exact).abs();

    let regions: Vec<Region> = [0.4, 0.2, 0.1]
        .iter()
        .map(|&a| Region::with_extent(CubeGrid::new(a, 1).unwrap(), &[2.0]).unwrap())
        .collect();
    let scan = pressures(
        &p,
        &regions,
        &ens,
        0.0,
        &PressureDilute::Enumerate(SubsetQuadrature::default()),
        1e-8,
        &TermCut::default(),
        &McBudget::new(64, 1),
        &Sequential,
    )
    .unwrap();
    // gap/z = za/2 (1 + O(a)), so halving a halves the gap up to an O(za) correction
    let gaps: Vec<f64> = scan.rows.iter().map(|r| 0.5 - r.p_minus.value).collect();
    let shape = scan
        .rows
        .iter()
        .zip(&gaps)
        .all(|(r, g)| ((g / 0.5) / (0.5 * r.a / 2.0) - 1.0).abs() < 0.5 * r.a);
    let halving = gaps
        .windows(2)
        .zip(&scan.rows)
        .all(|(w, r)| (w[0] / w[1] - 2.0).abs() < 0.5 * r.a);
    verdict(
        grand_ok && rel < 1e-12 && shape && halving,
        format!(
            "Z = {:.12} vs e^2 (3 sigma + trunc {:.1e}), Z- relative error {rel:.1e}, pressure gaps {:?}",
            z.value,
            3.0 * z.stat_err + z.trunc_bound,
            gaps.iter().map(|g| format!("{g:.3e}")).collect::<Vec<_>>()
        ),
    )
}

fn audit() -> Verdict {
    let exec = RayonExecutor::new(None).unwrap();
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, p, a) in [
        (
            "pure repulsive s = 2",
            Potential::pure_repulsive(1.0, 2.0, 1).unwrap(),
            0.5,
        ),
        (
            "power core with tail",
            Potential::power_core_with_tail(1.0, 4.0, 0.1, 1.0, 1).unwrap(),
            0.5,
        ),
    ] {
        let grid = CubeGrid::new(a, 1).unwrap();
        let consts = match stability_constants(&p, &grid, 1e-6) {
            Ok(c) => c,
            Err(e) => return verdict(false, format!("{name}: {e}")),
        };
        let region = Region::boxed(grid, &[8]).unwrap();
        let r = superstability_audit(&p, &region, &consts, 10_000, 5.0, 17, &exec).unwrap();
        ok &= r.negative == 0 && r.configs == 10_000;
        parts.push(format!(
            "{name}: {} negative of {} ({} points), worst margin {:.3e}",
            r.negative, r.configs, r.points, r.worst_margin
        ));
    }
    verdict(ok, parts.join("; "))
}

fn c_beta() -> Verdict {
    let hard = Potential::test_hard_core(0.5, 1)
        .unwrap()
        .mayer_c_beta(1.0, 1e-10)
        .unwrap();
    let p = Potential::pure_repulsive(1.0, 2.0, 1).unwrap();
    let c: Vec<f64> = [0.5, 1.0, 2.0]
        .iter()
        .map(|&b| p.mayer_c_beta(b, 1e-10).unwrap().value)
        .collect();
    verdict(
        (hard.value - 1.0).abs() < 1e-8 && c.windows(2).all(|w| w[1] > w[0]),
        format!(
            "hard core C = {:.12}, repulsive C(0.5, 1, 2) = {c:?}",
            hard.value
        ),
    )
}

const REPULSIVE: &str = r#"
seed = 11

[potential]
family = "pure_repulsive"
dimension = 1
params = { c_r = 1.0, s = 2.0 }
"#;

fn config(body: &str) -> ExperimentConfig {
    ExperimentConfig::parse(&format!("{REPULSIVE}{body}")).unwrap()
}

fn factorization_cfg() -> ExperimentConfig {
    config(
        r#"
[ensemble]
z = 0.5
beta = 1.0

[region]
edge_a = 0.8
box = [5]

[verify]
audit_configs = 500
factor_cubes = 5
indicator_cubes = 4
"#,
    )
}

fn scan_cfg(eta: bool) -> ExperimentConfig {
    let eta = if eta {
        "\n[[eta]]\npoints = [8.05]\n"
    } else {
        ""
    };
    config(&format!(
        r#"
[ensemble]
z = 0.5
beta = 1.0

[region]
edge_a = 0.4
extent = [16.0]
sweep = [0.4, 0.2, 0.1]

[truncation]
dilute = "joint"
samples = 8192
{eta}"#
    ))
}

/// Half the KS radius of the pure repulsive potential at `β = 1`.
fn ks_cfg() -> (ExperimentConfig, f64) {
    let p = Potential::pure_repulsive(1.0, 2.0, 1).unwrap();
    let b = global_bounds(&p, 1e-6).unwrap().b_global;
    let c = p.mayer_c_beta(1.0, 1e-10).unwrap().value;
    let z = 0.5 * activity_radius(c, 1.0, b);
    let cfg = config(&format!(
        r#"
[ensemble]
z = {z:e}
beta = 1.0

[region]
edge_a = 0.25
box = [8]

[truncation]
ks_order = 4
ks_nodes = 8

[[eta]]
points = [0.9]

[[eta]]
points = [0.3, 1.4]
"#
    ));
    (cfg, z)
}

fn exec(
    cmd: Command,
    cfg: &ExperimentConfig,
    out: &Path,
    threads: usize,
    override_radius: bool,
) -> (Outcome, String, Duration) {
    let opts = RunOptions {
        out: out.to_path_buf(),
        seed: None,
        override_radius,
        threads: Some(threads),
    };
    let t = Instant::now();
    let o = run(cmd, cfg, &opts).unwrap_or_else(|e| panic!("{}: {e}", cmd.name()));
    let csv = fs::read_to_string(&o.csv).unwrap();
    (o, csv, t.elapsed())
}

fn report_failures(o: &Outcome) -> String {
    let text = fs::read_to_string(&o.report).unwrap();
    let bad: Vec<&str> = text.lines().filter(|l| l.starts_with("FAIL")).collect();
    if bad.is_empty() {
        format!("{} checks", o.checks)
    } else {
        bad.join(" | ")
    }
}

fn cells(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(", ").map(str::to_string).collect())
        .collect()
}

fn within(elapsed: Duration, limit: u64) -> (bool, String) {
    (
        elapsed <= Duration::from_secs(limit),
        format!("{:.1} s of {limit} s", elapsed.as_secs_f64()),
    )
}

fn main() -> ExitCode {
    let tmp = TempDir::new().unwrap();
    let mut all = true;
    let mut say = |n: usize, v: Verdict, took: Duration| {
        all &= v.ok;
        println!(
            "criterion {n}: {} ({:.1} s) {}",
            if v.ok { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            v.detail
        );
    };

    let t = Instant::now();
    let v = ideal_gas();
    let (fast, _) = within(t.elapsed(), 10);
    say(
        1,
        Verdict {
            ok: v.ok && fast,
            ..v
        },
        t.elapsed(),
    );

    let t = Instant::now();
    let v = audit();
    let (fast, _) = within(t.elapsed(), 30);
    say(
        2,
        Verdict {
            ok: v.ok && fast,
            ..v
        },
        t.elapsed(),
    );

    let jobs: [(usize, Command, ExperimentConfig, bool, u64); 4] = [
        (3, Command::Verify, factorization_cfg(), false, 120),
        (4, Command::PressureScan, scan_cfg(false), false, 300),
        (5, Command::Ks, ks_cfg().0, false, 120),
        (6, Command::CorrScan, scan_cfg(true), true, 300),
    ];
    let mut first = Vec::new();
    for (n, cmd, cfg, over, limit) in &jobs {
        let (o, csv, took) = exec(*cmd, cfg, &tmp.path().join(format!("c{n}-1")), 1, *over);
        let (fast, time) = within(took, *limit);
        let mut ok = o.passed && fast;
        let mut detail = format!("{}; {time}", report_failures(&o));
        if *n == 5 {
            let rows = cells(&csv);
            let mut rels = Vec::new();
            for pair in rows
                .windows(2)
                .filter(|w| w[0][1] == "discrete" && w[1][1] == "direct")
            {
                let s: f64 = pair[0][3].parse().unwrap();
                let d: f64 = pair[1][3].parse().unwrap();
                rels.push((s - d).abs() / d.abs());
            }
            ok &= rels.len() == 2 && rels.iter().all(|&r| r <= 1e-3);
            detail = format!(
                "z = {:.6e}, relative differences {:?}; {detail}",
                ks_cfg().1,
                rels.iter().map(|r| format!("{r:.3e}")).collect::<Vec<_>>()
            );
        }
        say(*n, verdict(ok, detail), took);
        first.push(csv);
    }

    let t = Instant::now();
    let v = c_beta();
    let (fast, _) = within(t.elapsed(), 5);
    say(
        7,
        Verdict {
            ok: v.ok && fast,
            ..v
        },
        t.elapsed(),
    );

    let t = Instant::now();
    let mut same = Vec::new();
    for ((n, cmd, cfg, over, _), csv) in jobs.iter().zip(&first) {
        let (_, again, _) = exec(*cmd, cfg, &tmp.path().join(format!("c{n}-4")), 4, *over);
        same.push((*n, again == *csv));
    }
    let ok = same.iter().all(|&(_, s)| s);
    let detail = same
        .iter()
        .map(|(n, s)| format!("criterion {n} {}", if *s { "identical" } else { "differs" }))
        .collect::<Vec<_>>();
    say(
        8,
        verdict(ok, format!("1 vs 4 workers: {}", detail.join(", "))),
        t.elapsed(),
    );

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
