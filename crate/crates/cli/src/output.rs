//! CSV tables and the plain-text report. Every float is written with 17
//! significant digits so reruns compare byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// A CSV table with a fixed header; cells are joined by `", "`.
pub struct Table {
    header: &'static str,
    rows: Vec<String>,
}

impl Table {
    pub fn new(header: &'static str) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, cells: &[String]) {
        debug_assert_eq!(cells.len(), self.header.split(", ").count());
        self.rows.push(cells.join(", "));
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut s = String::with_capacity(64 * (self.rows.len() + 1));
        s.push_str(self.header);
        s.push('\n');
        for r in &self.rows {
            s.push_str(r);
            s.push('\n');
        }
        fs::write(path, s)
    }
}

/// Notes and pass/fail lines, in the order they were recorded.
#[derive(Default)]
pub struct Report {
    lines: Vec<String>,
    checks: usize,
    failures: usize,
}

impl Report {
    pub fn note(&mut self, line: impl Into<String>) {
        self.lines.push(line.into());
    }

    pub fn check(&mut self, name: &str, ok: bool, detail: impl AsRef<str>) -> bool {
        self.checks += 1;
        if !ok {
            self.failures += 1;
        }
        let tag = if ok { "PASS" } else { "FAIL" };
        self.lines
            .push(format!("{tag} {name}: {}", detail.as_ref()));
        ok
    }

    pub fn checks(&self) -> usize {
        self.checks
    }

    pub fn failures(&self) -> usize {
        self.failures
    }

    pub fn render(&self, command: &str) -> String {
        let mut s = format!("quasilattice {command}\n");
        for l in &self.lines {
            s.push_str(l);
            s.push('\n');
        }
        let verdict = if self.failures == 0 { "PASS" } else { "FAIL" };
        let _ = writeln!(
            s,
            "result: {verdict} ({} checks, {} failed)",
            self.checks, self.failures
        );
        s
    }
}

/// What a command wrote and whether its assertions held.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub passed: bool,
    pub checks: usize,
    pub failures: usize,
    pub csv: PathBuf,
    pub report: PathBuf,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }
}
