//! Convergence studies over a sequence of refinements and their text reports.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cases::case_by_id;
use crate::error::{Error, Result};
use crate::mesh::MeshFamily;
use crate::norms::{error_vs_projection, fill_rates, ErrorNorm, ErrorRow};
use crate::solver::{assemble_saddle, mean_value_check, solve_saddle, Discretization, SaddleSystem, SolverOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub case: u8,
    pub mesh: MeshFamily,
    pub k: usize,
    pub levels: Vec<usize>,
    #[serde(default = "default_exponent")]
    pub penalty_exponent: f64,
}

fn default_exponent() -> f64 {
    1.0
}

impl StudyConfig {
    pub fn new(case: u8, mesh: MeshFamily, k: usize, levels: Vec<usize>) -> Self {
        Self {
            case,
            mesh,
            k,
            levels,
            penalty_exponent: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        case_by_id(self.case)?;
        if self.k < 1 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if self.levels.is_empty() {
            return Err(Error::InvalidArgument("at least one level is required".into()));
        }
        let min = if self.mesh == MeshFamily::Poly { 2 } else { 1 };
        if self.levels[0] < min {
            return Err(Error::InvalidArgument(format!("{} meshes need n >= {min}", self.mesh)));
        }
        for w in self.levels.windows(2) {
            if w[1] != 2 * w[0] {
                return Err(Error::InvalidArgument(format!(
                    "levels must double: {} is followed by {}",
                    w[0], w[1]
                )));
            }
        }
        if !self.penalty_exponent.is_finite() {
            return Err(Error::InvalidArgument("penalty exponent must be finite".into()));
        }
        Ok(())
    }

    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            penalty_exponent: self.penalty_exponent,
            ..SolverOptions::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelDiagnostics {
    pub n: usize,
    pub unknowns: usize,
    pub residual: f64,
    pub condition: f64,
    pub mean_value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelFailure {
    pub n: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyReport {
    pub config: StudyConfig,
    pub rows: Vec<ErrorRow>,
    pub diagnostics: Vec<LevelDiagnostics>,
    pub failures: Vec<LevelFailure>,
}

impl StudyReport {
    pub fn row(&self, n: usize) -> Option<&ErrorRow> {
        self.rows.iter().find(|r| r.n == n)
    }
}

pub fn build_system(config: &StudyConfig, n: usize) -> Result<(Discretization, SaddleSystem)> {
    let case = case_by_id(config.case)?;
    let mesh = config.mesh.generate(n)?;
    let disc = Discretization::new(&mesh, config.k, config.options())?;
    let system = assemble_saddle(&disc, &case)?;
    Ok((disc, system))
}

pub fn run_level(config: &StudyConfig, n: usize) -> Result<(ErrorRow, LevelDiagnostics)> {
    let case = case_by_id(config.case)?;
    let (disc, system) = build_system(config, n)?;
    let sol = solve_saddle(&disc, &system)?;
    let row = ErrorRow {
        n,
        e_phi_energy: error_vs_projection(&disc, case.phi, &sol.phi, ErrorNorm::Energy)?,
        e_u_energy: error_vs_projection(&disc, case.u, &sol.u, ErrorNorm::Energy)?,
        e_phi_l2: error_vs_projection(&disc, case.phi, &sol.phi, ErrorNorm::L2)?,
        e_u_l2: error_vs_projection(&disc, case.u, &sol.u, ErrorNorm::L2)?,
        rates: None,
    };
    let diag = LevelDiagnostics {
        n,
        unknowns: system.n_phi + system.n_u,
        residual: sol.residual,
        condition: sol.condition,
        mean_value: mean_value_check(&disc, &sol, case.boundary_flux)?,
    };
    log::info!(
        "n={n}: {} unknowns, residual {:.2e}, condition {:.2e}, mean value {:.2e}",
        diag.unknowns,
        diag.residual,
        diag.condition,
        diag.mean_value
    );
    Ok((row, diag))
}

/// Runs every level; a failing level is recorded and skipped.
pub fn run_study(config: &StudyConfig) -> Result<StudyReport> {
    config.validate()?;
    let outcomes: Vec<(usize, Result<(ErrorRow, LevelDiagnostics)>)> =
        config.levels.par_iter().map(|&n| (n, run_level(config, n))).collect();
    let mut rows = Vec::new();
    let mut diagnostics = Vec::new();
    let mut failures = Vec::new();
    for (n, out) in outcomes {
        match out {
            Ok((r, d)) => {
                rows.push(r);
                diagnostics.push(d);
            }
            Err(e) => {
                log::error!("level n={n} failed: {e}");
                failures.push(LevelFailure {
                    n,
                    message: e.to_string(),
                });
            }
        }
    }
    fill_rates(&mut rows);
    Ok(StudyReport {
        config: config.clone(),
        rows,
        diagnostics,
        failures,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    #[value(alias = "markdown")]
    #[serde(alias = "markdown")]
    Md,
}

/// Five significant digits, two-digit signed exponent: `5.8675E-02`.
pub fn format_sci(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{x:.4E}");
    let (mant, exp) = s.split_once('E').expect("scientific format");
    let e: i32 = exp.parse().expect("exponent");
    format!("{mant}E{}{:02}", if e < 0 { '-' } else { '+' }, e.abs())
}

fn format_rate(r: Option<f64>) -> String {
    match r {
        Some(r) => format!("{r:.2}"),
        None => "--".into(),
    }
}

const CSV_HEADER: &str = "n,e_phi_energy,rate,e_u_energy,rate,e_phi_l2,rate,e_u_l2,rate";

fn cells(row: &ErrorRow) -> Vec<String> {
    let e = row.errors();
    let mut out = vec![row.n.to_string()];
    for c in 0..4 {
        out.push(format_sci(e[c]));
        out.push(format_rate(row.rates.map(|r| r[c])));
    }
    out
}

pub fn emit_report(report: &StudyReport, format: ReportFormat) -> String {
    let c = &report.config;
    let mut s = String::new();
    match format {
        ReportFormat::Csv => {
            writeln!(s, "# case={} mesh={} k={}", c.case, c.mesh, c.k).unwrap();
            for f in &report.failures {
                writeln!(s, "# failed n={}: {}", f.n, f.message).unwrap();
            }
            writeln!(s, "{CSV_HEADER}").unwrap();
            for r in &report.rows {
                writeln!(s, "{}", cells(r).join(",")).unwrap();
            }
        }
        ReportFormat::Md => {
            writeln!(s, "Example {}, {} mesh, P{} elements", c.case, c.mesh, c.k).unwrap();
            writeln!(s).unwrap();
            writeln!(s, "| n | phi energy | Rate | u energy | Rate | phi L2 | Rate | u L2 | Rate |").unwrap();
            writeln!(s, "|---|---|---|---|---|---|---|---|---|").unwrap();
            for r in &report.rows {
                writeln!(s, "| {} |", cells(r).join(" | ")).unwrap();
            }
            for f in &report.failures {
                writeln!(s, "\nLevel n={} failed: {}", f.n, f.message).unwrap();
            }
        }
    }
    s
}

fn parse_rate(cell: &str) -> std::result::Result<Option<f64>, String> {
    if cell == "--" {
        Ok(None)
    } else {
        cell.parse().map(Some).map_err(|e| format!("bad rate '{cell}': {e}"))
    }
}

/// Parses the CSV form of [`emit_report`].
pub fn parse_csv_report(text: &str, path: &Path) -> Result<StudyReport> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut config: Option<StudyConfig> = None;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut header_seen = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = i + 1;
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            let meta = meta.trim();
            if let Some(rest) = meta.strip_prefix("failed n=") {
                let (n, msg) = rest.split_once(':').ok_or_else(|| err(lineno, "bad failure line".into()))?;
                failures.push(LevelFailure {
                    n: n.trim().parse().map_err(|e| err(lineno, format!("bad level: {e}")))?,
                    message: msg.trim().to_string(),
                });
                continue;
            }
            let (mut case, mut mesh, mut k) = (None, None, None);
            for kv in meta.split_whitespace() {
                match kv.split_once('=') {
                    Some(("case", v)) => case = v.parse::<u8>().ok(),
                    Some(("mesh", v)) => mesh = v.parse::<MeshFamily>().ok(),
                    Some(("k", v)) => k = v.parse::<usize>().ok(),
                    _ => {}
                }
            }
            if let (Some(case), Some(mesh), Some(k)) = (case, mesh, k) {
                config = Some(StudyConfig::new(case, mesh, k, Vec::new()));
            }
            continue;
        }
        if !header_seen {
            if line != CSV_HEADER {
                return Err(err(lineno, format!("expected header '{CSV_HEADER}'")));
            }
            header_seen = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 9 {
            return Err(err(lineno, format!("expected 9 fields, found {}", f.len())));
        }
        let n = f[0].parse().map_err(|e| err(lineno, format!("bad n: {e}")))?;
        let mut e = [0.0; 4];
        let mut r = [None; 4];
        for c in 0..4 {
            e[c] = f[1 + 2 * c].parse().map_err(|x| err(lineno, format!("bad value '{}': {x}", f[1 + 2 * c])))?;
            r[c] = parse_rate(f[2 + 2 * c]).map_err(|m| err(lineno, m))?;
        }
        let rates = match r {
            [Some(a), Some(b), Some(c), Some(d)] => Some([a, b, c, d]),
            [None, None, None, None] => None,
            _ => return Err(err(lineno, "rates must be all present or all '--'".into())),
        };
        rows.push(ErrorRow {
            n,
            e_phi_energy: e[0],
            e_u_energy: e[1],
            e_phi_l2: e[2],
            e_u_l2: e[3],
            rates,
        });
    }
    let mut config = config.ok_or_else(|| err(1, "missing '# case=.. mesh=.. k=..' line".into()))?;
    let mut levels: Vec<usize> = rows.iter().map(|r| r.n).chain(failures.iter().map(|f| f.n)).collect();
    levels.sort_unstable();
    config.levels = levels;
    Ok(StudyReport {
        config,
        rows,
        diagnostics: Vec::new(),
        failures,
    })
}
