//! Published error tables and the comparison policy against them.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::MeshFamily;
use crate::study::StudyReport;

const TABLES: [&str; 8] = [
    include_str!("../data/table1.csv"),
    include_str!("../data/table2.csv"),
    include_str!("../data/table3.csv"),
    include_str!("../data/table4.csv"),
    include_str!("../data/table5.csv"),
    include_str!("../data/table6.csv"),
    include_str!("../data/table7.csv"),
    include_str!("../data/table8.csv"),
];

/// Rates within this distance of the printed rate pass.
pub const RATE_TOLERANCE: f64 = 0.2;
/// Absolute errors within this factor of the printed value pass.
pub const ABSOLUTE_FACTOR: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantity {
    PhiEnergy,
    UEnergy,
    PhiL2,
    UL2,
}

impl Quantity {
    pub const ALL: [Quantity; 4] = [Quantity::PhiEnergy, Quantity::UEnergy, Quantity::PhiL2, Quantity::UL2];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::PhiEnergy => "phi-energy",
            Quantity::UEnergy => "u-energy",
            Quantity::PhiL2 => "phi-L2",
            Quantity::UL2 => "u-L2",
        }
    }

    /// Energy errors of `φ` are reported but never decide the outcome.
    pub fn gating(self) -> bool {
        self != Quantity::PhiEnergy
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceRow {
    pub k: usize,
    pub n: usize,
    pub errors: [f64; 4],
    pub rates: [Option<f64>; 4],
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceTable {
    pub id: u8,
    pub case: u8,
    pub mesh: MeshFamily,
    pub rows: Vec<ReferenceRow>,
}

impl ReferenceTable {
    pub fn row(&self, k: usize, n: usize) -> Option<&ReferenceRow> {
        self.rows.iter().find(|r| r.k == k && r.n == n)
    }
}

fn parse_table(text: &str, id: u8) -> Result<ReferenceTable> {
    let path = Path::new("data").join(format!("table{id}.csv"));
    let err = |line: usize, message: String| Error::Parse {
        path: path.clone(),
        line,
        message,
    };
    let (mut case, mut mesh) = (None, None);
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            for kv in meta.split_whitespace() {
                match kv.split_once('=') {
                    Some(("case", v)) => case = v.parse::<u8>().ok(),
                    Some(("mesh", v)) => mesh = v.parse::<MeshFamily>().ok(),
                    _ => {}
                }
            }
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(err(i + 1, format!("expected 10 fields, found {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| err(i + 1, format!("bad number '{s}': {e}")));
        let mut errors = [0.0; 4];
        let mut rates = [None; 4];
        for c in 0..4 {
            errors[c] = num(f[2 + 2 * c])?;
            rates[c] = if f[3 + 2 * c] == "--" { None } else { Some(num(f[3 + 2 * c])?) };
        }
        rows.push(ReferenceRow {
            k: f[0].parse().map_err(|e| err(i + 1, format!("bad k: {e}")))?,
            n: f[1].parse().map_err(|e| err(i + 1, format!("bad n: {e}")))?,
            errors,
            rates,
        });
    }
    Ok(ReferenceTable {
        id,
        case: case.ok_or_else(|| err(1, "missing case".into()))?,
        mesh: mesh.ok_or_else(|| err(1, "missing mesh".into()))?,
        rows,
    })
}

pub fn reference_table(id: u8) -> Result<ReferenceTable> {
    let text = TABLES
        .get((id as usize).wrapping_sub(1))
        .ok_or_else(|| Error::InvalidArgument(format!("unknown table {id}; expected 1 to 8")))?;
    parse_table(text, id)
}

/// Table holding results for this example and mesh family, if any.
pub fn table_for(case: u8, mesh: MeshFamily) -> Option<u8> {
    (1..=8).find(|&id| reference_table(id).map(|t| t.case == case && t.mesh == mesh).unwrap_or(false))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckKind {
    Rate,
    Absolute,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub n: usize,
    pub quantity: Quantity,
    pub kind: CheckKind,
    pub observed: f64,
    pub reference: f64,
    pub pass: bool,
    pub gating: bool,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = match (self.pass, self.gating) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "INFO",
        };
        match self.kind {
            CheckKind::Rate => write!(
                f,
                "{status} n={} {} rate {:.2} vs {:.2} (tolerance {RATE_TOLERANCE})",
                self.n,
                self.quantity.name(),
                self.observed,
                self.reference
            ),
            CheckKind::Absolute => write!(
                f,
                "{status} n={} {} error {:.4e} vs {:.4e} (factor {ABSOLUTE_FACTOR})",
                self.n,
                self.quantity.name(),
                self.observed,
                self.reference
            ),
        }
    }
}

/// Tolerance policy: rates within [`RATE_TOLERANCE`]; absolute errors within
/// [`ABSOLUTE_FACTOR`] on triangular and rectangular meshes only.
pub fn compare_to_reference(report: &StudyReport, table_id: u8) -> Result<Vec<Verdict>> {
    let table = reference_table(table_id)?;
    let c = &report.config;
    if table.case != c.case || table.mesh != c.mesh {
        return Err(Error::ReferenceMismatch(format!(
            "table {} holds example {} on {} meshes, report is example {} on {} meshes",
            table.id, table.case, table.mesh, c.case, c.mesh
        )));
    }
    let absolute = c.mesh != MeshFamily::Poly;
    let mut out = Vec::new();
    for row in &report.rows {
        let Some(reference) = table.row(c.k, row.n) else {
            continue;
        };
        let errors = row.errors();
        for (q, quantity) in Quantity::ALL.into_iter().enumerate() {
            if absolute {
                let ratio = errors[q] / reference.errors[q];
                out.push(Verdict {
                    n: row.n,
                    quantity,
                    kind: CheckKind::Absolute,
                    observed: errors[q],
                    reference: reference.errors[q],
                    pass: ratio.is_finite() && ratio <= ABSOLUTE_FACTOR && ratio >= 1.0 / ABSOLUTE_FACTOR,
                    gating: quantity.gating(),
                });
            }
            if let (Some(rates), Some(ref_rate)) = (row.rates, reference.rates[q]) {
                out.push(Verdict {
                    n: row.n,
                    quantity,
                    kind: CheckKind::Rate,
                    observed: rates[q],
                    reference: ref_rate,
                    pass: (rates[q] - ref_rate).abs() <= RATE_TOLERANCE,
                    gating: quantity.gating(),
                });
            }
        }
    }
    if out.is_empty() {
        return Err(Error::ReferenceMismatch(format!(
            "no level of the report (k={}, n={:?}) appears in table {}",
            c.k,
            report.rows.iter().map(|r| r.n).collect::<Vec<_>>(),
            table.id
        )));
    }
    Ok(out)
}

pub fn all_gating_pass(verdicts: &[Verdict]) -> bool {
    verdicts.iter().all(|v| v.pass || !v.gating)
}
