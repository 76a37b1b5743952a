//! Output files. Floats are written in shortest round-trip form so a
//! value read back parses to the same `f64`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use continuity_core::bounds::{BoundCertificate, Verdict};
use continuity_core::manufacturing::ClosedLoopRun;
use continuity_core::SolutionField;
use serde::Serialize;

use crate::error::{Error, Result};

/// Shortest representation that parses back to `x`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

/// Empty cell for `None`.
pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush().map_err(|source| Error::Io {
        action: "write",
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|source| Error::Io {
        action: "write",
        path: path.to_path_buf(),
        source,
    })
}

/// Every node of `field` as `t, x, <column>`.
pub fn write_field(path: &Path, field: &SolutionField, column: &str) -> Result<()> {
    let grid = *field.grid();
    let rows = (0..grid.rows()).flat_map(move |k| {
        let t = grid.t(k);
        field.row(k).iter().enumerate().map(move |(j, &v)| vec![num(t), num(grid.x(j)), num(v)])
    });
    write_csv(path, &["t", "x", column], rows)
}

/// One sample of a field file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub t: f64,
    pub x: f64,
    pub value: f64,
}

/// Reads a file written by [`write_field`].
pub fn read_field(path: &Path) -> Result<Vec<FieldSample>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for record in r.records() {
        let record = record?;
        let cell = |i: usize| -> Result<f64> {
            record
                .get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Unsupported(format!("{}: malformed row {:?}", path.display(), record)))
        };
        out.push(FieldSample {
            t: cell(0)?,
            x: cell(1)?,
            value: cell(2)?,
        });
    }
    Ok(out)
}

/// Load, speed and feedback of a closed-loop run as `t, W, v, u`.
pub fn write_loop(path: &Path, run: &ClosedLoopRun) -> Result<()> {
    let grid = *run.rho.grid();
    let rows = (0..grid.rows()).map(|k| {
        vec![
            num(grid.t(k)),
            num(run.load[k]),
            num(run.velocity[k]),
            num(run.control[k]),
        ]
    });
    write_csv(path, &["t", "W", "v", "u"], rows)
}

/// Every certificate cell. `rhs` and `margin` are empty where `μ` is not
/// admissible.
pub fn write_certificate_cells(path: &Path, certs: &[BoundCertificate]) -> Result<()> {
    let rows = certs.iter().flat_map(|c| {
        c.cells.iter().map(move |cell| {
            vec![
                c.estimate.label().to_string(),
                c.order.to_string(),
                num(c.mu),
                num(cell.t),
                num(cell.lhs),
                opt(cell.rhs),
                opt(cell.margin()),
            ]
        })
    });
    write_csv(path, &["estimate", "p", "mu", "t", "lhs", "rhs", "margin"], rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSummary {
    pub nx: usize,
    pub dt: f64,
    pub horizon: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Compatibility {
    pub value_residual: f64,
    pub slope_residual: f64,
    pub tolerance: f64,
    pub passes: bool,
    /// Regularity class for transport problems.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regularity: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateSummary {
    pub estimate: String,
    pub p: String,
    pub mu: f64,
    pub verdict: String,
    /// `None` when `μ` is never admissible.
    pub worst_margin: Option<f64>,
    /// Fraction of grid times at which `μ` is admissible.
    pub valid_fraction: f64,
}

impl CertificateSummary {
    pub fn new(cert: &BoundCertificate) -> CertificateSummary {
        let valid = cert.cells.iter().filter(|c| c.rhs.is_some()).count();
        CertificateSummary {
            estimate: cert.estimate.label().to_string(),
            p: cert.order.to_string(),
            mu: cert.mu,
            verdict: cert.verdict.label().to_string(),
            worst_margin: cert.worst_margin(),
            valid_fraction: valid as f64 / cert.cells.len().max(1) as f64,
        }
    }
}

/// Contents of `<name>_cert.json`.
#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub scenario: String,
    pub problem: String,
    pub grid: GridSummary,
    pub compatibility: Compatibility,
    /// Whether no certificate failed. Certificates whose `μ` is never
    /// admissible do not count as failures.
    pub all_passed: bool,
    pub certificates: Vec<CertificateSummary>,
    /// `"<estimate> p=<p>"` to `μ` to whether `μ` is admissible at every time.
    pub mu_validity: BTreeMap<String, BTreeMap<String, bool>>,
}

impl CertificateReport {
    pub fn new(
        scenario: &str,
        problem: &str,
        grid: GridSummary,
        compatibility: Compatibility,
        certs: &[BoundCertificate],
    ) -> CertificateReport {
        let mut mu_validity: BTreeMap<String, BTreeMap<String, bool>> = BTreeMap::new();
        for c in certs {
            mu_validity
                .entry(format!("{} p={}", c.estimate.label(), c.order))
                .or_default()
                .insert(num(c.mu), c.mu_valid_everywhere());
        }
        CertificateReport {
            scenario: scenario.to_string(),
            problem: problem.to_string(),
            grid,
            compatibility,
            all_passed: certs.iter().all(|c| c.verdict != Verdict::Fail),
            certificates: certs.iter().map(CertificateSummary::new).collect(),
            mu_validity,
        }
    }
}

/// `dir/<name>_<suffix>`.
pub fn artifact(dir: &Path, name: &str, suffix: &str) -> PathBuf {
    dir.join(format!("{name}_{suffix}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use continuity_core::transport::{Component, Quantity};
    use continuity_core::Grid;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 1e300, 0.0] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(opt(None), "");
    }

    #[test]
    fn field_files_read_back_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let grid = Grid::new(4, 0.1, 0.3).unwrap();
        let values: Vec<f64> = (0..grid.rows() * grid.nodes()).map(|i| (i as f64).sqrt() / 7.0).collect();
        let field = SolutionField::from_rows(grid, values.clone(), Component::Full, Quantity::State);
        let path = dir.path().join("w.csv");
        write_field(&path, &field, "w").unwrap();
        let back = read_field(&path).unwrap();
        assert_eq!(back.len(), values.len());
        for (s, v) in back.iter().zip(&values) {
            assert_eq!(s.value, *v);
        }
        assert_eq!(back[grid.nodes()].t, grid.t(1));
        assert_eq!(back[1].x, grid.x(1));
    }
}
