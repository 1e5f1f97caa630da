//! CSV output of snapshots and study tables.
//!
//! Numbers are printed with 17 significant digits so files round-trip
//! `f64` exactly and stay byte-stable between identical runs. Files are
//! written to a temporary sibling and renamed into place.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::RunReport;
use crate::mesh::Grid;
use crate::relax::Snapshot;

/// Columns of `report.csv`.
pub const REPORT_HEADER: &str = "scheme,m,error_l1,error_l2,rate_l1,rate_l2,error_dl2,rate_dl2,steps";
/// Columns of `timing.csv`; wall time lives here so reports stay deterministic.
pub const TIMING_HEADER: &str = "scheme,m,wall_time";

/// `x` with 17 significant digits.
pub fn number(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidParameter(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(io_error(path, e));
    }
    Ok(())
}

/// `# t=<time>`, a header of coordinates and field names, then one row per
/// interior cell (x fastest in 2D).
pub fn snapshot_csv(snap: &Snapshot) -> String {
    let grid: Grid = *snap.grid();
    let mut s = format!("# t={}\n", number(snap.t));
    let coords: &[&str] = if grid.dim() == 1 { &["x"] } else { &["x", "y"] };
    let header: Vec<&str> = coords
        .iter()
        .copied()
        .chain(snap.names.iter().map(String::as_str))
        .collect();
    s.push_str(&header.join(","));
    s.push('\n');
    for i in grid.interior_indices() {
        let mut row: Vec<String> = grid.coords(i).into_iter().map(number).collect();
        row.extend(snap.fields.iter().map(|f| number(f.values()[i])));
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

fn optional(x: Option<f64>) -> String {
    x.map(number).unwrap_or_default()
}

/// One row per grid of every report; the first row of each has empty
/// rate columns.
pub fn report_csv(reports: &[RunReport]) -> String {
    let mut s = format!("{REPORT_HEADER}\n");
    for rep in reports {
        for r in &rep.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                rep.label,
                r.m,
                number(r.error_l1),
                number(r.error_l2),
                optional(r.rate_l1),
                optional(r.rate_l2),
                number(r.error_dl2),
                optional(r.rate_dl2),
                r.steps
            );
        }
    }
    s
}

pub fn timing_csv(reports: &[RunReport]) -> String {
    let mut s = format!("{TIMING_HEADER}\n");
    for rep in reports {
        for r in &rep.rows {
            let _ = writeln!(s, "{},{},{}", rep.label, r.m, number(r.wall_time));
        }
    }
    s
}

/// A parsed CSV file: optional leading `# ...` comment, header, rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub comment: Option<String>,
    pub columns: Vec<String>,
    /// Cells as text; empty cells stay empty.
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |line: usize, message: String| Error::Config { line, message };
        let mut lines = text.lines().enumerate().peekable();
        let comment = match lines.peek() {
            Some((_, l)) if l.starts_with('#') => {
                let c = l[1..].trim().to_owned();
                lines.next();
                Some(c)
            }
            _ => None,
        };
        let (_, header) = lines.next().ok_or_else(|| bad(1, "missing header".into()))?;
        let columns: Vec<String> = header.split(',').map(str::to_owned).collect();
        let mut rows = Vec::new();
        for (k, line) in lines {
            let cells: Vec<String> = line.split(',').map(str::to_owned).collect();
            if cells.len() != columns.len() {
                return Err(bad(
                    k + 1,
                    format!("{} cells, header has {}", cells.len(), columns.len()),
                ));
            }
            rows.push(cells);
        }
        Ok(Table { comment, columns, rows })
    }

    /// Numeric values of a column; empty cells become `None`.
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k].parse().ok()).collect())
    }

    /// Time stamp of a snapshot file (`# t=<time>`).
    pub fn time(&self) -> Option<f64> {
        self.comment.as_deref()?.strip_prefix("t=")?.parse().ok()
    }
}
