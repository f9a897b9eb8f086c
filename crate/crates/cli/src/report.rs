//! Report rows shared by `fit`, `eval`, and `bench`.
//!
//! One row per run, in a fixed column order so reports diff cleanly:
//! `data,model,kl_pd,kl_pstar,basis,ms,seed,status`. Floats carry 17
//! significant digits; reruns differ only in the `ms` column.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use fsll_core::Result;

pub const REPORT_HEADER: &str = "data,model,kl_pd,kl_pstar,basis,ms,seed,status";

/// 17-significant-digit float formatting (exact `f64` round-trip).
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone)]
pub struct ReportRow {
    pub data: String,
    pub model: String,
    pub kl_pd: Option<f64>,
    pub kl_pstar: Option<f64>,
    pub basis: usize,
    pub ms: u64,
    pub seed: u64,
    pub status: String,
}

impl ReportRow {
    pub fn to_csv_line(&self) -> String {
        let opt = |v: &Option<f64>| v.map(fmt_float).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.data,
            self.model,
            opt(&self.kl_pd),
            opt(&self.kl_pstar),
            self.basis,
            self.ms,
            self.seed,
            // Commas would break the row; statuses are short phrases.
            self.status.replace(',', ";"),
        )
    }
}

pub fn write_report<P: AsRef<Path>>(path: P, rows: &[ReportRow]) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "{REPORT_HEADER}").unwrap();
    for row in rows {
        writeln!(out, "{}", row.to_csv_line()).unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}
