//! Report rendering: `report.json` plus one CSV table per claim.
//!
//! JSON layout (keys in this order):
//!
//! ```text
//! { "toolkit": "flowaudit", "version": "<crate version>",
//!   "config_hash": "<sha256 of the canonical settings JSON>",
//!   "claims": [ { "id", "statement", "inputs", "levels": [ { "dims", "h",
//!                 "max", "l2", "metric" } ], "max", "l2", "order",
//!                 "metric", "tolerance", "verdict", "notes" } ] }
//! ```
//!
//! Non-finite numbers are written as `null`. Nothing time- or
//! host-dependent is recorded, so identical inputs give identical bytes.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{AuditError, ClaimResult};

pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Serialize)]
pub struct Report<'a> {
    pub toolkit: &'static str,
    pub version: &'static str,
    pub config_hash: String,
    pub claims: &'a [ClaimResult],
}

fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn csv_value(x: f64) -> String {
    if x.is_finite() {
        x.to_string()
    } else {
        String::new()
    }
}

/// Writes `report.json` and `<claim id>.csv` files into `dir`, returning the
/// report path. `config` is the canonical configuration text to hash.
pub fn render_report(results: &[ClaimResult], config: &str, dir: &Path) -> Result<PathBuf, AuditError> {
    if results.is_empty() {
        return Err(AuditError::Input("nothing to report".into()));
    }
    std::fs::create_dir_all(dir)?;
    let report = Report {
        toolkit: "flowaudit",
        version: env!("CARGO_PKG_VERSION"),
        config_hash: sha256_hex(config),
        claims: results,
    };
    let path = dir.join(REPORT_FILE);
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    std::fs::write(&path, json)?;
    for r in results {
        let mut out = std::io::BufWriter::new(std::fs::File::create(dir.join(format!("{}.csv", r.id)))?);
        writeln!(out, "{}", r.table.header.join(","))?;
        for row in &r.table.rows {
            writeln!(
                out,
                "{}",
                row.iter().map(|x| csv_value(*x)).collect::<Vec<_>>().join(",")
            )?;
        }
        out.flush()?;
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audit::ClaimVerdict;

    #[test]
    fn empty_result_renders_as_not_applicable() {
        let mut r = ClaimResult::new("empty", "nothing", 0.1);
        r.conclude(Vec::new());
        assert_eq!(r.verdict, ClaimVerdict::NotApplicable);
        let dir = std::env::temp_dir().join(format!("flowaudit-report-{}", std::process::id()));
        let path = render_report(&[r], "cfg", &dir).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert!(text.contains("\"NOT_APPLICABLE\""));
        assert!(text.contains(&sha256_hex("cfg")));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(
            sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
