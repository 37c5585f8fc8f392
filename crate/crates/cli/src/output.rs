use std::fs;
use std::path::Path;

use serde_json::{json, Value};

pub const VERSION: &str = env!("EAL_VERSION");

pub const FLOOR_ZERO: &str = "floors-below-domain-start-are-zero";
pub const SUMMATION: &str = "block-kahan-pairwise-summation";
pub const SPLITMIX: &str = "splitmix64-start-points";
pub const CONSTANTS: &str = "symbolic-constants-in-double-double";
pub const WINDOW: &str = "window-normalization-selected-by-calibration";
pub const EIGEN: &str = "eigen-match-tolerance-1e-9";
pub const GRID_TAIL: &str = "class-membership-from-grid-tail";
pub const DIRECT_COUNT: &str = "occupancy-counted-directly";
pub const SHIFT: &str = "invariance-shift-p-for-rational-slope";

/// Run-level metadata repeated on every CSV row and in the sidecar.
#[derive(Clone, Debug)]
pub struct Meta {
    pub command: &'static str,
    pub seed: Option<u64>,
    pub config_hash: String,
    pub decisions: Vec<&'static str>,
}

impl Meta {
    pub fn add(&mut self, decision: &'static str) {
        if !self.decisions.contains(&decision) {
            self.decisions.push(decision);
        }
    }
}

pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Shortest round-trip form, switching to exponent notation outside
/// `[1e-4, 1e15)`.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn write(out: &Path, meta: &Meta, table: &Table, details: Value) -> Result<(), String> {
    fs::create_dir_all(out).map_err(|e| format!("cannot create {}: {e}", out.display()))?;
    let csv_path = out.join(format!("{}.csv", meta.command));
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| format!("{}: {e}", csv_path.display()))?;
    let decisions = meta.decisions.join(";");
    let mut header: Vec<&str> = table.header.clone();
    header.extend(["config_hash", "version", "decisions"]);
    w.write_record(&header).map_err(|e| e.to_string())?;
    for row in &table.rows {
        let mut r: Vec<&str> = row.iter().map(String::as_str).collect();
        r.extend([meta.config_hash.as_str(), VERSION, decisions.as_str()]);
        w.write_record(&r).map_err(|e| e.to_string())?;
    }
    w.flush().map_err(|e| e.to_string())?;
    let sidecar = json!({
        "command": meta.command,
        "seed": meta.seed,
        "config_hash": meta.config_hash,
        "version": VERSION,
        "decisions": meta.decisions,
        "rows": table.rows.len(),
        "columns": header,
        "details": details,
    });
    let json_path = out.join(format!("{}.json", meta.command));
    let mut text = serde_json::to_string_pretty(&sidecar).map_err(|e| e.to_string())?;
    text.push('\n');
    fs::write(&json_path, text).map_err(|e| format!("{}: {e}", json_path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.0, 1.0, -0.25, 1e-12, 3.5e20, 0.1 + 0.2, f64::MIN_POSITIVE] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(1e-12), "1e-12");
        assert_eq!(num(0.5), "0.5");
    }
}
