use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Long-format table, one observation per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<I, S>(&mut self, row: I)
    where
        I: IntoIterator<Item = S>,
        S: ToString,
    {
        let row: Vec<String> = row.into_iter().map(|v| v.to_string()).collect();
        debug_assert_eq!(row.len(), self.header.len(), "row width in table {}", self.name);
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i].as_str()).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub kind: String,
    pub config_hash: String,
    pub config: String,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    pub wall_clock_s: f64,
}

impl RunReport {
    /// True iff there is at least one check and all of them passed.
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "experiment: {}", self.kind);
        let _ = writeln!(s, "seed: {}", self.seed);
        let _ = writeln!(s, "config hash: {}", self.config_hash);
        let _ = writeln!(s, "wall clock: {:.2} s", self.wall_clock_s);
        let passed = self.checks.iter().filter(|c| c.passed).count();
        let _ = writeln!(s, "checks: {passed}/{} passed", self.checks.len());
        for c in &self.checks {
            let _ = writeln!(s, "  [{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        for t in &self.tables {
            let _ = writeln!(s, "table {}: {} rows", t.name, t.rows.len());
        }
        let _ = writeln!(s, "result: {}", if self.passed() { "PASS" } else { "FAIL" });
        let _ = writeln!(s, "--- config ---\n{}", self.config.trim_end());
        s
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    /// Writes `<table>.csv` per table, `summary.json` and `summary.txt`; returns the paths.
    pub fn render(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut out = Vec::new();
        for t in &self.tables {
            let p = dir.join(format!("{}.csv", t.name));
            std::fs::write(&p, t.to_csv()?)?;
            out.push(p);
        }
        let p = dir.join("summary.json");
        std::fs::write(&p, self.to_json()?)?;
        out.push(p);
        let p = dir.join("summary.txt");
        std::fs::write(&p, self.summary())?;
        out.push(p);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_suite_fails() {
        let r = RunReport {
            kind: "psi-check".into(),
            config_hash: "h".into(),
            config: "[experiment]\nkind = psi-check\n".into(),
            seed: 3,
            checks: vec![],
            tables: vec![],
            wall_clock_s: 0.0,
        };
        assert!(!r.passed());
        let s = r.summary();
        assert!(s.contains("checks: 0/0") && s.contains("kind = psi-check") && s.contains("seed: 3"));
    }

    #[test]
    fn csv_quotes_fields() {
        let mut t = Table::new("t", &["a", "b"]);
        t.push(["x,y", "1.5"]);
        assert_eq!(t.to_csv().unwrap(), "a,b\n\"x,y\",1.5\n");
        assert_eq!(t.column("b").unwrap(), vec!["1.5"]);
    }
}
