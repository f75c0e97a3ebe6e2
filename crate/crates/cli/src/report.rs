use std::time::Duration;

use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
}

/// Outcome of one command: check verdicts, free-form data and a provenance log.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub file: String,
    pub system: String,
    pub seed: u64,
    pub version: &'static str,
    pub checks: Vec<Check>,
    pub data: Map<String, Value>,
    pub provenance: Vec<String>,
    pub elapsed_ms: f64,
}

impl RunReport {
    pub fn new(command: &str, file: &str, system: &str, seed: u64) -> Self {
        RunReport {
            command: command.into(),
            file: file.into(),
            system: system.into(),
            seed,
            version: env!("CARGO_PKG_VERSION"),
            checks: Vec::new(),
            data: Map::new(),
            provenance: Vec::new(),
            elapsed_ms: 0.0,
        }
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>, residual: Option<f64>) {
        self.checks.push(Check { name: name.into(), passed, detail: detail.into(), residual });
    }

    pub fn set(&mut self, key: &str, v: impl Serialize) {
        self.data.insert(key.into(), serde_json::to_value(v).unwrap_or(Value::Null));
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn finish(&mut self, elapsed: Duration) {
        self.elapsed_ms = elapsed.as_secs_f64() * 1e3;
    }

    pub fn render(&self) -> String {
        let mut out = format!("{} {} ({})\n", self.command, self.file, self.system);
        for (k, v) in &self.data {
            match v {
                Value::String(s) => out.push_str(&format!("  {k}: {s}\n")),
                Value::Number(n) => out.push_str(&format!("  {k}: {n}\n")),
                _ => out.push_str(&format!("  {k}: {v}\n")),
            }
        }
        if !self.provenance.is_empty() {
            out.push_str("  provenance:\n");
            for p in &self.provenance {
                out.push_str(&format!("    {p}\n"));
            }
        }
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            let res = c.residual.map(|r| format!(" [residual {r:.2e}]")).unwrap_or_default();
            out.push_str(&format!("{tag} {}: {}{res}\n", c.name, c.detail));
        }
        let verdict = if self.passed() { "ok" } else { "FAILED" };
        out.push_str(&format!("{verdict} ({} checks, {:.0} ms, seed {})\n", self.checks.len(), self.elapsed_ms, self.seed));
        out
    }
}
