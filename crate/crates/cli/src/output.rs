//! CSV files with a `#` comment header that echoes the full configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::config::RunConfig;
use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultEnvelope {
    pub command: String,
    pub schema_version: u32,
    pub config: BTreeMap<String, String>,
    /// Wall-clock seconds; the only field allowed to differ between reruns.
    pub elapsed_s: f64,
    /// Derived scalars (`key = value` header lines).
    pub results: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ResultEnvelope {
    pub fn new(command: &str, cfg: &RunConfig, columns: &[&str]) -> Self {
        Self {
            command: command.into(),
            schema_version: SCHEMA_VERSION,
            config: cfg.echo().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            elapsed_s: 0.0,
            results: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn result(&mut self, key: &str, value: impl ToString) {
        self.results.push((key.into(), value.to_string()));
    }

    pub fn row(&mut self, values: Vec<String>) {
        debug_assert_eq!(values.len(), self.columns.len());
        self.rows.push(values);
    }

    pub fn result_value(&self, key: &str) -> Option<&str> {
        self.results.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Column names and rows only; identical across thread counts.
    pub fn data_section(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# reslab {}", self.command);
        let _ = writeln!(s, "# schema_version = {}", self.schema_version);
        for (k, v) in &self.config {
            let _ = writeln!(s, "# config.{k} = {v}");
        }
        let _ = writeln!(s, "# elapsed_s = {:.3}", self.elapsed_s);
        for (k, v) in &self.results {
            let _ = writeln!(s, "# result.{k} = {v}");
        }
        s.push_str(&self.data_section());
        s
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut env = Self::default();
        let mut lines = text.lines().peekable();
        while let Some(line) = lines.peek() {
            let Some(body) = line.strip_prefix('#') else { break };
            let body = body.trim();
            if let Some(cmd) = body.strip_prefix("reslab ") {
                env.command = cmd.trim().into();
            } else if let Some((k, v)) = body.split_once(" = ") {
                let v = v.trim().to_string();
                if k == "schema_version" {
                    env.schema_version = v.parse().map_err(|_| CliError::Config(format!("bad schema version {v}")))?;
                } else if k == "elapsed_s" {
                    env.elapsed_s = v.parse().unwrap_or(0.0);
                } else if let Some(key) = k.strip_prefix("config.") {
                    env.config.insert(key.into(), v);
                } else if let Some(key) = k.strip_prefix("result.") {
                    env.results.push((key.into(), v));
                }
            }
            lines.next();
        }
        if env.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                env.schema_version
            )));
        }
        let Some(header) = lines.next() else {
            return Err(CliError::Config("missing column header".into()));
        };
        env.columns = header.split(',').map(str::to_string).collect();
        for (no, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<String> = line.split(',').map(str::to_string).collect();
            if row.len() != env.columns.len() {
                return Err(CliError::Config(format!(
                    "row {}: {} fields, expected {}",
                    no + 1,
                    row.len(),
                    env.columns.len()
                )));
            }
            env.rows.push(row);
        }
        Ok(env)
    }

    /// The configuration the file was produced with.
    pub fn run_config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        for (k, v) in &self.config {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn column(&self, name: &str) -> Result<usize, CliError> {
        self.columns.iter().position(|c| c == name).ok_or_else(|| CliError::Config(format!("missing column `{name}`")))
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_parse_round_trip() {
        let cfg = RunConfig::default();
        let mut env = ResultEnvelope::new("demo", &cfg, &["a", "b"]);
        env.result("slope", 2.5);
        env.row(vec![fmt_f64(0.1), fmt_f64(-3e-17)]);
        env.elapsed_s = 1.25;
        let back = ResultEnvelope::parse(&env.render()).unwrap();
        assert_eq!(back, env);
        assert_eq!(back.run_config().unwrap(), cfg);
        assert_eq!(back.rows[0][1].parse::<f64>().unwrap(), -3e-17);
    }

    #[test]
    fn wrong_schema_is_rejected() {
        let text = "# reslab demo\n# schema_version = 99\na\n";
        assert!(ResultEnvelope::parse(text).is_err());
    }
}
