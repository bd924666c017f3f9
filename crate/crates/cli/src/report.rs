//! Run reports: tables, fitted slopes, threshold checks and the content hash.

use crate::config::Config;
use cgolab::grid::Container;
use cgolab::quad::loglog_slope;
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::path::Path;
use std::time::Instant;

/// JSON has no NaN; serde_json writes it as `null`.
fn nan_if_null<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TableRef {
    pub name: String,
    pub file: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Slope {
    pub name: String,
    #[serde(deserialize_with = "nan_if_null")]
    pub value: f64,
    /// 95% interval of the least-squares fit; absent with fewer than three points.
    pub ci95: Option<[f64; 2]>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    #[serde(deserialize_with = "nan_if_null")]
    pub value: f64,
    pub rule: String,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub tag: String,
    pub config: Config,
    pub tables: Vec<TableRef>,
    pub fields: Vec<TableRef>,
    pub slopes: Vec<Slope>,
    pub checks: Vec<Check>,
    pub details: Value,
    pub passed: bool,
    pub wall_clock: Vec<Stage>,
    pub hash: String,
}

impl Report {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn slope(&self, name: &str) -> Option<&Slope> {
        self.slopes.iter().find(|s| s.name == name)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

/// Collects the pieces of a report while an experiment runs and writes the
/// files under the output directory.
pub struct Builder {
    config: Config,
    out: std::path::PathBuf,
    tables: Vec<TableRef>,
    fields: Vec<TableRef>,
    slopes: Vec<Slope>,
    checks: Vec<Check>,
    details: serde_json::Map<String, Value>,
    stages: Vec<Stage>,
    clock: Instant,
}

impl Builder {
    pub fn new(config: &Config) -> std::io::Result<Self> {
        let out = config.output_dir.clone();
        std::fs::create_dir_all(out.join("fields"))?;
        Ok(Builder {
            config: config.clone(),
            out,
            tables: Vec::new(),
            fields: Vec::new(),
            slopes: Vec::new(),
            checks: Vec::new(),
            details: serde_json::Map::new(),
            stages: Vec::new(),
            clock: Instant::now(),
        })
    }

    /// Closes the current wall-clock stage.
    pub fn stage(&mut self, name: &str) {
        let now = Instant::now();
        self.stages.push(Stage { name: name.into(), seconds: (now - self.clock).as_secs_f64() });
        self.clock = now;
    }

    pub fn table(&mut self, name: &str, csv: String) -> std::io::Result<()> {
        let file = format!("{name}.csv");
        std::fs::write(self.out.join(&file), &csv)?;
        self.tables.push(TableRef { name: name.into(), file, sha256: sha256(csv.as_bytes()) });
        Ok(())
    }

    pub fn field(&mut self, name: &str, c: &Container) -> cgolab::Result<()> {
        let file = format!("fields/{name}.cgof");
        c.write(&self.out.join(&file))?;
        self.fields.push(TableRef { name: name.into(), file, sha256: sha256(&c.to_bytes()) });
        Ok(())
    }

    pub fn slope(&mut self, name: &str, value: f64, half_width: f64) {
        let ci95 = half_width.is_finite().then(|| [value - half_width, value + half_width]);
        self.slopes.push(Slope { name: name.into(), value, ci95 });
    }

    /// Fits `log y` against `log x` and records the slope with its interval.
    pub fn fit(&mut self, name: &str, x: &[f64], y: &[f64]) -> f64 {
        if x.len() < 2 || y.iter().any(|&v| !(v > 0.0)) {
            self.slopes.push(Slope { name: name.into(), value: f64::NAN, ci95: None });
            return f64::NAN;
        }
        let (s, hw) = loglog_slope(x, y);
        self.slope(name, s, hw);
        s
    }

    pub fn at_most(&mut self, name: &str, value: f64, limit: f64) {
        self.push(name, value, format!("<= {limit}"), value <= limit);
    }

    pub fn at_least(&mut self, name: &str, value: f64, limit: f64) {
        self.push(name, value, format!(">= {limit}"), value >= limit);
    }

    pub fn within(&mut self, name: &str, value: f64, target: f64, tol: f64) {
        self.push(name, value, format!("{target} ± {tol}"), (value - target).abs() <= tol);
    }

    pub fn push(&mut self, name: &str, value: f64, rule: String, passed: bool) {
        self.checks.push(Check { name: name.into(), value, rule, passed });
    }

    pub fn detail(&mut self, key: &str, v: impl Serialize) {
        self.details.insert(key.into(), serde_json::to_value(v).expect("details serialize"));
    }

    pub fn finish(mut self) -> std::io::Result<Report> {
        self.stage("write");
        let spec = self.config.spec();
        let mut report = Report {
            experiment: spec.name.into(),
            tag: spec.tag.into(),
            passed: self.checks.iter().all(|c| c.passed),
            config: self.config,
            tables: self.tables,
            fields: self.fields,
            slopes: self.slopes,
            checks: self.checks,
            details: Value::Object(self.details),
            wall_clock: self.stages,
            hash: String::new(),
        };
        report.hash = content_hash(&report);
        let text = serde_json::to_string_pretty(&report).expect("report serializes");
        std::fs::write(self.out.join("report.json"), text + "\n")?;
        Ok(report)
    }
}

/// SHA-256 of the canonical report JSON without timings, the hash itself and
/// the output location.
pub fn content_hash(report: &Report) -> String {
    let mut v = serde_json::to_value(report).expect("report serializes");
    let obj = v.as_object_mut().unwrap();
    obj.remove("wall_clock");
    obj.remove("hash");
    if let Some(Value::Object(c)) = obj.get_mut("config") {
        c.remove("output_dir");
    }
    sha256(&serde_json::to_vec(&v).expect("canonical JSON"))
}

/// Reads a report back from `dir/report.json`.
pub fn read(dir: &Path) -> std::io::Result<Report> {
    let text = std::fs::read_to_string(dir.join("report.json"))?;
    serde_json::from_str(&text).map_err(std::io::Error::other)
}
