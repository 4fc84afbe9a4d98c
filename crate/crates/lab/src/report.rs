//! Report assembly and emission. The CSV and JSON bytes are a pure function
//! of (resolved config, thread count, build): the wall clock goes to stdout
//! only, and the run timestamp appears only in the output file names.

use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use gp_lab::error::Result;
use gp_lab::fit::LineFit;
use serde_json::{json, Map, Value};

use crate::config::Config;

/// Version + short commit hash of the producing binary.
pub const BUILD_ID: &str = concat!(env!("CARGO_PKG_VERSION"), "+", env!("LAB_GIT_HASH"));

/// One pass/fail criterion with its measured value and the threshold it was
/// held against (kept as display text so the report is self-describing).
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub threshold: String,
    pub pass: bool,
}

impl Check {
    pub fn le(name: &'static str, value: f64, limit: f64) -> Self {
        Check { name, value, threshold: format!("<= {limit:e}"), pass: value <= limit }
    }

    pub fn ge(name: &'static str, value: f64, limit: f64) -> Self {
        Check { name, value, threshold: format!(">= {limit:e}"), pass: value >= limit }
    }

    pub fn positive(name: &'static str, value: f64) -> Self {
        Check { name, value, threshold: "> 0".into(), pass: value > 0.0 }
    }

    pub fn in_range(name: &'static str, value: f64, lo: f64, hi: f64) -> Self {
        Check {
            name,
            value,
            threshold: format!("in [{lo}, {hi}]"),
            pass: value >= lo && value <= hi,
        }
    }
}

pub struct Report {
    pub experiment: &'static str,
    pub schema_version: u32,
    pub columns: &'static [&'static str],
    pub rows: Vec<Vec<String>>,
    pub fits: Vec<(&'static str, LineFit)>,
    pub checks: Vec<Check>,
    /// Experiment-specific summary fields merged into the JSON root.
    pub extra: Map<String, Value>,
    /// (file name suffix, contents) pairs written next to the CSV/JSON.
    pub checkpoints: Vec<(String, String)>,
}

impl Report {
    pub fn new(spec: &crate::config::ExperimentSpec, columns: &'static [&'static str]) -> Self {
        Report {
            experiment: spec.name,
            schema_version: spec.schema_version,
            columns,
            rows: Vec::new(),
            fits: Vec::new(),
            checks: Vec::new(),
            extra: Map::new(),
            checkpoints: Vec::new(),
        }
    }

    pub fn push_row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Shortest-roundtrip scientific notation: deterministic and lossless.
pub fn cell(x: f64) -> String {
    format!("{x:e}")
}

fn render_csv(r: &Report) -> String {
    let mut s = String::from("schema_version");
    for c in r.columns {
        s.push(',');
        s.push_str(c);
    }
    s.push('\n');
    for row in &r.rows {
        s.push_str(&r.schema_version.to_string());
        for cell in row {
            s.push(',');
            s.push_str(cell);
        }
        s.push('\n');
    }
    s
}

fn render_json(r: &Report, cfg: &Config, threads: usize) -> String {
    let mut root = Map::new();
    root.insert("experiment".into(), json!(r.experiment));
    root.insert("schema_version".into(), json!(r.schema_version));
    root.insert("build".into(), json!(BUILD_ID));
    root.insert("threads".into(), json!(threads));
    let config: Map<String, Value> =
        cfg.echo().iter().map(|(k, v)| (k.clone(), json!(v))).collect();
    root.insert("config".into(), Value::Object(config));
    root.insert("columns".into(), json!(r.columns));
    root.insert("rows".into(), json!(r.rows));
    let fits: Map<String, Value> = r
        .fits
        .iter()
        .map(|(name, f)| {
            (
                name.to_string(),
                json!({ "slope": f.slope, "intercept": f.intercept, "r_squared": f.r_squared }),
            )
        })
        .collect();
    root.insert("fits".into(), Value::Object(fits));
    let checks: Vec<Value> = r
        .checks
        .iter()
        .map(|c| json!({ "name": c.name, "value": c.value, "threshold": c.threshold, "pass": c.pass }))
        .collect();
    root.insert("checks".into(), json!(checks));
    root.insert("pass".into(), json!(r.pass()));
    for (k, v) in &r.extra {
        root.insert(k.clone(), v.clone());
    }
    let mut text = serde_json::to_string_pretty(&Value::Object(root)).expect("static structure");
    text.push('\n');
    text
}

/// Write `<outdir>/<experiment>-<timestamp>.{csv,json}` plus any checkpoint
/// files; returns the written paths in that order.
pub fn write_outputs(r: &Report, cfg: &Config, threads: usize) -> Result<Vec<PathBuf>> {
    let outdir = PathBuf::from(cfg.raw("outdir").unwrap_or("out"));
    std::fs::create_dir_all(&outdir)?;
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let base = format!("{}-{stamp}", r.experiment);
    let mut written = Vec::new();
    let csv = outdir.join(format!("{base}.csv"));
    std::fs::write(&csv, render_csv(r))?;
    written.push(csv);
    let jsonp = outdir.join(format!("{base}.json"));
    std::fs::write(&jsonp, render_json(r, cfg, threads))?;
    written.push(jsonp);
    for (suffix, contents) in &r.checkpoints {
        let p = outdir.join(format!("{base}-{suffix}"));
        std::fs::write(&p, contents)?;
        written.push(p);
    }
    Ok(written)
}
