//! CSV rows, run manifests and atomic file writes.

use crate::config::Params;
use crate::error::CliError;
use boolperc::estimators::EstimateKind;
use boolperc::stats::Accumulator;
use boolperc::{Estimate, RadiusMeasure};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const HEADER: [&str; 17] = [
    "run_id", "op", "d", "measure", "delta", "lambda", "n", "N", "rho", "scale", "replicas", "estimate", "stderr",
    "ci_lo", "ci_hi", "seed", "wall_ms",
];

/// One line of the standard results table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub run_id: String,
    pub op: String,
    pub d: usize,
    pub measure: String,
    pub delta: Option<f64>,
    pub lambda: Option<f64>,
    pub n: Option<f64>,
    #[serde(rename = "N")]
    pub big_n: Option<f64>,
    pub rho: Option<f64>,
    pub scale: Option<f64>,
    pub replicas: u64,
    pub estimate: f64,
    pub stderr: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub seed: u64,
    pub wall_ms: u64,
}

impl Row {
    /// Columns identifying what was measured, used to pair rows when merging.
    pub fn key(&self) -> String {
        let f = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        format!(
            "{}|{}|{}|{}|{}|{}|{}|{}|{}",
            self.op,
            self.d,
            self.measure,
            f(self.delta),
            f(self.lambda),
            f(self.n),
            f(self.big_n),
            f(self.rho),
            f(self.scale)
        )
    }
}

/// Pooled sums behind a row, kept so that runs can be merged exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowStats {
    pub kind: EstimateKind,
    pub acc: Accumulator,
    pub bias_note: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub artifact: String,
    pub version: String,
    pub op: String,
    pub run_id: String,
    pub config: Params,
    pub seeds: Vec<u64>,
    pub bias_notes: Vec<f64>,
    pub rows: usize,
    /// Per row, the sums needed to merge it; `None` for derived rows.
    pub stats: Vec<Option<RowStats>>,
    pub wall_ms: u64,
    /// Free-form details of the run.
    #[serde(default)]
    pub extra: serde_json::Value,
}

/// Deterministic id of a run: a hash of the subcommand and its resolved parameters.
pub fn run_id(op: &str, params: &Params) -> String {
    let mut p = params.clone();
    p.out = None;
    p.threads = None;
    p.trace = None;
    let text = format!("{op}\n{}", serde_json::to_string(&p).expect("params serialize"));
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
}

/// Accumulates the rows of one run.
pub struct Report {
    pub op: String,
    pub run_id: String,
    pub dim: usize,
    pub measure: String,
    pub delta: Option<f64>,
    start: Instant,
    pub rows: Vec<Row>,
    pub stats: Vec<Option<RowStats>>,
    pub extra: serde_json::Value,
}

/// Scale columns of a row.
#[derive(Clone, Copy, Debug, Default)]
pub struct Scales {
    pub lambda: Option<f64>,
    pub n: Option<f64>,
    pub big_n: Option<f64>,
    pub rho: Option<f64>,
    pub scale: Option<f64>,
}

impl Report {
    pub fn new(op: &str, params: &Params, mu: Option<&RadiusMeasure>) -> Result<Self, CliError> {
        Ok(Report {
            op: op.to_string(),
            run_id: run_id(op, params),
            dim: params.dim()?,
            measure: mu.map(|m| m.describe()).unwrap_or_default(),
            delta: mu.and_then(|m| m.delta()),
            start: Instant::now(),
            rows: Vec::new(),
            stats: Vec::new(),
            extra: serde_json::Value::Null,
        })
    }

    fn elapsed(&self) -> u64 {
        self.start.elapsed().as_millis() as u64
    }

    fn base(&self, op: &str, s: Scales) -> Row {
        Row {
            run_id: self.run_id.clone(),
            op: op.to_string(),
            d: self.dim,
            measure: self.measure.clone(),
            delta: self.delta,
            lambda: s.lambda,
            n: s.n,
            big_n: s.big_n,
            rho: s.rho,
            scale: s.scale,
            replicas: 0,
            estimate: 0.0,
            stderr: 0.0,
            ci_lo: 0.0,
            ci_hi: 0.0,
            seed: 0,
            wall_ms: self.elapsed(),
        }
    }

    /// Adds a Monte Carlo estimate; the row can later be merged.
    pub fn estimate(&mut self, op: &str, s: Scales, e: &Estimate) {
        let mut row = self.base(op, s);
        row.replicas = e.replicas;
        row.estimate = e.value;
        row.stderr = e.stderr;
        row.ci_lo = e.ci_lo;
        row.ci_hi = e.ci_hi;
        row.seed = e.seed;
        self.rows.push(row);
        self.stats.push(Some(RowStats { kind: e.kind, acc: e.acc, bias_note: e.bias_note }));
    }

    /// Adds a derived value with an explicit interval.
    #[allow(clippy::too_many_arguments)]
    pub fn value(&mut self, op: &str, s: Scales, value: f64, stderr: f64, ci: (f64, f64), replicas: u64, seed: u64) {
        let mut row = self.base(op, s);
        row.replicas = replicas;
        row.estimate = value;
        row.stderr = stderr;
        row.ci_lo = ci.0;
        row.ci_hi = ci.1;
        row.seed = seed;
        self.rows.push(row);
        self.stats.push(None);
    }

    pub fn manifest(&self, config: &Params) -> Manifest {
        Manifest {
            artifact: "boolperc".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            op: self.op.clone(),
            run_id: self.run_id.clone(),
            config: config.clone(),
            seeds: self.rows.iter().map(|r| r.seed).collect(),
            bias_notes: self.stats.iter().map(|s| s.as_ref().map_or(0.0, |s| s.bias_note)).collect(),
            rows: self.rows.len(),
            stats: self.stats.clone(),
            wall_ms: self.elapsed(),
            extra: self.extra.clone(),
        }
    }

    pub fn write(&self, out: &Path, config: &Params) -> Result<(), CliError> {
        let mut buf = Vec::new();
        write_rows(&self.rows, &mut buf)?;
        let manifest = self.manifest(config);
        write_atomic(&manifest_path(out), &serde_json::to_vec_pretty(&manifest).expect("manifest serializes"))?;
        write_atomic(out, &buf)
    }
}

pub fn write_rows<W: Write>(rows: &[Row], w: W) -> Result<(), CliError> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wr.write_record(HEADER)?;
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<Row>, CliError> {
    let mut rd = csv::Reader::from_path(path)?;
    let header: Vec<String> = rd.headers()?.iter().map(String::from).collect();
    if header != HEADER {
        return Err(CliError::SchemaMismatch(format!("{} has header {header:?}", path.display())));
    }
    rd.deserialize().map(|r| r.map_err(CliError::from)).collect()
}

/// Manifest path belonging to an output file: `results.csv` gives `results.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

/// Writes through a temporary file in the target directory and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}
