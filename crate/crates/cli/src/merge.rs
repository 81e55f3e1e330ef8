//! Pools the rows of several runs using the sums stored in their manifests.

use crate::error::CliError;
use crate::output::{manifest_path, read_rows, write_atomic, write_rows, Manifest, Row, RowStats};
use boolperc::Estimate;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

fn read_manifest(csv: &Path) -> Result<Manifest, CliError> {
    let path = manifest_path(csv);
    let bytes = std::fs::read(&path)
        .map_err(|e| CliError::SchemaMismatch(format!("{}: {e}", path.display())))?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::SchemaMismatch(format!("{}: {e}", path.display())))
}

struct Group {
    row: Row,
    stats: Option<RowStats>,
    seen: usize,
}

/// Merges `inputs` into `out`. Rows with equal scale columns are pooled; a
/// derived row (one without stored sums) can only pass through unpooled.
pub fn merge(inputs: &[PathBuf], out: &Path) -> Result<(), CliError> {
    let start = Instant::now();
    let mut groups: BTreeMap<String, Group> = BTreeMap::new();
    let mut manifests = Vec::new();
    for input in inputs {
        let rows = read_rows(input)?;
        let m = read_manifest(input)?;
        if m.stats.len() != rows.len() {
            return Err(CliError::SchemaMismatch(format!(
                "{} has {} rows but its manifest describes {}",
                input.display(),
                rows.len(),
                m.stats.len()
            )));
        }
        for (row, stats) in rows.into_iter().zip(m.stats.iter().cloned()) {
            let key = row.key();
            match groups.get_mut(&key) {
                None => {
                    groups.insert(key, Group { row, stats, seen: 1 });
                }
                Some(g) => {
                    let (Some(a), Some(b)) = (&mut g.stats, &stats) else {
                        return Err(CliError::Config(format!("row `{key}` is derived and cannot be pooled")));
                    };
                    if a.kind != b.kind {
                        return Err(CliError::SchemaMismatch(format!("row `{key}` mixes estimate kinds")));
                    }
                    a.acc.merge(&b.acc);
                    a.bias_note = a.bias_note.max(b.bias_note);
                    g.row.wall_ms += row.wall_ms;
                    g.seen += 1;
                }
            }
        }
        manifests.push(m);
    }

    let mut hasher = Sha256::new();
    for m in &manifests {
        hasher.update(m.run_id.as_bytes());
        hasher.update(b"\n");
    }
    let run_id: String = hasher.finalize().iter().take(6).map(|b| format!("{b:02x}")).collect();

    let mut rows = Vec::with_capacity(groups.len());
    let mut stats = Vec::with_capacity(groups.len());
    for (_, g) in groups {
        let mut row = g.row;
        row.run_id = run_id.clone();
        if let (Some(s), true) = (&g.stats, g.seen > 1) {
            let e = Estimate::from_accumulator(s.acc, s.kind, row.seed, s.bias_note);
            row.replicas = e.replicas;
            row.estimate = e.value;
            row.stderr = e.stderr;
            row.ci_lo = e.ci_lo;
            row.ci_hi = e.ci_hi;
        }
        rows.push(row);
        stats.push(g.stats);
    }

    let mut buf = Vec::new();
    write_rows(&rows, &mut buf)?;
    let first = manifests.first();
    let manifest = Manifest {
        artifact: "boolperc".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        op: first.map_or_else(|| "merge".into(), |m| m.op.clone()),
        run_id,
        config: first.map(|m| m.config.clone()).unwrap_or_default(),
        seeds: manifests.iter().flat_map(|m| m.seeds.iter().copied()).collect(),
        bias_notes: stats.iter().map(|s| s.as_ref().map_or(0.0, |s| s.bias_note)).collect(),
        rows: rows.len(),
        stats,
        wall_ms: start.elapsed().as_millis() as u64,
        extra: serde_json::json!({
            "merged_from": manifests.iter().map(|m| &m.run_id).collect::<Vec<_>>(),
            "inputs": inputs,
        }),
    };
    write_atomic(&manifest_path(out), &serde_json::to_vec_pretty(&manifest).expect("manifest serializes"))?;
    write_atomic(out, &buf)
}
