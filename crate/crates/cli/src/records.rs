//! Self-describing result records, CSV tables and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ethdyn::model::ModelSpec;
use serde::{Deserialize, Serialize};

use crate::config::{OutputFormat, RunConfig};

pub const SCHEMA_VERSION: &str = "ethdyn.record/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    EthReport,
    Trace,
    ScalingFit,
    EquipartitionCurve,
    EpsilonBound,
    RelaxationSummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Failed,
}

/// Enough to regenerate a record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub command: String,
    /// Hash of the full resolved configuration.
    pub config_hash: String,
    /// Hash of the inputs that determine this record.
    pub point_hash: String,
    pub model: Option<ModelSpec>,
    pub master_seed: u64,
    pub disorder_seed: Option<u64>,
    pub sample_indices: Vec<u64>,
    pub code_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema: String,
    pub kind: RecordKind,
    pub id: String,
    pub status: Status,
    pub payload: serde_json::Value,
    pub provenance: Provenance,
}

impl ResultRecord {
    pub fn ok<T: Serialize>(kind: RecordKind, id: String, payload: &T, provenance: Provenance) -> Self {
        Self {
            schema: SCHEMA_VERSION.into(),
            kind,
            id,
            status: Status::Ok,
            payload: serde_json::to_value(payload).expect("payload serializes"),
            provenance,
        }
    }

    pub fn failed(kind: RecordKind, id: String, error: &str, provenance: Provenance) -> Self {
        Self {
            schema: SCHEMA_VERSION.into(),
            kind,
            id,
            status: Status::Failed,
            payload: serde_json::json!({ "error": error }),
            provenance,
        }
    }
}

/// A CSV table written next to a record.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn to_csv(&self) -> anyhow::Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            // shortest round-trip representation
            w.write_record(row.iter().map(|v| format!("{v:?}")))?;
        }
        Ok(w.into_inner()?)
    }
}

/// One finished unit of work: a record and optional table.
#[derive(Debug, Clone)]
pub struct Output {
    pub record: ResultRecord,
    pub table: Option<Table>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub kind: RecordKind,
    pub status: Status,
    pub file: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub command: String,
    pub config_hash: String,
    pub code_version: String,
    pub records: Vec<ManifestEntry>,
}

/// The output directory; all writes go through here.
pub struct OutputDir {
    root: PathBuf,
    format: OutputFormat,
    entries: BTreeMap<String, ManifestEntry>,
}

fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)
}

impl OutputDir {
    pub fn create(root: &Path, cfg: &RunConfig) -> anyhow::Result<Self> {
        fs::create_dir_all(root.join("records"))?;
        write_atomic(&root.join("config.resolved.toml"), cfg.to_toml_string().as_bytes())?;
        Ok(Self { root: root.to_path_buf(), format: cfg.output.format, entries: BTreeMap::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn record_path(&self, id: &str) -> PathBuf {
        self.root.join("records").join(format!("{}.json", file_stem(id)))
    }

    /// A previously written successful record with the same inputs.
    pub fn completed(&mut self, id: &str, point_hash: &str) -> Option<ResultRecord> {
        let text = fs::read_to_string(self.record_path(id)).ok()?;
        let rec: ResultRecord = serde_json::from_str(&text).ok()?;
        if rec.status != Status::Ok || rec.schema != SCHEMA_VERSION || rec.provenance.point_hash != point_hash {
            return None;
        }
        let table = self.table_path(id);
        let has_table = table.exists();
        self.entries.insert(
            id.to_string(),
            ManifestEntry {
                id: id.to_string(),
                kind: rec.kind,
                status: rec.status,
                file: format!("records/{}.json", file_stem(id)),
                table: has_table.then(|| format!("records/{}.csv", file_stem(id))),
            },
        );
        Some(rec)
    }

    fn table_path(&self, id: &str) -> PathBuf {
        self.root.join("records").join(format!("{}.csv", file_stem(id)))
    }

    pub fn write(&mut self, out: &Output) -> anyhow::Result<()> {
        let id = &out.record.id;
        let mut bytes = serde_json::to_vec_pretty(&out.record)?;
        bytes.push(b'\n');
        let mut table_file = None;
        if let (Some(t), OutputFormat::JsonCsv) = (&out.table, self.format) {
            write_atomic(&self.table_path(id), &t.to_csv()?)?;
            table_file = Some(format!("records/{}.csv", file_stem(id)));
        }
        write_atomic(&self.record_path(id), &bytes)?;
        self.entries.insert(
            id.clone(),
            ManifestEntry {
                id: id.clone(),
                kind: out.record.kind,
                status: out.record.status,
                file: format!("records/{}.json", file_stem(id)),
                table: table_file,
            },
        );
        Ok(())
    }

    pub fn finish(&self, command: &str, cfg: &RunConfig) -> anyhow::Result<Manifest> {
        let manifest = Manifest {
            schema: SCHEMA_VERSION.into(),
            command: command.into(),
            config_hash: cfg.hash(),
            code_version: env!("CARGO_PKG_VERSION").into(),
            records: self.entries.values().cloned().collect(),
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        write_atomic(&self.root.join("manifest.json"), &bytes)?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_stems_are_safe() {
        assert_eq!(file_stem("ladder/NL=3 W=0.5"), "ladder_NL_3_W_0.5");
    }

    #[test]
    fn csv_roundtrips_values() {
        let mut t = Table::new(&["t", "d"]);
        t.rows.push(vec![0.1, -1e-300]);
        let s = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert_eq!(s, "t,d\n0.1,-1e-300\n");
    }
}
