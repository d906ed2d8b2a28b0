//! Append-only JSON-lines run records.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{LossArg, SupervisionArg};
use crate::error::{Error, Result};

/// Everything that determines a run apart from the seed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSpec {
    pub category: u32,
    pub loss_variant: LossArg,
    pub supervision: SupervisionArg,
    pub epochs: u32,
    pub batch_size: usize,
    pub data_seed: u64,
    pub train_images: usize,
    pub test_images: usize,
    pub image_size: usize,
}

impl RunSpec {
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("run spec serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn run_id(&self, seed: u64) -> String {
        let mut h = Sha256::new();
        h.update(self.digest().as_bytes());
        h.update(b":");
        h.update(seed.to_string().as_bytes());
        hex::encode(&h.finalize()[..16])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub run_id: String,
    pub category: String,
    pub seed: u64,
    pub loss_variant: LossArg,
    pub supervision: SupervisionArg,
    pub epochs: u32,
    pub pixel_auroc: f64,
    pub pixel_ap: f64,
    pub wall_time_s: f64,
    pub config_digest: String,
    pub created_at: String,
}

impl RunRecord {
    /// Name under which the record's method is compared.
    pub fn method(&self) -> String {
        format!("{}-{}", serde_plain(&self.loss_variant), serde_plain(&self.supervision))
    }

    /// The record with wall-clock fields blanked, for reproducibility checks.
    pub fn without_timing(&self) -> RunRecord {
        RunRecord { wall_time_s: 0.0, created_at: String::new(), ..self.clone() }
    }
}

fn serde_plain<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

/// Appends one line under an exclusive file lock with a single write.
pub fn append(path: &Path, record: &RunRecord) -> Result<()> {
    let mut line = serde_json::to_string(record)?;
    line.push('\n');
    let mut file = OpenOptions::new().create(true).append(true).open(path).map_err(Error::io(path))?;
    file.lock().map_err(Error::io(path))?;
    let res = file.write_all(line.as_bytes()).and_then(|_| file.flush());
    let _ = file.unlock();
    res.map_err(Error::io(path))
}

/// Reads all records; a missing file has none.
pub fn read(path: &Path) -> Result<Vec<RunRecord>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path)(e)),
    };
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::format(path, format!("line {}: {e}", i + 1))))
        .collect()
}

/// Keeps the last record per run id, in first-appearance order.
pub fn latest_per_run(records: Vec<RunRecord>) -> Vec<RunRecord> {
    let mut out: Vec<RunRecord> = Vec::new();
    for r in records {
        match out.iter_mut().find(|o| o.run_id == r.run_id) {
            Some(slot) => *slot = r,
            None => out.push(r),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> RunSpec {
        RunSpec {
            category: 1,
            loss_variant: LossArg::Proposed,
            supervision: SupervisionArg::Unsup,
            epochs: 50,
            batch_size: 16,
            data_seed: 0,
            train_images: 8,
            test_images: 16,
            image_size: 64,
        }
    }

    fn record(id: &str, ap: f64) -> RunRecord {
        RunRecord {
            run_id: id.into(),
            category: "c01-stripes".into(),
            seed: 0,
            loss_variant: LossArg::Proposed,
            supervision: SupervisionArg::Unsup,
            epochs: 50,
            pixel_auroc: 0.9,
            pixel_ap: ap,
            wall_time_s: 1.5,
            config_digest: "d".into(),
            created_at: "now".into(),
        }
    }

    #[test]
    fn run_id_depends_on_config_and_seed() {
        let s = spec();
        assert_eq!(s.run_id(3), spec().run_id(3));
        assert_ne!(s.run_id(3), s.run_id(4));
        let other = RunSpec { epochs: 49, ..spec() };
        assert_ne!(s.run_id(3), other.run_id(3));
        assert_eq!(s.run_id(3).len(), 32);
        assert_eq!(s.digest().len(), 64);
    }

    #[test]
    fn append_read_and_dedup() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        assert!(read(&path).unwrap().is_empty());
        append(&path, &record("a", 0.1)).unwrap();
        append(&path, &record("b", 0.2)).unwrap();
        append(&path, &record("a", 0.3)).unwrap();
        let all = read(&path).unwrap();
        assert_eq!(all.len(), 3);
        let latest = latest_per_run(all);
        assert_eq!(latest.len(), 2);
        assert_eq!(latest[0].pixel_ap, 0.3);
        assert_eq!(latest[0].method(), "proposed-unsup");
        assert_eq!(latest[0].without_timing().created_at, "");
    }
}
