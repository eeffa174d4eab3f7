//! CSV schemas and atomic file output.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ulofdma_core::harness::PolicyCdf;
use ulofdma_core::{EpochMetrics, RunSummary, SweepPoint};

pub const EPOCH_HEADER: [&str; 7] = ["epoch", "station", "rate_bits", "power_mw", "q", "z", "g"];
pub const SUMMARY_HEADER: [&str; 4] = ["policy", "station", "avg_rate_bits", "avg_power_mw"];
pub const CDF_HEADER: [&str; 4] = ["policy", "metric", "value", "cdf_level"];
pub const SWEEP_HEADER: [&str; 4] = ["policy", "K", "min_rate", "sum_rate"];
pub const POWER_TRACE_HEADER: [&str; 5] = ["policy", "station", "epoch", "power_mw", "moving_average_mw"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: usize,
    pub station: usize,
    pub rate_bits: f64,
    pub power_mw: f64,
    pub q: f64,
    pub z: f64,
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub policy: String,
    pub station: usize,
    pub avg_rate_bits: f64,
    pub avg_power_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfRow {
    pub policy: String,
    pub metric: String,
    pub value: f64,
    pub cdf_level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub policy: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub min_rate: f64,
    pub sum_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTraceRow {
    pub policy: String,
    pub station: usize,
    pub epoch: usize,
    pub power_mw: f64,
    pub moving_average_mw: f64,
}

pub fn epoch_rows(epochs: &[EpochMetrics]) -> Vec<EpochRow> {
    epochs
        .iter()
        .flat_map(|e| {
            (0..e.rate.len()).map(move |k| EpochRow {
                epoch: e.epoch,
                station: k,
                rate_bits: e.rate[k],
                power_mw: e.power[k],
                q: e.queues.q[k],
                z: e.queues.z[k],
                g: e.queues.g[k],
            })
        })
        .collect()
}

pub fn summary_rows(summaries: &[RunSummary]) -> Vec<SummaryRow> {
    summaries
        .iter()
        .flat_map(|s| {
            (0..s.avg_rate.len()).map(move |k| SummaryRow {
                policy: s.policy.to_string(),
                station: k,
                avg_rate_bits: s.avg_rate[k],
                avg_power_mw: s.avg_power[k],
            })
        })
        .collect()
}

pub fn cdf_rows(policies: &[PolicyCdf]) -> Vec<CdfRow> {
    let mut rows = Vec::new();
    for p in policies {
        for (metric, curve) in [("min_rate", &p.min_rate), ("sum_rate", &p.sum_rate)] {
            rows.extend(curve.iter().map(|c| CdfRow {
                policy: p.policy.to_string(),
                metric: metric.to_string(),
                value: c.value,
                cdf_level: c.level,
            }));
        }
    }
    rows
}

pub fn sweep_rows(points: &[SweepPoint]) -> Vec<SweepRow> {
    points
        .iter()
        .map(|p| SweepRow {
            policy: p.policy.to_string(),
            k: p.k,
            min_rate: p.min_rate,
            sum_rate: p.sum_rate,
        })
        .collect()
}

/// Renders rows under `header`. The header is written even when `rows` is
/// empty.
pub fn to_csv<T: Serialize>(header: &[&str], rows: &[T]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, csv::Error> {
    csv::Reader::from_path(path)?.deserialize().collect()
}

/// Files written by one invocation. Anything not committed is removed on drop.
pub struct OutputDir {
    root: PathBuf,
    created_root: bool,
    written: Vec<PathBuf>,
    committed: bool,
}

impl OutputDir {
    pub fn create(root: &Path) -> io::Result<Self> {
        let created_root = !root.exists();
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            created_root,
            written: Vec::new(),
            committed: false,
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    /// Writes `name` via a temporary sibling and a rename.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> io::Result<PathBuf> {
        let target = self.root.join(name);
        let tmp = self.root.join(format!(".{name}.tmp"));
        let result = fs::write(&tmp, bytes).and_then(|_| fs::rename(&tmp, &target));
        if let Err(e) = result {
            let _ = fs::remove_file(&tmp);
            return Err(e);
        }
        self.written.push(target.clone());
        Ok(target)
    }

    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for f in &self.written {
            let _ = fs::remove_file(f);
        }
        if self.created_root {
            // Only succeeds if nothing else landed there.
            let _ = fs::remove_dir(&self.root);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_rows_give_header_only() {
        let bytes = to_csv::<SweepRow>(&SWEEP_HEADER, &[]).unwrap();
        assert_eq!(String::from_utf8(bytes).unwrap(), "policy,K,min_rate,sum_rate\n");
    }

    #[test]
    fn floats_use_plain_decimal_notation() {
        let rows = [SweepRow { policy: "MM".into(), k: 4, min_rate: 30258.4, sum_rate: 0.1 + 0.2 }];
        let text = String::from_utf8(to_csv(&SWEEP_HEADER, &rows).unwrap()).unwrap();
        assert_eq!(text, "policy,K,min_rate,sum_rate\nMM,4,30258.4,0.30000000000000004\n");
    }

    #[test]
    fn uncommitted_outputs_are_removed() {
        let base = tempfile::tempdir().unwrap();
        let root = base.path().join("fresh");
        {
            let mut out = OutputDir::create(&root).unwrap();
            out.write("a.csv", b"x\n").unwrap();
            assert!(root.join("a.csv").exists());
        }
        assert!(!root.exists());

        let mut out = OutputDir::create(&root).unwrap();
        out.write("a.csv", b"x\n").unwrap();
        out.commit();
        assert_eq!(fs::read(root.join("a.csv")).unwrap(), b"x\n");
        assert!(!root.join(".a.csv.tmp").exists());
    }
}
