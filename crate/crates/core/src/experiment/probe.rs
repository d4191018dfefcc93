//! Offline metric computation over saved AT4 weight snapshots.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{AdasError, Result};
use crate::experiment::report::{csv_row, CSV_HEADER};
use crate::metrics::{layer_metrics, GainNorm, LayerMetrics};
use crate::tensor::Tensor4;

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRow {
    pub epoch: usize,
    /// 1-based.
    pub block: usize,
    pub metrics: LayerMetrics,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProbeReport {
    pub rows: Vec<ProbeRow>,
    pub warnings: Vec<String>,
}

impl ProbeReport {
    /// Same schema as the training log; columns that need training
    /// (`lr`, `train_loss`, `test_accuracy`) are `nan`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{CSV_HEADER}").unwrap();
        for r in &self.rows {
            writeln!(out, "{}", csv_row(r.epoch, r.block, None, &r.metrics, None, None)).unwrap();
        }
        out
    }
}

/// Parses `epoch{t}_block{ℓ}.at4`.
pub fn parse_snapshot_name(name: &str) -> Option<(usize, usize)> {
    let rest = name.strip_prefix("epoch")?.strip_suffix(".at4")?;
    let (epoch, block) = rest.split_once("_block")?;
    Some((epoch.parse().ok()?, block.parse().ok()?))
}

/// Scores every snapshot in `dir`. Files that fail to parse are skipped
/// with a warning; files not named like snapshots are ignored.
pub fn probe_snapshots(dir: &Path) -> Result<ProbeReport> {
    let entries = fs::read_dir(dir)
        .map_err(|e| AdasError::Format(format!("cannot read {}: {e}", dir.display())))?;
    let mut found = Vec::new();
    for entry in entries {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some((epoch, block)) = parse_snapshot_name(&name) {
            found.push((epoch, block, entry.path()));
        }
    }
    found.sort();

    let mut report = ProbeReport::default();
    for (epoch, block, path) in found {
        let scored = fs::read(&path)
            .map_err(AdasError::from)
            .and_then(|bytes| Tensor4::from_at4_bytes(&bytes))
            .and_then(|t| layer_metrics(&t, GainNorm::L1));
        match scored {
            Ok(metrics) => report.rows.push(ProbeRow { epoch, block, metrics }),
            Err(e) => {
                let msg = format!("skipped {}: {e}", path.display());
                log::warn!("{msg}");
                report.warnings.push(msg);
            }
        }
    }
    Ok(report)
}
