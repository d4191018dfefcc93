//! The per-(epoch, block) metrics CSV.

use std::fmt::Write as _;

use crate::metrics::LayerMetrics;
use crate::micronet::train::TrainRecord;

pub const CSV_HEADER: &str = "epoch,block,lr,G3,G4,G_avg,kappa3,kappa4,kappa_avg,rank_ratio3,rank_ratio4,train_loss,test_accuracy";

/// Shortest round-trip decimal; undefined and NaN values render as `nan`.
pub fn fmt_value(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_nan() => "nan".to_string(),
        Some(x) if x.is_infinite() => if x > 0.0 { "inf" } else { "-inf" }.to_string(),
        Some(x) => format!("{x}"),
        None => "nan".to_string(),
    }
}

/// One CSV row; `block` is 1-based.
pub fn csv_row(
    epoch: usize,
    block: usize,
    lr: Option<f64>,
    m: &LayerMetrics,
    train_loss: Option<f64>,
    test_accuracy: Option<f64>,
) -> String {
    let fields = [
        fmt_value(lr),
        fmt_value(Some(m.g3)),
        fmt_value(Some(m.g4)),
        fmt_value(Some(m.g_avg)),
        fmt_value(m.kappa3),
        fmt_value(m.kappa4),
        fmt_value(m.kappa_avg),
        fmt_value(Some(m.rank_ratio3)),
        fmt_value(Some(m.rank_ratio4)),
        fmt_value(train_loss),
        fmt_value(test_accuracy),
    ];
    format!("{epoch},{block},{}", fields.join(","))
}

/// The training log: header plus one row per `(epoch, block)`.
pub fn metrics_csv(records: &[TrainRecord]) -> String {
    let mut out = String::new();
    writeln!(out, "{CSV_HEADER}").unwrap();
    for rec in records {
        for (b, m) in rec.metrics.iter().enumerate() {
            let lr = rec.lr.get(b).copied();
            let row = csv_row(rec.epoch, b + 1, lr, m, Some(rec.train_loss), Some(rec.test_accuracy));
            writeln!(out, "{row}").unwrap();
        }
    }
    out
}

/// Columns 4 to 11 (`G3` through `rank_ratio4`) of a CSV row: the part
/// that depends on the weights alone.
pub fn metric_columns(row: &str) -> Vec<&str> {
    row.split(',').skip(3).take(8).collect()
}
