use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::RngCore;

use crate::error::Result;
use crate::experiment::config::{DataSource, RunConfig};
use crate::experiment::report::metrics_csv;
use crate::micronet::data::{load_idx, Dataset, SyntheticSpec};
use crate::micronet::net::{Network, NetworkSpec};
use crate::micronet::train::{TrainRecord, Trainer};
use crate::rng;

pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const SNAPSHOT_DIR: &str = "snapshots";

/// `epoch{t}_block{ℓ}.at4`, both 1-based.
pub fn snapshot_name(epoch: usize, block: usize) -> String {
    format!("epoch{epoch}_block{block}.at4")
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub records: Vec<TrainRecord>,
    pub final_loss: f64,
    pub final_accuracy: f64,
    pub wall_seconds: f64,
    pub metrics_path: PathBuf,
    pub snapshot_dir: Option<PathBuf>,
}

/// Train and test splits for a config. Synthetic splits share class
/// prototypes and differ in their sample streams.
pub fn load_data(cfg: &RunConfig) -> Result<(Dataset, Dataset)> {
    match &cfg.dataset {
        DataSource::Idx { train_images, train_labels, test_images, test_labels } => {
            Ok((load_idx(train_images, train_labels)?, load_idx(test_images, test_labels)?))
        }
        DataSource::Synthetic { spec, test_samples } => {
            let layout = cfg.seed.wrapping_add(0x5EED);
            let train = spec.generate(layout, rng::derived(cfg.seed, 10).next_u64())?;
            let test_spec = SyntheticSpec { samples: *test_samples, ..spec.clone() };
            let test = test_spec.generate(layout, rng::derived(cfg.seed, 11).next_u64())?;
            Ok((train, test))
        }
    }
}

/// Builds the network for the config and data, then trains it for
/// `cfg.epochs` epochs, calling `on_epoch` after each.
pub fn train_with(
    cfg: &RunConfig,
    train: &Dataset,
    test: &Dataset,
    mut on_epoch: impl FnMut(&Trainer, &TrainRecord) -> Result<()>,
) -> Result<Vec<TrainRecord>> {
    let classes = train.classes().max(test.classes()).max(2);
    let spec = NetworkSpec::new(train.shape(), cfg.network.clone(), classes)?;
    let net = Network::init(spec, cfg.seed);
    let mut trainer = Trainer::new(net, cfg.optimizer(), cfg.batch_size, cfg.seed)?;
    let mut records = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let rec = trainer.train_epoch(train, test)?;
        log::info!(
            "epoch {} loss {:.4} acc {:.4} lr {:?}",
            rec.epoch,
            rec.train_loss,
            rec.test_accuracy,
            rec.lr
        );
        on_epoch(&trainer, &rec)?;
        records.push(rec);
    }
    Ok(records)
}

fn write_snapshots(dir: &Path, trainer: &Trainer, epoch: usize) -> Result<()> {
    for (b, conv) in trainer.network().convs().iter().enumerate() {
        let path = dir.join(snapshot_name(epoch, b + 1));
        fs::write(path, conv.weight.to_at4_bytes())?;
    }
    Ok(())
}

/// Trains per `cfg` and writes `metrics.csv`, `summary.txt` and, when
/// enabled, per-epoch weight snapshots into `cfg.out_dir`.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let started = Instant::now();
    let (train, test) = load_data(cfg)?;
    fs::create_dir_all(&cfg.out_dir)?;
    let snapshot_dir = cfg.snapshots.then(|| cfg.out_dir.join(SNAPSHOT_DIR));
    if let Some(dir) = &snapshot_dir {
        fs::create_dir_all(dir)?;
    }
    let records = train_with(cfg, &train, &test, |trainer, rec| match &snapshot_dir {
        Some(dir) => write_snapshots(dir, trainer, rec.epoch),
        None => Ok(()),
    })?;

    let metrics_path = cfg.out_dir.join(METRICS_FILE);
    fs::write(&metrics_path, metrics_csv(&records))?;
    let last = records.last().expect("epochs >= 1");
    let wall_seconds = started.elapsed().as_secs_f64();
    let summary = format!(
        "epochs = {}\nfinal_train_loss = {}\nfinal_test_accuracy = {}\nwall_time_seconds = {:.3}\n",
        records.len(),
        last.train_loss,
        last.test_accuracy,
        wall_seconds
    );
    fs::write(cfg.out_dir.join(SUMMARY_FILE), summary)?;
    Ok(RunSummary {
        final_loss: last.train_loss,
        final_accuracy: last.test_accuracy,
        records,
        wall_seconds,
        metrics_path,
        snapshot_dir,
    })
}
