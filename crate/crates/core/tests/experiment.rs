use std::fs;
use std::path::Path;

use adas_core::experiment::report::metric_columns;
use adas_core::experiment::{probe_snapshots, run_experiment, DataSource, RunConfig, CSV_HEADER};
use adas_core::micronet::SyntheticSpec;

fn small_config(out: &Path, seed: u64) -> RunConfig {
    let mut cfg = RunConfig::parse_str(
        "optimizer = adas\nbeta = 0.85\nepochs = 5\ntrain_samples = 600\ntest_samples = 200\nbatch_size = 64\n",
    )
    .unwrap();
    cfg.seed = seed;
    cfg.out_dir = out.to_path_buf();
    cfg
}

fn lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(str::to_string).collect()
}

#[test]
fn runs_are_deterministic_with_one_row_per_block_and_epoch() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_experiment(&small_config(&dir.path().join("a"), 7)).unwrap();
    let b = run_experiment(&small_config(&dir.path().join("b"), 7)).unwrap();
    let (la, lb) = (lines(&a.metrics_path), lines(&b.metrics_path));
    assert_eq!(la, lb);
    assert_eq!(la[0], CSV_HEADER);
    assert_eq!(la.len() - 1, 5 * 3);
    assert!(la.iter().skip(1).all(|l| l.split(',').count() == 13));
    let summary = fs::read_to_string(dir.path().join("a/summary.txt")).unwrap();
    assert!(summary.contains("final_test_accuracy") && summary.contains("wall_time_seconds"));
}

#[test]
fn different_seeds_share_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_experiment(&small_config(&dir.path().join("a"), 1)).unwrap();
    let b = run_experiment(&small_config(&dir.path().join("b"), 2)).unwrap();
    assert_ne!(a.final_loss, b.final_loss);
    let (la, lb) = (lines(&a.metrics_path), lines(&b.metrics_path));
    assert_eq!(la[0], lb[0]);
    assert_eq!(la.len(), lb.len());
}

#[test]
fn invalid_values_name_their_key() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path(), 1);
    cfg.set("beta", "1.2").unwrap();
    let err = run_experiment(&cfg).unwrap_err();
    assert!(err.to_string().contains("beta"), "{err}");
    assert!(!err.is_data_error());

    let err = RunConfig::parse_str("bogus = 1").unwrap_err();
    assert!(err.to_string().contains("bogus"));
    let err = RunConfig::parse_str("epochs = many").unwrap_err();
    assert!(err.to_string().contains("epochs"));
    let cfg = RunConfig::parse_str("dataset = idx\ntrain_images = /nonexistent/x").unwrap();
    assert!(cfg.validate().unwrap_err().to_string().contains("train_images"));
}

#[test]
fn idx_files_feed_training() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec { samples: 300, ..SyntheticSpec::default() };
    let train = spec.generate(1, 2).unwrap();
    let test = SyntheticSpec { samples: 100, ..spec }.generate(1, 3).unwrap();
    let p = |n: &str| dir.path().join(n);
    train.write_idx(&p("tr-img"), &p("tr-lbl")).unwrap();
    test.write_idx(&p("te-img"), &p("te-lbl")).unwrap();
    let mut cfg = small_config(&p("out"), 3);
    cfg.dataset = DataSource::Idx {
        train_images: p("tr-img"),
        train_labels: p("tr-lbl"),
        test_images: p("te-img"),
        test_labels: p("te-lbl"),
    };
    cfg.epochs = 2;
    let s = run_experiment(&cfg).unwrap();
    assert_eq!(s.records.len(), 2);

    fs::write(p("te-img"), b"garbage").unwrap();
    assert!(run_experiment(&cfg).unwrap_err().is_data_error());
}

#[test]
fn probe_reproduces_training_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path(), 5);
    cfg.snapshots = true;
    let s = run_experiment(&cfg).unwrap();
    let report = probe_snapshots(s.snapshot_dir.as_ref().unwrap()).unwrap();
    assert!(report.warnings.is_empty());
    let trained = lines(&s.metrics_path);
    let probed: Vec<String> = report.to_csv().lines().map(str::to_string).collect();
    assert_eq!(trained.len(), probed.len());
    assert_eq!(probed[0], CSV_HEADER);
    for (t, p) in trained.iter().zip(&probed).skip(1) {
        assert_eq!(t.split(',').take(2).collect::<Vec<_>>(), p.split(',').take(2).collect::<Vec<_>>());
        assert_eq!(metric_columns(t), metric_columns(p));
    }
}

#[test]
fn probe_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let empty = probe_snapshots(dir.path()).unwrap();
    assert_eq!(empty.to_csv(), format!("{CSV_HEADER}\n"));

    let mut cfg = small_config(&dir.path().join("run"), 2);
    cfg.snapshots = true;
    cfg.epochs = 2;
    let s = run_experiment(&cfg).unwrap();
    let snaps = s.snapshot_dir.unwrap();
    let victim = snaps.join("epoch1_block2.at4");
    let mut bytes = fs::read(&victim).unwrap();
    bytes[0] = b'X';
    fs::write(&victim, bytes).unwrap();
    fs::write(snaps.join("notes.txt"), "ignored").unwrap();
    let report = probe_snapshots(&snaps).unwrap();
    assert_eq!(report.rows.len(), 2 * 3 - 1);
    assert_eq!(report.warnings.len(), 1);
    assert!(report.warnings[0].contains("epoch1_block2"));
    assert!(!report.rows.iter().any(|r| r.epoch == 1 && r.block == 2));

    assert!(probe_snapshots(&dir.path().join("missing")).is_err());
}
