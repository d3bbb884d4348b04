use std::collections::BTreeSet;

use qids_core::bench::{prepare, run_bench, DataSource, ExperimentConfig, ModelDescriptor};
use qids_core::dataio::{ingest_reader, synth_generate, ColumnMap, SynthConfig};
use qids_core::flowfeat::FlowClass;
use qids_core::vqc::TrainConfig;

fn small_synth(per_class: usize) -> SynthConfig {
    let mut s = SynthConfig::default();
    for (class, c) in s.classes.iter_mut() {
        c.count = if *class == FlowClass::Normal { per_class + per_class / 10 } else { per_class };
    }
    s
}

fn small_config() -> ExperimentConfig {
    ExperimentConfig {
        data: DataSource::Synth(small_synth(60)),
        models: vec![ModelDescriptor::Svm, ModelDescriptor::QKernel(None), ModelDescriptor::Hybrid(2)],
        train: TrainConfig { epochs: 5, ..Default::default() },
        ..Default::default()
    }
}

#[test]
fn training_never_sees_test_records() {
    let cfg = small_config();
    let ds = cfg.load_dataset().unwrap();
    let p = prepare(&cfg, &ds).unwrap();
    let train: BTreeSet<usize> = p.summary.train_indices.iter().copied().collect();
    let test: BTreeSet<usize> = p.summary.test_indices.iter().copied().collect();
    assert!(train.is_disjoint(&test));
    assert_eq!(train.len(), p.train_x.len());
    assert_eq!(test.len(), p.test_x.len());
    // balanced train, natural test
    assert_eq!(p.summary.train_positives * 2, p.summary.train_size);
    let prevalence = (ds.len() - ds.class_counts()[&FlowClass::Normal]) as f64 / ds.len() as f64;
    assert!((p.summary.test_prevalence - prevalence).abs() < 0.02, "{} vs {prevalence}", p.summary.test_prevalence);
}

#[test]
fn test_records_do_not_move_the_standardizer() {
    let cfg = small_config();
    let ds = cfg.load_dataset().unwrap();
    let base = prepare(&cfg, &ds).unwrap();

    // inflate every test flow's byte count; the fitted statistics must not change
    let mut records = ds.records().to_vec();
    for &i in &base.summary.test_indices {
        records[i].total_bytes *= 1000.0;
        records[i].bytes_fwd = records[i].bytes_fwd.map(|b| b * 1000.0);
        records[i].bytes_bwd = records[i].bytes_bwd.map(|b| b * 1000.0);
    }
    let tampered = qids_core::dataio::Dataset::new(records, ds.provenance()[0].clone());
    let again = prepare(&cfg, &tampered).unwrap();
    assert_eq!(base.summary.test_indices, again.summary.test_indices);
    assert_eq!(base.standardizer, again.standardizer);
    assert_eq!(base.train_x, again.train_x);
    assert_ne!(base.test_x, again.test_x);
}

#[test]
fn small_grid_reports_every_model_with_recomputed_footprints() {
    let cfg = small_config();
    let report = run_bench(&cfg).unwrap();
    assert!(report.all_ok(), "{:?}", report.rows);
    assert_eq!(report.rows.len(), 3);
    for d in &cfg.models {
        let row = report.row(&d.to_string()).unwrap();
        let m = row.metrics.as_ref().unwrap();
        if let Some(want) = d.expected_footprint(8) {
            assert_eq!(m.footprint, want, "{d}");
        }
        assert_eq!(row.seed, cfg.model_seed(d));
        assert_eq!(m.samples as usize, report.data.test_size);
    }
    assert!(report.simulator.circuits_run > 0);
    let csv = report.table_csv();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(&report.config_hash)));
}

#[test]
fn reports_depend_only_on_config_and_seeds() {
    let cfg = small_config();
    let a = run_bench(&cfg).unwrap();
    let b = run_bench(&ExperimentConfig { parallel_models: true, ..cfg.clone() }).unwrap();
    let strip = |r: &qids_core::bench::RunReport| r.rows.iter().map(|row| (row.model.clone(), row.metrics.clone())).collect::<Vec<_>>();
    assert_eq!(strip(&a), strip(&b));

    let other = run_bench(&ExperimentConfig { seed: 8, ..cfg }).unwrap();
    assert_ne!(a.config_hash, other.config_hash);
    assert!(a.rows.iter().zip(&other.rows).all(|(x, y)| x.seed != y.seed));
}

#[test]
fn shot_mode_consumes_shots() {
    let mut cfg = small_config();
    cfg.data = DataSource::Synth(small_synth(20));
    cfg.models = vec![ModelDescriptor::QKernel(None)];
    cfg.shots = Some(64);
    let report = run_bench(&cfg).unwrap();
    assert!(report.all_ok(), "{:?}", report.rows);
    assert!(report.simulator.shots_drawn > 0);
}

#[test]
fn ingested_csv_round_trips_through_the_canonical_writer() {
    let ds = synth_generate(&small_synth(5)).unwrap();
    let csv = ds.to_csv().unwrap();
    let (back, report) = ingest_reader(csv.as_bytes(), &ColumnMap::default(), "memory").unwrap();
    assert_eq!(report.skipped, 0);
    assert_eq!(back.len(), ds.len());
    assert_eq!(back.to_csv().unwrap(), csv);
}
