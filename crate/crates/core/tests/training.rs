mod common;

use embsr::autodiff::{Adam, AdamConfig};
use embsr::data::{parse_log_str, preprocess, DatasetSplit, LogFormat, PreprocessConfig};
use embsr::model::{run_forward, AblationConfig, ForwardOptions, ModelParams, Variant};
use embsr::synthetic::{random_log, LogConfig};
use embsr::train::{dims_for, evaluate_model, train, train_with, TrainConfig};

fn small_dataset() -> DatasetSplit {
    let log = random_log(&LogConfig { sessions: 240, n_items: 30, max_events: 8, ..Default::default() });
    let raw = parse_log_str(&log, &LogFormat::default()).unwrap();
    preprocess(raw, &PreprocessConfig { min_count: 2, ..Default::default() }).unwrap()
}

fn quick() -> TrainConfig {
    TrainConfig { dim: 8, batch_size: 32, max_epochs: 3, lr: 0.005, ..Default::default() }
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let d = small_dataset();
    let cfg = TrainConfig { lr: 0.0, max_epochs: 1, ..quick() };
    let out = train(&d, &cfg, &AblationConfig::new(Variant::Full)).unwrap();
    assert_eq!(out.params, ModelParams::init(dims_for(&d, 8), cfg.seed));
}

#[test]
fn same_seed_gives_identical_bytes_regardless_of_workers() {
    let d = small_dataset();
    let ab = AblationConfig::new(Variant::Full);
    let run = |workers| {
        let cfg = TrainConfig { workers, ..quick() };
        let out = train(&d, &cfg, &ab).unwrap();
        let report = evaluate_model(&out.params, &ab, &d.test, &cfg.ks).unwrap();
        (out.checkpoint(&cfg, &ab).to_bytes(), out.log_text(), report.to_json())
    };
    let a = run(Some(1));
    assert_eq!(a, run(Some(1)));
    assert_eq!(a, run(Some(3)));
    let other = train(&d, &TrainConfig { seed: 43, ..quick() }, &ab).unwrap();
    assert_ne!(other.checkpoint(&quick(), &ab).to_bytes(), a.0);
}

#[test]
fn one_small_adam_step_lowers_the_session_loss() {
    let d = small_dataset();
    let dims = dims_for(&d, 8);
    for (k, ex) in d.train.iter().take(10).enumerate() {
        let mut params = ModelParams::init(dims, k as u64);
        let ab = AblationConfig::new(Variant::Full);
        let opts = || ForwardOptions::eval(&ModelParams::init(dims, 0));
        let (before, grads) =
            run_forward(&params, &ex.view, &ab, opts()).unwrap().loss_and_grads(ex.view.target_item).unwrap();
        let mut adam = Adam::new(AdamConfig::with_lr(1e-4), params.tensors());
        adam.step(params.tensors_mut(), &grads);
        let after = run_forward(&params, &ex.view, &ab, opts()).unwrap().loss(ex.view.target_item).unwrap();
        assert!(after < before, "session {}: {before} -> {after}", ex.record.id);
    }
}

#[test]
fn best_epoch_is_the_best_validation_score() {
    let d = small_dataset();
    let cfg = TrainConfig { max_epochs: 6, patience: 2, ..quick() };
    let ab = AblationConfig::new(Variant::Full);
    let mut seen = Vec::new();
    let out = train_with(&d, &cfg, &ab, |l| seen.push(l.clone())).unwrap();
    assert_eq!(seen, out.log);
    let best = out.log.iter().map(|l| l.val_mrr20.unwrap()).fold(f64::MIN, f64::max);
    assert_eq!(out.log[out.best_epoch - 1].val_mrr20.unwrap(), best);
    let r = evaluate_model(&out.params, &ab, &d.validation, &[20]).unwrap();
    assert!((r.mrr[0] - best).abs() < 1e-9);
    let text = out.log_text();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "epoch,train_loss,val_H@20,val_M@20");
    assert_eq!(lines.len(), out.log.len() + 1);
    if out.stopped_early {
        assert!(out.log.len() < 6);
    }
}

#[test]
fn training_loss_falls_on_the_memorization_corpus() {
    let corpus = embsr::synthetic::memorization_corpus(&Default::default());
    let cfg = TrainConfig { dim: 16, lr: 0.01, dropout: 0.0, batch_size: 16, max_epochs: 8, ..Default::default() };
    let out = train(&corpus.data, &cfg, &AblationConfig::new(Variant::Full)).unwrap();
    assert!(out.log.last().unwrap().train_loss < 0.7 * out.log[0].train_loss);
}

#[test]
fn bad_configs_are_rejected_before_work() {
    let d = small_dataset();
    let ab = AblationConfig::new(Variant::Full);
    assert!(train(&d, &TrainConfig { workers: Some(0), ..quick() }, &ab).is_err());
    assert!(train(&d, &TrainConfig { lr: f64::NAN, ..quick() }, &ab).is_err());
    let empty = DatasetSplit { train: vec![], ..d };
    assert!(train(&empty, &quick(), &ab).is_err());
}
