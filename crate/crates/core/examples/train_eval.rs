//! Preprocesses a synthetic log, trains the full model with early stopping,
//! saves a checkpoint and evaluates it on the test split.

use embsr::checkpoint::Checkpoint;
use embsr::data::{parse_log_str, preprocess, LogFormat, PreprocessConfig};
use embsr::model::{AblationConfig, Variant};
use embsr::synthetic::{random_log, LogConfig};
use embsr::train::{evaluate_model, train_with, TrainConfig, LOG_HEADER};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let epochs = std::env::var("EPOCHS").ok().and_then(|v| v.parse().ok()).unwrap_or(10);
    let log = random_log(&LogConfig { sessions: 600, n_items: 40, ..Default::default() });
    let data = preprocess(
        parse_log_str(&log, &LogFormat::default())?,
        &PreprocessConfig { min_count: 2, ..Default::default() },
    )?;

    let cfg = TrainConfig { dim: 24, batch_size: 64, max_epochs: epochs, lr: 0.005, patience: 3, ..Default::default() };
    let ablation = AblationConfig::new(Variant::Full);
    println!("{LOG_HEADER}");
    let out = train_with(&data, &cfg, &ablation, |line| println!("{line}"))?;
    println!("best epoch {}{}", out.best_epoch, if out.stopped_early { " (stopped early)" } else { "" });

    let dir = std::env::temp_dir().join(format!("embsr-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("model.ckpt");
    out.checkpoint(&cfg, &ablation).save(&path)?;
    let restored = Checkpoint::load(&path)?;
    std::fs::remove_dir_all(&dir)?;

    let report = evaluate_model(&restored.params, &ablation, &data.test, &cfg.ks)?;
    println!("test ({} sessions): {}", report.sessions, report.to_json());
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
