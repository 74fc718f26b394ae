//! Trains each ablation variant on the same data and seed and prints a
//! comparison table.

use embsr::data::{parse_log_str, preprocess, LogFormat, PreprocessConfig};
use embsr::model::{AblationConfig, Variant};
use embsr::synthetic::{random_log, LogConfig};
use embsr::train::{evaluate_model, train, TrainConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let epochs = std::env::var("EPOCHS").ok().and_then(|v| v.parse().ok()).unwrap_or(8);
    let log = random_log(&LogConfig { sessions: 500, n_items: 40, ..Default::default() });
    let data = preprocess(
        parse_log_str(&log, &LogFormat::default())?,
        &PreprocessConfig { min_count: 2, ..Default::default() },
    )?;
    let cfg = TrainConfig { dim: 16, batch_size: 64, max_epochs: epochs, lr: 0.005, ..Default::default() };

    println!("variant\tH@5\tH@20\tM@5\tM@20\tbest_epoch");
    for variant in [Variant::Full, Variant::NoSelfAttention, Variant::NoGnn, Variant::NoFusion] {
        let ablation = AblationConfig::new(variant);
        let out = train(&data, &cfg, &ablation)?;
        let r = evaluate_model(&out.params, &ablation, &data.test, &[5, 20])?;
        println!("{variant}\t{:.2}\t{:.2}\t{:.2}\t{:.2}\t{}", r.hit[0], r.hit[1], r.mrr[0], r.mrr[1], out.best_epoch);
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
