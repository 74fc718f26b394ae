//! Trains the full model and two ablations on a corpus that can only be fit
//! by reading operations, then reports training-set H@1.

use std::time::Instant;

use embsr::model::{AblationConfig, Variant};
use embsr::synthetic::{memorization_corpus, MemorizationConfig};
use embsr::train::{evaluate_model, train, TrainConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let epochs = std::env::var("EPOCHS").ok().and_then(|v| v.parse().ok()).unwrap_or(200);
    let corpus = memorization_corpus(&MemorizationConfig::default());
    let twins = corpus.twins();
    let cfg =
        TrainConfig { dim: 32, lr: 0.003, dropout: 0.0, batch_size: 16, max_epochs: epochs, ..Default::default() };
    for variant in [Variant::Full, Variant::SgnnSeqSelf, Variant::SgnnSelf] {
        let started = Instant::now();
        let ablation = AblationConfig::new(variant);
        let out = train(&corpus.data, &cfg, &ablation)?;
        let all = evaluate_model(&out.params, &ablation, &corpus.data.train, &[1, 20])?;
        let tw = evaluate_model(&out.params, &ablation, &twins, &[1, 20])?;
        println!(
            "{variant:>14}: train H@1 {:6.2}  twin H@1 {:6.2}  final loss {:.4}  ({:.1}s)",
            all.hit[0],
            tw.hit[0],
            out.log.last().map_or(f64::NAN, |l| l.train_loss),
            started.elapsed().as_secs_f64()
        );
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
