//! Compares tape gradients with central differences for every parameter
//! block of a tiny model.

use embsr::data::MacroView;
use embsr::model::{run_forward, AblationConfig, Block, ForwardOptions, ModelDims, ModelParams, Variant};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let dims = ModelDims { dim: 8, n_items: 3, n_ops_aug: 3, max_positions: 6 };
    let params = ModelParams::init(dims, 3);
    let view = MacroView::new(vec![0, 1, 0], vec![vec![0, 1], vec![1], vec![1, 0]], 2, Some(1))?;
    let ablation = AblationConfig::new(Variant::Full);
    let target = 2;

    let loss_at = |p: &ModelParams| -> f64 {
        run_forward(p, &view, &ablation, ForwardOptions::eval(p)).and_then(|r| r.loss(target)).unwrap_or(f64::NAN)
    };
    let (loss, grads) =
        run_forward(&params, &view, &ablation, ForwardOptions::eval(&params))?.loss_and_grads(target)?;
    println!("loss {loss:.6}");

    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for (b, analytic) in Block::ALL.iter().zip(&grads) {
        let mut block_worst: f64 = 0.0;
        for idx in 0..analytic.len() {
            let mut p = params.clone();
            let orig = p.get(*b).as_slice()[idx];
            p.get_mut(*b).as_mut_slice()[idx] = orig + eps;
            let plus = loss_at(&p);
            p.get_mut(*b).as_mut_slice()[idx] = orig - eps;
            let minus = loss_at(&p);
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic.as_slice()[idx];
            block_worst = block_worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
        }
        println!("{:<24} {:>4} entries  max rel err {block_worst:.2e}", b.name(), analytic.len());
        worst = worst.max(block_worst);
    }
    println!("overall max relative error {worst:.2e}");
    if worst >= 1e-3 {
        return Err(format!("gradient mismatch {worst:.2e}").into());
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
