//! Runs one forward pass and prints every named intermediate, the attention
//! weights and the top-ranked items.

use embsr::data::MacroView;
use embsr::model::{forward, AblationConfig, ModelDims, ModelParams, Variant};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let dims = ModelDims { dim: 6, n_items: 8, n_ops_aug: 4, max_positions: 12 };
    let params = ModelParams::init(dims, 11);
    let view =
        MacroView::new(vec![0, 1, 2, 1, 2], vec![vec![0], vec![0], vec![0], vec![0, 1], vec![0, 1, 2]], 3, Some(0))?;

    let (probs, acts) = forward(&params, &view, &AblationConfig::new(Variant::Full))?;
    for (name, m) in acts.named() {
        println!("{name:<22} {}x{}", m.rows(), m.cols());
    }
    if let Some(w) = &acts.attention_weights {
        let star = w.rows() - 1;
        let row: Vec<String> = (0..w.cols()).map(|j| format!("{:.3}", w.get(star, j))).collect();
        println!("star-slot attention: [{}]", row.join(", "));
    }
    if let Some(g) = &acts.fusion_gate {
        println!("fusion gate mean {:.4}", g.as_slice().iter().sum::<f64>() / g.len() as f64);
    }
    let mut ranked: Vec<usize> = (0..probs.len()).collect();
    ranked.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    for &i in ranked.iter().take(3) {
        println!("item {i}: p = {:.4}", probs[i]);
    }
    println!("sum of probabilities {:.12}", probs.iter().sum::<f64>());

    let dump = acts.dump("session demo variant full");
    println!("trace dump: {} lines", dump.lines().count());
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
