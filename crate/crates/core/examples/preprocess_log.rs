//! Parses a raw interaction log, filters and splits it, and shows how one
//! session becomes a macro-item view with a held-out target.

use embsr::data::{dataset_to_string, parse_log_str, preprocess, LogFormat, PreprocessConfig};
use embsr::synthetic::{random_log, LogConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let log = random_log(&LogConfig { sessions: 200, ..Default::default() });
    let raw = parse_log_str(&log, &LogFormat::default())?;
    println!("parsed {} sessions, {} events", raw.len(), raw.iter().map(|s| s.events.len()).sum::<usize>());

    let data = preprocess(raw, &PreprocessConfig { min_count: 3, ..Default::default() })?;
    println!(
        "kept {} items, {} operations; train/validation/test = {}/{}/{}",
        data.n_items(),
        data.n_ops(),
        data.train.len(),
        data.validation.len(),
        data.test.len()
    );

    let ex = &data.train[0];
    let item = |i: usize| data.items.token(i).unwrap_or("?").to_string();
    let op = |o: usize| data.ops.token(o).unwrap_or("?").to_string();
    println!("session {}:", ex.record.id);
    for e in &ex.record.events {
        println!("  {:>4} {}", item(e.item), op(e.op));
    }
    for (i, ops) in ex.view.items.iter().zip(&ex.view.op_seqs) {
        let ops: Vec<String> = ops.iter().map(|&o| op(o)).collect();
        println!("  macro {:>4} [{}]", item(*i), ops.join(", "));
    }
    println!("  target {} (first op {})", item(ex.view.target_item), ex.view.target_op.map_or("-".into(), op));

    let text = dataset_to_string(&data)?;
    println!("serialized dataset: {} lines", text.lines().count());
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
