//! Evaluates the S-POP and SKNN baselines on a synthetic log, once with
//! revisited targets and once with targets that never appear earlier in the
//! session.

use embsr::baselines::{spop_predict, Popularity, Sknn, SknnConfig};
use embsr::data::{parse_log_str, preprocess, LogFormat, PreprocessConfig};
use embsr::metrics::{evaluate, DEFAULT_KS};
use embsr::synthetic::{random_log, LogConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    for fresh_targets in [false, true] {
        let log = random_log(&LogConfig { sessions: 800, fresh_targets, ..Default::default() });
        let data = preprocess(
            parse_log_str(&log, &LogFormat::default())?,
            &PreprocessConfig { min_count: 1, ..Default::default() },
        )?;
        let pop = Popularity::from_examples(&data.train, data.n_items());
        let sknn = Sknn::new(&data.train, data.n_items(), SknnConfig::default())?;

        println!("fresh_targets = {fresh_targets}, {} test sessions", data.test.len());
        let spop = evaluate(&data.test, &DEFAULT_KS, |ex| Ok(spop_predict(&ex.view, &pop)))?;
        println!("  S-POP {}", spop.to_json());
        let knn = evaluate(&data.test, &DEFAULT_KS, |ex| Ok(sknn.predict(&ex.view)))?;
        println!("  SKNN  {}", knn.to_json());
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
