use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use embsr::baselines::{spop_predict, Popularity, Sknn};
use embsr::checkpoint::Checkpoint;
use embsr::config::RunConfig;
use embsr::data::{self, DatasetSplit, Example};
use embsr::metrics::{self, EvalReport};
use embsr::model::{self, AblationConfig, Variant};
use embsr::train::{self, with_workers, LOG_HEADER};

type Res<T> = Result<T, Box<dyn std::error::Error>>;

/// Session-based next-item recommendation from micro-behaviors.
#[derive(Parser)]
#[command(name = "embsr", version)]
struct Cli {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Seed for splitting and training (falls back to EMBSR_SEED).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for training and evaluation.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Dataset file written by `preprocess`.
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    /// Echo the effective configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a raw log, filter, split and write dataset + manifest.
    Preprocess {
        #[arg(long)]
        input: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        min_count: Option<u64>,
        /// `random` or `chrono`.
        #[arg(long)]
        split: Option<String>,
        /// Comma-separated operations to keep.
        #[arg(long)]
        op_filter: Option<String>,
    },
    /// Train a model and write a checkpoint.
    Train {
        /// Checkpoint path.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on a split.
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        split: Option<String>,
        /// Comma-separated cutoffs.
        #[arg(long)]
        k: Option<String>,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write the per-session ranks here.
        #[arg(long)]
        ranks: Option<PathBuf>,
    },
    /// Train and evaluate several variants with the same configuration.
    Ablate {
        /// Comma-separated variant names.
        #[arg(long, default_value = "full,ns,ng,nf")]
        variants: String,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Dump every intermediate activation for one session.
    Trace {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        session: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a non-neural baseline.
    Baseline {
        kind: BaselineKind,
        #[arg(long)]
        split: Option<String>,
        #[arg(long)]
        k: Option<String>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineKind {
    Spop,
    Sknn,
}

fn read_to_string(path: &Path) -> Res<String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn write(path: &Path, text: &str) -> Res<()> {
    fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()).into())
}

/// Defaults, then EMBSR_SEED, then the config file, then `--set`, then flags.
fn effective_config(cli: &Cli) -> Res<RunConfig> {
    let mut cfg = RunConfig::from_env()?;
    if let Some(path) = &cli.config {
        cfg.apply_text(&read_to_string(path)?)?;
    }
    for kv in &cli.set {
        cfg.apply_assignment(kv)?;
    }
    let mut set = |k: &str, v: Option<String>| match v {
        Some(v) => cfg.set(k, &v),
        None => Ok(()),
    };
    set("seed", cli.seed.map(|s| s.to_string()))?;
    set("workers", cli.workers.map(|w| w.to_string()))?;
    set("dataset", cli.dataset.as_ref().map(|p| p.display().to_string()))?;
    match &cli.command {
        Command::Preprocess { input, min_count, split, op_filter, .. } => {
            set("raw", input.as_ref().map(|p| p.display().to_string()))?;
            set("min_count", min_count.map(|m| m.to_string()))?;
            set("split_mode", split.clone())?;
            set("op_filter", op_filter.clone())?;
        }
        Command::Train { out, variant, epochs, lr, log } => {
            set("checkpoint", out.as_ref().map(|p| p.display().to_string()))?;
            set("variant", variant.clone())?;
            set("max_epochs", epochs.map(|e| e.to_string()))?;
            set("lr", lr.map(|l| l.to_string()))?;
            set("log", log.as_ref().map(|p| p.display().to_string()))?;
        }
        Command::Eval { checkpoint, split, k, report, .. } => {
            set("checkpoint", checkpoint.as_ref().map(|p| p.display().to_string()))?;
            set("eval_split", split.clone())?;
            set("ks", k.clone())?;
            set("report", report.as_ref().map(|p| p.display().to_string()))?;
        }
        Command::Ablate { report, .. } => {
            set("report", report.as_ref().map(|p| p.display().to_string()))?;
        }
        Command::Trace { checkpoint, .. } => {
            set("checkpoint", checkpoint.as_ref().map(|p| p.display().to_string()))?;
        }
        Command::Baseline { split, k, report, .. } => {
            set("eval_split", split.clone())?;
            set("ks", k.clone())?;
            set("report", report.as_ref().map(|p| p.display().to_string()))?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn require<'a>(p: &'a Option<PathBuf>, what: &str) -> Res<&'a Path> {
    p.as_deref().ok_or_else(|| format!("no {what} given (flag or `{what} = ...` in the config)").into())
}

fn load_dataset(cfg: &RunConfig) -> Res<DatasetSplit> {
    Ok(data::read_dataset(require(&cfg.dataset, "dataset")?)?)
}

fn split<'a>(d: &'a DatasetSplit, name: &str) -> &'a [Example] {
    match name {
        "train" => &d.train,
        "validation" => &d.validation,
        _ => &d.test,
    }
}

fn ablation_from_meta(ck: &Checkpoint) -> Res<AblationConfig> {
    let variant: Variant = ck.meta_value("variant").unwrap_or("full").parse()?;
    let mut a = AblationConfig::new(variant);
    if let Some(l) = ck.meta_value("gnn_layers") {
        a.gnn_layers = l.parse()?;
    }
    if let Some(b) = ck.meta_value("fixed_beta") {
        a.fixed_beta = Some(b.parse()?);
    }
    Ok(a)
}

fn check_compatible(ck: &Checkpoint, d: &DatasetSplit) -> Res<()> {
    let dims = ck.params.dims;
    if dims.n_items != d.n_items() || dims.n_ops_aug != d.n_ops_aug() {
        return Err(format!(
            "checkpoint expects {} items / {} operations but dataset has {} / {}",
            dims.n_items,
            dims.n_ops_aug - 1,
            d.n_items(),
            d.n_ops()
        )
        .into());
    }
    Ok(())
}

fn emit_report(cfg: &RunConfig, report: &EvalReport) -> Res<()> {
    let json = report.to_json();
    println!("{json}");
    if let Some(p) = &cfg.report {
        write(p, &format!("{json}\n"))?;
    }
    Ok(())
}

fn cmd_preprocess(cfg: &RunConfig, out: &Path) -> Res<()> {
    let raw = data::parse_log(require(&cfg.raw, "raw")?, &cfg.format)?;
    let d = data::preprocess(raw, &cfg.preprocess)?;
    fs::create_dir_all(out).map_err(|e| format!("{}: {e}", out.display()))?;
    data::write_dataset(&d, &out.join("dataset.txt"))?;
    data::write_manifest(&d, &out.join("manifest.txt"))?;
    write(&out.join("config.txt"), &cfg.to_text())?;
    if cfg.verbosity > 0 {
        println!(
            "items {} operations {} sessions train {} validation {} test {}",
            d.n_items(),
            d.n_ops(),
            d.train.len(),
            d.validation.len(),
            d.test.len()
        );
    }
    Ok(())
}

fn cmd_train(cfg: &RunConfig) -> Res<()> {
    let d = load_dataset(cfg)?;
    let ck_path = require(&cfg.checkpoint, "checkpoint")?;
    if cfg.verbosity > 0 {
        println!("{LOG_HEADER}");
    }
    let verbose = cfg.verbosity > 0;
    let out = train::train_with(&d, &cfg.train, &cfg.ablation, |l| {
        if verbose {
            println!("{l}");
        }
    })?;
    out.checkpoint(&cfg.train, &cfg.ablation).save(ck_path)?;
    if let Some(p) = &cfg.log {
        write(p, &out.log_text())?;
    }
    Ok(())
}

fn cmd_eval(cfg: &RunConfig, ranks: Option<&Path>) -> Res<()> {
    let d = load_dataset(cfg)?;
    let ck = Checkpoint::load(require(&cfg.checkpoint, "checkpoint")?)?;
    check_compatible(&ck, &d)?;
    let ablation = ablation_from_meta(&ck)?;
    let examples = split(&d, &cfg.eval_split);
    let report =
        with_workers(cfg.train.workers, || train::evaluate_model(&ck.params, &ablation, examples, &cfg.train.ks))??;
    if let Some(p) = ranks {
        write(p, &report.ranks_text())?;
    }
    emit_report(cfg, &report)
}

fn cmd_ablate(cfg: &RunConfig, variants: &str) -> Res<()> {
    let variants = variants.split(',').map(|v| v.parse::<Variant>()).collect::<Result<Vec<_>, _>>()?;
    let d = load_dataset(cfg)?;
    let examples = split(&d, &cfg.eval_split);
    let mut table = String::from("variant");
    for k in &cfg.train.ks {
        table.push_str(&format!("\tH@{k}"));
    }
    for k in &cfg.train.ks {
        table.push_str(&format!("\tM@{k}"));
    }
    table.push('\n');
    if cfg.verbosity > 0 {
        print!("{table}");
    }
    for v in variants {
        let ablation = AblationConfig { variant: v, ..cfg.ablation };
        let out = train::train(&d, &cfg.train, &ablation)?;
        let report = with_workers(cfg.train.workers, || {
            train::evaluate_model(&out.params, &ablation, examples, &cfg.train.ks)
        })??;
        let mut row = v.name().to_string();
        for x in report.hit.iter().chain(&report.mrr) {
            row.push_str(&format!("\t{x:.2}"));
        }
        if cfg.verbosity > 0 {
            println!("{row}");
        }
        table.push_str(&row);
        table.push('\n');
    }
    if let Some(p) = &cfg.report {
        write(p, &table)?;
    }
    Ok(())
}

fn cmd_trace(cfg: &RunConfig, session: &str, out: Option<&Path>) -> Res<()> {
    let d = load_dataset(cfg)?;
    let ck = Checkpoint::load(require(&cfg.checkpoint, "checkpoint")?)?;
    check_compatible(&ck, &d)?;
    let ablation = ablation_from_meta(&ck)?;
    let ex = d.find(session).ok_or_else(|| format!("session {session:?} not in dataset"))?;
    let (_, acts) = model::forward(&ck.params, &ex.view, &ablation)?;
    let text = acts.dump(&format!("session {session} variant {}", ablation.variant));
    match out {
        Some(p) => write(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_baseline(cfg: &RunConfig, kind: BaselineKind) -> Res<()> {
    let d = load_dataset(cfg)?;
    let examples = split(&d, &cfg.eval_split);
    let ks = &cfg.train.ks;
    let report = match kind {
        BaselineKind::Spop => {
            let pop = Popularity::from_examples(&d.train, d.n_items());
            with_workers(cfg.train.workers, || metrics::evaluate(examples, ks, |ex| Ok(spop_predict(&ex.view, &pop))))??
        }
        BaselineKind::Sknn => {
            let knn = Sknn::new(&d.train, d.n_items(), cfg.sknn)?;
            with_workers(cfg.train.workers, || metrics::evaluate(examples, ks, |ex| Ok(knn.predict(&ex.view))))??
        }
    };
    emit_report(cfg, &report)
}

fn run(cli: Cli) -> Res<()> {
    let cfg = effective_config(&cli)?;
    if cli.print_config {
        print!("{}", cfg.to_text());
        return Ok(());
    }
    match &cli.command {
        Command::Preprocess { out, .. } => cmd_preprocess(&cfg, out),
        Command::Train { .. } => cmd_train(&cfg),
        Command::Eval { ranks, .. } => cmd_eval(&cfg, ranks.as_deref()),
        Command::Ablate { variants, .. } => cmd_ablate(&cfg, variants),
        Command::Trace { session, out, .. } => cmd_trace(&cfg, session, out.as_deref()),
        Command::Baseline { kind, .. } => cmd_baseline(&cfg, *kind),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            eprintln!("{}", msg.lines().next().unwrap_or("invalid arguments"));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
