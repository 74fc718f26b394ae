//! Mini-batch training with Adam and early stopping on validation M@20.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::autodiff::{Adam, AdamConfig, Mat};
use crate::checkpoint::Checkpoint;
use crate::data::{DatasetSplit, Example};
use crate::metrics::{self, EvalError, EvalReport, DEFAULT_KS};
use crate::model::{self, run_forward, AblationConfig, ForwardOptions, ModelDims, ModelError, ModelParams};

/// Sessions per parallel work unit. Fixed so results do not depend on the
/// number of threads.
const CHUNK: usize = 16;

/// Smallest probability fed to the log in [`loss`].
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub dropout: f64,
    pub dim: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub ks: Vec<usize>,
    /// Epochs without a validation M@20 improvement before stopping.
    pub patience: usize,
    /// Chance that a training session shows the target-operation token on
    /// the star instead of the true next operation. At 1 training sees
    /// exactly what evaluation sees; at 0 the true operation is always used.
    pub target_op_mask_prob: f64,
    /// Worker threads; `None` uses the rayon default.
    pub workers: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            dropout: 0.1,
            dim: 100,
            batch_size: 512,
            max_epochs: 50,
            seed: 42,
            ks: DEFAULT_KS.to_vec(),
            patience: 5,
            target_op_mask_prob: 1.0,
            workers: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("lr must be a finite non-negative number");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        if self.dim == 0 || self.batch_size == 0 {
            return bad("dim and batch_size must be positive");
        }
        if self.ks.is_empty() || self.ks.contains(&0) {
            return bad("K list must be non-empty and positive");
        }
        if !(0.0..=1.0).contains(&self.target_op_mask_prob) {
            return bad("target_op_mask_prob must be in [0, 1]");
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("training split is empty")]
    EmptyTrain,
    #[error("non-finite loss at epoch {epoch}, batch {batch}; lower the learning rate")]
    Diverged { epoch: usize, batch: usize },
    #[error("session {session}: {source}")]
    Model { session: String, source: ModelError },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("thread pool: {0}")]
    Pool(String),
}

/// `-ln ŷ[target]`, clamped at [`PROB_FLOOR`]; the flag reports clamping.
pub fn loss(probs: &[f64], target: usize) -> (f64, bool) {
    let p = probs[target];
    if p < PROB_FLOOR {
        (-PROB_FLOOR.ln(), true)
    } else {
        (-p.ln(), false)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    /// `None` when there is no validation split.
    pub val_hit20: Option<f64>,
    pub val_mrr20: Option<f64>,
}

impl fmt::Display for EpochLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |v: Option<f64>| v.map_or("nan".to_string(), |v| format!("{v:.2}"));
        write!(f, "{},{:.6},{},{}", self.epoch, self.train_loss, opt(self.val_hit20), opt(self.val_mrr20))
    }
}

pub const LOG_HEADER: &str = "epoch,train_loss,val_H@20,val_M@20";

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the best validation epoch (the last epoch without
    /// a validation split).
    pub params: ModelParams,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainOutcome {
    pub fn log_text(&self) -> String {
        let mut s = format!("{LOG_HEADER}\n");
        for l in &self.log {
            s.push_str(&format!("{l}\n"));
        }
        s
    }

    pub fn checkpoint(&self, cfg: &TrainConfig, ablation: &AblationConfig) -> Checkpoint {
        Checkpoint { params: self.params.clone(), meta: run_meta(cfg, ablation, self.best_epoch) }
    }
}

fn run_meta(cfg: &TrainConfig, ablation: &AblationConfig, best_epoch: usize) -> Vec<(String, String)> {
    let mut meta = vec![
        ("variant".to_string(), ablation.variant.name().to_string()),
        ("gnn_layers".to_string(), ablation.gnn_layers.to_string()),
    ];
    if let Some(b) = ablation.fixed_beta {
        meta.push(("fixed_beta".into(), b.to_string()));
    }
    meta.extend([
        ("seed".to_string(), cfg.seed.to_string()),
        ("lr".to_string(), cfg.lr.to_string()),
        ("dropout".to_string(), cfg.dropout.to_string()),
        ("batch_size".to_string(), cfg.batch_size.to_string()),
        ("best_epoch".to_string(), best_epoch.to_string()),
    ]);
    meta
}

/// Model dimensions fitting every session of the dataset.
pub fn dims_for(data: &DatasetSplit, dim: usize) -> ModelDims {
    let longest = data.train.iter().chain(&data.validation).chain(&data.test).map(|e| e.view.micro_len()).max();
    ModelDims { dim, n_items: data.n_items(), n_ops_aug: data.n_ops_aug(), max_positions: longest.unwrap_or(1) + 1 }
}

/// Splits a seed into independent streams.
fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut x = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    x ^= x >> 31;
    x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^ (x >> 29)
}

/// Runs `f` on a pool of `workers` threads (the global pool when `None`).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, String> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| e.to_string())?;
            Ok(pool.install(f))
        }
    }
}

/// Evaluation-mode report of `params` on `examples`.
pub fn evaluate_model(
    params: &ModelParams,
    ablation: &AblationConfig,
    examples: &[Example],
    ks: &[usize],
) -> Result<EvalReport, EvalError> {
    metrics::evaluate(examples, ks, |ex| model::score(params, &ex.view, ablation).map_err(|e| e.to_string()))
}

/// Loss and summed gradients for one batch.
fn batch_gradients(
    params: &ModelParams,
    ablation: &AblationConfig,
    cfg: &TrainConfig,
    batch: &[(usize, &Example)],
    epoch: usize,
    target_op_token: usize,
) -> Result<(f64, Vec<Mat>), TrainError> {
    let chunks: Vec<(f64, Vec<Mat>)> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut total = 0.0;
            let mut sum = params.zeros_like();
            for &(slot, ex) in chunk {
                let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, epoch as u64 + 1, slot as u64));
                let star_op = match ex.view.target_op {
                    Some(op) if !rng.gen_bool(cfg.target_op_mask_prob) => op,
                    _ => target_op_token,
                };
                let opts = ForwardOptions { star_op, dropout: cfg.dropout, rng: Some(&mut rng) };
                let model_err = |source| TrainError::Model { session: ex.record.id.clone(), source };
                let run = run_forward(params, &ex.view, ablation, opts).map_err(model_err)?;
                let (l, grads) = run.loss_and_grads(ex.view.target_item).map_err(model_err)?;
                total += l;
                for (s, g) in sum.iter_mut().zip(&grads) {
                    s.add_assign(g);
                }
            }
            Ok((total, sum))
        })
        .collect::<Result<_, TrainError>>()?;
    let mut total = 0.0;
    let mut sum = params.zeros_like();
    for (l, g) in chunks {
        total += l;
        for (s, g) in sum.iter_mut().zip(&g) {
            s.add_assign(g);
        }
    }
    Ok((total, sum))
}

/// Trains from a fresh initialization, calling `on_epoch` after every epoch.
pub fn train_with(
    data: &DatasetSplit,
    cfg: &TrainConfig,
    ablation: &AblationConfig,
    mut on_epoch: impl FnMut(&EpochLog) + Send,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if data.train.is_empty() {
        return Err(TrainError::EmptyTrain);
    }
    with_workers(cfg.workers, move || {
        let dims = dims_for(data, cfg.dim);
        let mut params = ModelParams::init(dims, cfg.seed);
        let mut adam = Adam::new(AdamConfig::with_lr(cfg.lr), params.tensors());
        let mut eval_ks = cfg.ks.clone();
        if !eval_ks.contains(&20) {
            eval_ks.push(20);
        }
        let mut log = Vec::new();
        let mut best: Option<(f64, usize, ModelParams)> = None;
        let mut since_best = 0;
        let mut stopped_early = false;
        let mut order: Vec<usize> = (0..data.train.len()).collect();
        for epoch in 1..=cfg.max_epochs {
            let mut shuffle_rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, epoch as u64, u64::MAX));
            order.shuffle(&mut shuffle_rng);
            let mut epoch_loss = 0.0;
            for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
                let batch: Vec<(usize, &Example)> =
                    idx.iter().enumerate().map(|(k, &i)| (b * cfg.batch_size + k, &data.train[i])).collect();
                let (batch_loss, mut grads) =
                    batch_gradients(&params, ablation, cfg, &batch, epoch, dims.target_op_token())?;
                if !batch_loss.is_finite() {
                    return Err(TrainError::Diverged { epoch, batch: b + 1 });
                }
                let inv = 1.0 / batch.len() as f64;
                for g in &mut grads {
                    g.scale_in_place(inv);
                }
                adam.step(params.tensors_mut(), &grads);
                if !params.is_finite() {
                    return Err(TrainError::Diverged { epoch, batch: b + 1 });
                }
                epoch_loss += batch_loss;
            }
            let train_loss = epoch_loss / data.train.len() as f64;
            let entry = if data.validation.is_empty() {
                EpochLog { epoch, train_loss, val_hit20: None, val_mrr20: None }
            } else {
                let r = evaluate_model(&params, ablation, &data.validation, &eval_ks)?;
                EpochLog { epoch, train_loss, val_hit20: r.hit_at(20), val_mrr20: r.mrr_at(20) }
            };
            on_epoch(&entry);
            let score = entry.val_mrr20;
            log.push(entry);
            match score {
                None => best = Some((0.0, epoch, params.clone())),
                Some(m) => {
                    if best.as_ref().is_none_or(|(b, _, _)| m > *b) {
                        best = Some((m, epoch, params.clone()));
                        since_best = 0;
                    } else {
                        since_best += 1;
                        if since_best >= cfg.patience {
                            stopped_early = true;
                            break;
                        }
                    }
                }
            }
        }
        let (best_epoch, params) = match best {
            Some((_, e, p)) => (e, p),
            None => (0, params),
        };
        Ok(TrainOutcome { params, log, best_epoch, stopped_early })
    })
    .map_err(TrainError::Pool)?
}

pub fn train(data: &DatasetSplit, cfg: &TrainConfig, ablation: &AblationConfig) -> Result<TrainOutcome, TrainError> {
    train_with(data, cfg, ablation, |_| {})
}
