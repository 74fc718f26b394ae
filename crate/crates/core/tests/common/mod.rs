#![allow(dead_code)]

pub mod reference;

use embsr::autodiff::Mat;
use embsr::data::MacroView;
use embsr::model::{ModelDims, ModelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_EPS: f64 = 1e-5;

/// Relative error with a small floor so exact zeros compare as absolute error.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Central finite differences of `f` with respect to every entry of every input.
pub fn fd_grads(inputs: &[Mat], eps: f64, f: impl Fn(&[Mat]) -> f64) -> Vec<Mat> {
    let mut work = inputs.to_vec();
    let mut out = Vec::with_capacity(inputs.len());
    for k in 0..inputs.len() {
        let mut g = Mat::zeros(inputs[k].rows(), inputs[k].cols());
        for idx in 0..inputs[k].len() {
            let orig = work[k].as_slice()[idx];
            work[k].as_mut_slice()[idx] = orig + eps;
            let plus = f(&work);
            work[k].as_mut_slice()[idx] = orig - eps;
            let minus = f(&work);
            work[k].as_mut_slice()[idx] = orig;
            g.as_mut_slice()[idx] = (plus - minus) / (2.0 * eps);
        }
        out.push(g);
    }
    out
}

/// Largest per-entry relative error between two gradient sets.
pub fn max_rel_err(analytic: &Mat, numeric: &Mat) -> f64 {
    analytic.as_slice().iter().zip(numeric.as_slice()).map(|(&a, &n)| rel_err(a, n)).fold(0.0, f64::max)
}

pub fn random_mat(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Mat {
    Mat::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The worked example: items v1..v4 as 0..3, operations o1..o3 as 0..2.
pub fn worked_example_view() -> MacroView {
    MacroView::new(vec![0, 1, 2, 1, 2], vec![vec![0], vec![0], vec![0], vec![0, 1], vec![0, 1, 2]], 3, Some(0)).unwrap()
}

/// Parameters with every block (biases included) drawn at random.
pub fn generic_params(dims: ModelDims, seed: u64) -> ModelParams {
    let mut p = ModelParams::init(dims, seed);
    let mut r = rng(seed ^ 0x5eed);
    for t in p.tensors_mut() {
        for v in t.as_mut_slice() {
            *v = r.gen_range(-0.5..0.5);
        }
    }
    p
}

/// A random valid view: 1..=max_len macro items, 1..=3 operations each.
pub fn random_view(r: &mut ChaCha8Rng, n_items: usize, n_ops: usize, max_len: usize) -> MacroView {
    let n = r.gen_range(1..=max_len);
    let mut items: Vec<usize> = Vec::with_capacity(n);
    while items.len() < n {
        let i = r.gen_range(0..n_items);
        if items.last() != Some(&i) {
            items.push(i);
        }
    }
    let op_seqs = (0..n).map(|_| (0..r.gen_range(1..=3)).map(|_| r.gen_range(0..n_ops)).collect()).collect();
    let target = loop {
        let t = r.gen_range(0..n_items);
        if Some(&t) != items.last() {
            break t;
        }
    };
    MacroView::new(items, op_seqs, target, Some(r.gen_range(0..n_ops))).unwrap()
}
