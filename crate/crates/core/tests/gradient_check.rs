//! Analytic gradients against central finite differences.

mod common;

use common::{fd_grads, max_rel_err, random_mat, rng, FD_EPS};
use embsr::autodiff::{gru_cell, GruVars, Mat, Tape, TensorError, Var};
use embsr::data::MacroView;
use embsr::model::{run_forward, AblationConfig, Block, ForwardOptions, ModelDims, Variant};

/// Checks `loss = Σ w ⊙ f(inputs)` for random weights `w`.
fn check_op(name: &str, inputs: &[Mat], tol: f64, f: impl Fn(&mut Tape<'_>, &[Var]) -> Result<Var, TensorError>) {
    let mut r = rng(99);
    let probe = {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|m| tape.param_owned(m.clone())).collect();
        let out = f(&mut tape, &vars).unwrap();
        random_mat(tape.shape(out).0, tape.shape(out).1, &mut r)
    };
    let eval = |mats: &[Mat], want_grads: bool| -> (f64, Vec<Mat>) {
        let mut tape = Tape::new();
        let vars: Vec<Var> = mats.iter().map(|m| tape.param_owned(m.clone())).collect();
        let out = f(&mut tape, &vars).unwrap();
        let w = tape.constant(probe.clone());
        let prod = tape.hadamard(out, w).unwrap();
        let rows = tape.sum_rows(prod).unwrap();
        let ones = tape.constant(Mat::filled(tape.shape(rows).1, 1, 1.0));
        let loss = tape.matmul(rows, ones).unwrap();
        let value = tape.value(loss).get(0, 0);
        if !want_grads {
            return (value, vec![]);
        }
        let mut g = tape.backward(loss).unwrap();
        let grads =
            vars.iter().map(|&v| g.take(v).unwrap_or_else(|| Mat::zeros(tape.shape(v).0, tape.shape(v).1))).collect();
        (value, grads)
    };
    let (_, analytic) = eval(inputs, true);
    let numeric = fd_grads(inputs, FD_EPS, |m| eval(m, false).0);
    for (k, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
        let err = max_rel_err(a, n);
        assert!(err < tol, "{name}: input {k} relative error {err:e}");
    }
}

fn m34(seed: u64) -> Mat {
    random_mat(3, 4, &mut rng(seed))
}

#[test]
fn primitives_match_finite_differences() {
    let tol = 1e-6;
    let (a, b) = (m34(1), m34(2));
    check_op("matmul", &[a.clone(), b.transpose()], tol, |t, v| t.matmul(v[0], v[1]));
    check_op("transpose", std::slice::from_ref(&a), tol, |t, v| t.transpose(v[0]));
    check_op("add", &[a.clone(), b.clone()], tol, |t, v| t.add(v[0], v[1]));
    check_op("sub", &[a.clone(), b.clone()], tol, |t, v| t.sub(v[0], v[1]));
    check_op("hadamard", &[a.clone(), b.clone()], tol, |t, v| t.hadamard(v[0], v[1]));
    check_op("add_row", &[a.clone(), random_mat(1, 4, &mut rng(3))], tol, |t, v| t.add_row(v[0], v[1]));
    check_op("mul_col", &[a.clone(), random_mat(3, 1, &mut rng(4))], tol, |t, v| t.mul_col(v[0], v[1]));
    check_op("scalar_scale", std::slice::from_ref(&a), tol, |t, v| t.scalar_scale(v[0], -1.7));
    check_op("one_minus", std::slice::from_ref(&a), tol, |t, v| t.one_minus(v[0]));
    check_op("concat_cols", &[a.clone(), random_mat(3, 2, &mut rng(5))], tol, |t, v| t.concat_cols(v[0], v[1]));
    check_op("slice_cols", std::slice::from_ref(&a), tol, |t, v| t.slice_cols(v[0], 1, 2));
    check_op("concat_rows", &[a.clone(), b.clone()], tol, |t, v| t.concat_rows(&[v[0], v[1], v[0]]));
    check_op("gather_rows", std::slice::from_ref(&a), tol, |t, v| t.gather_rows(v[0], &[2, 0, 2, 1]));
    check_op("embedding_lookup", std::slice::from_ref(&a), tol, |t, v| t.embedding_lookup(v[0], &[1, 1]));
    check_op("scatter_add_rows", std::slice::from_ref(&a), tol, |t, v| t.scatter_add_rows(v[0], &[1, 0, 1], 2));
    check_op("sigmoid", std::slice::from_ref(&a), tol, |t, v| t.sigmoid(v[0]));
    check_op("tanh", std::slice::from_ref(&a), tol, |t, v| t.tanh(v[0]));
    check_op("relu", std::slice::from_ref(&a), tol, |t, v| t.relu(v[0]));
    check_op("softmax_row", std::slice::from_ref(&a), tol, |t, v| t.softmax_row(v[0]));
    check_op("layer_norm_row", std::slice::from_ref(&a), tol, |t, v| t.layer_norm_row(v[0]));
    check_op("l2_normalize_row", std::slice::from_ref(&a), tol, |t, v| t.l2_normalize_row(v[0]));
    check_op("sum_rows", std::slice::from_ref(&a), tol, |t, v| t.sum_rows(v[0]));
    check_op("mean_rows", std::slice::from_ref(&a), tol, |t, v| t.mean_rows(v[0]));
    check_op("row_dot", &[a.clone(), b.clone()], tol, |t, v| t.row_dot(v[0], v[1]));
    check_op("reshape", std::slice::from_ref(&a), tol, |t, v| t.reshape(v[0], 2, 6));
    check_op("cross_entropy", &[random_mat(1, 4, &mut rng(6))], tol, |t, v| t.cross_entropy(v[0], 2));
    check_op("dropout", std::slice::from_ref(&a), tol, |t, v| t.dropout(v[0], 0.3, Some(&mut rng(7))));
}

#[test]
fn gru_cell_matches_finite_differences() {
    let d = 3;
    let mut r = rng(11);
    // x, h, then W_z, W_r, W_h, U_z, U_r, U_h, b_z, b_r, b_h
    let mut inputs = vec![random_mat(1, d, &mut r), random_mat(1, d, &mut r)];
    inputs.extend((0..6).map(|_| random_mat(d, d, &mut r)));
    inputs.extend((0..3).map(|_| random_mat(1, d, &mut r)));
    check_op("gru_cell", &inputs, 1e-5, |t, v| {
        let p = GruVars {
            w_update: v[2],
            w_reset: v[3],
            w_candidate: v[4],
            u_update: v[5],
            u_reset: v[6],
            u_candidate: v[7],
            b_update: v[8],
            b_reset: v[9],
            b_candidate: v[10],
        };
        let h1 = gru_cell(t, v[0], v[1], &p)?;
        gru_cell(t, v[0], h1, &p)
    });
}

#[test]
fn composite_forward_matches_finite_differences() {
    // attention-like chain with fan-out
    let mut r = rng(21);
    let inputs = vec![random_mat(4, 3, &mut r), random_mat(3, 3, &mut r), random_mat(1, 3, &mut r)];
    check_op("composite", &inputs, 1e-4, |t, v| {
        let q = t.matmul(v[0], v[1])?;
        let qt = t.transpose(v[0])?;
        let s = t.matmul(q, qt)?;
        let a = t.softmax_row(s)?;
        let z = t.matmul(a, v[0])?;
        let z = t.add_row(z, v[2])?;
        let n = t.layer_norm_row(z)?;
        let g = t.sigmoid(n)?;
        let m = t.hadamard(g, z)?;
        let x = t.add(m, v[0])?;
        t.l2_normalize_row(x)
    });
}

#[test]
fn fan_out_doubles_gradient() {
    let mut tape = Tape::new();
    let x = tape.param_owned(Mat::from_vec(1, 1, vec![0.7]));
    let y = tape.add(x, x).unwrap();
    let g = tape.backward(y).unwrap();
    assert_eq!(g.get(x).unwrap().get(0, 0), 2.0);
}

fn toy_dims() -> ModelDims {
    ModelDims { dim: 6, n_items: 5, n_ops_aug: 3, max_positions: 8 }
}

fn toy_view() -> MacroView {
    MacroView::new(vec![0, 1, 2, 1], vec![vec![0], vec![1, 0], vec![0], vec![1]], 3, Some(1)).unwrap()
}

/// Loss/gradient check for every block of the given variant.
fn check_variant(variant: Variant, layers: usize) {
    let params = common::generic_params(toy_dims(), 3);
    let ablation = AblationConfig { variant, gnn_layers: layers, fixed_beta: None };
    let view = toy_view();
    let star_op = 1;
    let opts = || ForwardOptions { star_op, dropout: 0.0, rng: None };
    let (_, analytic) =
        run_forward(&params, &view, &ablation, opts()).unwrap().loss_and_grads(view.target_item).unwrap();
    let loss_at = |tensors: &[Mat]| {
        let p = embsr::model::ModelParams::from_tensors(params.dims, params.scale, tensors.to_vec()).unwrap();
        run_forward(&p, &view, &ablation, opts()).unwrap().loss(view.target_item).unwrap()
    };
    let numeric = fd_grads(params.tensors(), FD_EPS, loss_at);
    for (b, (a, n)) in Block::ALL.iter().zip(analytic.iter().zip(&numeric)) {
        let err = max_rel_err(a, n);
        assert!(err < 1e-3, "{variant}: block {} relative error {err:e}", b.name());
    }
}

#[test]
fn every_variant_matches_finite_differences() {
    for v in Variant::ALL {
        check_variant(v, 1);
    }
}

#[test]
fn stacked_gnn_layers_match_finite_differences() {
    check_variant(Variant::Full, 2);
}
