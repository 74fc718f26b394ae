//! Loop-level reference of the full model's evaluation forward pass.

use embsr::data::MacroView;
use embsr::model::{Block, ModelParams};

type Row = Vec<f64>;

fn row(p: &ModelParams, b: Block, i: usize) -> Row {
    p.get(b).row(i).to_vec()
}

/// `x · W` for a row vector.
fn vm(x: &[f64], p: &ModelParams, b: Block) -> Row {
    let w = p.get(b);
    (0..w.cols()).map(|j| (0..w.rows()).map(|i| x[i] * w.get(i, j)).sum()).collect()
}

fn add(a: &[f64], b: &[f64]) -> Row {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cat(a: &[f64], b: &[f64]) -> Row {
    a.iter().chain(b).copied().collect()
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn softmax(v: &[f64]) -> Row {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Row = v.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

fn gru(p: &ModelParams, x: &[f64], h: &[f64]) -> Row {
    let gate = |w, u, b| -> Row {
        let s = add(&add(&vm(x, p, w), &vm(h, p, u)), &row(p, b, 0));
        s.into_iter().map(sig).collect()
    };
    let z = gate(Block::GruWUpdate, Block::GruUUpdate, Block::GruBUpdate);
    let r = gate(Block::GruWReset, Block::GruUReset, Block::GruBReset);
    let rh: Row = r.iter().zip(h).map(|(a, b)| a * b).collect();
    let pre =
        add(&add(&vm(x, p, Block::GruWCandidate), &vm(&rh, p, Block::GruUCandidate)), &row(p, Block::GruBCandidate, 0));
    (0..h.len()).map(|i| (1.0 - z[i]) * h[i] + z[i] * pre[i].tanh()).collect()
}

/// Returns `(star0, probabilities)`.
pub fn full_forward(p: &ModelParams, view: &MacroView, star_op: usize) -> (Row, Row) {
    let d = p.dims.dim;
    let sd = (d as f64).sqrt();
    let mut nodes_items: Vec<usize> = Vec::new();
    for &i in &view.items {
        if !nodes_items.contains(&i) {
            nodes_items.push(i);
        }
    }
    let node_of = |item: usize| nodes_items.iter().position(|&x| x == item).unwrap();
    let c = nodes_items.len();
    let h0: Vec<Row> = nodes_items.iter().map(|&i| row(p, Block::ItemEmbedding, i)).collect();
    let star0: Row = (0..d).map(|k| h0.iter().map(|r| r[k]).sum::<f64>() / c as f64).collect();

    let op_enc: Vec<Row> = view
        .op_seqs
        .iter()
        .map(|ops| ops.iter().fold(vec![0.0; d], |h, &o| gru(p, &row(p, Block::OpEmbedding, o), &h)))
        .collect();

    // one GNN layer
    let mut sum_in = vec![vec![0.0; d]; c];
    let mut sum_out = vec![vec![0.0; d]; c];
    for pos in 0..view.items.len().saturating_sub(1) {
        let (s, t) = (node_of(view.items[pos]), node_of(view.items[pos + 1]));
        let m_in = add(&vm(&cat(&h0[s], &op_enc[pos]), p, Block::MsgInWeight), &row(p, Block::MsgInBias, 0));
        let m_out = add(&vm(&cat(&h0[t], &op_enc[pos + 1]), p, Block::MsgOutWeight), &row(p, Block::MsgOutBias, 0));
        sum_in[t] = add(&sum_in[t], &m_in);
        sum_out[s] = add(&sum_out[s], &m_out);
    }
    let mut nodes = Vec::with_capacity(c);
    let ks = vm(&star0, p, Block::StarKey1);
    for i in 0..c {
        let a = cat(&sum_in[i], &sum_out[i]);
        let h = &h0[i];
        let g = |w, u| -> Row { add(&vm(&a, p, w), &vm(h, p, u)).into_iter().map(sig).collect() };
        let z = g(Block::GnnWUpdate, Block::GnnUUpdate);
        let r = g(Block::GnnWReset, Block::GnnUReset);
        let rh: Row = r.iter().zip(h).map(|(x, y)| x * y).collect();
        let cand: Row = add(&vm(&a, p, Block::GnnWCandidate), &vm(&rh, p, Block::GnnUCandidate))
            .into_iter()
            .map(f64::tanh)
            .collect();
        let gated: Row = (0..d).map(|k| h[k] + z[k] * (cand[k] - h[k])).collect();
        let alpha = dot(&vm(&gated, p, Block::StarQuery1), &ks) / sd;
        nodes.push((0..d).map(|k| gated[k] + alpha * (star0[k] - gated[k])).collect::<Row>());
    }
    let q2 = vm(&star0, p, Block::StarQuery2);
    let w = softmax(&nodes.iter().map(|n| dot(&q2, &vm(n, p, Block::StarKey2)) / sd).collect::<Row>());
    let star: Row = (0..d).map(|k| (0..c).map(|i| w[i] * nodes[i][k]).sum()).collect();

    let hf: Vec<Row> = (0..c)
        .map(|i| {
            let g: Row = vm(&cat(&h0[i], &nodes[i]), p, Block::HighwayWeight).into_iter().map(sig).collect();
            (0..d).map(|k| g[k] * h0[i][k] + (1.0 - g[k]) * nodes[i][k]).collect()
        })
        .collect();

    let mut x: Vec<Row> = Vec::new();
    let mut ops = Vec::new();
    for (pos, &item) in view.items.iter().enumerate() {
        for &o in &view.op_seqs[pos] {
            x.push(add(&hf[node_of(item)], &row(p, Block::OpEmbedding, o)));
            ops.push(o);
        }
    }
    let t = x.len();
    x.push(add(&star, &row(p, Block::OpEmbedding, star_op)));
    ops.push(star_op);
    let n_ops = p.dims.n_ops_aug;
    let key = |i: usize, j: usize| -> Row {
        add(
            &add(&x[j], &row(p, Block::RelationEmbedding, ops[i] * n_ops + ops[j])),
            &row(p, Block::PositionEmbedding, j),
        )
    };
    let zs: Row = {
        let i = t;
        let q = vm(&x[i], p, Block::AttnQuery);
        let a = softmax(&(0..=t).map(|j| dot(&q, &key(i, j)) / sd).collect::<Row>());
        let z: Row = (0..d).map(|k| (0..=t).map(|j| a[j] * key(i, j)[k]).sum()).collect();
        let hidden: Row =
            add(&vm(&z, p, Block::FfnW1), &row(p, Block::FfnB1, 0)).into_iter().map(|v| v.max(0.0)).collect();
        let res = add(&z, &add(&vm(&hidden, p, Block::FfnW2), &row(p, Block::FfnB2, 0)));
        let mean = res.iter().sum::<f64>() / d as f64;
        let var = res.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
        res.iter().map(|v| (v - mean) / (var + 1e-12).sqrt()).collect()
    };
    let recent = &x[t - 1];
    let beta: Row = add(&vm(&cat(&zs, recent), p, Block::FusionWeight), &row(p, Block::FusionBias, 0))
        .into_iter()
        .map(sig)
        .collect();
    let m: Row = (0..d).map(|k| beta[k] * zs[k] + (1.0 - beta[k]) * recent[k]).collect();
    let mn = dot(&m, &m).sqrt();
    let logits: Row = (0..p.dims.n_items)
        .map(|i| {
            let v = row(p, Block::ItemEmbedding, i);
            p.scale * dot(&m, &v) / (mn * dot(&v, &v).sqrt())
        })
        .collect();
    (star0, softmax(&logits))
}
