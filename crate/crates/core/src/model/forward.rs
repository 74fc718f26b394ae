//! The session encoder and scorer, recorded on a [`Tape`].

use rand_chacha::ChaCha8Rng;

use super::{AblationConfig, Block, Encoder, Fusion, ModelError, ModelParams};
use crate::autodiff::{gru_cell, GruVars, Mat, Tape, Var};
use crate::data::MacroView;
use crate::graph::{RelationMatrix, SessionMultigraph};

/// Runtime switches for one forward pass.
pub struct ForwardOptions<'r> {
    /// Operation id placed on the star token (the operation assumed for the
    /// next item).
    pub star_op: usize,
    pub dropout: f64,
    /// `Some` enables dropout; `None` is evaluation mode.
    pub rng: Option<&'r mut ChaCha8Rng>,
}

impl ForwardOptions<'_> {
    /// Evaluation: no dropout, star token carries the target-operation token.
    pub fn eval(params: &ModelParams) -> Self {
        ForwardOptions { star_op: params.dims.target_op_token(), dropout: 0.0, rng: None }
    }
}

/// Vars for every named intermediate; `None` where the variant skips a stage.
#[derive(Clone, Debug, Default)]
pub(crate) struct ForwardVars {
    pub h0: Option<Var>,
    pub star0: Option<Var>,
    pub op_encodings: Option<Var>,
    pub layers: Vec<LayerVars>,
    pub h_last: Option<Var>,
    pub highway_gate: Option<Var>,
    pub h_final: Option<Var>,
    pub star_final: Option<Var>,
    pub inputs: Option<Var>,
    pub attention_logits: Option<Var>,
    pub attention_weights: Option<Var>,
    pub attention_out: Option<Var>,
    pub z: Option<Var>,
    pub z_star: Option<Var>,
    pub recent: Option<Var>,
    pub fusion_gate: Option<Var>,
    pub session: Option<Var>,
    pub logits: Option<Var>,
    pub probs: Option<Var>,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct LayerVars {
    pub messages_in: Var,
    pub messages_out: Var,
    pub aggregated: Var,
    pub gated: Var,
    pub star_gate: Var,
    pub nodes: Var,
    pub star_weights: Var,
    pub star: Var,
}

/// A recorded forward pass.
pub struct SessionForward<'p> {
    pub(crate) tape: Tape<'p>,
    pub(crate) params: Vec<Var>,
    pub(crate) vars: ForwardVars,
    pub(crate) graph: SessionMultigraph,
}

impl<'p> SessionForward<'p> {
    pub fn tape(&self) -> &Tape<'p> {
        &self.tape
    }

    pub fn graph(&self) -> &SessionMultigraph {
        &self.graph
    }

    /// Next-item distribution over the whole item vocabulary.
    pub fn probabilities(&self) -> &[f64] {
        self.tape.value(self.vars.probs.expect("probabilities are always recorded")).as_slice()
    }

    /// Cosine logits `m̂ᵀv̂_i` before the softmax.
    pub fn logits(&self) -> &[f64] {
        self.tape.value(self.vars.logits.expect("logits are always recorded")).as_slice()
    }

    /// The session representation `m`.
    pub fn session_vector(&self) -> &Mat {
        self.tape.value(self.vars.session.expect("session vector is always recorded"))
    }

    pub(crate) fn value(&self, v: Option<Var>) -> Option<Mat> {
        v.map(|v| self.tape.value(v).clone())
    }

    /// Cross-entropy against `target` and the gradient for every block.
    pub fn loss_and_grads(mut self, target: usize) -> Result<(f64, Vec<Mat>), ModelError> {
        let logits = self.vars.logits.expect("logits are always recorded");
        let loss = self.tape.cross_entropy(logits, target)?;
        let mut grads = self.tape.backward(loss)?;
        let value = self.tape.value(loss).get(0, 0);
        let out = self
            .params
            .iter()
            .map(|&v| {
                grads.take(v).unwrap_or_else(|| {
                    let (r, c) = self.tape.shape(v);
                    Mat::zeros(r, c)
                })
            })
            .collect();
        Ok((value, out))
    }

    /// Loss value only.
    pub fn loss(mut self, target: usize) -> Result<f64, ModelError> {
        let logits = self.vars.logits.expect("logits are always recorded");
        let loss = self.tape.cross_entropy(logits, target)?;
        Ok(self.tape.value(loss).get(0, 0))
    }
}

struct Ctx<'a, 't, 'p> {
    tape: &'t mut Tape<'p>,
    p: &'a [Var],
    dim: usize,
}

impl Ctx<'_, '_, '_> {
    fn b(&self, block: Block) -> Var {
        self.p[block.index()]
    }

    fn gru(&self) -> GruVars {
        GruVars {
            w_update: self.b(Block::GruWUpdate),
            w_reset: self.b(Block::GruWReset),
            w_candidate: self.b(Block::GruWCandidate),
            u_update: self.b(Block::GruUUpdate),
            u_reset: self.b(Block::GruUReset),
            u_candidate: self.b(Block::GruUCandidate),
            b_update: self.b(Block::GruBUpdate),
            b_reset: self.b(Block::GruBReset),
            b_candidate: self.b(Block::GruBCandidate),
        }
    }

    fn inv_sqrt_d(&self) -> f64 {
        1.0 / (self.dim as f64).sqrt()
    }

    /// Runs the GRU over the given rows from a zero state; returns every hidden state.
    fn gru_sequence(&mut self, inputs: &[Var]) -> Result<Vec<Var>, ModelError> {
        let gru = self.gru();
        let mut h = self.tape.constant(Mat::zeros(1, self.dim));
        let mut states = Vec::with_capacity(inputs.len());
        for &x in inputs {
            h = gru_cell(self.tape, x, h, &gru)?;
            states.push(h);
        }
        Ok(states)
    }

    /// Last GRU state of each macro item's operation sequence, stacked `n × d`.
    fn encode_op_sequences(&mut self, view: &MacroView) -> Result<Var, ModelError> {
        let table = self.b(Block::OpEmbedding);
        let mut rows = Vec::with_capacity(view.len());
        for ops in &view.op_seqs {
            let steps =
                ops.iter().map(|&op| self.tape.embedding_lookup(table, &[op])).collect::<Result<Vec<_>, _>>()?;
            let states = self.gru_sequence(&steps)?;
            rows.push(*states.last().expect("operation sequences are non-empty"));
        }
        Ok(self.tape.concat_rows(&rows)?)
    }

    fn linear(&mut self, x: Var, w: Block, bias: Option<Block>) -> Result<Var, ModelError> {
        let y = self.tape.matmul(x, self.b(w))?;
        Ok(match bias {
            Some(b) => self.tape.add_row(y, self.b(b))?,
            None => y,
        })
    }

    fn gnn_layer(
        &mut self,
        graph: &SessionMultigraph,
        nodes: Var,
        star: Var,
        op_enc: Var,
    ) -> Result<LayerVars, ModelError> {
        let c = graph.node_count();
        let edges = graph.edges();
        let src: Vec<usize> = edges.iter().map(|e| e.src).collect();
        let dst: Vec<usize> = edges.iter().map(|e| e.dst).collect();
        let src_pos: Vec<usize> = edges.iter().map(|e| e.src_pos).collect();
        let dst_pos: Vec<usize> = edges.iter().map(|e| e.dst_pos).collect();

        // Incoming message to dst: neighbor src with the operation encoding at src's position.
        let e_src = self.tape.gather_rows(nodes, &src)?;
        let h_src = self.tape.gather_rows(op_enc, &src_pos)?;
        let cat_in = self.tape.concat_cols(e_src, h_src)?;
        let messages_in = self.linear(cat_in, Block::MsgInWeight, Some(Block::MsgInBias))?;
        let sum_in = self.tape.scatter_add_rows(messages_in, &dst, c)?;

        // Outgoing message to src: neighbor dst with the operation encoding at dst's position.
        let e_dst = self.tape.gather_rows(nodes, &dst)?;
        let h_dst = self.tape.gather_rows(op_enc, &dst_pos)?;
        let cat_out = self.tape.concat_cols(e_dst, h_dst)?;
        let messages_out = self.linear(cat_out, Block::MsgOutWeight, Some(Block::MsgOutBias))?;
        let sum_out = self.tape.scatter_add_rows(messages_out, &src, c)?;

        let aggregated = self.tape.concat_cols(sum_in, sum_out)?;

        // Gated update.
        let gate = |ctx: &mut Self, w: Block, u: Block| -> Result<Var, ModelError> {
            let aw = ctx.tape.matmul(aggregated, ctx.b(w))?;
            let hu = ctx.tape.matmul(nodes, ctx.b(u))?;
            let s = ctx.tape.add(aw, hu)?;
            Ok(ctx.tape.sigmoid(s)?)
        };
        let update = gate(self, Block::GnnWUpdate, Block::GnnUUpdate)?;
        let reset = gate(self, Block::GnnWReset, Block::GnnUReset)?;
        let aw = self.tape.matmul(aggregated, self.b(Block::GnnWCandidate))?;
        let rh = self.tape.hadamard(reset, nodes)?;
        let rhu = self.tape.matmul(rh, self.b(Block::GnnUCandidate))?;
        let pre = self.tape.add(aw, rhu)?;
        let candidate = self.tape.tanh(pre)?;
        let delta = self.tape.sub(candidate, nodes)?;
        let step = self.tape.hadamard(update, delta)?;
        let gated = self.tape.add(nodes, step)?;

        // Satellite/star gate: α_i = (ê_i W_q1)·(e_s W_k1) / √d, unbounded.
        let q = self.tape.matmul(gated, self.b(Block::StarQuery1))?;
        let k = self.tape.matmul(star, self.b(Block::StarKey1))?;
        let kt = self.tape.transpose(k)?;
        let qk = self.tape.matmul(q, kt)?;
        let star_gate = self.tape.scalar_scale(qk, self.inv_sqrt_d())?;
        let star_rows = self.tape.gather_rows(star, &vec![0; c])?;
        let toward_star = self.tape.sub(star_rows, gated)?;
        let shift = self.tape.mul_col(toward_star, star_gate)?;
        let new_nodes = self.tape.add(gated, shift)?;

        // Star update: attention over the new satellites with the old star as query.
        let keys = self.tape.matmul(new_nodes, self.b(Block::StarKey2))?;
        let query = self.tape.matmul(star, self.b(Block::StarQuery2))?;
        let keys_t = self.tape.transpose(keys)?;
        let scores = self.tape.matmul(query, keys_t)?;
        let scores = self.tape.scalar_scale(scores, self.inv_sqrt_d())?;
        let star_weights = self.tape.softmax_row(scores)?;
        let new_star = self.tape.matmul(star_weights, new_nodes)?;

        Ok(LayerVars {
            messages_in,
            messages_out,
            aggregated,
            gated,
            star_gate,
            nodes: new_nodes,
            star_weights,
            star: new_star,
        })
    }

    /// `g = σ([h0; h_last]·W_g)`, `h_f = g ⊙ h0 + (1 − g) ⊙ h_last`.
    fn highway(&mut self, h0: Var, h_last: Var) -> Result<(Var, Var), ModelError> {
        let cat = self.tape.concat_cols(h0, h_last)?;
        let pre = self.tape.matmul(cat, self.b(Block::HighwayWeight))?;
        let g = self.tape.sigmoid(pre)?;
        let out = self.blend(g, h0, h_last)?;
        Ok((g, out))
    }

    /// `g ⊙ a + (1 − g) ⊙ b`.
    fn blend(&mut self, g: Var, a: Var, b: Var) -> Result<Var, ModelError> {
        let ga = self.tape.hadamard(g, a)?;
        let one_minus = self.tape.one_minus(g)?;
        let gb = self.tape.hadamard(one_minus, b)?;
        Ok(self.tape.add(ga, gb)?)
    }
}

pub(crate) fn attention_slots(t_plus_one: usize) -> (Vec<usize>, Vec<usize>) {
    let rows = (0..t_plus_one).flat_map(|i| std::iter::repeat_n(i, t_plus_one)).collect();
    let cols = (0..t_plus_one).flat_map(|_| 0..t_plus_one).collect();
    (rows, cols)
}

/// Records the full forward pass for one session.
pub fn run_forward<'p>(
    params: &'p ModelParams,
    view: &MacroView,
    ablation: &AblationConfig,
    opts: ForwardOptions<'_>,
) -> Result<SessionForward<'p>, ModelError> {
    let features = ablation.variant.features();
    let dims = params.dims;
    let d = dims.dim;
    validate_view(view, params, opts.star_op)?;
    if let Some(beta) = ablation.fixed_beta {
        if !(0.0..=1.0).contains(&beta) {
            return Err(ModelError::Config(format!("fixed_beta {beta} outside [0, 1]")));
        }
    }
    let t = view.micro_len();
    if t + 1 > dims.max_positions {
        return Err(ModelError::SessionTooLong { slots: t + 1, max: dims.max_positions });
    }

    let graph = SessionMultigraph::build(view);
    let mut tape = Tape::new();
    let pvars: Vec<Var> = params.tensors().iter().map(|m| tape.param(m)).collect();
    let mut vars = ForwardVars::default();
    let mut rng = opts.rng;
    let mut ctx = Ctx { tape: &mut tape, p: &pvars, dim: d };

    let micro: Vec<(usize, usize, usize)> = view.micro_behaviors().collect();
    let flat_ops: Vec<usize> = micro.iter().map(|m| m.2).collect();

    // Item-side encoding: per-micro-behavior rows and the star/global row.
    let (item_rows, star_row) = match features.encoder {
        Encoder::StarGnn | Encoder::Embeddings => {
            let h0 = ctx.tape.embedding_lookup(ctx.b(Block::ItemEmbedding), graph.nodes())?;
            let star0 = ctx.tape.mean_rows(h0)?;
            vars.h0 = Some(h0);
            vars.star0 = Some(star0);
            let (h_final, star) = if features.encoder == Encoder::StarGnn {
                let op_enc = if features.op_gru {
                    ctx.encode_op_sequences(view)?
                } else {
                    ctx.tape.constant(Mat::zeros(view.len(), d))
                };
                vars.op_encodings = Some(op_enc);
                let (mut nodes, mut star) = (h0, star0);
                for _ in 0..ablation.gnn_layers {
                    let layer = ctx.gnn_layer(&graph, nodes, star, op_enc)?;
                    nodes = layer.nodes;
                    star = layer.star;
                    vars.layers.push(layer);
                }
                vars.h_last = Some(nodes);
                let (g, h_final) = ctx.highway(h0, nodes)?;
                vars.highway_gate = Some(g);
                (h_final, star)
            } else {
                (h0, star0)
            };
            vars.h_final = Some(h_final);
            vars.star_final = Some(star);
            let node_rows: Vec<usize> = micro.iter().map(|&(pos, _, _)| graph.node_of()[pos]).collect();
            (ctx.tape.gather_rows(h_final, &node_rows)?, star)
        }
        Encoder::Rnn => {
            let items: Vec<usize> = micro.iter().map(|m| m.1).collect();
            let item_emb = ctx.tape.embedding_lookup(ctx.b(Block::ItemEmbedding), &items)?;
            let op_emb = ctx.tape.embedding_lookup(ctx.b(Block::OpEmbedding), &flat_ops)?;
            let inputs = ctx.tape.add(item_emb, op_emb)?;
            let steps = (0..t).map(|i| ctx.tape.gather_rows(inputs, &[i])).collect::<Result<Vec<_>, _>>()?;
            let states = ctx.gru_sequence(&steps)?;
            let hidden = ctx.tape.concat_rows(&states)?;
            let star = ctx.tape.mean_rows(hidden)?;
            vars.h_final = Some(hidden);
            vars.star_final = Some(star);
            (hidden, star)
        }
    };

    // Attention inputs: x_i = e_{v_i} + e_{o_i}, star row appended last.
    let (x_items, x_star) = if features.ops_in_inputs && features.encoder != Encoder::Rnn {
        let op_rows = ctx.tape.embedding_lookup(ctx.b(Block::OpEmbedding), &flat_ops)?;
        let star_op = ctx.tape.embedding_lookup(ctx.b(Block::OpEmbedding), &[opts.star_op])?;
        (ctx.tape.add(item_rows, op_rows)?, ctx.tape.add(star_row, star_op)?)
    } else {
        (item_rows, star_row)
    };
    let inputs = ctx.tape.concat_rows(&[x_items, x_star])?;
    vars.inputs = Some(inputs);
    let slots = t + 1;

    let z_star = if features.attention {
        let (row_idx, col_idx) = attention_slots(slots);
        let mut keys = ctx.tape.gather_rows(inputs, &col_idx)?;
        if features.relation {
            let mut ops = flat_ops.clone();
            ops.push(opts.star_op);
            let rel = RelationMatrix::build(&ops, dims.n_ops_aug)?;
            let rel_rows = ctx.tape.embedding_lookup(ctx.b(Block::RelationEmbedding), rel.as_slice())?;
            keys = ctx.tape.add(keys, rel_rows)?;
        }
        if features.position {
            let pos_rows = ctx.tape.embedding_lookup(ctx.b(Block::PositionEmbedding), &col_idx)?;
            keys = ctx.tape.add(keys, pos_rows)?;
        }
        let queries = ctx.linear(inputs, Block::AttnQuery, None)?;
        let q_rows = ctx.tape.gather_rows(queries, &row_idx)?;
        let scores = ctx.tape.row_dot(q_rows, keys)?;
        let scores = ctx.tape.scalar_scale(scores, ctx.inv_sqrt_d())?;
        let logits = ctx.tape.reshape(scores, slots, slots)?;
        let weights = ctx.tape.softmax_row(logits)?;
        let weights_flat = ctx.tape.reshape(weights, slots * slots, 1)?;
        let weighted = ctx.tape.mul_col(keys, weights_flat)?;
        let attn = ctx.tape.scatter_add_rows(weighted, &row_idx, slots)?;
        vars.attention_logits = Some(logits);
        vars.attention_weights = Some(weights);
        vars.attention_out = Some(attn);
        let attn = ctx.tape.dropout(attn, opts.dropout, rng.as_deref_mut())?;
        let z = ffn_block(&mut ctx, attn, opts.dropout, rng)?;
        vars.z = Some(z);
        ctx.tape.gather_rows(z, &[slots - 1])?
    } else {
        ctx.tape.gather_rows(inputs, &[slots - 1])?
    };
    vars.z_star = Some(z_star);

    let recent = ctx.tape.gather_rows(inputs, &[t - 1])?;
    vars.recent = Some(recent);

    let session = match (features.fusion, ablation.fixed_beta) {
        (Fusion::Gate, Some(beta)) => {
            let a = ctx.tape.scalar_scale(z_star, beta)?;
            let b = ctx.tape.scalar_scale(recent, 1.0 - beta)?;
            ctx.tape.add(a, b)?
        }
        (Fusion::Gate, None) => {
            let cat = ctx.tape.concat_cols(z_star, recent)?;
            let pre = ctx.linear(cat, Block::FusionWeight, Some(Block::FusionBias))?;
            let gate = ctx.tape.sigmoid(pre)?;
            vars.fusion_gate = Some(gate);
            ctx.blend(gate, z_star, recent)?
        }
        (Fusion::Linear, _) => {
            let cat = ctx.tape.concat_cols(z_star, recent)?;
            ctx.linear(cat, Block::FusionWeight, Some(Block::FusionBias))?
        }
    };
    vars.session = Some(session);

    let logits = score_logits(ctx.tape, session, ctx.b(Block::ItemEmbedding), params.scale)?;
    vars.logits = Some(logits);
    vars.probs = Some(ctx.tape.softmax_row(logits)?);

    Ok(SessionForward { tape, params: pvars, vars, graph })
}

/// `FFN(z) = max(0, z·W1 + b1)·W2 + b2`, then `LayerNorm(z + Dropout(FFN(z)))`.
fn ffn_block(ctx: &mut Ctx<'_, '_, '_>, z: Var, dropout: f64, rng: Option<&mut ChaCha8Rng>) -> Result<Var, ModelError> {
    let hidden = ctx.linear(z, Block::FfnW1, Some(Block::FfnB1))?;
    let hidden = ctx.tape.relu(hidden)?;
    let out = ctx.linear(hidden, Block::FfnW2, Some(Block::FfnB2))?;
    let out = ctx.tape.dropout(out, dropout, rng)?;
    let res = ctx.tape.add(z, out)?;
    Ok(ctx.tape.layer_norm_row(res)?)
}

/// `w_k · L2Norm(m) · L2Norm(V)ᵀ` against the initial item embeddings.
fn score_logits(tape: &mut Tape<'_>, session: Var, items: Var, scale: f64) -> Result<Var, ModelError> {
    let m = tape.l2_normalize_row(session)?;
    let m = tape.scalar_scale(m, scale)?;
    let v = tape.l2_normalize_row(items)?;
    let vt = tape.transpose(v)?;
    Ok(tape.matmul(m, vt)?)
}

fn validate_view(view: &MacroView, params: &ModelParams, star_op: usize) -> Result<(), ModelError> {
    let dims = params.dims;
    let bad = |msg: String| Err(ModelError::InvalidView(msg));
    if view.items.is_empty() || view.items.len() != view.op_seqs.len() || view.op_seqs.iter().any(Vec::is_empty) {
        return bad("view needs at least one macro item and a non-empty operation list per item".into());
    }
    if let Some(&i) = view.items.iter().find(|&&i| i >= dims.n_items) {
        return bad(format!("item {i} outside vocabulary of {}", dims.n_items));
    }
    if view.target_item >= dims.n_items {
        return bad(format!("target item {} outside vocabulary of {}", view.target_item, dims.n_items));
    }
    if let Some(&o) = view.op_seqs.iter().flatten().find(|&&o| o >= dims.n_ops_aug) {
        return bad(format!("operation {o} outside vocabulary of {}", dims.n_ops_aug));
    }
    if star_op >= dims.n_ops_aug {
        return bad(format!("star operation {star_op} outside vocabulary of {}", dims.n_ops_aug));
    }
    Ok(())
}
