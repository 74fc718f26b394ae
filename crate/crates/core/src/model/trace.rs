use std::fmt::Write as _;

use super::forward::{ForwardVars, SessionForward};
use crate::autodiff::Mat;

/// Values of one GNN layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerActivations {
    /// One row per edge: message to the edge's destination.
    pub messages_in: Mat,
    /// One row per edge: message to the edge's source.
    pub messages_out: Mat,
    /// `[Σ incoming ; Σ outgoing]` per node, `c × 2d`.
    pub aggregated: Mat,
    /// Gated-GNN output before mixing in the star node.
    pub gated: Mat,
    /// Per-node star gate, `c × 1`.
    pub star_gate: Mat,
    pub nodes: Mat,
    /// Star attention weights over satellites, `1 × c`.
    pub star_weights: Mat,
    pub star: Mat,
}

/// Every named intermediate of a forward pass. Stages a variant skips are `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardActivations {
    pub h0: Option<Mat>,
    pub star0: Option<Mat>,
    pub op_encodings: Option<Mat>,
    pub layers: Vec<LayerActivations>,
    pub h_last: Option<Mat>,
    pub highway_gate: Option<Mat>,
    pub h_final: Option<Mat>,
    pub star_final: Option<Mat>,
    /// Attention inputs, micro-behaviors then the star row.
    pub inputs: Mat,
    pub attention_logits: Option<Mat>,
    pub attention_weights: Option<Mat>,
    pub attention_out: Option<Mat>,
    pub z: Option<Mat>,
    pub z_star: Mat,
    pub recent: Mat,
    pub fusion_gate: Option<Mat>,
    pub session: Mat,
    pub logits: Mat,
    pub probabilities: Mat,
}

impl ForwardActivations {
    pub(crate) fn collect(run: &SessionForward<'_>) -> Self {
        let v: &ForwardVars = &run.vars;
        let req = |x| run.value(x).expect("recorded for every variant");
        let layers = v
            .layers
            .iter()
            .map(|l| {
                let g = |x| run.tape().value(x).clone();
                LayerActivations {
                    messages_in: g(l.messages_in),
                    messages_out: g(l.messages_out),
                    aggregated: g(l.aggregated),
                    gated: g(l.gated),
                    star_gate: g(l.star_gate),
                    nodes: g(l.nodes),
                    star_weights: g(l.star_weights),
                    star: g(l.star),
                }
            })
            .collect();
        Self {
            h0: run.value(v.h0),
            star0: run.value(v.star0),
            op_encodings: run.value(v.op_encodings),
            layers,
            h_last: run.value(v.h_last),
            highway_gate: run.value(v.highway_gate),
            h_final: run.value(v.h_final),
            star_final: run.value(v.star_final),
            inputs: req(v.inputs),
            attention_logits: run.value(v.attention_logits),
            attention_weights: run.value(v.attention_weights),
            attention_out: run.value(v.attention_out),
            z: run.value(v.z),
            z_star: req(v.z_star),
            recent: req(v.recent),
            fusion_gate: run.value(v.fusion_gate),
            session: req(v.session),
            logits: req(v.logits),
            probabilities: req(v.probs),
        }
    }

    /// `(name, value)` for every recorded activation, in pipeline order.
    pub fn named(&self) -> Vec<(String, &Mat)> {
        fn opt<'a>(name: &str, m: &'a Option<Mat>, out: &mut Vec<(String, &'a Mat)>) {
            if let Some(m) = m {
                out.push((name.to_string(), m));
            }
        }
        let mut out: Vec<(String, &Mat)> = Vec::new();
        opt("h0", &self.h0, &mut out);
        opt("star0", &self.star0, &mut out);
        opt("op_encodings", &self.op_encodings, &mut out);
        for (i, l) in self.layers.iter().enumerate() {
            for (name, m) in [
                ("messages_in", &l.messages_in),
                ("messages_out", &l.messages_out),
                ("aggregated", &l.aggregated),
                ("gated", &l.gated),
                ("star_gate", &l.star_gate),
                ("nodes", &l.nodes),
                ("star_weights", &l.star_weights),
                ("star", &l.star),
            ] {
                out.push((format!("layer{i}.{name}"), m));
            }
        }
        opt("h_last", &self.h_last, &mut out);
        opt("highway_gate", &self.highway_gate, &mut out);
        opt("h_final", &self.h_final, &mut out);
        opt("star_final", &self.star_final, &mut out);
        out.push(("inputs".into(), &self.inputs));
        opt("attention_logits", &self.attention_logits, &mut out);
        opt("attention_weights", &self.attention_weights, &mut out);
        opt("attention_out", &self.attention_out, &mut out);
        opt("z", &self.z, &mut out);
        out.push(("z_star".into(), &self.z_star));
        out.push(("recent".into(), &self.recent));
        opt("fusion_gate", &self.fusion_gate, &mut out);
        out.push(("session".into(), &self.session));
        out.push(("logits".into(), &self.logits));
        out.push(("probabilities".into(), &self.probabilities));
        out
    }

    /// One line per activation: `name rows cols v0 v1 ...`, values in
    /// shortest round-trip form.
    pub fn dump(&self, header: &str) -> String {
        let mut out = String::new();
        writeln!(out, "# {header}").unwrap();
        for (name, m) in self.named() {
            write!(out, "{name} {} {}", m.rows(), m.cols()).unwrap();
            for v in m.as_slice() {
                write!(out, " {v}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Reads a [`ForwardActivations::dump`] back into `(name, value)` pairs.
pub fn parse_trace(text: &str) -> Result<Vec<(String, Mat)>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(' ');
        let err = || format!("trace line {}: malformed", i + 1);
        let name = parts.next().ok_or_else(err)?;
        let rows: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(err)?;
        let cols: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(err)?;
        let data = parts.map(|s| s.parse::<f64>()).collect::<Result<Vec<_>, _>>().map_err(|_| err())?;
        if data.len() != rows * cols {
            return Err(err());
        }
        out.push((name.to_string(), Mat::from_vec(rows, cols, data)));
    }
    Ok(out)
}
