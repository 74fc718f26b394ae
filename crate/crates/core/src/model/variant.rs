use std::fmt;
use std::str::FromStr;

/// Which model variant to run. `Full` is the complete model; the others
/// remove or replace one component for ablation studies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Variant {
    #[default]
    Full,
    /// No operation-aware self-attention: the star input row stands in for `z_s`.
    NoSelfAttention,
    /// No GNN and no operation GRU: raw item embeddings and their mean.
    NoGnn,
    /// Concatenation followed by a linear layer instead of the fusion gate.
    NoFusion,
    /// Star GNN without operation information and plain self-attention.
    SgnnSelf,
    /// `SgnnSelf` plus the operation GRU and operation embeddings.
    SgnnSeqSelf,
    /// A GRU over micro-behavior embeddings replaces the GNN.
    RnnSelf,
    /// Absolute operation embeddings and standard attention (no relation or position terms).
    SgnnAbsSelf,
    /// Dyadic attention over a star GNN without the operation GRU.
    SgnnDyadic,
}

impl Variant {
    pub const ALL: [Variant; 9] = [
        Variant::Full,
        Variant::NoSelfAttention,
        Variant::NoGnn,
        Variant::NoFusion,
        Variant::SgnnSelf,
        Variant::SgnnSeqSelf,
        Variant::RnnSelf,
        Variant::SgnnAbsSelf,
        Variant::SgnnDyadic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoSelfAttention => "ns",
            Variant::NoGnn => "ng",
            Variant::NoFusion => "nf",
            Variant::SgnnSelf => "sgnn-self",
            Variant::SgnnSeqSelf => "sgnn-seq-self",
            Variant::RnnSelf => "rnn-self",
            Variant::SgnnAbsSelf => "sgnn-abs-self",
            Variant::SgnnDyadic => "sgnn-dyadic",
        }
    }

    pub(crate) fn features(self) -> Features {
        let full = Features {
            encoder: Encoder::StarGnn,
            op_gru: true,
            ops_in_inputs: true,
            attention: true,
            relation: true,
            position: true,
            fusion: Fusion::Gate,
        };
        match self {
            Variant::Full => full,
            Variant::NoSelfAttention => Features { attention: false, ..full },
            Variant::NoGnn => Features { encoder: Encoder::Embeddings, op_gru: false, ..full },
            Variant::NoFusion => Features { fusion: Fusion::Linear, ..full },
            Variant::SgnnSelf => Features { op_gru: false, ops_in_inputs: false, relation: false, ..full },
            Variant::SgnnSeqSelf => Features { relation: false, ..full },
            Variant::RnnSelf => Features { encoder: Encoder::Rnn, op_gru: false, relation: false, ..full },
            Variant::SgnnAbsSelf => Features { relation: false, position: false, ..full },
            Variant::SgnnDyadic => Features { op_gru: false, ..full },
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        let key = key.strip_prefix("embsr-").unwrap_or(&key);
        Variant::ALL.into_iter().find(|v| v.name() == key || (key == "embsr" && *v == Variant::Full)).ok_or_else(|| {
            let names: Vec<_> = Variant::ALL.iter().map(|v| v.name()).collect();
            format!("unknown variant {s:?} (expected one of {})", names.join(", "))
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Encoder {
    StarGnn,
    Embeddings,
    Rnn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Fusion {
    Gate,
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Features {
    pub encoder: Encoder,
    /// GRU encodings of operation sequences ride on GNN edge messages.
    pub op_gru: bool,
    /// Operation embeddings are added to the attention inputs.
    pub ops_in_inputs: bool,
    pub attention: bool,
    pub relation: bool,
    pub position: bool,
    pub fusion: Fusion,
}

/// Variant plus the knobs shared by all variants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AblationConfig {
    pub variant: Variant,
    pub gnn_layers: usize,
    /// Replaces the learned fusion gate by a constant in `[0, 1]`.
    pub fixed_beta: Option<f64>,
}

impl AblationConfig {
    pub fn new(variant: Variant) -> Self {
        Self { variant, ..Self::default() }
    }
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self { variant: Variant::Full, gnn_layers: 1, fixed_beta: None }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert_eq!("EMBSR-NS".parse::<Variant>().unwrap(), Variant::NoSelfAttention);
        assert_eq!("sgnn_seq_self".parse::<Variant>().unwrap(), Variant::SgnnSeqSelf);
        assert!("bogus".parse::<Variant>().is_err());
    }

    #[test]
    fn sgnn_self_sees_no_operations() {
        let f = Variant::SgnnSelf.features();
        assert!(!f.op_gru && !f.ops_in_inputs && !f.relation);
    }
}
