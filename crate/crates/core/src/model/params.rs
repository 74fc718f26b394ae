use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Mat;

/// Every learnable block, in checkpoint order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Block {
    ItemEmbedding,
    OpEmbedding,
    PositionEmbedding,
    RelationEmbedding,
    GruWUpdate,
    GruWReset,
    GruWCandidate,
    GruUUpdate,
    GruUReset,
    GruUCandidate,
    GruBUpdate,
    GruBReset,
    GruBCandidate,
    MsgInWeight,
    MsgInBias,
    MsgOutWeight,
    MsgOutBias,
    GnnWUpdate,
    GnnWReset,
    GnnWCandidate,
    GnnUUpdate,
    GnnUReset,
    GnnUCandidate,
    StarQuery1,
    StarKey1,
    StarQuery2,
    StarKey2,
    HighwayWeight,
    AttnQuery,
    FfnW1,
    FfnB1,
    FfnW2,
    FfnB2,
    FusionWeight,
    FusionBias,
}

impl Block {
    pub const COUNT: usize = 35;

    pub const ALL: [Block; Block::COUNT] = [
        Block::ItemEmbedding,
        Block::OpEmbedding,
        Block::PositionEmbedding,
        Block::RelationEmbedding,
        Block::GruWUpdate,
        Block::GruWReset,
        Block::GruWCandidate,
        Block::GruUUpdate,
        Block::GruUReset,
        Block::GruUCandidate,
        Block::GruBUpdate,
        Block::GruBReset,
        Block::GruBCandidate,
        Block::MsgInWeight,
        Block::MsgInBias,
        Block::MsgOutWeight,
        Block::MsgOutBias,
        Block::GnnWUpdate,
        Block::GnnWReset,
        Block::GnnWCandidate,
        Block::GnnUUpdate,
        Block::GnnUReset,
        Block::GnnUCandidate,
        Block::StarQuery1,
        Block::StarKey1,
        Block::StarQuery2,
        Block::StarKey2,
        Block::HighwayWeight,
        Block::AttnQuery,
        Block::FfnW1,
        Block::FfnB1,
        Block::FfnW2,
        Block::FfnB2,
        Block::FusionWeight,
        Block::FusionBias,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        use Block::*;
        match self {
            ItemEmbedding => "item_embedding",
            OpEmbedding => "op_embedding",
            PositionEmbedding => "position_embedding",
            RelationEmbedding => "relation_embedding",
            GruWUpdate => "gru.w_update",
            GruWReset => "gru.w_reset",
            GruWCandidate => "gru.w_candidate",
            GruUUpdate => "gru.u_update",
            GruUReset => "gru.u_reset",
            GruUCandidate => "gru.u_candidate",
            GruBUpdate => "gru.b_update",
            GruBReset => "gru.b_reset",
            GruBCandidate => "gru.b_candidate",
            MsgInWeight => "msg_in.weight",
            MsgInBias => "msg_in.bias",
            MsgOutWeight => "msg_out.weight",
            MsgOutBias => "msg_out.bias",
            GnnWUpdate => "gnn.w_update",
            GnnWReset => "gnn.w_reset",
            GnnWCandidate => "gnn.w_candidate",
            GnnUUpdate => "gnn.u_update",
            GnnUReset => "gnn.u_reset",
            GnnUCandidate => "gnn.u_candidate",
            StarQuery1 => "star.query_gate",
            StarKey1 => "star.key_gate",
            StarQuery2 => "star.query_update",
            StarKey2 => "star.key_update",
            HighwayWeight => "highway.weight",
            AttnQuery => "attention.query",
            FfnW1 => "ffn.w1",
            FfnB1 => "ffn.b1",
            FfnW2 => "ffn.w2",
            FfnB2 => "ffn.b2",
            FusionWeight => "fusion.weight",
            FusionBias => "fusion.bias",
        }
    }

    pub fn from_name(name: &str) -> Option<Block> {
        Block::ALL.into_iter().find(|b| b.name() == name)
    }

    pub fn is_bias(self) -> bool {
        use Block::*;
        matches!(self, GruBUpdate | GruBReset | GruBCandidate | MsgInBias | MsgOutBias | FfnB1 | FfnB2 | FusionBias)
    }

    fn shape(self, dims: &ModelDims) -> (usize, usize) {
        use Block::*;
        let d = dims.dim;
        match self {
            ItemEmbedding => (dims.n_items, d),
            OpEmbedding => (dims.n_ops_aug, d),
            PositionEmbedding => (dims.max_positions, d),
            RelationEmbedding => (dims.n_ops_aug * dims.n_ops_aug, d),
            MsgInWeight | MsgOutWeight | GnnWUpdate | GnnWReset | GnnWCandidate | HighwayWeight | FusionWeight => {
                (2 * d, d)
            }
            b if b.is_bias() => (1, d),
            _ => (d, d),
        }
    }
}

/// Sizes that determine every block shape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelDims {
    pub dim: usize,
    pub n_items: usize,
    /// Operation vocabulary plus the target-operation token.
    pub n_ops_aug: usize,
    /// Attention slots available: micro-behaviors plus the star token.
    pub max_positions: usize,
}

impl ModelDims {
    pub fn target_op_token(&self) -> usize {
        self.n_ops_aug - 1
    }
}

/// All learnable tensors plus the fixed cosine scale `w_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub dims: ModelDims,
    pub scale: f64,
    tensors: Vec<Mat>,
}

pub const DEFAULT_SCALE: f64 = 12.0;

impl ModelParams {
    /// Weight matrices and embeddings uniform in `±1/√d`, biases zero.
    pub fn init(dims: ModelDims, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (dims.dim as f64).sqrt();
        let tensors = Block::ALL
            .iter()
            .map(|&b| {
                let (r, c) = b.shape(&dims);
                if b.is_bias() {
                    Mat::zeros(r, c)
                } else {
                    Mat::uniform(r, c, bound, &mut rng)
                }
            })
            .collect();
        Self { dims, scale: DEFAULT_SCALE, tensors }
    }

    /// Builds parameters from explicit tensors, checking every shape.
    pub fn from_tensors(dims: ModelDims, scale: f64, tensors: Vec<Mat>) -> Result<Self, String> {
        if tensors.len() != Block::COUNT {
            return Err(format!("expected {} tensors, got {}", Block::COUNT, tensors.len()));
        }
        for (b, t) in Block::ALL.iter().zip(&tensors) {
            if t.shape() != b.shape(&dims) {
                return Err(format!("{}: shape {:?}, expected {:?}", b.name(), t.shape(), b.shape(&dims)));
            }
        }
        if scale.is_nan() || scale <= 0.0 {
            return Err(format!("scale must be positive, got {scale}"));
        }
        Ok(Self { dims, scale, tensors })
    }

    pub fn get(&self, b: Block) -> &Mat {
        &self.tensors[b.index()]
    }

    pub fn get_mut(&mut self, b: Block) -> &mut Mat {
        &mut self.tensors[b.index()]
    }

    pub fn tensors(&self) -> &[Mat] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Mat] {
        &mut self.tensors
    }

    pub fn zeros_like(&self) -> Vec<Mat> {
        self.tensors.iter().map(|t| Mat::zeros(t.rows(), t.cols())).collect()
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Mat::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Mat::is_finite)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims() -> ModelDims {
        ModelDims { dim: 4, n_items: 7, n_ops_aug: 3, max_positions: 11 }
    }

    #[test]
    fn block_table_is_consistent() {
        for (i, b) in Block::ALL.iter().enumerate() {
            assert_eq!(b.index(), i);
            assert_eq!(Block::from_name(b.name()), Some(*b));
        }
    }

    #[test]
    fn init_shapes_and_ranges() {
        let p = ModelParams::init(dims(), 1);
        assert_eq!(p.get(Block::RelationEmbedding).shape(), (9, 4));
        assert_eq!(p.get(Block::FusionWeight).shape(), (8, 4));
        assert_eq!(p.get(Block::FfnB1).shape(), (1, 4));
        assert!(p.get(Block::FfnB1).as_slice().iter().all(|&v| v == 0.0));
        assert!(p.get(Block::ItemEmbedding).as_slice().iter().all(|v| v.abs() <= 0.5));
        assert_eq!(p.scale, 12.0);
        assert_eq!(ModelParams::init(dims(), 1), p);
        assert_ne!(ModelParams::init(dims(), 2), p);
    }

    #[test]
    fn from_tensors_checks_shapes() {
        let p = ModelParams::init(dims(), 1);
        let mut t = p.tensors().to_vec();
        assert!(ModelParams::from_tensors(dims(), 12.0, t.clone()).is_ok());
        t[3] = Mat::zeros(2, 2);
        assert!(ModelParams::from_tensors(dims(), 12.0, t).is_err());
    }
}
