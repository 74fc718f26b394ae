use super::{Tape, TensorError, Var};

/// Tape handles for one GRU's parameters, row-vector convention (`x · W`).
#[derive(Clone, Copy, Debug)]
pub struct GruVars {
    pub w_update: Var,
    pub w_reset: Var,
    pub w_candidate: Var,
    pub u_update: Var,
    pub u_reset: Var,
    pub u_candidate: Var,
    pub b_update: Var,
    pub b_reset: Var,
    pub b_candidate: Var,
}

/// One GRU step over the rows of `x` and `h_prev`:
///
/// ```text
/// z  = σ(x·W_z + h·U_z + b_z)
/// r  = σ(x·W_r + h·U_r + b_r)
/// h̃  = tanh(x·W_h + (r ⊙ h)·U_h + b_h)
/// h' = (1 − z) ⊙ h + z ⊙ h̃
/// ```
pub fn gru_cell(tape: &mut Tape<'_>, x: Var, h_prev: Var, p: &GruVars) -> Result<Var, TensorError> {
    let gate = |tape: &mut Tape<'_>, w: Var, u: Var, b: Var| -> Result<Var, TensorError> {
        let xw = tape.matmul(x, w)?;
        let hu = tape.matmul(h_prev, u)?;
        let s = tape.add(xw, hu)?;
        let s = tape.add_row(s, b)?;
        tape.sigmoid(s)
    };
    let z = gate(tape, p.w_update, p.u_update, p.b_update)?;
    let r = gate(tape, p.w_reset, p.u_reset, p.b_reset)?;

    let xw = tape.matmul(x, p.w_candidate)?;
    let rh = tape.hadamard(r, h_prev)?;
    let rhu = tape.matmul(rh, p.u_candidate)?;
    let pre = tape.add(xw, rhu)?;
    let pre = tape.add_row(pre, p.b_candidate)?;
    let candidate = tape.tanh(pre)?;

    // h' = h + z ⊙ (h̃ − h)
    let delta = tape.sub(candidate, h_prev)?;
    let step = tape.hadamard(z, delta)?;
    tape.add(h_prev, step)
}
