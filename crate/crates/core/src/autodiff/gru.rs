//! Gated recurrent unit.
//!
//! ```text
//! z  = σ(x W_z + h U_z + b_z)
//! r  = σ(x W_r + h U_r + b_r)
//! h̃  = tanh(x W_h + (r ⊙ h) U_h + b_h)
//! h' = (1 − z) ⊙ h + z ⊙ h̃
//! ```
//!
//! The update and reset gate weights are stored side by side
//! (`[W_z | W_r]`), so one matmul produces both gates.

use rand::Rng;

use super::{Bound, Graph, ParamId, ParamStore, Var};
use crate::Result;

#[derive(Debug, Clone, Copy)]
pub struct GruParams {
    pub input_size: usize,
    pub hidden_size: usize,
    w_gates: ParamId,
    u_gates: ParamId,
    b_gates: ParamId,
    w_cand: ParamId,
    u_cand: ParamId,
    b_cand: ParamId,
}

impl GruParams {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        input_size: usize,
        hidden_size: usize,
        init_bound: f64,
        rng: &mut R,
    ) -> Self {
        let (i, h) = (input_size, hidden_size);
        GruParams {
            input_size,
            hidden_size,
            w_gates: store.add_uniform(format!("{prefix}.w_gates"), i, 2 * h, init_bound, rng),
            u_gates: store.add_uniform(format!("{prefix}.u_gates"), h, 2 * h, init_bound, rng),
            b_gates: store.add_uniform(format!("{prefix}.b_gates"), 1, 2 * h, init_bound, rng),
            w_cand: store.add_uniform(format!("{prefix}.w_cand"), i, h, init_bound, rng),
            u_cand: store.add_uniform(format!("{prefix}.u_cand"), h, h, init_bound, rng),
            b_cand: store.add_uniform(format!("{prefix}.b_cand"), 1, h, init_bound, rng),
        }
    }

    /// One step for a batch: `x` is `[B, input]`, `h` is `[B, hidden]`.
    pub fn step(&self, g: &mut Graph, p: &Bound, x: Var, h: Var) -> Result<Var> {
        let hs = self.hidden_size;
        let xg = g.matmul(x, p[self.w_gates])?;
        let hg = g.matmul(h, p[self.u_gates])?;
        let pre = g.add(xg, hg)?;
        let pre = g.add_row(pre, p[self.b_gates])?;
        let gates = g.sigmoid(pre);
        let z = g.slice_cols(gates, 0, hs)?;
        let r = g.slice_cols(gates, hs, hs)?;

        let rh = g.mul(r, h)?;
        let xc = g.matmul(x, p[self.w_cand])?;
        let hc = g.matmul(rh, p[self.u_cand])?;
        let pre_c = g.add(xc, hc)?;
        let pre_c = g.add_row(pre_c, p[self.b_cand])?;
        let cand = g.tanh(pre_c);

        // h + z ⊙ (h̃ − h) == (1 − z) ⊙ h + z ⊙ h̃
        let diff = g.sub(cand, h)?;
        let step = g.mul(z, diff)?;
        g.add(h, step)
    }
}
