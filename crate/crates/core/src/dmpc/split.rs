//! Decomposition of a linear system along a partition into CSU subsystems
//!
//! CSU `i` evolves as `x⁽ⁱ⁾⁺ = A⁽ⁱⁱ⁾x⁽ⁱ⁾ + B⁽ⁱ⁾u⁽ⁱ⁾ + Σ_j A⁽ⁱʲ⁾x⁽ʲ⁾`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::SimError;
use crate::fsu::FsuCollection;
use crate::graph::LinearSystem;
use crate::linalg::Matrix;
use crate::metrics::Partition;

/// Coupling block `A⁽ⁱʲ⁾` restricted to the neighbour states it reads.
#[derive(Clone, Debug, PartialEq)]
pub struct Coupling {
    pub neighbor: usize,
    /// Global indices of the neighbour states with a nonzero column.
    pub states: Vec<usize>,
    /// `n_i × states.len()`.
    pub block: Matrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsuSystem {
    /// Global state indices, ascending.
    pub states: Vec<usize>,
    /// Global input indices, ascending.
    pub inputs: Vec<usize>,
    pub a: Matrix,
    pub b: Matrix,
    pub couplings: Vec<Coupling>,
}

impl CsuSystem {
    pub fn n(&self) -> usize {
        self.states.len()
    }

    pub fn p(&self) -> usize {
        self.inputs.len()
    }
}

/// Splits `sys` along `p`. Fails if an input of one block drives a state of
/// another.
pub fn split_system(
    sys: &LinearSystem,
    p: &Partition,
    coll: &FsuCollection,
) -> Result<Vec<CsuSystem>, SimError> {
    if p.fsu_count() != coll.len()
        || coll.n_states() != sys.state_dim()
        || coll.n_inputs() != sys.input_dim()
    {
        return Err(SimError::Mismatch);
    }
    let nb = p.block_count();
    let mut state_block = vec![usize::MAX; sys.state_dim()];
    let mut input_block = vec![usize::MAX; sys.input_dim()];
    let mut states = vec![Vec::new(); nb];
    let mut inputs = vec![Vec::new(); nb];
    for (b, block) in p.blocks().iter().enumerate() {
        for &f in block {
            let fsu = &coll.fsus()[f];
            for &x in &fsu.states {
                state_block[x] = b;
                states[b].push(x);
            }
            for &u in &fsu.inputs {
                input_block[u] = b;
                inputs[b].push(u);
            }
        }
        states[b].sort_unstable();
        inputs[b].sort_unstable();
    }
    if let Some(x) = state_block.iter().position(|&b| b == usize::MAX) {
        return Err(SimError::Uncovered { state: x });
    }
    let (a, bm) = (sys.a(), sys.b());
    for (u, &bu) in input_block.iter().enumerate() {
        for (x, &bx) in state_block.iter().enumerate() {
            if bm[(x, u)] != 0.0 && bu != bx {
                return Err(SimError::InputLeak {
                    block: bu,
                    input: u,
                    state: x,
                });
            }
        }
    }
    let mut out = Vec::with_capacity(nb);
    for i in 0..nb {
        let mut couplings = Vec::new();
        for j in (0..nb).filter(|&j| j != i) {
            let cols: Vec<usize> = states[j]
                .iter()
                .copied()
                .filter(|&c| states[i].iter().any(|&r| a[(r, c)] != 0.0))
                .collect();
            if !cols.is_empty() {
                couplings.push(Coupling {
                    neighbor: j,
                    block: a.select(&states[i], &cols),
                    states: cols,
                });
            }
        }
        out.push(CsuSystem {
            a: a.select(&states[i], &states[i]),
            b: bm.select(&states[i], &inputs[i]),
            states: states[i].clone(),
            inputs: inputs[i].clone(),
            couplings,
        });
    }
    Ok(out)
}

/// Rebuilds the global `(A, B)` from CSU blocks.
pub fn reassemble(csus: &[CsuSystem], n: usize, p: usize) -> (Matrix, Matrix) {
    let mut a = Matrix::zeros(n, n);
    let mut b = Matrix::zeros(n, p);
    for c in csus {
        for (li, &gi) in c.states.iter().enumerate() {
            for (lj, &gj) in c.states.iter().enumerate() {
                a[(gi, gj)] = c.a[(li, lj)];
            }
            for (lu, &gu) in c.inputs.iter().enumerate() {
                b[(gi, gu)] = c.b[(li, lu)];
            }
            for cp in &c.couplings {
                for (lj, &gj) in cp.states.iter().enumerate() {
                    a[(gi, gj)] = cp.block[(li, lj)];
                }
            }
        }
    }
    (a, b)
}
