//! Builders for boxes on chains: step-by-step combs and a few standard boxes.

use std::collections::HashMap;
use std::sync::Arc;

use crate::causalbox::CausalBox;
use crate::channel::Channel;
use crate::error::{Error, Result};
use crate::fock::{Space, StateVector, WireSpec};
use crate::linalg::{CMat, C64, ONE, ZERO};
use crate::poset::Poset;

/// Weight allowed to leave the truncated output space before a comb is rejected.
pub const LEAK_TOL: f64 = 1e-10;

/// Positions of a chain in order, or an error if the poset is not a chain.
pub fn chain_order(poset: &Poset) -> Result<Vec<usize>> {
    if !poset.is_chain() {
        return Err(Error::Config("comb builder needs a totally ordered poset".into()));
    }
    Ok(poset.linear_extension().to_vec())
}

/// Dimensions of a comb's slices: `(input slices, output slices)` in chain order.
pub fn slice_dims(poset: &Poset, inputs: &Space, outputs: &Space) -> Result<(Vec<usize>, Vec<usize>)> {
    let order = chain_order(poset)?;
    let xi = inputs.slicing(&order)?;
    let yo = outputs.slicing(&order)?;
    Ok((xi.slices.iter().map(|s| s.dim()).collect(), yo.slices.iter().map(|s| s.dim()).collect()))
}

/// Composes step maps into the top channel of a comb.
///
/// With chain positions `0..L`, step `s` (for `s = 0..=L`) maps `memory_s (x) X_{s-1}` to
/// `Y_s (x) memory_{s+1}`, where `X_{-1}` and `Y_L` are trivial and `memory_0` is one-dimensional.
/// Matrices have rows `y * mem[s+1] + m'` and columns `m * dx + x`. The last memory becomes the
/// Kraus index.
pub fn comb_channel(poset: &Poset, inputs: &Space, outputs: &Space, steps: &[CMat], mem: &[usize]) -> Result<Channel> {
    let order = chain_order(poset)?;
    let l = order.len();
    if steps.len() != l + 1 || mem.len() != l + 2 || mem[0] != 1 {
        return Err(Error::ShapeMismatch(format!("comb over {l} positions needs {} steps", l + 1)));
    }
    let xs = inputs.slicing(&order)?;
    let ys = outputs.slicing(&order)?;
    let dx = |s: usize| if s == 0 { 1 } else { xs.slices[s - 1].dim() };
    let dy = |s: usize| if s == l { 1 } else { ys.slices[s].dim() };
    for (s, st) in steps.iter().enumerate() {
        if st.nrows() != dy(s) * mem[s + 1] || st.ncols() != mem[s] * dx(s) {
            return Err(Error::ShapeMismatch(format!(
                "step {s} is {}x{}, expected {}x{}",
                st.nrows(),
                st.ncols(),
                dy(s) * mem[s + 1],
                mem[s] * dx(s)
            )));
        }
    }
    // Sparse columns of every step.
    let cols: Vec<Vec<Vec<(usize, C64)>>> = steps
        .iter()
        .map(|st| {
            (0..st.ncols()).map(|cidx| (0..st.nrows()).filter(|&r| st[(r, cidx)] != ZERO).map(|r| (r, st[(r, cidx)])).collect()).collect()
        })
        .collect();
    let kfinal = mem[l + 1];
    let mut kraus = vec![CMat::zeros(outputs.dim(), inputs.dim()); kfinal];
    let mut leak = 0.0;
    for x in 0..inputs.dim() {
        let xd = &xs.digits[x];
        let mut branches: HashMap<(Vec<usize>, usize), C64> = HashMap::new();
        branches.insert((Vec::new(), 0), ONE);
        for s in 0..=l {
            let xin = if s == 0 { 0 } else { xd[s - 1] };
            let mut next: HashMap<(Vec<usize>, usize), C64> = HashMap::with_capacity(branches.len());
            for ((ytuple, m), amp) in branches {
                for &(r, v) in &cols[s][m * dx(s) + xin] {
                    let (y, m2) = (r / mem[s + 1], r % mem[s + 1]);
                    let mut t = ytuple.clone();
                    if s < l {
                        t.push(y);
                    }
                    *next.entry((t, m2)).or_insert(ZERO) += amp * v;
                }
            }
            branches = next;
        }
        for ((ytuple, m), amp) in branches {
            match ys.merge(&ytuple) {
                Some(y) => kraus[m][(y, x)] += amp,
                None => leak += amp.norm_sqr(),
            }
        }
    }
    if leak > LEAK_TOL {
        return Err(Error::Config(format!("comb output leaves the truncated space (weight {leak:e})")));
    }
    Channel::from_kraus(kraus, inputs.clone(), outputs.clone())
}

/// Isometry sending input basis state `x` to output basis state `f(x)`; `f` must be injective.
pub fn basis_map(inputs: Space, outputs: Space, f: impl Fn(usize) -> usize) -> Result<Channel> {
    let mut k = CMat::zeros(outputs.dim(), inputs.dim());
    for x in 0..inputs.dim() {
        let y = f(x);
        if y >= outputs.dim() {
            return Err(Error::DimensionMismatch { expected: outputs.dim(), found: y });
        }
        k[(y, x)] = ONE;
    }
    Channel::from_kraus(vec![k], inputs, outputs)
}

/// Moves every photon of a single-wire space along `shift`, preserving message values.
fn shifted_index(from: &Space, to: &Space, x: usize, shift: &HashMap<usize, usize>) -> Result<usize> {
    let fb = &from.bases()[0];
    let tb = &to.bases()[0];
    let mut photons = Vec::new();
    for (m, &n) in fb.state(x).iter().enumerate() {
        let (p, v) = fb.modes()[m];
        for _ in 0..n {
            photons.push((shift[&p], v));
        }
    }
    tb.index_of_photons(&photons)
}

/// The box on a chain that re-emits every message `delay` positions later on wire `out`.
pub fn delayed_identity(poset: Arc<Poset>, msg_dim: usize, truncation: usize, delay: usize) -> Result<CausalBox> {
    let order = chain_order(&poset)?;
    let l = order.len();
    if delay == 0 || delay >= l {
        return Err(Error::Config(format!("delay must lie in 1..{l}")));
    }
    let win = WireSpec::from_indices(&poset, "in", msg_dim, order[..l - delay].iter().copied(), truncation)?;
    let wout = WireSpec::from_indices(&poset, "out", msg_dim, order[delay..].iter().copied(), truncation)?;
    let shift: HashMap<usize, usize> = (0..l - delay).map(|i| (order[i], order[i + delay])).collect();
    let (sin, sout) = (Space::new(vec![win])?, Space::new(vec![wout])?);
    let mut map = Vec::with_capacity(sin.dim());
    for x in 0..sin.dim() {
        map.push(shifted_index(&sin, &sout, x, &shift)?);
    }
    let ch = basis_map(sin, sout, |x| map[x])?;
    CausalBox::with_strict_past(poset, ch)
}

/// The channel that re-emits every message at the position it arrived: not causal for any valid causality function.
pub fn zero_delay_identity(poset: &Poset, msg_dim: usize, truncation: usize) -> Result<Channel> {
    let all: Vec<usize> = poset.linear_extension().to_vec();
    let win = WireSpec::from_indices(poset, "in", msg_dim, all.iter().copied(), truncation)?;
    let wout = WireSpec::from_indices(poset, "out", msg_dim, all, truncation)?;
    let sin = Space::new(vec![win])?;
    let sout = Space::new(vec![wout])?;
    basis_map(sin, sout, |x| x)
}

/// A box without inputs that emits `state` on its output wires.
pub fn emitter(poset: Arc<Poset>, outputs: Space, state: &StateVector) -> Result<CausalBox> {
    if state.amplitudes.len() != outputs.dim() {
        return Err(Error::DimensionMismatch { expected: outputs.dim(), found: state.amplitudes.len() });
    }
    let k = CMat::from_column_slice(outputs.dim(), 1, state.amplitudes.as_slice());
    let ch = Channel::from_kraus(vec![k], Space::trivial(), outputs)?;
    CausalBox::with_strict_past(poset, ch)
}

/// A box with the given wires that ignores its inputs and emits vacuum.
pub fn silent(poset: Arc<Poset>, inputs: Space, outputs: Space) -> Result<CausalBox> {
    CausalBox::with_strict_past(poset, Channel::discard(inputs, outputs))
}
