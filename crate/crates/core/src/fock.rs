//! Truncated bosonic Fock spaces of wires, in the occupation-number basis.

use std::collections::HashMap;
use std::sync::Arc;

use fixedbitset::FixedBitSet;
use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{c, CMat, C64};
use crate::poset::Poset;

/// Largest basis a single wire may enumerate.
pub const MAX_WIRE_DIM: usize = 1 << 16;

/// A wire: message dimension, positions and a cap on the total photon number.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WireSpec {
    pub name: String,
    pub msg_dim: usize,
    /// Poset indices, sorted along the poset's linear extension.
    pub positions: Vec<usize>,
    pub truncation: usize,
}

impl WireSpec {
    pub fn new<S: AsRef<str>>(poset: &Poset, name: &str, msg_dim: usize, positions: &[S], truncation: usize) -> Result<WireSpec> {
        let mut idx = Vec::with_capacity(positions.len());
        for p in positions {
            idx.push(poset.index_of(p.as_ref())?);
        }
        Self::from_indices(poset, name, msg_dim, idx, truncation)
    }

    pub fn from_indices(
        poset: &Poset,
        name: &str,
        msg_dim: usize,
        positions: impl IntoIterator<Item = usize>,
        truncation: usize,
    ) -> Result<WireSpec> {
        if msg_dim == 0 {
            return Err(Error::Config(format!("wire `{name}` has message dimension 0")));
        }
        let mut positions: Vec<usize> = positions.into_iter().collect();
        if let Some(&bad) = positions.iter().find(|&&p| p >= poset.len()) {
            return Err(Error::UnknownLabel(bad.to_string()));
        }
        positions.sort_by_key(|&p| poset.rank(p));
        positions.dedup();
        Ok(WireSpec { name: name.to_string(), msg_dim, positions, truncation })
    }

    /// Trivial wires carry only the vacuum.
    pub fn is_trivial(&self) -> bool {
        self.positions.is_empty() || self.truncation == 0
    }

    /// Same dimension, positions and truncation; names may differ.
    pub fn same_shape(&self, other: &WireSpec) -> bool {
        self.msg_dim == other.msg_dim && self.positions == other.positions && self.truncation == other.truncation
    }

    /// Modes `(position, value)` in canonical order.
    pub fn modes(&self) -> Vec<(usize, usize)> {
        self.positions.iter().flat_map(|&p| (0..self.msg_dim).map(move |v| (p, v))).collect()
    }

    /// The same wire with its positions intersected with `keep`.
    pub fn restrict(&self, keep: &FixedBitSet) -> WireSpec {
        WireSpec {
            name: self.name.clone(),
            msg_dim: self.msg_dim,
            positions: self.positions.iter().copied().filter(|&p| keep.contains(p)).collect(),
            truncation: self.truncation,
        }
    }

    pub fn renamed(&self, name: &str) -> WireSpec {
        WireSpec { name: name.to_string(), ..self.clone() }
    }

    /// Basis size without enumerating it.
    pub fn dim(&self) -> usize {
        let m = self.positions.len() * self.msg_dim;
        (0..=self.truncation).map(|k| multiset_count(m, k)).sum()
    }
}

/// Number of multisets of size `k` over `m` symbols.
pub fn multiset_count(m: usize, k: usize) -> usize {
    if m == 0 {
        return usize::from(k == 0);
    }
    let mut r: u128 = 1;
    for i in 0..k as u128 {
        r = r * (m as u128 + i) / (i + 1);
    }
    usize::try_from(r).unwrap_or(usize::MAX)
}

/// Enumerated occupation-number basis of a wire; index 0 is the vacuum.
#[derive(Debug, Clone)]
pub struct FockBasis {
    wire: WireSpec,
    modes: Vec<(usize, usize)>,
    states: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
}

impl FockBasis {
    pub fn new(wire: &WireSpec) -> Result<FockBasis> {
        let size = wire.dim();
        if size > MAX_WIRE_DIM {
            return Err(Error::Size { what: format!("basis of wire `{}`", wire.name), size, cap: MAX_WIRE_DIM });
        }
        if wire.truncation > u8::MAX as usize {
            return Err(Error::Config(format!("truncation {} too large", wire.truncation)));
        }
        let modes = wire.modes();
        let m = modes.len();
        let mut states = Vec::with_capacity(size);
        let mut tuple = Vec::new();
        for k in 0..=wire.truncation {
            if m == 0 && k > 0 {
                break;
            }
            multisets(m, k, 0, &mut tuple, &mut |t| {
                let mut occ = vec![0u8; m];
                for &i in t {
                    occ[i] += 1;
                }
                states.push(occ);
            });
        }
        let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Ok(FockBasis { wire: wire.clone(), modes, states, index })
    }

    pub fn wire(&self) -> &WireSpec {
        &self.wire
    }

    pub fn modes(&self) -> &[(usize, usize)] {
        &self.modes
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, i: usize) -> &[u8] {
        &self.states[i]
    }

    pub fn states(&self) -> &[Vec<u8>] {
        &self.states
    }

    pub fn index_of(&self, occ: &[u8]) -> Option<usize> {
        self.index.get(occ).copied()
    }

    pub fn photons(&self, i: usize) -> usize {
        self.states[i].iter().map(|&n| n as usize).sum()
    }

    pub fn mode_index(&self, position: usize, value: usize) -> Option<usize> {
        self.modes.iter().position(|&m| m == (position, value))
    }

    /// Index of the occupation described by `(position, value)` photons.
    pub fn index_of_photons(&self, photons: &[(usize, usize)]) -> Result<usize> {
        let mut occ = vec![0u8; self.modes.len()];
        for &(p, v) in photons {
            let m = self.mode_index(p, v).ok_or_else(|| Error::UnknownMode(format!("{p}:{v} on wire `{}`", self.wire.name)))?;
            occ[m] = occ[m].saturating_add(1);
        }
        if photons.len() > self.wire.truncation {
            return Err(Error::TruncationExceeded { wire: self.wire.name.clone(), photons: photons.len(), cap: self.wire.truncation });
        }
        Ok(self.index[&occ])
    }

    /// Splits the wire into two sub-wires.
    pub fn factorize(&self, split: &Split) -> Result<Factorization> {
        let (w1, w2, assign): (WireSpec, WireSpec, Vec<(bool, usize)>) = match split {
            Split::Positions(first) => {
                let mut keep = FixedBitSet::with_capacity(self.modes.iter().map(|m| m.0 + 1).max().unwrap_or(0));
                for &p in first {
                    if !self.wire.positions.contains(&p) {
                        return Err(Error::NotAPartition(self.wire.name.clone()));
                    }
                    keep.grow(p + 1);
                    keep.insert(p);
                }
                let w1 = self.wire.restrict(&keep);
                let mut rest = keep.clone();
                rest.grow(self.modes.iter().map(|m| m.0 + 1).max().unwrap_or(0));
                rest.toggle_range(..);
                let w2 = self.wire.restrict(&rest);
                let b1 = FockBasis::new(&w1)?;
                let b2 = FockBasis::new(&w2)?;
                let assign = self
                    .modes
                    .iter()
                    .map(|&m| {
                        if keep.contains(m.0) {
                            (true, b1.mode_index(m.0, m.1).unwrap())
                        } else {
                            (false, b2.mode_index(m.0, m.1).unwrap())
                        }
                    })
                    .collect();
                (w1, w2, assign)
            }
            Split::Values(first) => {
                let mut vals: Vec<usize> = first.clone();
                vals.sort_unstable();
                vals.dedup();
                if vals.is_empty() || vals.len() >= self.wire.msg_dim || vals.iter().any(|&v| v >= self.wire.msg_dim) {
                    return Err(Error::NotAPartition(self.wire.name.clone()));
                }
                let others: Vec<usize> = (0..self.wire.msg_dim).filter(|v| !vals.contains(v)).collect();
                let w1 = WireSpec { msg_dim: vals.len(), ..self.wire.clone() };
                let w2 = WireSpec { msg_dim: others.len(), ..self.wire.clone() };
                let b1 = FockBasis::new(&w1)?;
                let b2 = FockBasis::new(&w2)?;
                let assign = self
                    .modes
                    .iter()
                    .map(|&(p, v)| match vals.iter().position(|&x| x == v) {
                        Some(j) => (true, b1.mode_index(p, j).unwrap()),
                        None => (false, b2.mode_index(p, others.iter().position(|&x| x == v).unwrap()).unwrap()),
                    })
                    .collect();
                (w1, w2, assign)
            }
        };
        let first = Arc::new(FockBasis::new(&w1)?);
        let second = Arc::new(FockBasis::new(&w2)?);
        let mut map = Vec::with_capacity(self.dim());
        let mut inverse = HashMap::with_capacity(self.dim());
        for (i, occ) in self.states.iter().enumerate() {
            let mut o1 = vec![0u8; first.modes.len()];
            let mut o2 = vec![0u8; second.modes.len()];
            for (m, &n) in occ.iter().enumerate() {
                let (to_first, j) = assign[m];
                if to_first {
                    o1[j] = n;
                } else {
                    o2[j] = n;
                }
            }
            let pair = (first.index[&o1], second.index[&o2]);
            map.push(pair);
            inverse.insert(pair, i);
        }
        Ok(Factorization { first, second, map, inverse })
    }
}

fn multisets(m: usize, k: usize, start: usize, tuple: &mut Vec<usize>, emit: &mut impl FnMut(&[usize])) {
    if tuple.len() == k {
        emit(tuple);
        return;
    }
    for i in start..m {
        tuple.push(i);
        multisets(m, k, i, tuple, emit);
        tuple.pop();
    }
}

/// How to split a wire's modes.
#[derive(Debug, Clone)]
pub enum Split {
    /// Positions (poset indices) going to the first factor.
    Positions(Vec<usize>),
    /// Message values going to the first factor.
    Values(Vec<usize>),
}

/// Result of [`FockBasis::factorize`]: an embedding of the joint basis into the product.
#[derive(Debug, Clone)]
pub struct Factorization {
    pub first: Arc<FockBasis>,
    pub second: Arc<FockBasis>,
    /// Joint index -> (first index, second index).
    pub map: Vec<(usize, usize)>,
    inverse: HashMap<(usize, usize), usize>,
}

impl Factorization {
    /// Joint index of a product basis state, if it respects the joint truncation.
    pub fn merge(&self, i: usize, j: usize) -> Option<usize> {
        self.inverse.get(&(i, j)).copied()
    }
}

/// Parses occupation tokens such as `"t1:0"` into `(position, value)` photons.
pub fn parse_occupation<S: AsRef<str>>(poset: &Poset, tokens: &[S]) -> Result<Vec<(usize, usize)>> {
    tokens
        .iter()
        .map(|t| {
            let t = t.as_ref();
            let (p, v) = t.rsplit_once(':').ok_or_else(|| Error::UnknownMode(t.to_string()))?;
            let v: usize = v.trim().parse().map_err(|_| Error::UnknownMode(t.to_string()))?;
            Ok((poset.index_of(p.trim())?, v))
        })
        .collect()
}

/// A dense state vector over a wire basis.
#[derive(Debug, Clone)]
pub struct StateVector {
    pub basis: Arc<FockBasis>,
    pub amplitudes: DVector<C64>,
}

impl StateVector {
    /// Sums `amplitude * |occupation>` over `terms`; occupations are photon lists.
    pub fn new(basis: Arc<FockBasis>, terms: &[(Vec<(usize, usize)>, C64)], normalize: bool) -> Result<StateVector> {
        let mut amplitudes = DVector::zeros(basis.dim());
        for (photons, a) in terms {
            amplitudes[basis.index_of_photons(photons)?] += *a;
        }
        if normalize {
            let n = amplitudes.norm();
            if n == 0.0 {
                return Err(Error::Config("cannot normalize the zero vector".into()));
            }
            amplitudes /= c(n, 0.0);
        }
        Ok(StateVector { basis, amplitudes })
    }

    pub fn vacuum(basis: Arc<FockBasis>) -> StateVector {
        let mut amplitudes = DVector::zeros(basis.dim());
        amplitudes[0] = c(1.0, 0.0);
        StateVector { basis, amplitudes }
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() <= 1e-9
    }

    pub fn density(&self) -> CMat {
        &self.amplitudes * self.amplitudes.adjoint()
    }
}

/// An ordered list of wires; the joint index is mixed radix with the first wire most significant.
#[derive(Debug, Clone)]
pub struct Space {
    wires: Vec<WireSpec>,
    bases: Vec<Arc<FockBasis>>,
    dims: Vec<usize>,
    dim: usize,
}

impl PartialEq for Space {
    fn eq(&self, other: &Self) -> bool {
        self.wires == other.wires
    }
}

impl Space {
    pub fn new(wires: Vec<WireSpec>) -> Result<Space> {
        for (i, w) in wires.iter().enumerate() {
            if wires[..i].iter().any(|v| v.name == w.name) {
                return Err(Error::NameCollision(w.name.clone()));
            }
        }
        let bases = wires.iter().map(|w| FockBasis::new(w).map(Arc::new)).collect::<Result<Vec<_>>>()?;
        let dims: Vec<usize> = bases.iter().map(|b| b.dim()).collect();
        let dim = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or(Error::Size {
            what: "joint space".into(),
            size: usize::MAX,
            cap: usize::MAX,
        })?;
        Ok(Space { wires, bases, dims, dim })
    }

    pub fn trivial() -> Space {
        Space { wires: Vec::new(), bases: Vec::new(), dims: Vec::new(), dim: 1 }
    }

    pub fn wires(&self) -> &[WireSpec] {
        &self.wires
    }

    pub fn bases(&self) -> &[Arc<FockBasis>] {
        &self.bases
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn position_of(&self, name: &str) -> Option<usize> {
        self.wires.iter().position(|w| w.name == name)
    }

    pub fn index(&self, digits: &[usize]) -> usize {
        digits.iter().zip(&self.dims).fold(0, |acc, (&d, &n)| acc * n + d)
    }

    pub fn digits(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for k in (0..self.dims.len()).rev() {
            out[k] = idx % self.dims[k];
            idx /= self.dims[k];
        }
        out
    }

    /// Total photon count of a joint basis state, per wire.
    pub fn photons(&self, idx: usize) -> Vec<usize> {
        self.digits(idx).iter().zip(&self.bases).map(|(&d, b)| b.photons(d)).collect()
    }

    pub fn without(&self, name: &str) -> Result<Space> {
        let wires = self.wires.iter().filter(|w| w.name != name).cloned().collect();
        Space::new(wires)
    }

    pub fn concat(&self, other: &Space) -> Result<Space> {
        Space::new(self.wires.iter().chain(other.wires.iter()).cloned().collect())
    }

    /// Every wire restricted to the positions in `keep`.
    pub fn restrict(&self, keep: &FixedBitSet) -> Result<Space> {
        Space::new(self.wires.iter().map(|w| w.restrict(keep)).collect())
    }

    /// Splits every wire into its part on `keep` and its part off `keep`.
    pub fn split(&self, keep: &FixedBitSet) -> Result<SpaceSplit> {
        let n = self.wires.iter().flat_map(|w| w.positions.iter().map(|p| p + 1)).max().unwrap_or(0).max(keep.len());
        let mut keep = keep.clone();
        keep.grow(n);
        let mut rest = keep.clone();
        rest.toggle_range(..);
        let kept = self.restrict(&keep)?;
        let other = self.restrict(&rest)?;
        let per_wire: Vec<Factorization> = self
            .bases
            .iter()
            .map(|b| {
                let first: Vec<usize> = b.wire.positions.iter().copied().filter(|&p| keep.contains(p)).collect();
                b.factorize(&Split::Positions(first))
            })
            .collect::<Result<_>>()?;
        let mut forward = Vec::with_capacity(self.dim);
        let mut backward = vec![None; kept.dim * other.dim];
        for idx in 0..self.dim {
            let digits = self.digits(idx);
            let mut d1 = Vec::with_capacity(digits.len());
            let mut d2 = Vec::with_capacity(digits.len());
            for (f, &d) in per_wire.iter().zip(&digits) {
                let (a, b) = f.map[d];
                d1.push(a);
                d2.push(b);
            }
            let (i, j) = (kept.index(&d1), other.index(&d2));
            forward.push((i, j));
            backward[i * other.dim + j] = Some(idx);
        }
        Ok(SpaceSplit { kept, rest: other, forward, backward })
    }
}

/// Per-position slices of a space: joint index <-> one slice index per position.
#[derive(Debug, Clone)]
pub struct Slicing {
    pub positions: Vec<usize>,
    pub slices: Vec<Space>,
    /// Joint index -> slice indices, one per position.
    pub digits: Vec<Vec<usize>>,
    index: HashMap<Vec<usize>, usize>,
}

impl Slicing {
    /// Joint index of a tuple of slice indices, if it respects every wire's truncation.
    pub fn merge(&self, digits: &[usize]) -> Option<usize> {
        self.index.get(digits).copied()
    }
}

impl Space {
    /// Slices the space by the given positions, which must cover every wire position.
    pub fn slicing(&self, positions: &[usize]) -> Result<Slicing> {
        for w in &self.wires {
            if let Some(p) = w.positions.iter().find(|p| !positions.contains(p)) {
                return Err(Error::Config(format!("position {p} of wire `{}` not covered by slicing", w.name)));
            }
        }
        let n = positions.iter().map(|p| p + 1).max().unwrap_or(0);
        let slices: Vec<Space> = positions
            .iter()
            .map(|&p| {
                let mut keep = FixedBitSet::with_capacity(n);
                keep.insert(p);
                self.restrict(&keep)
            })
            .collect::<Result<_>>()?;
        let mut digits = Vec::with_capacity(self.dim);
        let mut index = HashMap::with_capacity(self.dim);
        for x in 0..self.dim {
            let wd = self.digits(x);
            let mut tuple = Vec::with_capacity(positions.len());
            for (si, &p) in positions.iter().enumerate() {
                let slice = &slices[si];
                let mut sd = Vec::with_capacity(wd.len());
                for (w, b) in self.bases.iter().enumerate() {
                    let occ = b.state(wd[w]);
                    let part: Vec<u8> = b.modes.iter().zip(occ).filter(|((mp, _), _)| *mp == p).map(|(_, &k)| k).collect();
                    sd.push(slice.bases[w].index_of(&part).expect("slice occupation within truncation"));
                }
                tuple.push(slice.index(&sd));
            }
            index.insert(tuple.clone(), x);
            digits.push(tuple);
        }
        Ok(Slicing { positions: positions.to_vec(), slices, digits, index })
    }
}

/// Embedding of a space into (part on a cut) x (part off the cut).
#[derive(Debug, Clone)]
pub struct SpaceSplit {
    pub kept: Space,
    pub rest: Space,
    /// Joint index -> (kept index, rest index).
    pub forward: Vec<(usize, usize)>,
    backward: Vec<Option<usize>>,
}

impl SpaceSplit {
    pub fn merge(&self, kept: usize, rest: usize) -> Option<usize> {
        self.backward[kept * self.rest.dim() + rest]
    }
}

/// The action of a single-photon unitary on a Fock basis, mode values mixed position by position.
///
/// `u` is `d x d`; each photon at position `p` with value `v` is sent to `sum_w u[w,v] |w>` at `p`.
pub fn second_quantize(basis: &FockBasis, u: &CMat) -> Result<CMat> {
    let d = basis.wire.msg_dim;
    if u.nrows() != d || u.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, found: u.nrows() });
    }
    let n = basis.dim();
    let mut out = CMat::zeros(n, n);
    for (col, occ) in basis.states.iter().enumerate() {
        // Expand prod_i (a_i^dag)^{n_i} / sqrt(n_i!) with a_i^dag -> sum_j u[j,i] a_j^dag.
        let mut norm = 1.0;
        let mut creators = Vec::new();
        for (m, &k) in occ.iter().enumerate() {
            norm /= factorial(k as usize).sqrt();
            for _ in 0..k {
                creators.push(m);
            }
        }
        let mut terms: HashMap<Vec<u8>, C64> = HashMap::new();
        terms.insert(vec![0u8; basis.modes.len()], c(norm, 0.0));
        for &m in &creators {
            let (p, v) = basis.modes[m];
            let mut next: HashMap<Vec<u8>, C64> = HashMap::new();
            for (occ2, amp) in &terms {
                for w in 0..d {
                    let coeff = u[(w, v)];
                    if coeff == c(0.0, 0.0) {
                        continue;
                    }
                    let j = basis.mode_index(p, w).unwrap();
                    let mut o = occ2.clone();
                    o[j] += 1;
                    *next.entry(o).or_insert(c(0.0, 0.0)) += amp * coeff;
                }
            }
            terms = next;
        }
        for (occ2, amp) in terms {
            let weight: f64 = occ2.iter().map(|&k| factorial(k as usize)).product::<f64>().sqrt();
            let row = basis.index[&occ2];
            out[(row, col)] += amp * weight;
        }
    }
    Ok(out)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}
