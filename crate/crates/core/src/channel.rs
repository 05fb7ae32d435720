//! Completely positive maps between wire spaces.
//!
//! A channel is stored as a list of Kraus operators. The Choi matrix, natural
//! representation and Stinespring isometry are derived on demand.

use std::collections::HashMap;

use fixedbitset::FixedBitSet;

use crate::error::{Error, Result};
use crate::fock::Space;
use crate::linalg::{c, eigh, fix_phase, max_abs_diff, trace, CMat, CVec, C64, ONE, ZERO};

/// Eigenvalue cutoff when extracting Kraus operators from a Choi matrix.
pub const RANK_TOL: f64 = 1e-9;
/// Eigenvalue cutoff when merging Kraus operators after an operation.
pub const COMPRESS_TOL: f64 = 1e-13;
/// Tolerance for direct constructions.
pub const TOL: f64 = 1e-9;

/// Largest Choi dimension built densely by [`Channel::choi`].
pub const MAX_CHOI_DIM: usize = 1 << 13;

#[derive(Debug, Clone)]
pub struct Channel {
    inputs: Space,
    outputs: Space,
    kraus: Vec<CMat>,
}

/// Result of [`Channel::verify`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelReport {
    pub cp: bool,
    pub tp: bool,
    pub tni: bool,
    pub min_eig: f64,
    pub tp_residual: f64,
}

impl Channel {
    /// Builds a channel from Kraus operators `dim(outputs) x dim(inputs)`.
    pub fn from_kraus(kraus: Vec<CMat>, inputs: Space, outputs: Space) -> Result<Channel> {
        for k in &kraus {
            if k.nrows() != outputs.dim() {
                return Err(Error::DimensionMismatch { expected: outputs.dim(), found: k.nrows() });
            }
            if k.ncols() != inputs.dim() {
                return Err(Error::DimensionMismatch { expected: inputs.dim(), found: k.ncols() });
            }
        }
        let mut ch = Channel { inputs, outputs, kraus };
        ch.compress();
        Ok(ch)
    }

    /// Builds a channel without merging redundant Kraus operators.
    pub fn from_kraus_raw(kraus: Vec<CMat>, inputs: Space, outputs: Space) -> Result<Channel> {
        let mut ch = Self::from_kraus(Vec::new(), inputs, outputs)?;
        for k in &kraus {
            if k.shape() != (ch.outputs.dim(), ch.inputs.dim()) {
                return Err(Error::DimensionMismatch { expected: ch.outputs.dim() * ch.inputs.dim(), found: k.len() });
            }
        }
        ch.kraus = kraus;
        Ok(ch)
    }

    /// Builds a channel from a Choi matrix on `outputs (x) inputs`.
    pub fn from_choi(choi: &CMat, inputs: Space, outputs: Space) -> Result<Channel> {
        let (dout, din) = (outputs.dim(), inputs.dim());
        if choi.nrows() != dout * din || choi.ncols() != dout * din {
            return Err(Error::DimensionMismatch { expected: dout * din, found: choi.nrows() });
        }
        let herm = max_abs_diff(choi, &choi.adjoint());
        if herm > TOL {
            return Err(Error::NotCp(-herm));
        }
        let (vals, vecs) = eigh(choi);
        let min = vals.last().copied().unwrap_or(0.0);
        if min < -RANK_TOL {
            return Err(Error::NotCp(min));
        }
        let kraus = vals
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > RANK_TOL)
            .map(|(k, &v)| {
                let mut col: Vec<C64> = vecs.column(k).iter().copied().collect();
                fix_phase(&mut col, 1e-12);
                CMat::from_row_slice(dout, din, &col) * c(v.sqrt(), 0.0)
            })
            .collect();
        Ok(Channel { inputs, outputs, kraus })
    }

    /// Builds a channel from its natural representation.
    pub fn from_natural(nat: &CMat, inputs: Space, outputs: Space) -> Result<Channel> {
        let choi = reshuffle(nat, outputs.dim(), inputs.dim());
        Self::from_choi(&choi, inputs, outputs)
    }

    pub fn identity(space: Space) -> Channel {
        let n = space.dim();
        Channel { inputs: space.clone(), outputs: space, kraus: vec![CMat::identity(n, n)] }
    }

    /// Discards the input and emits `outputs`' vacuum.
    pub fn discard(inputs: Space, outputs: Space) -> Channel {
        let din = inputs.dim();
        let dout = outputs.dim();
        let kraus = (0..din)
            .map(|b| {
                let mut k = CMat::zeros(dout, din);
                k[(0, b)] = ONE;
                k
            })
            .collect();
        Channel { inputs, outputs, kraus }
    }

    pub fn inputs(&self) -> &Space {
        &self.inputs
    }

    pub fn outputs(&self) -> &Space {
        &self.outputs
    }

    pub fn din(&self) -> usize {
        self.inputs.dim()
    }

    pub fn dout(&self) -> usize {
        self.outputs.dim()
    }

    pub fn kraus(&self) -> &[CMat] {
        &self.kraus
    }

    pub fn kraus_rank(&self) -> usize {
        self.kraus.len()
    }

    pub fn into_kraus(self) -> Vec<CMat> {
        self.kraus
    }

    /// Same map, wires relabeled by spaces of identical dimensions.
    pub fn with_spaces(&self, inputs: Space, outputs: Space) -> Result<Channel> {
        if inputs.dim() != self.din() {
            return Err(Error::DimensionMismatch { expected: self.din(), found: inputs.dim() });
        }
        if outputs.dim() != self.dout() {
            return Err(Error::DimensionMismatch { expected: self.dout(), found: outputs.dim() });
        }
        Ok(Channel { inputs, outputs, kraus: self.kraus.clone() })
    }

    /// Choi matrix `sum_ij Phi(|i><j|) (x) |i><j|`, rows indexed `o * din + i`.
    pub fn choi(&self) -> CMat {
        let d = self.dout() * self.din();
        assert!(d <= MAX_CHOI_DIM, "Choi matrix of dimension {d} is too large to build densely");
        let mut j = CMat::zeros(d, d);
        for k in &self.kraus {
            let v = vec_row_major(k);
            j += &v * v.adjoint();
        }
        j
    }

    /// Natural representation: `vec(Phi(rho)) = K vec(rho)` with row-major vectorization.
    pub fn natural(&self) -> CMat {
        let (dout, din) = (self.dout(), self.din());
        assert!(dout * din <= MAX_CHOI_DIM, "natural representation too large");
        let mut nat = CMat::zeros(dout * dout, din * din);
        for k in &self.kraus {
            nat += k.kronecker(&k.map(|z| z.conj()));
        }
        nat
    }

    pub fn apply(&self, rho: &CMat) -> Result<CMat> {
        if rho.nrows() != self.din() || rho.ncols() != self.din() {
            return Err(Error::DimensionMismatch { expected: self.din(), found: rho.nrows() });
        }
        let mut out = CMat::zeros(self.dout(), self.dout());
        for k in &self.kraus {
            out += k * rho * k.adjoint();
        }
        Ok(out)
    }

    /// `sum_k K_k^dag K_k`.
    pub fn gram(&self) -> CMat {
        let mut g = CMat::zeros(self.din(), self.din());
        for k in &self.kraus {
            g += k.adjoint() * k;
        }
        g
    }

    pub fn tp_residual(&self) -> f64 {
        max_abs_diff(&self.gram(), &CMat::identity(self.din(), self.din()))
    }

    pub fn is_tp(&self, tol: f64) -> bool {
        self.tp_residual() <= tol
    }

    /// Largest eigenvalue of `sum K^dag K` minus one; `<= tol` means trace non-increasing.
    pub fn tni_excess(&self) -> f64 {
        eigh(&self.gram()).0.first().copied().unwrap_or(0.0) - 1.0
    }

    pub fn verify(&self) -> ChannelReport {
        let tp_residual = self.tp_residual();
        let excess = self.tni_excess();
        ChannelReport { cp: true, tp: tp_residual <= TOL, tni: excess <= TOL, min_eig: 0.0, tp_residual }
    }

    /// Parallel product; inputs and outputs are concatenated.
    pub fn tensor(&self, other: &Channel) -> Result<Channel> {
        let inputs = self.inputs.concat(&other.inputs)?;
        let outputs = self.outputs.concat(&other.outputs)?;
        let mut kraus = Vec::with_capacity(self.kraus.len() * other.kraus.len());
        for a in &self.kraus {
            for b in &other.kraus {
                kraus.push(a.kronecker(b));
            }
        }
        Channel::from_kraus(kraus, inputs, outputs)
    }

    /// Traces out a whole output wire.
    pub fn trace_out_wire(&self, name: &str) -> Result<Channel> {
        let w = self.outputs.position_of(name).ok_or_else(|| Error::NotAFactor(name.to_string()))?;
        let outputs = self.outputs.without(name)?;
        let dims = self.outputs.dims();
        let inner: usize = dims[w + 1..].iter().product();
        let dw = dims[w];
        let outer: usize = dims[..w].iter().product();
        let mut kraus = Vec::with_capacity(self.kraus.len() * dw);
        for k in &self.kraus {
            for j in 0..dw {
                let mut m = CMat::zeros(outputs.dim(), self.din());
                for a in 0..outer {
                    for b in 0..inner {
                        let src = (a * dw + j) * inner + b;
                        m.row_mut(a * inner + b).copy_from(&k.row(src));
                    }
                }
                kraus.push(m);
            }
        }
        Channel::from_kraus(kraus, self.inputs.clone(), outputs)
    }

    /// Traces out every output mode at a position in `positions`; wires keep their names.
    pub fn trace_out_positions(&self, positions: &FixedBitSet) -> Result<Channel> {
        let mut keep = positions.clone();
        keep.grow(self.outputs.wires().iter().flat_map(|w| w.positions.iter().map(|p| p + 1)).max().unwrap_or(0));
        keep.toggle_range(..);
        let split = self.outputs.split(&keep)?;
        let kept = split.kept.dim();
        let mut kraus = Vec::with_capacity(self.kraus.len() * split.rest.dim());
        for k in &self.kraus {
            for r in 0..split.rest.dim() {
                let mut m = CMat::zeros(kept, self.din());
                let mut any = false;
                for o in 0..kept {
                    if let Some(y) = split.merge(o, r) {
                        m.row_mut(o).copy_from(&k.row(y));
                        any = true;
                    }
                }
                if any {
                    kraus.push(m);
                }
            }
        }
        Channel::from_kraus(kraus, self.inputs.clone(), split.kept)
    }

    /// Merges linearly dependent Kraus operators without changing the map.
    pub fn compress(&mut self) {
        let r = self.kraus.len();
        if r <= 1 {
            if r == 1 && self.kraus[0].iter().all(|z| *z == ZERO) {
                self.kraus.clear();
            }
            return;
        }
        let d = self.dout() * self.din();
        if r > d && d <= MAX_CHOI_DIM {
            let mut j = CMat::zeros(d, d);
            for k in &self.kraus {
                let v = vec_row_major(k);
                j += &v * v.adjoint();
            }
            let (vals, vecs) = eigh(&j);
            let scale = vals.first().copied().unwrap_or(0.0).max(1.0);
            self.kraus = vals
                .iter()
                .enumerate()
                .filter(|(_, &v)| v > COMPRESS_TOL * scale)
                .map(|(k, &v)| {
                    let col: Vec<C64> = vecs.column(k).iter().copied().collect();
                    CMat::from_row_slice(self.dout(), self.din(), &col) * c(v.sqrt(), 0.0)
                })
                .collect();
        } else {
            self.kraus = orthogonalize(&self.kraus, COMPRESS_TOL);
        }
    }

    /// Kraus operators with orthogonal vectorizations, sorted by decreasing weight and phase fixed;
    /// weights at or below `RANK_TOL` are dropped.
    pub fn canonical_kraus(&self) -> Vec<CMat> {
        let mut ks = orthogonalize(&self.kraus, 0.0);
        ks.retain(|k| k.norm_squared() > RANK_TOL);
        for k in ks.iter_mut() {
            let mut v = vec_row_major(k).as_slice().to_vec();
            fix_phase(&mut v, 1e-12);
            *k = CMat::from_row_slice(k.nrows(), k.ncols(), &v);
        }
        ks
    }

    /// Minimal Stinespring isometry, rows indexed `o * ancilla + k`.
    pub fn stinespring(&self) -> Isometry {
        let ks = self.canonical_kraus();
        Isometry::from_kraus(&ks, self.dout(), self.din())
    }

    /// `(<vac|_wire (x) I) K`: projects an output wire onto its vacuum and removes it.
    pub fn project_vacuum(&self, name: &str) -> Result<Channel> {
        let w = self.outputs.position_of(name).ok_or_else(|| Error::NotAFactor(name.to_string()))?;
        let outputs = self.outputs.without(name)?;
        let dims = self.outputs.dims();
        let inner: usize = dims[w + 1..].iter().product();
        let dw = dims[w];
        let outer: usize = dims[..w].iter().product();
        let kraus = self
            .kraus
            .iter()
            .map(|k| {
                let mut m = CMat::zeros(outputs.dim(), self.din());
                for a in 0..outer {
                    for b in 0..inner {
                        m.row_mut(a * inner + b).copy_from(&k.row(a * dw * inner + b));
                    }
                }
                m
            })
            .collect();
        Channel::from_kraus(kraus, self.inputs.clone(), outputs)
    }

    /// `K (x) <b|` for every basis state `b` of the extra inputs: ignores inputs absent from `self`.
    ///
    /// `full` must contain every input wire of `self` (with at least its positions).
    pub fn pad_inputs(&self, full: &Space) -> Result<Channel> {
        let mut keep = FixedBitSet::new();
        for w in self.inputs.wires() {
            for &p in &w.positions {
                keep.grow(p + 1);
                keep.insert(p);
            }
        }
        let split = full.split(&keep)?;
        if split.kept != self.inputs {
            return Err(Error::ShapeMismatch("padded space does not extend the channel inputs".into()));
        }
        let mut kraus = Vec::with_capacity(self.kraus.len() * split.rest.dim());
        for k in &self.kraus {
            for b in 0..split.rest.dim() {
                let mut m = CMat::zeros(self.dout(), full.dim());
                for x in 0..full.dim() {
                    let (a, bb) = split.forward[x];
                    if bb == b {
                        m.column_mut(x).copy_from(&k.column(a));
                    }
                }
                kraus.push(m);
            }
        }
        Channel::from_kraus(kraus, full.clone(), self.outputs.clone())
    }

    /// The map multiplied by `p >= 0`.
    pub fn scaled(&self, p: f64) -> Channel {
        let s = c(p.max(0.0).sqrt(), 0.0);
        Channel { inputs: self.inputs.clone(), outputs: self.outputs.clone(), kraus: self.kraus.iter().map(|k| k * s).collect() }
    }

    /// Permutes the output and input wires into the given name orders.
    pub fn reorder(&self, outputs: &[&str], inputs: &[&str]) -> Result<Channel> {
        let (op, out_space) = wire_permutation(&self.outputs, outputs)?;
        let (ip, in_space) = wire_permutation(&self.inputs, inputs)?;
        let odims: Vec<usize> = self.outputs.dims().to_vec();
        let idims: Vec<usize> = self.inputs.dims().to_vec();
        let mut dims = odims.clone();
        dims.extend(&idims);
        let mut perm = op.clone();
        perm.extend(ip.iter().map(|&i| i + odims.len()));
        let kraus = self
            .kraus
            .iter()
            .map(|k| {
                let data = crate::linalg::permute_axes(&crate::linalg::row_major(k), &dims, &perm);
                CMat::from_row_slice(out_space.dim(), in_space.dim(), &data)
            })
            .collect();
        Ok(Channel { inputs: in_space, outputs: out_space, kraus })
    }

    /// Sum of two channels on the same spaces.
    pub fn sum(&self, other: &Channel) -> Result<Channel> {
        if self.inputs != other.inputs || self.outputs != other.outputs {
            return Err(Error::ShapeMismatch("channel sum over different spaces".into()));
        }
        let mut kraus = self.kraus.clone();
        kraus.extend(other.kraus.iter().cloned());
        Channel::from_kraus(kraus, self.inputs.clone(), self.outputs.clone())
    }
}

fn wire_permutation(space: &Space, order: &[&str]) -> Result<(Vec<usize>, Space)> {
    if order.len() != space.wires().len() {
        return Err(Error::ShapeMismatch(format!("expected {} wires, got {}", space.wires().len(), order.len())));
    }
    let mut perm = Vec::with_capacity(order.len());
    for name in order {
        let p = space.position_of(name).ok_or_else(|| Error::NotAFactor(name.to_string()))?;
        if perm.contains(&p) {
            return Err(Error::NameCollision(name.to_string()));
        }
        perm.push(p);
    }
    let wires = perm.iter().map(|&p| space.wires()[p].clone()).collect();
    Ok((perm, Space::new(wires)?))
}

/// Row-major vectorization: entry `o * ncols + i`.
pub fn vec_row_major(k: &CMat) -> CVec {
    let mut v = CVec::zeros(k.len());
    let cols = k.ncols();
    for o in 0..k.nrows() {
        for i in 0..cols {
            v[o * cols + i] = k[(o, i)];
        }
    }
    v
}

/// Orthogonal recombination of Kraus operators via the eigenvectors of their Gram matrix.
fn orthogonalize(kraus: &[CMat], rel_tol: f64) -> Vec<CMat> {
    let r = kraus.len();
    if r == 0 {
        return Vec::new();
    }
    let mut g = CMat::zeros(r, r);
    for i in 0..r {
        for j in i..r {
            let v = kraus[i].dotc(&kraus[j]);
            g[(i, j)] = v;
            g[(j, i)] = v.conj();
        }
    }
    let (vals, u) = eigh(&g);
    let scale = vals.first().copied().unwrap_or(0.0).max(1.0);
    let (rows, cols) = kraus[0].shape();
    vals.iter()
        .enumerate()
        .filter(|(_, &v)| v > rel_tol * scale && v > 0.0)
        .map(|(m, _)| {
            let mut k = CMat::zeros(rows, cols);
            for (i, ki) in kraus.iter().enumerate() {
                let w = u[(i, m)];
                if w != ZERO {
                    k += ki * w;
                }
            }
            k
        })
        .collect()
}

/// Swaps Choi and natural index conventions: `out[(k,l),(i,j)] = m[(k,i),(l,j)]`.
///
/// Applying it to a Choi matrix gives the natural representation; applying the
/// transposed-shape version to a natural matrix returns the Choi matrix.
pub fn reshuffle(m: &CMat, dout: usize, din: usize) -> CMat {
    let (r, cl) = (m.nrows(), m.ncols());
    if r == dout * din && cl == dout * din {
        // Choi -> natural
        let mut out = CMat::zeros(dout * dout, din * din);
        for k in 0..dout {
            for i in 0..din {
                for l in 0..dout {
                    for j in 0..din {
                        out[(k * dout + l, i * din + j)] = m[(k * din + i, l * din + j)];
                    }
                }
            }
        }
        out
    } else {
        assert_eq!((r, cl), (dout * dout, din * din), "reshuffle shape");
        let mut out = CMat::zeros(dout * din, dout * din);
        for k in 0..dout {
            for i in 0..din {
                for l in 0..dout {
                    for j in 0..din {
                        out[(k * din + i, l * din + j)] = m[(k * dout + l, i * din + j)];
                    }
                }
            }
        }
        out
    }
}

/// Report from [`verify_choi`].
pub fn verify_choi(choi: &CMat, dout: usize, din: usize) -> ChannelReport {
    let (vals, _) = eigh(choi);
    let min_eig = vals.last().copied().unwrap_or(0.0);
    let t = partial_trace_outputs(choi, dout, din);
    let tp_residual = max_abs_diff(&t, &CMat::identity(din, din));
    let excess = eigh(&t).0.first().copied().unwrap_or(0.0) - 1.0;
    let herm = max_abs_diff(choi, &choi.adjoint());
    ChannelReport { cp: min_eig >= -TOL && herm <= TOL, tp: tp_residual <= TOL, tni: excess <= TOL, min_eig, tp_residual }
}

/// `Tr_out J`, equal to the transpose of `sum K^dag K`.
pub fn partial_trace_outputs(choi: &CMat, dout: usize, din: usize) -> CMat {
    CMat::from_fn(din, din, |i, j| (0..dout).map(|o| choi[(o * din + i, o * din + j)]).sum())
}

/// A matrix `V` from inputs into `outputs (x) ancilla`, rows indexed `o * ancilla + k`.
#[derive(Debug, Clone)]
pub struct Isometry {
    pub matrix: CMat,
    pub ancilla_dim: usize,
}

impl Isometry {
    pub fn from_kraus(kraus: &[CMat], dout: usize, din: usize) -> Isometry {
        let anc = kraus.len();
        let mut v = CMat::zeros(dout * anc, din);
        for (k, m) in kraus.iter().enumerate() {
            for o in 0..dout {
                v.row_mut(o * anc + k).copy_from(&m.row(o));
            }
        }
        Isometry { matrix: v, ancilla_dim: anc }
    }

    pub fn out_dim(&self) -> usize {
        self.matrix.nrows() / self.ancilla_dim.max(1)
    }

    pub fn kraus(&self) -> Vec<CMat> {
        let anc = self.ancilla_dim;
        let dout = self.out_dim();
        (0..anc).map(|k| CMat::from_fn(dout, self.matrix.ncols(), |o, i| self.matrix[(o * anc + k, i)])).collect()
    }

    /// The channel `rho -> Tr_anc V rho V^dag`.
    pub fn channel(&self, inputs: Space, outputs: Space) -> Result<Channel> {
        Channel::from_kraus(self.kraus(), inputs, outputs)
    }

    pub fn defect(&self) -> f64 {
        crate::linalg::isometry_defect(&self.matrix)
    }
}

/// Distance between two channels on the same spaces.
///
/// Max-entry distance of the Choi matrices when small enough to build, otherwise the
/// operator norm of their difference (an upper bound on the max-entry distance).
pub fn channel_distance(a: &Channel, b: &Channel) -> Result<f64> {
    if a.din() != b.din() || a.dout() != b.dout() {
        return Err(Error::ShapeMismatch("channels act on different spaces".into()));
    }
    let d = a.din() * a.dout();
    if d <= 1024 {
        return Ok(max_abs_diff(&a.choi(), &b.choi()));
    }
    Ok(choi_diff_norm(a, b))
}

/// Operator norm of the difference of two Choi matrices, computed from Kraus Gram data.
pub fn choi_diff_norm(a: &Channel, b: &Channel) -> f64 {
    let ka: Vec<CVec> = a.kraus.iter().map(vec_row_major).collect();
    let kb: Vec<CVec> = b.kraus.iter().map(vec_row_major).collect();
    let all: Vec<&CVec> = ka.iter().chain(kb.iter()).collect();
    let n = all.len();
    if n == 0 {
        return 0.0;
    }
    let mut g = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            g[(i, j)] = all[i].dotc(all[j]);
        }
    }
    let (lam, u) = eigh(&g);
    let sign = CMat::from_diagonal(&CVec::from_iterator(n, (0..n).map(|i| if i < ka.len() { ONE } else { -ONE })));
    let sq = CMat::from_diagonal(&CVec::from_iterator(n, lam.iter().map(|&l| c(l.max(0.0).sqrt(), 0.0))));
    let h = &sq * u.adjoint() * sign * &u * &sq;
    eigh(&h).0.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Trace of a channel with one-dimensional input and output spaces.
pub fn scalar_weight(ch: &Channel) -> f64 {
    ch.kraus.iter().map(|k| trace(&(k.adjoint() * k)).re).sum()
}

/// Groups Kraus operators by a hashable key and sums within each group.
pub fn sum_grouped<K: std::hash::Hash + Eq>(items: impl IntoIterator<Item = (K, CMat)>) -> Vec<CMat> {
    let mut map: HashMap<K, usize> = HashMap::new();
    let mut out: Vec<CMat> = Vec::new();
    for (key, m) in items {
        match map.get(&key) {
            Some(&i) => out[i] += m,
            None => {
                map.insert(key, out.len());
                out.push(m);
            }
        }
    }
    out
}
