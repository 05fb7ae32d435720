//! Causal boxes: a top-level channel over a finite poset plus a causality function.

use std::sync::Arc;

use fixedbitset::FixedBitSet;

use crate::channel::{channel_distance, Channel};
use crate::error::{Error, Result};
use crate::fock::{Space, WireSpec};
use crate::linalg::{c, complement_basis, eigh, pinv, polar_unitary, CMat, C64, ONE, ZERO};
use crate::poset::{CausalityFn, Cut, Poset, DEFAULT_CUT_CAP};

/// Tolerance of the per-cut causality certificate.
pub const CAUSALITY_TOL: f64 = 1e-8;
/// Tolerance on trace preservation of a box's top map.
pub const BOX_TP_TOL: f64 = 1e-8;
/// Residual above which stage extraction is reported as a failure.
pub const EXTRACTION_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct CausalBox {
    poset: Arc<Poset>,
    top: Channel,
    chi: CausalityFn,
    normalized: bool,
}

/// Summary of a successful validation.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub tp_residual: f64,
    pub cuts_checked: usize,
    pub max_residual: f64,
}

impl CausalBox {
    /// Validates and wraps a top map.
    pub fn new(poset: Arc<Poset>, top: Channel, chi: CausalityFn, normalized: bool) -> Result<CausalBox> {
        let b = CausalBox::new_unchecked(poset, top, chi, normalized)?;
        b.validate()?;
        Ok(b)
    }

    /// Wraps a top map after shape checks only.
    pub fn new_unchecked(poset: Arc<Poset>, top: Channel, chi: CausalityFn, normalized: bool) -> Result<CausalBox> {
        if chi.fingerprint() != poset.fingerprint() {
            return Err(Error::PosetMismatch);
        }
        let n = poset.len();
        for w in top.inputs().wires().iter().chain(top.outputs().wires()) {
            if let Some(&p) = w.positions.iter().find(|&&p| p >= n) {
                return Err(Error::UnknownLabel(p.to_string()));
            }
        }
        Ok(CausalBox { poset, top, chi, normalized })
    }

    /// Strict-past causality on `poset`.
    pub fn with_strict_past(poset: Arc<Poset>, top: Channel) -> Result<CausalBox> {
        let chi = poset.strict_past_causality();
        CausalBox::new(poset, top, chi, true)
    }

    pub fn poset(&self) -> &Arc<Poset> {
        &self.poset
    }

    pub fn top(&self) -> &Channel {
        &self.top
    }

    pub fn chi(&self) -> &CausalityFn {
        &self.chi
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn inputs(&self) -> &Space {
        self.top.inputs()
    }

    pub fn outputs(&self) -> &Space {
        self.top.outputs()
    }

    /// Checks trace conditions and the causality certificate on every cut.
    pub fn validate(&self) -> Result<ValidationReport> {
        let tp_residual = self.top.tp_residual();
        if self.normalized {
            if tp_residual > BOX_TP_TOL {
                return Err(Error::NotTp(tp_residual));
            }
            let cuts = self.poset.enumerate_cuts_capped(DEFAULT_CUT_CAP)?;
            let mut max_residual: f64 = 0.0;
            for cut in &cuts {
                let r = certificate_residual(&self.top, &self.chi, cut)?;
                if r > CAUSALITY_TOL {
                    return Err(Error::CausalityViolation { cut: cut.labels(&self.poset), residual: r });
                }
                max_residual = max_residual.max(r);
            }
            Ok(ValidationReport { tp_residual, cuts_checked: cuts.len(), max_residual })
        } else {
            let excess = self.top.tni_excess();
            if excess > BOX_TP_TOL {
                return Err(Error::NotTni(excess));
            }
            let flag = self.default_flag_position();
            let completed = self.completion_unchecked(flag)?;
            let mut report = completed.validate()?;
            report.tp_residual = tp_residual;
            Ok(report)
        }
    }

    /// Output of the restricted map on `cut`, as a channel from inputs on `chi(cut)` to outputs on `cut`.
    pub fn restrict(&self, cut: &Cut) -> Result<Channel> {
        let chi_c = self.chi.apply(cut)?;
        restrict_channel(&self.top, cut.bits(), chi_c.bits())
    }

    /// The restriction on `cut` with its input space padded back to all inputs.
    pub fn restrict_padded(&self, cut: &Cut) -> Result<Channel> {
        self.restrict(cut)?.pad_inputs(self.inputs())
    }

    /// Certificate residual on a single cut.
    pub fn certificate(&self, cut: &Cut) -> Result<f64> {
        certificate_residual(&self.top, &self.chi, cut)
    }

    /// Projects the output wire `flag` onto its vacuum: the box conditioned on success.
    pub fn project_success(&self, flag: &str) -> Result<CausalBox> {
        let top = self.top.project_vacuum(flag)?;
        CausalBox::new_unchecked(self.poset.clone(), top, self.chi.clone(), false)
    }

    /// A normalized box with an extra one-dimensional flag wire `R` at `flag_position`
    /// whose success projection is `self`.
    pub fn complete_to_normalized(&self, flag_position: &str) -> Result<CausalBox> {
        let f = self.poset.index_of(flag_position)?;
        if !self.poset.is_maximal(f) {
            return Err(Error::Config(format!("flag position `{flag_position}` is not maximal")));
        }
        let completed = self.completion_unchecked(f)?;
        completed.validate()?;
        Ok(completed)
    }

    /// The last maximal element of the linear extension.
    pub fn default_flag_position(&self) -> usize {
        *self.poset.linear_extension().iter().rev().find(|&&t| self.poset.is_maximal(t)).expect("nonempty poset")
    }

    fn completion_unchecked(&self, f: usize) -> Result<CausalBox> {
        let excess = self.top.tni_excess();
        if excess > BOX_TP_TOL {
            return Err(Error::NotTni(excess));
        }
        let mut name = String::from("R");
        while self.outputs().position_of(&name).is_some() {
            name.push('\'');
        }
        let flag = WireSpec::from_indices(&self.poset, &name, 1, [f], 1)?;
        let mut wires = self.outputs().wires().to_vec();
        wires.push(flag);
        let outputs = Space::new(wires)?;
        let dout = self.top.dout();
        let din = self.top.din();
        // index of (y, r) = y * 2 + r
        let mut kraus: Vec<CMat> = self
            .top
            .kraus()
            .iter()
            .map(|k| {
                let mut m = CMat::zeros(dout * 2, din);
                for y in 0..dout {
                    m.row_mut(y * 2).copy_from(&k.row(y));
                }
                m
            })
            .collect();
        let deficit = CMat::identity(din, din) - self.top.gram();
        let (vals, vecs) = eigh(&deficit);
        for (i, &v) in vals.iter().enumerate() {
            if v > 1e-14 {
                let mut m = CMat::zeros(dout * 2, din);
                let row = vecs.column(i).adjoint() * c(v.sqrt(), 0.0);
                m.row_mut(1).copy_from(&row);
                kraus.push(m);
            }
        }
        let top = Channel::from_kraus(kraus, self.inputs().clone(), outputs)?;
        CausalBox::new_unchecked(self.poset.clone(), top, self.chi.clone(), true)
    }

    /// Stage decomposition of the restriction to `cut` along `cut, chi(cut), ...`.
    pub fn sequence_representation(&self, cut: &Cut) -> Result<SequenceRep> {
        if !self.normalized {
            return Err(Error::NotNormalized);
        }
        let cuts = self.chi.descending_chain(cut)?;
        let m = cuts.len() - 1;
        let restrictions: Vec<Channel> = cuts.iter().map(|c| self.restrict(c)).collect::<Result<_>>()?;
        let mut dilations = Vec::with_capacity(cuts.len());
        let mut ancillas = Vec::with_capacity(cuts.len());
        for ch in &restrictions {
            let kr = ch.canonical_kraus();
            ancillas.push(kr.len().max(1));
            dilations.push(crate::channel::Isometry::from_kraus(&kr, ch.dout(), ch.din()).matrix);
        }
        let mut stages = Vec::with_capacity(m);
        for i in 0..m {
            let big = &restrictions[i];
            let small = &restrictions[i + 1];
            let u_big = dilation_or_zero(&dilations[i], ancillas[i], big);
            let u_small = dilation_or_zero(&dilations[i + 1], ancillas[i + 1], small);
            let stage = extract_stage(big, small, &u_big, ancillas[i], &u_small, ancillas[i + 1], &cuts[i + 1], &cuts[(i + 2).min(m)])?;
            stages.push(stage);
        }
        let mut rep = SequenceRep { cuts, stages, residual: 0.0, leaked: 0.0 };
        let (ch, leaked) = rep.reconstruct(&restrictions[0])?;
        let dist = channel_distance(&ch, &restrictions[0])?;
        rep.residual = dist + leaked;
        rep.leaked = leaked;
        if rep.residual > EXTRACTION_TOL {
            return Err(Error::ExtractionFailure(rep.residual));
        }
        Ok(rep)
    }
}

fn dilation_or_zero(v: &CMat, anc: usize, ch: &Channel) -> CMat {
    if v.ncols() == ch.din() && v.nrows() == ch.dout() * anc {
        v.clone()
    } else {
        CMat::zeros(ch.dout() * anc, ch.din())
    }
}

/// Restriction of a top map: outputs on `out_cut`, inputs on `in_cut` (other inputs fed vacuum).
pub fn restrict_channel(top: &Channel, out_cut: &FixedBitSet, in_cut: &FixedBitSet) -> Result<Channel> {
    let os = top.outputs().split(out_cut)?;
    let is = top.inputs().split(in_cut)?;
    let (dk, da) = (os.kept.dim(), is.kept.dim());
    let cols: Vec<usize> = (0..da).map(|a| is.merge(a, 0).expect("vacuum extension is valid")).collect();
    let mut kraus = Vec::with_capacity(top.kraus_rank() * os.rest.dim());
    for k in top.kraus() {
        for e in 0..os.rest.dim() {
            let mut m = CMat::zeros(dk, da);
            let mut any = false;
            for o in 0..dk {
                if let Some(y) = os.merge(o, e) {
                    for (a, &x) in cols.iter().enumerate() {
                        let v = k[(y, x)];
                        if v != ZERO {
                            m[(o, a)] = v;
                            any = true;
                        }
                    }
                }
            }
            if any {
                kraus.push(m);
            }
        }
    }
    Channel::from_kraus(kraus, is.kept, os.kept)
}

/// Max deviation of `Tr_{outputs off cut}` of the top map from `(restriction) (x) Tr` on inputs off `chi(cut)`.
pub fn certificate_residual(top: &Channel, chi: &CausalityFn, cut: &Cut) -> Result<f64> {
    let chi_c = chi.apply(cut)?;
    let is = top.inputs().split(chi_c.bits())?;
    if is.rest.dim() == 1 {
        return Ok(0.0);
    }
    let os = top.outputs().split(cut.bits())?;
    let din = top.din();
    let (dk, de) = (os.kept.dim(), os.rest.dim());
    // Sparse rows of every Kraus operator.
    let rows: Vec<Vec<Vec<(usize, C64)>>> = top
        .kraus()
        .iter()
        .map(|k| (0..k.nrows()).map(|y| (0..din).filter(|&x| k[(y, x)] != ZERO).map(|x| (x, k[(y, x)])).collect()).collect())
        .collect();
    let vac: Vec<usize> = (0..din).map(|x| is.merge(is.forward[x].0, 0).unwrap()).collect();
    let bpart: Vec<usize> = (0..din).map(|x| is.forward[x].1).collect();
    let mut block = CMat::zeros(din, din);
    let mut worst: f64 = 0.0;
    for o in 0..dk {
        for o2 in o..dk {
            block.fill(ZERO);
            let mut touched = false;
            for kr in &rows {
                for e in 0..de {
                    let (Some(y), Some(y2)) = (os.merge(o, e), os.merge(o2, e)) else { continue };
                    for &(x, v) in &kr[y] {
                        for &(x2, v2) in &kr[y2] {
                            block[(x, x2)] += v * v2.conj();
                            touched = true;
                        }
                    }
                }
            }
            if !touched {
                continue;
            }
            for x in 0..din {
                for x2 in 0..din {
                    let expect = if bpart[x] == bpart[x2] { block[(vac[x], vac[x2])] } else { ZERO };
                    worst = worst.max((block[(x, x2)] - expect).norm());
                }
            }
        }
    }
    Ok(worst)
}

/// One stage isometry `V_i`: (ancilla_{i+1} (x) inputs on T_{i+1}) -> (outputs on T_i (x) ancilla_i).
#[derive(Debug, Clone)]
pub struct Stage {
    /// Rows `(y, k)` with `y` the stage output and `k` the outgoing ancilla; columns `(r, q)`.
    pub matrix: CMat,
    pub out_dim: usize,
    pub out_ancilla: usize,
    pub in_ancilla: usize,
    pub in_dim: usize,
    /// True when `V` is only an isometry on the subspace actually reached.
    pub partial: bool,
    pub residual: f64,
}

/// Stage decomposition of a restricted box.
#[derive(Debug, Clone)]
pub struct SequenceRep {
    /// `C_1, chi(C_1), ..., empty`.
    pub cuts: Vec<Cut>,
    /// `V_1, ..., V_m`, latest stage first.
    pub stages: Vec<Stage>,
    /// Channel distance between the reconstruction and the restriction, plus leaked weight.
    pub residual: f64,
    pub leaked: f64,
}

impl SequenceRep {
    /// Recomposes the stages into a dilation of the restriction to the first cut.
    ///
    /// Returns the traced-out channel and the weight falling outside the truncated output space.
    pub fn reconstruct(&self, target: &Channel) -> Result<(Channel, f64)> {
        let m = self.stages.len();
        // Innermost: the empty cut, trivial spaces.
        let mut u = CMat::from_element(1, 1, ONE);
        let mut anc = 1usize;
        let mut leaked = 0.0;
        // Spaces per level, built from the target's wires.
        for i in (0..m).rev() {
            let stage = &self.stages[i];
            let out_big = target.outputs().restrict(self.cuts[i].bits())?;
            let in_big = target.inputs().restrict(self.cuts[(i + 1).min(m)].bits())?;
            let os = out_big.split(self.cuts[i + 1].bits())?;
            let next = if i + 2 <= m { self.cuts[i + 2].bits().clone() } else { FixedBitSet::with_capacity(0) };
            let is = in_big.split(&next)?;
            let (dc, dy) = (os.kept.dim(), os.rest.dim());
            let mut nu = CMat::zeros(out_big.dim() * stage.out_ancilla, in_big.dim());
            for x in 0..in_big.dim() {
                let (p, q) = is.forward[x];
                for cidx in 0..dc {
                    for y in 0..dy {
                        for k in 0..stage.out_ancilla {
                            let mut acc = ZERO;
                            for r in 0..anc {
                                let v = stage.matrix[(y * stage.out_ancilla + k, r * stage.in_dim + q)];
                                if v != ZERO {
                                    acc += v * u[(cidx * anc + r, p)];
                                }
                            }
                            if acc == ZERO {
                                continue;
                            }
                            match os.merge(cidx, y) {
                                Some(j) => nu[(j * stage.out_ancilla + k, x)] = acc,
                                None => leaked += acc.norm_sqr(),
                            }
                        }
                    }
                }
            }
            u = nu;
            anc = stage.out_ancilla;
        }
        let kraus: Vec<CMat> = (0..anc).map(|k| CMat::from_fn(target.dout(), target.din(), |o, x| u[(o * anc + k, x)])).collect();
        let ch = Channel::from_kraus(kraus, target.inputs().clone(), target.outputs().clone())?;
        Ok((ch, leaked))
    }
}

#[allow(clippy::too_many_arguments)]
fn extract_stage(
    big: &Channel,
    small: &Channel,
    u_big: &CMat,
    anc_big: usize,
    u_small: &CMat,
    anc_small: usize,
    next_cut: &Cut,
    next_next: &Cut,
) -> Result<Stage> {
    // Outputs of `big` split into (c on next_cut, y on this stage); inputs into (p, q).
    let os = big.outputs().split(next_cut.bits())?;
    let is = big.inputs().split(next_next.bits())?;
    if os.kept != *small.outputs() || is.kept != *small.inputs() {
        return Err(Error::ShapeMismatch("stage spaces do not nest".into()));
    }
    let (dc, dy) = (os.kept.dim(), os.rest.dim());
    let dx = big.din();
    let dq = is.rest.dim();
    let cols = dc * dx;
    let mut n = CMat::zeros(dy * anc_big, cols);
    let mut mm = CMat::zeros(anc_small * dq, cols);
    for cidx in 0..dc {
        for x in 0..dx {
            let col = cidx * dx + x;
            let (p, q) = is.forward[x];
            for y in 0..dy {
                if let Some(j) = os.merge(cidx, y) {
                    for k in 0..anc_big {
                        n[(y * anc_big + k, col)] = u_big[(j * anc_big + k, x)];
                    }
                }
            }
            for r in 0..anc_small {
                mm[(r * dq + q, col)] = u_small[(cidx * anc_small + r, p)];
            }
        }
    }
    let v0 = &n * pinv(&mm, 1e-10);
    // Reached subspace of (r, q): column span of M.
    let gram = &mm * mm.adjoint();
    let (vals, vecs) = eigh(&gram);
    let scale = vals.first().copied().unwrap_or(0.0).max(1e-300);
    let reach: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 1e-10 * scale.max(1.0)).collect();
    let rows = dy * anc_big;
    let dim_in = anc_small * dq;
    let (matrix, partial) = if reach.is_empty() {
        (CMat::zeros(rows, dim_in), dim_in > 0)
    } else {
        let basis = CMat::from_columns(&reach.iter().map(|&i| vecs.column(i)).collect::<Vec<_>>());
        let image = polar_unitary(&(&v0 * &basis));
        let mut v = &image * basis.adjoint();
        let rest_in = complement_basis(&basis, 1e-10);
        let rest_out = complement_basis(&image, 1e-10);
        let extra = rest_in.ncols();
        let partial = extra > rest_out.ncols();
        let fill = extra.min(rest_out.ncols());
        if fill > 0 {
            let a = rest_out.columns(0, fill).into_owned();
            let b = rest_in.columns(0, fill).into_owned();
            v += a * b.adjoint();
        }
        (v, partial)
    };
    let residual = crate::linalg::max_abs_diff(&(&matrix * &mm), &n);
    if residual > EXTRACTION_TOL {
        return Err(Error::ExtractionFailure(residual));
    }
    Ok(Stage { matrix, out_dim: dy, out_ancilla: anc_big, in_ancilla: anc_small, in_dim: dq, partial, residual })
}
