//! Distinguishers, distinguishing advantage and seeded lower bounds on the box distance.

use std::f64::consts::PI;
use std::sync::Arc;

use fixedbitset::FixedBitSet;
use rand::seq::SliceRandom;

use crate::causalbox::CausalBox;
use crate::channel::{scalar_weight, Channel};
use crate::error::{Error, Result};
use crate::fock::{Space, WireSpec};
use crate::linalg::{c, eigh, helstrom, projector, trace, CMat, CVec, ONE};
use crate::network::{connect, connect_channels, PortPairing};
use crate::poset::{Cut, Poset};
use crate::random::seeded;

/// A box wired around a system, deciding by whether its output wire stays empty up to `termination`.
#[derive(Debug, Clone)]
pub struct Distinguisher {
    pub core: CausalBox,
    /// Pairs between core and system wires, in either direction.
    pub pairing: PortPairing,
    pub termination: usize,
    pub output_wire: String,
}

impl Distinguisher {
    pub fn new(core: CausalBox, pairing: PortPairing, termination: usize, output_wire: &str) -> Result<Distinguisher> {
        if termination >= core.poset().len() {
            return Err(Error::UnknownLabel(termination.to_string()));
        }
        let w = core.outputs().position_of(output_wire).ok_or_else(|| Error::NotAFactor(output_wire.to_string()))?;
        if core.outputs().wires()[w].msg_dim != 1 {
            return Err(Error::ShapeMismatch(format!("decision wire `{output_wire}` must carry one-dimensional messages")));
        }
        if pairing.pairs.iter().any(|(o, i)| o == output_wire || i == output_wire) {
            return Err(Error::InvalidPairing(format!("decision wire `{output_wire}` is paired")));
        }
        Ok(Distinguisher { core, pairing, termination, output_wire: output_wire.to_string() })
    }

    /// The closed network: the decision wire is its only wire.
    fn closed(&self, system: &CausalBox) -> Result<Channel> {
        if self.core.poset().fingerprint() != system.poset().fingerprint() {
            return Err(Error::PosetMismatch);
        }
        let net = connect_channels(self.core.top(), system.top(), &self.pairing)?;
        if net.inputs().dim() != 1 || net.outputs().wires().len() != 1 || net.outputs().wires()[0].name != self.output_wire {
            return Err(Error::ShapeMismatch("distinguisher does not close the system".into()));
        }
        Ok(net)
    }
}

fn past_complement(poset: &Poset, cut: &Cut) -> FixedBitSet {
    let mut off = FixedBitSet::with_capacity(poset.len());
    off.insert_range(..);
    off.difference_with(cut.bits());
    off
}

/// Vacuum weight and total weight of the decision restricted to `cut`.
fn decision_weights(net: &Channel, poset: &Poset, cut: &Cut) -> Result<(f64, f64)> {
    let r = net.trace_out_positions(&past_complement(poset, cut))?;
    let rho = r.apply(&CMat::from_element(1, 1, ONE))?;
    Ok((rho[(0, 0)].re, trace(&rho).re))
}

/// `(p0, p1)`: probability that the decision wire is empty on the past of the termination point, and its complement.
///
/// For subnormalized systems `p1` is the weight left after removing `p0`.
pub fn evaluate(d: &Distinguisher, system: &CausalBox) -> Result<(f64, f64)> {
    let net = d.closed(system)?;
    let poset = d.core.poset();
    let (p0, total) = decision_weights(&net, poset, &poset.past(d.termination))?;
    Ok((p0, total - p0))
}

/// `|p0(a) - p0(b)|`.
pub fn advantage(d: &Distinguisher, a: &CausalBox, b: &CausalBox) -> Result<f64> {
    if !a.inputs().wires().iter().zip(b.inputs().wires()).all(|(x, y)| x == y)
        || !a.outputs().wires().iter().zip(b.outputs().wires()).all(|(x, y)| x == y)
        || a.inputs().dims() != b.inputs().dims()
        || a.outputs().dims() != b.outputs().dims()
    {
        return Err(Error::ShapeMismatch("systems differ in shape".into()));
    }
    Ok((evaluate(d, a)?.0 - evaluate(d, b)?.0).abs())
}

/// The probability of outcome 0 as the trace of the network with its decision projected onto vacuum.
pub fn success_trace(d: &Distinguisher, system: &CausalBox) -> Result<f64> {
    let net = d.closed(system)?;
    let poset = d.core.poset();
    let r = net.trace_out_positions(&past_complement(poset, &poset.past(d.termination)))?;
    Ok(scalar_weight(&r.project_vacuum(&d.output_wire)?))
}

/// [`advantage`] computed from [`success_trace`].
pub fn advantage_by_trace(d: &Distinguisher, a: &CausalBox, b: &CausalBox) -> Result<f64> {
    Ok((success_trace(d, a)? - success_trace(d, b)?).abs())
}

/// Decision weights `(p0, p1)` on each cut of an ascending sequence, ignoring the termination point.
pub fn evaluate_limit(d: &Distinguisher, cuts: &[Cut], system: &CausalBox) -> Result<Vec<(f64, f64)>> {
    for (i, w) in cuts.windows(2).enumerate() {
        if !w[0].is_subset(&w[1]) {
            return Err(Error::NotAscending(i + 1));
        }
    }
    let net = d.closed(system)?;
    cuts.iter().map(|cut| decision_weights(&net, d.core.poset(), cut).map(|(p0, t)| (p0, t - p0))).collect()
}

/// Projector onto the positive part of a Hermitian matrix: the optimal test between two states.
pub fn helstrom_projector(diff: &CMat) -> CMat {
    let (vals, vecs) = eigh(diff);
    let mut p = CMat::zeros(diff.nrows(), diff.ncols());
    for (i, &v) in vals.iter().enumerate() {
        if v > 0.0 {
            p += projector(&vecs.column(i).into_owned());
        }
    }
    p
}

/// Distinguisher that feeds `state` to the system and measures its outputs on `cut` with `test`.
///
/// The decision wire `dec` lives at `termination`, which must lie strictly above every point of `cut`.
/// Core wires are named `m:<system output>` and `p:<system input>`.
pub fn prepare_and_measure(system: &CausalBox, cut: &Cut, state: &CVec, test: &CMat, termination: usize) -> Result<Distinguisher> {
    let poset = system.poset().clone();
    if cut.members().any(|t| !poset.strict_past(termination).contains(t)) {
        return Err(Error::Config("decision must come after the measured cut".into()));
    }
    let sin = system.inputs();
    let sout = system.outputs();
    if state.len() != sin.dim() {
        return Err(Error::DimensionMismatch { expected: sin.dim(), found: state.len() });
    }
    let rename = |s: &Space, pre: &str| -> Vec<WireSpec> { s.wires().iter().map(|w| w.renamed(&format!("{pre}{}", w.name))).collect() };
    let core_in = Space::new(rename(sout, "m:"))?;
    let mut ow = rename(sin, "p:");
    ow.push(WireSpec::from_indices(&poset, "dec", 1, [termination], 1)?);
    let core_out = Space::new(ow)?;
    let split = core_in.split(cut.bits())?;
    let dk = split.kept.dim();
    if test.nrows() != dk {
        return Err(Error::DimensionMismatch { expected: dk, found: test.nrows() });
    }
    let mut kraus = Vec::new();
    for (outcome, effect) in [(0usize, CMat::identity(dk, dk) - test), (1, test.clone())] {
        let (vals, vecs) = eigh(&effect);
        for (j, &v) in vals.iter().enumerate() {
            if v < 1e-12 {
                continue;
            }
            let phi = vecs.column(j) * c(v.sqrt(), 0.0);
            for e in 0..split.rest.dim() {
                let mut k = CMat::zeros(core_out.dim(), core_in.dim());
                for x in 0..core_in.dim() {
                    let (kk, ee) = split.forward[x];
                    if ee != e {
                        continue;
                    }
                    for s in 0..sin.dim() {
                        k[(s * 2 + outcome, x)] += state[s] * phi[kk].conj();
                    }
                }
                kraus.push(k);
            }
        }
    }
    let top = Channel::from_kraus(kraus, core_in, core_out)?;
    let core = CausalBox::with_strict_past(poset, top)?;
    let mut pairs: Vec<(String, String)> = sout.wires().iter().map(|w| (w.name.clone(), format!("m:{}", w.name))).collect();
    pairs.extend(sin.wires().iter().map(|w| (format!("p:{}", w.name), w.name.clone())));
    Distinguisher::new(core, PortPairing { pairs }, termination, "dec")
}

/// One prepare-and-measure strategy: a product input state and the cut whose outputs are measured.
#[derive(Debug, Clone)]
pub struct Member {
    pub cut: Cut,
    pub state: CVec,
    /// Per input wire, the grid label of its state.
    pub label: Vec<String>,
}

/// A fixed finite family of prepare-and-measure strategies.
#[derive(Debug, Clone)]
pub struct Family {
    pub poset: Arc<Poset>,
    pub members: Vec<Member>,
}

/// Pure states of one wire: basis states and equal superpositions of two basis states with `grid` phases.
fn wire_grid(dim: usize, grid: usize) -> Vec<(String, CVec)> {
    let mut out = Vec::new();
    for i in 0..dim {
        let mut v = CVec::zeros(dim);
        v[i] = ONE;
        out.push((format!("{i}"), v));
    }
    let h = 0.5f64.sqrt();
    for i in 0..dim {
        for j in i + 1..dim {
            for k in 0..grid {
                let th = 2.0 * PI * k as f64 / grid as f64;
                let mut v = CVec::zeros(dim);
                v[i] = c(h, 0.0);
                v[j] = c(h * th.cos(), h * th.sin());
                out.push((format!("{i}+{j}@{k}/{grid}"), v));
            }
        }
    }
    out
}

impl Family {
    /// Every nonempty cut paired with every product of per-wire grid states.
    pub fn product_states(poset: Arc<Poset>, inputs: &Space, grid: usize) -> Result<Family> {
        let per_wire: Vec<Vec<(String, CVec)>> = inputs.dims().iter().map(|&d| wire_grid(d, grid)).collect();
        let mut states: Vec<(Vec<String>, CVec)> = vec![(Vec::new(), CVec::from_element(1, ONE))];
        for options in &per_wire {
            let mut next = Vec::with_capacity(states.len() * options.len());
            for (lab, v) in &states {
                for (l, w) in options {
                    let mut lab2 = lab.clone();
                    lab2.push(l.clone());
                    next.push((lab2, v.kronecker(w)));
                }
            }
            states = next;
        }
        let cuts: Vec<Cut> = poset.enumerate_cuts()?.into_iter().filter(|c| !c.is_empty()).collect();
        let mut members = Vec::with_capacity(cuts.len() * states.len());
        for cut in &cuts {
            for (label, state) in &states {
                members.push(Member { cut: cut.clone(), state: state.clone(), label: label.clone() });
            }
        }
        Ok(Family { poset, members })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// The first `budget` members of a seeded permutation.
    pub fn sample(&self, budget: usize, seed: u64) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.members.len()).collect();
        idx.shuffle(&mut seeded(seed));
        idx.truncate(budget);
        idx
    }

    /// Output state of `system` on the member's cut.
    pub fn response(&self, m: &Member, system: &CausalBox) -> Result<CMat> {
        let r = system.top().trace_out_positions(&past_complement(&self.poset, &m.cut))?;
        r.apply(&projector(&m.state))
    }

    /// Optimal advantage of the member on the pair: half the trace distance of the responses.
    ///
    /// Both orders are averaged so the value is bitwise symmetric in `a` and `b`.
    pub fn value(&self, m: &Member, a: &CausalBox, b: &CausalBox) -> Result<f64> {
        let (ra, rb) = (self.response(m, a)?, self.response(m, b)?);
        Ok(0.5 * (helstrom(&ra, &rb) + helstrom(&rb, &ra)))
    }
}

/// Best member found by a search.
#[derive(Debug, Clone)]
pub struct SearchReport {
    pub best: f64,
    pub witness: Option<usize>,
    pub evaluated: usize,
    pub seed: u64,
}

/// Maximum advantage over the first `budget` members of a seeded permutation of `family`.
pub fn distance_lower_bound(a: &CausalBox, b: &CausalBox, family: &Family, budget: usize, seed: u64) -> Result<SearchReport> {
    if a.inputs().dims() != b.inputs().dims() || a.outputs().dims() != b.outputs().dims() {
        return Err(Error::ShapeMismatch("systems differ in shape".into()));
    }
    let mut best = 0.0;
    let mut witness = None;
    let picks = family.sample(budget, seed);
    for &i in &picks {
        let v = family.value(&family.members[i], a, b)?;
        if v > best {
            best = v;
            witness = Some(i);
        }
    }
    Ok(SearchReport { best, witness, evaluated: picks.len(), seed })
}

/// The explicit distinguisher realizing a family member on the pair `(a, b)`, if a decision point exists after its cut.
pub fn witness_distinguisher(family: &Family, m: &Member, a: &CausalBox, b: &CausalBox) -> Result<Option<Distinguisher>> {
    let poset = &family.poset;
    let Some(t) = (0..poset.len()).find(|&t| m.cut.members().all(|s| poset.strict_past(t).contains(s))) else {
        return Ok(None);
    };
    let diff = family.response(m, a)? - family.response(m, b)?;
    Ok(Some(prepare_and_measure(a, &m.cut, &m.state, &helstrom_projector(&diff), t)?))
}

/// A distinguisher core that emits one message at `termination` whatever it receives.
pub fn constant_distinguisher(system: &CausalBox, termination: usize, emit: bool) -> Result<Distinguisher> {
    let poset = system.poset().clone();
    let rename = |s: &Space, pre: &str| -> Vec<WireSpec> { s.wires().iter().map(|w| w.renamed(&format!("{pre}{}", w.name))).collect() };
    let core_in = Space::new(rename(system.outputs(), "m:"))?;
    let mut ow = rename(system.inputs(), "p:");
    ow.push(WireSpec::from_indices(&poset, "dec", 1, [termination], 1)?);
    let core_out = Space::new(ow)?;
    let mut kraus = Vec::with_capacity(core_in.dim());
    for x in 0..core_in.dim() {
        let mut k = CMat::zeros(core_out.dim(), core_in.dim());
        k[(usize::from(emit), x)] = ONE;
        kraus.push(k);
    }
    let top = Channel::from_kraus(kraus, core_in, core_out)?;
    let core = CausalBox::with_strict_past(poset, top)?;
    let mut pairs: Vec<(String, String)> = system.outputs().wires().iter().map(|w| (w.name.clone(), format!("m:{}", w.name))).collect();
    pairs.extend(system.inputs().wires().iter().map(|w| (format!("p:{}", w.name), w.name.clone())));
    Distinguisher::new(core, PortPairing { pairs }, termination, "dec")
}

/// Validated closed network of a distinguisher and a normalized system.
pub fn closed_network(d: &Distinguisher, system: &CausalBox) -> Result<CausalBox> {
    connect(&d.core, system, &d.pairing)
}
