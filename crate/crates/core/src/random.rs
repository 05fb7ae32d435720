//! Seeded generators of posets, causality functions, channels and causal boxes.

use std::sync::Arc;

use fixedbitset::FixedBitSet;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::causalbox::CausalBox;
use crate::channel::Channel;
use crate::comb::{chain_order, comb_channel};
use crate::error::{Error, Result};
use crate::fock::{Space, WireSpec};
use crate::linalg::{c, random_isometry, CMat};
use crate::network::PortPairing;
use crate::poset::{CausalityFn, Poset};

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random poset on `n` points labelled `p1..pn`; each pair `i < j` is ordered with probability `edge_prob`.
pub fn random_poset<R: Rng + ?Sized>(n: usize, edge_prob: f64, rng: &mut R) -> Poset {
    let labels: Vec<String> = (1..=n).map(|i| format!("p{i}")).collect();
    let mut covers = Vec::new();
    for j in 0..n {
        for i in 0..j {
            if rng.random_bool(edge_prob) {
                covers.push((labels[i].clone(), labels[j].clone()));
            }
        }
    }
    Poset::new(&labels, &covers).expect("edges go forward")
}

/// Random causality function: each point maps to the down-closure of a random subset of its strict past.
pub fn random_causality<R: Rng + ?Sized>(poset: &Poset, rng: &mut R) -> CausalityFn {
    let images: Vec<FixedBitSet> = (0..poset.len())
        .map(|t| {
            let past: Vec<usize> = poset.strict_past(t).members().collect();
            let pick: Vec<usize> = past.into_iter().filter(|_| rng.random_bool(0.5)).collect();
            poset.down_closure_of(pick).bits().clone()
        })
        .collect();
    poset.causality_fn_from_bits(images).expect("generated images are valid")
}

/// Random channel of the given Kraus rank from a Haar isometry.
pub fn random_channel<R: Rng + ?Sized>(inputs: Space, outputs: Space, rank: usize, rng: &mut R) -> Result<Channel> {
    let (din, dout) = (inputs.dim(), outputs.dim());
    let rank = rank.max(din.div_ceil(dout.max(1))).max(1);
    let v = random_isometry(dout * rank, din, rng);
    let kraus = (0..rank).map(|k| CMat::from_fn(dout, din, |o, i| v[(o * rank + k, i)])).collect();
    Channel::from_kraus(kraus, inputs, outputs)
}

/// A wire with message dimension 1 or 2, truncation 1, on one or two random chain positions.
pub fn random_wire<R: Rng + ?Sized>(poset: &Poset, name: &str, rng: &mut R) -> Result<WireSpec> {
    let order = chain_order(poset)?;
    let d = rng.random_range(1..=2);
    let k = rng.random_range(1..=order.len().min(2));
    let positions: Vec<usize> = order.choose_multiple(rng, k).copied().collect();
    WireSpec::from_indices(poset, name, d, positions, 1)
}

pub fn random_space<R: Rng + ?Sized>(poset: &Poset, prefix: &str, count: usize, rng: &mut R) -> Result<Space> {
    let wires = (0..count).map(|i| random_wire(poset, &format!("{prefix}{i}"), rng)).collect::<Result<_>>()?;
    Space::new(wires)
}

/// Mixed-radix index of per-wire emitted photon counts.
fn count_index(counts: &[usize], caps: &[usize]) -> usize {
    counts.iter().zip(caps).fold(0, |acc, (&n, &cap)| acc * (cap + 1) + n)
}

fn count_digits(mut idx: usize, caps: &[usize]) -> Vec<usize> {
    let mut out = vec![0; caps.len()];
    for w in (0..caps.len()).rev() {
        out[w] = idx % (caps[w] + 1);
        idx /= caps[w] + 1;
    }
    out
}

/// Random comb on a chain with strict-past causality.
///
/// Every step is a Haar isometry, block diagonal in the register of photons emitted so far,
/// so no branch exceeds an output truncation. The quantum memory keeps the full input history.
pub fn random_comb_box<R: Rng + ?Sized>(poset: Arc<Poset>, inputs: Space, outputs: Space, rng: &mut R) -> Result<CausalBox> {
    let ch = random_comb_channel(&poset, &inputs, &outputs, rng)?;
    CausalBox::with_strict_past(poset, ch)
}

pub fn random_comb_channel<R: Rng + ?Sized>(poset: &Poset, inputs: &Space, outputs: &Space, rng: &mut R) -> Result<Channel> {
    let order = chain_order(poset)?;
    let l = order.len();
    let xs = inputs.slicing(&order)?;
    let ys = outputs.slicing(&order)?;
    let caps: Vec<usize> = outputs.wires().iter().map(|w| w.truncation).collect();
    let ne: usize = caps.iter().map(|c| c + 1).product();
    let dx = |s: usize| if s == 0 { 1 } else { xs.slices[s - 1].dim() };
    let dy = |s: usize| if s == l { 1 } else { ys.slices[s].dim() };
    let mut q = vec![1usize; l + 2];
    for s in 0..=l {
        q[s + 1] = q[s] * dx(s);
    }
    // Nothing has been emitted before the first step.
    let ne_at = |s: usize| if s == 0 { 1 } else { ne };
    let mem: Vec<usize> = q.iter().enumerate().map(|(s, &qs)| qs * ne_at(s)).collect();
    let mut steps = Vec::with_capacity(l + 1);
    for s in 0..=l {
        let mut st = CMat::zeros(dy(s) * mem[s + 1], mem[s] * dx(s));
        for e in 0..ne_at(s) {
            let counts = count_digits(e, &caps);
            let allowed: Vec<(usize, usize)> = (0..dy(s))
                .filter_map(|y| {
                    let emitted = if s == l { vec![0; caps.len()] } else { ys.slices[s].photons(y) };
                    let next: Vec<usize> = counts.iter().zip(&emitted).map(|(a, b)| a + b).collect();
                    next.iter().zip(&caps).all(|(n, cap)| n <= cap).then(|| (y, count_index(&next, &caps)))
                })
                .collect();
            let ncols = q[s] * dx(s);
            let v = random_isometry(allowed.len() * q[s + 1], ncols, rng);
            for qi in 0..q[s] {
                for x in 0..dx(s) {
                    let col = (qi * ne_at(s) + e) * dx(s) + x;
                    let vcol = qi * dx(s) + x;
                    for (a, &(y, e2)) in allowed.iter().enumerate() {
                        for q2 in 0..q[s + 1] {
                            st[(y * mem[s + 1] + q2 * ne + e2, col)] = v[(a * q[s + 1] + q2, vcol)];
                        }
                    }
                }
            }
        }
        steps.push(st);
    }
    comb_channel(poset, inputs, outputs, &steps, &mem)
}

/// Draws input and output spaces until `din * dout <= budget`.
fn random_shape<R: Rng + ?Sized>(
    poset: &Poset,
    ins: (&str, usize),
    outs: (&str, usize),
    budget: usize,
    rng: &mut R,
) -> Result<(Space, Space)> {
    for _ in 0..1000 {
        let i = random_space(poset, ins.0, ins.1, rng)?;
        let o = random_space(poset, outs.0, outs.1, rng)?;
        if i.dim() * o.dim() <= budget {
            return Ok((i, o));
        }
    }
    Err(Error::Config("no shape within budget".into()))
}

fn random_chain<R: Rng + ?Sized>(rng: &mut R, lo: usize, hi: usize) -> Arc<Poset> {
    Arc::new(Poset::chain(rng.random_range(lo..=hi)))
}

/// A random comb on a chain of length 2 to 4 with one or two wires on each side and `din * dout <= 36`.
pub fn random_box<R: Rng + ?Sized>(rng: &mut R) -> Result<CausalBox> {
    let p = random_chain(rng, 2, 4);
    let ni = rng.random_range(1..=2);
    let no = rng.random_range(1..=2);
    let (i, o) = random_shape(&p, ("x", ni), ("y", no), 36, rng)?;
    random_comb_box(p, i, o, rng)
}

/// A box with `ports` output wires `c0..` shape-matched to input wires `b0..`, plus one free wire each way.
pub fn random_loop_box<R: Rng + ?Sized>(ports: usize, budget: usize, rng: &mut R) -> Result<(CausalBox, Vec<(String, String)>)> {
    let p = random_chain(rng, 2, 3);
    for _ in 0..1000 {
        let shared = random_space(&p, "c", ports, rng)?;
        let free_in = random_wire(&p, "a", rng)?;
        let free_out = random_wire(&p, "d", rng)?;
        let mut iw: Vec<WireSpec> = shared.wires().iter().enumerate().map(|(k, w)| w.renamed(&format!("b{k}"))).collect();
        iw.push(free_in);
        let mut ow = shared.wires().to_vec();
        ow.push(free_out);
        let (i, o) = (Space::new(iw)?, Space::new(ow)?);
        if i.dim() * o.dim() <= budget {
            let pairs = (0..ports).map(|k| (format!("c{k}"), format!("b{k}"))).collect();
            return Ok((random_comb_box(p, i, o, rng)?, pairs));
        }
    }
    Err(Error::Config("no shape within budget".into()))
}

/// Two boxes on one chain and a random nonempty pairing between them.
pub struct RandomPair {
    pub a: CausalBox,
    pub b: CausalBox,
    pub pairing: PortPairing,
}

pub fn random_pair<R: Rng + ?Sized>(rng: &mut R) -> Result<RandomPair> {
    let p = random_chain(rng, 2, 4);
    for _ in 0..1000 {
        let (ai, ao) = random_shape(&p, ("ax", rng.random_range(1..=2)), ("ay", rng.random_range(1..=2)), 36, rng)?;
        let mut bi = Vec::new();
        let mut bo = Vec::new();
        let mut pairs = Vec::new();
        for w in ao.wires() {
            if rng.random_bool(0.7) {
                let n = format!("bx{}", bi.len());
                pairs.push((w.name.clone(), n.clone()));
                bi.push(w.renamed(&n));
            }
        }
        for w in ai.wires() {
            if rng.random_bool(0.4) {
                let n = format!("by{}", bo.len());
                pairs.push((n.clone(), w.name.clone()));
                bo.push(w.renamed(&n));
            }
        }
        if pairs.is_empty() {
            continue;
        }
        if bo.is_empty() || rng.random_bool(0.5) {
            bo.push(random_wire(&p, &format!("by{}", bo.len()), rng)?);
        }
        if rng.random_bool(0.5) {
            bi.push(random_wire(&p, &format!("bx{}", bi.len()), rng)?);
        }
        let (bi, bo) = (Space::new(bi)?, Space::new(bo)?);
        if bi.dim() * bo.dim() > 36 {
            continue;
        }
        pairs.shuffle(rng);
        let a = random_comb_box(p.clone(), ai, ao, rng)?;
        let b = random_comb_box(p, bi, bo, rng)?;
        return Ok(RandomPair { a, b, pairing: PortPairing { pairs } });
    }
    Err(Error::Config("no pair within budget".into()))
}

/// Three boxes in a pipeline `1 -> 2 -> 3`, with an optional feedback `3 -> 1` and bypass `1 -> 3`.
pub struct RandomTriple {
    pub boxes: [CausalBox; 3],
    pub p12: PortPairing,
    pub p23: PortPairing,
    pub p13: PortPairing,
}

pub fn random_triple<R: Rng + ?Sized>(rng: &mut R) -> Result<RandomTriple> {
    let p = random_chain(rng, 2, 3);
    for _ in 0..1000 {
        let x = random_wire(&p, "x", rng)?;
        let m12 = random_wire(&p, "m12", rng)?;
        let m23 = random_wire(&p, "m23", rng)?;
        let z = random_wire(&p, "z", rng)?;
        let feedback = rng.random_bool(0.5).then(|| random_wire(&p, "f31", rng)).transpose()?;
        let bypass = rng.random_bool(0.5).then(|| random_wire(&p, "m13", rng)).transpose()?;
        let mut in1 = vec![x];
        let mut out1 = vec![m12.clone()];
        let in2 = vec![m12.renamed("m12'")];
        let out2 = vec![m23.clone()];
        let mut in3 = vec![m23.renamed("m23'")];
        let mut out3 = vec![z];
        let mut p13 = Vec::new();
        if let Some(f) = &feedback {
            out3.push(f.clone());
            in1.push(f.renamed("f31'"));
            p13.push(("f31".to_string(), "f31'".to_string()));
        }
        if let Some(b) = &bypass {
            out1.push(b.clone());
            in3.push(b.renamed("m13'"));
            p13.push(("m13".to_string(), "m13'".to_string()));
        }
        let spaces = [(in1, out1), (in2, out2), (in3, out3)]
            .into_iter()
            .map(|(i, o)| Ok((Space::new(i)?, Space::new(o)?)))
            .collect::<Result<Vec<_>>>()?;
        if spaces.iter().any(|(i, o)| i.dim() * o.dim() > 36) {
            continue;
        }
        let mut boxes = Vec::with_capacity(3);
        for (i, o) in spaces {
            boxes.push(random_comb_box(p.clone(), i, o, rng)?);
        }
        let boxes: [CausalBox; 3] = boxes.try_into().expect("three boxes");
        return Ok(RandomTriple {
            boxes,
            p12: PortPairing::new(&[("m12", "m12'")]),
            p23: PortPairing::new(&[("m23", "m23'")]),
            p13: PortPairing { pairs: p13 },
        });
    }
    Err(Error::Config("no triple within budget".into()))
}

/// A classical box on the chain `1 < 2 < 3` with binary wires `A@1`, `B@2` in and `C@2`, `D@3` out.
pub struct ClassicalBox {
    pub boxed: CausalBox,
    /// `p_c[a][c] = P(c | a)`.
    pub p_c: [[f64; 2]; 2],
    /// `p_d[a][b][c][d] = P(d | a, b, c)`.
    pub p_d: [[[[f64; 2]; 2]; 2]; 2],
}

fn random_bit_distribution<R: Rng + ?Sized>(rng: &mut R) -> [f64; 2] {
    let p: f64 = rng.random();
    [p, 1.0 - p]
}

pub fn random_classical_box<R: Rng + ?Sized>(rng: &mut R) -> Result<ClassicalBox> {
    let p = Arc::new(Poset::chain(3));
    let wire = |n: &str, pos: usize| WireSpec::from_indices(&p, n, 1, [pos], 1);
    let inputs = Space::new(vec![wire("A", 0)?, wire("B", 1)?])?;
    let outputs = Space::new(vec![wire("C", 1)?, wire("D", 2)?])?;
    let mut p_c = [[0.0; 2]; 2];
    let mut p_d = [[[[0.0; 2]; 2]; 2]; 2];
    for (pc, pd) in p_c.iter_mut().zip(p_d.iter_mut()) {
        *pc = random_bit_distribution(rng);
        for slot in pd.iter_mut().flatten() {
            *slot = random_bit_distribution(rng);
        }
    }
    let mut kraus = Vec::new();
    for a in 0..2 {
        for b in 0..2 {
            for cc in 0..2 {
                for d in 0..2 {
                    let w = p_c[a][cc] * p_d[a][b][cc][d];
                    let mut k = CMat::zeros(4, 4);
                    k[(outputs.index(&[cc, d]), inputs.index(&[a, b]))] = c(w.sqrt(), 0.0);
                    kraus.push(k);
                }
            }
        }
    }
    let ch = Channel::from_kraus(kraus, inputs, outputs)?;
    Ok(ClassicalBox { boxed: CausalBox::with_strict_past(p, ch)?, p_c, p_d })
}

/// A trace-decreasing box: a random comb whose first input slice is damped by a diagonal contraction.
///
/// Outputs avoid the first chain position, so the failure branch of the canonical completion is causal.
pub fn random_subnormalized_box<R: Rng + ?Sized>(rng: &mut R) -> Result<CausalBox> {
    let p = random_chain(rng, 2, 3);
    let l = p.len();
    for _ in 0..1000 {
        let d = rng.random_range(1..=2);
        let mut pos = vec![0];
        if l > 2 && rng.random_bool(0.5) {
            pos.push(rng.random_range(1..l - 1));
        }
        let x = WireSpec::from_indices(&p, "x", d, pos, 1)?;
        let ncount = rng.random_range(1..=2);
        let mut outs = Vec::new();
        for k in 0..ncount {
            let dm = rng.random_range(1..=2);
            let pos = rng.random_range(1..l);
            outs.push(WireSpec::from_indices(&p, &format!("y{k}"), dm, [pos], 1)?);
        }
        let (i, o) = (Space::new(vec![x])?, Space::new(outs)?);
        if i.dim() * o.dim() > 36 {
            continue;
        }
        let base = random_comb_box(p.clone(), i.clone(), o.clone(), rng)?;
        let order = chain_order(&p)?;
        let xs = i.slicing(&order)?;
        let damp: Vec<f64> = (0..xs.slices[0].dim()).map(|_| rng.random_range(0.2..1.0)).collect();
        let kraus: Vec<CMat> = base
            .top()
            .kraus()
            .iter()
            .map(|k| {
                let mut k = k.clone();
                for col in 0..k.ncols() {
                    let s = damp[xs.digits[col][0]];
                    k.column_mut(col).scale_mut(s);
                }
                k
            })
            .collect();
        let top = Channel::from_kraus(kraus, i, o)?;
        let top = if rng.random_bool(0.3) { top.scaled(rng.random_range(0.3..1.0)) } else { top };
        let b = CausalBox::new(p.clone(), top, p.strict_past_causality(), false)?;
        return Ok(b);
    }
    Err(Error::Config("no subnormalized shape within budget".into()))
}
