//! Parallel composition, loops and port-wise composition of causal boxes.

use crate::causalbox::CausalBox;
use crate::channel::Channel;
use crate::error::{Error, Result};
use crate::fock::Space;
use crate::linalg::{from_row_major, permute_axes, row_major, CMat, ZERO};

/// Port pairs `(output wire, input wire)`, applied in order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PortPairing {
    pub pairs: Vec<(String, String)>,
}

impl PortPairing {
    pub fn new<S: AsRef<str>>(pairs: &[(S, S)]) -> PortPairing {
        PortPairing { pairs: pairs.iter().map(|(a, b)| (a.as_ref().to_string(), b.as_ref().to_string())).collect() }
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

fn check_same_poset(a: &CausalBox, b: &CausalBox) -> Result<()> {
    if a.poset().fingerprint() != b.poset().fingerprint() {
        return Err(Error::PosetMismatch);
    }
    Ok(())
}

/// Parallel composition: outputs and inputs of `a` followed by those of `b`.
pub fn parallel(a: &CausalBox, b: &CausalBox) -> Result<CausalBox> {
    connect(a, b, &PortPairing::default())
}

fn port_indices(space_out: &Space, space_in: &Space, out_port: &str, in_port: &str) -> Result<(usize, usize)> {
    let o = space_out.position_of(out_port).ok_or_else(|| Error::InvalidPairing(format!("no output wire `{out_port}`")))?;
    let i = space_in.position_of(in_port).ok_or_else(|| Error::InvalidPairing(format!("no input wire `{in_port}`")))?;
    if !space_out.wires()[o].same_shape(&space_in.wires()[i]) {
        return Err(Error::ShapeMismatch(format!("ports `{out_port}` and `{in_port}` differ in shape")));
    }
    Ok((o, i))
}

/// Strides of (prefix, wire, suffix) around wire `w` of a space.
fn strides(space: &Space, w: usize) -> (usize, usize, usize) {
    let d = space.dims();
    (d[..w].iter().product(), d[w], d[w + 1..].iter().product())
}

/// Kraus-wise loop, summing only over port basis states accepted by `keep`.
fn loop_kraus(ch: &Channel, out_port: &str, in_port: &str, keep: &dyn Fn(usize) -> bool) -> Result<Channel> {
    let (o, i) = port_indices(ch.outputs(), ch.inputs(), out_port, in_port)?;
    let outputs = ch.outputs().without(out_port)?;
    let inputs = ch.inputs().without(in_port)?;
    let (opre, dk, osuf) = strides(ch.outputs(), o);
    let (ipre, _, isuf) = strides(ch.inputs(), i);
    let ks: Vec<usize> = (0..dk).filter(|&k| keep(k)).collect();
    let out_idx: Vec<Vec<usize>> = (0..outputs.dim())
        .map(|d| {
            let (p, s) = (d / osuf, d % osuf);
            ks.iter().map(|&k| (p * dk + k) * osuf + s).collect()
        })
        .collect();
    let in_idx: Vec<Vec<usize>> = (0..inputs.dim())
        .map(|a| {
            let (p, s) = (a / isuf, a % isuf);
            ks.iter().map(|&k| (p * dk + k) * isuf + s).collect()
        })
        .collect();
    debug_assert_eq!(opre * osuf, outputs.dim());
    debug_assert_eq!(ipre * isuf, inputs.dim());
    let kraus = ch
        .kraus()
        .iter()
        .map(|m| {
            CMat::from_fn(outputs.dim(), inputs.dim(), |d, a| out_idx[d].iter().zip(&in_idx[a]).fold(ZERO, |acc, (&y, &x)| acc + m[(y, x)]))
        })
        .collect();
    Channel::from_kraus(kraus, inputs, outputs)
}

/// Connects output wire `out_port` back to input wire `in_port` of the same box.
pub fn loop_box(b: &CausalBox, out_port: &str, in_port: &str) -> Result<CausalBox> {
    let top = loop_kraus(b.top(), out_port, in_port, &|_| true)?;
    CausalBox::new(b.poset().clone(), top, b.chi().clone(), b.is_normalized())
}

/// The loop channel without validation.
pub fn loop_channel(ch: &Channel, out_port: &str, in_port: &str) -> Result<Channel> {
    loop_kraus(ch, out_port, in_port, &|_| true)
}

/// Loops only the port positions outside `chi^n(T)`; the rest of the port is fed vacuum and
/// projected onto vacuum. `n` equal to the number of sequence stages gives the full loop.
pub fn loop_partial(b: &CausalBox, out_port: &str, in_port: &str, n: usize) -> Result<Channel> {
    let cut = b.chi().iterate(&b.poset().full_cut(), n)?;
    let (o, _) = port_indices(b.outputs(), b.inputs(), out_port, in_port)?;
    let basis = b.outputs().bases()[o].clone();
    let blocked: Vec<usize> = (0..basis.modes().len()).filter(|&m| cut.contains(basis.modes()[m].0)).collect();
    let keep = move |k: usize| blocked.iter().all(|&m| basis.state(k)[m] == 0);
    loop_kraus(b.top(), out_port, in_port, &keep)
}

/// Number of stages of the sequence along `T, chi(T), ...`.
pub fn stage_count(b: &CausalBox) -> Result<usize> {
    Ok(b.chi().descending_chain(&b.poset().full_cut())?.len() - 1)
}

/// Loop computed as a partial trace of the natural representation.
pub fn loop_natural(ch: &Channel, out_port: &str, in_port: &str) -> Result<Channel> {
    let (o, i) = port_indices(ch.outputs(), ch.inputs(), out_port, in_port)?;
    let outputs = ch.outputs().without(out_port)?;
    let inputs = ch.inputs().without(in_port)?;
    let (_, dk, osuf) = strides(ch.outputs(), o);
    let (_, _, isuf) = strides(ch.inputs(), i);
    let (dout, din) = (ch.dout(), ch.din());
    let (dd, da) = (outputs.dim(), inputs.dim());
    let nat = ch.natural();
    let full_out = |d: usize, k: usize| ((d / osuf) * dk + k) * osuf + d % osuf;
    let full_in = |a: usize, k: usize| ((a / isuf) * dk + k) * isuf + a % isuf;
    let mut out = CMat::zeros(dd * dd, da * da);
    for d in 0..dd {
        for d2 in 0..dd {
            for a in 0..da {
                for a2 in 0..da {
                    let mut acc = ZERO;
                    for k in 0..dk {
                        for l in 0..dk {
                            let row = full_out(d, k) * dout + full_out(d2, l);
                            let col = full_in(a, k) * din + full_in(a2, l);
                            acc += nat[(row, col)];
                        }
                    }
                    out[(d * dd + d2, a * da + a2)] = acc;
                }
            }
        }
    }
    Channel::from_natural(&out, inputs, outputs)
}

/// Loop where the port is summed in the basis given by the columns of `u`.
pub fn loop_in_basis(ch: &Channel, out_port: &str, in_port: &str, u: &CMat) -> Result<Channel> {
    let (o, i) = port_indices(ch.outputs(), ch.inputs(), out_port, in_port)?;
    let outputs = ch.outputs().without(out_port)?;
    let inputs = ch.inputs().without(in_port)?;
    let (_, dk, osuf) = strides(ch.outputs(), o);
    let (_, _, isuf) = strides(ch.inputs(), i);
    if u.nrows() != dk || u.ncols() != dk {
        return Err(Error::DimensionMismatch { expected: dk, found: u.nrows() });
    }
    let full_out = |d: usize, k: usize| ((d / osuf) * dk + k) * osuf + d % osuf;
    let full_in = |a: usize, k: usize| ((a / isuf) * dk + k) * isuf + a % isuf;
    let kraus = ch
        .kraus()
        .iter()
        .map(|m| {
            CMat::from_fn(outputs.dim(), inputs.dim(), |d, a| {
                let mut acc = ZERO;
                for b in 0..dk {
                    for p in 0..dk {
                        for q in 0..dk {
                            acc += u[(p, b)].conj() * m[(full_out(d, p), full_in(a, q))] * u[(q, b)];
                        }
                    }
                }
                acc
            })
        })
        .collect();
    Channel::from_kraus(kraus, inputs, outputs)
}

/// Which box a pairing wire belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    A,
    B,
}

/// Composition `a ⋈_p b`: parallel composition followed by one loop per pair.
pub fn connect(a: &CausalBox, b: &CausalBox, p: &PortPairing) -> Result<CausalBox> {
    check_same_poset(a, b)?;
    let top = connect_channels(a.top(), b.top(), p)?;
    let chi = a.chi().union(b.chi(), a.poset())?;
    let normalized = a.is_normalized() && b.is_normalized();
    CausalBox::new(a.poset().clone(), top, chi, normalized)
}

/// The channel of [`connect`] without validation.
pub fn connect_channels(a: &Channel, b: &Channel, p: &PortPairing) -> Result<Channel> {
    for w in a.outputs().wires() {
        if b.outputs().position_of(&w.name).is_some() {
            return Err(Error::NameCollision(w.name.clone()));
        }
    }
    for w in a.inputs().wires() {
        if b.inputs().position_of(&w.name).is_some() {
            return Err(Error::NameCollision(w.name.clone()));
        }
    }
    let side_out = |n: &str| {
        if a.outputs().position_of(n).is_some() {
            Some(Side::A)
        } else if b.outputs().position_of(n).is_some() {
            Some(Side::B)
        } else {
            None
        }
    };
    let side_in = |n: &str| {
        if a.inputs().position_of(n).is_some() {
            Some(Side::A)
        } else if b.inputs().position_of(n).is_some() {
            Some(Side::B)
        } else {
            None
        }
    };
    let mut used_out = Vec::new();
    let mut used_in = Vec::new();
    let mut self_a = Vec::new();
    let mut self_b = Vec::new();
    let mut cross = Vec::new();
    for (o, i) in &p.pairs {
        if used_out.contains(o) || used_in.contains(i) {
            return Err(Error::InvalidPairing(format!("wire used twice in pair ({o}, {i})")));
        }
        used_out.push(o.clone());
        used_in.push(i.clone());
        let so = side_out(o).ok_or_else(|| Error::InvalidPairing(format!("no output wire `{o}`")))?;
        let si = side_in(i).ok_or_else(|| Error::InvalidPairing(format!("no input wire `{i}`")))?;
        match (so, si) {
            (Side::A, Side::A) => self_a.push((o.clone(), i.clone())),
            (Side::B, Side::B) => self_b.push((o.clone(), i.clone())),
            _ => cross.push((so, o.clone(), i.clone())),
        }
    }
    let mut a = a.clone();
    for (o, i) in &self_a {
        a = loop_channel(&a, o, i)?;
    }
    let mut b = b.clone();
    for (o, i) in &self_b {
        b = loop_channel(&b, o, i)?;
    }
    contract(&a, &b, &cross)
}

/// Fused parallel composition and cross loops.
fn contract(a: &Channel, b: &Channel, cross: &[(Side, String, String)]) -> Result<Channel> {
    // Contracted wire positions, in pair order.
    let mut a_out_c = Vec::new();
    let mut a_in_c = Vec::new();
    let mut b_in_c = Vec::new();
    let mut b_out_c = Vec::new();
    // Each pair contributes one contracted index; record for each its (a axis, b axis).
    let mut a_axes_c = Vec::new();
    let mut b_axes_c = Vec::new();
    let na_out = a.outputs().wires().len();
    let nb_out = b.outputs().wires().len();
    for (side, o, i) in cross {
        match side {
            Side::A => {
                let (oi, ii) = port_indices(a.outputs(), b.inputs(), o, i)?;
                a_out_c.push(oi);
                b_in_c.push(ii);
                a_axes_c.push(oi);
                b_axes_c.push(nb_out + ii);
            }
            Side::B => {
                let (oi, ii) = port_indices(b.outputs(), a.inputs(), o, i)?;
                b_out_c.push(oi);
                a_in_c.push(ii);
                a_axes_c.push(na_out + ii);
                b_axes_c.push(oi);
            }
        }
    }
    let a_free_out: Vec<usize> = (0..na_out).filter(|w| !a_out_c.contains(w)).collect();
    let a_free_in: Vec<usize> = (0..a.inputs().wires().len()).filter(|w| !a_in_c.contains(w)).collect();
    let b_free_out: Vec<usize> = (0..nb_out).filter(|w| !b_out_c.contains(w)).collect();
    let b_free_in: Vec<usize> = (0..b.inputs().wires().len()).filter(|w| !b_in_c.contains(w)).collect();
    let pick = |s: &Space, ws: &[usize]| Space::new(ws.iter().map(|&w| s.wires()[w].clone()).collect());
    let mut out_wires = pick(a.outputs(), &a_free_out)?.wires().to_vec();
    out_wires.extend(pick(b.outputs(), &b_free_out)?.wires().iter().cloned());
    let mut in_wires = pick(a.inputs(), &a_free_in)?.wires().to_vec();
    in_wires.extend(pick(b.inputs(), &b_free_in)?.wires().iter().cloned());
    let outputs = Space::new(out_wires)?;
    let inputs = Space::new(in_wires)?;

    let a_dims: Vec<usize> = a.outputs().dims().iter().chain(a.inputs().dims()).copied().collect();
    let b_dims: Vec<usize> = b.outputs().dims().iter().chain(b.inputs().dims()).copied().collect();
    let mut a_perm: Vec<usize> = a_free_out.clone();
    a_perm.extend(a_free_in.iter().map(|&w| na_out + w));
    a_perm.extend(&a_axes_c);
    let mut b_perm: Vec<usize> = b_axes_c.clone();
    b_perm.extend(&b_free_out);
    b_perm.extend(b_free_in.iter().map(|&w| nb_out + w));
    let cdim: usize = a_axes_c.iter().map(|&x| a_dims[x]).product();
    let fa_out: usize = a_free_out.iter().map(|&w| a_dims[w]).product();
    let fa_in: usize = a_free_in.iter().map(|&w| a_dims[na_out + w]).product();
    let fb_out: usize = b_free_out.iter().map(|&w| b_dims[w]).product();
    let fb_in: usize = b_free_in.iter().map(|&w| b_dims[nb_out + w]).product();
    let a_mats: Vec<CMat> =
        a.kraus().iter().map(|k| from_row_major(fa_out * fa_in, cdim, &permute_axes(&row_major(k), &a_dims, &a_perm))).collect();
    let b_mats: Vec<CMat> =
        b.kraus().iter().map(|k| from_row_major(cdim, fb_out * fb_in, &permute_axes(&row_major(k), &b_dims, &b_perm))).collect();
    let dims4 = [fa_out, fa_in, fb_out, fb_in];
    let mut kraus = Vec::with_capacity(a_mats.len() * b_mats.len());
    for am in &a_mats {
        for bm in &b_mats {
            let prod = am * bm;
            let data = permute_axes(&row_major(&prod), &dims4, &[0, 2, 1, 3]);
            kraus.push(from_row_major(fa_out * fb_out, fa_in * fb_in, &data));
        }
    }
    Channel::from_kraus(kraus, inputs, outputs)
}
