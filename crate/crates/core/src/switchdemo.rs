//! The quantum switch on the chain `1 < ... < 6`: boxes `QS`, `U`, `V`, their composition and
//! a step-by-step simulation that keeps every internal register.
//!
//! Wires: `A`, `B` at 1; `C`, `E` at {2, 4}; `D`, `F` at {3, 5}; `G`, `H` at 6; qubit messages, at most one each.
//!
//! Register conventions of the simulation:
//! - `U` and `V` hold a photon counter.
//! - `QS` holds the control slice index `a` after position 2, `a * J + j` after position 4 (with `j` the
//!   slice of whichever of `D`, `F` it discarded and `J` the slice dimension), and the two discarded slices
//!   after position 6. On the switch's own trajectory the discarded slices are vacuum (index 0).

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, OnceLock};

use crate::causalbox::CausalBox;
use crate::comb::comb_channel;
use crate::error::{Error, Result};
use crate::fock::{second_quantize, FockBasis, Slicing, Space, WireSpec};
use crate::linalg::{isometry_defect, max_abs_diff, CMat, CVec, C64, ONE, ZERO};
use crate::network::{connect, PortPairing};
use crate::poset::Poset;

/// Inputs of the switch: two qubit gates, the control amplitudes and the target state.
#[derive(Debug, Clone)]
pub struct SwitchConfig {
    pub u: CMat,
    pub v: CMat,
    pub alpha: C64,
    pub beta: C64,
    pub phi: CVec,
}

impl SwitchConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, m) in [("u", &self.u), ("v", &self.v)] {
            if m.shape() != (2, 2) {
                return Err(Error::ShapeMismatch(format!("{name} must be 2x2")));
            }
            let d = isometry_defect(m);
            if d > 1e-9 {
                return Err(Error::Config(format!("{name} is not unitary (defect {d:e})")));
            }
        }
        if self.phi.len() != 2 || (self.phi.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::Config("phi must be a normalized qubit state".into()));
        }
        let n = self.alpha.norm_sqr() + self.beta.norm_sqr();
        if (n - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("|alpha|^2 + |beta|^2 = {n}")));
        }
        Ok(())
    }
}

/// A box on a chain given by its step maps (see [`comb_channel`]).
#[derive(Debug, Clone)]
pub struct CombSpec {
    pub name: String,
    pub inputs: Space,
    pub outputs: Space,
    pub steps: Vec<CMat>,
    pub mem: Vec<usize>,
}

impl CombSpec {
    pub fn to_box(&self, poset: Arc<Poset>) -> Result<CausalBox> {
        let ch = comb_channel(&poset, &self.inputs, &self.outputs, &self.steps, &self.mem)?;
        CausalBox::with_strict_past(poset, ch)
    }
}

pub fn switch_poset() -> Arc<Poset> {
    Arc::new(Poset::chain(6))
}

fn qubit_wire(p: &Poset, name: &str, positions: &[usize]) -> Result<WireSpec> {
    WireSpec::from_indices(p, name, 2, positions.iter().copied(), 1)
}

/// Step matrix sending column `m * dx + x` to row `y * mem_next + m'` for `(y, m') = f(m, x)`.
fn permutation_step(dx: usize, dy: usize, mem: usize, mem_next: usize, f: impl Fn(usize, usize) -> (usize, usize)) -> Result<CMat> {
    let mut st = CMat::zeros(dy * mem_next, mem * dx);
    for m in 0..mem {
        for x in 0..dx {
            let (y, m2) = f(m, x);
            let row = y * mem_next + m2;
            if st.row(row).iter().any(|z| *z != ZERO) {
                return Err(Error::Config(format!("step map is not injective at row {row}")));
            }
            st[(row, m * dx + x)] = ONE;
        }
    }
    Ok(st)
}

/// `U`: applies `gate` to every message on `input` and re-emits it one position later on `output`,
/// counting the messages in its memory.
pub fn oracle_comb(poset: &Poset, name: &str, input: WireSpec, output: WireSpec, gate: &CMat) -> Result<CombSpec> {
    let order: Vec<usize> = poset.linear_extension().to_vec();
    let l = order.len();
    let counters = input.truncation + 1;
    let inputs = Space::new(vec![input])?;
    let outputs = Space::new(vec![output])?;
    let xs = inputs.slicing(&order)?;
    let ys = outputs.slicing(&order)?;
    let mut mem = vec![counters; l + 2];
    mem[0] = 1;
    let mut steps = Vec::with_capacity(l + 1);
    steps.push(permutation_step(1, if l > 0 { ys.slices[0].dim() } else { 1 }, 1, counters, |_, _| (0, 0))?);
    for s in 1..=l {
        let xb = &xs.slices[s - 1].bases()[0];
        let dx = xb.dim();
        let dy = if s == l { 1 } else { ys.slices[s].dim() };
        if dx == 1 {
            steps.push(permutation_step(1, dy, counters, counters, |m, _| (0, m))?);
            continue;
        }
        if s == l || ys.slices[s].bases()[0].modes().len() != xb.modes().len() {
            return Err(Error::Config(format!("`{name}` has no output slot one step after position {s}")));
        }
        let yb = &ys.slices[s].bases()[0];
        let q = second_quantize(xb, gate)?;
        let mut st = CMat::zeros(dy * counters, counters * dx);
        for m in 0..counters {
            for x in 0..dx {
                let m2 = (m + xb.photons(x)) % counters;
                for x2 in 0..dx {
                    let y = yb.index_of(xb.state(x2)).ok_or_else(|| Error::Config("slice shapes differ".into()))?;
                    st[(y * counters + m2, m * dx + x)] = q[(x2, x)];
                }
            }
        }
        steps.push(st);
    }
    Ok(CombSpec { name: name.to_string(), inputs, outputs, steps, mem })
}

/// `QS`: routes the target according to the control, swaps `D` and `F` into `E` and `C`, and finally
/// releases the control on `G` with the returning target on `H`.
pub fn qs_comb(poset: &Poset) -> Result<CombSpec> {
    let order: Vec<usize> = poset.linear_extension().to_vec();
    if order.len() != 6 {
        return Err(Error::Config("the switch lives on six positions".into()));
    }
    let inputs = Space::new(vec![
        qubit_wire(poset, "A", &[0])?,
        qubit_wire(poset, "B", &[0])?,
        qubit_wire(poset, "D", &[2, 4])?,
        qubit_wire(poset, "F", &[2, 4])?,
    ])?;
    let outputs = Space::new(vec![
        qubit_wire(poset, "C", &[1, 3])?,
        qubit_wire(poset, "E", &[1, 3])?,
        qubit_wire(poset, "G", &[5])?,
        qubit_wire(poset, "H", &[5])?,
    ])?;
    let xs = inputs.slicing(&order)?;
    let ys = outputs.slicing(&order)?;
    let na = xs.slices[0].dims()[0];
    let nj = xs.slices[2].dims()[2];
    let one = xs.slices[0].bases()[0].index_of_photons(&[(0, 1)])?;
    let mem = vec![1, 1, na, na, na * nj, na * nj, nj * nj, nj * nj];
    let dx = |s: usize| if s == 0 { 1 } else { xs.slices[s - 1].dim() };
    let dy = |s: usize| if s == 6 { 1 } else { ys.slices[s].dim() };
    let xd = |s: usize, x: usize| xs.slices[s - 1].digits(x);
    let yi = |s: usize, d: [usize; 4]| ys.slices[s].index(&d);
    let mut steps = Vec::with_capacity(7);
    for s in 0..=6 {
        let st = match s {
            1 => permutation_step(dx(s), dy(s), mem[s], mem[s + 1], |_, x| {
                let d = xd(s, x);
                let (a, b) = (d[0], d[1]);
                let y = if a == one { yi(s, [b, 0, 0, 0]) } else { yi(s, [0, b, 0, 0]) };
                (y, a)
            })?,
            3 => permutation_step(dx(s), dy(s), mem[s], mem[s + 1], |a, x| {
                let d = xd(s, x);
                let (dd, ff) = (d[2], d[3]);
                if a == one {
                    (yi(s, [0, dd, 0, 0]), a * nj + ff)
                } else {
                    (yi(s, [ff, 0, 0, 0]), a * nj + dd)
                }
            })?,
            5 => permutation_step(dx(s), dy(s), mem[s], mem[s + 1], |m, x| {
                let d = xd(s, x);
                let (a, j2) = (m / nj, m % nj);
                let (dd, ff) = (d[2], d[3]);
                let (h, j4) = if a == one { (ff, dd) } else { (dd, ff) };
                (yi(s, [0, 0, a, h]), j2 * nj + j4)
            })?,
            _ => permutation_step(dx(s), dy(s), mem[s], mem[s + 1], |m, _| (0, m))?,
        };
        steps.push(st);
    }
    Ok(CombSpec { name: "QS".into(), inputs, outputs, steps, mem })
}

/// `QS` as a validated box; it does not depend on the configuration and is built once.
pub fn qs_box() -> Result<CausalBox> {
    static QS: OnceLock<CausalBox> = OnceLock::new();
    if let Some(b) = QS.get() {
        return Ok(b.clone());
    }
    let p = switch_poset();
    let b = qs_comb(&p)?.to_box(p)?;
    Ok(QS.get_or_init(|| b).clone())
}

/// The three boxes of the switch, built from `cfg`.
pub fn switch_combs(cfg: &SwitchConfig) -> Result<(Arc<Poset>, [CombSpec; 3])> {
    cfg.validate()?;
    let p = switch_poset();
    let qs = qs_comb(&p)?;
    let u = oracle_comb(&p, "U", qubit_wire(&p, "C", &[1, 3])?, qubit_wire(&p, "D", &[2, 4])?, &cfg.u)?;
    let v = oracle_comb(&p, "V", qubit_wire(&p, "E", &[1, 3])?, qubit_wire(&p, "F", &[2, 4])?, &cfg.v)?;
    Ok((p, [qs, u, v]))
}

/// `(QS ⋈ U) ⋈ V`: a box from `A`, `B` to `G`, `H`.
pub fn build_switch_network(cfg: &SwitchConfig) -> Result<CausalBox> {
    let (p, [_, u, v]) = switch_combs(cfg)?;
    let qs = qs_box()?;
    let u = u.to_box(p.clone())?;
    let v = v.to_box(p)?;
    let qu = connect(&qs, &u, &PortPairing::new(&[("C", "C"), ("D", "D")]))?;
    connect(&qu, &v, &PortPairing::new(&[("E", "E"), ("F", "F")]))
}

/// A pure state over named registers; wire registers hold the slice index at the current position.
#[derive(Debug, Clone, PartialEq)]
pub struct RegisterState {
    pub registers: Vec<String>,
    pub amplitudes: BTreeMap<Vec<usize>, C64>,
}

impl RegisterState {
    pub fn new(registers: Vec<String>) -> RegisterState {
        RegisterState { registers, amplitudes: BTreeMap::new() }
    }

    pub fn register(&self, name: &str) -> Option<usize> {
        self.registers.iter().position(|r| r == name)
    }

    /// Adds `amp` to the basis state with the named registers set and all others zero.
    pub fn add(&mut self, values: &[(&str, usize)], amp: C64) -> Result<()> {
        let mut key = vec![0; self.registers.len()];
        for (n, v) in values {
            let i = self.register(n).ok_or_else(|| Error::UnknownLabel(n.to_string()))?;
            key[i] = *v;
        }
        *self.amplitudes.entry(key).or_insert(ZERO) += amp;
        Ok(())
    }

    /// Largest amplitude difference over the union of supports; registers must agree.
    pub fn max_diff(&self, other: &RegisterState) -> f64 {
        assert_eq!(self.registers, other.registers, "register sets differ");
        let mut worst: f64 = 0.0;
        for (k, a) in &self.amplitudes {
            worst = worst.max((a - other.amplitudes.get(k).copied().unwrap_or(ZERO)).norm());
        }
        for (k, b) in &other.amplitudes {
            if !self.amplitudes.contains_key(k) {
                worst = worst.max(b.norm());
            }
        }
        worst
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.values().map(|a| a.norm_sqr()).sum()
    }

    /// Reduced density matrix on the named registers, with basis index in the given order and radices.
    pub fn reduced(&self, keep: &[(&str, usize)]) -> Result<CMat> {
        let idx: Vec<usize> =
            keep.iter().map(|(n, _)| self.register(n).ok_or_else(|| Error::UnknownLabel(n.to_string()))).collect::<Result<_>>()?;
        let dim: usize = keep.iter().map(|(_, d)| d).product();
        let mut groups: HashMap<Vec<usize>, CVec> = HashMap::new();
        for (k, a) in &self.amplitudes {
            let mut j = 0;
            for (&i, (_, d)) in idx.iter().zip(keep) {
                j = j * d + k[i];
            }
            let rest: Vec<usize> = k.iter().enumerate().filter(|(i, _)| !idx.contains(i)).map(|(_, &v)| v).collect();
            groups.entry(rest).or_insert_with(|| CVec::zeros(dim))[j] += a;
        }
        let mut rho = CMat::zeros(dim, dim);
        for v in groups.values() {
            rho += v * v.adjoint();
        }
        Ok(rho)
    }

    /// Probability of each joint value of the named registers.
    pub fn distribution(&self, names: &[&str]) -> Result<BTreeMap<Vec<usize>, f64>> {
        let idx: Vec<usize> =
            names.iter().map(|n| self.register(n).ok_or_else(|| Error::UnknownLabel(n.to_string()))).collect::<Result<_>>()?;
        let mut out = BTreeMap::new();
        for (k, a) in &self.amplitudes {
            *out.entry(idx.iter().map(|&i| k[i]).collect()).or_insert(0.0) += a.norm_sqr();
        }
        Ok(out)
    }
}

/// Runs combs sharing a chain position by position.
///
/// Registers are the comb names followed by every wire name. `initial` holds the wires emitted by the
/// environment at the first position. Returns the state after each position but the final memory step,
/// whose maps must be identities.
pub fn simulate(poset: &Poset, combs: &[CombSpec], initial: &RegisterState) -> Result<Vec<RegisterState>> {
    let order: Vec<usize> = poset.linear_extension().to_vec();
    let l = order.len();
    let registers = initial.registers.clone();
    let reg = |n: &str| registers.iter().position(|r| r == n).ok_or_else(|| Error::UnknownLabel(n.to_string()));
    struct Prepared<'a> {
        spec: &'a CombSpec,
        mem_reg: usize,
        in_regs: Vec<usize>,
        out_regs: Vec<usize>,
        xs: Slicing,
        ys: Slicing,
    }
    let mut prepared = Vec::with_capacity(combs.len());
    for c in combs {
        if c.steps.len() != l + 1 || c.mem.len() != l + 2 {
            return Err(Error::ShapeMismatch(format!("`{}` does not span the chain", c.name)));
        }
        let last = &c.steps[l];
        if c.mem[l] != c.mem[l + 1] || max_abs_diff(last, &CMat::identity(c.mem[l], c.mem[l])) > 0.0 {
            return Err(Error::Config(format!("`{}` acts after the last position", c.name)));
        }
        prepared.push(Prepared {
            spec: c,
            mem_reg: reg(&c.name)?,
            in_regs: c.inputs.wires().iter().map(|w| reg(&w.name)).collect::<Result<_>>()?,
            out_regs: c.outputs.wires().iter().map(|w| reg(&w.name)).collect::<Result<_>>()?,
            xs: c.inputs.slicing(&order)?,
            ys: c.outputs.slicing(&order)?,
        });
    }
    let mut state: BTreeMap<Vec<usize>, C64> = initial.amplitudes.clone();
    let mut history = Vec::with_capacity(l);
    for s in 0..l {
        let mut next: BTreeMap<Vec<usize>, C64> = BTreeMap::new();
        for (key, amp) in &state {
            // Wires read at position s-1 come from `key`; outputs at s are written into a fresh set.
            let mut branches: Vec<(Vec<usize>, C64)> = {
                let mut k = key.clone();
                if s > 0 {
                    for pr in &prepared {
                        for &r in pr.in_regs.iter().chain(&pr.out_regs) {
                            k[r] = 0;
                        }
                    }
                }
                vec![(k, *amp)]
            };
            for pr in &prepared {
                let c = pr.spec;
                let st = &c.steps[s];
                let (dx, mem_next) = (if s == 0 { 1 } else { pr.xs.slices[s - 1].dim() }, c.mem[s + 1]);
                let x = if s == 0 {
                    0
                } else {
                    let digits: Vec<usize> = pr.in_regs.iter().map(|&r| key[r]).collect();
                    pr.xs.slices[s - 1].index(&digits)
                };
                let mut out = Vec::new();
                for (k, a) in branches {
                    let col = k[pr.mem_reg] * dx + x;
                    for row in 0..st.nrows() {
                        let v = st[(row, col)];
                        if v == ZERO {
                            continue;
                        }
                        let (y, m2) = (row / mem_next, row % mem_next);
                        let mut k2 = k.clone();
                        k2[pr.mem_reg] = m2;
                        let yd = pr.ys.slices[s].digits(y);
                        for (&r, &d) in pr.out_regs.iter().zip(&yd) {
                            if d != 0 {
                                k2[r] = d;
                            }
                        }
                        out.push((k2, a * v));
                    }
                }
                branches = out;
            }
            for (k, a) in branches {
                *next.entry(k).or_insert(ZERO) += a;
            }
        }
        next.retain(|_, a| a.norm() > 1e-15);
        state = next;
        history.push(RegisterState { registers: registers.clone(), amplitudes: state.clone() });
    }
    Ok(history)
}

/// Registers of the switch simulation, in order.
pub const SWITCH_REGISTERS: [&str; 11] = ["QS", "U", "V", "A", "B", "C", "D", "E", "F", "G", "H"];

/// Result of [`run_switch`].
#[derive(Debug, Clone)]
pub struct SwitchRun {
    /// Reduced state of `G`, `H` from the simulation, index `g * 3 + h` over slice indices.
    pub final_density: CMat,
    /// The same state from the composed box.
    pub network_density: CMat,
    /// States at positions 1 to 6, when traced.
    pub step_states: Vec<RegisterState>,
    /// Distribution of the `(U, V)` counters at the end.
    pub counters: BTreeMap<Vec<usize>, f64>,
}

/// Slice index of a qubit value on a single-position wire slice (vacuum is 0).
pub fn qubit_index(value: usize) -> usize {
    let p = Poset::chain(1);
    let w = qubit_wire(&p, "q", &[0]).expect("valid wire");
    FockBasis::new(&w).and_then(|b| b.index_of_photons(&[(0, value)])).expect("qubit value")
}

/// The switch input `(alpha|0> + beta|1>)_A (x) |phi>_B` over slice indices `a * 3 + b`.
pub fn switch_input(cfg: &SwitchConfig) -> CVec {
    let mut v = CVec::zeros(9);
    for (a, ca) in [(0, cfg.alpha), (1, cfg.beta)] {
        for b in 0..2 {
            v[qubit_index(a) * 3 + qubit_index(b)] = ca * cfg.phi[b];
        }
    }
    v
}

pub fn run_switch(cfg: &SwitchConfig, trace_steps: bool) -> Result<SwitchRun> {
    let (p, combs) = switch_combs(cfg)?;
    let mut init = RegisterState::new(SWITCH_REGISTERS.iter().map(|s| s.to_string()).collect());
    let input = switch_input(cfg);
    for (i, &amp) in input.iter().enumerate() {
        if amp != ZERO {
            init.add(&[("A", i / 3), ("B", i % 3)], amp)?;
        }
    }
    let history = simulate(&p, &combs, &init)?;
    let last = history.last().expect("six positions");
    let final_density = last.reduced(&[("G", 3), ("H", 3)])?;
    let counters = last.distribution(&["U", "V"])?;
    let network = build_switch_network(cfg)?;
    let network_density = network.top().apply(&(&input * input.adjoint()))?;
    Ok(SwitchRun { final_density, network_density, step_states: if trace_steps { history } else { Vec::new() }, counters })
}

/// `alpha |0>_G (x) UV|phi>_H + beta |1>_G (x) VU|phi>_H` over slice indices `g * 3 + h`.
pub fn expected_output(cfg: &SwitchConfig) -> CVec {
    let uv = &cfg.u * &cfg.v * &cfg.phi;
    let vu = &cfg.v * &cfg.u * &cfg.phi;
    let mut out = CVec::zeros(9);
    for h in 0..2 {
        out[qubit_index(0) * 3 + qubit_index(h)] += cfg.alpha * uv[h];
        out[qubit_index(1) * 3 + qubit_index(h)] += cfg.beta * vu[h];
    }
    out
}

/// `<psi| rho |psi>` for a normalized `psi`.
pub fn fidelity(rho: &CMat, psi: &CVec) -> f64 {
    (psi.adjoint() * rho * psi)[(0, 0)].re
}
