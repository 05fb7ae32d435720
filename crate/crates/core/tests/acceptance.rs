use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use causalbox::channel::{channel_distance, Channel};
use causalbox::comb::{delayed_identity, silent, zero_delay_identity};
use causalbox::distance::{advantage, advantage_by_trace, distance_lower_bound, evaluate, success_trace, witness_distinguisher, Family};
use causalbox::fock::{Space, WireSpec};
use causalbox::linalg::{c, max_abs_diff, random_unitary, CVec, C64};
use causalbox::network::{stage_count, PortPairing};
use causalbox::random::{
    random_box, random_causality, random_channel, random_classical_box, random_comb_box, random_loop_box, random_pair, random_poset,
    random_space, random_subnormalized_box, random_triple, seeded,
};
use causalbox::switchdemo::{expected_output, fidelity, qubit_index, run_switch, RegisterState, SwitchConfig, SWITCH_REGISTERS};
use causalbox::{connect, loop_box, loop_partial, parallel, CausalBox, Error, Poset};
use fixedbitset::FixedBitSet;
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

type Outcome = std::result::Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($fmt)+));
        }
    };
}

fn ok<T>(r: causalbox::Result<T>, what: &str) -> std::result::Result<T, String> {
    r.map_err(|e| format!("{what}: {e}"))
}

fn random_state(dim: usize, rng: &mut ChaCha8Rng) -> CVec {
    let v = causalbox::linalg::random_gaussian(dim, 1, rng);
    let v = CVec::from_iterator(dim, v.iter().copied());
    let n = v.norm();
    v / c(n, 0.0)
}

// 1

fn expected_steps(cfg: &SwitchConfig) -> Vec<RegisterState> {
    let psi = &cfg.phi;
    let u_psi = &cfg.u * psi;
    let v_psi = &cfg.v * psi;
    let uv_psi = &cfg.u * &v_psi;
    let vu_psi = &cfg.v * &u_psi;
    let (c0, c1) = (qubit_index(0), qubit_index(1));
    let q = |k: usize| qubit_index(k);
    let names = SWITCH_REGISTERS.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let mut out = vec![RegisterState::new(names); 6];
    // Adds amp * |state>_wire on top of the fixed registers, for every qubit value of `state`.
    let add = |st: &mut RegisterState, fixed: &[(&str, usize)], wire: Option<(&str, &CVec)>, amp: C64| match wire {
        None => st.add(fixed, amp).unwrap(),
        Some((w, v)) => {
            for k in 0..2 {
                let mut regs = fixed.to_vec();
                regs.push((w, q(k)));
                st.add(&regs, amp * v[k]).unwrap();
            }
        }
    };
    let (a, b) = (cfg.alpha, cfg.beta);
    // Position 1: control and target on A, B.
    for (ctl, amp) in [(c0, a), (c1, b)] {
        add(&mut out[0], &[("A", ctl)], Some(("B", psi)), amp);
    }
    // Position 2: the target sits on E (control 0) or C (control 1).
    add(&mut out[1], &[("QS", c0)], Some(("E", psi)), a);
    add(&mut out[1], &[("QS", c1)], Some(("C", psi)), b);
    // Position 3: one gate applied.
    add(&mut out[2], &[("QS", c0), ("V", 1)], Some(("F", &v_psi)), a);
    add(&mut out[2], &[("QS", c1), ("U", 1)], Some(("D", &u_psi)), b);
    // Position 4: routed to the other gate.
    add(&mut out[3], &[("QS", 3 * c0), ("V", 1)], Some(("C", &v_psi)), a);
    add(&mut out[3], &[("QS", 3 * c1), ("U", 1)], Some(("E", &u_psi)), b);
    // Position 5: both gates applied.
    add(&mut out[4], &[("QS", 3 * c0), ("U", 1), ("V", 1)], Some(("D", &uv_psi)), a);
    add(&mut out[4], &[("QS", 3 * c1), ("U", 1), ("V", 1)], Some(("F", &vu_psi)), b);
    // Position 6: control on G, target on H.
    add(&mut out[5], &[("G", c0), ("U", 1), ("V", 1)], Some(("H", &uv_psi)), a);
    add(&mut out[5], &[("G", c1), ("U", 1), ("V", 1)], Some(("H", &vu_psi)), b);
    for s in &mut out {
        s.amplitudes.retain(|_, z| *z != c(0.0, 0.0));
    }
    out
}

fn switch_config(rng: &mut ChaCha8Rng) -> SwitchConfig {
    let ab = random_state(2, rng);
    SwitchConfig { u: random_unitary(2, rng), v: random_unitary(2, rng), alpha: ab[0], beta: ab[1], phi: random_state(2, rng) }
}

fn criterion_switch() -> Outcome {
    let mut rng = seeded(1001);
    let mut worst_f: f64 = 0.0;
    let mut worst_step: f64 = 0.0;
    for i in 0..20 {
        let cfg = switch_config(&mut rng);
        let run = ok(run_switch(&cfg, true), "switch")?;
        let exp = expected_output(&cfg);
        let f = fidelity(&run.final_density, &exp).min(fidelity(&run.network_density, &exp));
        worst_f = worst_f.max(1.0 - f);
        ensure!(f >= 1.0 - 1e-9, "config {i}: fidelity {f}");
        let p11 = run.counters.get(&vec![1, 1]).copied().unwrap_or(0.0);
        ensure!((p11 - 1.0).abs() < 1e-12 && run.counters.len() == 1, "config {i}: counters {:?}", run.counters);
        for (t, (got, want)) in run.step_states.iter().zip(expected_steps(&cfg)).enumerate() {
            let d = got.max_diff(&want);
            worst_step = worst_step.max(d);
            ensure!(d <= 1e-9, "config {i}: position {} off by {d:e}", t + 1);
        }
        ensure!(run.step_states.len() == 6, "config {i}: {} step states", run.step_states.len());
    }
    Ok(format!("20 configs, worst infidelity {worst_f:.1e}, worst step error {worst_step:.1e}"))
}

// 2

fn criterion_closure() -> Outcome {
    let mut rng = seeded(1002);
    for i in 0..50 {
        let rp = ok(random_pair(&mut rng), "pair")?;
        ensure!(rp.a.poset().len() <= 4, "chain too long");
        for w in rp.a.inputs().wires().iter().chain(rp.a.outputs().wires()).chain(rp.b.inputs().wires()).chain(rp.b.outputs().wires()) {
            ensure!(w.msg_dim <= 2 && w.truncation <= 1, "wire `{}` out of range", w.name);
        }
        ok(rp.a.validate(), "a")?;
        ok(rp.b.validate(), "b")?;
        let r = ok(connect(&rp.a, &rp.b, &rp.pairing), &format!("pair {i}"))?;
        ok(r.validate(), &format!("composite {i}"))?;
    }
    Ok("100 boxes, 50 composites validated".into())
}

// 3

fn merged(a: &PortPairing, b: &PortPairing) -> PortPairing {
    PortPairing { pairs: a.pairs.iter().chain(&b.pairs).cloned().collect() }
}

fn names(s: &Space) -> Vec<String> {
    s.wires().iter().map(|w| w.name.clone()).collect()
}

fn criterion_associativity() -> Outcome {
    let mut rng = seeded(1003);
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let t = ok(random_triple(&mut rng), "triple")?;
        let [b1, b2, b3] = &t.boxes;
        let left = ok(connect(&ok(connect(b1, b2, &t.p12), "12")?, b3, &merged(&t.p23, &t.p13)), "(12)3")?;
        let right = ok(connect(b1, &ok(connect(b2, b3, &t.p23), "23")?, &merged(&t.p12, &t.p13)), "1(23)")?;
        let (on, inn) = (names(left.outputs()), names(left.inputs()));
        let on: Vec<&str> = on.iter().map(|s| s.as_str()).collect();
        let inn: Vec<&str> = inn.iter().map(|s| s.as_str()).collect();
        let r = ok(right.top().reorder(&on, &inn), "reorder")?;
        let d = max_abs_diff(&left.top().choi(), &r.choi());
        worst = worst.max(d);
        ensure!(d <= 1e-7, "triple {i}: {d:e}");
    }
    Ok(format!("50 triples, worst {worst:.1e}"))
}

// 4

fn criterion_loop_algebra() -> Outcome {
    let mut rng = seeded(1004);
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let (b, ports) = ok(random_loop_box(2, 144, &mut rng), "loop box")?;
        let (o1, i1) = &ports[0];
        let (o2, i2) = &ports[1];
        let x = ok(loop_box(&ok(loop_box(&b, o1, i1), "l1")?, o2, i2), "l12")?;
        let y = ok(loop_box(&ok(loop_box(&b, o2, i2), "l2")?, o1, i1), "l21")?;
        let d = max_abs_diff(&x.top().choi(), &y.top().choi());
        worst = worst.max(d);
        ensure!(d <= 1e-8, "loop commute {i}: {d:e}");
    }
    for i in 0..50 {
        let (b, ports) = ok(random_loop_box(1, 36, &mut rng), "loop box")?;
        let p = b.poset().clone();
        let w_in = ok(WireSpec::from_indices(&p, "u", rng.random_range(1..=2), [0], 1), "wire")?;
        let w_out = ok(WireSpec::from_indices(&p, "v", 2, [p.len() - 1], 1), "wire")?;
        let other = ok(random_comb_box(p, Space::new(vec![w_in]).unwrap(), Space::new(vec![w_out]).unwrap(), &mut rng), "other")?;
        let (o, inp) = &ports[0];
        let x = ok(parallel(&ok(loop_box(&b, o, inp), "loop")?, &other), "par")?;
        let y = ok(loop_box(&ok(parallel(&b, &other), "par")?, o, inp), "loop")?;
        let d = max_abs_diff(&x.top().choi(), &y.top().choi());
        worst = worst.max(d);
        ensure!(d <= 1e-8, "parallel-loop {i}: {d:e}");
    }
    Ok(format!("50 + 50 instances, worst {worst:.1e}"))
}

// 5

fn criterion_loop_normalization() -> Outcome {
    let mut rng = seeded(1005);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let (b, ports) = ok(random_loop_box(1, 64, &mut rng), "loop box")?;
        let (o, inp) = &ports[0];
        let r = ok(loop_box(&b, o, inp), "loop")?.top().tp_residual();
        worst = worst.max(r);
        ensure!(r <= 1e-8, "instance {i}: residual {r:e}");
    }
    Ok(format!("100 loops, worst TP residual {worst:.1e}"))
}

// 6

fn criterion_partial_loop() -> Outcome {
    let mut rng = seeded(1006);
    let mut worst: f64 = 0.0;
    for i in 0..25 {
        let (b, ports) = ok(random_loop_box(1, 64, &mut rng), "loop box")?;
        let (o, inp) = &ports[0];
        let full = ok(loop_box(&b, o, inp), "loop")?;
        let m = ok(stage_count(&b), "stages")?;
        let mut prev = f64::INFINITY;
        for n in 0..=m {
            let d = ok(channel_distance(&ok(loop_partial(&b, o, inp, n), "partial")?, full.top()), "distance")?;
            ensure!(d <= prev + 1e-12, "instance {i}: distance rises at n = {n}");
            prev = d;
        }
        let d = max_abs_diff(&ok(loop_partial(&b, o, inp, m), "partial")?.choi(), &full.top().choi());
        worst = worst.max(d);
        ensure!(d <= 1e-7, "instance {i}: {d:e} at full stage count");
    }
    Ok(format!("25 instances, worst {worst:.1e}"))
}

// 7

fn criterion_classical_loop() -> Outcome {
    let mut rng = seeded(1007);
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let cb = ok(random_classical_box(&mut rng), "classical box")?;
        let looped = ok(loop_box(&cb.boxed, "C", "B"), "loop")?;
        let choi = looped.top().choi();
        for a in 0..2 {
            for d in 0..2 {
                let q: f64 = (0..2).map(|cc| cb.p_c[a][cc] * cb.p_d[a][cc][cc][d]).sum();
                let idx = d * 2 + a;
                let e = (choi[(idx, idx)] - c(q, 0.0)).norm();
                worst = worst.max(e);
                ensure!(e <= 1e-10, "box {i}: Q({d}|{a}) off by {e:e}");
            }
        }
        for r in 0..4 {
            for s in 0..4 {
                if r != s {
                    ensure!(choi[(r, s)].norm() <= 1e-10, "box {i}: coherence at ({r}, {s})");
                }
            }
        }
    }
    Ok(format!("10 boxes, worst {worst:.1e}"))
}

// 8

/// A random maximal chain of `p`, listed upward.
fn random_chain_in(p: &Poset, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let minimal: Vec<usize> = (0..p.len()).filter(|&t| p.strict_past(t).is_empty()).collect();
    let mut chain = vec![*minimal.choose(rng).unwrap()];
    loop {
        let t = *chain.last().unwrap();
        let covers: Vec<usize> = (0..p.len())
            .filter(|&s| s != t && p.leq(t, s) && !(0..p.len()).any(|m| m != t && m != s && p.leq(t, m) && p.leq(m, s)))
            .collect();
        match covers.choose(rng) {
            Some(&s) => chain.push(s),
            None => return chain,
        }
    }
}

/// A random comb along a chain of `p`, with wires named from `prefix`.
fn chain_box(p: &Arc<Poset>, prefix: &str, rng: &mut ChaCha8Rng) -> causalbox::Result<CausalBox> {
    let chain = random_chain_in(p, rng);
    let cp = Arc::new(Poset::chain(chain.len()));
    let si = random_space(&cp, &format!("{prefix}x"), 1, rng)?;
    let so = random_space(&cp, &format!("{prefix}y"), 1, rng)?;
    let local = random_comb_box(cp, si.clone(), so.clone(), rng)?;
    let lift = |s: &Space| -> causalbox::Result<Space> {
        let wires = s
            .wires()
            .iter()
            .map(|w| WireSpec::from_indices(p, &w.name, w.msg_dim, w.positions.iter().map(|&i| chain[i]), w.truncation))
            .collect::<causalbox::Result<Vec<_>>>()?;
        Space::new(wires)
    };
    let ch = local.top().with_spaces(lift(&si)?, lift(&so)?)?;
    CausalBox::with_strict_past(p.clone(), ch)
}

fn nested_consistency(b: &CausalBox) -> std::result::Result<(usize, f64), String> {
    let cuts = ok(b.poset().enumerate_cuts(), "cuts")?;
    let mut pairs = 0;
    let mut worst: f64 = 0.0;
    for big in &cuts {
        let outer = ok(b.restrict_padded(big), "restrict")?;
        for small in cuts.iter().filter(|s| s.is_subset(big)) {
            let mut drop = big.bits().clone();
            drop.difference_with(small.bits());
            let traced = ok(outer.trace_out_positions(&drop), "trace")?;
            let inner = ok(b.restrict_padded(small), "restrict")?;
            let d = max_abs_diff(&traced.choi(), &inner.choi());
            worst = worst.max(d);
            ensure!(d <= 1e-9, "cuts {:?} in {:?}: {d:e}", small.labels(b.poset()), big.labels(b.poset()));
            pairs += 1;
        }
    }
    Ok((pairs, worst))
}

fn criterion_certificate() -> Outcome {
    let p = Arc::new(Poset::chain(3));
    let delay = ok(delayed_identity(p.clone(), 2, 1, 1), "delay line")?;
    ok(delay.validate(), "delay line")?;
    let zero = ok(zero_delay_identity(&p, 2, 1), "zero delay")?;
    let named = match CausalBox::with_strict_past(p, zero) {
        Err(Error::CausalityViolation { cut, .. }) => cut,
        other => return Err(format!("zero-delay identity not rejected: {:?}", other.map(|_| ()))),
    };
    ensure!(named == vec!["1".to_string()], "violating cut {named:?}");
    let mut rng = seeded(1008);
    let mut corpus: Vec<CausalBox> = Vec::new();
    for _ in 0..10 {
        corpus.push(ok(random_box(&mut rng), "random box")?);
    }
    for n in 3..=6 {
        for _ in 0..5 {
            let p = Arc::new(random_poset(n, 0.4, &mut rng));
            let a = ok(chain_box(&p, "a", &mut rng), "chain box")?;
            let b = ok(chain_box(&p, "b", &mut rng), "chain box")?;
            let joint = ok(parallel(&a, &b), "parallel")?;
            corpus.push(if joint.inputs().dim() * joint.outputs().dim() <= 400 { joint } else { a });
        }
    }
    let mut pairs = 0;
    let mut worst: f64 = 0.0;
    for b in &corpus {
        ensure!(b.poset().len() <= 6, "corpus poset too large");
        let (k, w) = nested_consistency(b)?;
        pairs += k;
        worst = worst.max(w);
    }
    Ok(format!("rejected at {named:?}; {} boxes, {pairs} nested pairs, worst {worst:.1e}", corpus.len()))
}

// 9

fn brute_force_cuts(p: &Poset) -> Vec<FixedBitSet> {
    let n = p.len();
    let mut out = Vec::new();
    for mask in 0u32..1 << n {
        let closed = (0..n).filter(|&t| mask >> t & 1 == 1).all(|t| (0..n).all(|s| !p.leq(s, t) || mask >> s & 1 == 1));
        if closed {
            let mut b = FixedBitSet::with_capacity(n);
            (0..n).filter(|&t| mask >> t & 1 == 1).for_each(|t| b.insert(t));
            out.push(b);
        }
    }
    out
}

fn criterion_posets() -> Outcome {
    let mut rng = seeded(1009);
    for i in 0..100 {
        let p = random_poset(8, 0.3, &mut rng);
        let a = random_causality(&p, &mut rng);
        let b = random_causality(&p, &mut rng);
        let u = ok(a.union(&b, &p), &format!("union on poset {i}"))?;
        let cuts = ok(p.enumerate_cuts(), "cuts")?;
        for chi in [&a, &b, &u] {
            for x in &cuts {
                let img = ok(chi.apply(x), "apply")?;
                ensure!(img.is_subset(x), "poset {i}: chi not decreasing");
                ensure!(x.is_empty() || img != *x, "poset {i}: chi has a nonempty fixed point");
                ensure!(ok(chi.iterate(x, p.len()), "iterate")?.is_empty(), "poset {i}: chi^|T| nonempty");
                for y in &cuts {
                    let xy = ok(chi.apply(&ok(x.union(y), "union")?), "apply")?;
                    let sep = ok(img.union(&ok(chi.apply(y), "apply")?), "union")?;
                    ensure!(xy == sep, "poset {i}: chi does not preserve unions");
                }
            }
            ensure!(ok(chi.iterate(&p.full_cut(), p.len()), "iterate")?.is_empty(), "poset {i}: chi^|T|(T) nonempty");
        }
    }
    let mut total = 0;
    for n in 0..=12 {
        for _ in 0..4 {
            let p = random_poset(n, rng.random_range(0.0..0.6), &mut rng);
            let mut got: Vec<FixedBitSet> = ok(p.enumerate_cuts(), "cuts")?.iter().map(|c| c.bits().clone()).collect();
            let mut want = brute_force_cuts(&p);
            let key = |b: &FixedBitSet| b.ones().collect::<Vec<_>>();
            got.sort_by_key(key);
            want.sort_by_key(key);
            ensure!(got == want, "cut enumeration differs on {n} points");
            total += want.len();
        }
    }
    Ok(format!("100 unions valid; {total} cuts matched by brute force"))
}

// 10

fn criterion_pseudometric() -> Outcome {
    let p = Arc::new(Poset::chain(3));
    let id = ok(delayed_identity(p.clone(), 2, 1, 1), "delay line")?;
    let (si, so) = (id.inputs().clone(), id.outputs().clone());
    let full = ok(Family::product_states(p.clone(), &si, 7), "family")?;
    ensure!(full.len() >= 200, "only {} candidates", full.len());
    let mut keep = full.sample(200, 10);
    keep.sort_unstable();
    let family = Family { poset: p.clone(), members: keep.iter().map(|&i| full.members[i].clone()).collect() };
    let mut boxes = vec![id, ok(silent(p.clone(), si.clone(), so.clone()), "silent")?];
    let mut rng = seeded(1010);
    for _ in 0..4 {
        boxes.push(ok(random_comb_box(p.clone(), si.clone(), so.clone(), &mut rng), "comb")?);
    }
    let n = boxes.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            d[i][j] = ok(distance_lower_bound(&boxes[i], &boxes[j], &family, family.len(), 0), "search")?.best;
        }
    }
    for i in 0..n {
        ensure!(d[i][i] == 0.0, "d(b{i}, b{i}) = {}", d[i][i]);
        for j in 0..n {
            ensure!(d[i][j] == d[j][i], "asymmetric at ({i}, {j})");
            for k in 0..n {
                ensure!(d[i][k] <= d[i][j] + d[j][k], "triangle fails at ({i}, {j}, {k}) by {:e}", d[i][k] - d[i][j] - d[j][k]);
            }
        }
    }
    ensure!(d[0][1] >= 0.5, "delay line vs silent box: {}", d[0][1]);
    Ok(format!("{n} boxes on a 200-member family; delay line vs silent = {:.6}", d[0][1]))
}

// 11

fn criterion_round_trips() -> Outcome {
    let mut rng = seeded(1011);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    while count < 100 {
        let p = Poset::chain(rng.random_range(1..=3));
        let si = ok(random_space(&p, "x", rng.random_range(1..=2), &mut rng), "space")?;
        let so = ok(random_space(&p, "y", rng.random_range(1..=2), &mut rng), "space")?;
        if si.dim() * so.dim() > 36 {
            continue;
        }
        let rank = rng.random_range(1..=si.dim() * so.dim());
        let ch = ok(random_channel(si.clone(), so.clone(), rank, &mut rng), "channel")?;
        let j = ch.choi();
        let from_choi = ok(Channel::from_choi(&j, si.clone(), so.clone()), "from choi")?;
        let from_nat = ok(Channel::from_natural(&from_choi.natural(), si.clone(), so.clone()), "from natural")?;
        let from_kraus = ok(Channel::from_kraus(from_nat.canonical_kraus(), si.clone(), so.clone()), "from kraus")?;
        let iso = from_kraus.stinespring();
        ensure!(iso.defect() <= 1e-9, "channel {count}: dilation defect {:e}", iso.defect());
        let back = ok(iso.channel(si.clone(), so.clone()), "from dilation")?;
        for (what, x) in [("choi", &from_choi), ("natural", &from_nat), ("kraus", &from_kraus), ("stinespring", &back)] {
            let d = max_abs_diff(&x.choi(), &j);
            worst = worst.max(d);
            ensure!(d <= 1e-8, "channel {count}: {what} round trip off by {d:e}");
        }
        count += 1;
    }
    let mut worst_seq: f64 = 0.0;
    for i in 0..25 {
        let b = ok(random_box(&mut rng), "box")?;
        let rep = ok(b.sequence_representation(&b.poset().full_cut()), &format!("box {i}"))?;
        worst_seq = worst_seq.max(rep.residual);
        ensure!(rep.residual <= 1e-7, "box {i}: residual {:e}", rep.residual);
    }
    Ok(format!("100 channels, worst {worst:.1e}; 25 sequence representations, worst residual {worst_seq:.1e}"))
}

// 12

fn criterion_subnormalization() -> Outcome {
    let mut rng = seeded(1012);
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let b = ok(random_subnormalized_box(&mut rng), "box")?;
        let flag = b.poset().label(b.default_flag_position()).to_string();
        let full = ok(b.complete_to_normalized(&flag), &format!("box {i}"))?;
        let back = ok(full.project_success("R"), "project")?;
        let d = max_abs_diff(&back.top().choi(), &b.top().choi());
        worst = worst.max(d);
        ensure!(d <= 1e-9, "box {i}: round trip off by {d:e}");
    }
    let mut worst_eval: f64 = 0.0;
    let mut evaluated = 0;
    for i in 0..20 {
        let a = ok(random_subnormalized_box(&mut rng), "box")?;
        let b = ok(CausalBox::new(a.poset().clone(), a.top().scaled(rng.random_range(0.2..0.9)), a.chi().clone(), false), "scaled")?;
        let fam = ok(Family::product_states(a.poset().clone(), a.inputs(), 2), "family")?;
        for m in fam.members.iter().take(12) {
            let Some(dist) = ok(witness_distinguisher(&fam, m, &a, &b), "witness")? else { continue };
            for sys in [&a, &b] {
                let e = (ok(evaluate(&dist, sys), "evaluate")?.0 - ok(success_trace(&dist, sys), "trace")?).abs();
                worst_eval = worst_eval.max(e);
                ensure!(e <= 1e-9, "box {i}: evaluations differ by {e:e}");
            }
            let e = (ok(advantage(&dist, &a, &b), "advantage")? - ok(advantage_by_trace(&dist, &a, &b), "advantage")?).abs();
            worst_eval = worst_eval.max(e);
            ensure!(e <= 1e-9, "box {i}: advantages differ by {e:e}");
            evaluated += 1;
        }
    }
    ensure!(evaluated > 0, "no distinguisher evaluated");
    Ok(format!("50 round trips, worst {worst:.1e}; {evaluated} distinguishers, worst {worst_eval:.1e}"))
}

fn main() -> ExitCode {
    type Check = fn() -> Outcome;
    let criteria: [(&str, Check, Option<Duration>); 12] = [
        ("switch", criterion_switch, Some(Duration::from_secs(10))),
        ("closure", criterion_closure, Some(Duration::from_secs(60))),
        ("associativity", criterion_associativity, Some(Duration::from_secs(120))),
        ("loop algebra", criterion_loop_algebra, None),
        ("loop normalization", criterion_loop_normalization, None),
        ("partial loop", criterion_partial_loop, None),
        ("classical loop", criterion_classical_loop, None),
        ("certificate", criterion_certificate, None),
        ("posets", criterion_posets, None),
        ("pseudo-metric", criterion_pseudometric, None),
        ("round trips", criterion_round_trips, None),
        ("subnormalization", criterion_subnormalization, None),
    ];
    let mut failed = 0;
    for (i, (name, check, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut outcome = check();
        let took = start.elapsed();
        if let (Ok(_), Some(limit)) = (&outcome, limit) {
            if took > *limit {
                outcome = Err(format!("took {took:.1?}, limit {limit:?}"));
            }
        }
        match outcome {
            Ok(msg) => println!("PASS {:>2} {name} ({took:.2?}): {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({took:.2?}): {msg}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
