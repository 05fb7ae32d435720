use std::sync::Arc;

use causalbox::channel::channel_distance;
use causalbox::comb::{delayed_identity, emitter};
use causalbox::fock::{Space, StateVector, WireSpec};
use causalbox::linalg::{c, max_abs_diff, random_unitary};
use causalbox::network::{
    connect, connect_channels, loop_box, loop_channel, loop_in_basis, loop_natural, loop_partial, parallel, stage_count,
};
use causalbox::random::{random_box, random_classical_box, random_loop_box, random_pair, seeded};
use causalbox::{CausalBox, Error, PortPairing, Poset};

#[test]
fn classical_loop_matches_direct_sum() {
    let mut rng = seeded(11);
    for _ in 0..5 {
        let cb = random_classical_box(&mut rng).unwrap();
        let looped = loop_box(&cb.boxed, "C", "B").unwrap();
        let choi = looped.top().choi();
        // Choi rows (d, a), columns (d', a') with row-major vec index d * 2 + a.
        for a in 0..2 {
            for d in 0..2 {
                let q: f64 = (0..2).map(|cc| cb.p_c[a][cc] * cb.p_d[a][cc][cc][d]).sum();
                let idx = d * 2 + a;
                assert!((choi[(idx, idx)].re - q).abs() < 1e-10);
            }
        }
        let offdiag: f64 = (0..4).flat_map(|i| (0..4).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| choi[(i, j)].norm()).sum();
        assert!(offdiag < 1e-10);
    }
}

#[test]
fn loop_routes_agree() {
    let mut rng = seeded(12);
    for _ in 0..6 {
        let (b, ports) = random_loop_box(1, 64, &mut rng).unwrap();
        let (o, i) = &ports[0];
        let kr = loop_channel(b.top(), o, i).unwrap();
        let nat = loop_natural(b.top(), o, i).unwrap();
        let dk = b.outputs().dims()[b.outputs().position_of(o).unwrap()];
        let u = random_unitary(dk, &mut rng);
        let rot = loop_in_basis(b.top(), o, i, &u).unwrap();
        assert!(max_abs_diff(&kr.choi(), &nat.choi()) < 1e-10);
        assert!(max_abs_diff(&kr.choi(), &rot.choi()) < 1e-10);
    }
}

#[test]
fn loops_commute() {
    let mut rng = seeded(13);
    for _ in 0..5 {
        let (b, ports) = random_loop_box(2, 144, &mut rng).unwrap();
        let (o1, i1) = &ports[0];
        let (o2, i2) = &ports[1];
        let x = loop_box(&loop_box(&b, o1, i1).unwrap(), o2, i2).unwrap();
        let y = loop_box(&loop_box(&b, o2, i2).unwrap(), o1, i1).unwrap();
        assert!(max_abs_diff(&x.top().choi(), &y.top().choi()) < 1e-8);
    }
}

#[test]
fn loop_commutes_with_parallel() {
    let mut rng = seeded(14);
    for _ in 0..5 {
        let (b, ports) = random_loop_box(1, 36, &mut rng).unwrap();
        let p = b.poset().clone();
        let w_in = WireSpec::from_indices(&p, "u", 1, [0], 1).unwrap();
        let w_out = WireSpec::from_indices(&p, "v", 2, [p.len() - 1], 1).unwrap();
        let other =
            causalbox::random::random_comb_box(p, Space::new(vec![w_in]).unwrap(), Space::new(vec![w_out]).unwrap(), &mut rng).unwrap();
        let (o, i) = &ports[0];
        let x = parallel(&loop_box(&b, o, i).unwrap(), &other).unwrap();
        let y = loop_box(&parallel(&b, &other).unwrap(), o, i).unwrap();
        assert!(max_abs_diff(&x.top().choi(), &y.top().choi()) < 1e-8);
    }
}

#[test]
fn looped_boxes_stay_normalized() {
    let mut rng = seeded(15);
    for _ in 0..8 {
        let (b, ports) = random_loop_box(1, 64, &mut rng).unwrap();
        let (o, i) = &ports[0];
        let l = loop_box(&b, o, i).unwrap();
        assert!(l.top().tp_residual() < 1e-8);
    }
}

#[test]
fn partial_loops_converge() {
    let mut rng = seeded(16);
    for _ in 0..5 {
        let (b, ports) = random_loop_box(1, 64, &mut rng).unwrap();
        let (o, i) = &ports[0];
        let full = loop_box(&b, o, i).unwrap();
        let m = stage_count(&b).unwrap();
        let mut prev = f64::INFINITY;
        for n in 0..=m {
            let part = loop_partial(&b, o, i, n).unwrap();
            let d = channel_distance(&part, full.top()).unwrap();
            assert!(d <= prev + 1e-12);
            prev = d;
        }
        assert!(prev < 1e-7);
    }
}

#[test]
fn pairwise_composition_is_causal() {
    let mut rng = seeded(17);
    for _ in 0..10 {
        let rp = random_pair(&mut rng).unwrap();
        let r = connect(&rp.a, &rp.b, &rp.pairing).unwrap();
        assert!(r.top().tp_residual() < 1e-8);
    }
}

#[test]
fn parallel_matches_tensor() {
    let mut rng = seeded(18);
    let a = random_box(&mut rng).unwrap();
    let mut b = random_box(&mut rng).unwrap();
    while b.poset().fingerprint() != a.poset().fingerprint() {
        b = random_box(&mut rng).unwrap();
    }
    let renamed = |s: &Space, pre: &str| Space::new(s.wires().iter().map(|w| w.renamed(&format!("{pre}{}", w.name))).collect()).unwrap();
    let bt = b.top().with_spaces(renamed(b.inputs(), "b_"), renamed(b.outputs(), "b_")).unwrap();
    let b = CausalBox::with_strict_past(b.poset().clone(), bt).unwrap();
    let p = parallel(&a, &b).unwrap();
    let t = a.top().tensor(b.top()).unwrap();
    assert!(max_abs_diff(&p.top().choi(), &t.choi()) < 1e-10);
}

#[test]
fn loop_rejects_mismatched_ports() {
    let p = Arc::new(Poset::chain(3));
    let b = delayed_identity(p.clone(), 1, 1, 1).unwrap();
    let outb = b.outputs().wires()[0].clone();
    let inb = b.inputs().wires()[0].clone();
    assert_eq!(outb.positions, vec![1, 2]);
    assert_eq!(inb.positions, vec![0, 1]);
    assert!(matches!(loop_box(&b, "out", "in"), Err(Error::ShapeMismatch(_))));
}

#[test]
fn emitter_into_delay_line() {
    let p = Arc::new(Poset::chain(3));
    let delay = delayed_identity(p.clone(), 2, 1, 1).unwrap();
    let w = delay.inputs().wires()[0].renamed("src");
    let s = Space::new(vec![w]).unwrap();
    let st = StateVector::new(s.bases()[0].clone(), &[(vec![(0, 0)], c(0.6, 0.0)), (vec![(0, 1)], c(0.0, 0.8))], false).unwrap();
    let e = emitter(p.clone(), s, &st).unwrap();
    let r = connect(&e, &delay, &PortPairing::new(&[("src", "in")])).unwrap();
    assert_eq!(r.inputs().dim(), 1);
    let outb = &r.outputs().bases()[0];
    let k = &r.top().kraus()[0];
    let y0 = outb.index_of_photons(&[(1, 0)]).unwrap();
    let y1 = outb.index_of_photons(&[(1, 1)]).unwrap();
    assert!((k[(y0, 0)] - c(0.6, 0.0)).norm() < 1e-12);
    assert!((k[(y1, 0)] - c(0.0, 0.8)).norm() < 1e-12);
}

#[test]
fn pairing_errors() {
    let mut rng = seeded(19);
    let rp = random_pair(&mut rng).unwrap();
    let bad = PortPairing::new(&[("nope", "nope")]);
    assert!(matches!(connect(&rp.a, &rp.b, &bad), Err(Error::InvalidPairing(_))));
    let twice = PortPairing { pairs: vec![rp.pairing.pairs[0].clone(), rp.pairing.pairs[0].clone()] };
    assert!(matches!(connect(&rp.a, &rp.b, &twice), Err(Error::InvalidPairing(_))));
    assert!(matches!(connect_channels(rp.a.top(), rp.a.top(), &PortPairing::default()), Err(Error::NameCollision(_))));
    let other = Arc::new(Poset::chain(rp.a.poset().len() + 1));
    let d = delayed_identity(other, 1, 1, 1).unwrap();
    assert!(matches!(parallel(&rp.a, &d), Err(Error::PosetMismatch)));
}
