use causalbox::linalg::{c, max_abs_diff, projector, CMat, CVec};
use causalbox::switchdemo::{expected_output, fidelity, qubit_index, run_switch, SwitchConfig};
use causalbox::Error;

fn gate(entries: [(f64, f64); 4]) -> CMat {
    CMat::from_row_slice(2, 2, &entries.map(|(r, i)| c(r, i)))
}

fn x() -> CMat {
    gate([(0.0, 0.0), (1.0, 0.0), (1.0, 0.0), (0.0, 0.0)])
}

fn z() -> CMat {
    gate([(1.0, 0.0), (0.0, 0.0), (0.0, 0.0), (-1.0, 0.0)])
}

fn ket(a: (f64, f64), b: (f64, f64)) -> CVec {
    CVec::from_vec(vec![c(a.0, a.1), c(b.0, b.1)])
}

#[test]
fn vacuum_is_slice_zero() {
    assert_eq!(qubit_index(0), 1);
    assert_eq!(qubit_index(1), 2);
}

#[test]
fn identity_gates_pass_the_target_through() {
    let h = 0.5f64.sqrt();
    let cfg = SwitchConfig {
        u: CMat::identity(2, 2),
        v: CMat::identity(2, 2),
        alpha: c(h, 0.0),
        beta: c(0.0, h),
        phi: ket((0.6, 0.0), (0.0, 0.8)),
    };
    let run = run_switch(&cfg, false).unwrap();
    let exp = expected_output(&cfg);
    assert!((fidelity(&run.final_density, &exp) - 1.0).abs() < 1e-12);
    assert!(max_abs_diff(&run.network_density, &projector(&exp)) < 1e-10);
}

#[test]
fn control_zero_applies_v_then_u() {
    // beta = 0: output U V |0> = X Z |0> = X |0> = |1>.
    let cfg = SwitchConfig { u: x(), v: z(), alpha: c(1.0, 0.0), beta: c(0.0, 0.0), phi: ket((1.0, 0.0), (0.0, 0.0)) };
    let exp = expected_output(&cfg);
    assert!((exp[qubit_index(0) * 3 + qubit_index(1)] - c(1.0, 0.0)).norm() < 1e-15);
    let run = run_switch(&cfg, true).unwrap();
    assert!((fidelity(&run.final_density, &exp) - 1.0).abs() < 1e-12);
    assert!((fidelity(&run.network_density, &exp) - 1.0).abs() < 1e-10);
    assert_eq!(run.step_states.len(), 6);
}

#[test]
fn noncommuting_gates_give_a_superposition_of_orders() {
    // X Z |+> = -|-> while Z X |+> = |->.
    let h = 0.5f64.sqrt();
    let cfg = SwitchConfig { u: x(), v: z(), alpha: c(h, 0.0), beta: c(h, 0.0), phi: ket((h, 0.0), (h, 0.0)) };
    let run = run_switch(&cfg, true).unwrap();
    let exp = expected_output(&cfg);
    assert!((fidelity(&run.final_density, &exp) - 1.0).abs() < 1e-12);
    assert!((fidelity(&run.network_density, &exp) - 1.0).abs() < 1e-10);
    assert_eq!(run.counters.len(), 1);
    assert!((run.counters[&vec![1, 1]] - 1.0).abs() < 1e-12);
}

#[test]
fn bad_configurations_are_rejected() {
    let cfg = SwitchConfig {
        u: CMat::identity(2, 2) * c(2.0, 0.0),
        v: z(),
        alpha: c(1.0, 0.0),
        beta: c(0.0, 0.0),
        phi: ket((1.0, 0.0), (0.0, 0.0)),
    };
    assert!(matches!(run_switch(&cfg, false), Err(Error::Config(_))));
    let cfg = SwitchConfig { u: x(), v: z(), alpha: c(1.0, 0.0), beta: c(1.0, 0.0), phi: ket((1.0, 0.0), (0.0, 0.0)) };
    assert!(matches!(run_switch(&cfg, false), Err(Error::Config(_))));
}

#[test]
fn oracle_acts_on_every_simultaneous_message() {
    use causalbox::fock::{Space, WireSpec};
    use causalbox::linalg::{random_unitary, CVec as V};
    use causalbox::random::seeded;
    use causalbox::switchdemo::oracle_comb;
    use causalbox::Poset;
    use std::sync::Arc;

    let p = Arc::new(Poset::chain(2));
    let wi = WireSpec::from_indices(&p, "in", 2, [0], 2).unwrap();
    let wo = WireSpec::from_indices(&p, "out", 2, [1], 2).unwrap();
    let u = random_unitary(2, &mut seeded(41));
    let b = oracle_comb(&p, "U", wi, wo, &u).unwrap().to_box(p.clone()).unwrap();
    let (si, so) = (Space::new(vec![b.inputs().wires()[0].clone()]).unwrap(), b.outputs().clone());
    let mut x = V::zeros(si.dim());
    x[si.bases()[0].index_of_photons(&[(0, 0), (0, 0)]).unwrap()] = c(1.0, 0.0);
    let rho = b.top().apply(&projector(&x)).unwrap();
    // (u00 a0* + u10 a1*)^2 / sqrt 2 on the vacuum.
    let ob = &so.bases()[0];
    let mut want = V::zeros(so.dim());
    want[ob.index_of_photons(&[(1, 0), (1, 0)]).unwrap()] = u[(0, 0)] * u[(0, 0)];
    want[ob.index_of_photons(&[(1, 0), (1, 1)]).unwrap()] = u[(0, 0)] * u[(1, 0)] * c(2.0f64.sqrt(), 0.0);
    want[ob.index_of_photons(&[(1, 1), (1, 1)]).unwrap()] = u[(1, 0)] * u[(1, 0)];
    assert!(max_abs_diff(&rho, &projector(&want)) < 1e-12);
}
