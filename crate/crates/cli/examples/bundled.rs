//! Regenerates the documents in `networks/`: `cargo run -p causalbox-cli --example bundled`.

use std::path::Path;
use std::sync::Arc;

use causalbox::comb::{delayed_identity, emitter, zero_delay_identity};
use causalbox::linalg::c;
use causalbox::random::{random_triple, seeded};
use causalbox::switchdemo::{qs_box, switch_combs, SwitchConfig};
use causalbox::{CMat, CVec, CausalBox, Poset, Space, StateVector, WireSpec};
use causalbox_cli::doc::{to_json, NetworkDoc, PairDoc};

/// Merges one-box documents on the same poset into one network.
fn network(parts: &[NetworkDoc], pairs: &[(&str, &str)]) -> NetworkDoc {
    let mut doc = parts[0].clone();
    for p in &parts[1..] {
        doc.wires.extend(p.wires.clone());
        doc.boxes.extend(p.boxes.clone());
    }
    doc.pairings = pairs.iter().map(|(o, i)| PairDoc { out: o.to_string(), input: i.to_string() }).collect();
    doc
}

fn write(dir: &Path, name: &str, doc: &NetworkDoc) {
    std::fs::write(dir.join(name), to_json(doc) + "\n").unwrap();
}

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("networks");
    std::fs::create_dir_all(&dir).unwrap();

    let h = std::f64::consts::FRAC_1_SQRT_2;
    let cfg = SwitchConfig {
        u: CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]),
        v: CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]),
        alpha: c(h, 0.0),
        beta: c(h, 0.0),
        phi: CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]),
    };
    let (p, [_, u, v]) = switch_combs(&cfg).unwrap();
    let parts = [
        NetworkDoc::from_box("QS", &qs_box().unwrap()),
        NetworkDoc::from_box("U", &u.to_box(p.clone()).unwrap()),
        NetworkDoc::from_box("V", &v.to_box(p).unwrap()),
    ];
    write(&dir, "qswitch.json", &network(&parts, &[("C", "C"), ("D", "D"), ("E", "E"), ("F", "F")]));

    let chain3 = Arc::new(Poset::chain(3));
    let z = zero_delay_identity(&chain3, 2, 1).unwrap();
    let zb = CausalBox::new_unchecked(chain3.clone(), z, chain3.strict_past_causality(), true).unwrap();
    write(&dir, "zero_delay.json", &NetworkDoc::from_box("zero_delay", &zb));
    write(&dir, "delay_line.json", &NetworkDoc::from_box("delay", &delayed_identity(chain3, 2, 1, 1).unwrap()));

    let chain2 = Arc::new(Poset::chain(2));
    let w = WireSpec::from_indices(&chain2, "y", 2, [0], 1).unwrap();
    let s = Space::new(vec![w]).unwrap();
    for v in 0..2 {
        let st = StateVector::new(s.bases()[0].clone(), &[(vec![(0, v)], c(1.0, 0.0))], false).unwrap();
        let e = emitter(chain2.clone(), s.clone(), &st).unwrap();
        write(&dir, &format!("emitter{v}.json"), &NetworkDoc::from_box(&format!("emit{v}"), &e));
    }

    let mut rng = seeded(7);
    let t = loop {
        let t = random_triple(&mut rng).unwrap();
        if !t.p13.pairs.is_empty() {
            break t;
        }
    };
    let parts: Vec<NetworkDoc> = t.boxes.iter().zip(["first", "second", "third"]).map(|(b, n)| NetworkDoc::from_box(n, b)).collect();
    let pairs: Vec<(String, String)> = t.p12.pairs.iter().chain(&t.p23.pairs).chain(&t.p13.pairs).cloned().collect();
    let pairs: Vec<(&str, &str)> = pairs.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    write(&dir, "pipeline.json", &network(&parts, &pairs));
}
