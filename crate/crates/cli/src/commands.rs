use std::collections::BTreeSet;

use causalbox::distance::{advantage, distance_lower_bound, witness_distinguisher, Family};
use causalbox::switchdemo::{expected_output, fidelity, qubit_index, run_switch, RegisterState, SwitchConfig};
use causalbox::{connect, loop_box, parallel, CMat, CVec, CausalBox, Error, PortPairing, C64};
use serde::Serialize;
use serde_json::{json, Value};

use crate::doc::{Network, NetworkDoc};
use crate::CliError;

/// JSON report plus a one-line human summary.
pub struct Report {
    pub json: Value,
    pub summary: String,
    /// Extra artifact written by `--out`.
    pub artifact: Option<String>,
    pub failed: bool,
}

fn cz(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

#[derive(Serialize)]
struct Verdict {
    name: String,
    cp: bool,
    tp: Option<bool>,
    causal: Option<bool>,
    tp_residual: Option<f64>,
    max_residual: Option<f64>,
    violating_cut: Option<Vec<String>>,
    error: Option<String>,
}

fn verdict(name: &str, built: &Result<CausalBox, Error>) -> Verdict {
    let mut v = Verdict {
        name: name.to_string(),
        cp: true,
        tp: None,
        causal: None,
        tp_residual: None,
        max_residual: None,
        violating_cut: None,
        error: None,
    };
    let b = match built {
        Ok(b) => b,
        Err(e) => {
            v.cp = !matches!(e, Error::NotCp(_));
            v.error = Some(e.to_string());
            return v;
        }
    };
    v.tp_residual = Some(b.top().tp_residual());
    match b.validate() {
        Ok(r) => {
            v.tp = Some(true);
            v.causal = Some(true);
            v.max_residual = Some(r.max_residual);
        }
        Err(e) => {
            match &e {
                Error::NotTp(_) | Error::NotTni(_) => v.tp = Some(false),
                Error::CausalityViolation { cut, residual } => {
                    v.tp = Some(true);
                    v.causal = Some(false);
                    v.violating_cut = Some(cut.clone());
                    v.max_residual = Some(*residual);
                }
                _ => {}
            }
            v.error = Some(e.to_string());
        }
    }
    v
}

fn is_valid(v: &Verdict) -> bool {
    v.cp && v.tp == Some(true) && v.causal == Some(true)
}

/// Errors of composition that come from the document rather than from the boxes.
fn composition_error(e: Error) -> CliError {
    match e {
        Error::CausalityViolation { .. } | Error::NotTp(_) | Error::NotTni(_) | Error::NotCp(_) => CliError::Invalid(e.to_string()),
        other => CliError::Parse(other.to_string()),
    }
}

/// Composes the document's boxes in listed order; pairs inside one box become loops.
pub fn compose_network(net: &Network) -> Result<CausalBox, CliError> {
    if net.boxes.is_empty() {
        return Err(CliError::Parse("document has no boxes".into()));
    }
    let mut owner_out = std::collections::HashMap::new();
    let mut owner_in = std::collections::HashMap::new();
    let mut boxes = Vec::with_capacity(net.boxes.len());
    for (k, lb) in net.boxes.iter().enumerate() {
        let b = lb.built.as_ref().map_err(|e| CliError::Invalid(format!("box `{}`: {e}", lb.name)))?;
        for w in b.outputs().wires() {
            owner_out.insert(w.name.clone(), k);
        }
        for w in b.inputs().wires() {
            owner_in.insert(w.name.clone(), k);
        }
        boxes.push(b.clone());
    }
    let mut placed: Vec<Option<(usize, usize)>> = Vec::with_capacity(net.pairings.len());
    for (o, i) in &net.pairings {
        match (owner_out.get(o), owner_in.get(i)) {
            (Some(&a), Some(&b)) => placed.push(Some((a, b))),
            _ => return Err(CliError::Parse(format!("pairing {o} -> {i} does not name an output and an input"))),
        }
    }
    let mut acc: Option<CausalBox> = None;
    for (k, b) in boxes.iter().enumerate() {
        let mut b = b.clone();
        for ((o, i), pl) in net.pairings.iter().zip(&placed) {
            if *pl == Some((k, k)) {
                b = loop_box(&b, o, i).map_err(composition_error)?;
            }
        }
        acc = Some(match acc {
            None => b,
            Some(a) => {
                let cross: Vec<(String, String)> = net
                    .pairings
                    .iter()
                    .zip(&placed)
                    .filter(|(_, pl)| matches!(pl, Some((x, y)) if (*x == k) != (*y == k) && *x <= k && *y <= k))
                    .map(|(p, _)| p.clone())
                    .collect();
                if cross.is_empty() {
                    parallel(&a, &b).map_err(composition_error)?
                } else {
                    connect(&a, &b, &PortPairing { pairs: cross }).map_err(composition_error)?
                }
            }
        });
    }
    Ok(acc.expect("at least one box"))
}

pub fn validate(doc: &NetworkDoc) -> Result<Report, CliError> {
    let net = doc.load()?;
    let verdicts: Vec<Verdict> = net.boxes.iter().map(|b| verdict(&b.name, &b.built)).collect();
    let mut failed = verdicts.iter().any(|v| !is_valid(v));
    let composite = if net.boxes.len() > 1 || !net.pairings.is_empty() {
        if failed {
            None
        } else {
            let v = match compose_network(&net) {
                Ok(b) => verdict("composite", &Ok(b)),
                Err(CliError::Invalid(msg)) => {
                    let mut v = verdict("composite", &Err(Error::Config(msg.clone())));
                    v.error = Some(msg);
                    v
                }
                Err(e) => return Err(e),
            };
            failed |= !is_valid(&v);
            Some(v)
        }
    } else {
        None
    };
    let mut lines = Vec::new();
    for v in verdicts.iter().chain(composite.iter()) {
        let state = if is_valid(v) {
            "valid".to_string()
        } else if let Some(cut) = &v.violating_cut {
            format!("causality violated on cut {{{}}}", cut.join(", "))
        } else {
            format!("invalid: {}", v.error.clone().unwrap_or_default())
        };
        lines.push(format!("{}: {state}", v.name));
    }
    Ok(Report {
        json: json!({ "valid": !failed, "boxes": verdicts, "composite": composite }),
        summary: lines.join("\n"),
        artifact: None,
        failed,
    })
}

pub fn compose(doc: &NetworkDoc) -> Result<Report, CliError> {
    let net = doc.load()?;
    let b = compose_network(&net)?;
    let name = net.boxes.iter().map(|b| b.name.as_str()).collect::<Vec<_>>().join("*");
    let out = NetworkDoc::from_box(&name, &b);
    let text = crate::doc::to_json(&out);
    Ok(Report {
        json: serde_json::to_value(&out).expect("documents serialize"),
        summary: format!(
            "composed {} boxes into `{name}`: {} inputs, {} outputs, Kraus rank {}",
            net.boxes.len(),
            b.inputs().wires().len(),
            b.outputs().wires().len(),
            b.top().kraus_rank()
        ),
        artifact: Some(text),
        failed: false,
    })
}

pub struct DistanceArgs {
    pub seed: Option<u64>,
    pub budget: Option<usize>,
    pub grid: Option<usize>,
}

pub fn distance(a: &NetworkDoc, b: &NetworkDoc, args: &DistanceArgs) -> Result<Report, CliError> {
    let (na, nb) = (a.load()?, b.load()?);
    let defaults = &na.commands;
    let seed = args.seed.or(defaults.seed).ok_or_else(|| CliError::Parse("distance samples distinguishers: pass --seed".into()))?;
    let grid = args.grid.or(defaults.grid).unwrap_or(4);
    let (x, y) = (compose_network(&na)?, compose_network(&nb)?);
    if x.poset().fingerprint() != y.poset().fingerprint() {
        return Err(CliError::Parse("the two systems live on different posets".into()));
    }
    let fam = Family::product_states(x.poset().clone(), x.inputs(), grid).map_err(|e| CliError::Parse(e.to_string()))?;
    let budget = args.budget.or(defaults.budget).unwrap_or(fam.len());
    let r = distance_lower_bound(&x, &y, &fam, budget, seed).map_err(|e| CliError::Parse(e.to_string()))?;
    let witness = match r.witness {
        None => Value::Null,
        Some(i) => {
            let m = &fam.members[i];
            let p = x.poset();
            let d = witness_distinguisher(&fam, m, &x, &y).map_err(|e| CliError::Parse(e.to_string()))?;
            let (termination, realized) = match &d {
                Some(d) => {
                    (Some(p.label(d.termination).to_string()), Some(advantage(d, &x, &y).map_err(|e| CliError::Parse(e.to_string()))?))
                }
                None => (None, None),
            };
            json!({
                "member": i,
                "cut": m.cut.labels(p),
                "state": m.label,
                "inputs": x.inputs().wires().iter().map(|w| w.name.clone()).collect::<Vec<_>>(),
                "termination": termination,
                "realized_advantage": realized,
            })
        }
    };
    Ok(Report {
        json: json!({
            "best": r.best,
            "witness": witness,
            "evaluated": r.evaluated,
            "family_size": fam.len(),
            "budget": budget,
            "grid": grid,
            "seed": r.seed,
        }),
        summary: format!("best advantage {:.6} over {} of {} distinguishers (seed {seed})", r.best, r.evaluated, fam.len()),
        artifact: None,
        failed: false,
    })
}

/// Single-position wire slice index -> `vac`, `0`, `1`.
fn slice_label(i: usize) -> String {
    if i == 0 {
        "vac".into()
    } else if i == qubit_index(0) {
        "0".into()
    } else if i == qubit_index(1) {
        "1".into()
    } else {
        format!("#{i}")
    }
}

fn state_json(s: &RegisterState) -> Value {
    let wires: BTreeSet<&str> = ["A", "B", "C", "D", "E", "F", "G", "H"].into_iter().collect();
    let terms: Vec<Value> = s
        .amplitudes
        .iter()
        .map(|(k, a)| {
            let mut regs = serde_json::Map::new();
            for (name, &v) in s.registers.iter().zip(k) {
                if wires.contains(name.as_str()) {
                    if v != 0 {
                        regs.insert(name.clone(), json!(slice_label(v)));
                    }
                } else {
                    regs.insert(name.clone(), json!(v));
                }
            }
            json!({ "registers": regs, "amplitude": cz(*a) })
        })
        .collect();
    Value::Array(terms)
}

pub fn qswitch(cfg: &SwitchConfig, trace: bool) -> Result<Report, CliError> {
    cfg.validate().map_err(|e| CliError::Parse(e.to_string()))?;
    let run = run_switch(cfg, true).map_err(|e| CliError::Parse(e.to_string()))?;
    let exp = expected_output(cfg);
    let last = run.step_states.last().expect("six positions");
    let mut fin = Vec::new();
    for (k, a) in &last.amplitudes {
        let g = k[last.register("G").expect("G")];
        let h = k[last.register("H").expect("H")];
        fin.push(json!({ "G": slice_label(g), "H": slice_label(h), "amplitude": cz(*a) }));
    }
    let f_sim = fidelity(&run.final_density, &exp);
    let f_net = fidelity(&run.network_density, &exp);
    let counters: Vec<Value> = run.counters.iter().map(|(k, p)| json!({ "U": k[0], "V": k[1], "probability": p })).collect();
    let mut out = json!({
        "final_state": fin,
        "expected": exp.iter().enumerate().filter(|(_, z)| z.norm() > 0.0).map(|(i, z)| json!({
            "G": slice_label(i / 3), "H": slice_label(i % 3), "amplitude": cz(*z)
        })).collect::<Vec<_>>(),
        "fidelity": f_sim,
        "network_fidelity": f_net,
        "counters": counters,
    });
    if trace {
        out["steps"] =
            Value::Array(run.step_states.iter().enumerate().map(|(t, s)| json!({ "position": t + 1, "state": state_json(s) })).collect());
    }
    let failed = f_sim < 1.0 - 1e-9 || f_net < 1.0 - 1e-9;
    Ok(Report {
        json: out,
        summary: format!("quantum switch: fidelity {f_sim:.12} (simulation), {f_net:.12} (composed network)"),
        artifact: None,
        failed,
    })
}

/// A complex number as a JSON number or `[re, im]`.
pub fn parse_complex(s: &str) -> Result<C64, CliError> {
    let v: Value = serde_json::from_str(s).map_err(|e| CliError::Parse(format!("complex `{s}`: {e}")))?;
    complex_value(&v).ok_or_else(|| CliError::Parse(format!("complex `{s}`: expected a number or [re, im]")))
}

fn complex_value(v: &Value) -> Option<C64> {
    match v {
        Value::Number(n) => n.as_f64().map(|x| C64::new(x, 0.0)),
        Value::Array(a) if a.len() == 2 => Some(C64::new(a[0].as_f64()?, a[1].as_f64()?)),
        _ => None,
    }
}

fn complex_list(s: &str, n: usize, what: &str) -> Result<Vec<C64>, CliError> {
    let v: Value = serde_json::from_str(s).map_err(|e| CliError::Parse(format!("{what} `{s}`: {e}")))?;
    let flat: Vec<&Value> = match &v {
        Value::Array(rows) if rows.iter().all(|r| matches!(r, Value::Array(x) if x.len() == 2 && x.iter().all(Value::is_array))) => {
            rows.iter().flat_map(|r| r.as_array().expect("row").iter()).collect()
        }
        Value::Array(items) => items.iter().collect(),
        _ => Vec::new(),
    };
    if flat.len() != n {
        return Err(CliError::Parse(format!("{what} `{s}`: expected {n} complex entries")));
    }
    flat.into_iter().map(|z| complex_value(z).ok_or_else(|| CliError::Parse(format!("{what} `{s}`: bad complex entry {z}")))).collect()
}

/// A named gate (`I`, `X`, `Y`, `Z`, `H`) or four row-major complex entries.
pub fn parse_gate(s: &str) -> Result<CMat, CliError> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let r = |x: f64| C64::new(x, 0.0);
    let named = match s.trim() {
        "I" => Some([r(1.0), r(0.0), r(0.0), r(1.0)]),
        "X" => Some([r(0.0), r(1.0), r(1.0), r(0.0)]),
        "Y" => Some([r(0.0), C64::new(0.0, -1.0), C64::new(0.0, 1.0), r(0.0)]),
        "Z" => Some([r(1.0), r(0.0), r(0.0), r(-1.0)]),
        "H" => Some([r(h), r(h), r(h), r(-h)]),
        _ => None,
    };
    let entries = match named {
        Some(e) => e.to_vec(),
        None => complex_list(s, 4, "gate")?,
    };
    Ok(CMat::from_row_slice(2, 2, &entries))
}

pub fn parse_qubit(s: &str) -> Result<CVec, CliError> {
    Ok(CVec::from_vec(complex_list(s, 2, "state")?))
}
