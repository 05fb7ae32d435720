//! JSON network documents: a poset, named wires, boxes and port pairings.
//!
//! Complex numbers are `[re, im]`; matrices are row-major, either dense (`data`) or as
//! `[row, col, [re, im]]` triples (`entries`).

use std::collections::BTreeMap;
use std::sync::Arc;

use causalbox::channel::Channel;
use causalbox::{CMat, CausalBox, CausalityFn, Poset, Space, WireSpec, C64};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDoc {
    pub poset: PosetDoc,
    pub wires: BTreeMap<String, WireDoc>,
    pub boxes: Vec<BoxDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pairings: Vec<PairDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub commands: Option<CommandsDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PosetDoc {
    pub elements: Vec<String>,
    #[serde(default)]
    pub covers: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireDoc {
    pub dim: usize,
    pub positions: Vec<String>,
    pub truncation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxDoc {
    pub name: String,
    #[serde(default)]
    pub inputs: Vec<String>,
    #[serde(default)]
    pub outputs: Vec<String>,
    /// Pointwise causality function; strict past when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi: Option<BTreeMap<String, Vec<String>>>,
    #[serde(default = "yes")]
    pub normalized: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kraus: Option<Vec<MatrixDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choi: Option<MatrixDoc>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixDoc {
    pub rows: usize,
    pub cols: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entries: Option<Vec<(usize, usize, [f64; 2])>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairDoc {
    pub out: String,
    #[serde(rename = "in")]
    pub input: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandsDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
}

impl MatrixDoc {
    /// Dense when at least a quarter of the entries are nonzero, sparse otherwise.
    pub fn from_matrix(m: &CMat) -> MatrixDoc {
        let (rows, cols) = m.shape();
        let nonzero = m.iter().filter(|z| z.re != 0.0 || z.im != 0.0).count();
        if nonzero * 4 >= rows * cols {
            let data = (0..rows).flat_map(|r| (0..cols).map(move |c| (r, c))).map(|(r, c)| [m[(r, c)].re, m[(r, c)].im]).collect();
            MatrixDoc { rows, cols, data: Some(data), entries: None }
        } else {
            let mut entries = Vec::with_capacity(nonzero);
            for r in 0..rows {
                for c in 0..cols {
                    let z = m[(r, c)];
                    if z.re != 0.0 || z.im != 0.0 {
                        entries.push((r, c, [z.re, z.im]));
                    }
                }
            }
            MatrixDoc { rows, cols, data: None, entries: Some(entries) }
        }
    }

    pub fn to_matrix(&self, what: &str) -> Result<CMat, CliError> {
        let mut m = CMat::zeros(self.rows, self.cols);
        match (&self.data, &self.entries) {
            (Some(data), None) => {
                if data.len() != self.rows * self.cols {
                    return Err(CliError::Parse(format!("{what}: {} entries for a {}x{} matrix", data.len(), self.rows, self.cols)));
                }
                for (i, z) in data.iter().enumerate() {
                    m[(i / self.cols, i % self.cols)] = C64::new(z[0], z[1]);
                }
            }
            (None, Some(entries)) => {
                for &(r, c, z) in entries {
                    if r >= self.rows || c >= self.cols {
                        return Err(CliError::Parse(format!("{what}: entry ({r}, {c}) outside {}x{}", self.rows, self.cols)));
                    }
                    m[(r, c)] = C64::new(z[0], z[1]);
                }
            }
            _ => return Err(CliError::Parse(format!("{what}: give exactly one of `data` and `entries`"))),
        }
        Ok(m)
    }
}

/// A parsed document: the poset, the wire table and one unvalidated box per entry.
pub struct Network {
    pub poset: Arc<Poset>,
    pub wires: BTreeMap<String, WireSpec>,
    pub boxes: Vec<LoadedBox>,
    pub pairings: Vec<(String, String)>,
    pub commands: CommandsDoc,
}

/// A box as read from a document; `built` fails when the payload is not a CP map of the right shape.
pub struct LoadedBox {
    pub name: String,
    pub built: Result<CausalBox, causalbox::Error>,
}

pub fn parse(text: &str) -> Result<NetworkDoc, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
}

pub fn to_json(doc: &NetworkDoc) -> String {
    serde_json::to_string_pretty(doc).expect("documents serialize")
}

fn shape(e: causalbox::Error) -> CliError {
    CliError::Parse(e.to_string())
}

fn space(names: &[String], wires: &BTreeMap<String, WireSpec>, what: &str) -> Result<Space, CliError> {
    let list = names
        .iter()
        .map(|n| wires.get(n).cloned().ok_or_else(|| CliError::Parse(format!("{what}: unknown wire `{n}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    Space::new(list).map_err(shape)
}

pub fn causality(poset: &Poset, chi: &Option<BTreeMap<String, Vec<String>>>) -> Result<CausalityFn, causalbox::Error> {
    match chi {
        None => Ok(poset.strict_past_causality()),
        Some(map) => poset.causality_fn(map),
    }
}

impl NetworkDoc {
    pub fn load(&self) -> Result<Network, CliError> {
        let poset = Arc::new(Poset::new(&self.poset.elements, &self.poset.covers).map_err(shape)?);
        let mut wires = BTreeMap::new();
        for (name, w) in &self.wires {
            let spec = WireSpec::new(&poset, name, w.dim, &w.positions, w.truncation).map_err(shape)?;
            wires.insert(name.clone(), spec);
        }
        let mut boxes = Vec::with_capacity(self.boxes.len());
        let mut seen = std::collections::BTreeSet::new();
        for b in &self.boxes {
            if !seen.insert(b.name.clone()) {
                return Err(CliError::Parse(format!("box `{}` defined twice", b.name)));
            }
            let what = format!("box `{}`", b.name);
            let si = space(&b.inputs, &wires, &what)?;
            let so = space(&b.outputs, &wires, &what)?;
            let chi = causality(&poset, &b.chi).map_err(|e| CliError::Parse(format!("{what}: {e}")))?;
            let top = match (&b.kraus, &b.choi) {
                (Some(ks), None) => {
                    let ms = ks.iter().map(|k| k.to_matrix(&what)).collect::<Result<Vec<_>, _>>()?;
                    Channel::from_kraus_raw(ms, si, so)
                }
                (None, Some(j)) => Channel::from_choi(&j.to_matrix(&what)?, si, so),
                _ => return Err(CliError::Parse(format!("{what}: give exactly one of `kraus` and `choi`"))),
            };
            let built = match top {
                Ok(top) => CausalBox::new_unchecked(poset.clone(), top, chi, b.normalized),
                Err(e @ causalbox::Error::NotCp(_)) => Err(e),
                Err(e) => return Err(CliError::Parse(format!("{what}: {e}"))),
            };
            boxes.push(LoadedBox { name: b.name.clone(), built });
        }
        let pairings = self.pairings.iter().map(|p| (p.out.clone(), p.input.clone())).collect();
        Ok(Network { poset, wires, boxes, pairings, commands: self.commands.clone().unwrap_or_default() })
    }

    /// A one-box document holding `b` under `name`.
    pub fn from_box(name: &str, b: &CausalBox) -> NetworkDoc {
        let p = b.poset();
        let label = |t: usize| p.label(t).to_string();
        let covers = p.covers().map(|(a, c)| (a.to_string(), c.to_string())).collect();
        let mut wires = BTreeMap::new();
        for w in b.inputs().wires().iter().chain(b.outputs().wires()) {
            wires.insert(
                w.name.clone(),
                WireDoc { dim: w.msg_dim, positions: w.positions.iter().map(|&t| label(t)).collect(), truncation: w.truncation },
            );
        }
        let mut chi = BTreeMap::new();
        for t in 0..p.len() {
            let img: Vec<String> = b.chi().image(t).ones().map(label).collect();
            if !img.is_empty() {
                chi.insert(label(t), img);
            }
        }
        let names = |s: &Space| s.wires().iter().map(|w| w.name.clone()).collect();
        NetworkDoc {
            poset: PosetDoc { elements: p.labels().to_vec(), covers },
            wires,
            boxes: vec![BoxDoc {
                name: name.to_string(),
                inputs: names(b.inputs()),
                outputs: names(b.outputs()),
                chi: Some(chi),
                normalized: b.is_normalized(),
                kraus: Some(b.top().kraus().iter().map(MatrixDoc::from_matrix).collect()),
                choi: None,
            }],
            pairings: Vec::new(),
            commands: None,
        }
    }
}
