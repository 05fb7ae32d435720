//! Causal boxes over finite posets and truncated Fock spaces.

pub mod causalbox;
pub mod channel;
pub mod comb;
pub mod distance;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod network;
pub mod poset;
pub mod random;
pub mod switchdemo;

pub use causalbox::{CausalBox, SequenceRep, ValidationReport};
pub use channel::{Channel, Isometry};
pub use error::{Error, Result};
pub use fock::{FockBasis, Space, SpaceSplit, Split, StateVector, WireSpec};
pub use linalg::{CMat, CVec, C64};
pub use network::{connect, loop_box, loop_partial, parallel, PortPairing};
pub use poset::{CausalityFn, Cut, Poset};
