//! Reversible coagulation-fragmentation heat bath for the pinning model.

// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// `len` is the system length, not a container size.
#![allow(clippy::len_without_is_empty)]

pub mod configuration;
pub mod coupling;
pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod exact;
pub mod front;
pub mod harness;
pub mod laws;
pub mod rng;
pub mod stats;

pub use configuration::Configuration;
pub use error::{Error, Result};
pub use laws::{KernelParams, KernelTable, Phase};
