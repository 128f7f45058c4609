//! Low-rank feature representations.
//!
//! Conjunctive lexical features (label, non-lexical property and `n` words)
//! are scored by a parameter tensor constrained to Tucker or CP form, so a
//! feature's score is a contraction of small hidden vectors instead of a
//! lookup in a huge sparse weight table.

pub mod bench;
pub mod cli;
pub mod error;
pub mod features;
pub mod flops;
pub mod io;
pub mod model;
pub mod par;
pub mod pipeline;
pub mod scoring;
pub mod synth;
pub mod tensor;
pub mod training;

pub use error::{Error, ErrorClass, Result};
