//! Numerical workbench for extended binomial bosonic codes.
//!
//! Codewords live on truncated multi-mode Fock spaces ([`fock`]), are damaged
//! by amplitude damping and free evolution ([`channels`]), and are checked
//! against approximate Knill–Laflamme conditions ([`kl`]), syndrome decoding
//! and recovery ([`syndrome`], [`recovery`]), and logical operations
//! ([`logical`]).

pub mod budget;
pub mod channels;
pub mod codes;
pub mod error;
pub mod fock;
pub mod kl;
pub mod logical;
pub mod recovery;
pub mod report;
pub mod syndrome;

pub use error::{Error, Result};
pub use num_complex::Complex64;
