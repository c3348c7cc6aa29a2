//! Classical desk-scale laboratory for related-key key recovery on toy block
//! ciphers via Bernstein-Vazirani sampling.
//!
//! The library simulates, at the probability-distribution level, the quantum
//! related-key attack pipeline:
//!
//! * [`gf2`] — bit-vector arithmetic over F_2 and affine linear-system
//!   machinery (bit-packed Gaussian elimination, coset enumeration, tagged
//!   intersection).
//! * [`boolfn`] — truth-table Boolean/vector functions, fast Walsh-Hadamard
//!   spectra, linear structures, sigma-close structures and differential bias.
//! * [`cipher`] — toy block-cipher families (Even-Mansour, SPN, ideal random)
//!   and the derived attack functions built from them.
//! * [`qoracle`] — the related-key oracle, seeded RNG streams and the
//!   Bernstein-Vazirani sampler (measurement outcomes drawn from the squared
//!   Walsh distribution, never from explicit amplitudes).
//! * [`attack`] — structure search and key recovery, candidate verification,
//!   condition diagnostics and probability bounds.
//! * [`costmodel`] — symbolic gate/query/qubit accounting.
//! * [`harness`] — seeded, reproducible experiment batches, sweeps and
//!   machine-readable reports.
//!
//! All randomness flows from one master seed through a documented derivation
//! tree, so every experiment is bit-reproducible regardless of thread count.

pub mod attack;
pub mod boolfn;
pub mod cipher;
pub mod costmodel;
mod error;
pub mod gf2;
pub mod harness;
pub mod qoracle;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
