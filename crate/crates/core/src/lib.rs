//! Generalized Rabi model toolkit.
//!
//! A single bosonic mode coupled to a two-level system with independent
//! co-rotating (`g1`) and counter-rotating (`g2`) couplings,
//!
//! ```text
//! H = ω a†a + (Δ/2) σz + g1 (a†σ- + a σ+) + g2 (a†σ+ + a σ-) + λ a†a σz
//! ```
//!
//! in natural units (ħ = 1).  On the line `g1² - g2² = Δω` (for `λ = 0`) the
//! model carries an unbroken N = 2 supersymmetry: a nilpotent supercharge `Q`
//! with `{Q, Q†} = diag(H+, H-)`, a doubly degenerate ground state, and
//! Witten index 2.
//!
//! The crate provides:
//!
//! * [`operators`] — truncated Fock-space operator algebra (ladder operators,
//!   tensor products, displacement operators, magnetic translations);
//! * [`model`] — Hamiltonian assembly, parity, the SUSY-line conditions, and
//!   the two physical parameter mappings (Rashba–Dresselhaus, Λ-scheme);
//! * [`susy`] — supercharges, the SUSY algebra check, zero modes by two
//!   independent constructions, and the Witten index;
//! * [`dynamics`] — dense spectra, coupling sweeps, coupled-cavity arrays,
//!   and closed-system quench dynamics with collapse/revival estimates;
//! * [`lindblad`] — the dressed-state Lindblad dissipator, vectorized
//!   Liouvillian, its degenerate stationary manifold, and the conserved
//!   quantities that constrain the dissipative flow.
//!
//! Everything is dense, double precision, and pure: all operations are
//! functions of their inputs with immutable outputs, safe to call from many
//! threads.

pub mod dynamics;
pub mod error;
pub mod lindblad;
pub(crate) mod linalg;
pub mod model;
pub mod operators;
pub mod susy;

pub use error::{Error, Result};
pub use model::{GrParams, LambdaSchemeParams, RdParams};
pub use operators::{OperatorMatrix, SpaceTag, SpinOperatorLabel, Truncation};

/// Complex scalar used throughout (re-export of `num_complex::Complex<f64>`).
pub use faer::c64;
