//! Semiclassical evolution of multi-time correlations of quantum observables in
//! the Weyl-Wigner phase-space representation.
//!
//! The trace of a product of observables interspersed with unitary evolutions is
//! evaluated as a phase-space integral whose kernel is the trace of a single
//! compound unitary operator. Classically this kernel corresponds to a compound
//! trajectory: flow segments joined by point reflections through fixed centres.
//! The crate provides
//!
//! * symplectic geometry of centre-defined polygons ([`phase_space`]),
//! * Weyl/chord symbols, Wigner functions and Moyal products ([`symbols`], [`poly`]),
//! * classical flows with monodromies and centre actions ([`dynamics`]),
//! * semiclassical Weyl propagators with caustic bookkeeping ([`propagators`]),
//! * compound trajectories and their initial-value representation ([`compound`]),
//! * periodic-orbit search and the trace formula ([`periodic_orbits`]),
//! * correlation estimators, echoes included ([`correlation`]),
//! * and an exact truncated-Hilbert-space oracle used as ground truth ([`oracle`]).
//!
//! Everything is dimension-generic in the number of degrees of freedom `N`;
//! phase-space vectors are ordered `(p_1..p_N, q_1..q_N)`. For quadratic
//! Hamiltonians the semiclassical machinery is exact and the test suite holds it
//! to that standard.

pub mod compound;
pub mod correlation;
pub mod dynamics;
pub mod error;
pub mod oracle;
pub mod periodic_orbits;
pub mod phase_space;
pub mod poly;
pub mod propagators;
pub mod symbols;

pub use error::{Error, Result};
pub use phase_space::{Chord, PhasePoint, SymplecticForm};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
