//! Master-equation generators, spectra, steady states and time evolution.

mod evolve;
mod liouvillian;
mod reduced;

pub use evolve::{
    effective_hamiltonian, evolve, evolve_adjoint, evolve_from, lindblad_rhs, EvolutionResult,
    EvolveOptions,
};
pub(crate) use evolve::{jump_pairs, JumpPair};
pub use liouvillian::{
    alpha0_confinement_closed_form, build_liouvillian, gap_from_eigenvalues, spectral_gap,
    spectral_gap_capped, steady_state, steady_state_capped, GapReport, Liouvillian, SteadyState,
    DEFAULT_BLOCK_CAP, STEADY_TOL,
};
pub use reduced::{
    alpha0_excited_generator, alpha0_excited_rates, alpha0_reduced_gap, alpha0_reduced_spectrum,
};
