//! Desk-scale numerics for embezzlement of entanglement.
//!
//! Embezzlement is the catalytic use of an entangled resource state: local
//! unitaries on a bipartite "embezzler" convert one auxiliary entangled state
//! into another while returning the resource almost unchanged. How well a
//! given resource embezzles is controlled entirely by its entanglement
//! spectrum, so every quantity this crate computes reduces to arithmetic on
//! descending, possibly truncated, probability spectra:
//!
//! - [`spectrum`] — the certified sorted-spectrum calculus: [`Spectrum`]
//!   (descending weights plus an exactly accounted truncation tail),
//!   tensor products with top-K truncation, and l1/fidelity distances that
//!   return enclosing [`Interval`]s instead of bare points.
//! - [`models`] — concrete resource families: the harmonic log-weight
//!   family, the geometric (two-atom power) family, and the free-fermion
//!   pipeline from XX/XY spin-chain correlation matrices to half-chain
//!   entanglement spectra.
//! - [`embezzlement`] — the operational quantities: optimal local-conversion
//!   errors for monopartite and bipartite formulations, worst-case error
//!   estimation over target pairs (kappa), universal-embezzler witnesses,
//!   and convergence studies across family sizes.
//! - [`oracle`] (feature `oracle`, default on) — independent validation:
//!   direct minimization over unitary orbits, Schmidt decompositions, and
//!   exact diagonalization of small spin chains, used to certify that the
//!   closed-form spectrum calculus computes the right thing.
//!
//! Truncation is never silent: every routine that drops atoms moves their
//! exact mass into `tail_mass` and returns distances as intervals that are
//! guaranteed to enclose the untruncated value.

pub mod embezzlement;
pub mod models;
#[cfg(feature = "oracle")]
pub mod oracle;
pub mod spectrum;

pub use embezzlement::{
    bipartite_error, convergence_study, kappa_estimate, kappa_max_for_type, monopartite_error,
    vdh_bound, witness_maximal_error, ConvergenceReport, ConvergenceRow, EmbezzleError,
    FactorType, KappaEstimate, SearchConfig, TargetPair, TruncationBudget,
};
pub use models::{
    araki_woods_spectrum, geometric_spectrum, half_chain_occupations, occupations_to_spectrum,
    van_dam_hayden_spectrum, xy_correlation_matrix, EmbezzlerFamily, ModelError,
};
pub use spectrum::{make_spectrum, Interval, Spectrum, SpectrumError};
