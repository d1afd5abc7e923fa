//! Linear-optical multiport modelling.
//!
//! Transfer matrices are indexed `[output][input]`: entry `(k, i)` is the
//! amplitude for a photon entering input port `i` to leave output port `k`.
//!
//! The crate covers three layers:
//!
//! * [`matrix`]: transfer-matrix algebra for directionally-biased
//!   (`U_F Φ U_F`) and directionally-unbiased (`U_B Φ U_F`, with
//!   `U_B = U_Fᵀ`) multiports, gauge canonicalisation and fidelity.
//! * [`interference`]: single-photon amplitude distributions, two-photon
//!   coincidence probabilities, Hong-Ou-Mandel visibility matrices,
//!   delay fringes and synthetic counts.
//! * [`reconstruction`]: recovery of a 3×3 transfer matrix from measured
//!   visibilities and amplitudes, plus Monte-Carlo uncertainty estimates
//!   in [`uncertainty`].
//!
//! File formats live in [`io`]; the published measurement tables ship as
//! [`fixtures`].

#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod fixtures;
pub mod interference;
pub mod io;
pub mod matrix;
pub mod optim;
pub mod reconstruction;
pub mod uncertainty;

pub use error::{Error, Result};
pub use interference::{
    amplitude_distribution, coincidence_distinguishable, coincidence_indistinguishable, fringe,
    normalize_counts, synth_counts, visibility, visibility_matrix, AmplitudeDistribution,
    CountTable, FringeModel, FringePoint, NormAxis, PortPair, Visibility, VisibilityMatrix,
};
pub use matrix::{
    backward, compose_biased, compose_general, compose_unbiased, fidelity, ideal_tritter,
    phase_matrix, random_unitary, real_border, GaugePhases, PhaseShifts, TransferMatrix,
};
pub use reconstruction::{
    compare_up_to_gauge, params_to_matrix, reconstruct_composed, reconstruct_direct, rms_objective,
    similarity, OptimizerConfig, RealBorderedParams, ReconstructionResult, Stage, Weighting,
};
pub use uncertainty::{estimate_uncertainty, SigmaMatrix};
