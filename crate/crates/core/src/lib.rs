// Copyright 2026 grape-rs Contributors
// SPDX-License-Identifier: Apache-2.0

//! Gradient-ascent design of shaped-pulse control sequences for small
//! coupled spin-1/2 systems.
//!
//! The library builds spin Hamiltonians ([`spin`]), propagates piecewise-
//! constant pulse/delay sequences with cached cumulative propagators
//! ([`propagation`]), scores them with a phase-invariant gate fidelity
//! averaged over systematic-error ensembles ([`objective`]), and ascends
//! that objective with a conjugate-gradient optimizer ([`optimizer`]).
//! Hardware effects such as amplitude/phase quantization and fixed delays
//! around a sequence are modeled in [`hardware`]; robustness scans and
//! reference composite pulses live in [`scan`] and [`reference`].
//!
//! Everything is deterministic for a given configuration and seed.

pub mod config;
pub mod error;
pub mod gates;
pub mod hardware;
pub mod linalg;
pub mod objective;
pub mod optimizer;
pub mod propagation;
pub mod reference;
pub mod scan;
pub mod sequence;
pub mod spin;

pub use error::{GrapeError, Result};
pub use gates::{Axis, TargetGate};
pub use hardware::{adjust_target, quantize, rounding_impact, DelayPad, QuantizationSpec};
pub use objective::{
    composite_objective, fidelity, gradient, power_penalty, CompositeObjective, EnsembleMember,
    EnsembleSpec, ObjectiveReport, PenaltyConfig, DEFAULT_PLE_SCALES,
};
pub use optimizer::{
    ascend_with_restarts, coarsen, coarsening_study, conjugate_gradient_ascend, optimize_sequence,
    perturb_and_retry, seed_sequence, AscentObjective, CoarseningRung, OptimizationResult,
    OptimizerConfig, SeedSpec, TerminationReason,
};
pub use propagation::{
    build_cache, delay_propagator, matrix_exponential_hermitian_generator, propagator_derivative,
    pulse_propagator, GradientMode, PropagatorCache,
};
pub use scan::{scan, sequence_propagator, ScanRow, SweepKind, SweepSpec};
pub use sequence::{ControlSequence, SequenceMetadata, Step};
pub use spin::{
    apply_error_model, build_contaminant_hamiltonians, build_hamiltonians, Channel, Coupling,
    CouplingMode, ErrorModel, HamiltonianSet, SpinSystem,
};
