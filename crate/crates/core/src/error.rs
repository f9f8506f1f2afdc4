// Copyright 2026 grape-rs Contributors
// SPDX-License-Identifier: Apache-2.0

//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced while building spin systems, propagating sequences or
/// driving the optimizer.
#[derive(Debug, Error)]
pub enum GrapeError {
    #[error("invalid spin system: {0}")]
    InvalidSystem(String),

    #[error("matrix is not Hermitian: max |H - H^\u{2020}| = {max_dev:.3e} exceeds {tol:.1e}")]
    NotHermitian { max_dev: f64, tol: f64 },

    #[error("matrix is not unitary: max |U^\u{2020}U - 1| = {max_dev:.3e} exceeds {tol:.1e}")]
    NotUnitary { max_dev: f64, tol: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid control sequence: {0}")]
    InvalidSequence(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("stale propagator cache: sequence hash {actual:#018x} does not match {expected:#018x}")]
    StaleCache { expected: u64, actual: u64 },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("objective evaluation failed at iteration {iteration}: {source}")]
    Objective {
        iteration: usize,
        #[source]
        source: Box<GrapeError>,
    },

    #[error("parse error in {path}, line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, GrapeError>;

impl GrapeError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        GrapeError::Io {
            path: path.into(),
            source,
        }
    }
}
