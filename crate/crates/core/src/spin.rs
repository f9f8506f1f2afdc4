// Copyright 2026 grape-rs Contributors
// SPDX-License-Identifier: Apache-2.0

//! Spin systems and their Hamiltonians.
//!
//! A [`SpinSystem`] describes a small set of coupled spin-1/2 nuclei in the
//! rotating frame (transmitter at 0 Hz, all offsets relative), plus any
//! uncoupled contaminant spins and the control channels that drive them.
//! [`build_hamiltonians`] turns it into matrices: the drift Hamiltonian
//! `H0` collects offset and coupling terms, and each channel contributes
//! one x and one y control Hamiltonian.
//!
//! Unit convention: configuration values are plain frequencies in Hz;
//! every matrix is in angular units (rad/s), i.e. offsets and couplings
//! pick up a factor of 2 pi at construction. Control amplitudes `u` then
//! also carry rad/s so that `u * dt` is a rotation angle.
//!
//! Spin operators are one-half Pauli matrices embedded by tensor product;
//! spin 0 is the leftmost (most significant) factor.

use std::f64::consts::TAU;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{GrapeError, Result};
use crate::linalg::{hermiticity_deviation, identity, kron, HERMITIAN_TOL};

/// Dimension guard: systems larger than this are rejected (N = 2^6 = 64).
pub const DEFAULT_MAX_SPINS: usize = 6;

/// How a scalar coupling enters the drift Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingMode {
    /// Ising part only, `2 pi J Iz Iz`; valid when J is small against the
    /// frequency separation of the coupled pair.
    Weak,
    /// Full isotropic coupling, `2 pi J (IxIx + IyIy + IzIz)`.
    Strong,
}

/// Scalar coupling between two spins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub a: usize,
    pub b: usize,
    pub j_hz: f64,
    pub mode: CouplingMode,
}

/// A control channel: the set of spins that see its field, and the largest
/// nutation frequency the hardware can produce on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub spins: Vec<usize>,
    pub max_amplitude_hz: f64,
}

/// A small coupled spin-1/2 system with optional contaminant spins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinSystem {
    /// Offset frequency of each computational spin, Hz, relative to the
    /// transmitter reference.
    #[serde(rename = "spins")]
    pub offsets_hz: Vec<f64>,
    #[serde(default)]
    pub couplings: Vec<Coupling>,
    /// Offsets of uncoupled impurity spins, Hz. Each one lives in its own
    /// two-dimensional Hilbert space and sees the same control field.
    #[serde(default, rename = "contaminants")]
    pub contaminants_hz: Vec<f64>,
    pub channels: Vec<Channel>,
    /// Dimension overflow guard; construction fails above this.
    #[serde(default = "default_max_spins")]
    pub max_spins: usize,
}

fn default_max_spins() -> usize {
    DEFAULT_MAX_SPINS
}

impl SpinSystem {
    pub fn n_spins(&self) -> usize {
        self.offsets_hz.len()
    }

    /// Hilbert-space dimension of the computational system, `2^n`.
    pub fn dim(&self) -> usize {
        1 << self.n_spins()
    }

    pub fn n_controls(&self) -> usize {
        2 * self.channels.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_spins();
        if n == 0 {
            return Err(GrapeError::InvalidSystem("no spins defined".into()));
        }
        if n > self.max_spins {
            return Err(GrapeError::InvalidSystem(format!(
                "{n} spins exceeds the configured maximum of {} (N = 2^{n} = {})",
                self.max_spins,
                1usize << n,
            )));
        }
        if self.channels.is_empty() {
            return Err(GrapeError::InvalidSystem("no control channels".into()));
        }
        let mut seen_pairs = Vec::new();
        for c in &self.couplings {
            if c.a >= n || c.b >= n {
                return Err(GrapeError::InvalidSystem(format!(
                    "coupling ({}, {}) references a spin outside 0..{n}",
                    c.a, c.b
                )));
            }
            if c.a == c.b {
                return Err(GrapeError::InvalidSystem(format!(
                    "coupling references spin {} twice",
                    c.a
                )));
            }
            let key = (c.a.min(c.b), c.a.max(c.b));
            if seen_pairs.contains(&key) {
                return Err(GrapeError::InvalidSystem(format!(
                    "duplicate coupling between spins {} and {}",
                    key.0, key.1
                )));
            }
            seen_pairs.push(key);
        }
        for (i, ch) in self.channels.iter().enumerate() {
            if ch.spins.is_empty() {
                return Err(GrapeError::InvalidSystem(format!(
                    "channel {i} addresses no spins"
                )));
            }
            for &s in &ch.spins {
                if s >= n {
                    return Err(GrapeError::InvalidSystem(format!(
                        "channel {i} addresses spin {s} outside 0..{n}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Drift and control Hamiltonians of one system (computational or
/// contaminant), all in rad/s.
#[derive(Debug, Clone)]
pub struct HamiltonianSet {
    pub h0: Array2<Complex64>,
    /// Two per channel, x before y; amplitudes multiplying these carry
    /// rad/s.
    pub controls: Vec<Array2<Complex64>>,
    /// Total `sum_i Iz_i` of this system, used for uniform off-resonance
    /// shifts.
    pub z_total: Array2<Complex64>,
}

impl HamiltonianSet {
    pub fn dim(&self) -> usize {
        self.h0.nrows()
    }

    pub fn n_controls(&self) -> usize {
        self.controls.len()
    }

    /// Check that every stored matrix is Hermitian within tolerance.
    pub fn validate_hermitian(&self) -> Result<()> {
        for m in std::iter::once(&self.h0).chain(self.controls.iter()) {
            let dev = hermiticity_deviation(m);
            if dev > HERMITIAN_TOL {
                return Err(GrapeError::NotHermitian {
                    max_dev: dev,
                    tol: HERMITIAN_TOL,
                });
            }
        }
        Ok(())
    }
}

/// Systematic error applied to a [`HamiltonianSet`] before evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ErrorModel {
    /// Pulse length error: the generated field strength is `scale` times
    /// the requested one. Multiplies every control Hamiltonian.
    Ple { scale: f64 },
    /// Off resonance error: a uniform shift of all Larmor frequencies,
    /// adding `2 pi offset_hz * sum_i Iz_i` to the drift.
    Ore { offset_hz: f64 },
}

fn pauli_half(axis: usize) -> Array2<Complex64> {
    let mut m = Array2::zeros((2, 2));
    match axis {
        0 => {
            m[[0, 1]] = Complex64::new(0.5, 0.0);
            m[[1, 0]] = Complex64::new(0.5, 0.0);
        }
        1 => {
            m[[0, 1]] = Complex64::new(0.0, -0.5);
            m[[1, 0]] = Complex64::new(0.0, 0.5);
        }
        _ => {
            m[[0, 0]] = Complex64::new(0.5, 0.0);
            m[[1, 1]] = Complex64::new(-0.5, 0.0);
        }
    }
    m
}

/// `Ix` of one spin, one-half Pauli-x.
pub fn ix() -> Array2<Complex64> {
    pauli_half(0)
}

/// `Iy` of one spin.
pub fn iy() -> Array2<Complex64> {
    pauli_half(1)
}

/// `Iz` of one spin.
pub fn iz() -> Array2<Complex64> {
    pauli_half(2)
}

/// Embed a single-spin operator at position `target` of an `n_spins`
/// register by tensor product with identities.
pub fn embed_single(n_spins: usize, target: usize, op: &Array2<Complex64>) -> Array2<Complex64> {
    let mut out = if target == 0 {
        op.clone()
    } else {
        identity(2)
    };
    for i in 1..n_spins {
        let factor = if i == target { op.clone() } else { identity(2) };
        out = kron(&out, &factor);
    }
    out
}

fn embed_pair(
    n_spins: usize,
    a: usize,
    b: usize,
    op_a: &Array2<Complex64>,
    op_b: &Array2<Complex64>,
) -> Array2<Complex64> {
    embed_single(n_spins, a, op_a).dot(&embed_single(n_spins, b, op_b))
}

/// Build the drift Hamiltonian `H0` and the per-channel control
/// Hamiltonians of the computational system.
pub fn build_hamiltonians(system: &SpinSystem) -> Result<HamiltonianSet> {
    system.validate()?;
    let n = system.n_spins();
    let dim = system.dim();

    let mut h0: Array2<Complex64> = Array2::zeros((dim, dim));
    let mut z_total: Array2<Complex64> = Array2::zeros((dim, dim));
    for (i, &offset) in system.offsets_hz.iter().enumerate() {
        let z_i = embed_single(n, i, &iz());
        h0 = h0 + &(&z_i * Complex64::new(TAU * offset, 0.0));
        z_total = z_total + &z_i;
    }
    for c in &system.couplings {
        let j = Complex64::new(TAU * c.j_hz, 0.0);
        let zz = embed_pair(n, c.a, c.b, &iz(), &iz());
        match c.mode {
            CouplingMode::Weak => {
                h0 = h0 + &(&zz * j);
            }
            CouplingMode::Strong => {
                let xx = embed_pair(n, c.a, c.b, &ix(), &ix());
                let yy = embed_pair(n, c.a, c.b, &iy(), &iy());
                h0 = h0 + &(&(&(&xx + &yy) + &zz) * j);
            }
        }
    }

    let mut controls = Vec::with_capacity(system.n_controls());
    for ch in &system.channels {
        let mut hx: Array2<Complex64> = Array2::zeros((dim, dim));
        let mut hy: Array2<Complex64> = Array2::zeros((dim, dim));
        for &s in &ch.spins {
            hx = hx + &embed_single(n, s, &ix());
            hy = hy + &embed_single(n, s, &iy());
        }
        controls.push(hx);
        controls.push(hy);
    }

    let set = HamiltonianSet {
        h0,
        controls,
        z_total,
    };
    set.validate_hermitian()?;
    Ok(set)
}

/// Apply a systematic error model, returning transformed Hamiltonians.
///
/// `Ple { scale: 1.0 }` and `Ore { offset_hz: 0.0 }` are elementwise
/// identities.
pub fn apply_error_model(hams: &HamiltonianSet, model: ErrorModel) -> Result<HamiltonianSet> {
    match model {
        ErrorModel::Ple { scale } => {
            if scale < 0.0 {
                return Err(GrapeError::InvalidConfig(format!(
                    "pulse length error scale must be >= 0, got {scale}"
                )));
            }
            let s = Complex64::new(scale, 0.0);
            Ok(HamiltonianSet {
                h0: hams.h0.clone(),
                controls: hams.controls.iter().map(|c| c * s).collect(),
                z_total: hams.z_total.clone(),
            })
        }
        ErrorModel::Ore { offset_hz } => {
            let shift = Complex64::new(TAU * offset_hz, 0.0);
            Ok(HamiltonianSet {
                h0: &hams.h0 + &(&hams.z_total * shift),
                controls: hams.controls.clone(),
                z_total: hams.z_total.clone(),
            })
        }
    }
}

/// One 2x2 Hamiltonian set per contaminant spin. Each contaminant is an
/// isolated spin that sees the same control field as the computational
/// system, so its control list mirrors the channel layout.
pub fn build_contaminant_hamiltonians(system: &SpinSystem) -> Result<Vec<HamiltonianSet>> {
    system.validate()?;
    let mut sets = Vec::with_capacity(system.contaminants_hz.len());
    for &offset in &system.contaminants_hz {
        let h0 = iz() * Complex64::new(TAU * offset, 0.0);
        let mut controls = Vec::with_capacity(system.n_controls());
        for _ in &system.channels {
            controls.push(ix());
            controls.push(iy());
        }
        sets.push(HamiltonianSet {
            h0,
            controls,
            z_total: iz(),
        });
    }
    Ok(sets)
}
