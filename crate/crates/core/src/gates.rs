// Copyright 2026 grape-rs Contributors
// SPDX-License-Identifier: Apache-2.0

//! Target gates: the unitaries a sequence is optimized against.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{GrapeError, Result};
use crate::linalg::{identity, kron, require_unitary};

/// Rotation axis for single-spin gates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

/// The unitary a control sequence should implement.
#[derive(Debug, Clone)]
pub struct TargetGate {
    pub unitary: Array2<Complex64>,
    pub label: String,
}

impl TargetGate {
    /// Wrap a unitary, rejecting matrices that fail the unitarity check.
    pub fn new(unitary: Array2<Complex64>, label: impl Into<String>) -> Result<Self> {
        if unitary.nrows() != unitary.ncols() {
            return Err(GrapeError::DimensionMismatch(format!(
                "target gate must be square, got {}x{}",
                unitary.nrows(),
                unitary.ncols()
            )));
        }
        require_unitary(&unitary)?;
        Ok(Self {
            unitary,
            label: label.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.unitary.nrows()
    }
}

/// Identity gate on `n_spins` spins.
pub fn identity_gate(n_spins: usize) -> TargetGate {
    TargetGate {
        unitary: identity(1 << n_spins),
        label: "identity".into(),
    }
}

/// Single-spin rotation `exp(-i angle I_axis)` on `spin`, identity on the
/// rest, embedded by tensor product.
pub fn rotation_gate(n_spins: usize, spin: usize, axis: Axis, angle_rad: f64) -> Result<TargetGate> {
    if spin >= n_spins {
        return Err(GrapeError::InvalidConfig(format!(
            "rotation targets spin {spin}, system has {n_spins}"
        )));
    }
    let r = su2_rotation(axis, angle_rad);
    let mut u = if spin == 0 { r.clone() } else { identity(2) };
    for i in 1..n_spins {
        let factor = if i == spin { r.clone() } else { identity(2) };
        u = kron(&u, &factor);
    }
    TargetGate::new(
        u,
        format!(
            "rot(spin={spin}, axis={}, angle={:.6}rad)",
            axis_name(axis),
            angle_rad
        ),
    )
}

/// Controlled-phase gate: phase `e^{i theta}` when both `control` and
/// `target` are in |1>.
pub fn controlled_phase_gate(
    n_spins: usize,
    control: usize,
    target: usize,
    theta_rad: f64,
) -> Result<TargetGate> {
    check_pair(n_spins, control, target)?;
    let dim = 1 << n_spins;
    let mut u = identity(dim);
    for b in 0..dim {
        if bit(b, n_spins, control) == 1 && bit(b, n_spins, target) == 1 {
            u[[b, b]] = Complex64::from_polar(1.0, theta_rad);
        }
    }
    TargetGate::new(
        u,
        format!("cphase(control={control}, target={target}, theta={theta_rad:.6}rad)"),
    )
}

/// Controlled-NOT gate flipping `target` when `control` is |1>.
pub fn cnot_gate(n_spins: usize, control: usize, target: usize) -> Result<TargetGate> {
    check_pair(n_spins, control, target)?;
    let dim = 1 << n_spins;
    let mut u: Array2<Complex64> = Array2::zeros((dim, dim));
    for b in 0..dim {
        let image = if bit(b, n_spins, control) == 1 {
            b ^ (1 << (n_spins - 1 - target))
        } else {
            b
        };
        u[[image, b]] = Complex64::new(1.0, 0.0);
    }
    TargetGate::new(u, format!("cnot(control={control}, target={target})"))
}

/// SU(2) rotation by `angle` about one of the principal axes:
/// `cos(a/2) 1 - i sin(a/2) sigma_axis`.
pub fn su2_rotation(axis: Axis, angle_rad: f64) -> Array2<Complex64> {
    let c = (angle_rad / 2.0).cos();
    let s = (angle_rad / 2.0).sin();
    let mut u = Array2::zeros((2, 2));
    match axis {
        Axis::X => {
            u[[0, 0]] = Complex64::new(c, 0.0);
            u[[1, 1]] = Complex64::new(c, 0.0);
            u[[0, 1]] = Complex64::new(0.0, -s);
            u[[1, 0]] = Complex64::new(0.0, -s);
        }
        Axis::Y => {
            u[[0, 0]] = Complex64::new(c, 0.0);
            u[[1, 1]] = Complex64::new(c, 0.0);
            u[[0, 1]] = Complex64::new(-s, 0.0);
            u[[1, 0]] = Complex64::new(s, 0.0);
        }
        Axis::Z => {
            u[[0, 0]] = Complex64::from_polar(1.0, -angle_rad / 2.0);
            u[[1, 1]] = Complex64::from_polar(1.0, angle_rad / 2.0);
        }
    }
    u
}

/// SU(2) rotation by `angle` about an axis in the xy-plane at `phase`
/// radians counterclockwise from +x.
pub fn su2_rotation_xy(angle_rad: f64, phase_rad: f64) -> Array2<Complex64> {
    let c = (angle_rad / 2.0).cos();
    let s = (angle_rad / 2.0).sin();
    let mut u = Array2::zeros((2, 2));
    u[[0, 0]] = Complex64::new(c, 0.0);
    u[[1, 1]] = Complex64::new(c, 0.0);
    u[[0, 1]] = Complex64::new(0.0, -s) * Complex64::from_polar(1.0, -phase_rad);
    u[[1, 0]] = Complex64::new(0.0, -s) * Complex64::from_polar(1.0, phase_rad);
    u
}

fn axis_name(axis: Axis) -> &'static str {
    match axis {
        Axis::X => "x",
        Axis::Y => "y",
        Axis::Z => "z",
    }
}

fn check_pair(n_spins: usize, control: usize, target: usize) -> Result<()> {
    if control >= n_spins || target >= n_spins {
        return Err(GrapeError::InvalidConfig(format!(
            "gate references spin outside 0..{n_spins}"
        )));
    }
    if control == target {
        return Err(GrapeError::InvalidConfig(
            "control and target must differ".into(),
        ));
    }
    Ok(())
}

/// Bit of spin `i` in basis state `b`; spin 0 is the most significant bit.
fn bit(b: usize, n_spins: usize, i: usize) -> usize {
    (b >> (n_spins - 1 - i)) & 1
}
