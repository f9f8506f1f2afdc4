// Copyright 2026 grape-rs Contributors
// SPDX-License-Identifier: Apache-2.0

//! Step propagators, their parameter derivatives, and the forward/backward
//! propagator cache.
//!
//! Each step contributes a subpropagator: `exp(-i dt (H0 + sum_k u_k H_k))`
//! for a pulse, `exp(-i t H0)` for a delay. Concatenating them gives the
//! final propagator `U_f = U_n ... U_1`. During that single forward pass we
//! also store the cumulative products
//!
//! ```text
//! X_j = U_j ... U_1
//! P_j = U_{j+1}^dag ... U_n^dag U_t
//! ```
//!
//! which let the fidelity gradient with respect to every parameter be
//! assembled in one more pass over the steps, instead of one full
//! re-propagation per parameter.
//!
//! Two derivative modes are available for pulse amplitudes. `FirstOrder`
//! uses `dU/du = -i dt H_k U`, accurate when `dt * |H|` is small; `Exact`
//! evaluates the true derivative in the eigenbasis of the step generator
//! and stays valid for long steps. Delay-duration derivatives are exact in
//! both modes, `dU/dt = -i H0 U`.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{GrapeError, Result};
use crate::gates::TargetGate;
use crate::linalg::{dagger, HermitianEigen};
use crate::sequence::{ControlSequence, Step};
use crate::spin::HamiltonianSet;

/// How pulse-amplitude derivatives are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    /// `-i dt H_k U_j`; error is O(dt^2 |H|^2) relative to the propagator.
    #[default]
    FirstOrder,
    /// Divided-difference derivative in the step generator's eigenbasis.
    Exact,
}

/// `exp(-i t H)` for a Hermitian generator; rejects non-Hermitian input.
pub fn matrix_exponential_hermitian_generator(
    h: &Array2<Complex64>,
    t: f64,
) -> Result<Array2<Complex64>> {
    crate::linalg::expm_hermitian(h, t)
}

/// Generator of one pulse step, `H0 + sum_k u_k H_k`.
pub fn step_generator(hams: &HamiltonianSet, amplitudes: &[f64]) -> Result<Array2<Complex64>> {
    if amplitudes.len() != hams.n_controls() {
        return Err(GrapeError::DimensionMismatch(format!(
            "step carries {} amplitudes, Hamiltonian set has {} controls",
            amplitudes.len(),
            hams.n_controls()
        )));
    }
    let mut g = hams.h0.clone();
    for (u, hk) in amplitudes.iter().zip(hams.controls.iter()) {
        if *u != 0.0 {
            g = g + &(hk * Complex64::new(*u, 0.0));
        }
    }
    Ok(g)
}

/// Propagator of a fixed-duration pulse step.
pub fn pulse_propagator(
    hams: &HamiltonianSet,
    duration_s: f64,
    amplitudes: &[f64],
) -> Result<Array2<Complex64>> {
    let g = step_generator(hams, amplitudes)?;
    crate::linalg::expm_hermitian(&g, duration_s)
}

/// Propagator of a delay step, `exp(-i t H0)`.
pub fn delay_propagator(hams: &HamiltonianSet, t: f64) -> Result<Array2<Complex64>> {
    if t < 0.0 {
        return Err(GrapeError::InvalidSequence(format!(
            "delay duration must be >= 0, got {t}"
        )));
    }
    crate::linalg::expm_hermitian(&hams.h0, t)
}

/// Derivative of one step's propagator with respect to one parameter.
///
/// For pulses, `k` indexes the control amplitude; for delays the single
/// parameter is the duration and `k` must be 0.
pub fn propagator_derivative(
    hams: &HamiltonianSet,
    step: &Step,
    k: usize,
    mode: GradientMode,
) -> Result<Array2<Complex64>> {
    match step {
        Step::Pulse {
            duration_s,
            amplitudes,
        } => {
            if k >= hams.n_controls() {
                return Err(GrapeError::DimensionMismatch(format!(
                    "control index {k} out of range 0..{}",
                    hams.n_controls()
                )));
            }
            let g = step_generator(hams, amplitudes)?;
            let eig = HermitianEigen::new(&g)?;
            match mode {
                GradientMode::FirstOrder => {
                    let u = eig.propagator(*duration_s);
                    Ok(hams.controls[k].dot(&u) * Complex64::new(0.0, -duration_s))
                }
                GradientMode::Exact => {
                    Ok(eig.directional_derivative(*duration_s, &hams.controls[k]))
                }
            }
        }
        Step::Delay { duration_s } => {
            if k != 0 {
                return Err(GrapeError::DimensionMismatch(format!(
                    "delay steps have one parameter, index {k} requested"
                )));
            }
            // exact in both modes
            let u = delay_propagator(hams, *duration_s)?;
            Ok(hams.h0.dot(&u) * Complex64::new(0.0, -1.0))
        }
    }
}

/// Forward/backward cumulative propagators of a sequence against a target.
#[derive(Debug, Clone)]
pub struct PropagatorCache {
    /// U_j per step.
    pub step_props: Vec<Array2<Complex64>>,
    /// X_j = U_j ... U_1 per step.
    pub forward: Vec<Array2<Complex64>>,
    /// P_j = U_{j+1}^dag ... U_n^dag U_t per step.
    pub backward: Vec<Array2<Complex64>>,
    /// U_f = X_n.
    pub final_prop: Array2<Complex64>,
    /// Step generator spectra, kept only in exact mode.
    pub(crate) spectra: Option<Vec<Option<HermitianEigen>>>,
    sequence_hash: u64,
}

impl PropagatorCache {
    pub fn n_steps(&self) -> usize {
        self.step_props.len()
    }

    /// X_{j-1}, with X_0 = 1.
    pub fn forward_before(&self, j: usize) -> Array2<Complex64> {
        if j == 0 {
            crate::linalg::identity(self.final_prop.nrows())
        } else {
            self.forward[j - 1].clone()
        }
    }

    pub(crate) fn check_sequence(&self, sequence: &ControlSequence) -> Result<()> {
        let actual = sequence.content_hash();
        if actual != self.sequence_hash {
            return Err(GrapeError::StaleCache {
                expected: self.sequence_hash,
                actual,
            });
        }
        Ok(())
    }
}

/// Build all step propagators plus the X_j / P_j caches in one forward and
/// one backward pass.
///
/// Delay steps share a single eigendecomposition of `H0`.
pub fn build_cache(
    hams: &HamiltonianSet,
    sequence: &ControlSequence,
    target: &TargetGate,
    mode: GradientMode,
) -> Result<PropagatorCache> {
    sequence.validate()?;
    if target.dim() != hams.dim() {
        return Err(GrapeError::DimensionMismatch(format!(
            "target dimension {} does not match system dimension {}",
            target.dim(),
            hams.dim()
        )));
    }
    let n = sequence.n_steps();
    let mut step_props = Vec::with_capacity(n);
    let mut spectra: Vec<Option<HermitianEigen>> = Vec::with_capacity(n);
    let mut drift_eig: Option<HermitianEigen> = None;

    for step in &sequence.steps {
        match step {
            Step::Pulse {
                duration_s,
                amplitudes,
            } => {
                let g = step_generator(hams, amplitudes)?;
                let eig = HermitianEigen::new(&g)?;
                step_props.push(eig.propagator(*duration_s));
                spectra.push(if mode == GradientMode::Exact {
                    Some(eig)
                } else {
                    None
                });
            }
            Step::Delay { duration_s } => {
                if *duration_s < 0.0 {
                    return Err(GrapeError::InvalidSequence(format!(
                        "delay duration must be >= 0, got {duration_s}"
                    )));
                }
                if drift_eig.is_none() {
                    drift_eig = Some(HermitianEigen::new(&hams.h0)?);
                }
                step_props.push(drift_eig.as_ref().unwrap().propagator(*duration_s));
                spectra.push(None);
            }
        }
    }

    let mut forward = Vec::with_capacity(n);
    for (j, u) in step_props.iter().enumerate() {
        let x = if j == 0 {
            u.clone()
        } else {
            u.dot(&forward[j - 1])
        };
        forward.push(x);
    }

    let mut backward = vec![Array2::zeros((0, 0)); n];
    backward[n - 1] = target.unitary.clone();
    for j in (0..n - 1).rev() {
        backward[j] = dagger(&step_props[j + 1]).dot(&backward[j + 1]);
    }

    let final_prop = forward[n - 1].clone();
    Ok(PropagatorCache {
        step_props,
        forward,
        backward,
        final_prop,
        spectra: if mode == GradientMode::Exact {
            Some(spectra)
        } else {
            None
        },
        sequence_hash: sequence.content_hash(),
    })
}
