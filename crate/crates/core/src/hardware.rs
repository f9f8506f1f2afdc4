// Copyright 2026 grape-rs Contributors
// SPDX-License-Identifier: Apache-2.0

//! Hardware non-idealities: amplitude/phase quantization and fixed delays
//! surrounding a sequence.
//!
//! Waveform generators represent each step as an amplitude drawn from a
//! fixed ladder of levels between 0 and a maximum, at a phase rounded to
//! the synthesizer's resolution. [`quantize`] applies that rounding so its
//! effect on fidelity can be checked before a sequence is committed to
//! hardware ([`rounding_impact`]).
//!
//! Gating and timing constraints add drift evolution immediately before
//! and after the programmed sequence. Rather than simulating those pads on
//! every evaluation, [`adjust_target`] folds them into the target: the
//! optimized sequence then compensates for the pads by construction.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{GrapeError, Result};
use crate::gates::TargetGate;
use crate::linalg::{dagger, expm_hermitian};
use crate::objective::{composite_objective, EnsembleSpec};
use crate::propagation::GradientMode;
use crate::sequence::{ControlSequence, Step};
use crate::spin::SpinSystem;

/// Amplitude/phase resolution of the pulse hardware.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizationSpec {
    /// Number of representable amplitudes between 0 and `max_amplitude`
    /// inclusive (e.g. 1024 for a 10-bit ladder).
    pub amplitude_levels: u32,
    pub phase_resolution_deg: f64,
    /// Full-scale field magnitude, rad/s.
    pub max_amplitude: f64,
}

impl QuantizationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.amplitude_levels < 2 {
            return Err(GrapeError::InvalidConfig(
                "quantization needs >= 2 amplitude levels".into(),
            ));
        }
        if self.phase_resolution_deg <= 0.0 || self.max_amplitude <= 0.0 {
            return Err(GrapeError::InvalidConfig(
                "phase resolution and max amplitude must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Fixed drift-evolution pads around a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DelayPad {
    pub pre_s: f64,
    pub post_s: f64,
}

impl DelayPad {
    pub fn validate(&self) -> Result<()> {
        if self.pre_s < 0.0 || self.post_s < 0.0 {
            return Err(GrapeError::InvalidConfig(
                "delay pads must be >= 0".into(),
            ));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.pre_s == 0.0 && self.post_s == 0.0
    }
}

/// Round every pulse step onto the representable amplitude/phase grid.
///
/// Cartesian amplitudes are converted to magnitude/phase, each rounded to
/// the nearest representable value (half away from zero), and converted
/// back. Idempotent: a second application is exact. Magnitudes above
/// `max_amplitude` are rejected.
pub fn quantize(seq: &ControlSequence, spec: &QuantizationSpec) -> Result<ControlSequence> {
    spec.validate()?;
    let amp_step = spec.max_amplitude / (spec.amplitude_levels - 1) as f64;
    let phase_step = spec.phase_resolution_deg.to_radians();
    let mut steps = Vec::with_capacity(seq.steps.len());
    for (i, step) in seq.steps.iter().enumerate() {
        match step {
            Step::Delay { .. } => steps.push(step.clone()),
            Step::Pulse {
                duration_s,
                amplitudes,
            } => {
                let mut rounded = Vec::with_capacity(amplitudes.len());
                for pair in amplitudes.chunks_exact(2) {
                    let r = pair[0].hypot(pair[1]);
                    if r > spec.max_amplitude * (1.0 + 1e-12) {
                        return Err(GrapeError::InvalidSequence(format!(
                            "step {i} magnitude {r:.3} rad/s exceeds hardware maximum {:.3}",
                            spec.max_amplitude
                        )));
                    }
                    let r_q = (r / amp_step).round() * amp_step;
                    let mut phase = pair[1].atan2(pair[0]);
                    if phase < 0.0 {
                        phase += std::f64::consts::TAU;
                    }
                    let phase_q = (phase / phase_step).round() * phase_step;
                    rounded.push(r_q * phase_q.cos());
                    rounded.push(r_q * phase_q.sin());
                }
                steps.push(Step::Pulse {
                    duration_s: *duration_s,
                    amplitudes: rounded,
                });
            }
        }
    }
    Ok(ControlSequence {
        steps,
        channels: seq.channels,
        metadata: seq.metadata.clone(),
    })
}

/// Composite objective of a sequence before and after quantization,
/// `(phi_exact, phi_quantized)`. Evaluation only; no side effects.
pub fn rounding_impact(
    system: &SpinSystem,
    sequence: &ControlSequence,
    target: &TargetGate,
    ensemble: &EnsembleSpec,
    spec: &QuantizationSpec,
) -> Result<(f64, f64)> {
    let exact = composite_objective(
        system,
        sequence,
        target,
        ensemble,
        None,
        GradientMode::FirstOrder,
    )?
    .total;
    let quantized_seq = quantize(sequence, spec)?;
    let quantized = composite_objective(
        system,
        &quantized_seq,
        target,
        ensemble,
        None,
        GradientMode::FirstOrder,
    )?
    .total;
    Ok((exact, quantized))
}

/// Fold pre/post drift pads into the target:
/// `U_t' = D_post^dag U_t D_pre^dag` with `D = exp(-i t H0)`, so that
/// `D_post U_seq D_pre = U_t` exactly when the sequence implements `U_t'`.
pub fn adjust_target(
    target: &TargetGate,
    h0: &Array2<Complex64>,
    pad: &DelayPad,
) -> Result<TargetGate> {
    pad.validate()?;
    if pad.is_zero() {
        return Ok(target.clone());
    }
    let d_pre = expm_hermitian(h0, pad.pre_s)?;
    let d_post = expm_hermitian(h0, pad.post_s)?;
    let adjusted = dagger(&d_post).dot(&target.unitary).dot(&dagger(&d_pre));
    TargetGate::new(
        adjusted,
        format!(
            "{} (pads {:.3e}/{:.3e} s folded in)",
            target.label, pad.pre_s, pad.post_s
        ),
    )
}
