// Copyright 2026 grape-rs Contributors
// SPDX-License-Identifier: Apache-2.0

//! Robustness scans: fidelity of a fixed sequence swept over a range of
//! systematic error values.

use serde::{Deserialize, Serialize};

use crate::error::{GrapeError, Result};
use crate::gates::TargetGate;
use crate::objective::fidelity;
use crate::propagation::{delay_propagator, pulse_propagator};
use crate::sequence::{ControlSequence, Step};
use crate::spin::{apply_error_model, build_hamiltonians, ErrorModel, HamiltonianSet, SpinSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    /// Pulse-length error; the swept value is the field-strength scale.
    Ple,
    /// Off-resonance error; the swept value is the frequency offset in Hz.
    Ore,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub kind: SweepKind,
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow {
    pub value: f64,
    pub fidelity: f64,
}

/// Final propagator of a sequence under the given Hamiltonians.
pub fn sequence_propagator(
    hams: &HamiltonianSet,
    seq: &ControlSequence,
) -> Result<ndarray::Array2<num_complex::Complex64>> {
    seq.validate()?;
    let mut u = crate::linalg::identity(hams.dim());
    for step in &seq.steps {
        let step_u = match step {
            Step::Pulse {
                duration_s,
                amplitudes,
            } => pulse_propagator(hams, *duration_s, amplitudes)?,
            Step::Delay { duration_s } => delay_propagator(hams, *duration_s)?,
        };
        u = step_u.dot(&u);
    }
    Ok(u)
}

/// Evaluate plain gate fidelity at each swept error value. Rows come out
/// sorted by error value.
pub fn scan(
    system: &SpinSystem,
    seq: &ControlSequence,
    target: &TargetGate,
    sweep: &SweepSpec,
) -> Result<Vec<ScanRow>> {
    if sweep.points < 2 {
        return Err(GrapeError::InvalidConfig(
            "sweep needs at least 2 points".into(),
        ));
    }
    if !(sweep.from < sweep.to) {
        return Err(GrapeError::InvalidConfig(format!(
            "sweep range must be increasing, got {}..{}",
            sweep.from, sweep.to
        )));
    }
    let base = build_hamiltonians(system)?;
    let mut rows = Vec::with_capacity(sweep.points);
    for i in 0..sweep.points {
        let frac = i as f64 / (sweep.points - 1) as f64;
        let value = sweep.from + frac * (sweep.to - sweep.from);
        let model = match sweep.kind {
            SweepKind::Ple => ErrorModel::Ple { scale: value },
            SweepKind::Ore => ErrorModel::Ore { offset_hz: value },
        };
        let hams = apply_error_model(&base, model)?;
        let u = sequence_propagator(&hams, seq)?;
        rows.push(ScanRow {
            value,
            fidelity: fidelity(target, &u)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::{rotation_gate, Axis};
    use crate::reference::hard_pulse;
    use crate::spin::Channel;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, TAU};

    fn single_spin_system() -> SpinSystem {
        SpinSystem {
            offsets_hz: vec![0.0],
            couplings: vec![],
            contaminants_hz: vec![],
            channels: vec![Channel {
                spins: vec![0],
                max_amplitude_hz: 2500.0,
            }],
            max_spins: 6,
        }
    }

    #[test]
    fn ple_scan_of_hard_pulse_matches_closed_form() {
        // Phi(s) = cos^2((1 - s) pi / 4) for a resonant 90-degree pulse
        let system = single_spin_system();
        let seq = hard_pulse(FRAC_PI_2, 0.0, TAU * 1000.0).unwrap();
        let target = rotation_gate(1, 0, Axis::X, FRAC_PI_2).unwrap();
        let rows = scan(
            &system,
            &seq,
            &target,
            &SweepSpec {
                kind: SweepKind::Ple,
                from: 0.0,
                to: 2.0,
                points: 50,
            },
        )
        .unwrap();
        assert_eq!(rows.len(), 50);
        for row in &rows {
            let expect = ((1.0 - row.value) * FRAC_PI_4).cos().powi(2);
            assert_abs_diff_eq!(row.fidelity, expect, epsilon = 1e-10);
        }
        // symmetric about s = 1 on this symmetric grid
        for (lo, hi) in rows.iter().zip(rows.iter().rev()) {
            assert_abs_diff_eq!(lo.fidelity, hi.fidelity, epsilon = 1e-10);
        }
    }

    #[test]
    fn ore_scan_at_zero_recovers_nominal() {
        let system = single_spin_system();
        let seq = hard_pulse(FRAC_PI_2, 0.0, TAU * 1000.0).unwrap();
        let target = rotation_gate(1, 0, Axis::X, FRAC_PI_2).unwrap();
        let rows = scan(
            &system,
            &seq,
            &target,
            &SweepSpec {
                kind: SweepKind::Ore,
                from: -100.0,
                to: 100.0,
                points: 21,
            },
        )
        .unwrap();
        let at_zero = rows.iter().find(|r| r.value.abs() < 1e-9).unwrap();
        assert_abs_diff_eq!(at_zero.fidelity, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn degenerate_sweep_rejected() {
        let system = single_spin_system();
        let seq = hard_pulse(FRAC_PI_2, 0.0, TAU * 1000.0).unwrap();
        let target = rotation_gate(1, 0, Axis::X, FRAC_PI_2).unwrap();
        for bad in [
            SweepSpec {
                kind: SweepKind::Ple,
                from: 0.0,
                to: 2.0,
                points: 1,
            },
            SweepSpec {
                kind: SweepKind::Ple,
                from: 2.0,
                to: 0.0,
                points: 10,
            },
        ] {
            assert!(scan(&system, &seq, &target, &bad).is_err());
        }
    }
}
