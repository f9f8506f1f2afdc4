// Copyright 2026 grape-rs Contributors
// SPDX-License-Identifier: Apache-2.0

//! Reference hard-pulse constructors used as robustness baselines.

use std::f64::consts::PI;

use crate::error::{GrapeError, Result};
use crate::sequence::{ControlSequence, SequenceMetadata, Step};

/// One constant-amplitude step rotating by `theta` about an xy-plane axis
/// at `axis_phase` (radians from +x), driven at `amplitude` rad/s.
pub fn hard_pulse(theta: f64, axis_phase: f64, amplitude: f64) -> Result<ControlSequence> {
    if amplitude <= 0.0 {
        return Err(GrapeError::InvalidConfig(
            "hard pulse needs a positive amplitude".into(),
        ));
    }
    if theta <= 0.0 {
        return Err(GrapeError::InvalidConfig(
            "hard pulse needs a positive rotation angle".into(),
        ));
    }
    let step = Step::Pulse {
        duration_s: theta / amplitude,
        amplitudes: vec![amplitude * axis_phase.cos(), amplitude * axis_phase.sin()],
    };
    Ok(ControlSequence {
        steps: vec![step],
        channels: 1,
        metadata: SequenceMetadata {
            label: format!("hard pulse {:.4} rad", theta),
            seed: None,
            provenance: "hard pulse".into(),
        },
    })
}

/// BB1 composite rotation: the Wimperis correction block
/// `pi(phi) 2pi(3phi) pi(phi)` with `phi = arccos(-theta / 4 pi)`,
/// followed by the bare `theta` rotation about the requested axis. Each
/// component is one constant-amplitude hard-pulse step. The correction
/// block is the identity for error-free pulses and cancels pulse-length
/// errors to high order.
pub fn bb1_sequence(theta: f64, axis_phase: f64, amplitude: f64) -> Result<ControlSequence> {
    if !(0.0 < theta && theta <= 2.0 * PI) {
        return Err(GrapeError::InvalidConfig(format!(
            "BB1 rotation angle must lie in (0, 2 pi], got {theta}"
        )));
    }
    if amplitude <= 0.0 {
        return Err(GrapeError::InvalidConfig(
            "BB1 needs a positive amplitude".into(),
        ));
    }
    let phi = bb1_correction_phase(theta);
    let component = |angle: f64, phase: f64| Step::Pulse {
        duration_s: angle / amplitude,
        amplitudes: vec![amplitude * phase.cos(), amplitude * phase.sin()],
    };
    let steps = vec![
        component(PI, axis_phase + phi),
        component(2.0 * PI, axis_phase + 3.0 * phi),
        component(PI, axis_phase + phi),
        component(theta, axis_phase),
    ];
    Ok(ControlSequence {
        steps,
        channels: 1,
        metadata: SequenceMetadata {
            label: format!("BB1 {:.4} rad", theta),
            seed: None,
            provenance: "BB1 composite pulse".into(),
        },
    })
}

/// `phi = arccos(-theta / 4 pi)`.
pub fn bb1_correction_phase(theta: f64) -> f64 {
    (-theta / (4.0 * PI)).acos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn correction_phase_for_quarter_turn() {
        // arccos(-1/8) ~ 97.18 degrees
        let phi = bb1_correction_phase(FRAC_PI_2);
        assert_abs_diff_eq!(phi.to_degrees(), 97.18, epsilon = 0.01);
    }

    #[test]
    fn component_angles_and_durations() {
        let amplitude = 2.0 * PI * 1000.0;
        let seq = bb1_sequence(FRAC_PI_2, 0.0, amplitude).unwrap();
        assert_eq!(seq.n_steps(), 4);
        let expected_angles = [PI, 2.0 * PI, PI, FRAC_PI_2];
        for (step, angle) in seq.steps.iter().zip(expected_angles) {
            let Step::Pulse {
                duration_s,
                amplitudes,
            } = step
            else {
                panic!()
            };
            assert_abs_diff_eq!(duration_s * amplitude, angle, epsilon = 1e-12);
            assert_abs_diff_eq!(
                amplitudes[0].hypot(amplitudes[1]),
                amplitude,
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn angle_out_of_range_rejected() {
        assert!(bb1_sequence(0.0, 0.0, 1.0).is_err());
        assert!(bb1_sequence(7.0, 0.0, 1.0).is_err());
    }
}
