// Copyright 2026 grape-rs Contributors
// SPDX-License-Identifier: Apache-2.0

//! Control sequences: ordered pulse and delay steps.
//!
//! A sequence is the unit the optimizer works on. Pulse steps have a fixed
//! duration and one amplitude per control Hamiltonian (rad/s); delay steps
//! have a variable duration and no controls. The optimizer sees the
//! sequence as a flat parameter vector: all pulse amplitudes and all delay
//! durations concatenated in step order.
//!
//! Sequence files are tab-delimited text with a header row, one row per
//! step. Amplitudes are stored in Hz (rad/s divided by 2 pi) at 15
//! significant digits, which makes save/load round trips byte-stable.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::hash::{Hash, Hasher};
use std::path::Path;

use crate::error::{GrapeError, Result};

/// One step of a control sequence.
#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    /// Fixed-duration pulse; `amplitudes` has one rad/s entry per control
    /// Hamiltonian (x then y for each channel).
    Pulse {
        duration_s: f64,
        amplitudes: Vec<f64>,
    },
    /// Variable-duration free evolution under the drift alone.
    Delay { duration_s: f64 },
}

impl Step {
    pub fn duration_s(&self) -> f64 {
        match self {
            Step::Pulse { duration_s, .. } | Step::Delay { duration_s } => *duration_s,
        }
    }

    /// Number of optimizer parameters this step contributes.
    pub fn parameter_count(&self) -> usize {
        match self {
            Step::Pulse { amplitudes, .. } => amplitudes.len(),
            Step::Delay { .. } => 1,
        }
    }
}

/// Provenance carried along with a sequence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SequenceMetadata {
    pub label: String,
    pub seed: Option<u64>,
    pub provenance: String,
}

/// An ordered list of pulse and delay steps for a fixed channel layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSequence {
    pub steps: Vec<Step>,
    /// Number of control channels; every pulse step carries
    /// `2 * channels` amplitudes.
    pub channels: usize,
    pub metadata: SequenceMetadata,
}

impl ControlSequence {
    pub fn new(steps: Vec<Step>, channels: usize) -> Self {
        Self {
            steps,
            channels,
            metadata: SequenceMetadata::default(),
        }
    }

    pub fn n_controls(&self) -> usize {
        2 * self.channels
    }

    pub fn n_steps(&self) -> usize {
        self.steps.len()
    }

    pub fn total_duration_s(&self) -> f64 {
        self.steps.iter().map(|s| s.duration_s()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps.is_empty() {
            return Err(GrapeError::InvalidSequence("sequence has no steps".into()));
        }
        for (i, step) in self.steps.iter().enumerate() {
            if !step.duration_s().is_finite() || step.duration_s() < 0.0 {
                return Err(GrapeError::InvalidSequence(format!(
                    "step {i} has invalid duration {}",
                    step.duration_s()
                )));
            }
            if let Step::Pulse { amplitudes, .. } = step {
                if amplitudes.len() != self.n_controls() {
                    return Err(GrapeError::InvalidSequence(format!(
                        "step {i} carries {} amplitudes, expected {}",
                        amplitudes.len(),
                        self.n_controls()
                    )));
                }
                if amplitudes.iter().any(|u| !u.is_finite()) {
                    return Err(GrapeError::InvalidSequence(format!(
                        "step {i} has a non-finite amplitude"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Total number of optimizer parameters.
    pub fn parameter_count(&self) -> usize {
        self.steps.iter().map(Step::parameter_count).sum()
    }

    /// Flatten to the optimizer's parameter vector: pulse amplitudes and
    /// delay durations in step order.
    pub fn parameter_vector(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.parameter_count());
        for step in &self.steps {
            match step {
                Step::Pulse { amplitudes, .. } => x.extend_from_slice(amplitudes),
                Step::Delay { duration_s } => x.push(*duration_s),
            }
        }
        x
    }

    /// Rebuild a sequence with the same step structure but new parameter
    /// values.
    pub fn with_parameters(&self, x: &[f64]) -> Result<ControlSequence> {
        if x.len() != self.parameter_count() {
            return Err(GrapeError::DimensionMismatch(format!(
                "parameter vector has {} entries, sequence needs {}",
                x.len(),
                self.parameter_count()
            )));
        }
        let mut steps = Vec::with_capacity(self.steps.len());
        let mut k = 0;
        for step in &self.steps {
            match step {
                Step::Pulse { duration_s, amplitudes } => {
                    let m = amplitudes.len();
                    steps.push(Step::Pulse {
                        duration_s: *duration_s,
                        amplitudes: x[k..k + m].to_vec(),
                    });
                    k += m;
                }
                Step::Delay { .. } => {
                    steps.push(Step::Delay { duration_s: x[k] });
                    k += 1;
                }
            }
        }
        Ok(ControlSequence {
            steps,
            channels: self.channels,
            metadata: self.metadata.clone(),
        })
    }

    /// Indices into the parameter vector that hold delay durations.
    pub fn delay_parameter_indices(&self) -> Vec<usize> {
        let mut idx = Vec::new();
        let mut k = 0;
        for step in &self.steps {
            match step {
                Step::Pulse { amplitudes, .. } => k += amplitudes.len(),
                Step::Delay { .. } => {
                    idx.push(k);
                    k += 1;
                }
            }
        }
        idx
    }

    /// Structural hash over step kinds, durations and amplitudes; used to
    /// detect stale propagator caches.
    pub fn content_hash(&self) -> u64 {
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        self.channels.hash(&mut hasher);
        for step in &self.steps {
            match step {
                Step::Pulse { duration_s, amplitudes } => {
                    0u8.hash(&mut hasher);
                    duration_s.to_bits().hash(&mut hasher);
                    for u in amplitudes {
                        u.to_bits().hash(&mut hasher);
                    }
                }
                Step::Delay { duration_s } => {
                    1u8.hash(&mut hasher);
                    duration_s.to_bits().hash(&mut hasher);
                }
            }
        }
        hasher.finish()
    }

    /// Serialize to the sequence file format.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# label: {}", self.metadata.label);
        match self.metadata.seed {
            Some(seed) => {
                let _ = writeln!(out, "# seed: {seed}");
            }
            None => {
                let _ = writeln!(out, "# seed: -");
            }
        }
        let _ = writeln!(out, "# provenance: {}", self.metadata.provenance);
        out.push_str("kind\tduration_s");
        for c in 0..self.channels {
            let _ = write!(out, "\tch{c}_ux_hz\tch{c}_uy_hz");
        }
        out.push('\n');
        for step in &self.steps {
            match step {
                Step::Pulse { duration_s, amplitudes } => {
                    let _ = write!(out, "P\t{}", fmt_sig(*duration_s));
                    for u in amplitudes {
                        let _ = write!(out, "\t{}", fmt_sig(u / TAU));
                    }
                }
                Step::Delay { duration_s } => {
                    let _ = write!(out, "D\t{}", fmt_sig(*duration_s));
                    for _ in 0..self.n_controls() {
                        let _ = write!(out, "\t{}", fmt_sig(0.0));
                    }
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_file_string())
            .map_err(|e| GrapeError::io(path.display().to_string(), e))
    }

    /// Parse the sequence file format.
    pub fn from_file_string(text: &str, origin: &str) -> Result<ControlSequence> {
        let mut metadata = SequenceMetadata::default();
        let mut channels: Option<usize> = None;
        let mut steps = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim_end();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| GrapeError::Parse {
                path: origin.to_string(),
                line: lineno + 1,
                message,
            };
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(v) = rest.strip_prefix("label:") {
                    metadata.label = v.trim().to_string();
                } else if let Some(v) = rest.strip_prefix("seed:") {
                    let v = v.trim();
                    if v != "-" {
                        metadata.seed = Some(v.parse().map_err(|_| {
                            err(format!("invalid seed value {v:?}"))
                        })?);
                    }
                } else if let Some(v) = rest.strip_prefix("provenance:") {
                    metadata.provenance = v.trim().to_string();
                }
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields[0] == "kind" {
                if fields.len() < 2 || (fields.len() - 2) % 2 != 0 {
                    return Err(err("malformed header row".into()));
                }
                channels = Some((fields.len() - 2) / 2);
                continue;
            }
            let channels = channels.ok_or_else(|| err("data row before header".into()))?;
            if fields.len() != 2 + 2 * channels {
                return Err(err(format!(
                    "expected {} fields, found {}",
                    2 + 2 * channels,
                    fields.len()
                )));
            }
            let duration_s: f64 = fields[1]
                .parse()
                .map_err(|_| err(format!("invalid duration {:?}", fields[1])))?;
            match fields[0] {
                "P" => {
                    let mut amplitudes = Vec::with_capacity(2 * channels);
                    for f in &fields[2..] {
                        let hz: f64 = f
                            .parse()
                            .map_err(|_| err(format!("invalid amplitude {f:?}")))?;
                        amplitudes.push(hz * TAU);
                    }
                    steps.push(Step::Pulse {
                        duration_s,
                        amplitudes,
                    });
                }
                "D" => steps.push(Step::Delay { duration_s }),
                other => return Err(err(format!("unknown step kind {other:?}"))),
            }
        }
        let channels = channels.ok_or_else(|| GrapeError::Parse {
            path: origin.to_string(),
            line: 0,
            message: "no header row found".into(),
        })?;
        let seq = ControlSequence {
            steps,
            channels,
            metadata,
        };
        seq.validate()?;
        Ok(seq)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ControlSequence> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| GrapeError::io(path.display().to_string(), e))?;
        Self::from_file_string(&text, &path.display().to_string())
    }
}

/// Format with 15 significant digits; stable under one parse/print cycle.
pub(crate) fn fmt_sig(x: f64) -> String {
    format!("{x:.14e}")
}
