// Copyright 2026 grape-rs Contributors
// SPDX-License-Identifier: Apache-2.0

//! TOML configuration files for systems and optimization runs.
//!
//! A *system file* describes the spin system alone. A *run file* points at
//! a system file and adds everything a run needs: the target gate, seed
//! shape, optimizer knobs, ensemble, penalty and hardware model. Relative
//! paths inside a run file resolve against the run file's directory.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{GrapeError, Result};
use crate::gates::{
    cnot_gate, controlled_phase_gate, identity_gate, rotation_gate, Axis, TargetGate,
};
use crate::hardware::{DelayPad, QuantizationSpec};
use crate::objective::{
    EnsembleMember, EnsembleSpec, PenaltyConfig, DEFAULT_CONTAMINANT_WEIGHT,
};
use crate::optimizer::{OptimizerConfig, SeedSpec};
use crate::spin::{ErrorModel, SpinSystem};

/// Load a system file.
pub fn load_system(path: impl AsRef<Path>) -> Result<SpinSystem> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| GrapeError::io(path.display().to_string(), e))?;
    let system: SpinSystem = toml::from_str(&text).map_err(|e| GrapeError::Parse {
        path: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    })?;
    system.validate()?;
    Ok(system)
}

/// Target gate selection: a named gate with parameters, or an explicit
/// matrix file.
#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub gate: Option<String>,
    pub spin: Option<usize>,
    pub axis: Option<Axis>,
    pub angle_deg: Option<f64>,
    pub control: Option<usize>,
    pub target: Option<usize>,
    pub theta_deg: Option<f64>,
    pub matrix_file: Option<PathBuf>,
    pub label: Option<String>,
}

impl TargetSpec {
    pub fn resolve(&self, n_spins: usize, base_dir: &Path) -> Result<TargetGate> {
        let mut gate = match (&self.gate, &self.matrix_file) {
            (Some(_), Some(_)) => {
                return Err(GrapeError::InvalidConfig(
                    "target: give either a named gate or a matrix file, not both".into(),
                ))
            }
            (None, None) => {
                return Err(GrapeError::InvalidConfig(
                    "target: missing gate name or matrix file".into(),
                ))
            }
            (None, Some(file)) => {
                let path = base_dir.join(file);
                load_target_matrix(&path, 1 << n_spins)?
            }
            (Some(name), None) => match name.as_str() {
                "identity" => identity_gate(n_spins),
                "rotation" => {
                    let spin = self.spin.unwrap_or(0);
                    let axis = self.axis.ok_or_else(|| {
                        GrapeError::InvalidConfig("rotation target needs an axis".into())
                    })?;
                    let angle = self.angle_deg.ok_or_else(|| {
                        GrapeError::InvalidConfig("rotation target needs angle_deg".into())
                    })?;
                    rotation_gate(n_spins, spin, axis, angle.to_radians())?
                }
                "cnot" => cnot_gate(
                    n_spins,
                    self.control.unwrap_or(0),
                    self.target.unwrap_or(1),
                )?,
                "controlled_phase" => {
                    let theta = self.theta_deg.ok_or_else(|| {
                        GrapeError::InvalidConfig(
                            "controlled_phase target needs theta_deg".into(),
                        )
                    })?;
                    controlled_phase_gate(
                        n_spins,
                        self.control.unwrap_or(0),
                        self.target.unwrap_or(1),
                        theta.to_radians(),
                    )?
                }
                other => {
                    return Err(GrapeError::InvalidConfig(format!(
                        "unknown gate {other:?}; expected identity, rotation, cnot, \
                         controlled_phase or a matrix file"
                    )))
                }
            },
        };
        if let Some(label) = &self.label {
            gate.label = label.clone();
        }
        Ok(gate)
    }
}

/// Parse a target matrix file: one row per line, `re im` pairs whitespace
/// separated, `#` comments allowed.
pub fn load_target_matrix(path: &Path, dim: usize) -> Result<TargetGate> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| GrapeError::io(path.display().to_string(), e))?;
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let nums: std::result::Result<Vec<f64>, _> =
            line.split_whitespace().map(str::parse).collect();
        let nums = nums.map_err(|_| GrapeError::Parse {
            path: path.display().to_string(),
            line: lineno + 1,
            message: "expected whitespace-separated re im pairs".into(),
        })?;
        if nums.len() != 2 * dim {
            return Err(GrapeError::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                message: format!("expected {} numbers, found {}", 2 * dim, nums.len()),
            });
        }
        rows.push(
            nums.chunks_exact(2)
                .map(|p| Complex64::new(p[0], p[1]))
                .collect(),
        );
    }
    if rows.len() != dim {
        return Err(GrapeError::Parse {
            path: path.display().to_string(),
            line: 0,
            message: format!("expected {dim} rows, found {}", rows.len()),
        });
    }
    let mut m = Array2::zeros((dim, dim));
    for (i, row) in rows.iter().enumerate() {
        for (j, z) in row.iter().enumerate() {
            m[[i, j]] = *z;
        }
    }
    TargetGate::new(m, path.display().to_string())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedConfig {
    pub n_steps: usize,
    pub dt_s: f64,
    #[serde(default = "default_harmonics")]
    pub n_harmonics: usize,
    pub amplitude_bound_hz: f64,
    pub rng_seed: u64,
}

fn default_harmonics() -> usize {
    4
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberEntry {
    pub ple: Option<f64>,
    pub ore_hz: Option<f64>,
    #[serde(default = "default_weight")]
    pub weight: f64,
}

fn default_weight() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    #[serde(default = "default_contaminant_weight")]
    pub contaminant_weight: f64,
    pub members: Vec<MemberEntry>,
}

fn default_contaminant_weight() -> f64 {
    DEFAULT_CONTAMINANT_WEIGHT
}

impl EnsembleConfig {
    pub fn to_spec(&self) -> EnsembleSpec {
        EnsembleSpec {
            members: self
                .members
                .iter()
                .map(|m| {
                    let mut models = Vec::new();
                    if let Some(scale) = m.ple {
                        models.push(ErrorModel::Ple { scale });
                    }
                    if let Some(offset_hz) = m.ore_hz {
                        models.push(ErrorModel::Ore { offset_hz });
                    }
                    EnsembleMember {
                        models,
                        weight: m.weight,
                    }
                })
                .collect(),
            contaminant_weight: self.contaminant_weight,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltyEntry {
    pub u_max_hz: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
}

fn default_lambda() -> f64 {
    10.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardwareConfig {
    #[serde(default = "default_levels")]
    pub amplitude_levels: u32,
    #[serde(default = "default_phase_res")]
    pub phase_resolution_deg: f64,
    pub max_amplitude_hz: f64,
    #[serde(default)]
    pub pre_delay_s: f64,
    #[serde(default)]
    pub post_delay_s: f64,
}

fn default_levels() -> u32 {
    1024
}

fn default_phase_res() -> f64 {
    0.5
}

impl HardwareConfig {
    pub fn quantization(&self) -> QuantizationSpec {
        QuantizationSpec {
            amplitude_levels: self.amplitude_levels,
            phase_resolution_deg: self.phase_resolution_deg,
            max_amplitude: TAU * self.max_amplitude_hz,
        }
    }

    pub fn pad(&self) -> DelayPad {
        DelayPad {
            pre_s: self.pre_delay_s,
            post_s: self.post_delay_s,
        }
    }
}

/// On-disk layout of a run file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub system: PathBuf,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    pub target: TargetSpec,
    pub seed: SeedConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub ensemble: Option<EnsembleConfig>,
    #[serde(default)]
    pub penalty: Option<PenaltyEntry>,
    #[serde(default)]
    pub hardware: Option<HardwareConfig>,
}

/// A run file with every reference resolved into domain types.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub system: SpinSystem,
    /// Target as configured, before any delay-pad adjustment.
    pub target: TargetGate,
    pub seed_spec: SeedSpec,
    pub seed_rng: u64,
    pub optimizer: OptimizerConfig,
    pub ensemble: EnsembleSpec,
    pub penalty: Option<PenaltyConfig>,
    pub quantization: Option<QuantizationSpec>,
    pub pad: DelayPad,
    pub out_dir: PathBuf,
    /// Non-fatal validation warnings to surface to the user.
    pub warnings: Vec<String>,
}

/// Load and resolve a run file.
pub fn load_run(path: impl AsRef<Path>) -> Result<ResolvedRun> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| GrapeError::io(path.display().to_string(), e))?;
    let file: RunConfigFile = toml::from_str(&text).map_err(|e| GrapeError::Parse {
        path: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    })?;
    let base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();

    let system = load_system(base_dir.join(&file.system))?;
    let target = file.target.resolve(system.n_spins(), &base_dir)?;
    file.optimizer.validate()?;

    let ensemble = file
        .ensemble
        .as_ref()
        .map(EnsembleConfig::to_spec)
        .unwrap_or_default();
    let warnings = ensemble.validate()?;

    let seed_spec = SeedSpec {
        n_steps: file.seed.n_steps,
        dt_s: file.seed.dt_s,
        channels: system.channels.len(),
        n_harmonics: file.seed.n_harmonics,
        amplitude_bound: TAU * file.seed.amplitude_bound_hz,
    };

    let penalty = file.penalty.as_ref().map(|p| PenaltyConfig {
        u_max: TAU * p.u_max_hz,
        lambda: p.lambda,
    });
    let (quantization, pad) = match &file.hardware {
        Some(h) => (Some(h.quantization()), h.pad()),
        None => (None, DelayPad::default()),
    };
    pad.validate()?;
    if let Some(q) = &quantization {
        q.validate()?;
    }

    Ok(ResolvedRun {
        system,
        target,
        seed_spec,
        seed_rng: file.seed.rng_seed,
        optimizer: file.optimizer,
        ensemble,
        penalty,
        quantization,
        pad,
        out_dir: base_dir.join(file.out_dir.unwrap_or_else(|| PathBuf::from("out"))),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::io::Write;

    fn write_file(dir: &Path, name: &str, content: &str) -> PathBuf {
        let path = dir.join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    const SYSTEM_TOML: &str = r#"
spins = [-350.0, 350.0]
contaminants = [0.0]

[[couplings]]
a = 0
b = 1
j_hz = 7.0
mode = "weak"

[[channels]]
spins = [0, 1]
max_amplitude_hz = 2500.0
"#;

    const RUN_TOML: &str = r#"
system = "system.toml"

[target]
gate = "rotation"
spin = 0
axis = "y"
angle_deg = 90.0

[seed]
n_steps = 64
dt_s = 1.0e-5
amplitude_bound_hz = 250.0
rng_seed = 7

[optimizer]
max_iterations = 500
fidelity_goal = 0.995

[ensemble]
contaminant_weight = 0.2
members = [
    { ple = 0.7 },
    { ple = 0.85 },
    { ple = 1.0 },
    { ple = 1.12 },
    { ple = 1.3 },
]

[penalty]
u_max_hz = 2000.0

[hardware]
max_amplitude_hz = 2500.0
pre_delay_s = 1.0e-5
"#;

    #[test]
    fn parses_full_run_file() {
        let dir = tempfile::tempdir().unwrap();
        write_file(dir.path(), "system.toml", SYSTEM_TOML);
        let run_path = write_file(dir.path(), "run.toml", RUN_TOML);
        let run = load_run(&run_path).unwrap();
        assert_eq!(run.system.n_spins(), 2);
        assert_eq!(run.system.contaminants_hz, vec![0.0]);
        assert_eq!(run.target.dim(), 4);
        assert_eq!(run.seed_spec.n_steps, 64);
        assert_eq!(run.seed_spec.channels, 1);
        assert_abs_diff_eq!(run.seed_spec.amplitude_bound, TAU * 250.0);
        assert_eq!(run.optimizer.max_iterations, 500);
        assert_eq!(run.ensemble.members.len(), 5);
        let p = run.penalty.unwrap();
        assert_abs_diff_eq!(p.u_max, TAU * 2000.0);
        assert_abs_diff_eq!(p.lambda, 10.0);
        assert_eq!(run.pad.pre_s, 1.0e-5);
        assert_eq!(run.pad.post_s, 0.0);
        assert!(run.warnings.is_empty());
        assert!(run.out_dir.ends_with("out"));
    }

    #[test]
    fn missing_system_file_is_reported_with_path() {
        let dir = tempfile::tempdir().unwrap();
        let run_path = write_file(dir.path(), "run.toml", RUN_TOML);
        let err = load_run(&run_path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("system.toml"), "{msg}");
    }

    #[test]
    fn unknown_field_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_file(dir.path(), "system.toml", SYSTEM_TOML);
        let bad = RUN_TOML.replace("[penalty]", "[penalty]\nbogus = 1.0");
        let run_path = write_file(dir.path(), "run.toml", &bad);
        assert!(load_run(&run_path).is_err());
    }

    #[test]
    fn matrix_file_target() {
        let dir = tempfile::tempdir().unwrap();
        write_file(dir.path(), "system.toml", SYSTEM_TOML);
        // 4x4 identity with a phase on the last row
        let matrix = "\
1 0  0 0  0 0  0 0
0 0  1 0  0 0  0 0
0 0  0 0  1 0  0 0
0 0  0 0  0 0  0 1
";
        write_file(dir.path(), "target.mat", matrix);
        let run = RUN_TOML.replace(
            "gate = \"rotation\"\nspin = 0\naxis = \"y\"\nangle_deg = 90.0",
            "matrix_file = \"target.mat\"",
        );
        let run_path = write_file(dir.path(), "run.toml", &run);
        let resolved = load_run(&run_path).unwrap();
        assert_eq!(resolved.target.dim(), 4);
        assert_abs_diff_eq!(resolved.target.unitary[[3, 3]].im, 1.0);
    }

    #[test]
    fn uniform_ensemble_grid_warns() {
        let dir = tempfile::tempdir().unwrap();
        write_file(dir.path(), "system.toml", SYSTEM_TOML);
        let run = RUN_TOML.replace("ple = 1.12", "ple = 1.15");
        let run_path = write_file(dir.path(), "run.toml", &run);
        let resolved = load_run(&run_path).unwrap();
        assert_eq!(resolved.warnings.len(), 1);
    }
}
