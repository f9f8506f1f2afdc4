// Copyright 2026 grape-rs Contributors
// SPDX-License-Identifier: Apache-2.0

//! Gate fidelity, ensemble averaging, power penalty, and the analytic
//! gradient of the composite objective.
//!
//! The figure of merit is the phase-invariant overlap
//! `Phi = |tr(U_t^dag U_f)|^2 / N^2`; it is 1 exactly when the sequence
//! implements the target up to a global phase. Robustness against
//! systematic errors comes from averaging `Phi` over an ensemble of
//! error-model variants of the system, optionally mixing in
//! identity-gate fidelities of contaminant spins, and subtracting a
//! power penalty. Because the composition is linear, the composite
//! gradient is the weighted sum of the members' gradients.

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{GrapeError, Result};
use crate::gates::{identity_gate, TargetGate};
use crate::linalg::{dagger, hs_inner};
use crate::propagation::{build_cache, GradientMode, PropagatorCache};
use crate::sequence::{ControlSequence, Step};
use crate::spin::{
    apply_error_model, build_contaminant_hamiltonians, build_hamiltonians, ErrorModel,
    HamiltonianSet, SpinSystem,
};

/// Phase-invariant gate fidelity `|tr(U_t^dag U_f)|^2 / N^2`.
pub fn fidelity(target: &TargetGate, final_prop: &Array2<Complex64>) -> Result<f64> {
    fidelity_unitaries(&target.unitary, final_prop)
}

/// Fidelity between two unitaries of matching dimension.
pub fn fidelity_unitaries(u_t: &Array2<Complex64>, u_f: &Array2<Complex64>) -> Result<f64> {
    if u_t.dim() != u_f.dim() {
        return Err(GrapeError::DimensionMismatch(format!(
            "fidelity of {}x{} against {}x{}",
            u_t.nrows(),
            u_t.ncols(),
            u_f.nrows(),
            u_f.ncols()
        )));
    }
    let phi = hs_inner(u_t, u_f).norm_sqr();
    assert!(
        (-1e-9..=1.0 + 1e-9).contains(&phi),
        "fidelity {phi} outside [0, 1]"
    );
    Ok(phi.clamp(0.0, 1.0))
}

/// `tr(a b)` without forming the product.
fn trace_product(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[[i, j]] * b[[j, i]];
        }
    }
    acc
}

/// Analytic gradient of the fidelity with respect to the sequence
/// parameter vector, assembled from a prebuilt cache in a single pass.
///
/// Pulse-amplitude entries follow the requested mode; delay-duration
/// entries are always exact. Fails if the cache was built against a
/// different sequence.
pub fn gradient(
    cache: &PropagatorCache,
    hams: &HamiltonianSet,
    sequence: &ControlSequence,
    mode: GradientMode,
) -> Result<Vec<f64>> {
    cache.check_sequence(sequence)?;
    let dim_n = hams.dim() as f64;
    let n_steps = cache.n_steps();
    // <X_j|P_j> is split-invariant: evaluate once at j = n.
    let back_overlap = hs_inner(&cache.final_prop, &cache.backward[n_steps - 1]);

    let mut grad = Vec::with_capacity(sequence.parameter_count());
    for (j, step) in sequence.steps.iter().enumerate() {
        match step {
            Step::Pulse {
                duration_s,
                amplitudes: _,
            } => match mode {
                GradientMode::FirstOrder => {
                    // W = X_j P_j^dag; entry = -2 Re[ i dt tr(H_k W)/N <X|P> ]
                    let w = cache.forward[j].dot(&dagger(&cache.backward[j]));
                    for hk in &hams.controls {
                        let t = trace_product(hk, &w);
                        let inner = Complex64::new(0.0, *duration_s) * t / dim_n;
                        grad.push(-2.0 * (inner * back_overlap).re);
                    }
                }
                GradientMode::Exact => {
                    let eig = cache
                        .spectra
                        .as_ref()
                        .and_then(|s| s[j].as_ref())
                        .ok_or_else(|| {
                            GrapeError::InvalidSequence(
                                "cache was not built for exact-mode gradients".into(),
                            )
                        })?;
                    let v = &eig.eigenvectors;
                    let vd = dagger(v);
                    let x_prev = cache.forward_before(j);
                    let w = x_prev.dot(&dagger(&cache.backward[j]));
                    let wv = vd.dot(&w).dot(v);
                    let dim = eig.dim();
                    let t = *duration_s;
                    // Gamma_ac = -i t e^{-i t (la+lc)/2} sinc(t (la-lc)/2)
                    let mut gamma = Array2::zeros((dim, dim));
                    for a in 0..dim {
                        for c in 0..dim {
                            let la = eig.eigenvalues[a];
                            let lc = eig.eigenvalues[c];
                            gamma[[a, c]] = Complex64::new(0.0, -t)
                                * Complex64::from_polar(1.0, -0.5 * (la + lc) * t)
                                * stable_sinc(0.5 * (la - lc) * t);
                        }
                    }
                    for hk in &hams.controls {
                        let b = vd.dot(hk).dot(v);
                        let mut acc = Complex64::new(0.0, 0.0);
                        for a in 0..dim {
                            for c in 0..dim {
                                acc += gamma[[a, c]] * b[[a, c]] * wv[[c, a]];
                            }
                        }
                        grad.push(2.0 * (acc / dim_n * back_overlap).re);
                    }
                }
            },
            Step::Delay { .. } => {
                // exact: dU/dt = -i H0 U
                let w = cache.forward[j].dot(&dagger(&cache.backward[j]));
                let t = trace_product(&hams.h0, &w);
                let inner = Complex64::new(0.0, 1.0) * t / dim_n;
                grad.push(-2.0 * (inner * back_overlap).re);
            }
        }
    }
    Ok(grad)
}

fn stable_sinc(x: f64) -> f64 {
    if x.abs() < 1e-5 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// One member of a composite search space: a list of error models applied
/// on top of the nominal Hamiltonians, and its weight in the average.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleMember {
    pub models: Vec<ErrorModel>,
    pub weight: f64,
}

/// Composite search-space definition.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub members: Vec<EnsembleMember>,
    /// Fraction of the objective allocated to contaminant identity
    /// fidelity; ignored when the system has no contaminants.
    pub contaminant_weight: f64,
}

/// Deliberately non-uniform pulse-length-error grid spanning 70%..130% of
/// nominal field strength. Uniform spacing is avoided so that solutions
/// cannot tune themselves to a periodic set of error values while failing
/// in between.
pub const DEFAULT_PLE_SCALES: [f64; 5] = [0.7, 0.85, 1.0, 1.12, 1.3];

/// Default share of the objective given to contaminant suppression.
pub const DEFAULT_CONTAMINANT_WEIGHT: f64 = 0.2;

impl Default for EnsembleSpec {
    fn default() -> Self {
        Self::nominal()
    }
}

impl EnsembleSpec {
    /// Single error-free member: the plain (non-composite) objective.
    pub fn nominal() -> Self {
        EnsembleSpec {
            members: vec![EnsembleMember {
                models: vec![],
                weight: 1.0,
            }],
            contaminant_weight: DEFAULT_CONTAMINANT_WEIGHT,
        }
    }

    /// Equal-weight pulse-length-error grid at the given scales.
    pub fn ple_grid(scales: &[f64]) -> Self {
        EnsembleSpec {
            members: scales
                .iter()
                .map(|&scale| EnsembleMember {
                    models: vec![ErrorModel::Ple { scale }],
                    weight: 1.0,
                })
                .collect(),
            contaminant_weight: DEFAULT_CONTAMINANT_WEIGHT,
        }
    }

    /// Check the spec and return non-fatal warnings (e.g. a periodic
    /// error-value grid).
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.members.is_empty() {
            return Err(GrapeError::InvalidConfig("ensemble has no members".into()));
        }
        if self.members.iter().any(|m| m.weight < 0.0) {
            return Err(GrapeError::InvalidConfig(
                "ensemble weights must be >= 0".into(),
            ));
        }
        let total: f64 = self.members.iter().map(|m| m.weight).sum();
        if total <= 0.0 {
            return Err(GrapeError::InvalidConfig(
                "ensemble weights sum to zero".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.contaminant_weight) {
            return Err(GrapeError::InvalidConfig(format!(
                "contaminant weight must lie in [0, 1], got {}",
                self.contaminant_weight
            )));
        }
        let mut warnings = Vec::new();
        let ple: Vec<f64> = self
            .members
            .iter()
            .flat_map(|m| m.models.iter())
            .filter_map(|m| match m {
                ErrorModel::Ple { scale } => Some(*scale),
                _ => None,
            })
            .collect();
        let ore: Vec<f64> = self
            .members
            .iter()
            .flat_map(|m| m.models.iter())
            .filter_map(|m| match m {
                ErrorModel::Ore { offset_hz } => Some(*offset_hz),
                _ => None,
            })
            .collect();
        if is_arithmetic_progression(&ple) {
            warnings.push(
                "pulse-length-error grid is an arithmetic progression; solutions may \
                 perform well at the grid points and poorly in between"
                    .to_string(),
            );
        }
        if is_arithmetic_progression(&ore) {
            warnings.push(
                "off-resonance-error grid is an arithmetic progression; solutions may \
                 perform well at the grid points and poorly in between"
                    .to_string(),
            );
        }
        Ok(warnings)
    }

    /// Weights scaled to sum to one.
    pub fn normalized_weights(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let total: f64 = self.members.iter().map(|m| m.weight).sum();
        Ok(self.members.iter().map(|m| m.weight / total).collect())
    }
}

fn is_arithmetic_progression(values: &[f64]) -> bool {
    if values.len() < 3 {
        return false;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let d0 = sorted[1] - sorted[0];
    let scale = sorted
        .iter()
        .map(|v| v.abs())
        .fold(f64::EPSILON, f64::max);
    sorted
        .windows(2)
        .all(|w| ((w[1] - w[0]) - d0).abs() <= 1e-9 * scale)
}

/// Quadratic hinge penalty on per-channel field magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyConfig {
    /// Largest allowed field magnitude, rad/s.
    pub u_max: f64,
    pub lambda: f64,
}

/// Penalty `P = lambda sum max(0, r - u_max)^2` over every pulse step and
/// channel, `r = sqrt(u_x^2 + u_y^2)`, together with `dP/du` aligned with
/// the parameter vector. Zero below the limit; the one-sided derivative is
/// continuous at the hinge.
pub fn power_penalty(sequence: &ControlSequence, u_max: f64, lambda: f64) -> (f64, Vec<f64>) {
    assert!(u_max > 0.0, "u_max must be positive");
    assert!(lambda >= 0.0, "lambda must be >= 0");
    let mut value = 0.0;
    let mut grad = vec![0.0; sequence.parameter_count()];
    let mut k = 0;
    for step in &sequence.steps {
        match step {
            Step::Pulse { amplitudes, .. } => {
                for pair in amplitudes.chunks_exact(2) {
                    let r = pair[0].hypot(pair[1]);
                    if r > u_max {
                        let excess = r - u_max;
                        value += lambda * excess * excess;
                        grad[k] = 2.0 * lambda * excess * pair[0] / r;
                        grad[k + 1] = 2.0 * lambda * excess * pair[1] / r;
                    }
                    k += 2;
                }
            }
            Step::Delay { .. } => {
                k += 1;
            }
        }
    }
    (value, grad)
}

/// Full evaluation of a composite objective at one sequence.
#[derive(Debug, Clone)]
pub struct ObjectiveReport {
    /// `(1 - w_c) <gate fidelity> + w_c <contaminant fidelity> - penalty`.
    pub total: f64,
    pub member_fidelities: Vec<f64>,
    /// Indexed `[member][contaminant]`.
    pub contaminant_fidelities: Vec<Vec<f64>>,
    pub penalty: f64,
    pub gradient: Vec<f64>,
}

impl ObjectiveReport {
    /// Weighted gate fidelity alone, without contaminant share or penalty.
    pub fn gate_average(&self, weights: &[f64]) -> f64 {
        self.member_fidelities
            .iter()
            .zip(weights)
            .map(|(f, w)| f * w)
            .sum()
    }
}

struct MemberSystem {
    weight: f64,
    hams: HamiltonianSet,
    contaminant_hams: Vec<HamiltonianSet>,
}

struct MemberResult {
    fid: f64,
    grad: Vec<f64>,
    contaminants: Vec<(f64, Vec<f64>)>,
}

/// Evaluator for the composite objective over a fixed system, target and
/// ensemble. Error-model Hamiltonians are prepared once at construction;
/// each evaluation then costs one cache build per member.
pub struct CompositeObjective {
    template: ControlSequence,
    target: TargetGate,
    members: Vec<MemberSystem>,
    weights: Vec<f64>,
    contaminant_weight: f64,
    penalty: Option<PenaltyConfig>,
    mode: GradientMode,
    delay_indices: Vec<usize>,
    identity2: TargetGate,
}

impl CompositeObjective {
    pub fn new(
        system: &SpinSystem,
        template: &ControlSequence,
        target: &TargetGate,
        ensemble: &EnsembleSpec,
        penalty: Option<PenaltyConfig>,
        mode: GradientMode,
    ) -> Result<Self> {
        template.validate()?;
        if template.n_controls() != system.n_controls() {
            return Err(GrapeError::DimensionMismatch(format!(
                "sequence has {} controls, system has {}",
                template.n_controls(),
                system.n_controls()
            )));
        }
        if target.dim() != system.dim() {
            return Err(GrapeError::DimensionMismatch(format!(
                "target dimension {} does not match system dimension {}",
                target.dim(),
                system.dim()
            )));
        }
        let weights = ensemble.normalized_weights()?;
        let base = build_hamiltonians(system)?;
        let base_contaminants = build_contaminant_hamiltonians(system)?;
        let mut members = Vec::with_capacity(ensemble.members.len());
        for (member, &weight) in ensemble.members.iter().zip(&weights) {
            let mut hams = base.clone();
            let mut contaminant_hams = base_contaminants.clone();
            for model in &member.models {
                hams = apply_error_model(&hams, *model)?;
                for ch in &mut contaminant_hams {
                    *ch = apply_error_model(ch, *model)?;
                }
            }
            members.push(MemberSystem {
                weight,
                hams,
                contaminant_hams,
            });
        }
        Ok(Self {
            template: template.clone(),
            target: target.clone(),
            members,
            weights,
            contaminant_weight: if system.contaminants_hz.is_empty() {
                0.0
            } else {
                ensemble.contaminant_weight
            },
            penalty,
            mode,
            delay_indices: template.delay_parameter_indices(),
            identity2: identity_gate(1),
        })
    }

    pub fn template(&self) -> &ControlSequence {
        &self.template
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Clamp delay durations to be non-negative.
    pub fn project(&self, x: &mut [f64]) {
        for &i in &self.delay_indices {
            if x[i] < 0.0 {
                x[i] = 0.0;
            }
        }
    }

    pub fn evaluate_params(&self, x: &[f64]) -> Result<ObjectiveReport> {
        let seq = self.template.with_parameters(x)?;
        self.evaluate(&seq)
    }

    /// Evaluate fidelity, contaminant fidelities, penalty and the full
    /// gradient at one sequence. Members are evaluated independently (in
    /// parallel) and reduced in member order, so results are
    /// bit-reproducible regardless of scheduling.
    pub fn evaluate(&self, seq: &ControlSequence) -> Result<ObjectiveReport> {
        let results: Vec<Result<MemberResult>> = self
            .members
            .par_iter()
            .map(|member| {
                let cache = build_cache(&member.hams, seq, &self.target, self.mode)?;
                let fid = fidelity(&self.target, &cache.final_prop)?;
                let grad = gradient(&cache, &member.hams, seq, self.mode)?;
                let contaminants = member
                    .contaminant_hams
                    .iter()
                    .map(|ch| {
                        let cache = build_cache(ch, seq, &self.identity2, self.mode)?;
                        let f = fidelity(&self.identity2, &cache.final_prop)?;
                        let g = gradient(&cache, ch, seq, self.mode)?;
                        Ok((f, g))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(MemberResult {
                    fid,
                    grad,
                    contaminants,
                })
            })
            .collect();

        let n_params = seq.parameter_count();
        let w_c = self.contaminant_weight;
        let mut member_fidelities = Vec::with_capacity(self.members.len());
        let mut contaminant_fidelities = Vec::with_capacity(self.members.len());
        let mut total = 0.0;
        let mut grad = vec![0.0; n_params];
        for (member, result) in self.members.iter().zip(results) {
            let result = result?;
            total += (1.0 - w_c) * member.weight * result.fid;
            for (g, &dg) in grad.iter_mut().zip(&result.grad) {
                *g += (1.0 - w_c) * member.weight * dg;
            }
            if !result.contaminants.is_empty() {
                let share = w_c * member.weight / result.contaminants.len() as f64;
                for (f, cg) in &result.contaminants {
                    total += share * f;
                    for (g, &dg) in grad.iter_mut().zip(cg) {
                        *g += share * dg;
                    }
                }
            }
            member_fidelities.push(result.fid);
            contaminant_fidelities.push(result.contaminants.iter().map(|(f, _)| *f).collect());
        }

        let mut penalty_value = 0.0;
        if let Some(p) = self.penalty {
            let (value, pgrad) = power_penalty(seq, p.u_max, p.lambda);
            penalty_value = value;
            total -= value;
            for (g, dg) in grad.iter_mut().zip(pgrad) {
                *g -= dg;
            }
        }

        Ok(ObjectiveReport {
            total,
            member_fidelities,
            contaminant_fidelities,
            penalty: penalty_value,
            gradient: grad,
        })
    }
}

/// One-shot composite evaluation; see [`CompositeObjective`] for repeated
/// use.
pub fn composite_objective(
    system: &SpinSystem,
    sequence: &ControlSequence,
    target: &TargetGate,
    ensemble: &EnsembleSpec,
    penalty: Option<PenaltyConfig>,
    mode: GradientMode,
) -> Result<ObjectiveReport> {
    CompositeObjective::new(system, sequence, target, ensemble, penalty, mode)?
        .evaluate(sequence)
}
