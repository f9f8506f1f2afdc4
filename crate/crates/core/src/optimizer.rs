// Copyright 2026 grape-rs Contributors
// SPDX-License-Identifier: Apache-2.0

//! Conjugate-gradient ascent over the sequence parameter vector.
//!
//! The optimizer is a Polak-Ribiere (PR+) nonlinear conjugate gradient
//! method with a bracketing line search based on quadratic interpolation.
//! On a quadratic objective the interpolated step is the exact maximizer,
//! so the method inherits the n-step convergence of linear CG; on the
//! fidelity landscape it behaves like CG near a maximum, where the
//! objective is locally quadratic.
//!
//! Searches start from a superposition-of-sinusoids seed so that candidate
//! sequences vary smoothly from the outset. Because only local maxima are
//! found, a completed run can be perturbed a small random distance and
//! re-ascended ([`perturb_and_retry`]); the better of the two results is
//! kept.
//!
//! All randomness flows through caller-supplied seeded generators, so a
//! given configuration reproduces bit-identical results.

use std::f64::consts::TAU;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GrapeError, Result};
use crate::objective::{CompositeObjective, ObjectiveReport};
use crate::propagation::GradientMode;
use crate::sequence::{ControlSequence, SequenceMetadata, Step};

/// Anything the ascent loop can optimize: returns objective value and
/// gradient at a parameter vector, plus an optional feasibility projection.
pub trait AscentObjective: Sync {
    fn eval(&self, x: &[f64]) -> Result<(f64, Vec<f64>)>;
    /// Project a candidate onto the feasible set (default: no-op).
    fn project(&self, _x: &mut [f64]) {}
}

impl AscentObjective for CompositeObjective {
    fn eval(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let report = self.evaluate_params(x)?;
        Ok((report.total, report.gradient))
    }

    fn project(&self, x: &mut [f64]) {
        CompositeObjective::project(self, x)
    }
}

/// Optimizer knobs. Defaults are reasonable for sequences with
/// `dt * u_max` of order 0.1 rad or less.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    /// Terminate as soon as the objective reaches this value.
    pub fidelity_goal: f64,
    /// Terminate when the gradient norm drops below this floor.
    pub gradient_norm_floor: f64,
    /// First trial step of the very first line search.
    pub initial_step: f64,
    /// Largest per-probe expansion factor of the trial step.
    pub step_growth: f64,
    /// Smallest per-probe contraction factor of the trial step.
    pub step_shrink: f64,
    /// Maximum objective evaluations per line search.
    pub max_probes: usize,
    /// Sufficient-increase coefficient of the acceptance test.
    pub armijo_c1: f64,
    /// Restart perturbation size as a fraction of the parameter norm.
    pub perturbation_magnitude: f64,
    pub max_restarts: usize,
    /// Seed for restart perturbations.
    pub rng_seed: u64,
    pub gradient_mode: GradientMode,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iterations: 1000,
            fidelity_goal: 0.999,
            gradient_norm_floor: 1e-12,
            initial_step: 1.0,
            step_growth: 4.0,
            step_shrink: 0.1,
            max_probes: 20,
            armijo_c1: 1e-4,
            perturbation_magnitude: 0.05,
            max_restarts: 3,
            rng_seed: 0,
            gradient_mode: GradientMode::FirstOrder,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.fidelity_goal && self.fidelity_goal <= 1.0) {
            return Err(GrapeError::InvalidConfig(format!(
                "fidelity goal must lie in (0, 1], got {}",
                self.fidelity_goal
            )));
        }
        if self.perturbation_magnitude < 0.0 {
            return Err(GrapeError::InvalidConfig(
                "perturbation magnitude must be >= 0".into(),
            ));
        }
        if self.max_iterations == 0 || self.max_probes == 0 {
            return Err(GrapeError::InvalidConfig(
                "iteration and probe budgets must be positive".into(),
            ));
        }
        if self.initial_step <= 0.0
            || self.step_growth <= 1.0
            || !(0.0 < self.step_shrink && self.step_shrink < 1.0)
        {
            return Err(GrapeError::InvalidConfig(
                "line-search steps require initial_step > 0, growth > 1, 0 < shrink < 1".into(),
            ));
        }
        Ok(())
    }
}

/// Why an ascent stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    GoalReached,
    /// Gradient below the floor, or no ascent direction yields further
    /// representable improvement.
    GradientFloor,
    IterationCap,
    RestartsExhausted,
}

impl std::fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            TerminationReason::GoalReached => "goal_reached",
            TerminationReason::GradientFloor => "gradient_floor",
            TerminationReason::IterationCap => "iteration_cap",
            TerminationReason::RestartsExhausted => "restarts_exhausted",
        };
        f.write_str(s)
    }
}

/// Result of one CG run (no restarts).
#[derive(Debug, Clone)]
pub struct CgRun {
    pub x: Vec<f64>,
    pub value: f64,
    /// Accepted objective values, one per iteration, starting with the
    /// initial point. Non-decreasing by construction.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub reason: TerminationReason,
}

/// Result of CG plus perturbation restarts.
#[derive(Debug, Clone)]
pub struct AscentOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    /// Concatenated traces of all runs.
    pub trace: Vec<f64>,
    /// Index into `trace` where each run begins.
    pub run_starts: Vec<usize>,
    pub iterations: usize,
    pub restarts: usize,
    pub reason: TerminationReason,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Accepted {
    alpha: f64,
    value: f64,
    gradient: Vec<f64>,
    x: Vec<f64>,
}

/// Backtracking-and-expansion line search with quadratic interpolation.
///
/// Each probe's directional slope (free, since objective evaluations
/// return the gradient) gives a secant model of `phi'`; its zero is the
/// next trial step, safeguarded to `[shrink, growth]` times the current
/// step. The best probe satisfying the sufficient-increase test is
/// returned. Refinement stops when the interpolated step stops moving or
/// when a further probe adds almost nothing over the gain already banked.
/// On a quadratic objective the slope is linear, so the secant zero is
/// the exact maximizer and conjugate directions stay conjugate.
fn line_search(
    obj: &impl AscentObjective,
    x0: &[f64],
    direction: &[f64],
    f0: f64,
    dphi0: f64,
    alpha_init: f64,
    cfg: &OptimizerConfig,
) -> Result<Option<Accepted>> {
    debug_assert!(dphi0 > 0.0);
    let mut alpha = alpha_init;
    let mut best: Option<Accepted> = None;
    for _ in 0..cfg.max_probes {
        let mut xt: Vec<f64> = x0
            .iter()
            .zip(direction)
            .map(|(xi, di)| xi + alpha * di)
            .collect();
        obj.project(&mut xt);
        let (f, g) = obj.eval(&xt)?;
        let slope = dot(&g, direction);
        let sufficient = f >= f0 + cfg.armijo_c1 * alpha * dphi0;
        let mut stop = false;
        // on ties the later (interpolation-refined) probe wins
        if sufficient && best.as_ref().is_none_or(|b| f >= b.value) {
            let gain = best.as_ref().map_or(f64::INFINITY, |b| f - b.value);
            best = Some(Accepted {
                alpha,
                value: f,
                gradient: g,
                x: xt,
            });
            // diminishing returns once a refinement adds < 5% of the
            // improvement already banked
            if gain <= 0.05 * (f - f0) {
                stop = true;
            }
        }
        // secant zero of phi' through (0, dphi0) and (alpha, slope)
        let zero = if dphi0 - slope > 0.0 {
            let z = dphi0 * alpha / (dphi0 - slope);
            if z.is_finite() && z > 0.0 {
                Some(z)
            } else {
                None
            }
        } else {
            None
        };
        let next = if sufficient {
            // doing well: refine toward the zero, or expand past it
            match zero {
                Some(z) => z.clamp(cfg.step_shrink * alpha, cfg.step_growth * alpha),
                None => cfg.step_growth * alpha,
            }
        } else {
            // insufficient increase: always contract; the secant zero of a
            // concave overshoot lies below 0.6 alpha, so the cap keeps
            // interpolated backtracking exact on quadratics
            match zero {
                Some(z) => z.clamp(cfg.step_shrink * alpha, 0.6 * alpha),
                None => 0.5 * alpha,
            }
        };
        if let Some(b) = &best {
            // interpolated step converged onto the accepted one; tight
            // tolerance, conjugate directions need near-exact steps
            if (next - b.alpha).abs() <= 1e-10 * b.alpha {
                stop = true;
            }
        }
        // re-probing the same point cannot improve the model
        if (next - alpha).abs() <= 1e-12 * alpha.abs() {
            stop = true;
        }
        if stop {
            break;
        }
        alpha = next;
    }
    Ok(best)
}

/// Polak-Ribiere conjugate-gradient ascent from `x0`.
///
/// The direction resets to steepest ascent whenever the CG direction fails
/// to be an ascent direction and every `n` iterations. Accepted iterates
/// never decrease the objective; the returned point is at least as good as
/// the input.
pub fn conjugate_gradient_ascend(
    obj: &impl AscentObjective,
    x0: &[f64],
    cfg: &OptimizerConfig,
) -> Result<CgRun> {
    cfg.validate()?;
    let n = x0.len();
    let mut x = x0.to_vec();
    obj.project(&mut x);
    let (mut f, mut g) = obj
        .eval(&x)
        .map_err(|e| GrapeError::Objective {
            iteration: 0,
            source: Box::new(e),
        })?;
    let mut trace = vec![f];
    if f >= cfg.fidelity_goal {
        return Ok(CgRun {
            x,
            value: f,
            trace,
            iterations: 0,
            reason: TerminationReason::GoalReached,
        });
    }

    let mut direction = g.clone();
    let mut alpha_ws = cfg.initial_step;
    let mut since_reset = 0usize;
    let mut iterations = 0usize;
    let mut reason = TerminationReason::IterationCap;

    for iter in 1..=cfg.max_iterations {
        iterations = iter;
        let gnorm2 = dot(&g, &g);
        if gnorm2.sqrt() < cfg.gradient_norm_floor {
            reason = TerminationReason::GradientFloor;
            break;
        }
        let mut dphi0 = dot(&direction, &g);
        let mut on_steepest = since_reset == 0;
        if dphi0 <= 0.0 {
            direction = g.clone();
            dphi0 = gnorm2;
            since_reset = 0;
            on_steepest = true;
        }
        let wrap = |e: GrapeError| GrapeError::Objective {
            iteration: iter,
            source: Box::new(e),
        };
        let mut accepted = line_search(obj, &x, &direction, f, dphi0, alpha_ws, cfg)
            .map_err(wrap)?;
        // fall back to steepest ascent at the configured fresh step scale
        // unless that is exactly the search that just failed
        if accepted.is_none() && !(on_steepest && alpha_ws == cfg.initial_step) {
            direction = g.clone();
            since_reset = 0;
            accepted =
                line_search(obj, &x, &direction, f, gnorm2, cfg.initial_step, cfg).map_err(wrap)?;
        }
        let Some(acc) = accepted else {
            // no representable improvement along the gradient: converged
            reason = TerminationReason::GradientFloor;
            break;
        };
        // PR+ coefficient
        let beta = ((dot(&acc.gradient, &acc.gradient) - dot(&acc.gradient, &g)) / gnorm2)
            .max(0.0);
        x = acc.x;
        f = acc.value;
        since_reset += 1;
        if since_reset >= n {
            direction = acc.gradient.clone();
            since_reset = 0;
        } else {
            direction = acc
                .gradient
                .iter()
                .zip(&direction)
                .map(|(gi, di)| gi + beta * di)
                .collect();
        }
        g = acc.gradient;
        alpha_ws = acc.alpha;
        trace.push(f);
        if f >= cfg.fidelity_goal {
            reason = TerminationReason::GoalReached;
            break;
        }
    }
    Ok(CgRun {
        x,
        value: f,
        trace,
        iterations,
        reason,
    })
}

/// Standard normal via Box-Muller; used only for restart directions.
fn gaussian(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

/// Perturb a completed run a small random distance from its maximum and
/// re-ascend, keeping the better result (the incumbent on ties). Repeats
/// until the goal is reached or `max_restarts` attempts are spent.
pub fn perturb_and_retry(
    obj: &impl AscentObjective,
    incumbent: CgRun,
    cfg: &OptimizerConfig,
    rng: &mut impl Rng,
) -> Result<AscentOutcome> {
    let mut best = incumbent;
    let mut trace = best.trace.clone();
    let mut run_starts = vec![0usize];
    let mut iterations = best.iterations;
    let mut restarts = 0usize;
    let mut reason = best.reason;

    while reason != TerminationReason::GoalReached && restarts < cfg.max_restarts {
        restarts += 1;
        let scale_ref = {
            let n = norm(&best.x);
            if n > 0.0 {
                n
            } else {
                1.0
            }
        };
        let mut noise: Vec<f64> = (0..best.x.len()).map(|_| gaussian(rng)).collect();
        let noise_norm = norm(&noise).max(f64::MIN_POSITIVE);
        let step = cfg.perturbation_magnitude * scale_ref / noise_norm;
        for (ni, xi) in noise.iter_mut().zip(&best.x) {
            *ni = xi + *ni * step;
        }
        let run = conjugate_gradient_ascend(obj, &noise, cfg)?;
        run_starts.push(trace.len());
        trace.extend_from_slice(&run.trace);
        iterations += run.iterations;
        if run.value > best.value {
            best = run;
        }
        if best.value >= cfg.fidelity_goal {
            reason = TerminationReason::GoalReached;
        }
    }
    if reason != TerminationReason::GoalReached && restarts == cfg.max_restarts && restarts > 0 {
        reason = TerminationReason::RestartsExhausted;
    }
    Ok(AscentOutcome {
        x: best.x,
        value: best.value,
        trace,
        run_starts,
        iterations,
        restarts,
        reason,
    })
}

/// CG ascent plus perturbation restarts, all seeded from the config.
pub fn ascend_with_restarts(
    obj: &impl AscentObjective,
    x0: &[f64],
    cfg: &OptimizerConfig,
) -> Result<AscentOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let first = conjugate_gradient_ascend(obj, x0, cfg)?;
    perturb_and_retry(obj, first, cfg, &mut rng)
}

/// Seed-sequence shape: `n_steps` pulses of `dt_s` each.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedSpec {
    pub n_steps: usize,
    pub dt_s: f64,
    pub channels: usize,
    pub n_harmonics: usize,
    /// Largest per-channel field magnitude of the seed, rad/s.
    pub amplitude_bound: f64,
}

/// Build a smooth random initial sequence: per control, a superposition of
/// `n_harmonics` sinusoids with random amplitudes and phases, rescaled so
/// the largest per-channel magnitude equals `amplitude_bound`.
/// Deterministic for a given generator state.
pub fn seed_sequence(spec: &SeedSpec, rng: &mut impl Rng) -> Result<ControlSequence> {
    if spec.n_steps == 0 {
        return Err(GrapeError::InvalidConfig("seed needs n_steps >= 1".into()));
    }
    if spec.channels == 0 {
        return Err(GrapeError::InvalidConfig("seed needs >= 1 channel".into()));
    }
    if !(spec.amplitude_bound > 0.0) || spec.dt_s <= 0.0 {
        return Err(GrapeError::InvalidConfig(
            "seed needs positive dt_s and amplitude bound".into(),
        ));
    }
    let n = spec.n_steps;
    let n_controls = 2 * spec.channels;
    let mut curves = vec![vec![0.0f64; n]; n_controls];
    for curve in curves.iter_mut() {
        for h in 1..=spec.n_harmonics {
            let a: f64 = rng.gen_range(-1.0..1.0);
            let phase: f64 = rng.gen_range(0.0..TAU);
            for (j, y) in curve.iter_mut().enumerate() {
                *y += a * (TAU * h as f64 * j as f64 / n as f64 + phase).sin();
            }
        }
    }
    let mut max_mag = 0.0f64;
    for ch in 0..spec.channels {
        for j in 0..n {
            let mag = curves[2 * ch][j].hypot(curves[2 * ch + 1][j]);
            if mag > max_mag {
                max_mag = mag;
            }
        }
    }
    let scale = if max_mag > 0.0 {
        spec.amplitude_bound / max_mag
    } else {
        0.0
    };
    let steps = (0..n)
        .map(|j| Step::Pulse {
            duration_s: spec.dt_s,
            amplitudes: (0..n_controls).map(|c| curves[c][j] * scale).collect(),
        })
        .collect();
    Ok(ControlSequence {
        steps,
        channels: spec.channels,
        metadata: SequenceMetadata {
            label: String::new(),
            seed: None,
            provenance: format!("sinusoid seed, {} harmonics", spec.n_harmonics),
        },
    })
}

/// Merge adjacent step pairs: half the steps, double the duration, each
/// amplitude the arithmetic mean of the merged pair. Total duration is
/// preserved pair by pair (`dt + dt = 2 dt` is exact). Requires an even
/// number of uniform-duration pulse steps and no delays.
pub fn coarsen(seq: &ControlSequence) -> Result<ControlSequence> {
    if seq.steps.len() % 2 != 0 {
        return Err(GrapeError::InvalidSequence(format!(
            "coarsening needs an even step count, got {}",
            seq.steps.len()
        )));
    }
    let mut dt: Option<f64> = None;
    for step in &seq.steps {
        match step {
            Step::Pulse { duration_s, .. } => match dt {
                None => dt = Some(*duration_s),
                Some(d) if d == *duration_s => {}
                Some(d) => {
                    return Err(GrapeError::InvalidSequence(format!(
                        "coarsening needs uniform step durations, found {d} and {duration_s}"
                    )))
                }
            },
            Step::Delay { .. } => {
                return Err(GrapeError::InvalidSequence(
                    "coarsening is defined for pulse-only sequences".into(),
                ))
            }
        }
    }
    let dt = dt.ok_or_else(|| GrapeError::InvalidSequence("empty sequence".into()))?;
    let mut steps = Vec::with_capacity(seq.steps.len() / 2);
    for pair in seq.steps.chunks_exact(2) {
        let (Step::Pulse { amplitudes: a, .. }, Step::Pulse { amplitudes: b, .. }) =
            (&pair[0], &pair[1])
        else {
            unreachable!("delays rejected above");
        };
        steps.push(Step::Pulse {
            duration_s: 2.0 * dt,
            amplitudes: a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect(),
        });
    }
    let mut out = ControlSequence {
        steps,
        channels: seq.channels,
        metadata: seq.metadata.clone(),
    };
    out.metadata.provenance = format!("coarsened from {} steps", seq.steps.len());
    Ok(out)
}

/// One rung of a coarsening study.
#[derive(Debug, Clone)]
pub struct CoarseningRung {
    pub n_steps: usize,
    pub objective: f64,
    pub sequence: ControlSequence,
}

/// Repeatedly halve the time resolution of a sequence and re-optimize,
/// recording the objective ladder. Rung 0 is the input evaluated as-is;
/// each further rung coarsens the previous rung's (re-optimized) sequence.
pub fn coarsening_study<F>(
    initial: &ControlSequence,
    make_objective: F,
    cfg: &OptimizerConfig,
    depth: usize,
) -> Result<Vec<CoarseningRung>>
where
    F: Fn(&ControlSequence) -> Result<CompositeObjective>,
{
    let obj0 = make_objective(initial)?;
    let report = obj0.evaluate(initial)?;
    let mut rungs = vec![CoarseningRung {
        n_steps: initial.n_steps(),
        objective: report.total,
        sequence: initial.clone(),
    }];
    let mut current = initial.clone();
    for level in 0..depth {
        let coarse = coarsen(&current)?;
        let obj = make_objective(&coarse)?;
        let mut cfg_level = cfg.clone();
        // decorrelate restart noise between rungs, still deterministic
        cfg_level.rng_seed = cfg.rng_seed.wrapping_add(level as u64 + 1);
        let outcome = ascend_with_restarts(&obj, &coarse.parameter_vector(), &cfg_level)?;
        let sequence = coarse.with_parameters(&outcome.x)?;
        rungs.push(CoarseningRung {
            n_steps: sequence.n_steps(),
            objective: outcome.value,
            sequence,
        });
        current = rungs.last().unwrap().sequence.clone();
    }
    Ok(rungs)
}

/// Full optimization result for a sequence problem.
#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub sequence: ControlSequence,
    pub objective: f64,
    pub trace: Vec<f64>,
    pub run_starts: Vec<usize>,
    pub iterations: usize,
    pub restarts: usize,
    pub reason: TerminationReason,
    /// Per-member breakdown at the returned sequence.
    pub report: ObjectiveReport,
}

/// Optimize a sequence problem starting from `initial`: CG ascent with
/// perturbation restarts, then a final per-member evaluation at the best
/// point.
pub fn optimize_sequence(
    obj: &CompositeObjective,
    initial: &ControlSequence,
    cfg: &OptimizerConfig,
) -> Result<OptimizationResult> {
    let outcome = ascend_with_restarts(obj, &initial.parameter_vector(), cfg)?;
    let mut sequence = initial.with_parameters(&outcome.x)?;
    sequence.metadata.provenance = format!(
        "cg ascent: {} iterations, {} restarts, termination {}",
        outcome.iterations, outcome.restarts, outcome.reason
    );
    let report = obj.evaluate_params(&outcome.x)?;
    Ok(OptimizationResult {
        sequence,
        objective: outcome.value,
        trace: outcome.trace,
        run_starts: outcome.run_starts,
        iterations: outcome.iterations,
        restarts: outcome.restarts,
        reason: outcome.reason,
        report,
    })
}
