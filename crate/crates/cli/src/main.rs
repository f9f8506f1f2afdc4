// Copyright 2026 grape-rs Contributors
// SPDX-License-Identifier: Apache-2.0

//! Command-line driver: optimization runs, robustness scans, coarsening
//! studies, reference-pulse generation and sequence import/export.
//!
//! Every command is deterministic given its configuration and seed. All
//! emitted tables are tab-delimited text with header rows.
//!
//! Exit codes: 0 success (goal reached where applicable), 1 usage or
//! configuration error, 2 optimization finished without reaching the
//! goal, 3 numerical failure.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use grape_core::config::{load_run, ResolvedRun};
use grape_core::{
    adjust_target, build_hamiltonians, coarsening_study, optimize_sequence, quantize,
    reference::bb1_sequence, scan, seed_sequence, sequence_propagator, CompositeObjective,
    ControlSequence, GrapeError, OptimizationResult, Step, SweepKind, SweepSpec, TargetGate,
    TerminationReason,
};

#[derive(Parser)]
#[command(
    name = "grape",
    about = "Shaped-pulse sequence design for coupled spin systems",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded optimization and write the resulting sequence.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the run file).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override both the seed-sequence and restart RNG seeds.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        quiet: bool,
    },
    /// Plain fidelity of a sequence file against the configured target.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        sequence: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
    /// Sweep a systematic error and record fidelity at each value.
    Scan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        sequence: PathBuf,
        #[arg(long, value_enum)]
        kind: SweepKindArg,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        points: usize,
        /// Output file (default: <out_dir>/scan.txt).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Halve the time resolution repeatedly, re-optimizing at each rung.
    CoarsenStudy {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        sequence: PathBuf,
        /// Number of coarsening levels.
        #[arg(long, default_value_t = 1)]
        depth: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Re-emit a sequence file, optionally quantized or as amplitude/phase
    /// rows.
    Export {
        #[arg(long)]
        sequence: PathBuf,
        #[arg(long, value_enum, default_value_t = ExportFormat::Native)]
        format: ExportFormat,
        /// Run file providing the hardware section for --quantize.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Apply the configured hardware quantization before writing.
        #[arg(long)]
        quantize: bool,
        /// Render delay steps as zero-amplitude rows in amp_phase format.
        #[arg(long)]
        delays_as_zero: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Emit a BB1 composite rotation as a hard-pulse sequence file.
    Bb1 {
        /// Rotation angle in degrees, in (0, 360].
        #[arg(long)]
        angle_deg: f64,
        /// Rotation-axis phase in degrees from +x.
        #[arg(long, default_value_t = 0.0)]
        axis_phase_deg: f64,
        /// Nominal field strength in Hz.
        #[arg(long)]
        amplitude_hz: f64,
        #[arg(long, default_value = "bb1.txt")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepKindArg {
    Ple,
    Ore,
}

impl From<SweepKindArg> for SweepKind {
    fn from(k: SweepKindArg) -> Self {
        match k {
            SweepKindArg::Ple => SweepKind::Ple,
            SweepKindArg::Ore => SweepKind::Ore,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ExportFormat {
    Native,
    AmpPhase,
}

fn main() {
    init_thread_pool();
    let cli = Cli::parse();
    let code = match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            exit_code_for(&e)
        }
    };
    std::process::exit(code);
}

/// Honor GRAPE_THREADS for ensemble evaluation parallelism.
fn init_thread_pool() {
    if let Ok(v) = std::env::var("GRAPE_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn exit_code_for(e: &GrapeError) -> i32 {
    match e {
        GrapeError::Eigen(_)
        | GrapeError::Objective { .. }
        | GrapeError::NotUnitary { .. }
        | GrapeError::NotHermitian { .. }
        | GrapeError::StaleCache { .. } => 3,
        _ => 1,
    }
}

fn run(command: Command) -> Result<i32, GrapeError> {
    match command {
        Command::Optimize {
            config,
            out,
            seed,
            quiet,
        } => cmd_optimize(&config, out, seed, quiet),
        Command::Evaluate {
            config,
            sequence,
            quiet,
        } => cmd_evaluate(&config, &sequence, quiet),
        Command::Scan {
            config,
            sequence,
            kind,
            from,
            to,
            points,
            out,
            quiet,
        } => cmd_scan(&config, &sequence, kind.into(), from, to, points, out, quiet),
        Command::CoarsenStudy {
            config,
            sequence,
            depth,
            out,
            quiet,
        } => cmd_coarsen_study(&config, &sequence, depth, out, quiet),
        Command::Export {
            sequence,
            format,
            config,
            quantize,
            delays_as_zero,
            out,
        } => cmd_export(&sequence, format, config, quantize, delays_as_zero, &out),
        Command::Bb1 {
            angle_deg,
            axis_phase_deg,
            amplitude_hz,
            out,
        } => cmd_bb1(angle_deg, axis_phase_deg, amplitude_hz, &out),
    }
}

fn report_warnings(run: &ResolvedRun, quiet: bool) {
    if !quiet {
        for w in &run.warnings {
            eprintln!("warning: {w}");
        }
    }
}

/// Target with any configured delay pads folded in.
fn effective_target(run: &ResolvedRun) -> Result<TargetGate, GrapeError> {
    if run.pad.is_zero() {
        return Ok(run.target.clone());
    }
    let h0 = build_hamiltonians(&run.system)?.h0;
    adjust_target(&run.target, &h0, &run.pad)
}

fn fmt(x: f64) -> String {
    format!("{x:.14e}")
}

fn write_text(path: &Path, text: &str) -> Result<(), GrapeError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| GrapeError::io(parent.display().to_string(), e))?;
        }
    }
    std::fs::write(path, text).map_err(|e| GrapeError::io(path.display().to_string(), e))
}

fn cmd_optimize(
    config: &Path,
    out: Option<PathBuf>,
    seed_override: Option<u64>,
    quiet: bool,
) -> Result<i32, GrapeError> {
    let mut run = load_run(config)?;
    report_warnings(&run, quiet);
    if let Some(dir) = out {
        run.out_dir = dir;
    }
    let seed_value = seed_override.unwrap_or(run.seed_rng);
    if seed_override.is_some() {
        run.optimizer.rng_seed = seed_value;
    }

    let target = effective_target(&run)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed_value);
    let mut initial = seed_sequence(&run.seed_spec, &mut rng)?;
    initial.metadata.label = target.label.clone();
    initial.metadata.seed = Some(seed_value);

    let objective = CompositeObjective::new(
        &run.system,
        &initial,
        &target,
        &run.ensemble,
        run.penalty,
        run.optimizer.gradient_mode,
    )?;
    let result = optimize_sequence(&objective, &initial, &run.optimizer)?;

    std::fs::create_dir_all(&run.out_dir)
        .map_err(|e| GrapeError::io(run.out_dir.display().to_string(), e))?;
    let seq_path = run.out_dir.join("sequence.txt");
    result.sequence.save(&seq_path)?;
    write_text(
        &run.out_dir.join("summary.txt"),
        &summary_text(&run, &target, &result, seed_value),
    )?;
    write_text(&run.out_dir.join("trace.txt"), &trace_text(&result))?;

    if !quiet {
        println!("objective {:.8}", result.objective);
        for (i, f) in result.report.member_fidelities.iter().enumerate() {
            let contam = if result.report.contaminant_fidelities[i].is_empty() {
                String::new()
            } else {
                format!(
                    "  contaminants {}",
                    result.report.contaminant_fidelities[i]
                        .iter()
                        .map(|f| format!("{f:.6}"))
                        .collect::<Vec<_>>()
                        .join(" ")
                )
            };
            println!("member {i} fidelity {f:.8}{contam}");
        }
        println!(
            "termination {} after {} iterations, {} restarts",
            result.reason, result.iterations, result.restarts
        );
        println!("sequence written to {}", seq_path.display());
    }
    Ok(if result.reason == TerminationReason::GoalReached {
        0
    } else {
        2
    })
}

fn summary_text(
    run: &ResolvedRun,
    target: &TargetGate,
    result: &OptimizationResult,
    seed: u64,
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "target\t{}", target.label);
    let _ = writeln!(s, "objective\t{}", fmt(result.objective));
    let _ = writeln!(s, "penalty\t{}", fmt(result.report.penalty));
    let _ = writeln!(s, "fidelity_goal\t{}", fmt(run.optimizer.fidelity_goal));
    let _ = writeln!(
        s,
        "goal_reached\t{}",
        result.reason == TerminationReason::GoalReached
    );
    let _ = writeln!(s, "termination\t{}", result.reason);
    let _ = writeln!(s, "iterations\t{}", result.iterations);
    let _ = writeln!(s, "restarts\t{}", result.restarts);
    let _ = writeln!(s, "seed\t{seed}");
    let _ = writeln!(s, "steps\t{}", result.sequence.n_steps());
    let _ = writeln!(
        s,
        "total_duration_s\t{}",
        fmt(result.sequence.total_duration_s())
    );
    let _ = writeln!(s);
    let _ = writeln!(s, "member\tweight\tfidelity\tcontaminant_fidelities");
    for (i, fid) in result.report.member_fidelities.iter().enumerate() {
        let contam = result.report.contaminant_fidelities[i]
            .iter()
            .map(|f| fmt(*f))
            .collect::<Vec<_>>()
            .join(";");
        let _ = writeln!(
            s,
            "{i}\t{}\t{}\t{}",
            fmt(run.ensemble.members[i].weight),
            fmt(*fid),
            if contam.is_empty() { "-" } else { &contam }
        );
    }
    s
}

fn trace_text(result: &OptimizationResult) -> String {
    let mut s = String::from("iteration\trun\tobjective\n");
    let mut run_idx = 0usize;
    for (i, value) in result.trace.iter().enumerate() {
        while run_idx + 1 < result.run_starts.len() && i >= result.run_starts[run_idx + 1] {
            run_idx += 1;
        }
        let _ = writeln!(s, "{i}\t{run_idx}\t{}", fmt(*value));
    }
    s
}

fn cmd_evaluate(config: &Path, sequence: &Path, quiet: bool) -> Result<i32, GrapeError> {
    let run = load_run(config)?;
    let seq = ControlSequence::load(sequence)?;
    let hams = build_hamiltonians(&run.system)?;
    let u = sequence_propagator(&hams, &seq)?;
    let phi = grape_core::fidelity(&run.target, &u)?;
    if quiet {
        println!("{}", fmt(phi));
    } else {
        println!("fidelity\t{}", fmt(phi));
    }
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_scan(
    config: &Path,
    sequence: &Path,
    kind: SweepKind,
    from: f64,
    to: f64,
    points: usize,
    out: Option<PathBuf>,
    quiet: bool,
) -> Result<i32, GrapeError> {
    let run = load_run(config)?;
    let seq = ControlSequence::load(sequence)?;
    let rows = scan(
        &run.system,
        &seq,
        &run.target,
        &SweepSpec {
            kind,
            from,
            to,
            points,
        },
    )?;
    let kind_name = match kind {
        SweepKind::Ple => "ple",
        SweepKind::Ore => "ore",
    };
    let mut text = String::from("error_kind\terror_value\tfidelity\n");
    for row in &rows {
        let _ = writeln!(text, "{kind_name}\t{}\t{}", fmt(row.value), fmt(row.fidelity));
    }
    let out_path = out.unwrap_or_else(|| run.out_dir.join("scan.txt"));
    write_text(&out_path, &text)?;
    if !quiet {
        println!("{} rows written to {}", rows.len(), out_path.display());
    }
    Ok(0)
}

fn cmd_coarsen_study(
    config: &Path,
    sequence: &Path,
    depth: usize,
    out: Option<PathBuf>,
    quiet: bool,
) -> Result<i32, GrapeError> {
    let mut run = load_run(config)?;
    report_warnings(&run, quiet);
    if let Some(dir) = out {
        run.out_dir = dir;
    }
    let seq = ControlSequence::load(sequence)?;
    let target = effective_target(&run)?;
    let rungs = coarsening_study(
        &seq,
        |template| {
            CompositeObjective::new(
                &run.system,
                template,
                &target,
                &run.ensemble,
                run.penalty,
                run.optimizer.gradient_mode,
            )
        },
        &run.optimizer,
        depth,
    )?;
    std::fs::create_dir_all(&run.out_dir)
        .map_err(|e| GrapeError::io(run.out_dir.display().to_string(), e))?;
    let mut ladder = String::from("n_steps\tobjective\tsequence_file\n");
    for rung in &rungs {
        let name = format!("coarse_{:05}.txt", rung.n_steps);
        rung.sequence.save(run.out_dir.join(&name))?;
        let _ = writeln!(ladder, "{}\t{}\t{name}", rung.n_steps, fmt(rung.objective));
    }
    write_text(&run.out_dir.join("ladder.txt"), &ladder)?;
    if !quiet {
        for rung in &rungs {
            println!("{} steps: objective {:.8}", rung.n_steps, rung.objective);
        }
    }
    Ok(0)
}

fn cmd_export(
    sequence: &Path,
    format: ExportFormat,
    config: Option<PathBuf>,
    apply_quantization: bool,
    delays_as_zero: bool,
    out: &Path,
) -> Result<i32, GrapeError> {
    let mut seq = ControlSequence::load(sequence)?;
    if apply_quantization {
        let config = config.ok_or_else(|| {
            GrapeError::InvalidConfig("--quantize needs --config with a [hardware] section".into())
        })?;
        let run = load_run(&config)?;
        let spec = run.quantization.ok_or_else(|| {
            GrapeError::InvalidConfig("run file has no [hardware] section".into())
        })?;
        seq = quantize(&seq, &spec)?;
    }
    match format {
        ExportFormat::Native => {
            seq.save(out)?;
        }
        ExportFormat::AmpPhase => {
            write_text(out, &amp_phase_text(&seq, delays_as_zero)?)?;
        }
    }
    Ok(0)
}

/// Amplitude/phase rows: duration, then per channel magnitude in Hz and
/// phase in degrees (counterclockwise from +x, in [0, 360)).
fn amp_phase_text(seq: &ControlSequence, delays_as_zero: bool) -> Result<String, GrapeError> {
    let mut s = String::new();
    let _ = writeln!(s, "# label: {}", seq.metadata.label);
    s.push_str("duration_s");
    for c in 0..seq.channels {
        let _ = write!(s, "\tch{c}_amplitude_hz\tch{c}_phase_deg");
    }
    s.push('\n');
    for (i, step) in seq.steps.iter().enumerate() {
        match step {
            Step::Pulse {
                duration_s,
                amplitudes,
            } => {
                let _ = write!(s, "{}", fmt(*duration_s));
                for pair in amplitudes.chunks_exact(2) {
                    let amp_hz = pair[0].hypot(pair[1]) / TAU;
                    let mut phase_deg = pair[1].atan2(pair[0]).to_degrees();
                    if phase_deg < 0.0 {
                        phase_deg += 360.0;
                    }
                    let _ = write!(s, "\t{}\t{}", fmt(amp_hz), fmt(phase_deg));
                }
                s.push('\n');
            }
            Step::Delay { duration_s } => {
                if !delays_as_zero {
                    return Err(GrapeError::InvalidSequence(format!(
                        "step {i} is a delay; amp_phase export needs --delays-as-zero"
                    )));
                }
                let _ = write!(s, "{}", fmt(*duration_s));
                for _ in 0..seq.channels {
                    let _ = write!(s, "\t{}\t{}", fmt(0.0), fmt(0.0));
                }
                s.push('\n');
            }
        }
    }
    Ok(s)
}

fn cmd_bb1(
    angle_deg: f64,
    axis_phase_deg: f64,
    amplitude_hz: f64,
    out: &Path,
) -> Result<i32, GrapeError> {
    let seq = bb1_sequence(
        angle_deg.to_radians(),
        axis_phase_deg.to_radians(),
        TAU * amplitude_hz,
    )?;
    seq.save(out)?;
    Ok(0)
}
