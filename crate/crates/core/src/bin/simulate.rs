//! Command-line driver: load a scene, run the simulation, write frames and
//! statistics.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, ValueEnum};

use contact_sim::optimizer::{step, PrecondKind, SimState, SolverOptions};
use contact_sim::report::{write_obj, RunReport, StatsCsv};
use contact_sim::scene::load_scene;
use contact_sim::vecmath::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FrictionUpdate {
    PerIteration,
    PerOptimization,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PrecondArg {
    BlockJacobi,
    Additive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FpMode {
    F64,
    F32,
}

#[derive(Parser, Debug)]
#[command(name = "simulate", about = "Elastodynamic contact simulator")]
struct Args {
    /// Scene configuration file.
    scene: PathBuf,
    /// Output directory for frames, stats, and the run summary.
    #[arg(short, long)]
    output: PathBuf,
    /// Disable the stiffness-grouped PCG warm start.
    #[arg(long)]
    no_warm_start: bool,
    /// Plain barrier Newton: no augmentation set, fixed penalty.
    #[arg(long)]
    no_auglag: bool,
    /// When to refresh friction anchors.
    #[arg(long, value_enum, default_value = "per-iteration")]
    friction_update: FrictionUpdate,
    #[arg(long, value_enum, default_value = "block-jacobi")]
    precond: PrecondArg,
    /// Suppress wall-clock timings so repeated runs emit identical bytes.
    #[arg(long)]
    deterministic: bool,
    /// State precision: f32 rounds positions and velocities through single
    /// precision at every step boundary.
    #[arg(long, value_enum, default_value = "f64")]
    fp: FpMode,
}

fn quantize_f32(v: &mut [Vec3]) {
    for p in v {
        *p = Vec3::new(p.x as f32 as f64, p.y as f32 as f64, p.z as f32 as f64);
    }
}

fn run(args: &Args) -> anyhow::Result<RunReport> {
    let scene = load_scene(&args.scene)
        .with_context(|| format!("loading scene {}", args.scene.display()))?;
    std::fs::create_dir_all(&args.output)
        .with_context(|| format!("creating {}", args.output.display()))?;

    let opts = SolverOptions {
        warm_start: !args.no_warm_start,
        aug_lag: !args.no_auglag,
        friction_per_iteration: args.friction_update == FrictionUpdate::PerIteration,
        precond: match args.precond {
            PrecondArg::BlockJacobi => PrecondKind::BlockJacobi,
            PrecondArg::Additive => PrecondKind::Additive,
        },
        ..SolverOptions::default()
    };

    let mut report = RunReport {
        frames_requested: scene.globals.frames,
        ..RunReport::default()
    };
    let mut csv = StatsCsv::create(&args.output.join("stats.csv"), args.deterministic)?;
    let mut state = SimState::at_rest(&scene);
    if args.fp == FpMode::F32 {
        quantize_f32(&mut state.x);
        quantize_f32(&mut state.v);
    }

    for frame in 0..scene.globals.frames {
        let t0 = Instant::now();
        match step(&scene, &state, &opts) {
            Ok((mut next, stats)) => {
                if args.fp == FpMode::F32 {
                    quantize_f32(&mut next.x);
                    quantize_f32(&mut next.v);
                }
                let wall_ms = t0.elapsed().as_secs_f64() * 1e3;
                write_obj(&args.output.join(format!("frame_{frame:04}.obj")), &scene.mesh, &next.x)?;
                csv.write_frame(frame, wall_ms, &stats)?;
                report.record_frame(&stats, wall_ms);
                state = next;
            }
            Err(e) => {
                report.failure = Some(format!("frame {frame}: {e}"));
                break;
            }
        }
    }
    csv.finish()?;
    report.finalize();
    report.write(&args.output.join("summary.txt"), args.deterministic)?;
    Ok(report)
}

fn main() {
    let args = Args::parse();
    match run(&args) {
        Ok(report) if report.success => {}
        Ok(report) => {
            eprintln!(
                "run failed after {}/{} frames: {}",
                report.frames_completed,
                report.frames_requested,
                report.failure.as_deref().unwrap_or("incomplete")
            );
            std::process::exit(1);
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(2);
        }
    }
}
