mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use objreg::eval::{alignment_from_first_poses, evaluate_trajectories, summarize, EvalConfig, RunReport};
use objreg::io;
use objreg::synth::{generate, ScenarioConfig};
use objreg::tracker::{register_submaps, run_sequence, TrackerConfig};
use objreg::{partition_submaps, ObjectMap, RegistrationParams, RegistrationResult, SubmapSet};

use config::{load_toml, RunConfig, RunFlags};

#[derive(Parser)]
#[command(name = "objreg", version, about = "Localization by registering semantic object maps")]
struct Cli {
    #[command(flatten)]
    flags: RunFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One-shot registration of a vehicle map against a reference map.
    Register { reference: PathBuf, vehicle: PathBuf },
    /// Run continuous localization over a frame sequence.
    Localize {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        /// Ground-truth trajectory in the reference frame.
        #[arg(long)]
        ground_truth: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic scenario from a TOML description.
    Synth {
        scenario: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split a reference map into overlapping submaps.
    Partition {
        map: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare an estimated trajectory with ground truth.
    Eval {
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long)]
        ground_truth: PathBuf,
        /// Directory for report.json and errors.csv; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var("OBJREG_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("OBJREG_THREADS must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    init_threads()?;
    let cfg = cli.flags.resolve()?;
    match cli.command {
        Command::Register { reference, vehicle } => cmd_register(&reference, &vehicle, &cfg),
        Command::Localize { frames, reference, ground_truth, out } => {
            cmd_localize(&frames, &reference, ground_truth.as_deref(), &out, &cfg)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Synth { scenario, out } => {
            let mut scenario_cfg: ScenarioConfig = match scenario {
                Some(path) => load_toml(&path)?,
                None => ScenarioConfig::default(),
            };
            if cli.flags.seed.is_some() {
                scenario_cfg.rng_seed = cfg.rng_seed;
            }
            cmd_synth(&scenario_cfg, &out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Partition { map, out } => {
            let map = load_map(&map)?;
            let submaps = partition_submaps(&map, cfg.submap_count, cfg.submap_overlap)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            for (i, submap) in submaps.submaps.iter().enumerate() {
                io::save_object_map(out.join(format!("submap_{i}.txt")), submap)?;
                println!("submap {i}: {} objects", submap.len());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval { estimate, ground_truth, out } => {
            let est = io::load_trajectory(&estimate).with_context(|| format!("reading {}", estimate.display()))?;
            let gt = io::load_trajectory(&ground_truth)
                .with_context(|| format!("reading {}", ground_truth.display()))?;
            let report = evaluate_trajectories(&est, &gt, &eval_config(&cfg));
            let doc = ReportDoc { report: &report, config: &cfg, localized: None, registration_rounds: None };
            let json = serde_json::to_string_pretty(&doc)? + "\n";
            match out {
                Some(dir) => write_report(&dir, &json, &report)?,
                None => print!("{json}"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn load_map(path: &Path) -> Result<ObjectMap> {
    io::load_object_map(path).with_context(|| format!("reading {}", path.display()))
}

fn eval_config(cfg: &RunConfig) -> EvalConfig {
    EvalConfig { epsilon: cfg.epsilon, planar: cfg.planar, ..Default::default() }
}

fn submaps_for(reference: &ObjectMap, cfg: &RunConfig) -> Result<SubmapSet> {
    Ok(partition_submaps(reference, cfg.submap_count, cfg.submap_overlap)?)
}

fn cmd_register(reference: &Path, vehicle: &Path, cfg: &RunConfig) -> Result<ExitCode> {
    let reference = load_map(reference)?;
    let vehicle = load_map(vehicle)?;
    if reference.is_empty() {
        bail!("reference map is empty");
    }
    let params = RegistrationParams {
        epsilon: cfg.epsilon,
        min_inliers: cfg.min_inliers,
        ..Default::default()
    };
    let results = register_submaps(&submaps_for(&reference, cfg)?, &vehicle, &params);
    let best = results
        .into_iter()
        .flatten()
        .reduce(|best, r| if r.inlier_count > best.inlier_count { r } else { best });
    match best {
        Some(r) => {
            print!("{}", format_registration(&r));
            Ok(ExitCode::SUCCESS)
        }
        None => {
            println!("no registration");
            Ok(ExitCode::from(1))
        }
    }
}

fn format_registration(r: &RegistrationResult) -> String {
    let q = r.transform.quaternion();
    let t = r.transform.translation();
    let mut out = String::new();
    writeln!(out, "submap: {}", r.submap_index).unwrap();
    writeln!(out, "inliers: {}", r.inlier_count).unwrap();
    writeln!(out, "associations: {}", r.association_count).unwrap();
    writeln!(out, "edges: {}", r.edge_count).unwrap();
    writeln!(out, "optimal: {}", r.optimal).unwrap();
    writeln!(out, "rms_residual: {}", r.rms_residual).unwrap();
    writeln!(out, "rotation_wxyz: {} {} {} {}", q.w, q.i, q.j, q.k).unwrap();
    writeln!(out, "translation: {} {} {}", t.x, t.y, t.z).unwrap();
    writeln!(out, "pairs:").unwrap();
    for (ref_id, veh_id) in &r.inliers {
        writeln!(out, "  {ref_id} {veh_id}").unwrap();
    }
    out
}

#[derive(Serialize)]
struct ReportDoc<'a> {
    #[serde(flatten)]
    report: &'a RunReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    localized: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    registration_rounds: Option<usize>,
    config: &'a RunConfig,
}

fn write_report(dir: &Path, json: &str, report: &RunReport) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    io::write_file(&dir.join("report.json"), json)?;
    if !report.series.is_empty() {
        io::write_file(&dir.join("errors.csv"), &report.series_csv())?;
    }
    Ok(())
}

fn cmd_localize(
    frames: &Path,
    reference: &Path,
    ground_truth: Option<&Path>,
    out: &Path,
    cfg: &RunConfig,
) -> Result<()> {
    let frames = io::load_frames(frames).with_context(|| format!("reading {}", frames.display()))?;
    let reference = load_map(reference)?;
    let gt = ground_truth
        .map(|p| io::load_trajectory(p).with_context(|| format!("reading {}", p.display())))
        .transpose()?;
    let tracker = TrackerConfig {
        epsilon: cfg.epsilon,
        window_size: cfg.window_size,
        min_inliers: cfg.min_inliers,
        acceptance_ratio: cfg.acceptance_ratio,
        registration_stride: cfg.registration_stride,
        ..Default::default()
    };
    let submaps = if reference.is_empty() {
        SubmapSet::single(&reference)
    } else {
        submaps_for(&reference, cfg)?
    };
    let outcome = run_sequence(&frames, &submaps, &tracker);
    let alignment = gt.as_deref().and_then(|g| alignment_from_first_poses(g, &outcome.odometry));
    let report = summarize(&outcome, &reference, gt.as_deref(), alignment.as_ref(), &eval_config(cfg));

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    io::save_trajectory(out.join("trajectory.txt"), &outcome.trajectory)?;
    let doc = ReportDoc {
        report: &report,
        config: cfg,
        localized: Some(outcome.state.is_localized()),
        registration_rounds: Some(outcome.attempts.len()),
    };
    write_report(out, &(serde_json::to_string_pretty(&doc)? + "\n"), &report)?;
    match outcome.state.localized_at {
        Some(t) => eprintln!("localized at t = {t}; {} poses written", outcome.trajectory.len()),
        None => eprintln!("never localized"),
    }
    Ok(())
}

#[derive(Serialize)]
struct ScenarioSummary<'a> {
    config: &'a ScenarioConfig,
    /// Reference-from-odometry alignment as `[w, x, y, z]` and translation.
    gt_alignment_wxyz: [f64; 4],
    gt_alignment_translation: [f64; 3],
    reference_objects: usize,
    perceived_objects: usize,
    frames: usize,
    outlier_ids: &'a [u64],
}

fn cmd_synth(config: &ScenarioConfig, out: &Path) -> Result<()> {
    let s = generate(config)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    io::save_object_map(out.join("reference.txt"), &s.reference)?;
    io::save_object_map(out.join("perceived.txt"), &s.perceived)?;
    io::save_frames(out.join("frames.txt"), &s.frames)?;
    io::save_trajectory(out.join("ground_truth.txt"), &s.ground_truth)?;
    let q = s.gt_alignment.quaternion();
    let t = s.gt_alignment.translation();
    let summary = ScenarioSummary {
        config,
        gt_alignment_wxyz: [q.w, q.i, q.j, q.k],
        gt_alignment_translation: [t.x, t.y, t.z],
        reference_objects: s.reference.len(),
        perceived_objects: s.perceived.len(),
        frames: s.frames.len(),
        outlier_ids: &s.outlier_ids,
    };
    io::write_file(&out.join("scenario.json"), &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    println!(
        "{} reference objects, {} frames, {} perceived objects ({} outliers)",
        s.reference.len(),
        s.frames.len(),
        s.perceived.len(),
        s.outlier_ids.len()
    );
    Ok(())
}
