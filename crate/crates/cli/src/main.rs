use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use horolab_core::distortion::ReconstructMode;
use horolab_core::experiment::{
    build_space, compare_runs, load_report, run_experiment, ExperimentConfig, ExperimentKind, Report,
};
use horolab_core::Result;

#[derive(Parser)]
#[command(name = "horolab", version, about = "Coarse-geometry experiments on cusped spaces of free groups")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(Args)]
struct Global {
    /// Experiment config (JSON mirroring the experiment settings).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for tuple evaluation.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Write the cusped space manifest here, with its edge list alongside.
    #[arg(long, global = true)]
    export_space: Option<PathBuf>,
    /// Ball radius R.
    #[arg(long, short = 'R', global = true)]
    radius: Option<usize>,
    /// Horoball depth D.
    #[arg(long, short = 'D', global = true)]
    depth: Option<u32>,
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Presentation JSON file (default: punctured torus).
    #[arg(long, global = true)]
    presentation: Option<PathBuf>,
    /// Run name used for output file names.
    #[arg(long, global = true)]
    name: Option<String>,
    /// Directory for `<name>.report.json` and `<name>.points.csv` (default: current directory).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the cusped space and print its manifest.
    BuildSpace,
    /// Sample geodesic triangles and estimate δ.
    EstimateDelta,
    /// Cross-ratios against quasi-center distances on sampled quadruples.
    CrossRatio {
        /// Record the minimum of the three absolute cross-ratios instead.
        #[arg(long)]
        min_of_three: bool,
    },
    /// Relative cross-ratios, plus the visual-boundedness and projection probes.
    RelativeCr,
    /// Exit-point set diameters.
    ExitSets,
    /// Distortion of a generator map on sampled tuples.
    Distortion {
        #[arg(long, value_enum)]
        mode: DistortionMode,
        /// Map file, or `identity` / `dehn-twist`.
        #[arg(long)]
        map: Option<String>,
    },
    /// Rebuild the map on the group from its boundary action.
    Reconstruct {
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long)]
        map: Option<String>,
    },
    /// Rerun an experiment at a larger radius and report the drift.
    Stability {
        /// Experiment to rerun, e.g. `cross-ratio` or `exit-sets`.
        #[arg(long, value_parser = parse_kind)]
        kind: Option<ExperimentKind>,
        #[arg(long)]
        compare_radius: Option<usize>,
        #[arg(long)]
        map: Option<String>,
    },
    /// Drift between two saved reports.
    Compare { a: PathBuf, b: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum DistortionMode {
    Qm,
    Relqm,
    Exit,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Centers,
    Exits,
}

fn parse_kind(s: &str) -> std::result::Result<ExperimentKind, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| format!("unknown experiment kind `{s}`"))
}

fn config(g: &Global) -> Result<ExperimentConfig> {
    let mut cfg = match &g.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = g.seed {
        cfg.seed = v;
    }
    if let Some(v) = g.jobs {
        cfg.jobs = v;
    }
    if let Some(v) = g.radius {
        cfg.radius = v;
    }
    if let Some(v) = g.samples {
        cfg.samples = v;
    }
    if let Some(v) = &g.name {
        cfg.name = v.clone();
    }
    if g.depth.is_some() {
        cfg.depth = g.depth;
    }
    if g.presentation.is_some() {
        cfg.presentation = g.presentation.clone();
    }
    if g.export_space.is_some() {
        cfg.export_space = g.export_space.clone();
    }
    if g.output_dir.is_some() || cfg.output_dir.is_none() {
        cfg.output_dir = Some(g.output_dir.clone().unwrap_or_else(|| PathBuf::from(".")));
    }
    Ok(cfg)
}

fn print_json(value: serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(&value)?);
    Ok(())
}

fn run_kind(mut cfg: ExperimentConfig, kind: ExperimentKind, map: Option<String>) -> Result<Report> {
    cfg.kind = kind;
    if map.is_some() {
        cfg.map = map;
    }
    if cfg.name == ExperimentConfig::default().name {
        cfg.name = kind.name().into();
    }
    run_experiment(&cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = config(&cli.global)?;
    let report = match cli.command {
        Command::BuildSpace => {
            let cs = build_space(&cfg, cfg.radius)?;
            if let Some(path) = &cfg.export_space {
                cs.export(path)?;
            }
            return print_json(cs.manifest());
        }
        Command::Compare { a, b } => {
            let drift = compare_runs(&load_report(&a)?, &load_report(&b)?)?;
            return print_json(serde_json::to_value(drift)?);
        }
        Command::EstimateDelta => run_kind(cfg, ExperimentKind::Delta, None)?,
        Command::CrossRatio { min_of_three } => {
            let kind = if min_of_three { ExperimentKind::OneOfThree } else { ExperimentKind::CrossRatio };
            run_kind(cfg, kind, None)?
        }
        Command::RelativeCr => run_kind(cfg, ExperimentKind::RelativeCr, None)?,
        Command::ExitSets => run_kind(cfg, ExperimentKind::ExitSets, None)?,
        Command::Distortion { mode, map } => {
            let kind = match mode {
                DistortionMode::Qm => ExperimentKind::Qm,
                DistortionMode::Relqm => ExperimentKind::RelativeQm,
                DistortionMode::Exit => ExperimentKind::ExitDistortion,
            };
            run_kind(cfg, kind, map)?
        }
        Command::Reconstruct { mode, map } => {
            let mut cfg = cfg;
            match mode {
                Some(Mode::Centers) => cfg.reconstruct_mode = ReconstructMode::Centers,
                Some(Mode::Exits) => cfg.reconstruct_mode = ReconstructMode::Exits,
                None => {}
            }
            run_kind(cfg, ExperimentKind::Reconstruct, map)?
        }
        Command::Stability { kind, compare_radius, map } => {
            let mut cfg = cfg;
            if kind.is_some() {
                cfg.stability_kind = kind;
            }
            if compare_radius.is_some() {
                cfg.compare_radius = compare_radius;
            }
            run_kind(cfg, ExperimentKind::Stability, map)?
        }
    };
    print_json(serde_json::to_value(report)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("horolab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
