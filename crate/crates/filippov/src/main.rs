use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use filippov::{export_viz, run_integration, run_pipeline, AnalysisConfig, PipelineError, RunOutcome, Stage, VizKind};
use filippov_core::fields::catalog;

const EXIT_CONFIG: u8 = 2;
const EXIT_STAGE: u8 = 3;
const EXIT_VIOLATED: u8 = 4;

#[derive(Parser)]
#[command(name = "filippov", version, about = "Structural-stability analysis of 3D Filippov systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Analysis config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Use a catalog system with default settings instead of --config.
    #[arg(long, global = true, conflicts_with = "config")]
    catalog: Option<String>,
    /// Output directory (default: the config's [output] dir, else ./filippov-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Last pipeline stage to run.
    #[arg(long, global = true, value_parser = parse_stage)]
    stage: Option<Stage>,
    /// Mesh cells per axis.
    #[arg(long, global = true)]
    resolution: Option<usize>,
    /// Seed for sampled protocols.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Tolerance override, repeatable.
    #[arg(long = "tolerance", global = true, value_name = "KEY=VALUE")]
    tolerances: Vec<String>,
    /// Exit with status 4 when the report has a violated condition.
    #[arg(long, global = true)]
    fail_on_violated: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline (or up to --stage).
    Analyze,
    /// Fields, mesh and tangency curves.
    Tangency,
    /// Through the sliding stage: pseudo-equilibria, separatrices, winding indices.
    Sliding,
    /// Through Σ-block extraction.
    Blocks,
    /// Full pipeline ending in the stability report.
    Stability,
    /// Filippov trajectories from given start points.
    Integrate {
        /// Start point x,y,z (repeatable); defaults to the config's [integrate] starts.
        #[arg(long = "from", value_parser = parse_point, allow_hyphen_values = true)]
        from: Vec<[f64; 3]>,
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Plot files from a finished run in --out.
    ExportViz {
        #[arg(required = true, value_parser = parse_viz)]
        what: Vec<VizKind>,
    },
    /// List catalog systems, or print a config for one of them.
    Catalog { name: Option<String> },
}

fn parse_stage(s: &str) -> Result<Stage, String> {
    Stage::parse(s).ok_or_else(|| {
        let names: Vec<_> = Stage::ALL.iter().map(|s| s.name()).collect();
        format!("unknown stage `{s}` (one of {})", names.join(", "))
    })
}

fn parse_viz(s: &str) -> Result<VizKind, String> {
    VizKind::parse(s).ok_or_else(|| format!("unknown export `{s}` (curves, regions, orbits, blocks, manifolds)"))
}

fn parse_point(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|c| c.trim().parse::<f64>().map_err(|e| format!("`{c}`: {e}")))
        .collect::<Result<_, _>>()?;
    v.try_into().map_err(|_| format!("expected x,y,z, got `{s}`"))
}

fn load_config(cli: &Cli) -> Result<AnalysisConfig, String> {
    let mut cfg = match (&cli.config, &cli.catalog) {
        (Some(p), _) => AnalysisConfig::load(p).map_err(|e| e.to_string())?,
        (None, Some(name)) => AnalysisConfig::catalog(name),
        (None, None) => return Err("no system: pass --config PATH or --catalog NAME".to_string()),
    };
    if let Some(n) = cli.resolution {
        cfg.resolution.mesh = n;
    }
    if let Some(s) = cli.seed {
        cfg.effort.seed = s;
    }
    for t in &cli.tolerances {
        cfg.set_tolerance(t).map_err(|e| e.to_string())?;
    }
    cfg.resolve().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: Option<&AnalysisConfig>) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.and_then(|c| c.output.dir.clone()))
        .unwrap_or_else(|| PathBuf::from("filippov-out"))
}

fn print_outcome(o: &RunOutcome, dir: &std::path::Path) {
    for s in &o.manifest.stages {
        println!("stage {:<10} {:>9.3} s", s.stage, s.seconds);
    }
    println!("wrote {} files to {}", o.manifest.outputs.len(), dir.display());
    if let Some(r) = &o.report {
        for c in &r.conditions {
            println!("  {:<4} {:<12} {}", c.id.name(), c.status.name(), c.witness.note);
        }
        println!("aggregate: {}", r.aggregate.name());
    }
}

fn fail(code: u8, e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(code)
}

fn pipeline_code(e: &PipelineError) -> u8 {
    match e {
        PipelineError::Config(_) => EXIT_CONFIG,
        _ => EXIT_STAGE,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let until = match &cli.command {
        Command::Analyze | Command::Stability => Stage::Stability,
        Command::Tangency => Stage::Tangency,
        Command::Sliding => Stage::Sliding,
        Command::Blocks => Stage::Blocks,
        Command::Catalog { name } => return show_catalog(name.as_deref()),
        Command::ExportViz { what } => {
            let dir = out_dir(&cli, None);
            for &k in what {
                match export_viz(&dir, k) {
                    Ok(files) => println!("{}: {} files", k.name(), files.len()),
                    Err(e) => return fail(pipeline_code(&e), e),
                }
            }
            return ExitCode::SUCCESS;
        }
        Command::Integrate { from, horizon } => {
            let cfg = match load_config(&cli) {
                Ok(c) => c,
                Err(e) => return fail(EXIT_CONFIG, e),
            };
            let spec = cfg.integrate.clone();
            let starts = if from.is_empty() { spec.as_ref().map(|s| s.starts.clone()).unwrap_or_default() } else { from.clone() };
            let Some(horizon) = horizon.or(spec.map(|s| s.horizon)) else {
                return fail(EXIT_CONFIG, "integrate needs --horizon or an [integrate] section");
            };
            if starts.is_empty() || !(horizon > 0.0) {
                return fail(EXIT_CONFIG, "integrate needs at least one start point and a positive horizon");
            }
            let dir = out_dir(&cli, Some(&cfg));
            return match run_integration(&cfg, &starts, horizon, &dir) {
                Ok(o) => {
                    print_outcome(&o, &dir);
                    ExitCode::SUCCESS
                }
                Err(e) => fail(pipeline_code(&e), e),
            };
        }
    };
    // --stage picks the end point of `analyze` and can only shorten the named commands
    let until = match (&cli.command, cli.stage) {
        (Command::Analyze, Some(s)) => s,
        (_, Some(s)) => s.min(until),
        (_, None) => until,
    };

    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let dir = out_dir(&cli, Some(&cfg));
    match run_pipeline(&cfg, until, &dir) {
        Ok(o) => {
            print_outcome(&o, &dir);
            if cli.fail_on_violated && o.violated() {
                return ExitCode::from(EXIT_VIOLATED);
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(pipeline_code(&e), e),
    }
}

fn show_catalog(name: Option<&str>) -> ExitCode {
    match name {
        None => {
            for e in catalog() {
                let facts: Vec<String> = e.facts.iter().map(|f| f.describe()).collect();
                println!("{:<24} f = {:<16} X = {:<20} Y = {}", e.name, e.f, e.x, e.y);
                if !facts.is_empty() {
                    println!("{:<24} expect: {}", "", facts.join("; "));
                }
            }
            ExitCode::SUCCESS
        }
        Some(n) => {
            let cfg = AnalysisConfig::catalog(n);
            match cfg.canonical() {
                Ok(text) => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
                Err(e) => fail(EXIT_CONFIG, e),
            }
        }
    }
}
