//! `srb-lab`: runs one experiment per subcommand from a JSON config and
//! writes its artifacts plus `manifest.json` under the output directory.

// `!(x > 0.0)` rejects NaN along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod experiments;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use srb_lab::systems::catalog;
use srb_lab::Execution;

use config::{parse_config, validate, Diagnostic, Experiment};
use manifest::{write_artifact, ErrorEntry, Manifest, Status};

const DEFAULT_OUT: &str = "srb-lab-out";

#[derive(Parser)]
#[command(name = "srb-lab", version, about = "Numerical experiments on SRB measures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lyapunov spectrum along one orbit
    Lyapunov(RunArgs),
    /// Push-forwards of Lebesgue measure on the trapping region
    PushforwardLebesgue(RunArgs),
    /// Push-forwards of leaf volume on a local unstable manifold
    PushforwardLeaf(RunArgs),
    /// Conditional density profile against the empirical leaf measure
    DensityCheck(RunArgs),
    /// Effective hyperbolicity diagnostics along one orbit
    EhDiagnostics(RunArgs),
    /// Mass of the singularity neighbourhoods and blow-up constants
    CoreCondition(RunArgs),
    /// Fraction of sampled points whose time averages match the measure
    Basin(RunArgs),
    /// Ensemble average of positive Lyapunov sums
    EntropyCheck(RunArgs),
    /// Print the system catalog as JSON
    ListSystems,
}

/// Flags win over `SRB_LAB_*` variables, which win over the config file.
#[derive(Args)]
struct RunArgs {
    #[arg(long, env = "SRB_LAB_CONFIG")]
    config: PathBuf,
    #[arg(long, env = "SRB_LAB_SEED")]
    seed: Option<u64>,
    #[arg(long, env = "SRB_LAB_WORKERS")]
    workers: Option<usize>,
    #[arg(long, env = "SRB_LAB_OUT")]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::ListSystems => {
            println!("{}", serde_json::to_string_pretty(&catalog()).expect("static catalog"));
            return ExitCode::SUCCESS;
        }
        Command::Lyapunov(a) => (Experiment::Lyapunov, a),
        Command::PushforwardLebesgue(a) => (Experiment::PushforwardLebesgue, a),
        Command::PushforwardLeaf(a) => (Experiment::PushforwardLeaf, a),
        Command::DensityCheck(a) => (Experiment::DensityCheck, a),
        Command::EhDiagnostics(a) => (Experiment::EhDiagnostics, a),
        Command::CoreCondition(a) => (Experiment::CoreCondition, a),
        Command::Basin(a) => (Experiment::Basin, a),
        Command::EntropyCheck(a) => (Experiment::EntropyCheck, a),
    };
    ExitCode::from(run(kind, &args) as u8)
}

fn run(kind: Experiment, args: &RunArgs) -> i32 {
    let start = Instant::now();
    let (mut cfg, mut diags) = match std::fs::read_to_string(&args.config) {
        Ok(text) => parse_config(&text),
        Err(e) => {
            let (cfg, _) = parse_config("{}");
            let d = Diagnostic {
                field: "config".into(),
                error: "Io".into(),
                message: format!("cannot read {}: {e}", args.config.display()),
            };
            (cfg, vec![d])
        }
    };
    cfg.seed = args.seed.or(cfg.seed);
    cfg.workers = args.workers.or(cfg.workers);
    cfg.out = args.out.clone().or(cfg.out.take());
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    if diags.is_empty() || !diags.iter().any(|d| d.error == "Io") {
        diags.extend(validate(&cfg, kind));
    }
    let workers = cfg
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let effective = json!({
        "system": cfg.system,
        "seed": cfg.seed,
        "workers": workers,
        "settings": cfg.settings,
    });
    let mut manifest = Manifest {
        tool: "srb-lab".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        library_version: srb_lab::VERSION.into(),
        experiment: kind.as_str().into(),
        status: Status::Ok,
        exit_code: 0,
        error: None,
        diagnostics: Vec::new(),
        config: cfg.raw.clone(),
        effective,
        seed: cfg.seed,
        workers: Some(workers),
        wall_time_seconds: 0.0,
        artifacts: Vec::new(),
    };

    if let Some(first) = diags.first() {
        manifest.error = Some(ErrorEntry {
            name: first.error.clone(),
            message: first.message.clone(),
            field: Some(first.field.clone()),
        });
        for d in &diags {
            eprintln!("invalid config: {}: {}", d.field, d.message);
        }
        manifest.diagnostics = diags;
        return finish(manifest, Status::ValidationError, &out, start);
    }

    let sys = match cfg.system.as_ref().expect("validated").build() {
        Ok(s) => s,
        Err(e) => return fail(manifest, &e, &out, start),
    };
    let ctx = experiments::Context {
        sys,
        seed: cfg.seed.expect("validated"),
        exec: if workers == 1 { Execution::Sequential } else { Execution::Parallel },
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(p) => p,
        Err(e) => return fail(manifest, &srb_lab::SrbError::InvalidArgument(e.to_string()), &out, start),
    };
    let result = pool.install(|| experiments::run(kind, &ctx, &cfg.settings));
    match result {
        Err(e) => fail(manifest, &e, &out, start),
        Ok(artifacts) => {
            if let Err(e) = std::fs::create_dir_all(&out) {
                eprintln!("cannot create {}: {e}", out.display());
                return Status::IoError.exit_code();
            }
            for a in &artifacts {
                match write_artifact(&out, &a.name, &a.bytes) {
                    Ok(entry) => manifest.artifacts.push(entry),
                    Err(e) => {
                        manifest.error = Some(ErrorEntry {
                            name: "Io".into(),
                            message: format!("cannot write {}: {e}", a.name),
                            field: None,
                        });
                        return finish(manifest, Status::IoError, &out, start);
                    }
                }
            }
            eprintln!("wrote {} artifacts to {}", manifest.artifacts.len(), out.display());
            finish(manifest, Status::Ok, &out, start)
        }
    }
}

fn fail(mut manifest: Manifest, e: &srb_lab::SrbError, out: &Path, start: Instant) -> i32 {
    eprintln!("{} failed: {e}", manifest.experiment);
    manifest.error = Some(ErrorEntry {
        name: e.name().into(),
        message: e.to_string(),
        field: None,
    });
    finish(manifest, Status::NumericalFailure, out, start)
}

fn finish(mut manifest: Manifest, status: Status, out: &Path, start: Instant) -> i32 {
    manifest.status = status;
    manifest.exit_code = status.exit_code();
    manifest.wall_time_seconds = start.elapsed().as_secs_f64();
    if let Err(e) = manifest.write(out) {
        eprintln!("cannot write manifest to {}: {e}", out.display());
        return Status::IoError.exit_code();
    }
    manifest.exit_code
}
