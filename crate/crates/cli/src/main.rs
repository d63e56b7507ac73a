use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gratres_cli::config::{preset, ConfigError, RunConfig, PRESETS};
use gratres_cli::run::{self, Problem, RunError, Status};
use gratres_core::mesh::io as mesh_io;
use gratres_core::pec_oracle::{asymptotic_eigenvalue, AsymptoticParams};

#[derive(Parser)]
#[command(name = "gratres", version, about = "Resonances of periodic metallic slit gratings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues at one Bloch wavenumber inside every configured region.
    Solve(RunArgs),
    /// Band structure over κ ∈ [0, π/d].
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Worker threads (one κ sample each).
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Smallest eigenvalue of the first region on a ladder of uniform refinements.
    Converge(RunArgs),
    #[command(subcommand)]
    Oracle(OracleCommand),
    #[command(subcommand)]
    Mesh(MeshCommand),
    /// List the built-in presets, or print one.
    Presets { name: Option<String> },
}

#[derive(Args)]
struct SourceArgs {
    /// TOML run configuration.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration by name.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Output directory (default: `[output] dir`, then $GRATRES_OUTPUT_DIR, then ./gratres-out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `[mesh] refinement`.
    #[arg(long)]
    refinement: Option<usize>,
    /// Writes normalized eigenfunctions next to the eigenvalues.
    #[arg(long)]
    fields: bool,
    /// Prints the configuration after defaults and overrides, then exits.
    #[arg(long)]
    dump_effective_config: bool,
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Small-slit asymptotic eigenvalue of a perfectly conducting slab of unit thickness.
    PecAsymptotic {
        #[arg(long, default_value_t = 1)]
        m: u32,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        period: f64,
        /// Absolute Bloch wavenumber; defaults to π/d.
        #[arg(long, conflicts_with = "kappa_fraction")]
        kappa: Option<f64>,
        /// Bloch wavenumber as a fraction of π/d.
        #[arg(long)]
        kappa_fraction: Option<f64>,
        #[arg(long, default_value_t = 1e-13)]
        series_tol: f64,
    },
}

#[derive(Subcommand)]
enum MeshCommand {
    /// Generates the mesh of a configuration and writes it.
    Gen {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        refinement: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Uniformly refines a mesh file.
    Refine {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value_t = 1)]
        levels: usize,
    },
    /// Prints size statistics of a mesh file or a configuration's mesh.
    Info {
        /// Mesh file; otherwise --config or --preset.
        #[arg(long, conflicts_with_all = ["config", "preset"])]
        file: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        refinement: Option<usize>,
    },
}

fn load(config: Option<&PathBuf>, preset_name: Option<&str>) -> Result<RunConfig, RunError> {
    match (config, preset_name) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
            Ok(RunConfig::from_toml(&text)?)
        }
        (None, Some(name)) => Ok(preset(name)?),
        (None, None) => Err(ConfigError("one of --config or --preset is required".into()).into()),
    }
}

fn prepare(args: &RunArgs) -> Result<RunConfig, RunError> {
    let mut cfg = load(args.source.config.as_ref(), args.source.preset.as_deref())?;
    if let Some(r) = args.refinement {
        cfg.mesh.refinement = r;
    }
    cfg.output.fields |= args.fields;
    cfg.validate()?;
    Ok(cfg)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.6}"))
}

fn finish(status: Status, out: &std::path::Path) -> Result<ExitCode, RunError> {
    eprintln!("status: {status:?}; output in {}", out.display());
    Ok(ExitCode::from(status.exit_code() as u8))
}

fn execute(cli: Cli) -> Result<ExitCode, RunError> {
    match cli.command {
        Command::Solve(args) => {
            let cfg = prepare(&args)?;
            if args.dump_effective_config {
                print!("{}", cfg.to_toml());
                return Ok(ExitCode::SUCCESS);
            }
            let out = run::output_dir(&cfg, args.out.as_deref());
            let report = run::run_solve(cfg, &out)?;
            for e in &report.outcome.eigenpairs {
                let r = &e.row;
                println!("{:>3}  {:+.10} {:+.10}i  residual {:.2e}  {}", r.region, r.re, r.im, r.residual, r.class);
            }
            for f in &report.outcome.failures {
                eprintln!("region {} failed: {}", f.region, f.error);
            }
            finish(report.status, &out)
        }
        Command::Sweep { run: args, jobs } => {
            let cfg = prepare(&args)?;
            if args.dump_effective_config {
                print!("{}", cfg.to_toml());
                return Ok(ExitCode::SUCCESS);
            }
            let out = run::output_dir(&cfg, args.out.as_deref());
            let report = run::run_sweep(cfg, &out, jobs)?;
            for o in &report.outcomes {
                eprintln!("κ = {:.6}: {} eigenvalues, {} failed regions", o.kappa, o.eigenpairs.len(), o.failures.len());
                for f in &o.failures {
                    eprintln!("  region {} failed: {}", f.region, f.error);
                }
            }
            finish(report.status, &out)
        }
        Command::Converge(args) => {
            let cfg = prepare(&args)?;
            if args.dump_effective_config {
                print!("{}", cfg.to_toml());
                return Ok(ExitCode::SUCCESS);
            }
            let out = run::output_dir(&cfg, args.out.as_deref());
            let report = run::run_convergence(cfg, &out)?;
            for r in &report.rows {
                println!(
                    "level {}  dof {:>7}  k {} {}i  order {}",
                    r.level,
                    r.dof,
                    fmt_opt(r.re),
                    fmt_opt(r.im),
                    fmt_opt(r.order)
                );
            }
            finish(report.status, &out)
        }
        Command::Oracle(OracleCommand::PecAsymptotic { m, delta, period, kappa, kappa_fraction, series_tol }) => {
            let kappa = kappa.unwrap_or(kappa_fraction.unwrap_or(1.0) * PI / period);
            let mut p = AsymptoticParams::new(m, kappa, delta, period);
            p.series_tol = series_tol;
            let k = asymptotic_eigenvalue(&p).map_err(|e| RunError::Numerical(e.to_string()))?;
            println!("{:.10} {:+.3e}i", k.re, k.im);
            Ok(ExitCode::SUCCESS)
        }
        Command::Mesh(MeshCommand::Gen { source, refinement, out }) => {
            let mut cfg = load(source.config.as_ref(), source.preset.as_deref())?;
            if let Some(r) = refinement {
                cfg.mesh.refinement = r;
            }
            let level = cfg.mesh.refinement;
            let mesh = Problem::new(cfg)?.mesh_at(level);
            mesh_io::export_mesh(&mesh, &out).map_err(|e| RunError::Numerical(e.to_string()))?;
            eprintln!("{} nodes, {} triangles → {}", mesh.num_nodes(), mesh.num_triangles(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Mesh(MeshCommand::Refine { input, output, levels }) => {
            let mut mesh = mesh_io::import_mesh(&input).map_err(|e| ConfigError(format!("{}: {e}", input.display())))?;
            for _ in 0..levels {
                mesh = mesh.refine_uniform();
            }
            mesh_io::export_mesh(&mesh, &output).map_err(|e| RunError::Numerical(e.to_string()))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Mesh(MeshCommand::Info { file, config, preset: name, refinement }) => {
            let mesh = match file {
                Some(path) => mesh_io::import_mesh(&path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?,
                None => {
                    let mut cfg = load(config.as_ref(), name.as_deref())?;
                    if let Some(r) = refinement {
                        cfg.mesh.refinement = r;
                    }
                    let level = cfg.mesh.refinement;
                    Problem::new(cfg)?.mesh_at(level)
                }
            };
            println!("nodes      {}", mesh.num_nodes());
            println!("triangles  {}", mesh.num_triangles());
            println!("pairs      {}", mesh.pairs.len());
            println!("dof        {}", mesh.num_nodes() + mesh.pairs.len());
            println!("h          {:.6}", mesh.mesh_size());
            Ok(ExitCode::SUCCESS)
        }
        Command::Presets { name: None } => {
            for (name, _) in PRESETS {
                println!("{name}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Presets { name: Some(name) } => match PRESETS.iter().find(|(n, _)| *n == name) {
            Some((_, text)) => {
                print!("{text}");
                Ok(ExitCode::SUCCESS)
            }
            None => Err(ConfigError(format!("unknown preset {name:?}")).into()),
        },
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("gratres: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
