use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use teleham_cli::commands::{self, ClosureSetup, EvolveOptions, GenOptions, Kind};
use teleham_cli::{algebra, variational, CliError, CliResult, Format, Report};
use teleham_core::smearing::{ScalarSpec, VectorSpec};

#[derive(Parser)]
#[command(name = "teleham", version, about = "Verify and evolve the cotetrad constraint system on a periodic grid")]
struct Cli {
    /// Random seed
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Grid: N or N1xN2xN3 points on the unit torus
    #[arg(long, global = true)]
    grid: Option<String>,
    /// Output path (report file, bundle, or snapshot directory depending on the command)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Report format
    #[arg(long, global = true, default_value = "csv")]
    format: Format,
    /// Override the pass tolerance
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pointwise algebraic identities over random inputs
    VerifyAlgebra {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
    /// Functional derivatives against finite differences, Lie/Hodge identity orders
    VerifyVariational,
    /// Evaluate S(M) and V(M) on a bundle; --out writes the densities as a bundle
    Constraints {
        bundle: PathBuf,
        #[arg(long, default_value = "const:1")]
        scalar: ScalarSpec,
        #[arg(long, default_value = "e1:1")]
        vector: VectorSpec,
    },
    /// Constraint algebra closure under grid refinement
    Brackets {
        #[arg(long, value_delimiter = ',', default_value = "8,16,32")]
        grids: Vec<usize>,
        #[arg(long, default_value_t = 0.3)]
        amplitude: f64,
        #[arg(long, default_value = commands::CLOSURE_SCALAR)]
        scalar: ScalarSpec,
        #[arg(long, default_value = commands::CLOSURE_SCALAR2)]
        scalar2: ScalarSpec,
        #[arg(long, default_value = commands::CLOSURE_VECTOR)]
        vector: VectorSpec,
        #[arg(long, default_value = commands::CLOSURE_VECTOR2)]
        vector2: VectorSpec,
    },
    /// RK4 evolution of a bundle with its own lapse and shift
    Evolve {
        bundle: PathBuf,
        /// Time step (default: half the stability limit)
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        /// Write a snapshot bundle every this many steps (0: none)
        #[arg(long, default_value_t = 0)]
        snapshot_every: usize,
        /// Also rerun with dt/2 and dt/4 and report the endpoint ratio
        #[arg(long)]
        halving: bool,
    },
    /// Generate a flat, random or constraint-projected bundle
    Gen {
        #[arg(long, default_value = "flat")]
        kind: Kind,
        #[arg(long, default_value_t = 0.1)]
        amplitude: f64,
        /// Band limit of the random perturbation
        #[arg(long, default_value_t = 1)]
        modes: usize,
        #[arg(long, default_value_t = 50)]
        max_iter: usize,
    },
}

fn grid_or(cli: &Cli, default: &str) -> CliResult<teleham_core::fields::PeriodicGrid> {
    commands::parse_grid(cli.grid.as_deref().unwrap_or(default))
}

fn emit(report: &Report, format: Format, out: Option<&PathBuf>) -> CliResult<()> {
    let text = report.render(format);
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }),
        None => {
            use std::io::Write;
            match std::io::stdout().lock().write_all(text.as_bytes()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io {
                    path: "stdout".into(),
                    message: e.to_string(),
                }),
                _ => Ok(()),
            }
        }
    }
}

fn run(cli: &Cli) -> CliResult<Report> {
    match &cli.command {
        Command::VerifyAlgebra { trials } => {
            if *trials == 0 {
                return Err(CliError::Usage("--trials must be at least 1".into()));
            }
            let r = algebra::run(*trials, cli.seed, cli.tol.unwrap_or(algebra::DEFAULT_TOL))?;
            emit(&r, cli.format, cli.out.as_ref())?;
            Ok(r)
        }
        Command::VerifyVariational => {
            let r = variational::run(grid_or(cli, "16")?, cli.seed, cli.tol.unwrap_or(variational::DEFAULT_TOL))?;
            emit(&r, cli.format, cli.out.as_ref())?;
            Ok(r)
        }
        Command::Constraints { bundle, scalar, vector } => {
            let r = commands::constraints(bundle, scalar, vector, cli.out.as_deref(), cli.tol.unwrap_or(1e-12))?;
            emit(&r, cli.format, None)?;
            Ok(r)
        }
        Command::Brackets {
            grids,
            amplitude,
            scalar,
            scalar2,
            vector,
            vector2,
        } => {
            let setup = ClosureSetup {
                amplitude: *amplitude,
                scalars: [scalar.clone(), scalar2.clone()],
                vectors: [vector.clone(), vector2.clone()],
            };
            let r = commands::brackets(grids, cli.seed, &setup)?;
            emit(&r, cli.format, cli.out.as_ref())?;
            Ok(r)
        }
        Command::Evolve {
            bundle,
            dt,
            steps,
            snapshot_every,
            halving,
        } => {
            let opts = EvolveOptions {
                dt: *dt,
                steps: *steps,
                snapshot_every: *snapshot_every,
                halving: *halving,
                tol: cli.tol,
            };
            let r = commands::evolve(bundle, &opts, cli.out.as_deref())?;
            emit(&r, cli.format, None)?;
            Ok(r)
        }
        Command::Gen {
            kind,
            amplitude,
            modes,
            max_iter,
        } => {
            let out = cli.out.as_deref().ok_or_else(|| CliError::Usage("gen needs --out".into()))?;
            let opts = GenOptions {
                kind: *kind,
                amplitude: *amplitude,
                modes: *modes,
                max_iter: *max_iter,
            };
            let r = commands::gen(grid_or(cli, "16")?, cli.seed, &opts, cli.tol, out)?;
            emit(&r, cli.format, None)?;
            Ok(r)
        }
    }
}

fn main() -> ExitCode {
    teleham_core::par::configure_from_env();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(r) if r.all_pass() => ExitCode::SUCCESS,
        Ok(r) => {
            let s = r.summary();
            eprintln!("{} of {} rows failed", s.failed, s.rows);
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
