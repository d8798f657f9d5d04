//! `seqlocal`: sequential Bell correlations from the command line.
//!
//! Every subcommand prints one line of JSON on stdout (or a short summary
//! with `--pretty`). Exit status is 0 on success or a positive verdict, 1
//! when the verdict is negative and 2 on bad input.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use seqlocal_core::optimize::{GILBERT_MAX_ITERS, SEESAW_MAX_ITERS};

#[derive(Debug, Parser)]
#[command(
    name = "seqlocal",
    version,
    about = "Sequential Bell correlations: membership, witnesses, simulation"
)]
struct Cli {
    /// Numerical tolerance. Defaults to 1e-9, or 1e-7 for TOL membership.
    #[arg(long, global = true, env = "SEQLOCAL_TOL")]
    tol: Option<f64>,

    /// Print a human-readable summary instead of JSON.
    #[arg(long, global = true)]
    pretty: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check positivity and normalization of a correlation tensor.
    Validate {
        /// Correlation JSON (`-` for stdin).
        file: PathBuf,
    },
    /// Decide membership in the spatio-temporal polytope P, the sequential
    /// local polytope Q, or the time-ordered local polytope TOL.
    Member {
        file: PathBuf,
        #[arg(long, value_enum, ignore_case = true)]
        polytope: Polytope,
        /// Iteration budget for TOL membership.
        #[arg(long, default_value_t = GILBERT_MAX_ITERS)]
        iters: usize,
    },
    /// Build the extreme point described by a spec file and certify it.
    Extremal { spec_file: PathBuf },
    /// Evaluate the concatenated CHSH witness.
    Witness {
        file: PathBuf,
        /// Number of steps; defaults to the tensor's step count.
        #[arg(long = "L", value_name = "L")]
        steps: Option<usize>,
    },
    /// Simulate a quantum strategy and print its correlation tensor.
    Simulate {
        /// Strategy JSON (`-` for stdin).
        #[arg(required_unless_present = "canonical")]
        strategy_file: Option<PathBuf>,
        /// Use the built-in bound-saturating strategy with this many steps.
        #[arg(long, value_name = "L", conflicts_with = "strategy_file")]
        canonical: Option<usize>,
        /// Print the strategy itself instead of simulating it.
        #[arg(long)]
        emit_strategy: bool,
    },
    /// Maximize CHSH over ±1 observables on a fixed state.
    Seesaw {
        /// Density matrix JSON: nested arrays of [re, im].
        #[arg(long)]
        state: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = SEESAW_MAX_ITERS)]
        iters: usize,
        /// Local dimensions `dA,dB`; defaults to a square split.
        #[arg(long, value_delimiter = ',', num_args = 1)]
        dims: Option<Vec<usize>>,
    },
    /// Draw a random mixture of Q or TOL vertices.
    Sample {
        #[arg(long, value_enum, ignore_case = true)]
        polytope: SamplePolytope,
        /// Number of mixed vertices.
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Number of extreme points of the two-step binary polytope.
    CountExtremal,
    /// Worked demonstrations.
    Demo {
        #[command(subcommand)]
        demo: Demo,
    },
}

#[derive(Debug, Subcommand)]
enum Demo {
    /// Local filtering on a Werner state followed by a CHSH test.
    HiddenNonlocality {
        #[arg(long, default_value_t = 5)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Werner mixing; defaults to (d-1)/d.
        #[arg(long)]
        mixing: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Polytope {
    #[value(name = "P")]
    P,
    #[value(name = "Q")]
    Q,
    #[value(name = "TOL")]
    Tol,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SamplePolytope {
    #[value(name = "Q")]
    Q,
    #[value(name = "TOL")]
    Tol,
}

fn run(cli: Cli) -> Result<commands::Output, String> {
    let tol = cli.tol;
    if let Some(t) = tol {
        if !(t.is_finite() && t >= 0.0) {
            return Err(format!("tolerance must be a nonnegative number, got {t}"));
        }
    }
    match cli.command {
        Command::Validate { file } => commands::validate(&file, tol),
        Command::Member { file, polytope, iters } => match polytope {
            Polytope::P => commands::member_p(&file, tol),
            Polytope::Q => commands::member_q(&file, tol),
            Polytope::Tol => commands::member_tol(&file, tol, iters),
        },
        Command::Extremal { spec_file } => commands::extremal(&spec_file, tol),
        Command::Witness { file, steps } => commands::witness(&file, steps, tol),
        Command::Simulate {
            strategy_file,
            canonical,
            emit_strategy,
        } => commands::simulate(strategy_file.as_deref(), canonical, emit_strategy),
        Command::Seesaw {
            state,
            seed,
            iters,
            dims,
        } => commands::seesaw(&state, seed, iters, dims.as_deref(), tol),
        Command::Sample { polytope, n, seed } => match polytope {
            SamplePolytope::Q => commands::sample(commands::Sampled::Q, n, seed),
            SamplePolytope::Tol => commands::sample(commands::Sampled::Tol, n, seed),
        },
        Command::CountExtremal => commands::count_extremal(),
        Command::Demo {
            demo: Demo::HiddenNonlocality { d, seed, mixing },
        } => commands::hidden_nonlocality(d, seed, mixing),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pretty = cli.pretty;
    match run(cli) {
        Ok(out) => {
            if pretty {
                print!("{}", out.summary);
            } else {
                println!("{}", out.json);
            }
            if out.verdict {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("seqlocal: {e}");
            ExitCode::from(2)
        }
    }
}
