mod check;
mod commands;
mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "elastobeam",
    version,
    about = "Gaussian beams, reflection and three-wave interaction in isotropic elastic media"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Medium file (TOML). Defaults to the constant medium
    /// λ=2, μ=1, ρ=1, A=0.3, B=0.2, C=0.
    #[arg(long, global = true)]
    pub medium: Option<PathBuf>,
    /// `ball:R[@cx,cy,cz]` or `ellipsoid:a,b,c[@cx,cy,cz]`.
    #[arg(long, global = true, default_value = "ball:1")]
    pub domain: String,
    #[arg(long, global = true, value_enum, default_value = "s")]
    pub mode: Mode,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses all cores. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Output directory. Without it the JSON report goes to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Multiplies every pass/fail threshold.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub tol: f64,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum Mode {
    P,
    S,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum Kind {
    Perp,
    Inplane,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check positivity of μ, 3λ+2μ and ρ at sampled points of the domain.
    Validate {
        #[arg(long, default_value_t = 512)]
        samples: usize,
    },
    /// Trace a ray through the domain; CSV of path samples.
    Trace {
        #[arg(long, default_value = "0,0,0")]
        x0: String,
        #[arg(long, default_value = "1,0,0")]
        dir: String,
        #[arg(long, default_value_t = 0.0)]
        t0: f64,
    },
    /// Build a beam and report on-axis amplitudes and transport residuals.
    Beam {
        #[arg(long, default_value = "0,0,0")]
        x0: String,
        #[arg(long, default_value = "1,0,0")]
        dir: String,
        /// `c2,c3` for S beams, `c` for P beams.
        #[arg(long, default_value = "1,0")]
        amp: String,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, default_value_t = 41)]
        taus: usize,
    },
    /// Reflection tree of a ray with P/S mode conversion.
    Reflect {
        #[arg(long, default_value = "0,0,0")]
        x0: String,
        #[arg(long, default_value = "1,0.3,0.2")]
        dir: String,
        #[arg(long, default_value_t = 3)]
        depth: usize,
    },
    /// Interaction amplitudes over an angle sweep; CSV of (angle, scaled).
    Interact {
        #[arg(long, value_enum, default_value = "perp")]
        kind: Kind,
        #[arg(long, default_value = "0,0,0")]
        x0: String,
        /// ψ values (PERP) or in-plane angles α (INPLANE).
        #[arg(long, default_value = "0.3,0.9,1.5,2.1")]
        angles: String,
        /// Frequencies for the stationary-phase integral (homogeneous media).
        #[arg(long)]
        varrho: Option<String>,
        #[arg(long, default_value_t = 24)]
        nodes: usize,
    },
    /// Recover λ, μ, ρ, A, B at points from synthetic interaction data.
    Recover {
        /// Semicolon-separated points.
        #[arg(long, default_value = "0,0,0")]
        points: String,
        #[arg(long)]
        psi: Option<String>,
        #[arg(long)]
        alpha: Option<String>,
        /// Relative noise on the synthetic data, drawn from `--seed`.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
    },
    /// Run the invariant suite and print a pass/fail table.
    Check {
        /// Random draws for the reflection checks.
        #[arg(long, default_value_t = 10_000)]
        draws: usize,
        #[arg(long, default_value_t = 20)]
        rays: usize,
    },
}

pub enum Failure {
    Config(String),
    Check(String),
}

impl From<elastobeam::Error> for Failure {
    fn from(e: elastobeam::Error) -> Self {
        use elastobeam::Error as E;
        match e {
            E::Parse { .. }
            | E::MediumDefinition(_)
            | E::InvalidInput(_)
            | E::Io(_)
            | E::ConfigMismatch(_)
            | E::StartOutsideDomain(_) => Failure::Config(e.to_string()),
            _ => Failure::Check(e.to_string()),
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let g = &cli.global;
    if !(g.tol > 0.0) {
        return Err(Failure::Config("--tol must be positive".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(g.jobs)
        .build_global()
        .map_err(|e| Failure::Config(e.to_string()))?;
    let out = output::Output::new(g.out.clone())?;
    match cli.command {
        Command::Validate { samples } => commands::validate(g, &out, samples),
        Command::Trace { x0, dir, t0 } => commands::trace(g, &out, &x0, &dir, t0),
        Command::Beam {
            x0,
            dir,
            amp,
            delta,
            taus,
        } => commands::beam(g, &out, &x0, &dir, &amp, delta, taus),
        Command::Reflect { x0, dir, depth } => commands::reflect(g, &out, &x0, &dir, depth),
        Command::Interact {
            kind,
            x0,
            angles,
            varrho,
            nodes,
        } => commands::interact(g, &out, kind, &x0, &angles, varrho.as_deref(), nodes),
        Command::Recover {
            points,
            psi,
            alpha,
            noise,
        } => commands::recover(g, &out, &points, psi.as_deref(), alpha.as_deref(), noise),
        Command::Check { draws, rays } => check::run(g, &out, draws, rays),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
    }
}
