//! `macimmse`: batch sweeps, verification suites and figure-data
//! reproduction for the two-user MAC information/estimation toolkit.
//!
//! Exit codes: 0 all checks pass, 1 a verification check failed,
//! 2 usage or parse errors. `MACIMMSE_THREADS` caps the rayon pool.

mod figure;
mod grid;
mod sweep;
mod verify;

use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "macimmse",
    version,
    about = "Two-user Gaussian MAC mutual-information / MMSE toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VerifyWhich {
    Identity,
    Gradients,
    Lowsnr,
    ClosedForms,
    All,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Quantity {
    Info,
    Mmse,
    Taylor,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep quantities over an SNR grid and write one row per point.
    Sweep {
        /// Model file (key-value format; see the repository README).
        #[arg(long)]
        model: PathBuf,
        /// Grid: `a:b:n` (linear), `a:b:nlog` (log-spaced) or `v1,v2,...`.
        #[arg(long = "snr-grid")]
        snr_grid: String,
        /// Monte Carlo samples per grid point (overrides the model file).
        #[arg(long)]
        samples: Option<usize>,
        /// Seed (overrides the model file).
        #[arg(long)]
        seed: Option<u64>,
        /// Output path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// Quantity groups to emit.
        #[arg(long, value_enum, value_delimiter = ',', default_value = "info,mmse")]
        quantities: Vec<Quantity>,
    },
    /// Closed-form rate/mmse curves for the scalar BPSK MAC with exact
    /// Monte Carlo counterparts (the standard rate-figure data).
    Figure1 {
        #[arg(long)]
        out: PathBuf,
        /// Optional SVG line plot of the rate curves.
        #[arg(long)]
        svg: Option<PathBuf>,
        #[arg(long = "snr-grid", default_value = "0.01:100:25log")]
        snr_grid: String,
        #[arg(long, default_value_t = 50_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Run verification checks and write a JSON report; exits 1 on failure.
    Verify {
        #[arg(long, value_enum)]
        which: VerifyWhich,
        /// Model file; defaults to the scalar BPSK MAC at snr 1.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Report path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Multiplies every check tolerance.
        #[arg(long = "tol-scale", default_value_t = 1.0)]
        tol_scale: f64,
        /// Negative-control hook: corrupt one analytic gradient entry.
        #[arg(long, hide = true, default_value_t = false)]
        corrupt_gradient: bool,
    },
}

fn init_threads() {
    if let Ok(v) = std::env::var("MACIMMSE_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
}

fn main() {
    let cli = Cli::parse();
    init_threads();
    let result = match cli.command {
        Command::Sweep {
            model,
            snr_grid,
            samples,
            seed,
            out,
            format,
            quantities,
        } => sweep::run(&model, &snr_grid, samples, seed, &out, format, &quantities),
        Command::Figure1 {
            out,
            svg,
            snr_grid,
            samples,
            seed,
        } => figure::run(&out, svg.as_deref(), &snr_grid, samples, seed),
        Command::Verify {
            which,
            model,
            samples,
            seed,
            out,
            tol_scale,
            corrupt_gradient,
        } => verify::run(
            which,
            model.as_deref(),
            samples,
            seed,
            out.as_deref(),
            tol_scale,
            corrupt_gradient,
        ),
    };
    match result {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(2);
        }
    }
}
