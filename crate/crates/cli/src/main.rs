//! `expdim`: cycles, covers, pressure certificates and renders for `f(z) = λe^z`.
//!
//! Exit codes: 0 success, 1 bad arguments or I/O, 2 no cycle or not certified,
//! 3 an internal invariant failed (dominance violation, failed self-test).

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    NoCycle(String),
    NotCertified(String),
    Invariant(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::NoCycle(_) | CliError::NotCertified(_) => 2,
            CliError::Invariant(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::NoCycle(m) | CliError::NotCertified(m) | CliError::Invariant(m) => m,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "expdim", version, about = "Dimension experiments for exponential maps with an attracting cycle")]
pub struct Cli {
    /// key = value file; flags override its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (default: $EXPDIM_OUT, else ./expdim-out).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Args, Debug, Default, Clone)]
pub struct MapArgs {
    /// λ as "re,im".
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<String>,
    #[arg(long)]
    pub max_iter: Option<String>,
    #[arg(long)]
    pub escape_re: Option<String>,
    #[arg(long)]
    pub attract_tol: Option<String>,
    #[arg(long)]
    pub max_period: Option<String>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct GridArgs {
    /// "x_min,x_max,y_min,y_max".
    #[arg(long, allow_hyphen_values = true)]
    pub window: Option<String>,
    /// Pixels per side (square grids) unless --height is given.
    #[arg(long)]
    pub size: Option<String>,
    #[arg(long)]
    pub height: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Attracting cycle and kneading sequence from the singular orbit.
    Cycle {
        #[command(flatten)]
        map: MapArgs,
    },
    /// Cover of the escaping boundary set and its (1+δ)-sums.
    Cover {
        #[command(flatten)]
        map: MapArgs,
        #[arg(long)]
        delta: Option<String>,
        /// Cover threshold; defaults to the least admissible M.
        #[arg(long)]
        m: Option<String>,
        #[arg(long)]
        depth: Option<String>,
        #[arg(long)]
        s_max: Option<String>,
        /// r_max = ceil(M) + r_extra.
        #[arg(long)]
        r_extra: Option<String>,
        #[arg(long)]
        samples: Option<String>,
    },
    /// Pressure certificate that the bounded boundary set has dimension above 1.
    DimLower {
        #[command(flatten)]
        map: MapArgs,
        /// Comma-separated R values.
        #[arg(long)]
        schedule: Option<String>,
        #[arg(long)]
        level: Option<String>,
        #[arg(long)]
        t_lo: Option<String>,
        #[arg(long)]
        t_hi: Option<String>,
        #[arg(long)]
        tol: Option<String>,
        #[arg(long)]
        xi_step: Option<String>,
        #[arg(long)]
        grid_side: Option<String>,
        /// Run the three-map similarity system instead.
        #[arg(long)]
        toy: bool,
    },
    /// Classify a pixel grid into basin phases, escaping and undecided.
    Render {
        #[command(flatten)]
        map: MapArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Box-counting slopes of the U_0 boundary and the whole-set surrogate, or of an input PGM.
    Boxcount {
        #[command(flatten)]
        map: MapArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// PGM whose pixels equal to 0 form the set.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Comma-separated box sides in pixels.
        #[arg(long)]
        scales: Option<String>,
        /// Boundary pixels sampled for the itinerary check.
        #[arg(long)]
        samples: Option<String>,
        #[arg(long)]
        seed: Option<String>,
    },
    /// Quick end-to-end checks against closed-form answers.
    SelfTest,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 || rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            eprintln!("error: --threads must be a positive integer");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            if matches!(e, CliError::Usage(_)) {
                eprintln!("usage: expdim [--config FILE] [--out DIR] <cycle|cover|dim-lower|render|boxcount|self-test> [OPTIONS]; see --help");
            }
            ExitCode::from(e.code())
        }
    }
}
