use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rdjoint::{analyze, load_sample, parse_experiment, simulate, AnalyzeOptions, BandChoice, CliError, Schema};
use rdjoint_core::{FitSpec, Kernel};

/// Joint inference on a regression discontinuity effect and its slope.
#[derive(Parser)]
#[command(name = "rdjoint", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Triangular,
    Epanechnikov,
    Uniform,
}

impl From<KernelArg> for Kernel {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Triangular => Kernel::Triangular,
            KernelArg::Epanechnikov => Kernel::Epanechnikov,
            KernelArg::Uniform => Kernel::Uniform,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BandArg {
    Uniform,
    Envelope,
    None,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate from a CSV file and print the result as JSON.
    Analyze {
        #[arg(long)]
        data: PathBuf,
        /// Running variable column.
        #[arg(long)]
        x: String,
        /// Outcome column.
        #[arg(long)]
        y: String,
        /// Treatment column; makes the design fuzzy.
        #[arg(long)]
        t: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        cutoff: f64,
        #[arg(long, default_value_t = 1)]
        p: usize,
        /// Pilot order, p + 1 when omitted.
        #[arg(long)]
        q: Option<usize>,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        b: Option<f64>,
        #[arg(long, value_enum, default_value = "triangular")]
        kernel: KernelArg,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 0.0)]
        delta_lo: f64,
        #[arg(long, default_value_t = 0.0)]
        delta_hi: f64,
        #[arg(long, default_value_t = 101)]
        grid: usize,
        #[arg(long, value_enum, default_value = "uniform")]
        band: BandArg,
        #[arg(long, default_value_t = 256)]
        boundary_points: usize,
        #[arg(long, default_value_t = 3)]
        nn_neighbors: usize,
    },
    /// Run a coverage experiment described by a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads; defaults to the number of CPUs.
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn run(command: Command) -> Result<String, CliError> {
    match command {
        Command::Analyze {
            data,
            x,
            y,
            t,
            cutoff,
            p,
            q,
            h,
            b,
            kernel,
            alpha,
            delta_lo,
            delta_hi,
            grid,
            band,
            boundary_points,
            nn_neighbors,
        } => {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(CliError::usage(
                    "bad_alpha",
                    format!("alpha must lie in (0, 1), got {alpha}"),
                ));
            }
            let mut spec = FitSpec::new(1.0, 1.0)
                .with_orders(p, q.unwrap_or(p + 1))
                .with_kernel(kernel.into())
                .with_alpha(alpha)
                .with_deltas(delta_lo, delta_hi);
            spec.nn_neighbors = nn_neighbors;
            spec.validate()?;
            let file =
                File::open(&data).map_err(|e| CliError::usage("io", format!("cannot open {}: {e}", data.display())))?;
            let schema = Schema::new(&x, &y, t.as_deref());
            let sample = load_sample(file, &schema, cutoff)?;
            let opts = AnalyzeOptions {
                spec,
                h,
                b,
                grid,
                band: match band {
                    BandArg::Uniform => BandChoice::Uniform,
                    BandArg::Envelope => BandChoice::Envelope,
                    BandArg::None => BandChoice::None,
                },
                boundary_points,
            };
            let result = analyze(&sample, (&x, &y, t.as_deref()), &opts)?;
            Ok(serde_json::to_string_pretty(&result).expect("result serializes"))
        }
        Command::Simulate { config, jobs } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| CliError::usage("io", format!("cannot read {}: {e}", config.display())))?;
            let cfg = parse_experiment(&text)?;
            let jobs = jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            if jobs == 0 {
                return Err(CliError::usage("bad_jobs", "--jobs must be at least 1"));
            }
            let out = simulate(&cfg, jobs)?;
            Ok(serde_json::to_string_pretty(&out).expect("report serializes"))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            // Help and version text go to stderr so stdout stays JSON-only.
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                eprint!("{e}");
                return ExitCode::SUCCESS;
            }
            let err = CliError::usage("usage", e.to_string().trim_end());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.kind.status());
        }
    };
    match run(cli.command) {
        Ok(json) => {
            let mut out = io::stdout().lock();
            if writeln!(out, "{json}").is_err() {
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.kind.status())
        }
    }
}
