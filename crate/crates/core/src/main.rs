use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vapor_memory_lab::commands::{execute, Command, DriveChoice};
use vapor_memory_lab::config::ExperimentConfig;
use vapor_memory_lab::{Error, Result};

/// Simulate and analyse EIT spectra, slow light and photon storage in
/// vapor-filled waveguides.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    /// TOML experiment configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output root (overrides `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print nothing on success.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Verb,
}

#[derive(Args, Debug)]
#[group(multiple = false)]
struct DriveArgs {
    /// Single control power (W) instead of the configured ladder.
    #[arg(long)]
    power: Option<f64>,
    /// Single peak Rabi frequency (rad/s) instead of the configured ladder.
    #[arg(long)]
    omega0: Option<f64>,
}

impl DriveArgs {
    fn choice(&self) -> DriveChoice {
        match (self.power, self.omega0) {
            (Some(p), _) => DriveChoice::Power(p),
            (_, Some(w)) => DriveChoice::Omega0(w),
            _ => DriveChoice::Ladder,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Verb {
    /// Transmission spectra over the detuning grid.
    Spectrum(DriveArgs),
    /// Fit the forward model to a measured spectrum CSV.
    FitSpectrum {
        /// CSV with columns detuning_hz,transmission[,sigma].
        #[arg(long)]
        data: PathBuf,
    },
    /// Group velocity, compression and captured fraction.
    Slowlight(DriveArgs),
    /// One storage histogram and its extracted efficiency.
    Storage {
        /// Set storage time (s); the configured value when omitted.
        #[arg(long)]
        set_storage: Option<f64>,
    },
    /// Efficiency against storage time and the lifetime fit.
    Lifetime,
    /// Efficiency against signal width per control power.
    Bandwidth,
    /// Lifetime of several jittered channels.
    Multiplex {
        #[arg(long)]
        channels: Option<usize>,
    },
    /// Quick internal consistency checks.
    Selftest,
}

impl Verb {
    fn command(&self) -> Command {
        match self {
            Verb::Spectrum(d) => Command::Spectrum(d.choice()),
            Verb::FitSpectrum { data } => Command::FitSpectrum { data: data.clone() },
            Verb::Slowlight(d) => Command::Slowlight(d.choice()),
            Verb::Storage { set_storage } => Command::Storage {
                set_storage: *set_storage,
            },
            Verb::Lifetime => Command::Lifetime,
            Verb::Bandwidth => Command::Bandwidth,
            Verb::Multiplex { channels } => Command::Multiplex { channels: *channels },
            Verb::Selftest => Command::Selftest,
        }
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.out = out.clone();
    }
    Ok(config)
}

fn report_error(e: &Error, manifest: Option<&std::path::Path>) {
    let mut v = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
    if let Some(m) = manifest {
        v["manifest"] = m.display().to_string().into();
    }
    eprintln!("{v}");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            report_error(&e, None);
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match execute(&cli.command.command(), &config) {
        Ok(report) => {
            if !cli.quiet {
                println!("{}", report.dir.display());
                for f in &report.manifest.outputs {
                    println!("  {}", f.path.display());
                }
            }
            ExitCode::SUCCESS
        }
        Err(failure) => {
            report_error(&failure.error, failure.report.as_ref().map(|r| r.manifest_path.as_path()));
            ExitCode::from(failure.error.exit_code() as u8)
        }
    }
}
