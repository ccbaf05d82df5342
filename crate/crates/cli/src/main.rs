//! Command-line harness: single rate reports, CDF sweeps over eavesdropper
//! channels, low-noise rate sweeps and the invariant suite.

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mimome_gmm::channel::{make_bob_dct, make_eve_gaussian, ChannelPair};
use mimome_gmm::harness::{
    derive_stream, lownoise_csv, run_cdf, run_lownoise_sweep, run_validate, BobChannel,
    ScenarioConfig,
};
use mimome_gmm::info::rate_report;
use mimome_gmm::signal::build_cayley_family;

#[derive(Parser)]
#[command(name = "mimome-gmm", version, about = "Secrecy rates of a MIMOME wiretap channel with Gaussian-mixture signaling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DimArgs {
    /// Transmit antennas n
    #[arg(long)]
    n: usize,
    /// Legitimate receive antennas
    #[arg(long)]
    mb: usize,
    /// Eavesdropper receive antennas
    #[arg(long)]
    me: usize,
    /// Number of Gaussian classes K
    #[arg(long)]
    k: usize,
    /// Transmit power budget P
    #[arg(long, default_value_t = 1.0)]
    power: f64,
    /// Monte-Carlo samples per estimate
    #[arg(long, default_value_t = 20_000)]
    samples: usize,
    /// Master seed for all randomness
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Legitimate channel: fixed DCT rows or per-trial Gaussian
    #[arg(long, value_enum, default_value_t = BobArg::Dct)]
    bob: BobArg,
}

#[derive(clap::ValueEnum, Clone, Copy, PartialEq, Eq)]
enum BobArg {
    Dct,
    Gaussian,
}

impl From<BobArg> for BobChannel {
    fn from(b: BobArg) -> Self {
        match b {
            BobArg::Dct => BobChannel::Dct,
            BobArg::Gaussian => BobChannel::Gaussian,
        }
    }
}

impl DimArgs {
    fn config(&self, eps: f64, snr_db: f64, n_trials: usize) -> ScenarioConfig {
        ScenarioConfig {
            n: self.n,
            mb: self.mb,
            me: self.me,
            num_classes: self.k,
            eps,
            snr_db,
            power: self.power,
            n_trials,
            n_samples: self.samples,
            master_seed: self.seed,
            bob_channel: self.bob.into(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Compute one rate report for a single channel draw, as JSON on stdout
    Rates {
        #[command(flatten)]
        dims: DimArgs,
        /// Covariance rotation parameter
        #[arg(long)]
        eps: f64,
        /// Signal-to-noise ratio in dB (SNR = P/sigma^2)
        #[arg(long)]
        snr_db: f64,
    },
    /// Monte-Carlo sweep over eavesdropper channels; writes a CSV of per-trial rates
    Cdf {
        #[command(flatten)]
        dims: DimArgs,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        snr_db: f64,
        /// Number of eavesdropper channel realizations
        #[arg(long, default_value_t = 500)]
        trials: usize,
        /// Output CSV path
        #[arg(long)]
        out: std::path::PathBuf,
    },
    /// Noiseless achievable-rate sweep over an epsilon grid
    Lownoise {
        #[command(flatten)]
        dims: DimArgs,
        /// Comma-separated epsilon values, e.g. 0.1,0.01,0.001
        #[arg(long, value_delimiter = ',')]
        eps_grid: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long)]
        out: std::path::PathBuf,
    },
    /// Run the cross-module invariant suite; exit code reflects the outcome
    Validate {
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<bool, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Rates { dims, eps, snr_db } => {
            let cfg = dims.config(eps, snr_db, 1);
            cfg.validate()?;
            let mut rng = derive_stream(cfg.master_seed, 1);
            let phi_b = match cfg.bob_channel {
                BobChannel::Dct => make_bob_dct(cfg.n, cfg.mb)?,
                BobChannel::Gaussian => make_eve_gaussian(cfg.n, cfg.mb, &mut rng),
            };
            let phi_e = make_eve_gaussian(cfg.n, cfg.me, &mut rng);
            let family = build_cayley_family(&cfg.family_spec())?;
            for w in &family.warnings {
                eprintln!(
                    "warning: classes {} and {} have nearly coincident subspaces (separation {:.3e})",
                    w.class_a, w.class_b, w.separation
                );
            }
            let chans = ChannelPair::new(phi_b, phi_e, cfg.noise_var())?;
            let report = rate_report(&family.source, &chans, cfg.n_samples, &mut rng)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(true)
        }
        Command::Cdf {
            dims,
            eps,
            snr_db,
            trials,
            out,
        } => {
            let cfg = dims.config(eps, snr_db, trials);
            let result = run_cdf(&cfg)?;
            std::fs::write(&out, result.to_csv())?;
            eprintln!("wrote {} trials to {}", result.trials.len(), out.display());
            Ok(true)
        }
        Command::Lownoise {
            dims,
            eps_grid,
            trials,
            out,
        } => {
            if eps_grid.is_empty() {
                return Err("empty --eps-grid".into());
            }
            // SNR is unused on the noiseless path
            let cfg = dims.config(eps_grid[0], 0.0, trials);
            let rows = run_lownoise_sweep(&cfg, &eps_grid)?;
            std::fs::write(&out, lownoise_csv(&cfg, &rows))?;
            eprintln!("wrote {} rows to {}", rows.len(), out.display());
            Ok(true)
        }
        Command::Validate { seed } => {
            let report = run_validate(seed);
            print!("{}", report.render());
            Ok(report.passed())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
