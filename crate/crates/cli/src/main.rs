use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qsdc_cli::config::parse_seeds;
use qsdc_cli::table::{linspace, write_table_csv};
use qsdc_cli::{capacity_table, run_experiment, write_artifacts, zero_crossing_km, CliError, DberAssumption, ExperimentConfig, OutputFormat};
use qsdc_core::channel::{ChannelParams, EveGainModel};
use qsdc_core::security::CapacityMode;

#[derive(Parser)]
#[command(name = "qsdc", version, about = "Quantum secure direct communication simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    TwoBasis,
    ZBasisOnly,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sessions described by a TOML experiment file.
    Run {
        config: PathBuf,
        /// Comma-separated seeds replacing those in the file.
        #[arg(long)]
        seed_override: Option<String>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, value_enum, default_value = "csv")]
        format: OutputFormat,
    },
    /// Print an analytic secrecy-capacity table against fiber length.
    Table {
        #[arg(long, default_value_t = 0.0)]
        start: f64,
        #[arg(long, default_value_t = 120.0)]
        stop: f64,
        #[arg(long, default_value_t = 121)]
        steps: usize,
        /// QBER of the main channel.
        #[arg(long, default_value_t = 0.02)]
        e: f64,
        #[arg(long, default_value_t = 0.02)]
        eps_x: f64,
        #[arg(long, default_value_t = 0.02)]
        eps_z: f64,
        #[arg(long, value_enum, default_value = "two-basis")]
        mode: ModeArg,
        /// Q_Eve = Q_Bob.
        #[arg(long)]
        incum: bool,
        /// Fixed Q_Eve/Q_Bob instead of the worst case Q_Eve = 1.
        #[arg(long)]
        g: Option<f64>,
        #[arg(long, default_value_t = qsdc_core::channel::DEFAULT_ATTENUATION_DB_PER_KM)]
        attenuation: f64,
        /// Output file; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            seed_override,
            out_dir,
            jobs,
            format,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.apply_env()?;
            if let Some(seeds) = seed_override {
                cfg.seeds = parse_seeds(&seeds)?;
            }
            if let Some(dir) = out_dir {
                cfg.output.dir = dir;
            }
            let results = run_experiment(&cfg, jobs)?;
            write_artifacts(&cfg, &results, &cfg.output.dir, format)?;
            eprintln!(
                "{} sessions written to {}",
                results.rows.len(),
                cfg.output.dir.display()
            );
            if let Some(f) = results.failures.first() {
                return Err(CliError::Session(format!(
                    "{} session(s) failed; first: point {} seed {}: {}",
                    results.failures.len(),
                    f.point,
                    f.seed,
                    f.reason
                )));
            }
            Ok(())
        }
        Command::Table {
            start,
            stop,
            steps,
            e,
            eps_x,
            eps_z,
            mode,
            incum,
            g,
            attenuation,
            out,
        } => {
            let mut channel = ChannelParams {
                attenuation_db_per_km: attenuation,
                ..ChannelParams::default()
            };
            if let Some(g) = g {
                channel.eve_gain_model = EveGainModel::Collecting { g: Some(g) };
            }
            let mode = match mode {
                ModeArg::TwoBasis => CapacityMode::TwoBasis,
                ModeArg::ZBasisOnly => CapacityMode::ZBasisOnly,
            };
            let dber = DberAssumption { e, eps_x, eps_z };
            let rows = capacity_table(&linspace(start, stop, steps), &channel, dber, mode, incum)?;
            match out {
                Some(path) => write_table_csv(&rows, std::fs::File::create(path)?)?,
                None => write_table_csv(&rows, std::io::stdout().lock())?,
            }
            match zero_crossing_km(&rows) {
                Some(km) => eprintln!("C_S reaches zero at {km:.3} km"),
                None => eprintln!("C_S does not cross zero in the range"),
            }
            std::io::stderr().flush()?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qsdc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
