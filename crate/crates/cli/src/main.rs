use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use disperse_uc::config::ExperimentConfig;
use disperse_uc::report::{run_with_series, write_series};
use disperse_uc::sweep::{parse_values, sweep};
use disperse_uc::CliError;

const RUN_CSV_HELP: &str = "\
CSV series written by --csv (header always emitted):
  kernel-decay           x,abs_kernel,envelope      (fit window only)
  sharpness              dt,residual
  convexity              t,log_weighted_energy,g
  subordination          x,ratio
  theta-transfer         a,b,theta,ratio,shell_fraction
  treves                 k,term
  carleman-l2            gamma,ratio
  multiplier-uniformity  b,ratio
  frozen-resolvent       im_z,ratio
  vdc                    s,magnitude
  dispersive             s,ratio

Exit codes: 0 pass, 1 tolerance failed, 2 config error, 3 numerical error.";

const SWEEP_CSV_HELP: &str = "\
CSV columns: row,<axis>,status,primary,<result keys, sorted>,message
  status is pass, fail or error; primary is the experiment's headline result.
  Three summary rows follow the runs: min, max and max_over_min, computed
  over every numeric column of the rows that ran.

DISPERSE_UC_THREADS caps the number of rows run at once (default: all cores).
Exit codes: 0 all rows pass, 1 some row failed its tolerance, 2 config error,
3 some row raised an error.";

#[derive(Parser)]
#[command(name = "disperse-uc", version, about = "Run the dispersive-equation verification experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and print its JSON report.
    #[command(after_long_help = RUN_CSV_HELP)]
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override a config key (`m=2`, `window=[3,7]`); repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Also write the experiment's (x, y) series.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run one experiment per value of a scalar key and summarize.
    #[command(after_long_help = SWEEP_CSV_HELP)]
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Key to vary: `m`, `seed` or a parameter name.
        #[arg(long)]
        axis: String,
        /// Comma-separated values, e.g. `1,2,3`.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        /// Write the summary CSV here instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn exec(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Run { config, set, csv } => {
            let cfg = ExperimentConfig::load(&config, &set)?;
            let (report, series) = run_with_series(&cfg)?;
            println!("{}", report.to_json()?);
            if let Some(path) = &cfg.output_path {
                report.write(Path::new(path))?;
            }
            if let Some(path) = csv {
                write_series(&series, &path)?;
            }
            Ok(report.exit_code())
        }
        Command::Sweep { config, set, axis, values, csv } => {
            let cfg = ExperimentConfig::load(&config, &set)?;
            let values = parse_values(&values)?;
            let result = sweep(&cfg, &axis, &values)?;
            for row in &result.rows {
                if let Err(e) = &row.outcome {
                    eprintln!("row {} ({axis} = {}): {e}", row.row, row.value);
                }
            }
            match csv {
                Some(path) => {
                    let f = std::fs::File::create(&path)
                        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
                    result.write_csv(f)?;
                }
                None => {
                    let mut out = std::io::stdout().lock();
                    result.write_csv(&mut out)?;
                    out.flush()?;
                }
            }
            Ok(result.exit_code())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match exec(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("disperse-uc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
