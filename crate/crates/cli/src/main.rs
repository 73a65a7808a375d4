//! `dper` command-line tool: estimate, mask and bench.
//!
//! Exit codes: 0 success, 1 usage or data error, 2 internal error. Errors are
//! written to stderr as a single JSON line.

mod report;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use dper::bench::{
    format_summary, load_datasets, run_benchmark, write_report_csv, write_report_json, write_timings_csv,
    BenchConfig,
};
use dper::io::{parse_csv, write_csv, CsvOptions, Table};
use dper::{apply_mcar, estimate, DperError, EstimateOptions, MaskSpec, Regime};

use report::{CliError, EstimateDocument};

#[derive(Parser)]
#[command(
    name = "dper",
    version,
    about = "Direct maximum-likelihood estimation from randomly missing data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate means and covariance matrices from a CSV file.
    Estimate {
        #[arg(long)]
        input: PathBuf,
        /// Column holding class labels; without it the data form one class.
        #[arg(long)]
        label_col: Option<String>,
        #[arg(long, default_value = "single")]
        regime: Regime,
        /// Clip negative eigenvalues of each assembled covariance matrix.
        #[arg(long)]
        psd_repair: bool,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Output path for the JSON document; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Apply an MCAR mask to a complete CSV file.
    Mask {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        label_col: Option<String>,
        #[arg(long)]
        rate: f64,
        #[arg(long)]
        seed: u64,
        /// Output CSV path; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run a benchmark sweep described by a TOML config file.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output_dir: PathBuf,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
}

fn main() -> ExitCode {
    std::panic::set_hook(Box::new(|info| {
        let message = info
            .payload()
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| info.payload().downcast_ref::<String>().cloned())
            .unwrap_or_default();
        eprintln!("{}", CliError::new("internal", message).to_line());
    }));

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) if !err.use_stderr() => {
            let _ = err.print();
            return ExitCode::SUCCESS;
        }
        Err(err) => {
            let text = err.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", CliError::new("usage", first.to_string()).to_line());
            return ExitCode::from(1);
        }
    };

    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(err)) => {
            eprintln!("{}", err.to_line());
            ExitCode::from(1)
        }
        Err(_) => ExitCode::from(2),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Estimate {
            input,
            label_col,
            regime,
            psd_repair,
            threads,
            output,
        } => {
            set_threads(threads)?;
            let start = Instant::now();
            let table = read_table(&input, label_col)?;
            let parse_s = start.elapsed().as_secs_f64();
            let start = Instant::now();
            let result = estimate(&table.dataset, regime, EstimateOptions { psd_repair })
                .map_err(|e| CliError::from_dper(e, &table))?;
            let estimate_s = start.elapsed().as_secs_f64();
            let doc = EstimateDocument::new(&table, &result, parse_s, estimate_s);
            let mut out = open_output(output.as_deref())?;
            serde_json::to_writer_pretty(&mut out, &doc).map_err(|e| CliError::io(e.to_string()))?;
            writeln!(out)
                .and_then(|_| out.flush())
                .map_err(|e| CliError::io(e.to_string()))
        }
        Command::Mask {
            input,
            label_col,
            rate,
            seed,
            output,
        } => {
            let table = read_table(&input, label_col)?;
            let spec = MaskSpec::new(rate, seed).map_err(|e| CliError::from_dper(e, &table))?;
            let masked = apply_mcar(&table.dataset, &spec).map_err(|e| CliError::from_dper(e, &table))?;
            let out_table = Table {
                dataset: masked,
                ..table.clone()
            };
            let out = open_output(output.as_deref())?;
            write_csv(out, &out_table).map_err(|e| CliError::from_dper(e, &table))
        }
        Command::Bench {
            config,
            output_dir,
            threads,
        } => {
            set_threads(threads)?;
            let text = fs::read_to_string(&config)
                .map_err(|e| CliError::io(format!("{}: {e}", config.display())))?;
            let cfg: BenchConfig =
                toml::from_str(&text).map_err(|e| CliError::new("config", flatten(&e.to_string())))?;
            let base = config.parent().unwrap_or(Path::new("."));
            let datasets = load_datasets(&cfg, base).map_err(CliError::plain)?;
            let report = run_benchmark(&cfg, &datasets).map_err(CliError::plain)?;

            fs::create_dir_all(&output_dir).map_err(|e| CliError::io(e.to_string()))?;
            let create = |name: &str| {
                File::create(output_dir.join(name))
                    .map(BufWriter::new)
                    .map_err(|e| CliError::io(format!("{name}: {e}")))
            };
            write_report_csv(create("report.csv")?, &report).map_err(CliError::plain)?;
            write_report_json(create("report.json")?, &report).map_err(CliError::plain)?;
            write_timings_csv(create("timings.csv")?, &report).map_err(CliError::plain)?;
            let summary = format_summary(&report);
            create("summary.txt")?
                .write_all(summary.as_bytes())
                .map_err(|e| CliError::io(e.to_string()))?;
            print!("{summary}");
            Ok(())
        }
    }
}

fn set_threads(threads: usize) -> Result<(), CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::new("internal", e.to_string()))
}

fn read_table(path: &Path, label_col: Option<String>) -> Result<Table, CliError> {
    let opts = CsvOptions {
        label_column: label_col,
        ..CsvOptions::default()
    };
    parse_csv(path, &opts).map_err(|e| match e {
        DperError::Io(io) => CliError::io(format!("{}: {io}", path.display())),
        other => CliError::plain(other),
    })
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn flatten(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}
