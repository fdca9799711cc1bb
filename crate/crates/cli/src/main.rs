//! Command-line front end: solve, simulate, verify, sweep, and the figure
//! bundle. All randomness is seeded; identical invocations produce
//! byte-identical outputs regardless of the thread count, which the
//! `CONTRACT_LAB_THREADS` environment variable caps.

mod checks;
mod figures;
mod output;
mod sweep;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use contract_lab::model::{self, ModelConfig};
use contract_lab::simulate::{simulate_paths, simulate_paths_with_records, SimConfig, WagePolicy};

use output::{csv_line, fmt_float, to_json_bytes, SolutionDto};

#[derive(Parser)]
#[command(name = "contract-lab", version, about = "Optimal contracting under shutdown risk")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a configuration and print the contract as JSON, or the
    /// value-multiplier and compensation schedules as CSV.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Monte-Carlo simulation under the optimal policy; the report goes to
    /// stdout (or --out), per-path records to --out with --format csv.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
        #[arg(long, default_value_t = 2048)]
        steps: usize,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Run the certification suite; exits 1 when any check fails.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 20_000)]
        paths: usize,
        #[arg(long, default_value_t = 512)]
        steps: usize,
        /// Offset the value multiplier by this amount (negative control;
        /// the residual check must fail).
        #[arg(long)]
        perturb_phi: Option<f64>,
    },
    /// Evaluate metrics over a parameter grid described by a sweep spec.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Write the preset figure datasets into a directory.
    Figures {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

struct Failure {
    code: u8,
    message: String,
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn load_config(path: &Path) -> Result<ModelConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
    let config: ModelConfig = serde_json::from_str(&text)
        .map_err(|e| invalid(format!("cannot parse {}: {e}", path.display())))?;
    let report = model::validate(&config.params, &config.intensity, &config.variant);
    if !report.is_ok() {
        return Err(invalid(format!("{} does not validate: {report}", path.display())));
    }
    Ok(config)
}

fn emit(out: &Option<PathBuf>, bytes: &[u8]) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, bytes)
            .map_err(|e| invalid(format!("cannot write {}: {e}", path.display()))),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(bytes)
                .map_err(|e| invalid(format!("cannot write stdout: {e}")))
        }
    }
}

fn records_csv(records: &[contract_lab::simulate::PathRecord]) -> String {
    let header = [
        "path_id",
        "tau",
        "x_end",
        "w_end",
        "agent_cost_integral",
        "u_p_realized",
        "u_a_realized",
    ];
    let mut out = csv_line(&header.map(String::from));
    for r in records {
        out.push_str(&csv_line(&[
            r.path_id.to_string(),
            r.tau.map(fmt_float).unwrap_or_default(),
            fmt_float(r.x_end),
            fmt_float(r.w_end),
            fmt_float(r.agent_cost_integral),
            fmt_float(r.u_p_realized),
            fmt_float(r.u_a_realized),
        ]));
    }
    out
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Solve { config, out, format } => {
            let config = load_config(&config)?;
            let sol = contract_lab::contract::solve(&config.params, &config.intensity, &config.variant)
                .map_err(|e| invalid(format!("solve failed: {e}")))?;
            match format {
                Format::Json => emit(&out, &to_json_bytes(&SolutionDto::from_solution(&sol)))?,
                Format::Csv => {
                    let dto = SolutionDto::from_solution(&sol);
                    let mut csv = csv_line(&["t", "phi0", "k_star"].map(String::from));
                    for ((t, phi), (_, k)) in dto.phi0_grid.iter().zip(&dto.k_star_grid) {
                        csv.push_str(&csv_line(&[fmt_float(*t), fmt_float(*phi), fmt_float(*k)]));
                    }
                    emit(&out, csv.as_bytes())?;
                }
            }
            Ok(0)
        }
        Command::Simulate {
            config,
            out,
            seed,
            paths,
            steps,
            format,
        } => {
            let config = load_config(&config)?;
            let sol = contract_lab::contract::solve(&config.params, &config.intensity, &config.variant)
                .map_err(|e| invalid(format!("solve failed: {e}")))?;
            let policy = WagePolicy::from_solution(&sol);
            let cfg = SimConfig {
                n_paths: paths,
                n_steps: steps,
                master_seed: seed,
            };
            match format {
                Format::Json => {
                    let report = simulate_paths(&config.params, &config.intensity, &policy, &cfg)
                        .map_err(|e| invalid(format!("simulation failed: {e}")))?;
                    emit(&out, &to_json_bytes(&report))?;
                }
                Format::Csv => {
                    let out = out.ok_or_else(|| {
                        invalid("--format csv writes per-path records and requires --out")
                    })?;
                    let (report, records) =
                        simulate_paths_with_records(&config.params, &config.intensity, &policy, &cfg)
                            .map_err(|e| invalid(format!("simulation failed: {e}")))?;
                    std::fs::write(&out, records_csv(&records))
                        .map_err(|e| invalid(format!("cannot write {}: {e}", out.display())))?;
                    emit(&None, &to_json_bytes(&report))?;
                }
            }
            Ok(0)
        }
        Command::Verify {
            config,
            out,
            seed,
            paths,
            steps,
            perturb_phi,
        } => {
            let config = load_config(&config)?;
            let cfg = SimConfig {
                n_paths: paths,
                n_steps: steps,
                master_seed: seed,
            };
            let report = checks::run_verification(&config, &cfg, perturb_phi)
                .map_err(|e| invalid(format!("verification failed to run: {e}")))?;
            emit(&out, &to_json_bytes(&report))?;
            Ok(if report.passed { 0 } else { 1 })
        }
        Command::Sweep {
            config,
            out,
            seed,
            format,
        } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| invalid(format!("cannot read {}: {e}", config.display())))?;
            let spec: sweep::SweepSpec = serde_json::from_str(&text)
                .map_err(|e| invalid(format!("cannot parse {}: {e}", config.display())))?;
            let table = sweep::run_sweep(&spec, seed).map_err(invalid)?;
            match format {
                Format::Csv => emit(&out, table.to_csv().as_bytes())?,
                Format::Json => {
                    #[derive(serde::Serialize)]
                    struct TableDto<'a> {
                        header: &'a [String],
                        rows: &'a [Vec<String>],
                    }
                    emit(
                        &out,
                        &to_json_bytes(&TableDto {
                            header: &table.header,
                            rows: &table.rows,
                        }),
                    )?;
                }
            }
            Ok(0)
        }
        Command::Figures { out, seed } => {
            let written = figures::write_all(&out, seed).map_err(invalid)?;
            let mut listing = String::new();
            for name in &written {
                listing.push_str(name);
                listing.push('\n');
            }
            emit(&None, listing.as_bytes())?;
            Ok(0)
        }
    }
}

fn init_threads() {
    if let Ok(value) = std::env::var("CONTRACT_LAB_THREADS") {
        if let Ok(n) = value.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
