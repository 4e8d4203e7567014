use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use cde_cli::bench::BenchConfig;
use cde_cli::commands::{self, Output, SolveOpts, TieBreak};
use cde_cli::io::{parse_range, read_instance};
use cde_cli::props::SuiteConfig;
use cde_cli::CliResult;
use cde_core::dv::ExcessRule;
use cde_core::RateVector;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "cde",
    version,
    about = "Minimum sum-rate cooperative data exchange toolkit"
)]
struct Cli {
    /// Machine-readable output.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Copy, Clone, ValueEnum)]
enum TieBreakArg {
    Lex,
    PaperTrace,
}

#[derive(Copy, Clone, ValueEnum)]
enum ExcessArg {
    LowestIndex,
    SmallestBlock,
}

#[derive(Subcommand)]
enum Cmd {
    /// Minimum sum-rate and a strategy achieving it.
    Solve {
        file: PathBuf,
        /// Start the estimate exactly here instead of at the lower bound.
        #[arg(long)]
        alpha: Option<i64>,
        #[arg(long)]
        trace: bool,
        /// Check the strategy against the brute-force oracle.
        #[arg(long)]
        verify: bool,
        #[arg(long, value_enum, default_value = "lex")]
        tie_break: TieBreakArg,
    },
    /// Check a rate vector against every cut condition.
    Verify {
        file: PathBuf,
        #[arg(long)]
        rates: RateVector,
        /// Also require the sum to equal the exhaustive optimum.
        #[arg(long)]
        optimal: bool,
    },
    /// Brute-force ground truth.
    Oracle {
        #[command(subcommand)]
        cmd: OracleCmd,
    },
    /// Divide-and-conquer fractional solver.
    Dv {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "lowest-index")]
        excess: ExcessArg,
        #[arg(long)]
        trace: bool,
    },
    /// Random linear coding simulation of a rate vector.
    Simulate {
        file: PathBuf,
        #[arg(long)]
        rates: RateVector,
        #[arg(long, default_value_t = cde_core::rlnc::DEFAULT_MODULUS)]
        q: u64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, env = "CDE_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Print a random instance.
    Gen {
        #[arg(long)]
        clients: usize,
        #[arg(long)]
        packets: usize,
        #[arg(long, default_value_t = 0.5)]
        density: f64,
        #[arg(long, env = "CDE_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Union-evaluation counts over random instances.
    Bench {
        #[arg(long, default_value_t = 50)]
        packets: usize,
        /// Inclusive client range `A..B`.
        #[arg(long, default_value = "5..60", value_parser = parse_range)]
        clients: (u64, u64),
        #[arg(long, default_value_t = 20)]
        reps: usize,
        #[arg(long, default_value_t = 0.5)]
        density: f64,
        #[arg(long, env = "CDE_SEED", default_value_t = 0)]
        seed: u64,
        /// Largest merge-group size tried.
        #[arg(long)]
        k_cap: Option<usize>,
        /// Write 0 for every wall time, so identical flags give identical CSV.
        #[arg(long)]
        no_timing: bool,
        /// CSV destination; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum OracleCmd {
    /// Exhaustive optimum and lower bound.
    Alpha { file: PathBuf },
    /// Solver cross-checks and diagnostics on random instances.
    Props {
        /// Half-open seed range `A..B`.
        #[arg(long, default_value = "0..200")]
        seed_range: String,
        #[arg(long, default_value = "3..7", value_parser = parse_range)]
        clients: (u64, u64),
        #[arg(long, default_value = "4..12", value_parser = parse_range)]
        packets: (u64, u64),
        #[arg(long, default_value_t = 0.5)]
        density: f64,
    },
}

fn half_open(s: &str) -> CliResult<(u64, u64)> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| cde_cli::CliError::Usage(format!("seed range {s:?} is not A..B")))?;
    let parse = |t: &str| {
        t.trim()
            .parse::<u64>()
            .map_err(|e| cde_cli::CliError::Usage(format!("seed range {s:?}: {e}")))
    };
    Ok((parse(a)?, parse(b)?))
}

fn run(cli: Cli) -> CliResult<Output> {
    let json = cli.json;
    match cli.cmd {
        Cmd::Solve {
            file,
            alpha,
            trace,
            verify,
            tie_break,
        } => {
            let inst = read_instance(&file)?;
            let opts = SolveOpts {
                alpha,
                trace,
                verify,
                tie_break: match tie_break {
                    TieBreakArg::Lex => TieBreak::Lex,
                    TieBreakArg::PaperTrace => TieBreak::PaperTrace,
                },
                json,
            };
            commands::solve(&inst, &opts)
        }
        Cmd::Verify {
            file,
            rates,
            optimal,
        } => commands::verify(&read_instance(&file)?, &rates, optimal, json),
        Cmd::Oracle { cmd } => match cmd {
            OracleCmd::Alpha { file } => commands::oracle_alpha(&read_instance(&file)?, json),
            OracleCmd::Props {
                seed_range,
                clients,
                packets,
                density,
            } => {
                let cfg = SuiteConfig {
                    seeds: half_open(&seed_range)?,
                    clients: (clients.0 as usize, clients.1 as usize),
                    packets: (packets.0 as usize, packets.1 as usize),
                    density,
                };
                commands::oracle_props(&cfg, json)
            }
        },
        Cmd::Dv {
            file,
            excess,
            trace,
        } => {
            let rule = match excess {
                ExcessArg::LowestIndex => ExcessRule::LowestIndex,
                ExcessArg::SmallestBlock => ExcessRule::SmallestBlock,
            };
            commands::dv(&read_instance(&file)?, rule, trace, json)
        }
        Cmd::Simulate {
            file,
            rates,
            q,
            trials,
            seed,
        } => commands::simulate(&read_instance(&file)?, &rates, q, trials, seed, json),
        Cmd::Gen {
            clients,
            packets,
            density,
            seed,
        } => commands::gen(clients, packets, density, seed),
        Cmd::Bench {
            packets,
            clients,
            reps,
            density,
            seed,
            k_cap,
            no_timing,
            out,
        } => {
            let cfg = BenchConfig {
                num_packets: packets,
                clients: (clients.0 as usize, clients.1 as usize),
                reps,
                density,
                seed,
                k_cap,
                record_wall: !no_timing,
            };
            commands::bench(&cfg, out.as_deref(), json)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(out) => {
            let _ = std::io::stdout().write_all(out.stdout.as_bytes());
            ExitCode::from(out.code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
