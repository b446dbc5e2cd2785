use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use charfred_cli::{cmd_diagnose, cmd_solve, cmd_testbed, cmd_validate, Run, RunConfig, TestbedArgs, EXIT_CONFIG};

#[derive(Parser)]
#[command(name = "charfred", version, about = "Characteristic-integral solver and Fredholm diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `seed` in the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the spec and right-hand side; prints the validation report.
    Validate(Common),
    /// Solve (C + D) u = f; writes solution.csv, outcome.json and timing.json.
    Solve(Common),
    /// Smoothing profile and Jacobian table; writes diagnostics.csv and diagnostics.json.
    Diagnose(Common),
    /// Kernel-dimension sweep over random and crafted matrices.
    Testbed {
        /// Takes the seed from this configuration unless --seed is given.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 500)]
        count: usize,
        #[arg(long, default_value_t = 8)]
        max_dim: usize,
        #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
        powers: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        crafted: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load(common: &Common) -> Result<(RunConfig, PathBuf), Run> {
    let mut cfg = RunConfig::load(&common.config).map_err(|e| Run {
        code: EXIT_CONFIG,
        stdout: String::new(),
        stderr: e.to_string(),
    })?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = common.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    Ok((cfg, out))
}

fn run(cli: Cli) -> Run {
    match cli.command {
        Command::Validate(c) => load(&c).map(|(cfg, _)| cmd_validate(&cfg)),
        Command::Solve(c) => load(&c).map(|(cfg, out)| cmd_solve(&cfg, &out)),
        Command::Diagnose(c) => load(&c).map(|(cfg, out)| cmd_diagnose(&cfg, &out)),
        Command::Testbed { config, count, max_dim, powers, crafted, seed } => {
            let from_config = match config {
                Some(path) => match RunConfig::load(&path) {
                    Ok(cfg) => Some(cfg.seed),
                    Err(e) => return Run { code: EXIT_CONFIG, stdout: String::new(), stderr: e.to_string() },
                },
                None => None,
            };
            let seed = seed.or(from_config).unwrap_or(0);
            Ok(cmd_testbed(&TestbedArgs { count, max_dim, powers, crafted, seed }))
        }
    }
    .unwrap_or_else(|run| run)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = std::env::var("CHARFRED_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if threads > 0 {
            rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().ok();
        }
    }
    let result = run(cli);
    print!("{}", result.stdout);
    std::io::stdout().flush().ok();
    if !result.stderr.is_empty() {
        eprintln!("{}", result.stderr.trim_end());
    }
    ExitCode::from(result.code as u8)
}
