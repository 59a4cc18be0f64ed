use std::fs;
use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gmi::config::{check_quad_order, parse_config, RunConfig};
use gmi::{commands, validate, CliError, Table};

#[derive(Debug, Parser)]
#[command(name = "gmi", version, about = "GMI of nearest-neighbor decoding over distorted Gaussian-input channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Moments, effective SNRs and GMI of one channel
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Also write the conditional-mean front end g(y) as CSV to this path
        #[arg(long, value_name = "PATH")]
        dump_frontend: Option<PathBuf>,
    },
    /// Analysis rows over an SNR or energy grid
    Sweep(Common),
    /// Random-coding link simulation over a (rate, n) grid
    Simulate(Common),
    /// Super-symbol rates of a linear-Gaussian block channel
    Block(Common),
    /// Invariant suite on the built-in corpus (plus the configured channel)
    Validate(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration (optional for validate)
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// CSV output path; stdout when neither this nor the config names one
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Master seed, overrides the config
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads
    #[arg(long)]
    threads: Option<usize>,
    /// Gauss-Hermite order, overrides the config
    #[arg(long)]
    quad_order: Option<usize>,
}

impl Common {
    fn load(&self, required: bool) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::Config(vec![format!("{}: {e}", path.display())]))?;
                parse_config(&text)?
            }
            None if required => return Err(CliError::Config(vec!["--config is required".into()])),
            None => parse_config("{}")?,
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(order) = self.quad_order {
            check_quad_order(order).map_err(|e| CliError::Config(vec![e]))?;
            cfg.quad_order = Some(order);
        }
        if let Some(out) = &self.out {
            cfg.output = Some(out.clone());
        }
        Ok(cfg)
    }

    fn pool(&self) -> Result<rayon::ThreadPool, CliError> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = self.threads {
            if n == 0 {
                return Err(CliError::Config(vec!["--threads must be at least 1".into()]));
            }
            b = b.num_threads(n);
        }
        b.build().map_err(|e| CliError::Failed(e.to_string()))
    }
}

fn emit(table: &Table, path: Option<&PathBuf>) -> Result<(), CliError> {
    match path {
        Some(p) => table.write(fs::File::create(p)?)?,
        None => table.write(io::stdout().lock())?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (common, dump) = match &cli.command {
        Command::Analyze { common, dump_frontend } => (common, dump_frontend.as_ref()),
        Command::Sweep(c) | Command::Simulate(c) | Command::Block(c) | Command::Validate(c) => (c, None),
    };
    let cfg = common.load(!matches!(cli.command, Command::Validate(_)))?;
    let pool = common.pool()?;
    pool.install(|| {
        let table = match cli.command {
            Command::Analyze { .. } => {
                let table = commands::analyze(&cfg)?;
                if let Some(path) = dump {
                    emit(&commands::dump_frontend(&cfg)?, Some(path))?;
                }
                table
            }
            Command::Sweep(_) => commands::sweep(&cfg)?,
            Command::Simulate(_) => commands::simulate(&cfg)?,
            Command::Block(_) => commands::block(&cfg)?,
            Command::Validate(_) => {
                let checks = validate::run_suite(cfg.channel.as_ref(), &cfg.quad(), cfg.seed)?;
                emit(&validate::to_table(&checks), cfg.output.as_ref())?;
                let failed: Vec<_> = checks.iter().filter(|c| !c.pass()).collect();
                for c in &failed {
                    eprintln!("FAIL {} [{}]: {} vs bound {}", c.name, c.case, c.measured, c.bound);
                }
                if !failed.is_empty() {
                    return Err(CliError::Failed(format!("{} of {} checks failed", failed.len(), checks.len())));
                }
                return Ok(());
            }
        };
        emit(&table, cfg.output.as_ref())
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gmi: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
