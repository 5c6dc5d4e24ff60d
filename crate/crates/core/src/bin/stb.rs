use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hetnet_secrecy::harness::{self, ConfigFile, ResultTable, Sweep};
use hetnet_secrecy::Error;

#[derive(Parser)]
#[command(name = "stb", version, about = "Secrecy beamforming in two-tier HetNets")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Output {
    /// Output CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write 0 in solve_ms so reruns are byte-identical.
    #[arg(long)]
    no_timing: bool,
    /// Failed rows tolerated before exiting with status 2.
    #[arg(long, default_value_t = 0)]
    max_failures: usize,
}

#[derive(Subcommand)]
enum Cmd {
    /// Monte-Carlo sweep from a TOML experiment file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// e.g. p_m_db=30:45:3
        #[arg(long)]
        sweep: Option<String>,
        /// Comma-separated: stb_om,stb_smf,stb_jmf,benchmark,stb_om_an,random_an
        #[arg(long)]
        schemes: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        output: Output,
    },
    /// Checks solver invariants on random instances.
    Verify {
        #[arg(long, default_value_t = 20)]
        instances: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Regenerates the data of one figure: fig3, fig6, fig7, fig8, fig9, fig10.
    Figure {
        name: String,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidArgument(_) | Error::Dimension(_) => Failure::Config(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn emit(table: &ResultTable, output: &Output) -> Result<(), Failure> {
    match &output.out {
        Some(p) => harness::write_csv(table, p)?,
        None => harness::write_csv_to(table, std::io::stdout().lock())?,
    }
    for s in harness::summarize(table) {
        eprintln!(
            "{:<10} {:<20} {:>6.1} dB  rate {:>8.4}  fu {:>8.4}  ok {:>4}  failed {}",
            s.scheme, s.sweep_param, s.sweep_value_db, s.mean_secrecy_rate, s.mean_sinr_fu, s.ok, s.failed
        );
    }
    let failed = harness::failure_count(table);
    if failed > output.max_failures {
        return Err(Failure::Runtime(format!("{failed} failed solves exceed the budget of {}", output.max_failures)));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    match cli.cmd {
        Cmd::Run { config, sweep, schemes, trials, seed, output } => {
            let file = ConfigFile::load(&config)?;
            let mut spec = file.spec()?;
            if let Some(s) = sweep {
                spec.sweep = s.parse::<Sweep>()?;
            }
            if let Some(s) = schemes {
                spec.schemes = harness::parse_schemes(&s)?;
            }
            spec.trials = trials.unwrap_or(spec.trials);
            spec.seed = seed.unwrap_or(spec.seed);
            spec.record_timing = !output.no_timing;
            spec.validate()?;
            let out = Output { out: output.out.clone().or(file.experiment.out.map(PathBuf::from)), ..output };
            let table = harness::run_experiment(&spec)?;
            emit(&table, &out)
        }
        Cmd::Verify { instances, seed } => {
            let checks = harness::verify_batch(seed, instances);
            let mut failed = 0;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                failed += usize::from(!c.passed);
            }
            if failed > 0 {
                return Err(Failure::Runtime(format!("{failed} invariant checks failed")));
            }
            Ok(())
        }
        Cmd::Figure { name, trials, seed, output } => {
            if !harness::FIGURES.contains(&name.as_str()) {
                return Err(Failure::Config(format!("unknown figure `{name}`")));
            }
            if trials == 0 {
                return Err(Failure::Config("trials must be at least 1".into()));
            }
            let table = harness::run_figure(&name, trials, seed, !output.no_timing)?;
            emit(&table, &output)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
