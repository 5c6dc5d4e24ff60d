//! A small paired Monte-Carlo sweep through the harness, written as CSV to
//! stdout with a per-point summary on stderr.

use hetnet_secrecy::channel::NetworkConfig;
use hetnet_secrecy::harness::{run_experiment, summarize, write_csv_to, ExperimentSpec, Scheme, Sweep, SweepParam};

fn main() -> hetnet_secrecy::Result<()> {
    let spec = ExperimentSpec {
        base: NetworkConfig::simulation_defaults(),
        sweep: Sweep::range(SweepParam::PmDb, 30.0, 45.0, 5.0)?,
        schemes: vec![Scheme::StbOm, Scheme::StbSmf, Scheme::Benchmark],
        trials: 5,
        seed: 1,
        record_timing: false,
        label: None,
    };
    let table = run_experiment(&spec)?;
    write_csv_to(&table, std::io::stdout().lock())?;
    for s in summarize(&table) {
        eprintln!("{:<10} {:>5.1} dB  {:.4} bits  ({} ok)", s.scheme, s.sweep_value_db, s.mean_secrecy_rate, s.ok);
    }
    Ok(())
}
