//! Rate-only baseline against STB-JMF on the same channels: the baseline
//! maximizes MU1's SINR and leaves the eavesdropper unconstrained.

use hetnet_secrecy::benchmark::solve_benchmark;
use hetnet_secrecy::channel::{sample_rayleigh_channels, NetworkConfig};
use hetnet_secrecy::metrics;
use hetnet_secrecy::stb_jmf::{solve_stb_jmf, JmfOptions};

fn main() -> hetnet_secrecy::Result<()> {
    let cfg = NetworkConfig::simulation_defaults();
    println!("seed  benchmark  stb_jmf   (bits)  Eve SINR benchmark / stb_jmf");
    for seed in 0..5 {
        let ch = sample_rayleigh_channels(&cfg, seed);
        let b = solve_benchmark(&ch, &cfg)?;
        let j = solve_stb_jmf(&ch, &cfg, &JmfOptions::default())?;
        println!(
            "{seed:>4}  {:>9.4}  {:>7.4}           {:.3e} / {:.3e}",
            metrics::secrecy_rate(&ch, &b)?,
            metrics::secrecy_rate(&ch, &j)?,
            metrics::sinr_eve(&ch, &b)?,
            metrics::sinr_eve(&ch, &j)?
        );
    }
    Ok(())
}
