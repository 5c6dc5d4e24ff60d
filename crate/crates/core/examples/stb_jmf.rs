//! Joint MBS/FBS design: the outer search over the eavesdropper SINR level
//! τ, then rank-one recovery of the precoders from the lifted covariances.

use hetnet_secrecy::channel::{sample_rayleigh_channels, NetworkConfig};
use hetnet_secrecy::metrics;
use hetnet_secrecy::stb_jmf::{outer_bits, outer_search, solve_stb_jmf, JmfOptions};

fn main() -> hetnet_secrecy::Result<()> {
    let cfg = NetworkConfig::simulation_defaults();
    let ch = sample_rayleigh_channels(&cfg, 5);
    let opts = JmfOptions::default();

    let search = outer_search(&ch, &cfg, &opts)?;
    println!("coarse grid (τ, bits):");
    for &(tau, v) in &search.grid {
        println!("  {tau:>12.4e}  {:.6}", outer_bits(v));
    }
    println!("τ* = {:.6e} after {} inner SDPs, {:.6} bits", search.tau, search.evaluations, outer_bits(search.value));

    let sol = solve_stb_jmf(&ch, &cfg, &opts)?;
    let d = &sol.diagnostics;
    println!("largest λ₂/λ₁ {:.2e}, randomized blocks {}", d.max_rank_ratio.unwrap_or(f64::NAN), d.randomized_blocks);
    println!("secrecy rate {:.6} bits", metrics::secrecy_rate(&ch, &sol)?);
    for n in 0..cfg.n_coop {
        println!("FU SINR at FBS {n}: {:.6} (target {})", metrics::sinr_fu(&ch, &sol, n, 0)?, cfg.gamma_fu[n][0]);
    }
    Ok(())
}
