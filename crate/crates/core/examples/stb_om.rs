//! MBS-only secrecy beamforming on one Rayleigh realization: the SCA
//! trace, the final SINRs and the power used.

use hetnet_secrecy::channel::{db_to_linear, sample_rayleigh_channels, NetworkConfig};
use hetnet_secrecy::metrics;
use hetnet_secrecy::stb_om::{solve_stb_om, StbOmOptions};

fn main() -> hetnet_secrecy::Result<()> {
    let cfg = NetworkConfig::macro_only(10, 2, db_to_linear(40.0), 1.0);
    let ch = sample_rayleigh_channels(&cfg, 7);
    let sol = solve_stb_om(&ch, &cfg, &StbOmOptions::default())?;

    for (k, r) in sol.diagnostics.objective_trace.iter().enumerate() {
        println!("iterate {k:>2}: {r:.8} bits");
    }
    println!("secrecy rate {:.6} bits", metrics::secrecy_rate(&ch, &sol)?);
    println!("SINR MU1 {:.3}  MU2 {:.6}  Eve {:.3e}", metrics::sinr_mu(&ch, &sol, 0)?, metrics::sinr_mu(&ch, &sol, 1)?, metrics::sinr_eve(&ch, &sol)?);
    println!("MBS power {:.3} of {:.3}", sol.mbs_power(), cfg.p_m);
    Ok(())
}
