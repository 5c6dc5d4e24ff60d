//! STB-OM with artificial noise: no AN, random AN in the MU null space,
//! and the joint precoder/AN design, averaged over a few realizations.

use hetnet_secrecy::channel::{db_to_linear, sample_rayleigh_channels, NetworkConfig};
use hetnet_secrecy::metrics;
use hetnet_secrecy::stb_om::{solve_random_an, solve_stb_om, solve_stb_om_with_an, StbOmOptions};

fn main() -> hetnet_secrecy::Result<()> {
    let trials = 10;
    for p_db in [30.0, 40.0] {
        let cfg = NetworkConfig::macro_only(10, 2, db_to_linear(p_db), 1.0);
        let mut sums = [0.0; 3];
        for seed in 0..trials {
            let ch = sample_rayleigh_channels(&cfg, seed);
            let opts = StbOmOptions { an_seed: seed, ..Default::default() };
            sums[0] += metrics::secrecy_rate(&ch, &solve_stb_om(&ch, &cfg, &opts)?)?;
            sums[1] += metrics::secrecy_rate(&ch, &solve_random_an(&ch, &cfg, &opts)?)?;
            let joint = solve_stb_om_with_an(&ch, &cfg, &opts)?;
            sums[2] += metrics::secrecy_rate(&ch, &joint)?;
        }
        let [none, random, joint] = sums.map(|s| s / trials as f64);
        println!("P_M = {p_db} dB: no AN {none:.4}, random AN {random:.4}, joint AN {joint:.4} bits");
    }
    Ok(())
}
