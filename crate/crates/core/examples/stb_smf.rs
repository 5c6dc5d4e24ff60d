//! Femtocell-assisted secrecy with MBS-only QoS. Each FBS jams the
//! eavesdropper from the null space of its MU channels; the MBS then
//! designs against the raised noise floor.

use hetnet_secrecy::channel::{sample_rayleigh_channels, NetworkConfig};
use hetnet_secrecy::metrics;
use hetnet_secrecy::stb_om::{solve_stb_om, StbOmOptions};
use hetnet_secrecy::stb_smf::{solve_fbs_closed_form, solve_fbs_socp, solve_stb_smf, FbsLocalProblem};

fn main() -> hetnet_secrecy::Result<()> {
    let cfg = NetworkConfig::simulation_defaults();
    let ch = sample_rayleigh_channels(&cfg, 11);

    for n in 0..cfg.n_coop {
        let local = FbsLocalProblem::from_channels(&ch, n, cfg.p_f);
        let cf = solve_fbs_closed_form(&local)?;
        let socp = solve_fbs_socp(&local)?;
        println!("FBS {n}: IFT closed form {:.6e}, SOCP {:.6e}", cf.objective, socp.objective);
    }

    let om = solve_stb_om(&ch, &cfg, &StbOmOptions::default())?;
    let smf = solve_stb_smf(&ch, &cfg, &StbOmOptions::default())?;
    println!("aggregate IFT {:.6e}", smf.ift_sum);
    println!("STB-OM  {:.6} bits", metrics::secrecy_rate(&ch, &om)?);
    println!("STB-SMF {:.6} bits", metrics::secrecy_rate(&ch, &smf)?);
    println!("mean FU SINR {:.4} (not protected)", metrics::mean_sinr_fu(&ch, &smf)?.unwrap_or(f64::NAN));
    Ok(())
}
