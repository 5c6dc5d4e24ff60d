//! Rate-only baseline: maximize MU 0's SINR under every QoS and power
//! constraint, ignoring the eavesdropper, then score its secrecy rate.
//!
//! The lifted problem is the inner problem of [`crate::stb_jmf`] without the
//! eavesdropper cap, solved directly in the normalized variables `X = ζW`.
//! Beyond the FU targets the FBS covariances do not affect the objective,
//! which leaves them non-unique; a vanishing power penalty picks the
//! least-power FBS precoders among the optima.

use crate::channel::{ChannelSet, NetworkConfig};
use crate::error::Result;
use crate::metrics::BeamformingSolution;
use crate::stb_jmf::{check_link_budgets, lifted_model, recover_precoders, solve_model, JmfOptions};

/// Relative weight of the FBS power tie-break against the largest possible
/// objective `‖h₁‖² P_M`.
pub const FBS_TIE_BREAK: f64 = 1e-3;

pub fn solve_benchmark(ch: &ChannelSet, cfg: &NetworkConfig) -> Result<BeamformingSolution> {
    solve_benchmark_with(ch, cfg, &JmfOptions { rank_tol: 1e-4, ..JmfOptions::default() })
}

pub fn solve_benchmark_with(ch: &ChannelSet, cfg: &NetworkConfig, opts: &JmfOptions) -> Result<BeamformingSolution> {
    cfg.validate()?;
    ch.check(cfg)?;
    check_link_budgets(ch, cfg)?;
    let penalty = if cfg.n_coop > 0 {
        FBS_TIE_BREAK * ch.h_mu[0].norm_squared() * cfg.p_m / cfg.p_f.max(f64::MIN_POSITIVE)
    } else {
        0.0
    };
    let model = lifted_model(ch, cfg, None, penalty);
    let inner = solve_model(&model, opts.solver_tol)?;
    let mut sol = recover_precoders(ch, cfg, &inner, opts, false)?;
    let d = &mut sol.diagnostics;
    d.iterations = inner.stats.iterations as usize;
    d.final_objective = inner.objective / inner.zeta.max(f64::MIN_POSITIVE);
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::sample_rayleigh_channels;
    use crate::linalg::row_dot;
    use crate::metrics;
    use crate::stb_jmf::meets_qos;

    #[test]
    fn single_user_is_mrt() {
        let cfg = NetworkConfig::macro_only(4, 1, 100.0, 1.0);
        let ch = sample_rayleigh_channels(&cfg, 9);
        let sol = solve_benchmark(&ch, &cfg).unwrap();
        let h = &ch.h_mu[0];
        let w = &sol.w_mu[0];
        let mrt = h.norm_squared() * cfg.p_m;
        assert!((metrics::sinr_mu(&ch, &sol, 0).unwrap() - mrt).abs() <= 1e-8 * mrt);
        let align = row_dot(h, w).norm() / (h.norm() * w.norm());
        assert!((align - 1.0).abs() <= 1e-8);
    }

    #[test]
    fn defaults_meet_qos() {
        let cfg = NetworkConfig::simulation_defaults();
        let ch = sample_rayleigh_channels(&cfg, 4);
        let sol = solve_benchmark(&ch, &cfg).unwrap();
        assert!(meets_qos(&ch, &cfg, &sol, 1e-6));
        assert_eq!(sol.diagnostics.randomized_blocks, 0);
    }
}
