//! SINRs and secrecy rate of a two-tier beamforming solution.
//!
//! Indices are zero-based: MU 0 is the wiretapped user, MUs `1..M` carry
//! QoS targets.

use crate::channel::ChannelSet;
use crate::conic::SolveStatus;
use crate::error::{Error, Result};
use crate::linalg::{gain, squared_norm, CVector};

/// Per-solve bookkeeping. Scheme-specific fields stay at their defaults
/// when not applicable.
#[derive(Clone, Debug, Default)]
pub struct Diagnostics {
    /// Outer iterations (successive approximations or outer-search
    /// evaluations).
    pub iterations: usize,
    pub objective_trace: Vec<f64>,
    pub solver_statuses: Vec<SolveStatus>,
    pub final_objective: f64,
    /// Largest `λ₂/λ₁` over the lifted blocks, when a relaxation was used.
    pub max_rank_ratio: Option<f64>,
    /// Blocks that needed Gaussian randomization.
    pub randomized_blocks: usize,
    /// Eavesdropper SINR level picked by an outer search.
    pub tau: Option<f64>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, Default)]
pub struct BeamformingSolution {
    /// MBS precoders, `[m]`.
    pub w_mu: Vec<CVector>,
    /// FBS precoders, `[n][k]`.
    pub w_fu: Vec<Vec<CVector>>,
    /// Artificial-noise vector at the MBS.
    pub an: Option<CVector>,
    /// Interference temperature the FBSs place on the eavesdropper.
    pub ift_sum: f64,
    pub diagnostics: Diagnostics,
}

impl BeamformingSolution {
    pub fn mbs_power(&self) -> f64 {
        self.w_mu.iter().map(squared_norm).sum()
    }

    /// `Σ_k ‖w_nk‖²` for FBS `n`.
    pub fn fbs_power(&self, n: usize) -> f64 {
        self.w_fu[n].iter().map(squared_norm).sum()
    }
}

fn check(ch: &ChannelSet, sol: &BeamformingSolution) -> Result<()> {
    if sol.w_mu.len() != ch.m_users() || sol.w_mu.iter().any(|w| w.len() != ch.n_m()) {
        return Err(Error::Dimension("MBS precoders do not match the channel set".into()));
    }
    if !sol.w_fu.is_empty() {
        if sol.w_fu.len() != ch.n_coop() {
            return Err(Error::Dimension("FBS precoder count mismatch".into()));
        }
        for row in &sol.w_fu {
            if row.len() != ch.k_users() || row.iter().any(|w| w.len() != ch.n_f()) {
                return Err(Error::Dimension("FBS precoder shape mismatch".into()));
            }
        }
    }
    if let Some(z) = &sol.an {
        if z.len() != ch.n_m() {
            return Err(Error::Dimension("AN vector length mismatch".into()));
        }
    }
    Ok(())
}

fn an_gain(h: &CVector, sol: &BeamformingSolution) -> f64 {
    sol.an.as_ref().map_or(0.0, |z| gain(h, z))
}

/// Interference the FBSs deposit on MU `m`.
fn fbs_leak_mu(ch: &ChannelSet, sol: &BeamformingSolution, m: usize) -> f64 {
    sol.w_fu
        .iter()
        .enumerate()
        .map(|(n, ws)| ws.iter().map(|w| gain(&ch.h_fbs_mu[n][m], w)).sum::<f64>())
        .sum()
}

/// Interference the FBSs deposit on the eavesdropper (`IFT_sum` realized).
pub fn fbs_leak_eve(ch: &ChannelSet, sol: &BeamformingSolution) -> f64 {
    sol.w_fu
        .iter()
        .enumerate()
        .map(|(n, ws)| ws.iter().map(|w| gain(&ch.h_fbs_e[n], w)).sum::<f64>())
        .sum()
}

pub fn sinr_mu(ch: &ChannelSet, sol: &BeamformingSolution, m: usize) -> Result<f64> {
    sinr_mu_with_noise(ch, sol, m, 1.0)
}

/// [`sinr_mu`] at an explicit noise power.
pub fn sinr_mu_with_noise(ch: &ChannelSet, sol: &BeamformingSolution, m: usize, sigma2: f64) -> Result<f64> {
    check(ch, sol)?;
    if m >= ch.m_users() {
        return Err(Error::InvalidArgument(format!("MU index {m} out of range")));
    }
    let h = &ch.h_mu[m];
    let signal = gain(h, &sol.w_mu[m]);
    let mu_interf: f64 = (0..ch.m_users()).filter(|&q| q != m).map(|q| gain(h, &sol.w_mu[q])).sum();
    let denom = mu_interf + fbs_leak_mu(ch, sol, m) + an_gain(h, sol) + sigma2;
    Ok(signal / denom)
}

/// Eavesdropper SINR on the stream of MU 0.
pub fn sinr_eve(ch: &ChannelSet, sol: &BeamformingSolution) -> Result<f64> {
    sinr_eve_with_noise(ch, sol, 1.0)
}

pub fn sinr_eve_with_noise(ch: &ChannelSet, sol: &BeamformingSolution, sigma2: f64) -> Result<f64> {
    check(ch, sol)?;
    let h = &ch.h_e;
    let signal = gain(h, &sol.w_mu[0]);
    let mu_interf: f64 = sol.w_mu.iter().skip(1).map(|w| gain(h, w)).sum();
    let denom = mu_interf + fbs_leak_eve(ch, sol) + an_gain(h, sol) + sigma2;
    Ok(signal / denom)
}

pub fn sinr_fu(ch: &ChannelSet, sol: &BeamformingSolution, n: usize, k: usize) -> Result<f64> {
    sinr_fu_with_noise(ch, sol, n, k, 1.0)
}

pub fn sinr_fu_with_noise(ch: &ChannelSet, sol: &BeamformingSolution, n: usize, k: usize, sigma2: f64) -> Result<f64> {
    check(ch, sol)?;
    if n >= ch.n_coop() || k >= ch.k_users() {
        return Err(Error::InvalidArgument(format!("FU index ({n}, {k}) out of range")));
    }
    if sol.w_fu.is_empty() {
        return Err(Error::InvalidArgument("solution has no FBS precoders".into()));
    }
    let own = &ch.h_fbs_fu[n][n][k];
    let signal = gain(own, &sol.w_fu[n][k]);
    let intra: f64 = (0..ch.k_users()).filter(|&t| t != k).map(|t| gain(own, &sol.w_fu[n][t])).sum();
    let inter: f64 = (0..ch.n_coop())
        .filter(|&p| p != n)
        .map(|p| sol.w_fu[p].iter().map(|w| gain(&ch.h_fbs_fu[p][n][k], w)).sum::<f64>())
        .sum();
    let h_m = &ch.h_mbs_fu[n][k];
    let macro_interf: f64 = sol.w_mu.iter().map(|w| gain(h_m, w)).sum();
    Ok(signal / (intra + inter + macro_interf + an_gain(h_m, sol) + sigma2))
}

/// `log2(1+SINR_1) − log2(1+SINR_E)`; may be negative.
pub fn secrecy_rate(ch: &ChannelSet, sol: &BeamformingSolution) -> Result<f64> {
    let s1 = sinr_mu(ch, sol, 0)?;
    let se = sinr_eve(ch, sol)?;
    Ok((1.0 + s1).log2() - (1.0 + se).log2())
}

pub fn secrecy_rate_clipped(ch: &ChannelSet, sol: &BeamformingSolution) -> Result<f64> {
    Ok(secrecy_rate(ch, sol)?.max(0.0))
}

/// Mean FU SINR over every (n, k); `None` when there are no FUs or no FBS
/// precoders.
pub fn mean_sinr_fu(ch: &ChannelSet, sol: &BeamformingSolution) -> Result<Option<f64>> {
    if ch.n_coop() == 0 || ch.k_users() == 0 || sol.w_fu.is_empty() {
        return Ok(None);
    }
    let mut acc = 0.0;
    for n in 0..ch.n_coop() {
        for k in 0..ch.k_users() {
            acc += sinr_fu(ch, sol, n, k)?;
        }
    }
    Ok(Some(acc / (ch.n_coop() * ch.k_users()) as f64))
}

/// Solution with MBS precoders only and zero FBS precoders.
pub fn macro_solution(ch: &ChannelSet, w_mu: Vec<CVector>) -> BeamformingSolution {
    let w_fu = (0..ch.n_coop())
        .map(|_| (0..ch.k_users()).map(|_| CVector::zeros(ch.n_f())).collect())
        .collect();
    BeamformingSolution { w_mu, w_fu, ..Default::default() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_rayleigh_channels, NetworkConfig};
    use crate::linalg::{complex_gaussian, null_space_basis, C64, CMatrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_solution(ch: &ChannelSet, seed: u64) -> BeamformingSolution {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w_mu = (0..ch.m_users()).map(|_| complex_gaussian(&mut rng, ch.n_m())).collect();
        let w_fu = (0..ch.n_coop())
            .map(|_| (0..ch.k_users()).map(|_| complex_gaussian(&mut rng, ch.n_f())).collect())
            .collect();
        BeamformingSolution { w_mu, w_fu, ..Default::default() }
    }

    #[test]
    fn single_user_no_fbs() {
        let cfg = NetworkConfig::macro_only(3, 1, 10.0, 0.0);
        let ch = sample_rayleigh_channels(&cfg, 1);
        let w = complex_gaussian(&mut ChaCha8Rng::seed_from_u64(2), 3);
        let sol = macro_solution(&ch, vec![w.clone()]);
        assert!((sinr_mu(&ch, &sol, 0).unwrap() - gain(&ch.h_mu[0], &w)).abs() < 1e-12);
    }

    #[test]
    fn zero_forcing_gives_unit_denominator() {
        let cfg = NetworkConfig::simulation_defaults();
        let ch = sample_rayleigh_channels(&cfg, 4);
        let mut sol = random_solution(&ch, 5);
        // w_1 ⟂ h_0, FBS precoders ⟂ h_{n,0}
        let g = CMatrix::from_fn(1, cfg.n_m, |_, j| ch.h_mu[0][j]);
        let v = null_space_basis(&g).unwrap();
        sol.w_mu[1] = v.column(0).into_owned() * C64::new(3.0, 0.0);
        for n in 0..cfg.n_coop {
            let g = CMatrix::from_fn(1, cfg.n_f, |_, j| ch.h_fbs_mu[n][0][j]);
            let v = null_space_basis(&g).unwrap();
            sol.w_fu[n][0] = v.column(1).into_owned();
        }
        let s = sinr_mu(&ch, &sol, 0).unwrap();
        assert!((s - gain(&ch.h_mu[0], &sol.w_mu[0])).abs() < 1e-10 * s);
    }

    #[test]
    fn orthogonal_to_eve_is_zero() {
        let cfg = NetworkConfig::simulation_defaults();
        let ch = sample_rayleigh_channels(&cfg, 9);
        let mut sol = random_solution(&ch, 1);
        let g = CMatrix::from_fn(1, cfg.n_m, |_, j| ch.h_e[j]);
        sol.w_mu[0] = null_space_basis(&g).unwrap().column(0).into_owned();
        assert!(sinr_eve(&ch, &sol).unwrap() < 1e-25);
    }

    #[test]
    fn identical_channels_give_zero_rate() {
        let cfg = NetworkConfig::macro_only(4, 1, 10.0, 0.0);
        let mut ch = sample_rayleigh_channels(&cfg, 2);
        ch.h_e = ch.h_mu[0].clone();
        let sol = random_solution(&ch, 3);
        assert!(secrecy_rate(&ch, &sol).unwrap().abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let cfg = NetworkConfig::simulation_defaults();
        let ch = sample_rayleigh_channels(&cfg, 9);
        let mut sol = random_solution(&ch, 1);
        sol.w_mu.pop();
        assert!(matches!(sinr_mu(&ch, &sol, 0), Err(Error::Dimension(_))));
    }
}
