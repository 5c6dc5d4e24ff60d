//! Femtocell-assisted secrecy with MBS-only QoS.
//!
//! Each cooperative FBS transmits inside the null space of its channels to
//! every MU and points as much power as it can at the eavesdropper,
//! ignoring its own FUs. Only the resulting interference temperature
//! `IFT_n = Σ_k |h_{n,E} w_nk|²` travels to the MBS, which then runs
//! [`solve_stb_om`] against the raised eavesdropper noise floor.
//!
//! With `K > 1` streams the local objective `Σ_k |h_{n,E} V x_k|²` is convex
//! and is maximized, so it has no direct SOCP form. Since `h_{n,E}` is a
//! single row, the best point puts the whole budget on one stream, and the
//! local problem is solved as `K` single-stream SOCPs
//! `max Re(h_{n,E} V x_k)` with `Im(h_{n,E} V x_k) = 0`, keeping the best.

use crate::channel::{ChannelSet, NetworkConfig};
use crate::conic::{self, ConicProblem, LinExpr, Sense, SolveStatus};
use crate::error::{Error, Result};
use crate::linalg::{gain, generalized_eigen_max, CMatrix, CVector, C64};
use crate::metrics::BeamformingSolution;
use crate::stb_om::{solve_stb_om, StbOmOptions};

pub use crate::linalg::null_space_basis;

/// Local view of one cooperative FBS.
#[derive(Clone, Debug)]
pub struct FbsLocalProblem {
    /// Channels to every MU, stacked `M×n_f`.
    pub g_n: CMatrix,
    pub h_ne: CVector,
    /// Channels to the FBS's own FUs.
    pub h_n_fu: Vec<CVector>,
    pub p_f: f64,
}

impl FbsLocalProblem {
    pub fn from_channels(ch: &ChannelSet, n: usize, p_f: f64) -> Self {
        let rows = &ch.h_fbs_mu[n];
        let n_f = ch.n_f();
        Self {
            g_n: CMatrix::from_fn(rows.len(), n_f, |i, j| rows[i][j]),
            h_ne: ch.h_fbs_e[n].clone(),
            h_n_fu: ch.h_fbs_fu[n][n].clone(),
            p_f,
        }
    }

    fn validate(&self) -> Result<()> {
        let (m, n_f) = self.g_n.shape();
        if self.h_ne.len() != n_f || self.h_n_fu.iter().any(|h| h.len() != n_f) {
            return Err(Error::Dimension("FBS channels disagree on n_f".into()));
        }
        if m >= n_f {
            return Err(Error::InvalidArgument(format!("need n_f > M (n_f={n_f}, M={m})")));
        }
        if self.h_n_fu.is_empty() {
            return Err(Error::InvalidArgument("FBS serves no FU".into()));
        }
        if n_f - m < self.h_n_fu.len() {
            return Err(Error::InvalidArgument(format!(
                "null space of dimension {} cannot carry {} zero-forced streams",
                n_f - m,
                self.h_n_fu.len()
            )));
        }
        if !(self.p_f >= 0.0) {
            return Err(Error::InvalidArgument("p_f must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Local precoders and the interference they place on the eavesdropper.
#[derive(Clone, Debug)]
pub struct FbsSolution {
    pub precoders: Vec<CVector>,
    pub objective: f64,
}

/// Best stream-`k` precoder `V x` with the other FUs zero-forced.
fn single_stream(prob: &FbsLocalProblem, v: &CMatrix, k: usize, tol: f64) -> Result<(f64, CVector)> {
    let d = v.ncols();
    let mut p = ConicProblem::new(Sense::Maximize);
    let x = p.complex_vector("x", d);
    let alpha = p.scalar("alpha");
    p.set_objective(Sense::Maximize, alpha.expr());
    let eff = |h: &CVector| (h.transpose() * v).transpose();
    let (re, im) = x.row_product(&eff(&prob.h_ne));
    p.add_le("alpha", alpha.expr() - re);
    p.add_eq("phase", im);
    for (t, h) in prob.h_n_fu.iter().enumerate() {
        if t != k {
            let (re, im) = x.row_product(&eff(h));
            p.add_eq(&format!("zf{t}_re"), re);
            p.add_eq(&format!("zf{t}_im"), im);
        }
    }
    let rows: Vec<LinExpr> = (0..v.nrows())
        .flat_map(|i| {
            let (re, im) = x.row_product(&v.row(i).transpose());
            [re, im]
        })
        .collect();
    p.add_soc("power", rows, LinExpr::constant(prob.p_f.sqrt()));
    let r = conic::solve(&p, tol)?;
    if r.status != SolveStatus::Optimal {
        return Err(Error::NumericalFailure(format!("FBS SOCP ended with {:?}", r.status)));
    }
    let a = r.scalar(alpha).max(0.0);
    Ok((a * a, v * r.vector(x)))
}

/// Maximizes `Σ_k |h_{n,E} w_nk|²` over null-space precoders with
/// intra-cell zero forcing and `Σ_k ‖w_nk‖² ≤ p_f`.
pub fn solve_fbs_socp(prob: &FbsLocalProblem) -> Result<FbsSolution> {
    prob.validate()?;
    let v = null_space_basis(&prob.g_n)?;
    let n_f = prob.g_n.ncols();
    let k_users = prob.h_n_fu.len();
    let mut best: Option<(f64, usize, CVector)> = None;
    for k in 0..k_users {
        let (obj, w) = single_stream(prob, &v, k, conic::DEFAULT_TOL)?;
        if best.as_ref().map_or(true, |b| obj > b.0) {
            best = Some((obj, k, w));
        }
    }
    let (_, k_best, w) = best.expect("at least one FU");
    let mut precoders = vec![CVector::zeros(n_f); k_users];
    precoders[k_best] = w;
    let objective = precoders.iter().map(|w| gain(&prob.h_ne, w)).sum();
    Ok(FbsSolution { precoders, objective })
}

/// Single-FU optimum `w = V φ_max √p_f` from the generalized eigenpair of
/// `(Vᴴ h_Eᴴ h_E V, VᴴV)`.
pub fn solve_fbs_closed_form(prob: &FbsLocalProblem) -> Result<FbsSolution> {
    if prob.h_n_fu.len() != 1 {
        return Err(Error::InvalidArgument(format!(
            "closed form needs exactly one FU, got {}",
            prob.h_n_fu.len()
        )));
    }
    prob.validate()?;
    let v = null_space_basis(&prob.g_n)?;
    let hv = (prob.h_ne.transpose() * &v).transpose();
    let r1 = hv.conjugate() * hv.transpose();
    let r2 = v.adjoint() * &v;
    let (lambda, phi) = generalized_eigen_max(&r1, &r2)?;
    let w = &v * phi * C64::new(prob.p_f.sqrt(), 0.0);
    Ok(FbsSolution { precoders: vec![w], objective: prob.p_f * lambda })
}

/// `Σ_k |h_{n,E} w_nk|²`.
pub fn compute_ift(ch: &ChannelSet, n: usize, precoders: &[CVector]) -> f64 {
    precoders.iter().map(|w| gain(&ch.h_fbs_e[n], w)).sum()
}

/// FBS precoders by closed form (one FU) or SOCP, then STB-OM at the MBS
/// with the aggregated interference temperature.
pub fn solve_stb_smf(ch: &ChannelSet, cfg: &NetworkConfig, opts: &StbOmOptions) -> Result<BeamformingSolution> {
    if !(cfg.n_m > cfg.n_f && cfg.n_f > cfg.m_users) {
        return Err(Error::Config(format!(
            "need n_m > n_f > M (n_m={}, n_f={}, M={})",
            cfg.n_m, cfg.n_f, cfg.m_users
        )));
    }
    if ch.n_coop() != cfg.n_coop {
        return Err(Error::Dimension("channel set does not match n_coop".into()));
    }
    let mut w_fu = Vec::with_capacity(ch.n_coop());
    let mut ift_sum = 0.0;
    for n in 0..ch.n_coop() {
        let prob = FbsLocalProblem::from_channels(ch, n, cfg.p_f);
        let local = if prob.h_n_fu.len() == 1 { solve_fbs_closed_form(&prob)? } else { solve_fbs_socp(&prob)? };
        ift_sum += compute_ift(ch, n, &local.precoders);
        w_fu.push(local.precoders);
    }
    let mbs = StbOmOptions { ift_sum: opts.ift_sum + ift_sum, ..opts.clone() };
    let mut sol = solve_stb_om(ch, cfg, &mbs)?;
    sol.w_fu = w_fu;
    sol.ift_sum = ift_sum;
    sol.diagnostics.notes.push(format!("IFT_sum = {ift_sum:.6e}"));
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::sample_rayleigh_channels;
    use crate::linalg::complex_gaussian;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_problem(seed: u64, m: usize, n_f: usize, k: usize) -> FbsLocalProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = complex_gaussian(&mut rng, m * n_f);
        FbsLocalProblem {
            g_n: CMatrix::from_fn(m, n_f, |i, j| g[i * n_f + j]),
            h_ne: complex_gaussian(&mut rng, n_f),
            h_n_fu: (0..k).map(|_| complex_gaussian(&mut rng, n_f)).collect(),
            p_f: 10.0,
        }
    }

    #[test]
    fn closed_form_matches_socp() {
        for seed in 0..10 {
            let p = random_problem(seed, 2, 4, 1);
            let a = solve_fbs_closed_form(&p).unwrap();
            let b = solve_fbs_socp(&p).unwrap();
            assert!((a.objective - b.objective).abs() <= 1e-6 * a.objective, "{} {}", a.objective, b.objective);
            assert!((a.precoders[0].norm_squared() - p.p_f).abs() <= 1e-10 * p.p_f);
        }
    }

    #[test]
    fn multi_stream_zero_forces() {
        let p = random_problem(7, 1, 4, 2);
        let s = solve_fbs_socp(&p).unwrap();
        let v = null_space_basis(&p.g_n).unwrap();
        for (k, w) in s.precoders.iter().enumerate() {
            assert!((&p.g_n * w).norm() <= 1e-7 * p.p_f.sqrt());
            for (t, h) in p.h_n_fu.iter().enumerate() {
                if t != k {
                    assert!(crate::linalg::row_dot(h, w).norm() <= 1e-7 * p.p_f.sqrt());
                }
            }
        }
        // Exact optimum: the best zero-forced projection at full power.
        let a = (p.h_ne.transpose() * &v).transpose().conjugate();
        let best = (0..2)
            .map(|k| {
                let other = (p.h_n_fu[1 - k].transpose() * &v).transpose();
                let b = other.conjugate().normalize();
                let proj = &a - &b * b.dotc(&a);
                proj.norm_squared()
            })
            .fold(0.0, f64::max);
        assert!((s.objective - p.p_f * best).abs() <= 1e-6 * s.objective);
    }

    #[test]
    fn too_many_streams_is_an_error() {
        let p = random_problem(1, 2, 3, 2);
        assert!(solve_fbs_socp(&p).is_err());
        let p = random_problem(1, 2, 4, 2);
        assert!(solve_fbs_closed_form(&p).is_err());
    }

    #[test]
    fn smf_keeps_mus_clean() {
        let cfg = NetworkConfig::simulation_defaults();
        let ch = sample_rayleigh_channels(&cfg, 3);
        let sol = solve_stb_smf(&ch, &cfg, &StbOmOptions::default()).unwrap();
        for n in 0..cfg.n_coop {
            for m in 0..cfg.m_users {
                let leak: f64 = sol.w_fu[n].iter().map(|w| gain(&ch.h_fbs_mu[n][m], w)).sum();
                assert!(leak <= 1e-10 * cfg.p_f.max(1.0));
            }
        }
        let total: f64 = (0..cfg.n_coop).map(|n| compute_ift(&ch, n, &sol.w_fu[n])).sum();
        assert!((total - sol.ift_sum).abs() <= 1e-12 * total);
    }
}
