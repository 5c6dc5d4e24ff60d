//! Network configuration, Rayleigh channel sampling and femtocell placement.
//!
//! All randomness comes from ChaCha20 seeded with `seed`. Each entity class
//! draws from its own stream (`set_stream`), so adding FBSs never perturbs
//! the MU channels of the same seed:
//!
//! | stream | entity |
//! |---|---|
//! | 1 | MBS → MU |
//! | 2 | MBS → eavesdropper |
//! | 3 | FBS → MU |
//! | 4 | FBS → eavesdropper |
//! | 5 | MBS → FU |
//! | 6 | FBS → FU |
//! | 16 | FBS placement |
//! | 17 | user / eavesdropper positions |

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{complex_gaussian, CVector};

/// Converts a power in dB relative to the noise floor to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// MBS antennas.
    pub n_m: usize,
    /// Antennas per FBS.
    pub n_f: usize,
    /// Macrocell users; MU index 0 is the wiretapped one.
    pub m_users: usize,
    /// FUs per cooperative FBS.
    pub k_users: usize,
    /// Cooperative FBSs.
    pub n_coop: usize,
    pub p_m: f64,
    pub p_f: f64,
    pub sigma2: f64,
    /// Targets for MUs 1..M (length M−1).
    pub gamma_mu: Vec<f64>,
    /// Targets per FU, indexed `[n][k]`.
    pub gamma_fu: Vec<Vec<f64>>,
    pub cell_radius_m: f64,
    /// FBS intensity in points per m².
    pub fbs_intensity: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self::simulation_defaults()
    }
}

impl NetworkConfig {
    /// N_M=10, N_F=4, M=2, K=1, N=2, P_M=40 dB, P_F=40 dB, γ_FU=0.6, γ_MU=1.
    pub fn simulation_defaults() -> Self {
        let (m, n, k) = (2, 2, 1);
        Self {
            n_m: 10,
            n_f: 4,
            m_users: m,
            k_users: k,
            n_coop: n,
            p_m: db_to_linear(40.0),
            p_f: db_to_linear(40.0),
            sigma2: 1.0,
            gamma_mu: vec![1.0; m - 1],
            gamma_fu: vec![vec![0.6; k]; n],
            cell_radius_m: 500.0,
            fbs_intensity: 1e-5,
        }
    }

    /// A configuration with only the MBS tier.
    pub fn macro_only(n_m: usize, m_users: usize, p_m: f64, gamma: f64) -> Self {
        Self {
            n_m,
            n_f: 0,
            m_users,
            k_users: 0,
            n_coop: 0,
            p_m,
            p_f: 1.0,
            sigma2: 1.0,
            gamma_mu: vec![gamma; m_users.saturating_sub(1)],
            gamma_fu: vec![],
            cell_radius_m: 500.0,
            fbs_intensity: 0.0,
        }
    }

    pub fn with_gamma_fu(mut self, gamma: f64) -> Self {
        self.gamma_fu = vec![vec![gamma; self.k_users]; self.n_coop];
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.m_users == 0 {
            return bad("at least one MU is required".into());
        }
        if self.n_m <= self.m_users {
            return bad(format!("n_m ({}) must exceed m_users ({})", self.n_m, self.m_users));
        }
        if self.n_coop > 0 && self.n_f <= self.k_users {
            return bad(format!("n_f ({}) must exceed k_users ({})", self.n_f, self.k_users));
        }
        if self.n_coop > 0 && self.k_users == 0 {
            return bad("cooperative FBSs need at least one FU".into());
        }
        if !(self.p_m > 0.0 && self.p_m.is_finite() && self.p_f > 0.0 && self.p_f.is_finite()) {
            return bad("powers must be finite and strictly positive".into());
        }
        if self.sigma2 != 1.0 {
            return bad(format!("noise power is normalized to 1, got {}", self.sigma2));
        }
        if self.gamma_mu.len() != self.m_users - 1 {
            return bad(format!(
                "gamma_mu has {} entries, expected {}",
                self.gamma_mu.len(),
                self.m_users - 1
            ));
        }
        if self.gamma_fu.len() != self.n_coop || self.gamma_fu.iter().any(|g| g.len() != self.k_users) {
            return bad(format!("gamma_fu must be {}x{}", self.n_coop, self.k_users));
        }
        let targets = self.gamma_mu.iter().chain(self.gamma_fu.iter().flatten());
        if targets.clone().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return bad("SINR targets must be finite and nonnegative".into());
        }
        if !(self.cell_radius_m > 0.0) || !(self.fbs_intensity >= 0.0) {
            return bad("cell radius must be positive and intensity nonnegative".into());
        }
        Ok(())
    }

    /// Extra requirement for the null-space femtocell scheme.
    pub fn validate_null_space(&self) -> Result<()> {
        self.validate()?;
        if !(self.n_m > self.n_f && self.n_f > self.m_users) {
            return Err(Error::Config(format!(
                "null-space femtocell beamforming needs n_m > n_f > m_users ({} > {} > {})",
                self.n_m, self.n_f, self.m_users
            )));
        }
        Ok(())
    }
}

/// One channel realization. Every vector is the row channel `h`, so the
/// received amplitude of precoder `w` is `Σ_j h_j w_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSet {
    /// MBS → MU_m, `[m]`, length n_m.
    pub h_mu: Vec<CVector>,
    /// MBS → eavesdropper.
    pub h_e: CVector,
    /// FBS_n → MU_m, `[n][m]`, length n_f.
    pub h_fbs_mu: Vec<Vec<CVector>>,
    /// FBS_n → eavesdropper, `[n]`.
    pub h_fbs_e: Vec<CVector>,
    /// MBS → FU_nk, `[n][k]`, length n_m.
    pub h_mbs_fu: Vec<Vec<CVector>>,
    /// FBS_p → FU_nk, `[p][n][k]`, length n_f.
    pub h_fbs_fu: Vec<Vec<Vec<CVector>>>,
}

impl ChannelSet {
    pub fn n_m(&self) -> usize {
        self.h_e.len()
    }

    pub fn m_users(&self) -> usize {
        self.h_mu.len()
    }

    pub fn n_coop(&self) -> usize {
        self.h_fbs_e.len()
    }

    pub fn k_users(&self) -> usize {
        self.h_mbs_fu.first().map_or(0, |v| v.len())
    }

    pub fn n_f(&self) -> usize {
        self.h_fbs_e.first().map_or(0, |v| v.len())
    }

    /// Checks shapes against a configuration.
    pub fn check(&self, cfg: &NetworkConfig) -> Result<()> {
        let dims = |v: &CVector, n: usize, what: &str| -> Result<()> {
            if v.len() != n {
                return Err(Error::Dimension(format!("{what}: length {} != {n}", v.len())));
            }
            if v.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                return Err(Error::InvalidArgument(format!("{what}: non-finite entry")));
            }
            Ok(())
        };
        let (m, n, k) = (cfg.m_users, cfg.n_coop, cfg.k_users);
        if self.h_mu.len() != m || self.h_fbs_mu.len() != n || self.h_fbs_e.len() != n {
            return Err(Error::Dimension("user or FBS count mismatch".into()));
        }
        if self.h_mbs_fu.len() != n || self.h_fbs_fu.len() != n {
            return Err(Error::Dimension("FU channel count mismatch".into()));
        }
        for h in &self.h_mu {
            dims(h, cfg.n_m, "h_mu")?;
        }
        dims(&self.h_e, cfg.n_m, "h_e")?;
        for i in 0..n {
            dims(&self.h_fbs_e[i], cfg.n_f, "h_fbs_e")?;
            if self.h_fbs_mu[i].len() != m || self.h_mbs_fu[i].len() != k || self.h_fbs_fu[i].len() != n {
                return Err(Error::Dimension("per-FBS channel count mismatch".into()));
            }
            for h in &self.h_fbs_mu[i] {
                dims(h, cfg.n_f, "h_fbs_mu")?;
            }
            for h in &self.h_mbs_fu[i] {
                dims(h, cfg.n_m, "h_mbs_fu")?;
            }
            for row in &self.h_fbs_fu[i] {
                if row.len() != k {
                    return Err(Error::Dimension("h_fbs_fu count mismatch".into()));
                }
                for h in row {
                    dims(h, cfg.n_f, "h_fbs_fu")?;
                }
            }
        }
        Ok(())
    }
}

fn stream(seed: u64, id: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Draws every channel of one realization i.i.d. CN(0, 1).
pub fn sample_rayleigh_channels(cfg: &NetworkConfig, seed: u64) -> ChannelSet {
    let (m, n, k) = (cfg.m_users, cfg.n_coop, cfg.k_users);
    let mut r = stream(seed, 1);
    let h_mu = (0..m).map(|_| complex_gaussian(&mut r, cfg.n_m)).collect();
    let h_e = complex_gaussian(&mut stream(seed, 2), cfg.n_m);
    let mut r = stream(seed, 3);
    let h_fbs_mu = (0..n)
        .map(|_| (0..m).map(|_| complex_gaussian(&mut r, cfg.n_f)).collect())
        .collect();
    let mut r = stream(seed, 4);
    let h_fbs_e = (0..n).map(|_| complex_gaussian(&mut r, cfg.n_f)).collect();
    let mut r = stream(seed, 5);
    let h_mbs_fu = (0..n)
        .map(|_| (0..k).map(|_| complex_gaussian(&mut r, cfg.n_m)).collect())
        .collect();
    let mut r = stream(seed, 6);
    let h_fbs_fu = (0..n)
        .map(|_| {
            (0..n)
                .map(|_| (0..k).map(|_| complex_gaussian(&mut r, cfg.n_f)).collect())
                .collect()
        })
        .collect();
    ChannelSet { h_mu, h_e, h_fbs_mu, h_fbs_e, h_mbs_fu, h_fbs_fu }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Placement {
    pub fbs_positions: Vec<[f64; 2]>,
}

fn uniform_disk<R: Rng>(rng: &mut R, radius: f64) -> [f64; 2] {
    let r = radius * rng.gen::<f64>().sqrt();
    let theta = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
    [r * theta.cos(), r * theta.sin()]
}

/// Homogeneous PPP restricted to the macrocell disk.
pub fn sample_fbs_placement(cfg: &NetworkConfig, seed: u64) -> Placement {
    let mut rng = stream(seed, 16);
    let mean = cfg.fbs_intensity * std::f64::consts::PI * cfg.cell_radius_m.powi(2);
    let count = if mean > 0.0 {
        Poisson::new(mean).expect("positive mean").sample(&mut rng) as usize
    } else {
        0
    };
    let fbs_positions = (0..count).map(|_| uniform_disk(&mut rng, cfg.cell_radius_m)).collect();
    Placement { fbs_positions }
}

/// Uniform position of the eavesdropper inside the macrocell.
pub fn sample_eavesdropper_position(cfg: &NetworkConfig, seed: u64) -> [f64; 2] {
    uniform_disk(&mut stream(seed, 17), cfg.cell_radius_m)
}

/// Indices of the `n` FBSs closest to `point`, nearest first. Returns
/// `None` when fewer than `n` FBSs exist.
pub fn nearest_fbs(placement: &Placement, point: [f64; 2], n: usize) -> Option<Vec<usize>> {
    if placement.fbs_positions.len() < n {
        return None;
    }
    let dist = |p: &[f64; 2]| (p[0] - point[0]).hypot(p[1] - point[1]);
    let mut idx: Vec<usize> = (0..placement.fbs_positions.len()).collect();
    idx.sort_by(|&a, &b| dist(&placement.fbs_positions[a]).total_cmp(&dist(&placement.fbs_positions[b])));
    idx.truncate(n);
    Some(idx)
}

/// Derives the seed of work unit `index` from a base seed (SplitMix64).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
