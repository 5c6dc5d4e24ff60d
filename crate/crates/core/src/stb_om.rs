//! Secrecy beamforming at the MBS alone by successive convex approximation.
//!
//! The secrecy rate `log2((1+SINR₁)/(1+SINR_E))` is written with slacks
//! `t₁ ≤ 1+SINR₁`, `t₂ ≤ 1/(1+SINR_E)` and `t₀² ≤ t₁t₂`. The two
//! nonconvex SINR constraints become convex once their quadratic-over-linear
//! side is replaced by its first-order expansion [`taylor_q`] around the
//! current point, so each step is one SOCP. Every expansion is a global
//! minorant, hence every step stays feasible for the original problem and
//! the objective never decreases.
//!
//! The eavesdropper's noise floor is `σ² + ift_sum`, which lets the same
//! machinery run after the femtocells have fixed their interference.
//!
//! With artificial noise a vector `z` is transmitted alongside the data;
//! it adds `|h z|²` to the interference seen by every receiver and shares
//! the MBS power budget `Σ‖w_m‖² + ‖z‖² ≤ P_M`.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::channel::{ChannelSet, NetworkConfig};
use crate::conic::{self, ConicProblem, ConstraintId, LinExpr, Sense, SolveStatus, SolverSettings, Var};
use crate::error::{Error, Result};
use crate::linalg::{
    complex_gaussian, gain, null_space_basis, quad_form, squared_norm, CMatrix, CVector, C64,
};
use crate::metrics::{macro_solution, BeamformingSolution, Diagnostics};

/// Expansion point of the surrogate problem.
#[derive(Clone, Debug, PartialEq)]
pub struct TaylorPoint {
    pub w_tilde: Vec<CVector>,
    /// Must exceed 1.
    pub t1_tilde: f64,
    /// In `(0, 1]`.
    pub t2_tilde: f64,
    /// AN vector of the point; `None` without AN.
    pub z_tilde: Option<CVector>,
}

#[derive(Clone, Debug)]
pub struct StbOmOptions {
    pub max_iters: usize,
    /// Stop once `t₀` changes by less than this, relatively.
    pub rel_tol: f64,
    /// Interference temperature at the eavesdropper from other transmitters.
    pub ift_sum: f64,
    pub use_an: bool,
    /// Share of `P_M` spent on the random AN baseline and the AN warm start.
    pub an_fraction: f64,
    /// Seed of the random AN direction.
    pub an_seed: u64,
    pub solver_tol: f64,
}

impl Default for StbOmOptions {
    fn default() -> Self {
        Self {
            max_iters: 30,
            rel_tol: 1e-4,
            ift_sum: 0.0,
            use_an: false,
            an_fraction: 0.1,
            an_seed: 0,
            solver_tol: conic::DEFAULT_TOL,
        }
    }
}

impl StbOmOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidArgument("rel_tol must be positive".into()));
        }
        if !(self.ift_sum >= 0.0) || !self.ift_sum.is_finite() {
            return Err(Error::InvalidArgument("ift_sum must be a nonnegative number".into()));
        }
        if !(0.0..1.0).contains(&self.an_fraction) {
            return Err(Error::InvalidArgument("an_fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// `wᴴAw / (x − a)`.
pub fn quad_over_lin(a_mat: &CMatrix, a: f64, w: &CVector, x: f64) -> Result<f64> {
    if !(x > a) {
        return Err(Error::InvalidArgument(format!("quad_over_lin needs x > a (x={x}, a={a})")));
    }
    Ok(quad_form(a_mat, w) / (x - a))
}

/// First-order expansion of [`quad_over_lin`] as the affine functional
/// `Re(gradᴴ w) + x_coef·x + constant`.
#[derive(Clone, Debug, PartialEq)]
pub struct TaylorForm {
    pub grad: CVector,
    pub x_coef: f64,
    pub constant: f64,
}

impl TaylorForm {
    pub fn eval(&self, w: &CVector, x: f64) -> f64 {
        self.grad.dotc(w).re + self.x_coef * x + self.constant
    }

    /// The functional over a vector variable and a scalar expression.
    pub fn expr(&self, w: Var, x: LinExpr) -> LinExpr {
        let (re, _) = w.row_product(&self.grad.map(|c| c.conj()));
        re + x * self.x_coef + self.constant
    }
}

/// `2Re(w̃ᴴAw)/(x̃−a) − w̃ᴴAw̃·(x−a)/(x̃−a)²`.
pub fn taylor_q(a_mat: &CMatrix, a: f64, w_tilde: &CVector, x_tilde: f64) -> Result<TaylorForm> {
    if !(x_tilde > a) {
        return Err(Error::InvalidArgument(format!(
            "expansion point needs x̃ > a (x̃={x_tilde}, a={a})"
        )));
    }
    let d = x_tilde - a;
    let q = quad_form(a_mat, w_tilde);
    let grad = (a_mat * w_tilde) * C64::new(2.0 / d, 0.0);
    Ok(TaylorForm { grad, x_coef: -q / (d * d), constant: a * q / (d * d) })
}

/// Surrogate SOCP at one expansion point.
#[derive(Clone, Debug)]
pub struct OmSocp {
    pub problem: ConicProblem,
    pub w: Vec<Var>,
    pub z: Option<Var>,
    pub t0: Var,
    pub t1: Var,
    pub t2: Var,
    pub power: ConstraintId,
}

fn amp(v: Var, h: &CVector) -> [LinExpr; 2] {
    let (re, im) = v.row_product(h);
    [re, im]
}

fn check_inputs(ch: &ChannelSet, cfg: &NetworkConfig) -> Result<()> {
    if ch.m_users() == 0 || ch.m_users() != cfg.m_users || ch.n_m() != cfg.n_m {
        return Err(Error::Dimension("channel set does not match the configuration".into()));
    }
    if cfg.gamma_mu.len() + 1 != cfg.m_users {
        return Err(Error::Config(format!(
            "gamma_mu needs {} entries, got {}",
            cfg.m_users - 1,
            cfg.gamma_mu.len()
        )));
    }
    if !(cfg.p_m > 0.0) {
        return Err(Error::Config("p_m must be positive".into()));
    }
    Ok(())
}

pub fn build_socp(ch: &ChannelSet, point: &TaylorPoint, cfg: &NetworkConfig, opts: &StbOmOptions) -> Result<OmSocp> {
    check_inputs(ch, cfg)?;
    let m_users = ch.m_users();
    let n = ch.n_m();
    if point.w_tilde.len() != m_users || point.w_tilde.iter().any(|w| w.len() != n) {
        return Err(Error::Dimension("expansion point does not match the channel set".into()));
    }
    if opts.use_an != point.z_tilde.is_some() {
        return Err(Error::InvalidArgument("AN flag and expansion point disagree".into()));
    }
    if !(point.t2_tilde > 0.0) {
        return Err(Error::InvalidArgument("t2_tilde must be positive".into()));
    }
    let nu = cfg.sigma2 + opts.ift_sum;

    let mut p = ConicProblem::new(Sense::Maximize);
    let w: Vec<Var> = (0..m_users).map(|m| p.complex_vector(&format!("w{m}"), n)).collect();
    let z = opts.use_an.then(|| p.complex_vector("z", n));
    let t0 = p.scalar("t0");
    let t1 = p.scalar("t1");
    let t2 = p.scalar("t2");
    p.set_objective(Sense::Maximize, t0.expr());

    let h1 = &ch.h_mu[0];
    let he = &ch.h_e;
    let g1_form = taylor_q(&crate::linalg::gram(h1), 1.0, &point.w_tilde[0], point.t1_tilde)?;
    let g1 = g1_form.expr(w[0], t1.expr()) - cfg.sigma2;
    let mut rows: Vec<LinExpr> = w[1..].iter().flat_map(|&v| amp(v, h1)).collect();
    if let Some(z) = z {
        rows.extend(amp(z, h1));
    }
    p.add_rotated_soc("b_mu1", rows, g1, LinExpr::constant(1.0));

    let ge = crate::linalg::gram(he);
    let (s2, s2t) = (t2.expr(), point.t2_tilde);
    let mut g2 = (LinExpr::constant(2.0 / s2t) - s2.clone() * (1.0 / (s2t * s2t))) * nu - nu;
    for (m, &v) in w.iter().enumerate().skip(1) {
        g2 += taylor_q(&ge, 0.0, &point.w_tilde[m], s2t)?.expr(v, s2.clone());
    }
    let mut rows: Vec<LinExpr> = w.iter().flat_map(|&v| amp(v, he)).collect();
    if let (Some(z), Some(zt)) = (z, &point.z_tilde) {
        g2 += taylor_q(&ge, 0.0, zt, s2t)?.expr(z, s2.clone());
        rows.extend(amp(z, he));
    }
    p.add_rotated_soc("c_eve", rows, g2, LinExpr::constant(1.0));

    for m in 1..m_users {
        let hm = &ch.h_mu[m];
        let sg = cfg.gamma_mu[m - 1].sqrt();
        let mut rows: Vec<LinExpr> = Vec::new();
        for (q, &v) in w.iter().enumerate() {
            if q != m {
                rows.extend(amp(v, hm).map(|e| e * sg));
            }
        }
        if let Some(z) = z {
            rows.extend(amp(z, hm).map(|e| e * sg));
        }
        rows.push(LinExpr::constant(sg * cfg.sigma2.sqrt()));
        let [re, _] = amp(w[m], hm);
        p.add_soc(&format!("d_qos{m}"), rows, re);
    }
    for m in 1..m_users {
        let [_, im] = amp(w[m], &ch.h_mu[m]);
        p.add_eq(&format!("e_phase{m}"), im);
    }

    let mut coords: Vec<LinExpr> = w.iter().flat_map(|v| v.coords()).collect();
    if let Some(z) = z {
        coords.extend(z.coords());
    }
    let power = p.add_soc("f_power", coords, LinExpr::constant(cfg.p_m.sqrt()));
    p.add_rotated_soc("g_hyper", vec![t0.expr()], t1.expr(), t2.expr());
    Ok(OmSocp { problem: p, w, z, t0, t1, t2, power })
}

/// `(SINR₁, SINR_E)` with the eavesdropper noise floor `nu`.
fn point_sinrs(ch: &ChannelSet, w: &[CVector], z: Option<&CVector>, sigma2: f64, nu: f64) -> (f64, f64) {
    let an = |h: &CVector| z.map_or(0.0, |z| gain(h, z));
    let h1 = &ch.h_mu[0];
    let i1: f64 = w[1..].iter().map(|v| gain(h1, v)).sum::<f64>() + an(h1) + sigma2;
    let ie: f64 = w[1..].iter().map(|v| gain(&ch.h_e, v)).sum::<f64>() + an(&ch.h_e) + nu;
    (gain(h1, &w[0]) / i1, gain(&ch.h_e, &w[0]) / ie)
}

/// The tightest expansion point through given precoders.
fn tight_point(ch: &ChannelSet, cfg: &NetworkConfig, opts: &StbOmOptions, w: Vec<CVector>, z: Option<CVector>) -> Result<TaylorPoint> {
    let (s1, se) = point_sinrs(ch, &w, z.as_ref(), cfg.sigma2, cfg.sigma2 + opts.ift_sum);
    if !(s1 > 1e-12) {
        return Err(Error::DegenerateChannel("MU 1 receives no signal at the expansion point".into()));
    }
    Ok(TaylorPoint { w_tilde: w, t1_tilde: 1.0 + s1, t2_tilde: 1.0 / (1.0 + se), z_tilde: z })
}

fn point_rate(pt: &TaylorPoint) -> f64 {
    (pt.t1_tilde * pt.t2_tilde).log2()
}

/// Minimum-power precoders for MUs `1..M` meeting their SINR targets with
/// `w₀ = 0` and a fixed AN vector.
fn min_power_qos(ch: &ChannelSet, cfg: &NetworkConfig, z: Option<&CVector>, tol: f64) -> Result<Vec<CVector>> {
    let m_users = ch.m_users();
    let n = ch.n_m();
    if m_users == 1 {
        return Ok(Vec::new());
    }
    let mut p = ConicProblem::new(Sense::Minimize);
    let w: Vec<Var> = (1..m_users).map(|m| p.complex_vector(&format!("w{m}"), n)).collect();
    let s = p.scalar("s");
    p.set_objective(Sense::Minimize, s.expr());
    for m in 1..m_users {
        let hm = &ch.h_mu[m];
        let sg = cfg.gamma_mu[m - 1].sqrt();
        let mut rows: Vec<LinExpr> = Vec::new();
        for (q, &v) in w.iter().enumerate() {
            if q + 1 != m {
                rows.extend(amp(v, hm).map(|e| e * sg));
            }
        }
        let floor = cfg.sigma2 + z.map_or(0.0, |z| gain(hm, z));
        rows.push(LinExpr::constant(sg * floor.sqrt()));
        let [re, im] = amp(w[m - 1], hm);
        p.add_soc(&format!("qos{m}"), rows, re);
        p.add_eq(&format!("phase{m}"), im);
    }
    let coords: Vec<LinExpr> = w.iter().flat_map(|v| v.coords()).collect();
    p.add_soc("power", coords, s.expr());
    let r = conic::solve(&p, tol)?;
    match r.status {
        SolveStatus::Optimal => Ok(w.iter().map(|&v| r.vector(v)).collect()),
        SolveStatus::Infeasible => Err(Error::QosInfeasible("MU SINR targets cannot be met".into())),
        s => Err(Error::NumericalFailure(format!("QoS feasibility SOCP ended with {s:?}"))),
    }
}

/// Unit vector along the projection of `h₁ᴴ` onto the null space of the
/// rows in `block`, if that projection is not negligible.
fn projected_direction(h1: &CVector, block: &[&CVector]) -> Option<CVector> {
    let n = h1.len();
    let target = h1.map(|c| c.conj());
    let proj = if block.is_empty() {
        target
    } else {
        let g = CMatrix::from_fn(block.len(), n, |i, j| block[i][j]);
        let v = null_space_basis(&g).ok()?;
        &v * (v.adjoint() * target)
    };
    let norm = proj.norm();
    (norm > 1e-9 * h1.norm()).then(|| proj / C64::new(norm, 0.0))
}

/// Feasible starting point: least-power QoS precoders for MUs `1..M`, then
/// the leftover power on `w₀` along `h₁ᴴ` projected away from the
/// eavesdropper and the other MUs.
pub fn init_feasible(ch: &ChannelSet, cfg: &NetworkConfig, opts: &StbOmOptions) -> Result<TaylorPoint> {
    init_with_an(ch, cfg, opts, if opts.use_an { Some(CVector::zeros(ch.n_m())) } else { None })
}

fn init_with_an(ch: &ChannelSet, cfg: &NetworkConfig, opts: &StbOmOptions, z: Option<CVector>) -> Result<TaylorPoint> {
    check_inputs(ch, cfg)?;
    opts.validate()?;
    let others = min_power_qos(ch, cfg, z.as_ref(), opts.solver_tol)?;
    let used: f64 = others.iter().map(squared_norm).sum::<f64>() + z.as_ref().map_or(0.0, squared_norm);
    let left = cfg.p_m - used;
    if !(left > 1e-9 * cfg.p_m) {
        return Err(Error::QosInfeasible(format!(
            "MU SINR targets need power {used:.4e} of the {:.4e} budget",
            cfg.p_m
        )));
    }
    let h1 = &ch.h_mu[0];
    let mut block: Vec<&CVector> = ch.h_mu[1..].iter().collect();
    let without_eve = projected_direction(h1, &block);
    block.push(&ch.h_e);
    let dir = projected_direction(h1, &block)
        .or(without_eve)
        .ok_or_else(|| Error::DegenerateChannel("MU 1 lies in the span of the QoS users".into()))?;
    let mut w = Vec::with_capacity(ch.m_users());
    w.push(dir * C64::new(left.sqrt(), 0.0));
    w.extend(others);
    tight_point(ch, cfg, opts, w, z)
}

fn solve_step(socp: &OmSocp, tol: f64) -> Result<(conic::SolveResult, Vec<SolveStatus>)> {
    let mut statuses = Vec::new();
    let attempts = [SolverSettings::with_tol(tol), SolverSettings::careful(tol), SolverSettings::careful(tol * 100.0)];
    for settings in &attempts {
        let r = conic::solve_with(&socp.problem, settings)?;
        statuses.push(r.status);
        if r.is_optimal() {
            return Ok((r, statuses));
        }
    }
    Err(Error::NumericalFailure(format!("surrogate SOCP failed ({statuses:?})")))
}

/// Runs the successive approximation from `start`. The returned trace
/// starts with the rate of `start`.
fn iterate(
    ch: &ChannelSet,
    cfg: &NetworkConfig,
    opts: &StbOmOptions,
    start: TaylorPoint,
) -> Result<(TaylorPoint, Diagnostics)> {
    let mut pt = start;
    let mut diag = Diagnostics { objective_trace: vec![point_rate(&pt)], ..Default::default() };
    for it in 0..opts.max_iters {
        let socp = build_socp(ch, &pt, cfg, opts)?;
        let (r, statuses) = match solve_step(&socp, opts.solver_tol) {
            Ok(v) => v,
            Err(e) if it == 0 => return Err(e),
            Err(e) => {
                diag.notes.push(format!("stopped early: {e}"));
                break;
            }
        };
        diag.solver_statuses.extend(statuses);
        diag.iterations = it + 1;
        let w: Vec<CVector> = socp.w.iter().map(|&v| r.vector(v)).collect();
        let z = socp.z.map(|v| r.vector(v));
        let next = tight_point(ch, cfg, opts, w, z)?;
        let (old, new) = (point_rate(&pt), point_rate(&next));
        if new < old {
            // solver noise at the fixed point: keep the previous point, which
            // makes this iterate a zero step
            diag.notes.push(format!("iteration {} lost {:.3e} bits, kept previous point", it + 1, old - new));
            diag.objective_trace.push(old);
            break;
        }
        let (t_old, t_new) = (2f64.powf(old / 2.0), 2f64.powf(new / 2.0));
        pt = next;
        diag.objective_trace.push(new);
        if (t_new - t_old).abs() <= opts.rel_tol * t_old.abs() {
            break;
        }
    }
    diag.final_objective = point_rate(&pt);
    Ok((pt, diag))
}

fn finish(ch: &ChannelSet, opts: &StbOmOptions, pt: TaylorPoint, diag: Diagnostics) -> BeamformingSolution {
    let mut sol = macro_solution(ch, pt.w_tilde);
    sol.an = pt.z_tilde;
    sol.ift_sum = opts.ift_sum;
    sol.diagnostics = diag;
    sol
}

/// Secrecy beamforming at the MBS. With `opts.use_an` this is
/// [`solve_stb_om_with_an`].
pub fn solve_stb_om(ch: &ChannelSet, cfg: &NetworkConfig, opts: &StbOmOptions) -> Result<BeamformingSolution> {
    if opts.use_an {
        return solve_stb_om_with_an(ch, cfg, opts);
    }
    let start = init_feasible(ch, cfg, opts)?;
    let (pt, diag) = iterate(ch, cfg, opts, start)?;
    Ok(finish(ch, opts, pt, diag))
}

/// AN vector in the null space of every MU channel carrying
/// `an_fraction·P_M`, along a seeded random direction.
pub fn random_an(ch: &ChannelSet, cfg: &NetworkConfig, opts: &StbOmOptions) -> Result<CVector> {
    let n = ch.n_m();
    let g = CMatrix::from_fn(ch.m_users(), n, |i, j| ch.h_mu[i][j]);
    let v = null_space_basis(&g)?;
    let mut rng = ChaCha20Rng::seed_from_u64(opts.an_seed);
    let x = complex_gaussian(&mut rng, v.ncols());
    let dir = &v * x;
    let norm = dir.norm();
    Ok(dir * C64::new((opts.an_fraction * cfg.p_m).sqrt() / norm, 0.0))
}

/// Baseline: fixed [`random_an`] vector, precoders optimized around it.
pub fn solve_random_an(ch: &ChannelSet, cfg: &NetworkConfig, opts: &StbOmOptions) -> Result<BeamformingSolution> {
    opts.validate()?;
    let z = random_an(ch, cfg, opts)?;
    // z is invisible to the MUs, so to the precoders it is extra
    // eavesdropper noise drawn from the budget.
    let mut inner = opts.clone();
    inner.use_an = false;
    inner.ift_sum += gain(&ch.h_e, &z);
    let mut reduced = cfg.clone();
    reduced.p_m -= squared_norm(&z);
    let mut sol = solve_stb_om(ch, &reduced, &inner)?;
    sol.an = Some(z);
    sol.ift_sum = opts.ift_sum;
    Ok(sol)
}

/// Joint design of precoders and AN.
///
/// The AN part of the eavesdropper constraint is expanded around `z̃`, so
/// `z̃ = 0` leaves no incentive to grow `z`. The iteration is therefore run
/// from the converged no-AN point and from the converged random-AN baseline,
/// and the better end point is kept.
pub fn solve_stb_om_with_an(ch: &ChannelSet, cfg: &NetworkConfig, opts: &StbOmOptions) -> Result<BeamformingSolution> {
    opts.validate()?;
    let mut joint = opts.clone();
    joint.use_an = true;
    let plain = StbOmOptions { use_an: false, ..opts.clone() };

    let mut starts: Vec<(TaylorPoint, usize)> = Vec::new();
    let base = solve_stb_om(ch, cfg, &plain)?;
    let zero = CVector::zeros(ch.n_m());
    starts.push((tight_point(ch, cfg, &joint, base.w_mu, Some(zero))?, base.diagnostics.iterations));
    match solve_random_an(ch, cfg, opts) {
        Ok(r) => starts.push((tight_point(ch, cfg, &joint, r.w_mu, r.an)?, r.diagnostics.iterations)),
        Err(Error::QosInfeasible(_)) | Err(Error::DegenerateChannel(_)) => {}
        Err(e) => return Err(e),
    }

    let mut best: Option<(TaylorPoint, Diagnostics)> = None;
    let mut warm = 0;
    for (start, its) in starts {
        warm += its;
        let (pt, diag) = iterate(ch, cfg, &joint, start)?;
        if best.as_ref().map_or(true, |(b, _)| point_rate(&pt) > point_rate(b)) {
            best = Some((pt, diag));
        }
    }
    let (pt, mut diag) = best.expect("at least one start");
    diag.notes.push(format!("{warm} warm-start iterations"));
    Ok(finish(ch, opts, pt, diag))
}
