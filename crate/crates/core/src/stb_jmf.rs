//! Joint MBS/FBS beamforming by semidefinite relaxation.
//!
//! For a fixed eavesdropper SINR level `τ` the inner problem maximizes the
//! SINR of MU 0 over lifted covariances `W ⪰ 0`. The linear-fractional
//! objective is linearized with the substitution `X = ζ W`, which pins the
//! SINR denominator of MU 0 to one. An outer one-dimensional search then
//! maximizes `(1 + G(τ)) / (1 + τ)`.
//!
//! The search runs over `u = ln(1 + τ)`, a monotone reparameterization of
//! `τ ∈ [0, ‖h₁‖² P_M]` that spends evaluations where the outer objective
//! actually varies.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::channel::{ChannelSet, NetworkConfig};
use crate::conic::{
    self, solve_block_sdp, BlockSdp, ConicProblem, ConstraintId, LinExpr, SdpRow, SdpSettings, Sense, SolveResult,
    SolveStatus, Var,
};
use crate::error::{Error, Result};
use crate::linalg::{gram, hermitian_eigen, normalize_phase, psd_sqrt, trace_product, trace_re, CMatrix, CVector, C64};
use crate::metrics::{self, BeamformingSolution, Diagnostics};

/// A lifted covariance block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    Mu(usize),
    Fu(usize, usize),
}

/// `Σ_b Re Tr(A_b X_b) + zeta·ζ + constant`.
#[derive(Clone, Debug, Default)]
pub struct LinearMatrixForm {
    pub blocks: Vec<(Block, CMatrix)>,
    pub zeta: f64,
    pub constant: f64,
}

impl LinearMatrixForm {
    fn add(&mut self, b: Block, a: CMatrix, scale: f64) {
        self.blocks.push((b, a * C64::new(scale, 0.0)));
    }

    /// Value at covariances `x` (indexed like the inner solution) and `ζ`.
    pub fn eval(&self, x_mu: &[CMatrix], x_fu: &[Vec<CMatrix>], zeta: f64) -> f64 {
        let mut acc = self.constant + self.zeta * zeta;
        for (b, a) in &self.blocks {
            let x = match *b {
                Block::Mu(m) => &x_mu[m],
                Block::Fu(n, k) => &x_fu[n][k],
            };
            acc += trace_product(a, x);
        }
        acc
    }

    /// Coefficient matrix on block `b` (zero matrix of size `d` if absent).
    pub fn block_coef(&self, b: Block, d: usize) -> CMatrix {
        let mut out = CMatrix::zeros(d, d);
        for (bb, a) in &self.blocks {
            if *bb == b {
                out += a;
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    /// `form ≤ 0`
    Le,
    /// `form = 0`
    Eq,
}

/// One non-PSD constraint of the lifted problem.
#[derive(Clone, Debug)]
pub struct LiftedRow {
    pub name: String,
    pub kind: RowKind,
    pub form: LinearMatrixForm,
}

/// The lifted problem in symbolic form, independent of any backend.
#[derive(Clone, Debug)]
pub struct LiftedModel {
    pub m_users: usize,
    pub n_coop: usize,
    pub k_users: usize,
    pub n_m: usize,
    pub n_f: usize,
    pub p_m: f64,
    pub p_f: f64,
    /// Maximized.
    pub objective: LinearMatrixForm,
    pub rows: Vec<LiftedRow>,
    pub tau: Option<f64>,
}

impl LiftedModel {
    pub fn blocks(&self) -> Vec<Block> {
        let mut out: Vec<Block> = (0..self.m_users).map(Block::Mu).collect();
        for n in 0..self.n_coop {
            for k in 0..self.k_users {
                out.push(Block::Fu(n, k));
            }
        }
        out
    }

    pub fn dim(&self, b: Block) -> usize {
        match b {
            Block::Mu(_) => self.n_m,
            Block::Fu(..) => self.n_f,
        }
    }

    /// Natural size of a block: its tier's power budget.
    fn unit(&self, b: Block) -> f64 {
        match b {
            Block::Mu(_) => self.p_m,
            Block::Fu(..) => self.p_f,
        }
    }

    pub fn row(&self, prefix: &str) -> impl Iterator<Item = &LiftedRow> {
        let p = prefix.to_string();
        self.rows.iter().filter(move |r| r.name.starts_with(&p))
    }
}

/// Builds the symbolic lifted model.
///
/// * `tau = Some(t)` adds the eavesdropper cap; `None` drops it.
/// * `fbs_penalty` subtracts `penalty · Σ Tr(X_nk)` from the objective.
pub fn lifted_model(ch: &ChannelSet, cfg: &NetworkConfig, tau: Option<f64>, fbs_penalty: f64) -> LiftedModel {
    let (m_users, n_coop, k_users) = (cfg.m_users, cfg.n_coop, cfg.k_users);
    let h_mu: Vec<CMatrix> = ch.h_mu.iter().map(gram).collect();
    let h_e = gram(&ch.h_e);
    let eye_m = CMatrix::identity(cfg.n_m, cfg.n_m);
    let eye_f = CMatrix::identity(cfg.n_f, cfg.n_f);
    let fu_blocks: Vec<(usize, usize)> =
        (0..n_coop).flat_map(|n| (0..k_users).map(move |k| (n, k))).collect();

    let mut objective = LinearMatrixForm::default();
    objective.add(Block::Mu(0), h_mu[0].clone(), 1.0);
    if fbs_penalty > 0.0 {
        for &(n, k) in &fu_blocks {
            objective.add(Block::Fu(n, k), eye_f.clone(), -fbs_penalty);
        }
    }

    let mut rows = Vec::new();

    // Σ_m Tr X_m − P_M ζ ≤ 0
    let mut f = LinearMatrixForm { zeta: -cfg.p_m, ..Default::default() };
    for m in 0..m_users {
        f.add(Block::Mu(m), eye_m.clone(), 1.0);
    }
    rows.push(LiftedRow { name: "mbs_power".into(), kind: RowKind::Le, form: f });

    for n in 0..n_coop {
        let mut f = LinearMatrixForm { zeta: -cfg.p_f, ..Default::default() };
        for k in 0..k_users {
            f.add(Block::Fu(n, k), eye_f.clone(), 1.0);
        }
        rows.push(LiftedRow { name: format!("fbs_power_{n}"), kind: RowKind::Le, form: f });
    }

    // γ_m (Σ_{q≠m} Tr(H_m X_q) + Σ Tr(H_{n,m} X_nk) + ζ) − Tr(H_m X_m) ≤ 0
    for m in 1..m_users {
        let g = cfg.gamma_mu[m - 1];
        let mut f = LinearMatrixForm { zeta: g, ..Default::default() };
        for q in 0..m_users {
            let s = if q == m { -1.0 } else { g };
            f.add(Block::Mu(q), h_mu[m].clone(), s);
        }
        for &(n, k) in &fu_blocks {
            f.add(Block::Fu(n, k), gram(&ch.h_fbs_mu[n][m]), g);
        }
        rows.push(LiftedRow { name: format!("mu_qos_{m}"), kind: RowKind::Le, form: f });
    }

    for &(n, k) in &fu_blocks {
        let g = cfg.gamma_fu[n][k];
        let mut f = LinearMatrixForm { zeta: g, ..Default::default() };
        for &(p, t) in &fu_blocks {
            let hm = gram(&ch.h_fbs_fu[p][n][k]);
            let s = if (p, t) == (n, k) { -1.0 } else { g };
            f.add(Block::Fu(p, t), hm, s);
        }
        let hm = gram(&ch.h_mbs_fu[n][k]);
        for m in 0..m_users {
            f.add(Block::Mu(m), hm.clone(), g);
        }
        rows.push(LiftedRow { name: format!("fu_qos_{n}_{k}"), kind: RowKind::Le, form: f });
    }

    // Tr(H_E X_1) − τ (Σ_{m≥2} Tr(H_E X_m) + Σ Tr(H_{n,E} X_nk) + ζ) ≤ 0
    if let Some(t) = tau {
        let mut f = LinearMatrixForm { zeta: -t, ..Default::default() };
        f.add(Block::Mu(0), h_e.clone(), 1.0);
        for m in 1..m_users {
            f.add(Block::Mu(m), h_e.clone(), -t);
        }
        for &(n, k) in &fu_blocks {
            f.add(Block::Fu(n, k), gram(&ch.h_fbs_e[n]), -t);
        }
        rows.push(LiftedRow { name: "eve_cap".into(), kind: RowKind::Le, form: f });
    }

    // Σ_{m≥2} Tr(H_1 X_m) + Σ Tr(H_{n,1} X_nk) + ζ − 1 = 0
    let mut f = LinearMatrixForm { zeta: 1.0, constant: -1.0, ..Default::default() };
    for m in 1..m_users {
        f.add(Block::Mu(m), h_mu[0].clone(), 1.0);
    }
    for &(n, k) in &fu_blocks {
        f.add(Block::Fu(n, k), gram(&ch.h_fbs_mu[n][0]), 1.0);
    }
    rows.push(LiftedRow { name: "normalization".into(), kind: RowKind::Eq, form: f });

    LiftedModel {
        m_users,
        n_coop,
        k_users,
        n_m: cfg.n_m,
        n_f: cfg.n_f,
        p_m: cfg.p_m,
        p_f: cfg.p_f,
        objective,
        rows,
        tau,
    }
}

/// A lifted model compiled to the conic IR.
#[derive(Clone, Debug)]
pub struct InnerSdp {
    pub problem: ConicProblem,
    pub model: LiftedModel,
    pub x_mu: Vec<Var>,
    pub x_fu: Vec<Vec<Var>>,
    pub zeta: Var,
    row_ids: Vec<ConstraintId>,
    psd_mu: Vec<ConstraintId>,
    psd_fu: Vec<Vec<ConstraintId>>,
    /// The IR objective is the model objective times this factor.
    obj_scale: f64,
}

fn compile(model: LiftedModel) -> InnerSdp {
    let mut p = ConicProblem::new(Sense::Maximize);
    let x_mu: Vec<Var> = (0..model.m_users).map(|m| p.hermitian(&format!("X_mu{m}"), model.n_m)).collect();
    let x_fu: Vec<Vec<Var>> = (0..model.n_coop)
        .map(|n| (0..model.k_users).map(|k| p.hermitian(&format!("X_fu{n}_{k}"), model.n_f)).collect())
        .collect();
    let zeta = p.scalar("zeta");
    let lin = |f: &LinearMatrixForm| -> LinExpr {
        let mut e = LinExpr::constant(f.constant) + zeta.expr() * f.zeta;
        for (b, a) in &f.blocks {
            let v = match *b {
                Block::Mu(m) => x_mu[m],
                Block::Fu(n, k) => x_fu[n][k],
            };
            e += v.trace_with(a);
        }
        e
    };
    // the objective reaches ‖h₁‖² P_M; bring it to order one
    let obj_scale = 1.0 / (trace_re(&model.objective.block_coef(Block::Mu(0), model.n_m)) * model.p_m).max(1.0);
    p.set_objective(Sense::Maximize, lin(&model.objective) * obj_scale);
    let row_ids = model
        .rows
        .iter()
        .map(|r| match r.kind {
            RowKind::Le => p.add_le(&r.name, lin(&r.form)),
            RowKind::Eq => p.add_eq(&r.name, lin(&r.form)),
        })
        .collect();
    let psd_mu = x_mu.iter().enumerate().map(|(m, &v)| p.add_psd(&format!("psd_mu{m}"), v)).collect();
    let psd_fu = x_fu
        .iter()
        .enumerate()
        .map(|(n, row)| row.iter().enumerate().map(|(k, &v)| p.add_psd(&format!("psd_fu{n}_{k}"), v)).collect())
        .collect();
    InnerSdp { problem: p, model, x_mu, x_fu, zeta, row_ids, psd_mu, psd_fu, obj_scale }
}

/// Lifted inner problem for a fixed eavesdropper SINR cap `tau`.
pub fn build_inner_sdp(ch: &ChannelSet, cfg: &NetworkConfig, tau: f64) -> Result<InnerSdp> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!("tau must be finite and nonnegative, got {tau}")));
    }
    cfg.validate()?;
    ch.check(cfg)?;
    Ok(compile(lifted_model(ch, cfg, Some(tau), 0.0)))
}

/// Optimum of a lifted problem, with its multipliers.
#[derive(Clone, Debug)]
pub struct InnerSdpSolution {
    pub x_mu: Vec<CMatrix>,
    pub x_fu: Vec<Vec<CMatrix>>,
    pub zeta: f64,
    /// `Tr(H₁ X₁)`.
    pub objective: f64,
    pub model: LiftedModel,
    /// Multipliers of `model.rows`, in order.
    pub row_duals: Vec<f64>,
    pub psd_duals_mu: Vec<CMatrix>,
    pub psd_duals_fu: Vec<Vec<CMatrix>>,
    pub stats: conic::SolveStats,
}

impl InnerSdpSolution {
    pub fn block(&self, b: Block) -> &CMatrix {
        match b {
            Block::Mu(m) => &self.x_mu[m],
            Block::Fu(n, k) => &self.x_fu[n][k],
        }
    }

    fn psd_dual(&self, b: Block) -> &CMatrix {
        match b {
            Block::Mu(m) => &self.psd_duals_mu[m],
            Block::Fu(n, k) => &self.psd_duals_fu[n][k],
        }
    }

    /// Recovered covariances `W = X / ζ`.
    pub fn covariances(&self) -> (Vec<CMatrix>, Vec<Vec<CMatrix>>) {
        let s = C64::new(1.0 / self.zeta, 0.0);
        (
            self.x_mu.iter().map(|x| x * s).collect(),
            self.x_fu.iter().map(|r| r.iter().map(|x| x * s).collect()).collect(),
        )
    }
}

fn extract_conic(sdp: &InnerSdp, r: &SolveResult) -> InnerSdpSolution {
    let k = C64::new(1.0 / sdp.obj_scale, 0.0);
    let x_mu: Vec<CMatrix> = sdp.x_mu.iter().map(|&v| r.hermitian(v)).collect();
    let x_fu: Vec<Vec<CMatrix>> = sdp.x_fu.iter().map(|row| row.iter().map(|&v| r.hermitian(v)).collect()).collect();
    let objective = trace_product(&sdp.model.objective.block_coef(Block::Mu(0), sdp.model.n_m), &x_mu[0]);
    InnerSdpSolution {
        x_mu,
        x_fu,
        zeta: r.scalar(sdp.zeta),
        objective,
        model: sdp.model.clone(),
        row_duals: sdp.row_ids.iter().map(|&id| r.dual(id).scalar() * k.re).collect(),
        psd_duals_mu: sdp.psd_mu.iter().map(|&id| r.dual(id).psd() * k).collect(),
        psd_duals_fu: sdp.psd_fu.iter().map(|row| row.iter().map(|&id| r.dual(id).psd() * k).collect()).collect(),
        stats: r.stats.clone(),
    }
}

/// Solves the compiled IR with the general conic backend. Slower and less
/// accurate than [`solve_lifted`]; kept as an independent cross-check.
pub fn solve_lifted_conic(sdp: &InnerSdp, tol: f64) -> Result<InnerSdpSolution> {
    let r = conic::solve(&sdp.problem, tol)?;
    match r.status {
        SolveStatus::Optimal => Ok(extract_conic(sdp, &r)),
        SolveStatus::Infeasible => Err(Error::QosInfeasible("lifted QoS constraints cannot be met".into())),
        other => Err(Error::NumericalFailure(format!("lifted solve failed ({other:?})"))),
    }
}

/// Orthonormal basis of the null space of the cap coefficient on `X₁` when
/// `τ = 0`. The cap then reads `Tr(H_E X₁) ≤ 0`, which has no interior;
/// writing `X₁ = V Y Vᴴ` enforces it exactly and the row is dropped.
fn zero_cap_basis(model: &LiftedModel) -> Option<(usize, CMatrix)> {
    if model.tau != Some(0.0) {
        return None;
    }
    let i = model.rows.iter().position(|r| r.name == "eve_cap")?;
    let a = model.rows[i].form.block_coef(Block::Mu(0), model.n_m);
    let (vals, vecs) = hermitian_eigen(&a);
    let cut = 1e-12 * vals[0].abs().max(f64::MIN_POSITIVE);
    let keep: Vec<usize> = (0..vals.len()).filter(|&j| vals[j].abs() <= cut).collect();
    Some((i, CMatrix::from_fn(model.n_m, keep.len(), |r, c| vecs[(r, keep[c])])))
}

/// Dense block form of the lifted model. Blocks are measured in units of
/// their power budget; the nonnegative vector holds `ζ` then one slack per
/// inequality row.
fn dense_form(model: &LiftedModel, restrict: Option<&(usize, CMatrix)>) -> BlockSdp {
    let blocks = model.blocks();
    let index = |b: Block| blocks.iter().position(|&x| x == b).expect("known block");
    let coef = |b: Block, a: &CMatrix, sign: f64| -> CMatrix {
        let a = a * C64::new(sign * model.unit(b), 0.0);
        match (b, restrict) {
            (Block::Mu(0), Some((_, v))) => v.adjoint() * a * v,
            _ => a,
        }
    };
    let scaled = |f: &LinearMatrixForm, sign: f64| -> Vec<(usize, CMatrix)> {
        f.blocks.iter().map(|(b, a)| (index(*b), coef(*b, a, sign))).collect()
    };
    let mut rows = Vec::with_capacity(model.rows.len());
    let mut slack = 1;
    for (i, r) in model.rows.iter().enumerate() {
        if restrict.map_or(false, |(skip, _)| *skip == i) {
            continue;
        }
        let mut lp = vec![(0, r.form.zeta)];
        if r.kind == RowKind::Le {
            lp.push((slack, 1.0));
            slack += 1;
        }
        rows.push(SdpRow { blocks: scaled(&r.form, 1.0), lp, rhs: -r.form.constant });
    }
    let mut block_dims: Vec<usize> = blocks.iter().map(|&b| model.dim(b)).collect();
    if let Some((_, v)) = restrict {
        block_dims[index(Block::Mu(0))] = v.ncols();
    }
    BlockSdp {
        block_dims,
        n_lp: slack,
        c_blocks: scaled(&model.objective, -1.0),
        c_lp: vec![(0, -model.objective.zeta)],
        rows,
    }
}

/// Solves a lifted model with the dense interior-point method.
pub fn solve_model(model: &LiftedModel, tol: f64) -> Result<InnerSdpSolution> {
    let restrict = zero_cap_basis(model);
    let sol = solve_block_sdp(&dense_form(model, restrict.as_ref()), &SdpSettings { tol, ..Default::default() });
    match sol.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => return Err(Error::QosInfeasible("lifted QoS constraints cannot be met".into())),
        other => return Err(Error::NumericalFailure(format!("lifted solve failed ({other:?})"))),
    }
    let blocks = model.blocks();
    let mut x_mu = vec![CMatrix::zeros(0, 0); model.m_users];
    let mut x_fu = vec![vec![CMatrix::zeros(0, 0); model.k_users]; model.n_coop];
    let mut g_mu = x_mu.clone();
    let mut g_fu = x_fu.clone();
    for (i, &b) in blocks.iter().enumerate() {
        let u = C64::new(model.unit(b), 0.0);
        let (mut x, mut g) = (&sol.x_blocks[i] * u, &sol.z_blocks[i] / u);
        if let (Block::Mu(0), Some((_, v))) = (b, &restrict) {
            x = v * x * v.adjoint();
            g = v * g * v.adjoint();
        }
        match b {
            Block::Mu(m) => (x_mu[m], g_mu[m]) = (x, g),
            Block::Fu(n, k) => (x_fu[n][k], g_fu[n][k]) = (x, g),
        }
    }
    let objective = trace_product(&model.objective.block_coef(Block::Mu(0), model.n_m), &x_mu[0]);
    let zeta = sol.x_lp[0];
    let mut max_violation: f64 = 0.0;
    for r in &model.rows {
        let v = r.form.eval(&x_mu, &x_fu, zeta);
        max_violation = max_violation.max(if r.kind == RowKind::Eq { v.abs() } else { v.max(0.0) });
    }
    let mut row_duals: Vec<f64> = sol.y.iter().map(|y| -y).collect();
    if let Some((i, _)) = &restrict {
        row_duals.insert(*i, 0.0);
    }
    Ok(InnerSdpSolution {
        x_mu,
        x_fu,
        zeta,
        objective,
        model: model.clone(),
        row_duals,
        psd_duals_mu: g_mu,
        psd_duals_fu: g_fu,
        stats: conic::SolveStats {
            iterations: sol.iterations as u32,
            primal_residual: sol.primal_residual,
            dual_residual: sol.dual_residual,
            max_violation,
            solve_time_s: sol.solve_time_s,
            reduced_accuracy: false,
        },
    })
}

pub(crate) fn solve_lifted(sdp: &InnerSdp, tol: f64) -> Result<InnerSdpSolution> {
    solve_model(&sdp.model, tol)
}

#[derive(Clone, Debug)]
pub struct JmfOptions {
    /// Coarse grid points in `u = ln(1+τ)` before the golden-section pass.
    pub grid_points: usize,
    /// Final bracket width in `u`.
    pub eps_u: f64,
    pub randomization_trials: usize,
    /// Largest `λ₂/λ₁` accepted for the eigenvector path.
    pub rank_tol: f64,
    pub solver_tol: f64,
    /// Seed of the randomization fallback.
    pub seed: u64,
}

impl Default for JmfOptions {
    fn default() -> Self {
        Self {
            grid_points: 20,
            eps_u: 1e-5,
            randomization_trials: 100,
            rank_tol: 1e-6,
            solver_tol: 1e-10,
            seed: 0,
        }
    }
}

/// `G(τ)` and the inner optimum.
pub fn inner_value(ch: &ChannelSet, cfg: &NetworkConfig, tau: f64, tol: f64) -> Result<(f64, InnerSdpSolution)> {
    let sdp = build_inner_sdp(ch, cfg, tau)?;
    let sol = solve_lifted(&sdp, tol)?;
    Ok((sol.objective, sol))
}

/// Evaluates the fractional inner objective `Tr(H₁W₁)/A'₁` at covariances
/// `W` without any normalization.
pub fn fractional_objective(model: &LiftedModel, w_mu: &[CMatrix], w_fu: &[Vec<CMatrix>]) -> f64 {
    let norm = model.rows.iter().find(|r| r.name == "normalization").expect("normalization row");
    // the row reads (denominator − 1) at ζ = 1
    let denom = norm.form.eval(w_mu, w_fu, 1.0) + 1.0;
    let num = trace_product(&model.objective.block_coef(Block::Mu(0), model.n_m), &w_mu[0]);
    num / denom
}

#[derive(Clone, Debug, Default)]
pub struct GoldenSearchTrace {
    pub evaluations: Vec<(f64, f64)>,
    pub brackets: Vec<(f64, f64)>,
}

/// Golden-section search for a maximizer of a unimodal `f` on `[lo, hi]`.
/// Returns the midpoint of the final bracket (width ≤ `eps`).
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, eps: f64) -> (f64, GoldenSearchTrace) {
    assert!(lo < hi && eps > 0.0, "golden_section needs lo < hi and eps > 0");
    let rho = (5f64.sqrt() - 1.0) / 2.0;
    let mut trace = GoldenSearchTrace::default();
    let (mut a, mut b) = (lo, hi);
    trace.brackets.push((a, b));
    if b - a <= eps {
        return ((a + b) / 2.0, trace);
    }
    let mut eval = |x: f64, trace: &mut GoldenSearchTrace| {
        let v = f(x);
        trace.evaluations.push((x, v));
        v
    };
    let mut c = b - rho * (b - a);
    let mut d = a + rho * (b - a);
    let mut fc = eval(c, &mut trace);
    let mut fd = eval(d, &mut trace);
    loop {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            trace.brackets.push((a, b));
            if b - a <= eps {
                break;
            }
            c = b - rho * (b - a);
            fc = eval(c, &mut trace);
        } else {
            a = c;
            c = d;
            fc = fd;
            trace.brackets.push((a, b));
            if b - a <= eps {
                break;
            }
            d = a + rho * (b - a);
            fd = eval(d, &mut trace);
        }
    }
    ((a + b) / 2.0, trace)
}

/// `λ₂/λ₁` of a PSD block (0 for the zero matrix).
pub fn verify_rank_one(x: &CMatrix, tol: f64) -> (f64, bool) {
    let (vals, _) = hermitian_eigen(x);
    let l1 = vals[0];
    let ratio = if l1 <= 0.0 {
        0.0
    } else if vals.len() < 2 {
        0.0
    } else {
        (vals[1].max(0.0)) / l1
    };
    (ratio, ratio <= tol)
}

/// Outcome of a rank-one extraction.
#[derive(Clone, Debug)]
pub struct Extracted {
    pub w: CVector,
    pub ratio: f64,
    pub randomized: bool,
}

/// Principal eigenvector of `W = X/ζ` scaled by `√λ₁` when the block is
/// numerically rank one; otherwise Gaussian randomization: draws
/// `w ~ CN(0, W)`, rescales to `‖w‖² = Tr W`, and keeps the best draw the
/// `score` closure accepts (`None` means infeasible).
pub fn rank_one_extract<F>(
    x: &CMatrix,
    zeta: f64,
    rank_tol: f64,
    trials: usize,
    rng: &mut ChaCha20Rng,
    mut score: F,
) -> Result<Extracted>
where
    F: FnMut(&CVector) -> Option<f64>,
{
    if !(zeta > 0.0) {
        return Err(Error::InvalidArgument(format!("zeta must be positive, got {zeta}")));
    }
    let w_cov = x * C64::new(1.0 / zeta, 0.0);
    let (vals, vecs) = hermitian_eigen(&w_cov);
    let (ratio, pass) = verify_rank_one(&w_cov, rank_tol);
    if pass {
        let mut u = vecs.column(0).into_owned();
        normalize_phase(&mut u);
        return Ok(Extracted { w: u * C64::new(vals[0].max(0.0).sqrt(), 0.0), ratio, randomized: false });
    }
    let root = psd_sqrt(&w_cov);
    let power = trace_re(&w_cov);
    let mut best: Option<(f64, CVector)> = None;
    for _ in 0..trials {
        let xi = crate::linalg::complex_gaussian(rng, w_cov.nrows());
        let mut w = &root * xi;
        let nrm = w.norm();
        if nrm == 0.0 {
            continue;
        }
        w *= C64::new(power.sqrt() / nrm, 0.0);
        if let Some(s) = score(&w) {
            if best.as_ref().map_or(true, |(b, _)| s > *b) {
                best = Some((s, w));
            }
        }
    }
    best.map(|(_, mut w)| {
        normalize_phase(&mut w);
        Extracted { w, ratio, randomized: true }
    })
    .ok_or(Error::RandomizationFailed(trials))
}

/// KKT residuals of a lifted optimum.
#[derive(Clone, Debug, Default)]
pub struct KktReport {
    /// Largest `‖G_b X_b‖_F` over blocks.
    pub complementarity: f64,
    /// Same, relative to `‖G_b‖_F ‖X_b‖_F`.
    pub complementarity_rel: f64,
    /// Smallest eigenvalue over the dual blocks (should be ≥ 0).
    pub min_dual_eigenvalue: f64,
    /// `‖G_b − (Σ λ_i A_{i,b} − C_b)‖_F`, largest over blocks, relative to
    /// the scale of the multipliers.
    pub stationarity: f64,
    /// `|Σ Tr X_m − P_M ζ| / (P_M ζ)`.
    pub mbs_power_gap: f64,
    /// Largest per-FBS relative power gap.
    pub fbs_power_gap: f64,
    /// Smallest multiplier of the power rows.
    pub min_power_multiplier: f64,
}

impl KktReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.complementarity_rel <= tol
            && self.min_dual_eigenvalue >= -tol
            && self.stationarity <= tol
            && self.mbs_power_gap <= tol
            && self.fbs_power_gap <= tol
    }
}

/// Checks complementary slackness, dual feasibility, stationarity and power
/// tightness of a lifted optimum from its multipliers.
pub fn verify_kkt(sol: &InnerSdpSolution) -> KktReport {
    let model = &sol.model;
    let mut rep = KktReport { min_dual_eigenvalue: f64::INFINITY, min_power_multiplier: f64::INFINITY, ..Default::default() };
    let scale: f64 = 1.0 + sol.row_duals.iter().map(|v| v.abs()).fold(0.0, f64::max);
    for b in model.blocks() {
        let d = model.dim(b);
        let x = sol.block(b);
        let g = sol.psd_dual(b);
        let gx = (g * x).norm();
        rep.complementarity = rep.complementarity.max(gx);
        let denom = g.norm() * x.norm();
        if denom > 0.0 {
            rep.complementarity_rel = rep.complementarity_rel.max(gx / denom);
        }
        let (vals, _) = hermitian_eigen(g);
        rep.min_dual_eigenvalue = rep.min_dual_eigenvalue.min(vals[d - 1] / scale);
        let mut rebuilt = -model.objective.block_coef(b, d);
        for (row, lam) in model.rows.iter().zip(&sol.row_duals) {
            rebuilt += row.form.block_coef(b, d) * C64::new(*lam, 0.0);
        }
        let mut coef_scale = 1.0;
        for row in &model.rows {
            coef_scale = f64::max(coef_scale, row.form.block_coef(b, d).norm());
        }
        rep.stationarity = rep.stationarity.max((rebuilt - g).norm() / (scale * coef_scale));
    }
    let pz = |p: f64| p * sol.zeta;
    for (row, lam) in model.rows.iter().zip(&sol.row_duals) {
        if row.name == "mbs_power" {
            let budget = pz(-row.form.zeta);
            rep.mbs_power_gap = row.form.eval(&sol.x_mu, &sol.x_fu, sol.zeta).abs() / budget;
            rep.min_power_multiplier = rep.min_power_multiplier.min(*lam);
        } else if row.name.starts_with("fbs_power") {
            let budget = pz(-row.form.zeta);
            rep.fbs_power_gap = rep.fbs_power_gap.max(row.form.eval(&sol.x_mu, &sol.x_fu, sol.zeta).abs() / budget);
            rep.min_power_multiplier = rep.min_power_multiplier.min(*lam);
        }
    }
    rep
}

/// Result of the outer search.
#[derive(Clone, Debug)]
pub struct OuterSearch {
    pub tau: f64,
    /// `(1 + G(τ)) / (1 + τ)` at `tau`.
    pub value: f64,
    pub inner: InnerSdpSolution,
    pub grid: Vec<(f64, f64)>,
    pub golden: GoldenSearchTrace,
    pub evaluations: usize,
}

/// `(1+G)/(1+τ)` expressed in bits: `log2` of the outer objective.
pub fn outer_bits(value: f64) -> f64 {
    value.log2()
}

/// Rejects targets above the interference-free single-link SINR
/// `P‖h‖²`, which no design can reach.
pub fn check_link_budgets(ch: &ChannelSet, cfg: &NetworkConfig) -> Result<()> {
    for m in 1..cfg.m_users {
        let best = cfg.p_m * ch.h_mu[m].norm_squared();
        if cfg.gamma_mu[m - 1] > best {
            return Err(Error::QosInfeasible(format!("MU {m} target above its link budget {best:.3e}")));
        }
    }
    for n in 0..cfg.n_coop {
        for k in 0..cfg.k_users {
            let best = cfg.p_f * ch.h_fbs_fu[n][n][k].norm_squared();
            if cfg.gamma_fu[n][k] > best {
                return Err(Error::QosInfeasible(format!("FU ({n},{k}) target above its link budget {best:.3e}")));
            }
        }
    }
    Ok(())
}

/// Coarse grid in `u = ln(1+τ)` followed by golden section inside the best
/// grid bracket. Infeasible points score −∞.
pub fn outer_search(ch: &ChannelSet, cfg: &NetworkConfig, opts: &JmfOptions) -> Result<OuterSearch> {
    cfg.validate()?;
    ch.check(cfg)?;
    check_link_budgets(ch, cfg)?;
    let tau_max = ch.h_mu[0].norm_squared() * cfg.p_m;
    let u_max = tau_max.ln_1p();
    let mut best: Option<(f64, f64, InnerSdpSolution)> = None;
    let mut evaluations = 0usize;
    let mut failure: Option<Error> = None;

    let mut eval = |u: f64, best: &mut Option<(f64, f64, InnerSdpSolution)>| -> f64 {
        evaluations += 1;
        let tau = u.exp_m1().max(0.0);
        match build_inner_sdp(ch, cfg, tau).and_then(|s| solve_lifted(&s, opts.solver_tol)) {
            Ok(sol) => {
                let v = (1.0 + sol.objective) / (1.0 + tau);
                if best.as_ref().map_or(true, |(_, bv, _)| v > *bv) {
                    *best = Some((tau, v, sol));
                }
                v
            }
            Err(e) => {
                if failure.is_none() || matches!(e, Error::QosInfeasible(_)) {
                    failure = Some(e);
                }
                f64::NEG_INFINITY
            }
        }
    };

    let n = opts.grid_points.max(3);
    let grid_u: Vec<f64> = (0..n).map(|i| u_max * i as f64 / (n - 1) as f64).collect();
    let grid: Vec<(f64, f64)> = grid_u.iter().map(|&u| (u, eval(u, &mut best))).collect();
    let (i_best, _) = grid
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("nonempty grid");
    if grid[i_best].1 == f64::NEG_INFINITY {
        return Err(failure.unwrap_or_else(|| Error::QosInfeasible("no feasible tau".into())));
    }
    let lo = grid_u[i_best.saturating_sub(1)];
    let hi = grid_u[(i_best + 1).min(n - 1)];
    let (_, golden) = golden_section(|u| eval(u, &mut best), lo, hi, opts.eps_u);
    let grid = grid.into_iter().map(|(u, v)| (u.exp_m1(), v)).collect();
    let (tau, value, inner) = best.expect("at least one feasible evaluation");
    Ok(OuterSearch { tau, value, inner, grid, golden, evaluations })
}

/// Recovers precoders from lifted covariances, using the eigenvector path
/// where possible and randomization otherwise.
pub(crate) fn recover_precoders(
    ch: &ChannelSet,
    cfg: &NetworkConfig,
    inner: &InnerSdpSolution,
    opts: &JmfOptions,
    score_by_secrecy: bool,
) -> Result<BeamformingSolution> {
    let mut rng = ChaCha20Rng::seed_from_u64(opts.seed);
    let mut diag = Diagnostics::default();
    let mut w_mu: Vec<CVector> = Vec::new();
    let mut w_fu: Vec<Vec<CVector>> = vec![Vec::new(); cfg.n_coop];
    let mut max_ratio: f64 = 0.0;
    // principal components first; randomization replaces blocks one by one
    let (cov_mu, cov_fu) = inner.covariances();
    for c in &cov_mu {
        w_mu.push(principal(c));
    }
    for (n, row) in cov_fu.iter().enumerate() {
        for c in row {
            w_fu[n].push(principal(c));
        }
    }
    let blocks = inner.model.blocks();
    for b in blocks {
        let x = inner.block(b).clone();
        let base = BeamformingSolution { w_mu: w_mu.clone(), w_fu: w_fu.clone(), ..Default::default() };
        let score = |w: &CVector| -> Option<f64> {
            let mut cand = base.clone();
            match b {
                Block::Mu(m) => cand.w_mu[m] = w.clone(),
                Block::Fu(n, k) => cand.w_fu[n][k] = w.clone(),
            }
            let cand = rescale_to_budgets(cand, cfg);
            if !meets_qos(ch, cfg, &cand, 1e-6) {
                return None;
            }
            if score_by_secrecy {
                metrics::secrecy_rate(ch, &cand).ok()
            } else {
                metrics::sinr_mu(ch, &cand, 0).ok()
            }
        };
        let ext = rank_one_extract(&x, inner.zeta, opts.rank_tol, opts.randomization_trials, &mut rng, score)?;
        max_ratio = max_ratio.max(ext.ratio);
        if ext.randomized {
            diag.randomized_blocks += 1;
        }
        match b {
            Block::Mu(m) => w_mu[m] = ext.w,
            Block::Fu(n, k) => w_fu[n][k] = ext.w,
        }
    }
    diag.max_rank_ratio = Some(max_ratio);
    let sol = BeamformingSolution { w_mu, w_fu, an: None, ift_sum: 0.0, diagnostics: diag };
    let mut sol = rescale_to_budgets(sol, cfg);
    sol.ift_sum = metrics::fbs_leak_eve(ch, &sol);
    Ok(sol)
}

fn principal(w: &CMatrix) -> CVector {
    let (vals, vecs) = hermitian_eigen(w);
    let mut u = vecs.column(0).into_owned();
    normalize_phase(&mut u);
    u * C64::new(vals[0].max(0.0).sqrt(), 0.0)
}

/// Scales down any tier that exceeds its power budget.
fn rescale_to_budgets(mut sol: BeamformingSolution, cfg: &NetworkConfig) -> BeamformingSolution {
    let p = sol.mbs_power();
    if p > cfg.p_m {
        let s = C64::new((cfg.p_m / p).sqrt(), 0.0);
        sol.w_mu.iter_mut().for_each(|w| *w *= s);
    }
    for n in 0..sol.w_fu.len() {
        let p = sol.fbs_power(n);
        if p > cfg.p_f {
            let s = C64::new((cfg.p_f / p).sqrt(), 0.0);
            sol.w_fu[n].iter_mut().for_each(|w| *w *= s);
        }
    }
    sol
}

/// QoS of MUs 1.. and every FU, with relative slack `rel`.
pub fn meets_qos(ch: &ChannelSet, cfg: &NetworkConfig, sol: &BeamformingSolution, rel: f64) -> bool {
    for m in 1..cfg.m_users {
        let g = cfg.gamma_mu[m - 1];
        match metrics::sinr_mu(ch, sol, m) {
            Ok(s) if s >= g * (1.0 - rel) => {}
            _ => return false,
        }
    }
    for n in 0..cfg.n_coop {
        for k in 0..cfg.k_users {
            let g = cfg.gamma_fu[n][k];
            match metrics::sinr_fu(ch, sol, n, k) {
                Ok(s) if s >= g * (1.0 - rel) => {}
                _ => return false,
            }
        }
    }
    true
}

/// Joint MBS/FBS design: outer search, covariance recovery and rank-one
/// extraction.
pub fn solve_stb_jmf(ch: &ChannelSet, cfg: &NetworkConfig, opts: &JmfOptions) -> Result<BeamformingSolution> {
    let search = outer_search(ch, cfg, opts)?;
    let mut sol = recover_precoders(ch, cfg, &search.inner, opts, true)?;
    let d = &mut sol.diagnostics;
    d.iterations = search.evaluations;
    d.tau = Some(search.tau);
    d.final_objective = outer_bits(search.value);
    d.objective_trace = search.golden.evaluations.iter().map(|&(_, v)| outer_bits(v)).collect();
    d.solver_statuses = vec![SolveStatus::Optimal];
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::sample_rayleigh_channels;

    #[test]
    fn golden_finds_quadratic_peak() {
        let (x, t) = golden_section(|x| -(x - 2.0) * (x - 2.0), 0.0, 5.0, 1e-6);
        assert!((x - 2.0).abs() <= 1e-6);
        let rho = (5f64.sqrt() - 1.0) / 2.0;
        let bound = ((5.0f64 / 1e-6).ln() / (1.0 / rho).ln()).ceil() as usize + 2;
        assert!(t.evaluations.len() <= bound);
        for w in t.brackets.windows(2) {
            let (a0, b0) = w[0];
            let (a1, b1) = w[1];
            assert!(((b1 - a1) / (b0 - a0) - rho).abs() < 1e-9);
        }
    }

    #[test]
    fn golden_boundary_maximizer() {
        let (x, _) = golden_section(|x| x, 0.0, 1.0, 1e-8);
        assert!(x > 1.0 - 1e-7);
    }

    #[test]
    fn rank_one_ratio_cases() {
        let v = CVector::from_vec(vec![C64::new(1.0, 2.0), C64::new(-0.5, 0.3)]);
        let x = &v * v.adjoint();
        assert!(verify_rank_one(&x, 1e-12).0 < 1e-15);
        let (r, pass) = verify_rank_one(&CMatrix::identity(2, 2), 1e-6);
        assert!((r - 1.0).abs() < 1e-15 && !pass);
    }

    #[test]
    fn exact_rank_one_is_recovered() {
        let w = CVector::from_vec(vec![C64::new(0.3, -1.0), C64::new(2.0, 0.5), C64::new(-0.7, 0.0)]);
        let zeta = 0.25;
        let x = &w * w.adjoint() * C64::new(zeta, 0.0);
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let e = rank_one_extract(&x, zeta, 1e-6, 10, &mut rng, |_| Some(0.0)).unwrap();
        assert!(!e.randomized);
        assert!((&e.w * e.w.adjoint() - &w * w.adjoint()).norm() <= 1e-8);
    }

    #[test]
    fn randomization_keeps_trace_power() {
        let x = CMatrix::identity(2, 2);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let mut seen = 0;
        let e = rank_one_extract(&x, 1.0, 1e-6, 1000, &mut rng, |w| {
            assert!((w.norm_squared() - 2.0).abs() <= 1e-12);
            seen += 1;
            Some(w[0].norm())
        })
        .unwrap();
        assert!(e.randomized && seen == 1000);
        assert!((e.w.norm_squared() - 2.0).abs() <= 1e-12);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let r = rank_one_extract(&x, 1.0, 1e-6, 5, &mut rng, |_| None);
        assert!(matches!(r, Err(Error::RandomizationFailed(5))));
    }

    #[test]
    fn kkt_holds_and_detects_perturbation() {
        let cfg = NetworkConfig::simulation_defaults();
        let ch = sample_rayleigh_channels(&cfg, 6);
        let (_, sol) = inner_value(&ch, &cfg, 0.05, 1e-10).unwrap();
        let rep = verify_kkt(&sol);
        assert!(rep.passes(1e-6), "{rep:?}");
        assert!(rep.min_power_multiplier > 0.0);
        let mut off = sol.clone();
        let v = crate::linalg::complex_gaussian(&mut ChaCha20Rng::seed_from_u64(1), cfg.n_m);
        let bump = &v * v.adjoint();
        let scale = C64::new(0.01 * off.x_mu[0].norm() / bump.norm(), 0.0);
        off.x_mu[0] += bump * scale;
        assert!(verify_kkt(&off).complementarity_rel > 1e-6);
    }

    #[test]
    fn zero_cap_nulls_the_eavesdropper() {
        let cfg = NetworkConfig::simulation_defaults();
        let ch = sample_rayleigh_channels(&cfg, 8);
        let (g, sol) = inner_value(&ch, &cfg, 0.0, 1e-10).unwrap();
        let (w, _) = sol.covariances();
        let leak = trace_product(&gram(&ch.h_e), &w[0]);
        assert!(leak <= 1e-8 * g, "{leak} vs {g}");
    }

    #[test]
    fn inner_value_grows_with_tau() {
        let cfg = NetworkConfig::simulation_defaults();
        for seed in 0..20 {
            let ch = sample_rayleigh_channels(&cfg, 100 + seed);
            let tau_max = ch.h_mu[0].norm_squared() * cfg.p_m;
            let g: Vec<f64> = (0..20)
                .map(|i| inner_value(&ch, &cfg, tau_max * 1e-6f64.powf(1.0 - i as f64 / 19.0), 1e-10).unwrap().0)
                .collect();
            for p in g.windows(2) {
                assert!(p[1] >= p[0] * (1.0 - 1e-7), "seed {seed}: {} then {}", p[0], p[1]);
            }
        }
    }

    #[test]
    fn unconstrained_value_respects_rayleigh_bound() {
        let mut cfg = NetworkConfig::simulation_defaults().with_gamma_fu(0.0);
        cfg.gamma_mu = vec![0.0];
        let ch = sample_rayleigh_channels(&cfg, 2);
        let bound = ch.h_mu[0].norm_squared() * cfg.p_m;
        let (g, _) = inner_value(&ch, &cfg, 1e12, 1e-10).unwrap();
        assert!(g <= bound * (1.0 + 1e-8) && g >= bound * (1.0 - 1e-6), "{g} vs {bound}");
    }

    #[test]
    fn conic_backend_agrees_with_dense_solver() {
        // moderate powers keep the embedded problem well conditioned
        let mut cfg = NetworkConfig::simulation_defaults();
        (cfg.p_m, cfg.p_f) = (10.0, 10.0);
        let mut full = 0;
        for seed in 0..6 {
            let ch = sample_rayleigh_channels(&cfg, 40 + seed);
            let sdp = build_inner_sdp(&ch, &cfg, 0.1).unwrap();
            let a = solve_lifted(&sdp, 1e-10).unwrap();
            let b = solve_lifted_conic(&sdp, 1e-8).unwrap();
            // a stalled conic solve may stop short, never above the optimum
            assert!(b.objective <= a.objective * (1.0 + 1e-6), "{} vs {}", a.objective, b.objective);
            if !b.stats.reduced_accuracy {
                full += 1;
                assert!((a.objective - b.objective).abs() <= 1e-5 * a.objective, "{} vs {}", a.objective, b.objective);
            }
        }
        assert!(full > 0);
    }

    #[test]
    fn outer_value_matches_best_evaluation() {
        let cfg = NetworkConfig::simulation_defaults();
        let ch = sample_rayleigh_channels(&cfg, 12);
        let s = outer_search(&ch, &cfg, &JmfOptions::default()).unwrap();
        let best = s.grid.iter().chain(&s.golden.evaluations).map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(s.value, best);
        let (a, b) = *s.golden.brackets.last().unwrap();
        assert!(b - a <= JmfOptions::default().eps_u);
    }

    #[test]
    fn inner_census() {
        let cfg = NetworkConfig::simulation_defaults();
        let ch = sample_rayleigh_channels(&cfg, 1);
        let sdp = build_inner_sdp(&ch, &cfg, 1.0).unwrap();
        let psd = sdp.problem.count_named("psd_");
        assert_eq!(psd, 4);
        let (m, n, k) = (cfg.m_users, cfg.n_coop, cfg.k_users);
        assert_eq!(sdp.problem.num_constraints() - psd, 1 + n + (m - 1) + n * k + 1 + 1);
        assert_eq!(sdp.problem.num_variables(), 5);
    }
}
