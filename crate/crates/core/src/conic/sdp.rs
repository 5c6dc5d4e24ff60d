//! Dense primal-dual interior-point method for small block SDPs.
//!
//! Standard form over Hermitian PSD blocks `X_b` and a nonnegative vector
//! `x`:
//!
//! ```text
//!     min  Σ Re Tr(C_b X_b) + cᵀx
//!     s.t. Σ Re Tr(A_ib X_b) + a_iᵀx = b_i      i = 1..m
//!          X_b ⪰ 0,  x ≥ 0
//! ```
//!
//! with dual `max bᵀy  s.t.  Σ y_i A_ib + Z_b = C_b,  Σ y_i a_i + z = c`.
//!
//! Infeasible-start path following with the HKM direction and a Mehrotra
//! corrector. The Schur complement is `m × m` and formed densely, so this
//! is only meant for problems with few constraints, where it reaches
//! gaps far below what a general sparse conic code delivers.

use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector};

use super::solve::SolveStatus;
use crate::linalg::{hermitian_eigen, hermitian_part, trace_product, CMatrix, C64};

/// One equality row.
#[derive(Clone, Debug, Default)]
pub struct SdpRow {
    /// Hermitian coefficients by block index.
    pub blocks: Vec<(usize, CMatrix)>,
    /// Coefficients of the nonnegative vector.
    pub lp: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Clone, Debug, Default)]
pub struct BlockSdp {
    pub block_dims: Vec<usize>,
    pub n_lp: usize,
    /// Objective per block (missing blocks are zero).
    pub c_blocks: Vec<(usize, CMatrix)>,
    pub c_lp: Vec<(usize, f64)>,
    pub rows: Vec<SdpRow>,
}

#[derive(Clone, Copy, Debug)]
pub struct SdpSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SdpSettings {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 100 }
    }
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SolveStatus,
    pub x_blocks: Vec<CMatrix>,
    pub x_lp: Vec<f64>,
    pub y: Vec<f64>,
    pub z_blocks: Vec<CMatrix>,
    pub z_lp: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    /// Relative primal residual `‖b − 𝒜X‖ / (1 + ‖b‖)`.
    pub primal_residual: f64,
    /// Relative dual residual.
    pub dual_residual: f64,
    /// `⟨X, Z⟩ / (1 + |pobj| + |dobj|)`.
    pub relative_gap: f64,
    pub solve_time_s: f64,
}

/// Iterate in the scaled problem.
#[derive(Clone)]
struct Point {
    xb: Vec<CMatrix>,
    xl: DVector<f64>,
    y: DVector<f64>,
    zb: Vec<CMatrix>,
    zl: DVector<f64>,
}

struct Scaled {
    dims: Vec<usize>,
    n_lp: usize,
    /// `a[i][b]`, `None` where the row does not touch block `b`.
    a: Vec<Vec<Option<CMatrix>>>,
    al: DMatrix<f64>,
    b: DVector<f64>,
    c: Vec<CMatrix>,
    cl: DVector<f64>,
    row_scale: Vec<f64>,
    obj_scale: f64,
}

impl Scaled {
    fn new(p: &BlockSdp) -> Self {
        let m = p.rows.len();
        let nb = p.block_dims.len();
        let mut a = vec![vec![None; nb]; m];
        let mut al = DMatrix::zeros(m, p.n_lp);
        let mut b = DVector::zeros(m);
        let mut row_scale = vec![1.0; m];
        for (i, row) in p.rows.iter().enumerate() {
            for (blk, coef) in &row.blocks {
                let h = hermitian_part(coef);
                a[i][*blk] = Some(match a[i][*blk].take() {
                    Some(prev) => prev + h,
                    None => h,
                });
            }
            for &(k, v) in &row.lp {
                al[(i, k)] += v;
            }
            let nrm2: f64 = a[i].iter().flatten().map(|x: &CMatrix| x.norm_squared()).sum::<f64>()
                + al.row(i).norm_squared();
            let s = nrm2.sqrt();
            let s = if s > 0.0 { s } else { 1.0 };
            row_scale[i] = s;
            for x in a[i].iter_mut().flatten() {
                *x /= C64::new(s, 0.0);
            }
            for k in 0..p.n_lp {
                al[(i, k)] /= s;
            }
            b[i] = row.rhs / s;
        }
        let mut c: Vec<CMatrix> = p.block_dims.iter().map(|&d| CMatrix::zeros(d, d)).collect();
        for (blk, coef) in &p.c_blocks {
            c[*blk] += hermitian_part(coef);
        }
        let mut cl: DVector<f64> = DVector::zeros(p.n_lp);
        for &(k, v) in &p.c_lp {
            cl[k] += v;
        }
        let cn = (c.iter().map(|x: &CMatrix| x.norm_squared()).sum::<f64>() + cl.norm_squared()).sqrt();
        let obj_scale = cn.max(1e-300);
        let obj_scale = if cn > 0.0 { obj_scale } else { 1.0 };
        for x in c.iter_mut() {
            *x /= C64::new(obj_scale, 0.0);
        }
        cl /= obj_scale;
        Scaled { dims: p.block_dims.clone(), n_lp: p.n_lp, a, al, b, c, cl, row_scale, obj_scale }
    }

    fn m(&self) -> usize {
        self.b.len()
    }

    /// `𝒜(X)`.
    fn apply(&self, xb: &[CMatrix], xl: &DVector<f64>) -> DVector<f64> {
        let mut out = &self.al * xl;
        for (i, row) in self.a.iter().enumerate() {
            for (blk, a) in row.iter().enumerate() {
                if let Some(a) = a {
                    out[i] += trace_product(a, &xb[blk]);
                }
            }
        }
        out
    }

    /// `𝒜*(y)`.
    fn adjoint(&self, y: &DVector<f64>) -> (Vec<CMatrix>, DVector<f64>) {
        let mut zb: Vec<CMatrix> = self.dims.iter().map(|&d| CMatrix::zeros(d, d)).collect();
        for (i, row) in self.a.iter().enumerate() {
            for (blk, a) in row.iter().enumerate() {
                if let Some(a) = a {
                    zb[blk] += a * C64::new(y[i], 0.0);
                }
            }
        }
        (zb, self.al.transpose() * y)
    }

    fn objective(&self, xb: &[CMatrix], xl: &DVector<f64>) -> f64 {
        self.c.iter().zip(xb).map(|(c, x)| trace_product(c, x)).sum::<f64>() + self.cl.dot(xl)
    }

    fn degree(&self) -> f64 {
        (self.dims.iter().sum::<usize>() + self.n_lp) as f64
    }
}

fn inner(a: &[CMatrix], b: &[CMatrix]) -> f64 {
    a.iter().zip(b).map(|(x, y)| trace_product(x, y)).sum()
}

fn hinv(z: &CMatrix) -> Option<CMatrix> {
    Cholesky::new(z.clone()).map(|c| hermitian_part(&c.inverse()))
}

/// Largest `α` with `X + α dX ⪰ 0` (infinite when `dX ⪰ 0`).
fn max_step_psd(x: &CMatrix, dx: &CMatrix) -> f64 {
    let Some(ch) = Cholesky::new(x.clone()) else { return 0.0 };
    let l = ch.l();
    let t = l.solve_lower_triangular(dx).expect("triangular solve");
    let s = l.solve_lower_triangular(&t.adjoint()).expect("triangular solve");
    let (vals, _) = hermitian_eigen(&hermitian_part(&s));
    let lo = vals.last().copied().unwrap_or(0.0);
    if lo < 0.0 {
        -1.0 / lo
    } else {
        f64::INFINITY
    }
}

fn max_step_lp(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    x.iter().zip(dx.iter()).filter(|(_, d)| **d < 0.0).map(|(v, d)| -v / d).fold(f64::INFINITY, f64::min)
}

struct Direction {
    dxb: Vec<CMatrix>,
    dxl: DVector<f64>,
    dy: DVector<f64>,
    dzb: Vec<CMatrix>,
    dzl: DVector<f64>,
}

/// Solves `p` to relative accuracy `settings.tol`.
pub fn solve_block_sdp(p: &BlockSdp, settings: &SdpSettings) -> SdpSolution {
    let start = Instant::now();
    let s = Scaled::new(p);
    let m = s.m();
    let nu = s.degree();

    let norm_b = s.b.norm();
    let norm_c = (s.c.iter().map(|x| x.norm_squared()).sum::<f64>() + s.cl.norm_squared()).sqrt();
    // starting point: multiples of the identity large enough to be interior
    let mut xi: f64 = 10.0f64.max(nu.sqrt());
    for i in 0..m {
        let an = (s.a[i].iter().flatten().map(|a| a.norm_squared()).sum::<f64>() + s.al.row(i).norm_squared()).sqrt();
        xi = xi.max(nu * (1.0 + s.b[i].abs()) / (1.0 + an));
    }
    let eta = 10.0f64.max(nu.sqrt()).max(1.0 + norm_c);
    let mut pt = Point {
        xb: s.dims.iter().map(|&d| CMatrix::identity(d, d) * C64::new(xi, 0.0)).collect(),
        xl: DVector::from_element(s.n_lp, xi),
        y: DVector::zeros(m),
        zb: s.dims.iter().map(|&d| CMatrix::identity(d, d) * C64::new(eta, 0.0)).collect(),
        zl: DVector::from_element(s.n_lp, eta),
    };

    let mut status = SolveStatus::NumericalFailure;
    let mut iterations = 0;
    let (mut pres, mut dres, mut rgap) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut best: Option<(f64, Point, [f64; 3])> = None;
    let mut since_best = 0;

    for it in 0..=settings.max_iter {
        iterations = it;
        let ax = s.apply(&pt.xb, &pt.xl);
        let rp = &s.b - ax;
        let (aty, atyl) = s.adjoint(&pt.y);
        let rdb: Vec<CMatrix> = (0..s.dims.len()).map(|k| &s.c[k] - &pt.zb[k] - &aty[k]).collect();
        let rdl = &s.cl - &pt.zl - atyl;
        let pobj = s.objective(&pt.xb, &pt.xl);
        let dobj = s.b.dot(&pt.y);
        let xz = inner(&pt.xb, &pt.zb) + pt.xl.dot(&pt.zl);
        let norm_rd = (rdb.iter().map(|x| x.norm_squared()).sum::<f64>() + rdl.norm_squared()).sqrt();
        pres = rp.norm() / (1.0 + norm_b);
        dres = norm_rd / (1.0 + norm_c);
        rgap = xz.max((pobj - dobj).abs()) / (1.0 + pobj.abs() + dobj.abs());
        let merit = pres.max(dres).max(rgap);
        if best.as_ref().map_or(true, |(v, ..)| merit < *v) {
            best = Some((merit, pt.clone(), [pres, dres, rgap]));
            since_best = 0;
        } else {
            since_best += 1;
        }
        if merit <= settings.tol {
            status = SolveStatus::Optimal;
            break;
        }
        // roundoff floor: no progress for a while, or the gap lost its sign
        let near = best.as_ref().map_or(false, |(v, ..)| *v <= 1e-6);
        if near && (since_best >= 5 || xz <= 0.0) {
            break;
        }
        // divergence of the dual objective along a nearly feasible ray
        if dobj > 0.0 && (norm_c + norm_rd) / dobj < 1e-9 && pres > settings.tol {
            status = SolveStatus::Infeasible;
            break;
        }
        if pobj < 0.0 && (norm_b + rp.norm()) / -pobj < 1e-9 && dres > settings.tol {
            status = SolveStatus::Unbounded;
            break;
        }
        if it == settings.max_iter {
            break;
        }
        let mu = xz / nu;

        let Some(zinv) = pt.zb.iter().map(hinv).collect::<Option<Vec<_>>>() else { break };
        let zinvl = pt.zl.map(|v| 1.0 / v);

        // Schur complement M_ij = Σ Re Tr(A_i X A_j Z⁻¹) + Σ a_ik a_jk x_k / z_k
        let mut schur = DMatrix::<f64>::zeros(m, m);
        for blk in 0..s.dims.len() {
            let mut prods: Vec<Option<CMatrix>> = Vec::with_capacity(m);
            for j in 0..m {
                prods.push(s.a[j][blk].as_ref().map(|a| &pt.xb[blk] * a * &zinv[blk]));
            }
            for i in 0..m {
                let Some(ai) = &s.a[i][blk] else { continue };
                for j in 0..=i {
                    if let Some(pj) = &prods[j] {
                        let v = trace_product(ai, pj);
                        schur[(i, j)] += v;
                        if i != j {
                            schur[(j, i)] += v;
                        }
                    }
                }
            }
        }
        let dl = pt.xl.component_mul(&zinvl);
        schur += &s.al * DMatrix::from_diagonal(&dl) * s.al.transpose();
        let scale = (0..m).map(|i| schur[(i, i)]).fold(0.0, f64::max).max(1e-300);
        let chol = match Cholesky::new(schur.clone()) {
            Some(c) => c,
            None => {
                let mut reg = schur.clone();
                for i in 0..m {
                    reg[(i, i)] += 1e-13 * scale;
                }
                match Cholesky::new(reg) {
                    Some(c) => c,
                    None => break,
                }
            }
        };

        // ΔX = sym(T + X 𝒜*(Δy) Z⁻¹) with T collecting everything else
        let direction = |t_b: &[CMatrix], t_l: &DVector<f64>| -> Direction {
            let rhs = &rp - s.apply(t_b, t_l);
            let dy = chol.solve(&rhs);
            let (atdy, atdyl) = s.adjoint(&dy);
            let dzb: Vec<CMatrix> = (0..s.dims.len()).map(|k| &rdb[k] - &atdy[k]).collect();
            let dzl = &rdl - &atdyl;
            let dxb: Vec<CMatrix> = (0..s.dims.len())
                .map(|k| hermitian_part(&(&t_b[k] + &pt.xb[k] * &atdy[k] * &zinv[k])))
                .collect();
            let dxl = t_l + pt.xl.component_mul(&atdyl).component_mul(&zinvl);
            Direction { dxb, dxl, dy, dzb, dzl }
        };
        let base_t = |sigma_mu: f64, corr: Option<&Direction>| -> (Vec<CMatrix>, DVector<f64>) {
            let tb = (0..s.dims.len())
                .map(|k| {
                    let mut t = &zinv[k] * C64::new(sigma_mu, 0.0) - &pt.xb[k] - &pt.xb[k] * &rdb[k] * &zinv[k];
                    if let Some(d) = corr {
                        t -= &d.dxb[k] * &d.dzb[k] * &zinv[k];
                    }
                    t
                })
                .collect();
            let mut tl = zinvl.map(|v| v * sigma_mu) - &pt.xl - pt.xl.component_mul(&rdl).component_mul(&zinvl);
            if let Some(d) = corr {
                tl -= d.dxl.component_mul(&d.dzl).component_mul(&zinvl);
            }
            (tb, tl)
        };
        let steps = |d: &Direction| -> (f64, f64) {
            let mut ap = max_step_lp(&pt.xl, &d.dxl);
            let mut ad = max_step_lp(&pt.zl, &d.dzl);
            for k in 0..s.dims.len() {
                ap = ap.min(max_step_psd(&pt.xb[k], &d.dxb[k]));
                ad = ad.min(max_step_psd(&pt.zb[k], &d.dzb[k]));
            }
            (ap, ad)
        };

        let (tb, tl) = base_t(0.0, None);
        let pred = direction(&tb, &tl);
        let (ap, ad) = steps(&pred);
        let (ap1, ad1) = (ap.min(1.0), ad.min(1.0));
        let mut xz_aff = 0.0;
        for k in 0..s.dims.len() {
            let x = &pt.xb[k] + &pred.dxb[k] * C64::new(ap1, 0.0);
            let z = &pt.zb[k] + &pred.dzb[k] * C64::new(ad1, 0.0);
            xz_aff += trace_product(&x, &z);
        }
        xz_aff += (&pt.xl + &pred.dxl * ap1).dot(&(&pt.zl + &pred.dzl * ad1));
        let sigma = (xz_aff / xz).clamp(0.0, 1.0).powi(3);

        let (tb, tl) = base_t(sigma * mu, Some(&pred));
        let d = direction(&tb, &tl);
        let (ap, ad) = steps(&d);
        let gamma = 0.9 + 0.09 * ap.min(ad).min(1.0);
        let ap = (gamma * ap).min(1.0);
        let ad = (gamma * ad).min(1.0);
        if !(ap > 0.0 && ad > 0.0) || !ap.is_finite() || !ad.is_finite() {
            break;
        }
        for k in 0..s.dims.len() {
            pt.xb[k] += &d.dxb[k] * C64::new(ap, 0.0);
            pt.xb[k] = hermitian_part(&pt.xb[k]);
            pt.zb[k] += &d.dzb[k] * C64::new(ad, 0.0);
            pt.zb[k] = hermitian_part(&pt.zb[k]);
        }
        pt.xl += &d.dxl * ap;
        pt.zl += &d.dzl * ad;
        pt.y += &d.dy * ad;
    }

    if status == SolveStatus::NumericalFailure {
        // keep the best iterate seen; a near-converged point is still useful
        if let Some((merit, p, res)) = best.take() {
            if merit <= settings.tol * 1e3 {
                status = SolveStatus::Optimal;
            }
            pt = p;
            [pres, dres, rgap] = res;
        }
    }

    // undo the row and objective scaling
    let k = s.obj_scale;
    let y: Vec<f64> = (0..m).map(|i| pt.y[i] * k / s.row_scale[i]).collect();
    let z_blocks: Vec<CMatrix> = pt.zb.iter().map(|z| z * C64::new(k, 0.0)).collect();
    let z_lp: Vec<f64> = pt.zl.iter().map(|z| z * k).collect();
    let primal_objective = s.objective(&pt.xb, &pt.xl) * k;
    let dual_objective = s.b.dot(&pt.y) * k;
    SdpSolution {
        status,
        x_blocks: pt.xb,
        x_lp: pt.xl.iter().copied().collect(),
        y,
        z_blocks,
        z_lp,
        primal_objective,
        dual_objective,
        iterations,
        primal_residual: pres,
        dual_residual: dres,
        relative_gap: rgap,
        solve_time_s: start.elapsed().as_secs_f64(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(a: &[&[f64]]) -> CMatrix {
        let d = a.len();
        CMatrix::from_fn(d, d, |i, j| C64::new(a[i][j], 0.0))
    }

    #[test]
    fn max_trace_is_largest_eigenvalue() {
        // min −Tr(CX) s.t. Tr X = 1
        let c = CMatrix::from_fn(3, 3, |i, j| match (i, j) {
            (0, 0) => C64::new(2.0, 0.0),
            (1, 1) => C64::new(1.0, 0.0),
            (2, 2) => C64::new(-1.0, 0.0),
            (0, 1) => C64::new(0.5, 0.5),
            (1, 0) => C64::new(0.5, -0.5),
            _ => C64::new(0.0, 0.0),
        });
        let p = BlockSdp {
            block_dims: vec![3],
            n_lp: 0,
            c_blocks: vec![(0, -c.clone())],
            c_lp: vec![],
            rows: vec![SdpRow { blocks: vec![(0, CMatrix::identity(3, 3))], lp: vec![], rhs: 1.0 }],
        };
        let sol = solve_block_sdp(&p, &SdpSettings::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        let (vals, _) = hermitian_eigen(&c);
        assert!((sol.primal_objective + vals[0]).abs() < 1e-9, "{}", sol.primal_objective);
        let (xv, _) = hermitian_eigen(&sol.x_blocks[0]);
        assert!(xv[1] / xv[0] < 1e-9);
        // Z = C_min − y I = −C − y I with y = −λ_max
        assert!((sol.y[0] + vals[0]).abs() < 1e-9);
    }

    #[test]
    fn lp_block_only() {
        // min x0 + 2 x1 s.t. x0 + x1 = 1 → x = (1, 0)
        let p = BlockSdp {
            block_dims: vec![],
            n_lp: 2,
            c_blocks: vec![],
            c_lp: vec![(0, 1.0), (1, 2.0)],
            rows: vec![SdpRow { blocks: vec![], lp: vec![(0, 1.0), (1, 1.0)], rhs: 1.0 }],
        };
        let sol = solve_block_sdp(&p, &SdpSettings::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.x_lp[0] - 1.0).abs() < 1e-9 && sol.x_lp[1].abs() < 1e-9);
        assert!((sol.y[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mixed_blocks_with_slack() {
        // min Tr X s.t. X_00 ≥ 1 (as X_00 − s = 1), X ⪰ 0 (2×2) → Tr X = 1
        let p = BlockSdp {
            block_dims: vec![2],
            n_lp: 1,
            c_blocks: vec![(0, CMatrix::identity(2, 2))],
            c_lp: vec![],
            rows: vec![SdpRow { blocks: vec![(0, real(&[&[1.0, 0.0], &[0.0, 0.0]]))], lp: vec![(0, -1.0)], rhs: 1.0 }],
        };
        let sol = solve_block_sdp(&p, &SdpSettings::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal_objective - 1.0).abs() < 1e-9);
        assert!((sol.dual_objective - 1.0).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasibility() {
        // Tr X = −1 with X ⪰ 0
        let p = BlockSdp {
            block_dims: vec![2],
            n_lp: 0,
            c_blocks: vec![(0, CMatrix::identity(2, 2))],
            c_lp: vec![],
            rows: vec![SdpRow { blocks: vec![(0, CMatrix::identity(2, 2))], lp: vec![], rhs: -1.0 }],
        };
        let sol = solve_block_sdp(&p, &SdpSettings::default());
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }
}
