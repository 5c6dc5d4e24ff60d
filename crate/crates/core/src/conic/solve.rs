use std::f64::consts::SQRT_2;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use super::embed::{hermitian_param_index, unembed_hermitian, unembed_vector};
use super::problem::{ConicProblem, Constraint, ConstraintId, LinExpr, Sense, Var, VarKind};
use super::DEFAULT_TOL;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Clone, Debug, Default)]
pub struct SolveStats {
    pub iterations: u32,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Largest constraint violation of the returned primal point, measured
    /// directly on the IR.
    pub max_violation: f64,
    pub solve_time_s: f64,
    /// Backend stopped at its relaxed tolerances.
    pub reduced_accuracy: bool,
}

/// Multiplier attached to one constraint.
#[derive(Clone, Debug)]
pub enum Dual {
    Scalar(f64),
    /// `(bound, rows...)` for a second-order cone.
    Cone(Vec<f64>),
    /// Hermitian dual matrix of a PSD block.
    Psd(CMatrix),
}

impl Dual {
    pub fn scalar(&self) -> f64 {
        match self {
            Dual::Scalar(v) => *v,
            _ => panic!("dual is not a scalar"),
        }
    }

    pub fn psd(&self) -> &CMatrix {
        match self {
            Dual::Psd(g) => g,
            _ => panic!("dual is not a PSD matrix"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub objective_value: f64,
    pub dual_objective_value: f64,
    pub stats: SolveStats,
    x: Vec<f64>,
    duals: Vec<Dual>,
}

impl SolveResult {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn primal(&self) -> &[f64] {
        &self.x
    }

    pub fn value(&self, e: &LinExpr) -> f64 {
        e.eval(&self.x)
    }

    pub fn scalar(&self, v: Var) -> f64 {
        assert_eq!(v.kind(), VarKind::Scalar);
        self.x[v.offset()]
    }

    pub fn vector(&self, v: Var) -> CVector {
        match v.kind() {
            VarKind::ComplexVector(n) => unembed_vector(&self.x[v.offset()..v.offset() + 2 * n]),
            _ => panic!("not a complex vector variable"),
        }
    }

    pub fn hermitian(&self, v: Var) -> CMatrix {
        match v.kind() {
            VarKind::Hermitian(d) => unembed_hermitian(&self.x[v.offset()..v.offset() + d * d], d),
            _ => panic!("not a Hermitian variable"),
        }
    }

    pub fn dual(&self, id: ConstraintId) -> &Dual {
        &self.duals[id.index()]
    }
}

#[derive(Clone, Debug)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: u32,
    pub verbose: bool,
    /// Shorter interior steps and tighter refinement of the KKT solves.
    /// Slower, but gets through badly scaled instances that stall otherwise.
    pub careful: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_iter: 200, verbose: false, careful: false }
    }
}

impl SolverSettings {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }

    pub fn careful(tol: f64) -> Self {
        Self { tol, careful: true, ..Self::default() }
    }
}

pub fn solve(problem: &ConicProblem, tol: f64) -> Result<SolveResult> {
    solve_with(problem, &SolverSettings::with_tol(tol))
}

struct Rows {
    ii: Vec<usize>,
    jj: Vec<usize>,
    vv: Vec<f64>,
    b: Vec<f64>,
}

impl Rows {
    /// Appends a row with slack `s = b - a·x`.
    fn push(&mut self, a: &[(usize, f64)], b: f64) {
        let r = self.b.len();
        for &(j, v) in a {
            if v != 0.0 {
                self.ii.push(r);
                self.jj.push(j);
                self.vv.push(v);
            }
        }
        self.b.push(b);
    }

    /// Row whose slack equals the affine expression `e`.
    fn push_slack(&mut self, e: &LinExpr) {
        let neg: Vec<(usize, f64)> = e.terms.iter().map(|&(j, v)| (j, -v)).collect();
        self.push(&neg, e.constant);
    }
}

/// Real and imaginary coordinates of `X_ij` as (index, coef) lists.
fn herm_entry(off: usize, d: usize, i: usize, j: usize) -> (Vec<(usize, f64)>, Vec<(usize, f64)>) {
    use std::cmp::Ordering::*;
    match i.cmp(&j) {
        Equal => (vec![(off + i, 1.0)], vec![]),
        Less => {
            let (r, m) = hermitian_param_index(d, i, j);
            (vec![(off + r, 1.0)], vec![(off + m, 1.0)])
        }
        Greater => {
            let (r, m) = hermitian_param_index(d, j, i);
            (vec![(off + r, 1.0)], vec![(off + m, -1.0)])
        }
    }
}

fn scaled(v: Vec<(usize, f64)>, s: f64) -> Vec<(usize, f64)> {
    v.into_iter().map(|(j, c)| (j, c * s)).collect()
}

/// Rows of `svec(E(X))` in the backend's packed upper-triangle order.
fn push_psd_rows(rows: &mut Rows, v: Var, d: usize) {
    let n = 2 * d;
    let off = v.offset();
    for c in 0..n {
        for r in 0..=c {
            let entry = match (r < d, c < d) {
                (true, true) => herm_entry(off, d, r, c).0,
                (false, false) => herm_entry(off, d, r - d, c - d).0,
                (true, false) => scaled(herm_entry(off, d, r, c - d).1, -1.0),
                (false, true) => unreachable!("lower triangle"),
            };
            let s = if r == c { 1.0 } else { SQRT_2 };
            // slack = svec entry = E_rc·s, so A row = -s·coef
            let a: Vec<(usize, f64)> = entry.into_iter().map(|(j, coef)| (j, -s * coef)).collect();
            rows.push(&a, 0.0);
        }
    }
}

fn psd_dual(z: &[f64], d: usize) -> CMatrix {
    let n = 2 * d;
    let mut zm = nalgebra::DMatrix::<f64>::zeros(n, n);
    let mut k = 0;
    for c in 0..n {
        for r in 0..=c {
            if r == c {
                zm[(r, c)] = z[k];
            } else {
                zm[(r, c)] = z[k] / SQRT_2;
                zm[(c, r)] = z[k] / SQRT_2;
            }
            k += 1;
        }
    }
    CMatrix::from_fn(d, d, |i, j| {
        C64::new(zm[(i, j)] + zm[(i + d, j + d)], zm[(i + d, j)] - zm[(i, j + d)])
    })
}

pub fn solve_with(problem: &ConicProblem, settings: &SolverSettings) -> Result<SolveResult> {
    problem.validate()?;
    let n = problem.num_real();
    let sign = match problem.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut q = vec![0.0; n];
    for &(j, c) in &problem.objective.terms {
        q[j] += sign * c;
    }

    let mut rows = Rows { ii: vec![], jj: vec![], vv: vec![], b: vec![] };
    let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
    let mut spans: Vec<(usize, usize)> = Vec::new();
    for (_, c) in &problem.constraints {
        let start = rows.b.len();
        match c {
            Constraint::Eq(e) => {
                rows.push(&e.terms, -e.constant);
                cones.push(SupportedConeT::ZeroConeT(1));
            }
            Constraint::Le(e) => {
                rows.push(&e.terms, -e.constant);
                cones.push(SupportedConeT::NonnegativeConeT(1));
            }
            Constraint::Soc { rows: r, bound } => {
                rows.push_slack(bound);
                for e in r {
                    rows.push_slack(e);
                }
                cones.push(SupportedConeT::SecondOrderConeT(r.len() + 1));
            }
            Constraint::Psd(v) => {
                let d = match v.kind() {
                    VarKind::Hermitian(d) => d,
                    _ => unreachable!("validated"),
                };
                push_psd_rows(&mut rows, *v, d);
                cones.push(SupportedConeT::PSDTriangleConeT(2 * d));
            }
        }
        spans.push((start, rows.b.len() - start));
    }

    let m = rows.b.len();
    let a = CscMatrix::new_from_triplets(m, n, rows.ii, rows.jj, rows.vv);
    let p = CscMatrix::<f64>::zeros((n, n));
    let mut backend = DefaultSettings {
        verbose: settings.verbose,
        max_iter: settings.max_iter,
        tol_gap_abs: settings.tol,
        tol_gap_rel: settings.tol,
        tol_feas: settings.tol,
        chordal_decomposition_enable: false,
        presolve_enable: false,
        ..DefaultSettings::default()
    };
    if settings.careful {
        backend.max_step_fraction = 0.9;
        backend.iterative_refinement_max_iter = 50;
        backend.iterative_refinement_reltol = 1e-14;
        backend.iterative_refinement_abstol = 1e-14;
    }
    let mut solver = DefaultSolver::new(&p, &q, &a, &rows.b, &cones, backend)
        .map_err(|e| Error::NumericalFailure(format!("conic backend setup: {e}")))?;
    solver.solve();
    let sol = &solver.solution;

    let (status, reduced) = match sol.status {
        SolverStatus::Solved => (SolveStatus::Optimal, false),
        SolverStatus::AlmostSolved => (SolveStatus::Optimal, true),
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            (SolveStatus::Infeasible, false)
        }
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
            (SolveStatus::Unbounded, false)
        }
        _ => (SolveStatus::NumericalFailure, false),
    };

    let x = sol.x.clone();
    let duals = problem
        .constraints
        .iter()
        .zip(&spans)
        .map(|((_, c), &(start, len))| {
            let z = &sol.z[start..start + len];
            match c {
                Constraint::Eq(_) | Constraint::Le(_) => Dual::Scalar(z[0]),
                Constraint::Soc { .. } => Dual::Cone(z.to_vec()),
                Constraint::Psd(v) => match v.kind() {
                    VarKind::Hermitian(d) => Dual::Psd(psd_dual(z, d)),
                    _ => unreachable!(),
                },
            }
        })
        .collect();

    let objective_value = problem.objective.eval(&x);
    let dual_objective_value = sign * sol.obj_val_dual + problem.objective.constant;
    let stats = SolveStats {
        iterations: sol.iterations,
        primal_residual: sol.r_prim,
        dual_residual: sol.r_dual,
        max_violation: if status == SolveStatus::Optimal { problem.max_violation(&x) } else { f64::NAN },
        solve_time_s: sol.solve_time,
        reduced_accuracy: reduced,
    };
    Ok(SolveResult { status, objective_value, dual_objective_value, stats, x, duals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{complex_gaussian, hermitian_eigen, trace_product};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn one_variable_lp() {
        let mut p = ConicProblem::new(Sense::Minimize);
        let x = p.scalar("x");
        p.set_objective(Sense::Minimize, x.expr());
        p.add_ge("lb", x.expr() - 1.0);
        let r = solve(&p, 1e-8).unwrap();
        assert!(r.is_optimal());
        assert!((r.objective_value - 1.0).abs() < 1e-7);
        assert!((r.scalar(x) - 1.0).abs() < 1e-7);
    }

    #[test]
    fn soc_norm_of_constant() {
        let mut p = ConicProblem::new(Sense::Minimize);
        let t = p.scalar("t");
        p.set_objective(Sense::Minimize, t.expr());
        p.add_soc("n", vec![LinExpr::constant(3.0), LinExpr::constant(4.0)], t.expr());
        let r = solve(&p, 1e-8).unwrap();
        assert!(r.is_optimal());
        assert!((r.scalar(t) - 5.0).abs() < 1e-7);
        assert!((r.objective_value - r.dual_objective_value).abs() < 1e-7);
    }

    #[test]
    fn infeasible_and_unbounded_are_statuses() {
        let mut p = ConicProblem::new(Sense::Minimize);
        let x = p.scalar("x");
        p.set_objective(Sense::Minimize, x.expr());
        p.add_ge("lb", x.expr() - 2.0);
        p.add_le("ub", x.expr() - 1.0);
        assert_eq!(solve(&p, 1e-8).unwrap().status, SolveStatus::Infeasible);

        let mut p = ConicProblem::new(Sense::Maximize);
        let x = p.scalar("x");
        p.set_objective(Sense::Maximize, x.expr());
        p.add_ge("lb", x.expr());
        assert_eq!(solve(&p, 1e-8).unwrap().status, SolveStatus::Unbounded);
    }

    #[test]
    fn max_trace_gives_lambda_max_and_dual() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for d in [1usize, 2, 3, 5] {
            let v = complex_gaussian(&mut rng, d * d);
            let b = CMatrix::from_fn(d, d, |i, j| v[d * i + j]);
            let c = &b + b.adjoint();
            let mut p = ConicProblem::new(Sense::Maximize);
            let x = p.hermitian("X", d);
            p.set_objective(Sense::Maximize, x.trace_with(&c));
            let norm = p.add_eq("unit_trace", x.trace() - 1.0);
            let psd = p.add_psd("psd", x);
            let r = solve(&p, 1e-9).unwrap();
            assert!(r.is_optimal());
            let (vals, _) = hermitian_eigen(&c);
            assert!((r.objective_value - vals[0]).abs() < 1e-7, "d={d}");
            let xm = r.hermitian(x);
            assert!((trace_product(&c, &xm) - vals[0]).abs() < 1e-7);
            // stationarity for the max form: C = y I - G
            let y = r.dual(norm).scalar();
            let g = r.dual(psd).psd().clone();
            let resid = &c - CMatrix::identity(d, d) * C64::new(y, 0.0) + &g;
            assert!(resid.norm() < 1e-6, "stationarity residual {}", resid.norm());
            assert!((&g * &xm).norm() < 1e-6);
        }
    }
}
