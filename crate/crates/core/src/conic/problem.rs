use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use super::embed::hermitian_param_index;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    Scalar,
    ComplexVector(usize),
    Hermitian(usize),
}

impl VarKind {
    pub fn real_dim(self) -> usize {
        match self {
            VarKind::Scalar => 1,
            VarKind::ComplexVector(n) => 2 * n,
            VarKind::Hermitian(d) => d * d,
        }
    }
}

/// Handle to a declared variable. Cheap to copy; expressions are built from
/// handles without borrowing the problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var {
    pub(crate) id: usize,
    pub(crate) kind: VarKind,
    pub(crate) offset: usize,
}

/// Affine functional `Σ coef·x[idx] + constant` over the real coordinates.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn term(idx: usize, coef: f64) -> Self {
        Self { terms: vec![(idx, coef)], constant: 0.0 }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>()
    }

    /// Merges duplicate indices and drops exact zeros.
    pub fn compact(&self) -> Self {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for &(i, c) in &self.terms {
            *acc.entry(i).or_insert(0.0) += c;
        }
        Self {
            terms: acc.into_iter().filter(|&(_, c)| c != 0.0).collect(),
            constant: self.constant,
        }
    }

    fn max_index(&self) -> Option<usize> {
        self.terms.iter().map(|&(i, _)| i).max()
    }
}

impl From<f64> for LinExpr {
    fn from(c: f64) -> Self {
        LinExpr::constant(c)
    }
}

impl Add for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: LinExpr) -> LinExpr {
        self += rhs;
        self
    }
}

impl AddAssign for LinExpr {
    fn add_assign(&mut self, rhs: LinExpr) {
        self.terms.extend(rhs.terms);
        self.constant += rhs.constant;
    }
}

impl Add<f64> for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: f64) -> LinExpr {
        self.constant += rhs;
        self
    }
}

impl Sub for LinExpr {
    type Output = LinExpr;
    fn sub(self, rhs: LinExpr) -> LinExpr {
        self + (-rhs)
    }
}

impl Sub<f64> for LinExpr {
    type Output = LinExpr;
    fn sub(self, rhs: f64) -> LinExpr {
        self + (-rhs)
    }
}

impl Mul<f64> for LinExpr {
    type Output = LinExpr;
    fn mul(mut self, rhs: f64) -> LinExpr {
        for t in &mut self.terms {
            t.1 *= rhs;
        }
        self.constant *= rhs;
        self
    }
}

impl Neg for LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self * -1.0
    }
}

impl std::iter::Sum for LinExpr {
    fn sum<I: Iterator<Item = LinExpr>>(iter: I) -> LinExpr {
        iter.fold(LinExpr::zero(), |a, b| a + b)
    }
}

impl Var {
    pub fn kind(&self) -> VarKind {
        self.kind
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    /// The value of a scalar variable.
    pub fn expr(self) -> LinExpr {
        assert_eq!(self.kind, VarKind::Scalar, "expr() needs a scalar variable");
        LinExpr::term(self.offset, 1.0)
    }

    fn vec_len(self) -> usize {
        match self.kind {
            VarKind::ComplexVector(n) => n,
            _ => panic!("expected a complex vector variable"),
        }
    }

    pub fn re(self, i: usize) -> LinExpr {
        assert!(i < self.vec_len());
        LinExpr::term(self.offset + 2 * i, 1.0)
    }

    pub fn im(self, i: usize) -> LinExpr {
        assert!(i < self.vec_len());
        LinExpr::term(self.offset + 2 * i + 1, 1.0)
    }

    /// Every real coordinate of a complex vector, as expressions; handy for
    /// `‖w‖` rows of a cone.
    pub fn coords(self) -> Vec<LinExpr> {
        let n = self.vec_len();
        (0..2 * n).map(|k| LinExpr::term(self.offset + k, 1.0)).collect()
    }

    /// Real and imaginary parts of `Σ_j c_j w_j` for a complex vector `w`.
    pub fn row_product(self, c: &CVector) -> (LinExpr, LinExpr) {
        let n = self.vec_len();
        assert_eq!(c.len(), n, "row_product dimension mismatch");
        let mut re = Vec::with_capacity(2 * n);
        let mut im = Vec::with_capacity(2 * n);
        for (j, cj) in c.iter().enumerate() {
            let (r, m) = (self.offset + 2 * j, self.offset + 2 * j + 1);
            // (a+ib)(x+iy) = (ax - by) + i(ay + bx)
            re.push((r, cj.re));
            re.push((m, -cj.im));
            im.push((r, cj.im));
            im.push((m, cj.re));
        }
        (LinExpr { terms: re, constant: 0.0 }, LinExpr { terms: im, constant: 0.0 })
    }

    fn herm_dim(self) -> usize {
        match self.kind {
            VarKind::Hermitian(d) => d,
            _ => panic!("expected a Hermitian variable"),
        }
    }

    /// `Re Tr(A X)` for a Hermitian variable `X` and Hermitian `A`.
    pub fn trace_with(self, a: &CMatrix) -> LinExpr {
        let d = self.herm_dim();
        assert_eq!(a.shape(), (d, d), "trace_with dimension mismatch");
        let mut terms = Vec::with_capacity(d * d);
        for i in 0..d {
            terms.push((self.offset + i, a[(i, i)].re));
            for j in i + 1..d {
                // A_ij X_ji + A_ji X_ij = 2 Re(A_ij conj(X_ij)) for Hermitian A, X
                let (r, m) = hermitian_param_index(d, i, j);
                let aij = a[(i, j)];
                terms.push((self.offset + r, 2.0 * aij.re));
                terms.push((self.offset + m, 2.0 * aij.im));
            }
        }
        LinExpr { terms, constant: 0.0 }
    }

    pub fn trace(self) -> LinExpr {
        let d = self.herm_dim();
        LinExpr { terms: (0..d).map(|i| (self.offset + i, 1.0)).collect(), constant: 0.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConstraintId(pub(crate) usize);

impl ConstraintId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
pub enum Constraint {
    /// `expr = 0`
    Eq(LinExpr),
    /// `expr ≤ 0`
    Le(LinExpr),
    /// `‖rows‖₂ ≤ bound`
    Soc { rows: Vec<LinExpr>, bound: LinExpr },
    /// Hermitian variable is PSD.
    Psd(Var),
}

#[derive(Clone, Debug)]
pub(crate) struct VarInfo {
    pub name: String,
    pub var: Var,
}

/// A conic program over real, complex-vector and Hermitian variables.
#[derive(Clone, Debug)]
pub struct ConicProblem {
    pub(crate) sense: Sense,
    pub(crate) vars: Vec<VarInfo>,
    pub(crate) n_real: usize,
    pub(crate) objective: LinExpr,
    pub(crate) constraints: Vec<(String, Constraint)>,
}

impl Default for ConicProblem {
    fn default() -> Self {
        Self::new(Sense::Minimize)
    }
}

impl ConicProblem {
    pub fn new(sense: Sense) -> Self {
        Self { sense, vars: Vec::new(), n_real: 0, objective: LinExpr::zero(), constraints: Vec::new() }
    }

    fn declare(&mut self, name: &str, kind: VarKind) -> Var {
        let var = Var { id: self.vars.len(), kind, offset: self.n_real };
        self.n_real += kind.real_dim();
        self.vars.push(VarInfo { name: name.to_string(), var });
        var
    }

    pub fn scalar(&mut self, name: &str) -> Var {
        self.declare(name, VarKind::Scalar)
    }

    pub fn complex_vector(&mut self, name: &str, n: usize) -> Var {
        self.declare(name, VarKind::ComplexVector(n))
    }

    pub fn hermitian(&mut self, name: &str, d: usize) -> Var {
        self.declare(name, VarKind::Hermitian(d))
    }

    pub fn set_objective(&mut self, sense: Sense, objective: LinExpr) {
        self.sense = sense;
        self.objective = objective;
    }

    fn push(&mut self, name: &str, c: Constraint) -> ConstraintId {
        self.constraints.push((name.to_string(), c));
        ConstraintId(self.constraints.len() - 1)
    }

    pub fn add_eq(&mut self, name: &str, expr: LinExpr) -> ConstraintId {
        self.push(name, Constraint::Eq(expr))
    }

    pub fn add_le(&mut self, name: &str, expr: LinExpr) -> ConstraintId {
        self.push(name, Constraint::Le(expr))
    }

    /// `expr ≥ 0`; stored as `-expr ≤ 0`.
    pub fn add_ge(&mut self, name: &str, expr: LinExpr) -> ConstraintId {
        self.push(name, Constraint::Le(-expr))
    }

    pub fn add_soc(&mut self, name: &str, rows: Vec<LinExpr>, bound: LinExpr) -> ConstraintId {
        self.push(name, Constraint::Soc { rows, bound })
    }

    /// Rotated cone `‖x‖² ≤ y·z` with `y, z ≥ 0`, as `‖[2x, y − z]‖ ≤ y + z`.
    pub fn add_rotated_soc(&mut self, name: &str, x: Vec<LinExpr>, y: LinExpr, z: LinExpr) -> ConstraintId {
        let mut rows: Vec<LinExpr> = x.into_iter().map(|e| e * 2.0).collect();
        rows.push(y.clone() - z.clone());
        self.add_soc(name, rows, y + z)
    }

    pub fn add_psd(&mut self, name: &str, var: Var) -> ConstraintId {
        self.push(name, Constraint::Psd(var))
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn objective(&self) -> &LinExpr {
        &self.objective
    }

    pub fn num_variables(&self) -> usize {
        self.vars.len()
    }

    pub fn num_real(&self) -> usize {
        self.n_real
    }

    pub fn variables(&self) -> impl Iterator<Item = (&str, Var)> {
        self.vars.iter().map(|v| (v.name.as_str(), v.var))
    }

    pub fn constraints(&self) -> impl Iterator<Item = (&str, &Constraint)> {
        self.constraints.iter().map(|(n, c)| (n.as_str(), c))
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Number of constraints whose name starts with `prefix`.
    pub fn count_named(&self, prefix: &str) -> usize {
        self.constraints.iter().filter(|(n, _)| n.starts_with(prefix)).count()
    }

    pub fn constraint(&self, id: ConstraintId) -> &Constraint {
        &self.constraints[id.0].1
    }

    /// Checks that every index is in range and PSD blocks are Hermitian.
    pub fn validate(&self) -> Result<()> {
        let check = |e: &LinExpr, what: &str| -> Result<()> {
            match e.max_index() {
                Some(i) if i >= self.n_real => Err(Error::InvalidArgument(format!(
                    "{what} references coordinate {i} but only {} exist",
                    self.n_real
                ))),
                _ if !e.constant.is_finite() || e.terms.iter().any(|t| !t.1.is_finite()) => {
                    Err(Error::InvalidArgument(format!("{what} has non-finite coefficients")))
                }
                _ => Ok(()),
            }
        };
        check(&self.objective, "objective")?;
        for (name, c) in &self.constraints {
            match c {
                Constraint::Eq(e) | Constraint::Le(e) => check(e, name)?,
                Constraint::Soc { rows, bound } => {
                    if rows.is_empty() {
                        return Err(Error::InvalidArgument(format!("cone {name} has no rows")));
                    }
                    check(bound, name)?;
                    for r in rows {
                        check(r, name)?;
                    }
                }
                Constraint::Psd(v) => {
                    if !matches!(v.kind, VarKind::Hermitian(_)) || v.id >= self.vars.len() {
                        return Err(Error::InvalidArgument(format!(
                            "PSD constraint {name} needs a declared Hermitian variable"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Largest violation of any constraint at the real point `x`; PSD
    /// constraints report the negated smallest eigenvalue.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (_, c) in &self.constraints {
            let v = match c {
                Constraint::Eq(e) => e.eval(x).abs(),
                Constraint::Le(e) => e.eval(x).max(0.0),
                Constraint::Soc { rows, bound } => {
                    let n = rows.iter().map(|r| r.eval(x).powi(2)).sum::<f64>().sqrt();
                    (n - bound.eval(x)).max(0.0)
                }
                Constraint::Psd(v) => {
                    let d = match v.kind {
                        VarKind::Hermitian(d) => d,
                        _ => unreachable!(),
                    };
                    let m = super::embed::unembed_hermitian(&x[v.offset..v.offset + d * d], d);
                    let (vals, _) = crate::linalg::hermitian_eigen(&m);
                    (-vals[d - 1]).max(0.0)
                }
            };
            worst = worst.max(v);
        }
        worst
    }
}

fn write_expr(f: &mut fmt::Formatter<'_>, e: &LinExpr) -> fmt::Result {
    write!(f, "{:e}", e.constant)?;
    for (i, c) in &e.compact().terms {
        write!(f, " {i}:{c:e}")?;
    }
    Ok(())
}

/// Line-oriented text dump for debugging.
///
/// ```text
/// sense max|min
/// var <name> scalar|cvec <n>|herm <d> @<offset>
/// objective <const> <idx>:<coef> ...
/// eq|le <name> <const> <idx>:<coef> ...
/// soc <name> <rows>
///   bound <const> <idx>:<coef> ...
///   row <const> <idx>:<coef> ...
/// psd <name> <var>
/// ```
impl fmt::Display for ConicProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sense = match self.sense {
            Sense::Minimize => "min",
            Sense::Maximize => "max",
        };
        writeln!(f, "sense {sense}")?;
        for v in &self.vars {
            let kind = match v.var.kind {
                VarKind::Scalar => "scalar".to_string(),
                VarKind::ComplexVector(n) => format!("cvec {n}"),
                VarKind::Hermitian(d) => format!("herm {d}"),
            };
            writeln!(f, "var {} {kind} @{}", v.name, v.var.offset)?;
        }
        write!(f, "objective ")?;
        write_expr(f, &self.objective)?;
        writeln!(f)?;
        for (name, c) in &self.constraints {
            match c {
                Constraint::Eq(e) | Constraint::Le(e) => {
                    let tag = if matches!(c, Constraint::Eq(_)) { "eq" } else { "le" };
                    write!(f, "{tag} {name} ")?;
                    write_expr(f, e)?;
                    writeln!(f)?;
                }
                Constraint::Soc { rows, bound } => {
                    writeln!(f, "soc {name} {}", rows.len())?;
                    write!(f, "  bound ")?;
                    write_expr(f, bound)?;
                    writeln!(f)?;
                    for r in rows {
                        write!(f, "  row ")?;
                        write_expr(f, r)?;
                        writeln!(f)?;
                    }
                }
                Constraint::Psd(v) => writeln!(f, "psd {name} {}", self.vars[v.id].name)?,
            }
        }
        Ok(())
    }
}
