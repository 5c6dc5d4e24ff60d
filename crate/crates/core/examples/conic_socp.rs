//! Builds a small complex SOCP in the solver-agnostic IR and solves it:
//! `max Re(h w)` s.t. `‖w‖ ≤ 1`,
//! `Im(h w) = 0`. The optimum is `‖h‖` at `w = h̄/‖h‖`.

use hetnet_secrecy::conic::{self, ConicProblem, LinExpr, Sense};
use hetnet_secrecy::linalg::{CVector, C64};

fn main() -> hetnet_secrecy::Result<()> {
    let h = CVector::from_vec(vec![C64::new(1.0, 2.0), C64::new(-0.5, 0.3), C64::new(0.0, -1.0)]);

    let mut p = ConicProblem::new(Sense::Maximize);
    let w = p.complex_vector("w", 3);
    let (re, im) = w.row_product(&h);
    p.set_objective(Sense::Maximize, re);
    p.add_eq("phase", im);
    p.add_soc("power", w.coords(), LinExpr::constant(1.0));

    let r = conic::solve(&p, conic::DEFAULT_TOL)?;
    println!("status    {:?}", r.status);
    println!("objective {:.10}", r.objective_value);
    println!("‖h‖       {:.10}", h.norm());
    for (i, x) in r.vector(w).iter().enumerate() {
        println!("w[{i}]      {x:.6}");
    }
    println!("max constraint violation {:.2e}", p.max_violation(r.primal()));
    Ok(())
}
