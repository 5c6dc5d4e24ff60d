//! The dense block SDP interior-point solver on a toy problem:
//! `max Tr(C X)` s.t. `Tr(X) = 1`, `X ⪰ 0`, whose value is `λ_max(C)`
//! and whose optimum is the rank-one principal projector.

use hetnet_secrecy::conic::{solve_block_sdp, BlockSdp, SdpRow, SdpSettings};
use hetnet_secrecy::linalg::{hermitian_eigen, CMatrix, C64};
use hetnet_secrecy::stb_jmf::verify_rank_one;

fn main() {
    let c = CMatrix::from_fn(3, 3, |i, j| match (i, j) {
        (0, 0) => C64::new(2.0, 0.0),
        (1, 1) => C64::new(1.0, 0.0),
        (2, 2) => C64::new(-1.0, 0.0),
        (0, 1) => C64::new(0.5, 0.5),
        (1, 0) => C64::new(0.5, -0.5),
        _ => C64::new(0.0, 0.0),
    });
    // the solver minimizes, so negate C
    let sdp = BlockSdp {
        block_dims: vec![3],
        n_lp: 0,
        c_blocks: vec![(0, -c.clone())],
        c_lp: vec![],
        rows: vec![SdpRow { blocks: vec![(0, CMatrix::identity(3, 3))], lp: vec![], rhs: 1.0 }],
    };
    let sol = solve_block_sdp(&sdp, &SdpSettings::default());
    let (vals, _) = hermitian_eigen(&c);
    let (ratio, rank_one) = verify_rank_one(&sol.x_blocks[0], 1e-6);
    println!("status       {:?} after {} iterations", sol.status, sol.iterations);
    println!("Tr(C X)      {:.10}", -sol.primal_objective);
    println!("λ_max(C)     {:.10}", vals[0]);
    println!("λ₂/λ₁ of X   {ratio:.2e} (rank one: {rank_one})");
    println!("residuals    primal {:.1e}  dual {:.1e}  gap {:.1e}", sol.primal_residual, sol.dual_residual, sol.relative_gap);
}
