//! Solver-agnostic conic program IR.
//!
//! Problems are built from real scalars, complex vectors and Hermitian
//! matrices. Every variable is stored as a contiguous block of real
//! coordinates:
//!
//! * scalar: one coordinate.
//! * complex vector of length `n`: `2n` coordinates, interleaved as
//!   `(Re v_0, Im v_0, Re v_1, Im v_1, ...)`. For example `(1+i, 2)` is
//!   stored as `(1, 1, 2, 0)`.
//! * Hermitian `d×d` matrix: `d²` coordinates. The first `d` are the
//!   diagonal entries `X_00 .. X_{d-1,d-1}`; then, for each pair `i < j`
//!   in row-major order with running pair index `p`, `Re X_ij` sits at
//!   `d + 2p` and `Im X_ij` at `d + 2p + 1`.
//!
//! A Hermitian PSD constraint `X ⪰ 0` is passed to the backend through the
//! real-symmetric embedding
//!
//! ```text
//!     E(X) = [[Re X, -Im X],
//!             [Im X,  Re X]]      (2d × 2d)
//! ```
//!
//! which is PSD exactly when `X` is. Its dual is folded back into a
//! Hermitian matrix `G = (Z11 + Z22) + i (Z21 - Z12)` so that
//! `<Z, E(X)> = Re Tr(G X)`.
//!
//! Constraint conventions: [`ConicProblem::add_eq`] means `e = 0`,
//! [`ConicProblem::add_le`] means `e ≤ 0`, [`ConicProblem::add_soc`] means
//! `‖rows‖₂ ≤ bound`. Duals follow the Lagrangian
//! `L = c(x) - Σ y_i e_i(x) ...` of the *minimization* form, rewritten in the
//! sense of the original objective: for a maximization problem, inequality
//! multipliers are nonnegative and the stationarity condition reads
//! `∇c = Σ λ_i ∇e_i - Σ (SOC terms) - G`.

mod embed;
mod problem;
mod sdp;
mod solve;

pub use embed::{
    embed_hermitian, embed_vector, hermitian_param_index, real_symmetric_form, unembed_hermitian,
    unembed_vector,
};
pub use problem::{ConicProblem, Constraint, ConstraintId, LinExpr, Sense, Var, VarKind};
pub use sdp::{solve_block_sdp, BlockSdp, SdpRow, SdpSettings, SdpSolution};
pub use solve::{solve, solve_with, Dual, SolveResult, SolveStats, SolveStatus, SolverSettings};

/// Default primal/dual feasibility and gap tolerance.
pub const DEFAULT_TOL: f64 = 1e-8;
