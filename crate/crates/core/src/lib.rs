//! Convex-hull relaxation volumes of `f = x1 x2 x3` on nonnegative boxes, and
//! volume-optimal branching decisions for spatial branch-and-bound.
//!
//! Bounds are relabeled into Ω order ([`bounds::normalize`]) before any
//! formula is applied; decisions carry both the Ω label and the caller's
//! label. The [`oracle`] module recomputes volumes and minimizers without the
//! closed forms, and [`verify`] runs the full invariant suite against it.

pub mod bounds;
pub mod branching;
pub mod error;
pub mod heuristics;
pub mod instance;
pub mod oracle;
pub mod pieces;
pub mod verify;
pub mod volume;

pub use bounds::{classify_case, normalize, CaseId, OmegaBox, RawBox, Var};
pub use branching::{
    argmin_convex, minimizer_fraction_bounds, optimal_point, optimal_point_x1, optimal_point_x23,
    q_points, rank_variables, tv_profile, BranchDecision, Candidate, FractionBounds, QPoints,
    VariableRanking,
};
pub use error::{Error, Result};
pub use heuristics::{heuristic_point, regret, solver_profiles, HeuristicParams, Solver};
pub use volume::{child_volumes, hull_volume, total_volume, ChildVolumes};
