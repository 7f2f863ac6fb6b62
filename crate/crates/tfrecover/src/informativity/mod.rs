//! Recovery of transfer-function values and derivatives from time-domain
//! data via tolerance-based informativity checks on trajectory windows.
//!
//! The pipeline: stack input/output Hankel matrices of short windows
//! ([`build_gn`]), orthogonalize each window once ([`orth_basis`]), test
//! whether the data pins down `H(σ)` at each requested point
//! ([`check_informativity`]), solve a small least-squares problem per
//! passing window ([`solve_window`]), and average the lowest-residual
//! estimates while recording a data-only error indicator ([`recover`]).
//! When the system order is unknown, [`adapt_order`] grows the working
//! depth until the indicator is acceptable.

mod checks;
mod hankel;
mod recover;

pub use checks::{
    check_hermite_existence, check_informativity, check_informativity_direct, moment_vectors,
    orth_basis, solve_window, solve_window_deriv, InformativityCheck, MomentVectors, OrthBasis,
    Tolerances,
};
pub use hankel::{build_gn, build_hankel, HankelStack};
pub use recover::{
    adapt_order, recover, AdaptResult, AttemptSummary, PlanTemplate, RecoveryResult,
    WindowEstimate, WindowPlan,
};
