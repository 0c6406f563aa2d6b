//! Floating-point evaluation, sampling oracles and the Ricci-flow grid
//! integrator.

pub mod eval;
pub mod ricci;
pub mod sample;

pub use eval::{eval_point, EvalError, Point, Poly, Realization};
pub use ricci::{simulate_ricci, GridState, QSample, RicciReport, RicciSummary};
pub use sample::{
    fd_crosscheck, fd_crosscheck_partial, random_zero_test, NumericEvidence, NumericVerdict, SamplePlan, Witness,
};
