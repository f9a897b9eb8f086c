//! Full-span log-linear modeling of discrete joint distributions.
//!
//! The model family places one coefficient on every interaction pattern of a
//! mixed-radix variable set (the complete +-1 product basis), and the learner
//! greedily appends, adjusts, or removes single coefficients using
//! closed-form cost changes under an MDL objective: KL(data || model) plus a
//! per-parameter description-length penalty. A fast separable transform keeps
//! each greedy sweep at O(|X| log |X|) for binary spaces.
//!
//! Module map:
//! - [`space`]: mixed-radix index arithmetic, dense tables, datasets.
//! - [`basis`]: per-variable +-1 bases and the separable dual transform.
//! - [`model`]: sparse coefficients with an incrementally maintained density.
//! - [`cost`]: the MDL objective and closed-form single-move deltas.
//! - [`learner`]: the greedy fit loop with lower-bound pruning.
//! - [`bm`]: pairwise Boltzmann machine baselines (exact and PCD trainers).
//! - [`generators`]: synthetic targets (Ising grids, random Bayes nets) and
//!   exact samplers.

pub mod basis;
pub mod bm;
pub mod cost;
pub mod error;
pub mod generators;
pub mod learner;
pub mod model;
pub mod space;

mod format;
mod lbfgs;
mod numeric;

pub use basis::{
    bases_for, brute_force_dual, dual_transform, dual_transform_into, fast_wht_inplace,
    DualTable, LocalBasis, WHT_MIN_CARD,
};
pub use bm::{
    exact_kl_gradient, fit_di, fit_di_distribution, fit_pcd, BmFit, BmParams, BmTracePoint,
    DiConfig, Moments, PcdConfig,
};
pub use cost::{
    delta_adjust, delta_append, delta_remove, kl_divergence, lower_bound_append, CandidateDelta,
    CandidateKind, RegularizerTable,
};
pub use error::{Error, Result};
pub use generators::{sample, BayesNetSpec, IsingGridSpec, ParentSchedule, TruthSpec};
pub use learner::{
    fit, fit_distribution, model_cost, scan_candidates, FitConfig, FitStatus, FitTrace,
    TraceRecord,
};
pub use model::{ModelState, SparseTheta};
pub use space::{Dataset, DenseTable, TableKind, VariableSpec};
