//! Sampling designs for simultaneous kriging prediction over finite
//! candidate sets.
//!
//! The crate computes designs that are optimal for predicting a correlated
//! random field at *all* unsampled candidate locations at once. Four design
//! criteria are supported:
//!
//! * **GV** — the generalized variance, i.e. the determinant of the kriging
//!   covariance matrix of the prediction errors (stored as a
//!   log-determinant);
//! * **G** — the maximum kriging variance;
//! * **V** — the average kriging variance;
//! * **MES** — maximum entropy sampling, the log-determinant of the design
//!   covariance block.
//!
//! The distinguishing machinery is the incremental construction in
//! [`incremental`]: the quality of adding `l` points to an existing design
//! can be scored from an `l x l` block alone, so increment evaluation cost
//! does not depend on the number of prediction sites. [`search`] builds
//! exchange/simulated-annealing and incremental–decremental optimizers on
//! top, and [`tasks`] exposes everything as CLI tasks with JSON/CSV output.
//!
//! See the crate examples for a runnable tour: grid optimization,
//! incremental construction, efficiency tables, variance maps, station
//! reduction and the built-in validation suite.

pub mod bessel;
pub mod covariance;
pub mod criteria;
pub mod design_space;
pub mod error;
pub mod incremental;
pub mod kriging;
pub mod search;

pub use covariance::{cov_matrix, effective_distance, matern_corr, Anisotropy, CovModel};
pub use criteria::{
    g_value, gv_value, mes_value, relative_efficiency, v_value, CriterionKind, CriterionValue,
};
pub use design_space::{
    basis_matrix, complement, load_candidates, make_grid, CandidateSet, Design, TrendBasis,
};
pub use error::{KrigError, Result};
pub use incremental::{KrigingCovBlocks, StageState};
pub use kriging::{KrigingSystem, KrigingVariant, OkParts};
pub use search::{
    anneal_exchange, evaluate_design, exhaustive_optimal, incr_decr_optimize, select_increment,
    AnnealParams, ExhaustiveOutcome, IncrDecrParams, IncrementObjective, Instance, SearchConfig,
    SearchResult, StartMode,
};
