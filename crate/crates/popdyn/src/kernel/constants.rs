//! Default numerical knobs. Experiments override these per run.

/// Default Euler step for diffusions.
pub const DEFAULT_STEP: f64 = 1e-3;
/// Event cap per birth-death trajectory before flagging explosion.
pub const EVENT_CAP: u64 = 10_000_000;
/// Partial sums above this are read as divergence.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;
/// Slack on series ratio / power-law verdicts.
pub const SERIES_DELTA: f64 = 0.02;
/// A state at or below this is absorbed.
pub const ABSORPTION_THRESHOLD: f64 = 1e-12;
/// Relative tolerance for adaptive quadrature.
pub const QUAD_REL_TOL: f64 = 1e-9;
/// Relative tolerance for the Laplace-exponent ODE.
pub const ODE_REL_TOL: f64 = 1e-12;
/// Default small-jump truncation for infinite-activity measures.
pub const DEFAULT_EPSILON: f64 = 0.01;
/// Fraction of a horizon discarded as burn-in for stationary statistics.
pub const BURN_IN_FRACTION: f64 = 0.2;
/// Fraction of a horizon used as the regression tail window.
pub const TAIL_WINDOW_FRACTION: f64 = 0.4;
/// Cap on rejection attempts for conditioned mutation kernels.
pub const REJECTION_CAP: usize = 100;

/// Bundle of the constants above, for experiments that carry their own copy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub step: f64,
    pub event_cap: u64,
    pub divergence_threshold: f64,
    pub series_delta: f64,
    pub absorption_threshold: f64,
    pub quad_rel_tol: f64,
    pub ode_rel_tol: f64,
    pub epsilon: f64,
    pub burn_in_fraction: f64,
    pub tail_window_fraction: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            step: DEFAULT_STEP,
            event_cap: EVENT_CAP,
            divergence_threshold: DIVERGENCE_THRESHOLD,
            series_delta: SERIES_DELTA,
            absorption_threshold: ABSORPTION_THRESHOLD,
            quad_rel_tol: QUAD_REL_TOL,
            ode_rel_tol: ODE_REL_TOL,
            epsilon: DEFAULT_EPSILON,
            burn_in_fraction: BURN_IN_FRACTION,
            tail_window_fraction: TAIL_WINDOW_FRACTION,
        }
    }
}
