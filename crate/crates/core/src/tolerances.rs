//! Numerical tolerances shared by the library and its test suites.

/// Relative tolerance for weight primitives computed by quadrature.
pub const PRIMITIVE_REL: f64 = 1e-10;
/// Absolute floor guarding quadrature against underflow.
pub const QUAD_ABS_FLOOR: f64 = 1e-300;
/// Relative tolerance used by the Gauss-Kronrod integrator for profiles.
pub const PROFILE_REL: f64 = 1e-11;
/// Maximal number of subintervals in adaptive quadrature.
pub const QUAD_MAX_SUBDIV: usize = 4000;
/// Relative tolerance for measure comparisons in equimeasurability.
pub const MEASURE_REL: f64 = 1e-12;
/// Relative tolerance for inverting numeric bijections.
pub const INVERT_REL: f64 = 1e-12;
/// Iteration cap for monotone bisection.
pub const BISECTION_CAP: usize = 200;
/// Slack allowed in monotonicity probes.
pub const MONOTONE_SLACK: f64 = 1e-12;

/// Duality identity: relative discrepancy between the two sides.
pub const DUALITY_REL: f64 = 1e-10;
/// Agreement required between candidate-based operator-norm estimates.
pub const NORM_DUALITY_REL: f64 = 0.05;
/// Slack applied to constant brackets derived from proofs.
pub const BAND_REL: f64 = 1e-9;
/// Inequality suites: violations beyond this relative size count.
pub const INEQUALITY_REL: f64 = 1e-10;
/// Collapse of the sandwich when the supremum weight is nonincreasing.
pub const SANDWICH_EQ_REL: f64 = 1e-6;
/// Ordering slack on the sandwich when it does not collapse.
pub const SANDWICH_ORDER_REL: f64 = 1e-8;
/// Empirical agreement band for the K-functional formula.
pub const K_BAND: (f64, f64) = (0.25, 4.0);
/// Agreement band for the associate-norm characterization check.
pub const CHAR_BAND: (f64, f64) = (0.25, 4.0);
/// Largest accepted iteration band constant.
pub const ITERATION_BAND_MAX: f64 = 100.0;
/// Allowed drift of the iteration band under grid doubling.
pub const GRID_DRIFT_REL: f64 = 0.10;

/// Geometric probe grid: points per decade and span.
pub const PROBE_PER_DECADE: usize = 64;
pub const PROBE_LO: f64 = 1e-9;
pub const PROBE_HI: f64 = 1e9;
/// Number of decades probed toward an endpoint in Delta-class checks.
pub const DELTA_DECADES: usize = 12;
/// Threshold above which a limsup estimate is treated as infinite.
pub const DELTA_SUP_CAP: f64 = 1e6;
/// Margin by which a liminf estimate must exceed one.
pub const DELTA_INF_MARGIN: f64 = 1e-3;

/// Default sampling grid for non-step images.
pub const DEFAULT_GRID: usize = 2048;
/// Default seed for random sample generation.
pub const DEFAULT_SEED: u64 = 20240501;
