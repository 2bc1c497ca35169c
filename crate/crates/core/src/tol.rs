//! Library-wide numerical tolerances.

/// Relative tolerance for exact algebraic identities (three-point, chain).
pub const IDENTITY: f64 = 1e-10;
/// Gradient/conjugate round trips and V-function identities.
pub const ROUND_TRIP: f64 = 1e-9;
/// Inner solves (dual line search, resolvent VI residual).
pub const INNER_SOLVE: f64 = 1e-10;
/// Additive membership tolerance for convex sets.
pub const MEMBERSHIP: f64 = 1e-9;
/// Membership tolerance guaranteed for projection outputs.
pub const PROJECTION_MEMBERSHIP: f64 = 1e-8;
/// Bound on variational-inequality residuals of projections and resolvents.
pub const VI_RESIDUAL: f64 = 1e-7;
/// Coordinates at or below this value are outside the entropy domain.
pub const ENTROPY_FLOOR: f64 = 1e-300;

/// Iteration cap of the generic projected-gradient projection.
pub const PROJECTION_MAX_ITERS: usize = 10_000;
/// Iteration cap of the scalar dual search for halfspaces and hyperplanes.
pub const DUAL_SEARCH_MAX_ITERS: usize = 200;
/// Iteration cap of the extragradient resolvent solver.
pub const RESOLVENT_MAX_ITERS: usize = 50_000;
