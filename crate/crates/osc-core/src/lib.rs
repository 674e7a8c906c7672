//! Numerical machinery for oscillation spaces on one-dimensional intervals.
//!
//! The crate estimates BMO/BLO seminorms and their vanishing variants,
//! Muckenhoupt A1 constants, the Hardy-Littlewood maximal operator, the
//! Coifman-Rochberg decomposition of A1 weights, and the critical exponent
//! sigma(f) = inf{mu > 0 : e^{f/mu} is an A1 weight}, which measures the
//! distance from f to L-infinity in the decomposition norm on BLO.
//!
//! Everything is driven by a shared interval-search engine ([`search`]) that
//! scans node-pair subintervals with prefix integrals, then refines the best
//! candidate in the clustering coordinate. Functions live in a small symbolic
//! catalog ([`functions::FuncExpr`]) whose members carry exact antiderivatives
//! wherever the classical closed forms exist, so the search stays accurate
//! next to the logarithmic singularities at the left endpoint.

pub mod approx;
pub mod decompose;
pub mod distance;
pub mod domain;
pub mod error;
pub mod exact;
pub mod functions;
pub mod maximal;
pub mod oscillation;
pub mod parse;
pub mod quad;
pub mod report;
pub mod search;
pub mod special;
pub mod weights;

pub use domain::{make_interval, ClusterEnd, Grid, Interval, NumericConfig};
pub use error::OscError;
pub use functions::{FuncExpr, GridFunction, Interp, JumpSpec, MonotoneTag};
