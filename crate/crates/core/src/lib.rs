//! Glauber dynamics on the p-spin Curie-Weiss model.
//!
//! * [`potential`]: the free-energy function `H`, the fixed-point map
//!   `lambda` and the stationary points of `H`.
//! * [`phase_geometry`]: thresholds, the boundary curves `U`, `L`, `C` and
//!   the regular / critical / special / boundary classifier.
//! * [`dynamics`]: the heat-bath chain on spins, the exact magnetization
//!   kernel, restricted and window chains, the grand coupling and the
//!   metastable sampler.
//! * [`mixing_analysis`]: exact stationary magnetization law, TV curves,
//!   mixing times, bottleneck ratios, hitting times and exponent fits.

pub mod dynamics;
pub mod error;
pub mod mixing_analysis;
pub mod phase_geometry;
pub mod potential;
pub mod report;
pub mod rng;
pub mod svg;

pub use error::{Error, Result};
pub use potential::{ModelParams, RootFindOpts, StationaryKind, StationaryPoint};
pub use rng::RandomStream;
