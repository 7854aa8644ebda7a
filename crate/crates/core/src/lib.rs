//! Cache hit probability analysis for device-to-device (D2D) networks.
//!
//! Transmitters form a planar Poisson process; each caches files from a
//! Zipf-popular catalog according to one of three placement strategies:
//!
//! * **independent** — every node caches file m with probability p_c(m),
//!   independently ([`indep`]), with a two-parameter linear approximation
//!   of the optimal placement;
//! * **exchangeable** — caching indicators share a random frequency drawn
//!   from a per-file mixing distribution ([`exchangeable`]);
//! * **Matérn hard-core** — holders of a file keep a per-file exclusion
//!   distance via type-II dependent thinning ([`mhc`]).
//!
//! [`sim`] provides Monte Carlo ground truth for all three, and [`cli`]
//! exposes the scenario-driven command-line interface.

pub mod cli;
pub mod error;
pub mod exchangeable;
pub mod indep;
pub mod mhc;
pub mod model;
pub mod numeric;
pub mod report;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};
pub use exchangeable::{hit_exchangeable, jensen_gap, MixingDistribution};
pub use indep::{optimize_independent, solve_linear_lk, IndepSolution, LinearPlacement, PlacementPmf};
pub use mhc::{optimize_mhc, ExclusionPolicy, MhcSolution};
pub use model::{hit_independent, volume_fraction, NetworkConfig, ZipfPopularity};
pub use scenario::Scenario;
pub use sim::{estimate_hit, HitEstimate, SimEstimate, SimWindow, Strategy};
