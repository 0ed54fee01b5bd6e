//! Simulation and optimization of a social-influence cultural market.
//!
//! Songs have an appeal and a quality; playlist positions have a visibility.
//! Participants sample a song with probability proportional to visibility
//! times attraction (appeal plus downloads so far) and download it with
//! probability equal to its quality. The crate provides:
//!
//! - [`model`]: market data, state, sampling probabilities and expected downloads;
//! - [`lfap`]: the download-maximizing ("performance") ranking, through a
//!   fractional assignment solver and a sort-based parametric solver;
//! - [`policies`]: download, performance and random ranking policies;
//! - [`quality`]: quality recovery from pre-sampling and observed downloads;
//! - [`simulator`]: seeded, schedule-independent multi-world simulation;
//! - [`metrics`]: market shares, unpredictability and related statistics;
//! - [`scenarios`]: visibility profile and appeal/quality generators.

pub mod error;
pub mod lfap;
pub mod metrics;
pub mod model;
pub mod policies;
pub mod quality;
pub mod scenarios;
pub mod simulator;

pub use error::{MarketError, Result};
pub use model::{AttractionVector, Condition, InfluenceTransform, Market, MarketState, Ranking};
pub use policies::{PolicyKind, PolicySpec, QualitySource};
pub use simulator::{SimulationConfig, WorldTrace};
