//! Future-focused control barrier functions for multi-vehicle intersection
//! crossing.
//!
//! Vehicles follow a kinematic bicycle model. A quadratic program filters each
//! nominal tracking input so that pairwise barrier functions stay
//! non-negative. Three barrier kinds are provided: the plain distance barrier,
//! a future-focused barrier that looks ahead to the predicted closest
//! approach, and a relaxed variant that blends the two.
//!
//! ```
//! use ffcbf::scenario::{run_batch, ScenarioConfig};
//!
//! let config = ScenarioConfig::default();
//! let outcome = run_batch(&config, 2).unwrap();
//! assert_eq!(outcome.summary.n_trials, 2);
//! ```

pub mod barriers;
pub mod controllers;
pub mod dynamics;
pub mod error;
pub mod qp;
pub mod report;
pub mod scenario;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    struct Readme;
    #[doc = include_str!("../../../book/src/overview.md")]
    struct Overview;
    #[doc = include_str!("../../../book/src/dynamics.md")]
    struct Dynamics;
    #[doc = include_str!("../../../book/src/barriers.md")]
    struct Barriers;
    #[doc = include_str!("../../../book/src/controllers.md")]
    struct Controllers;
    #[doc = include_str!("../../../book/src/scenarios.md")]
    struct Scenarios;
}
