//! Reference implementations used to cross-check `ffcbf` in tests.
//!
//! Everything here is written from the defining formulas and shares no
//! numerical code with the library beyond plain data types.

pub mod head_on;
pub mod oracle;
pub mod properties;
pub mod sample;

pub use head_on::{head_on, HeadOnReport};
pub use oracle::{brute_force_qp, riccati_gain, BruteForce};
