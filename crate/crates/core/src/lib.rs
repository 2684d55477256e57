#![no_std]
// `num_traits::Float` supplies libm-backed float methods; it goes unused
// whenever std is linked into the crate graph.
#![allow(unused_imports)]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod experiments;
pub mod forward;
pub mod likelihood;
pub mod math;
pub mod measures1d;
pub mod posterior;
pub mod rng;
pub mod series_prior;

pub use error::{Error, Result};
pub use measures1d::Distribution1D;
pub use rng::SeedStream;
