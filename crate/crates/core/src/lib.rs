//! Meta-learned policy optimisation objectives for tabular grid worlds.

pub mod analysis;
pub mod clock;
pub mod envs;
pub mod inner;
pub mod error;
pub mod es;
pub mod experiment;
pub mod lpg;
pub mod lpo;
pub mod nn;

pub use clock::LifetimeClock;
pub use error::{Error, Result};
