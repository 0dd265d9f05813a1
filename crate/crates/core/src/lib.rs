pub mod bottleneck;
pub mod calibration;
pub mod decision;
pub mod error;
pub mod instances;
pub mod radius;
pub mod scenarios;
mod search;
pub mod stats;
pub mod uncertainty;

pub use error::{Error, Result};
pub use instances::{CombinatorialSystem, Edge};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/systems.md")]
    mod systems {}
    #[doc = include_str!("../../../book/src/quantification.md")]
    mod quantification {}
    #[doc = include_str!("../../../book/src/decisions.md")]
    mod decisions {}
    #[doc = include_str!("../../../book/src/gamma.md")]
    mod gamma {}
    #[doc = include_str!("../../../book/src/calibration.md")]
    mod calibration {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
