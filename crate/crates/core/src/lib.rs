pub mod cli;
pub mod error;
pub mod fields;
pub mod ladder;
pub mod linalg;
pub mod metrics;
pub mod operators;
pub mod oracle;
pub mod stepper;

pub use error::{Error, Result};

/// Chapters of the guide in `book/`, compiled here so their examples run as
/// doc tests.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    pub mod scenarios {}
    #[doc = include_str!("../../../book/src/library.md")]
    pub mod library {}
    #[doc = include_str!("../../../book/src/checks.md")]
    pub mod checks {}
    #[doc = include_str!("../../../book/src/ladders.md")]
    pub mod ladders {}
    #[doc = include_str!("../../../book/src/tolerances.md")]
    pub mod tolerances {}
    #[doc = include_str!("../../../book/src/artifacts.md")]
    pub mod artifacts {}
    #[doc = include_str!("../../../book/src/results.md")]
    pub mod results {}
}
