//! Exact information-spectrum partitions and minimum output images for
//! discrete memoryless channels.
//!
//! Probabilities are exact rationals throughout; only entropies and
//! logarithmic sizes are `f64`.
//!
//! ```
//! use imgspec::exact::rational;
//! use imgspec::images::{min_image, min_quasi_image, ImageMode};
//! use imgspec::model::{Alphabet, Channel, Limits, SourceSet};
//!
//! let l = Limits::default();
//! let bsc = Channel::bsc(rational(1, 10)).unwrap();
//! let a = SourceSet::new(Alphabet::digits(2), 2, &["00", "11"]).unwrap();
//! let q = min_quasi_image(&a, &bsc, &rational(1, 2), &l).unwrap();
//! let g = min_image(&a, &bsc, &rational(1, 2), ImageMode::Exact, &l).unwrap();
//! assert!(q.size() <= g.size());
//! ```
//!
//! The guide under `book/` walks through each module.

pub mod decompose;
pub mod error;
pub mod exact;
pub mod images;
pub mod instance;
pub mod model;
pub mod report;
pub mod spectrum;
pub mod verify;

// Compile and run the guide's code blocks as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/spectrum.md")]
    mod spectrum {}
    #[doc = include_str!("../../../book/src/images.md")]
    mod images {}
    #[doc = include_str!("../../../book/src/decomposition.md")]
    mod decomposition {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
