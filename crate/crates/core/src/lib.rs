pub mod algo;
pub mod bench;
pub mod cli;
pub mod element;
pub mod engine;
pub mod error;
pub mod plan;
pub mod scan;
pub mod simd;
pub mod topology;
pub mod verify;

pub use element::Element;
pub use error::{Error, Result};
pub use scan::Span;
