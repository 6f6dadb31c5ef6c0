pub mod cclasso;
pub mod cmimn;
pub mod config;
pub mod consensus;
pub mod corr;
pub mod data;
pub mod error;
pub mod export;
pub mod graph;
pub mod linalg;
pub mod method;
pub mod pipeline;
pub mod render;
pub mod sparcc;
pub mod stats;

pub use error::{Error, Result};
