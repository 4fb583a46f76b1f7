//! Low-rank binary matrix completion by recursive row partitioning.

pub mod altmin;
pub mod binmat;
pub mod error;
pub mod eval;
pub mod heuristics;
pub mod io;
pub mod lp;
pub mod oracle;
pub mod synth;
pub mod tbmc;

pub use binmat::{masked_error, scaled_hamming, ObservedBinaryMatrix, RowSubsetView, Tile};
pub use error::{Error, Result};
