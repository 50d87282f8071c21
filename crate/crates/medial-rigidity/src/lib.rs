pub mod error;
pub mod extract;
pub mod graph;
pub mod branch;
pub mod projective;
pub mod poly;
pub mod rigidity;
pub mod svg;
pub mod shape_op;
pub(crate) mod util;

pub use error::{Error, Result};
