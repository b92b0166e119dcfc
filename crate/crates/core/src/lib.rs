pub mod cli;
pub mod data;
pub mod error;
pub mod model;
pub mod numerics;
pub mod relations;
pub mod theory;
mod util;

pub use error::{Error, ErrorKind, Result};
pub use util::mean_std;
