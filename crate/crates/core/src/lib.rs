pub mod error;
pub mod executor;
pub mod fixtures;
pub mod inner;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod outer;
pub mod recovery;
pub mod runner;
pub mod subproblem;

pub use error::{Error, Result};
