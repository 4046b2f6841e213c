pub mod cli;
pub mod error;
pub mod exactnum;
pub mod hypernum;
pub mod identities;
pub mod mollified;
pub mod quadrature;

pub use error::{Error, Result};
