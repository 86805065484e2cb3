pub mod abelian;
pub mod adhm;
pub mod algebra;
pub mod calculus;
pub mod error;
pub mod family;
pub mod metrics;
pub mod nr;
pub mod verify;

pub use error::{Error, Result};
