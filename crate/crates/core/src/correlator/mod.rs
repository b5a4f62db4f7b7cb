//! Start-stop correlation, ring-down fitting and brightness accounting.

mod brightness;
mod fit;
mod histogram;

pub use brightness::*;
pub use fit::*;
pub use histogram::*;
