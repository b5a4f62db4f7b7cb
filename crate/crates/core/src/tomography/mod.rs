//! Two-qubit polarization tomography: measurement model, reconstruction
//! and entanglement metrics.

mod bootstrap;
mod counts;
mod metrics;
mod reconstruct;
mod state;
mod waveplate;

pub use bootstrap::*;
pub use counts::*;
pub use metrics::*;
pub use reconstruct::*;
pub use state::*;
pub use waveplate::*;

