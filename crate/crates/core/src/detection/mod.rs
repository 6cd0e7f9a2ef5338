//! Response-filtered currents, counting statistics and spectral estimates
//! computed from simulated outputs.

mod counting;
mod filter;
mod spectrum;

pub use counting::{count_in_window, estimate_counting, CountSample, CountingStats};
pub use filter::{filter_events, filter_increments, transfer_function, ResponseFilter};
pub use spectrum::{estimate_spectrum, estimate_spectrum_real, SpectrumConfig, SpectrumEstimate, Window};
