//! Independent numerical checks of the closed-form model.

pub mod propagate;
pub mod sde;
pub mod welch;

pub use propagate::{propagate_spectra, NoiseCorrelators, OracleSpectra, OracleWarning, TransferMatrix};
pub use sde::{sde_simulate, EnvelopeTrace};
pub use welch::{welch_psd, welch_psd_complex, Window};
