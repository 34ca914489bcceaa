//! Analytical model, synthetic data and fitting pipeline for the motional
//! sidebands of a parametrically squeezed optomechanical oscillator.

pub mod config;
pub mod error;
pub mod fit;
pub mod lineshape;
pub mod oracle;
pub mod params;
pub mod rates;
pub mod scalar;
pub mod seed;
pub mod spectrum;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::{hz_to_rad, rad_to_hz, Real};
pub use spectrum::SpectrumData;

pub type Params = params::SystemParams<f64>;
pub type Pump = params::PumpConfig<f64>;
pub type Field = params::IntracavityField<f64>;
pub type Rates = rates::DerivedRates<f64>;

pub type Params32 = params::SystemParams<f32>;
pub type Rates32 = rates::DerivedRates<f32>;
