//! Lorentz-space norms, Littlewood-Paley analysis and inequality checks on
//! sampled periodic fields.

pub mod cli;
pub mod error;
mod fft;
pub mod field;
pub mod inequalities;
pub mod maximal;
pub mod nse;
pub mod rearrange;
pub mod spaces;
pub mod spectral;

pub use error::{Error, Result};
pub use field::{lp_norm, AnalyticProfile, Grid, ProfileSpec, SampledField};
pub use rearrange::{LayerProfile, NormEval, Variant};
