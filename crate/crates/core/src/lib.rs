//! Epidemic curve fitting with the SIR compartment model and the generalized logistic
//! distribution (GLD), and the combination of the two: the GLD's early estimate of the final
//! outbreak size fixes the SIR population `N`, which stabilizes the SIR fit and forecast.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`). The crate root exposes
//! `f64` aliases for the common types.

// `!(x > 0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bbs;
pub mod combo;
pub mod epi_data;
pub mod error;
pub mod gld;
pub mod ode;
pub mod optimizer;
pub mod scalar;
pub mod sir_core;
pub mod synthetic;

pub use error::{DataError, Error, Result};
pub use scalar::Scalar;

pub use combo::{EvalDay, Model};
pub use epi_data::DailyRecord;
pub use synthetic::Noise;

pub type SirParams = sir_core::SirParams<f64>;
pub type SirState = sir_core::SirState<f64>;
pub type SirTrajectory = sir_core::SirTrajectory<f64>;
pub type EpidemicSeries = epi_data::EpidemicSeries<f64>;
pub type GldParams = gld::GldParams<f64>;
pub type GrowthParams = gld::GrowthParams<f64>;
pub type GroupedCounts = gld::GroupedCounts<f64>;
pub type SimplexConfig = optimizer::SimplexConfig<f64>;
pub type OptResult = optimizer::OptResult<f64>;
pub type BbsConfig = bbs::BbsConfig<f64>;
pub type LPlotSeries = combo::LPlotSeries<f64>;
pub type LPlotConfig = combo::LPlotConfig<f64>;
pub type ComboConfig = combo::ComboConfig<f64>;
pub type CombinedForecast = combo::CombinedForecast<f64>;

pub type SirParamsF32 = sir_core::SirParams<f32>;
pub type SirStateF32 = sir_core::SirState<f32>;
pub type GldParamsF32 = gld::GldParams<f32>;
pub type GrowthParamsF32 = gld::GrowthParams<f32>;
