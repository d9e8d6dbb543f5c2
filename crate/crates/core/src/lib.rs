//! Coupled simulation of a viscoplastic subaqueous landslide and the water
//! waves it generates in an enclosed basin.
//!
//! The core is generic over the floating-point type ([`Real`]); the aliases
//! below fix it to `f64`.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coupling;
pub mod error;
pub mod num;
pub mod observables;
pub mod par;
pub mod raster;
pub mod rheology;
pub mod scenario;
pub mod slide;
pub mod validation;
pub mod water;

pub use error::{Error, Result};
pub use num::Real;

pub type Grid = raster::GridSpec<f64>;
pub type Field = raster::ScalarField<f64>;
pub type Series = coupling::BedMotionSeries<f64>;
pub type SlideState = slide::SlideState<f64>;
pub type SlideConfig = slide::SlideConfig<f64>;
pub type WaterState = water::WaterState<f64>;
pub type SWEConfig = water::SWEConfig<f64>;
