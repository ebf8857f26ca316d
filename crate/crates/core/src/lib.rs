//! Spatial-econometrics toolkit for polycentric accessibility analysis.
//!
//! The pipeline goes: bin geocoded establishments onto a hexagonal
//! tessellation ([`hexgrid`]), identify employment sub-centers with the
//! 95th-percentile / 10,000-job rule ([`subcenter`]), compute gravity
//! accessibility indices to jobs inside and outside those centers plus
//! instrument layers ([`access`]), estimate censored (Tobit) and
//! instrumented (two-stage Tobit) regressions of household vehicle miles
//! traveled on the access measures ([`regress`], [`iv`]), and convert fits
//! into elasticities and scenario VMT changes ([`effects`]). Because the
//! survey microdata behind such studies are proprietary, [`synth`]
//! generates seeded synthetic regions with recorded ground truth so every
//! estimator can be validated against a known data-generating process.

pub mod access;
pub mod effects;
pub mod error;
pub mod hexgrid;
pub mod iv;
pub mod numeric;
pub mod regress;
pub mod subcenter;
pub mod synth;

pub use error::{Error, Result};
