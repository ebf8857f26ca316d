//! Household regression machinery: sample ingestion, OLS, censored
//! (Tobit) maximum likelihood, likelihood-ratio tests, and the
//! coefficient-stability report.

pub mod ols;
pub mod sample;
pub mod stability;
pub mod tobit;

pub use ols::{ols_fit, OlsFit};
pub use sample::{
    attach_access, build_design, load_households, Design, HouseholdSample, ModelSpec,
    DEFAULT_OUTLIER_CAP,
};
pub use stability::{coefficient_stability, StabilityReport, StabilityRow};
pub use tobit::{lr_test, tobit_fit, Convergence, LrTest, TobitFit, TobitOptions};
