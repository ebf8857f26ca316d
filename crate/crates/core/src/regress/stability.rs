//! Coefficient-stability comparison: access coefficients and elasticities
//! with and without the household-characteristics control block. A
//! reporting tool; it asserts nothing.

use serde::Serialize;

use crate::effects::{elasticity, DenominatorPolicy};
use crate::error::Result;
use crate::regress::sample::{build_design, HouseholdSample, ModelSpec};
use crate::regress::tobit::{tobit_fit, TobitOptions};

#[derive(Debug, Clone, Serialize)]
pub struct StabilityRow {
    pub variable: String,
    pub coef_with_controls: f64,
    pub se_with_controls: f64,
    pub coef_without_controls: f64,
    pub se_without_controls: f64,
    pub elasticity_with_controls: f64,
    pub elasticity_without_controls: f64,
    pub same_sign: bool,
    /// |b_with - b_without| / |b_with|
    pub movement_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub rows: Vec<StabilityRow>,
    pub n: usize,
    pub policy: DenominatorPolicy,
}

/// Fit the model with and without its control block and report how the
/// access coefficients move.
pub fn coefficient_stability(
    sample: &HouseholdSample,
    spec: &ModelSpec,
    policy: DenominatorPolicy,
    opts: TobitOptions,
) -> Result<StabilityReport> {
    let full_design = build_design(sample, spec)?;
    let full = tobit_fit(&full_design.x, &full_design.y, &full_design.names, opts)?;

    let reduced_spec = ModelSpec { controls: Vec::new(), ..spec.clone() };
    let reduced_design = build_design(sample, &reduced_spec)?;
    let reduced = tobit_fit(&reduced_design.x, &reduced_design.y, &reduced_design.names, opts)?;

    let mut rows = Vec::new();
    for var in &spec.access {
        let coef_with = full.coef(var)?;
        let coef_without = reduced.coef(var)?;
        let e_with = elasticity(&full, &full_design.x, &full_design.y, var, policy)?;
        let e_without = elasticity(&reduced, &reduced_design.x, &reduced_design.y, var, policy)?;
        rows.push(StabilityRow {
            variable: var.clone(),
            coef_with_controls: coef_with,
            se_with_controls: full.coef_se(var)?,
            coef_without_controls: coef_without,
            se_without_controls: reduced.coef_se(var)?,
            elasticity_with_controls: e_with.elasticity,
            elasticity_without_controls: e_without.elasticity,
            same_sign: coef_with.signum() == coef_without.signum(),
            movement_ratio: (coef_with - coef_without).abs() / coef_with.abs(),
        });
    }
    Ok(StabilityReport { rows, n: full.n, policy })
}
