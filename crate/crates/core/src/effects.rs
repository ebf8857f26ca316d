//! Marginal effects, elasticities, and scenario VMT changes from fitted
//! Tobit models.
//!
//! The marginal effect of a variable for household i is the probability of
//! a positive outcome times the coefficient, Phi(x_i'beta/sigma) * beta_k.
//! The elasticity averages me_i * access_i / VMT_i across households; since
//! the observed denominator is zero for censored households, the default
//! policy excludes them (with n adjusted) and a predicted-denominator
//! variant divides by the model-implied expected VMT instead.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{normal_cdf, normal_pdf};
use crate::regress::tobit::TobitFit;

/// Denominator handling for the elasticity average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DenominatorPolicy {
    /// Divide by observed VMT; rows with zero VMT are excluded and n is the
    /// count of included rows.
    ObservedPositive,
    /// Divide by the model-implied expected VMT; all rows enter.
    Predicted,
}

impl std::str::FromStr for DenominatorPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "observed_positive" | "observed-positive" | "observed" => {
                Ok(DenominatorPolicy::ObservedPositive)
            }
            "predicted" => Ok(DenominatorPolicy::Predicted),
            other => Err(Error::Config(format!(
                "unknown elasticity policy `{other}` (observed_positive | predicted)"
            ))),
        }
    }
}

impl std::fmt::Display for DenominatorPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DenominatorPolicy::ObservedPositive => write!(f, "observed_positive"),
            DenominatorPolicy::Predicted => write!(f, "predicted"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ElasticityEstimate {
    pub variable: String,
    pub elasticity: f64,
    pub n_used: usize,
    pub policy: DenominatorPolicy,
}

/// Marginal effect for one household row (aligned with `fit.names`):
/// Phi(x'beta/sigma) * beta_var.
pub fn marginal_effect(fit: &TobitFit, x_row: &[f64], var: &str) -> Result<f64> {
    let k = fit.coef_index(var)?;
    if x_row.len() != fit.names.len() {
        return Err(Error::Data(format!(
            "row has {} entries but the fit has {} coefficients",
            x_row.len(),
            fit.names.len()
        )));
    }
    let xb: f64 = x_row.iter().zip(fit.beta.iter()).map(|(x, b)| x * b).sum();
    Ok(normal_cdf(xb / fit.sigma) * fit.beta[k])
}

/// Model-implied expected VMT for a censored-at-zero Tobit:
/// E[y|x] = Phi(z) x'beta + sigma phi(z), z = x'beta/sigma.
fn expected_response(xb: f64, sigma: f64) -> f64 {
    let z = xb / sigma;
    normal_cdf(z) * xb + sigma * normal_pdf(z)
}

/// Average elasticity of the response with respect to `var` over the
/// sample rows (design matrix aligned with the fit).
pub fn elasticity(
    fit: &TobitFit,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    var: &str,
    policy: DenominatorPolicy,
) -> Result<ElasticityEstimate> {
    let k = fit.coef_index(var)?;
    let n = x.nrows();
    if n == 0 || y.len() != n || x.ncols() != fit.names.len() {
        return Err(Error::Data("design does not match fit/sample".into()));
    }
    let beta_k = fit.beta[k];
    let xb = x * &fit.beta;

    let mut sum = 0.0;
    let mut n_used = 0usize;
    for i in 0..n {
        let me = normal_cdf(xb[i] / fit.sigma) * beta_k;
        let denom = match policy {
            DenominatorPolicy::ObservedPositive => {
                if y[i] <= fit.censor_point {
                    continue;
                }
                y[i]
            }
            DenominatorPolicy::Predicted => expected_response(xb[i], fit.sigma),
        };
        sum += me * x[(i, k)] / denom;
        n_used += 1;
    }
    if n_used == 0 {
        return Err(Error::Estimation(
            "no rows enter the elasticity average (all responses censored)".into(),
        ));
    }
    Ok(ElasticityEstimate {
        variable: var.to_string(),
        elasticity: sum / n_used as f64,
        n_used,
        policy,
    })
}

/// Constant-elasticity projection of a percent change in access onto a
/// percent change in VMT.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioProjection {
    pub variable: String,
    pub elasticity: f64,
    pub pct_access_change: f64,
    pub pct_vmt_change: f64,
    /// The projection is a linear approximation, labeled as such.
    pub note: &'static str,
}

pub fn scenario_vmt_change(e: &ElasticityEstimate, pct_access_change: f64) -> ScenarioProjection {
    ScenarioProjection {
        variable: e.variable.clone(),
        elasticity: e.elasticity,
        pct_access_change,
        pct_vmt_change: e.elasticity * pct_access_change,
        note: "constant-elasticity linear approximation",
    }
}

/// `variable,elasticity,n_used,policy` CSV.
pub fn write_elasticity_csv(path: &Path, estimates: &[ElasticityEstimate]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["variable", "elasticity", "n_used", "policy"])?;
    for e in estimates {
        writer.write_record([
            e.variable.clone(),
            e.elasticity.to_string(),
            e.n_used.to_string(),
            e.policy.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
