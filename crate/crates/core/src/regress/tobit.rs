//! Left-censored Gaussian (Tobit) regression by maximum likelihood.
//!
//! The log-likelihood is maximized in the Olsen reparameterization
//! theta = beta/sigma, gamma = 1/sigma, under which it is globally concave:
//!
//! ```text
//! ll = sum_{y > c}  [ ln gamma + ln phi(gamma*y - x'theta) ]
//!    + sum_{y <= c} [ ln Phi(gamma*c - x'theta) ]
//! ```
//!
//! Newton iterations with step halving start from OLS. Standard errors are
//! the robust sandwich in Olsen space, delta-methoded back to (beta, sigma);
//! the classical inverse-information covariance is available by flag.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numeric::{inverse_mills, log_normal_cdf, log_normal_pdf, KahanSum};

use super::ols::{check_full_rank, ols_fit, symmetrize};

#[derive(Debug, Clone, Copy)]
pub struct TobitOptions {
    /// Left-censoring point (observations with y <= this are censored).
    pub censor_point: f64,
    /// Robust sandwich covariance (default) vs classical inverse information.
    pub robust: bool,
    pub max_iter: usize,
    /// Relative log-likelihood change declaring convergence.
    pub tol_ll: f64,
    /// Gradient norm declaring convergence.
    pub tol_grad: f64,
}

impl Default for TobitOptions {
    fn default() -> Self {
        Self { censor_point: 0.0, robust: true, max_iter: 200, tol_ll: 1e-10, tol_grad: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct Convergence {
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
}

/// A fitted Tobit model. `covariance` spans (beta..., sigma).
#[derive(Debug, Clone)]
pub struct TobitFit {
    pub names: Vec<String>,
    pub beta: DVector<f64>,
    pub sigma: f64,
    pub covariance: DMatrix<f64>,
    pub robust: bool,
    pub log_likelihood: f64,
    pub n: usize,
    pub n_censored: usize,
    pub censor_point: f64,
    pub convergence: Convergence,
    pub warnings: Vec<String>,
}

impl TobitFit {
    /// Standard errors for (beta..., sigma).
    pub fn se(&self) -> DVector<f64> {
        let k = self.covariance.nrows();
        DVector::from_iterator(k, (0..k).map(|i| self.covariance[(i, i)].max(0.0).sqrt()))
    }

    pub fn coef_index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn coef(&self, name: &str) -> Result<f64> {
        Ok(self.beta[self.coef_index(name)?])
    }

    pub fn coef_se(&self, name: &str) -> Result<f64> {
        let i = self.coef_index(name)?;
        Ok(self.covariance[(i, i)].max(0.0).sqrt())
    }
}

/// Olsen-space log-likelihood; `params` is [theta_0..theta_{p-1}, gamma].
/// Returns -inf when gamma <= 0.
pub fn olsen_loglik(x: &DMatrix<f64>, y: &DVector<f64>, censor: f64, params: &DVector<f64>) -> f64 {
    let p = x.ncols();
    let gamma = params[p];
    if !(gamma > 0.0) {
        return f64::NEG_INFINITY;
    }
    let theta = params.rows(0, p);
    let xb = x * &theta;
    let ln_gamma = gamma.ln();
    let mut ll = KahanSum::new();
    for i in 0..x.nrows() {
        if y[i] > censor {
            let z = gamma * y[i] - xb[i];
            ll.add(ln_gamma + log_normal_pdf(z));
        } else {
            ll.add(log_normal_cdf(gamma * censor - xb[i]));
        }
    }
    ll.total()
}

/// Analytic gradient of [`olsen_loglik`] with respect to (theta, gamma).
pub fn olsen_grad(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    censor: f64,
    params: &DVector<f64>,
) -> DVector<f64> {
    let p = x.ncols();
    let gamma = params[p];
    let theta = params.rows(0, p);
    let xb = x * &theta;
    let mut g = DVector::zeros(p + 1);
    for i in 0..x.nrows() {
        let xi = x.row(i);
        if y[i] > censor {
            let z = gamma * y[i] - xb[i];
            for j in 0..p {
                g[j] += xi[j] * z;
            }
            g[p] += 1.0 / gamma - y[i] * z;
        } else {
            let a = gamma * censor - xb[i];
            let lambda = inverse_mills(a);
            for j in 0..p {
                g[j] -= xi[j] * lambda;
            }
            g[p] += lambda * censor;
        }
    }
    g
}

/// Hessian of [`olsen_loglik`]; negative definite on nondegenerate data.
fn olsen_hessian(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    censor: f64,
    params: &DVector<f64>,
) -> DMatrix<f64> {
    let p = x.ncols();
    let gamma = params[p];
    let theta = params.rows(0, p);
    let xb = x * &theta;
    let mut h = DMatrix::zeros(p + 1, p + 1);
    for i in 0..x.nrows() {
        let xi = x.row(i);
        if y[i] > censor {
            for a in 0..p {
                for b in 0..p {
                    h[(a, b)] -= xi[a] * xi[b];
                }
                h[(a, p)] += xi[a] * y[i];
                h[(p, a)] += xi[a] * y[i];
            }
            h[(p, p)] += -1.0 / (gamma * gamma) - y[i] * y[i];
        } else {
            let a_i = gamma * censor - xb[i];
            let lambda = inverse_mills(a_i);
            let w = lambda * (a_i + lambda); // in (0, 1)
            for a in 0..p {
                for b in 0..p {
                    h[(a, b)] -= w * xi[a] * xi[b];
                }
                h[(a, p)] += w * xi[a] * censor;
                h[(p, a)] += w * xi[a] * censor;
            }
            h[(p, p)] -= w * censor * censor;
        }
    }
    h
}

/// Sum of per-row score outer products at `params` (the sandwich "meat").
fn olsen_score_outer(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    censor: f64,
    params: &DVector<f64>,
) -> DMatrix<f64> {
    let p = x.ncols();
    let gamma = params[p];
    let theta = params.rows(0, p);
    let xb = x * &theta;
    let mut b_mat = DMatrix::zeros(p + 1, p + 1);
    let mut gi = DVector::zeros(p + 1);
    for i in 0..x.nrows() {
        gi.fill(0.0);
        let xi = x.row(i);
        if y[i] > censor {
            let z = gamma * y[i] - xb[i];
            for j in 0..p {
                gi[j] = xi[j] * z;
            }
            gi[p] = 1.0 / gamma - y[i] * z;
        } else {
            let a = gamma * censor - xb[i];
            let lambda = inverse_mills(a);
            for j in 0..p {
                gi[j] = -xi[j] * lambda;
            }
            gi[p] = lambda * censor;
        }
        for a in 0..=p {
            for b in 0..=p {
                b_mat[(a, b)] += gi[a] * gi[b];
            }
        }
    }
    b_mat
}

/// Fit the Tobit model. Requires a full-rank design; all-censored samples
/// are an error, all-uncensored samples fit with a warning and reduce to
/// Gaussian ML (OLS coefficients).
pub fn tobit_fit(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    names: &[String],
    opts: TobitOptions,
) -> Result<TobitFit> {
    let n = x.nrows();
    let p = x.ncols();
    if y.len() != n {
        return Err(Error::Data(format!(
            "response length {} does not match design rows {n}",
            y.len()
        )));
    }
    if n <= p + 1 {
        return Err(Error::Estimation(format!(
            "need n > p + 1 observations to estimate scale (n = {n}, p = {p})"
        )));
    }
    check_full_rank(x, names)?;

    let censor = opts.censor_point;
    if let Some(i) = (0..n).find(|&i| y[i] < censor) {
        return Err(Error::Data(format!(
            "row {i} has response {} below the censor point {censor}",
            y[i]
        )));
    }
    let n_censored = (0..n).filter(|&i| y[i] <= censor).count();
    let mut warnings = Vec::new();
    if n_censored == n {
        return Err(Error::Estimation(
            "all observations are censored; the likelihood is unbounded toward -inf mean".into(),
        ));
    }
    if n_censored == 0 {
        warnings.push(
            "no censored observations: Tobit reduces to Gaussian regression (matches OLS)"
                .to_string(),
        );
    }

    // OLS start inside the concave region.
    let start = ols_fit(x, y, names)?;
    let sigma0 = start.sigma_ml();
    if !(sigma0 > 0.0) {
        return Err(Error::Estimation(
            "OLS residuals are exactly zero; the ML scale is degenerate".into(),
        ));
    }
    let mut params = DVector::zeros(p + 1);
    for j in 0..p {
        params[j] = start.beta[j] / sigma0;
    }
    params[p] = 1.0 / sigma0;

    let mut ll = olsen_loglik(x, y, censor, &params);
    let mut grad_norm = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..opts.max_iter {
        iterations = iter;
        let g = olsen_grad(x, y, censor, &params);
        grad_norm = g.norm();
        if grad_norm < opts.tol_grad {
            converged = true;
            break;
        }

        let h = olsen_hessian(x, y, censor, &params);
        let mut a = -h;
        let chol = match a.clone().cholesky() {
            Some(c) => c,
            None => {
                // tiny ridge against borderline indefiniteness
                let ridge = 1e-10 * a.trace().abs().max(1.0) / (p + 1) as f64;
                for d in 0..=p {
                    a[(d, d)] += ridge;
                }
                a.clone().cholesky().ok_or_else(|| {
                    Error::Estimation(
                        "Olsen-space Hessian is not negative definite; data are degenerate".into(),
                    )
                })?
            }
        };
        let step = chol.solve(&g);

        // step halving: accept the first step that does not decrease ll
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial = &params + &step * t;
            let ll_trial = olsen_loglik(x, y, censor, &trial);
            if ll_trial.is_finite() && ll_trial >= ll - 1e-12 * (1.0 + ll.abs()) {
                let rel_change = (ll_trial - ll).abs() / (1.0 + ll.abs());
                params = trial;
                ll = ll_trial;
                accepted = true;
                if rel_change < opts.tol_ll {
                    converged = true;
                }
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // cannot improve: numerically at the optimum
            converged = grad_norm < 1e-4;
            break;
        }
        if converged {
            grad_norm = olsen_grad(x, y, censor, &params).norm();
            break;
        }
    }

    if !converged {
        warnings.push(format!(
            "Newton iterations did not meet tolerances after {} steps (grad norm {grad_norm:.3e})",
            iterations + 1
        ));
    }

    let gamma = params[p];
    let sigma = 1.0 / gamma;
    let beta = DVector::from_iterator(p, (0..p).map(|j| params[j] / gamma));

    // Covariance in Olsen space, then delta method to (beta, sigma).
    let h = olsen_hessian(x, y, censor, &params);
    let a = -h;
    let a_inv = a
        .cholesky()
        .ok_or_else(|| Error::Estimation("information matrix not positive definite".into()))?
        .inverse();
    let v_olsen = if opts.robust {
        let b = olsen_score_outer(x, y, censor, &params);
        &a_inv * b * &a_inv
    } else {
        a_inv
    };

    let mut jac = DMatrix::zeros(p + 1, p + 1);
    for k in 0..p {
        jac[(k, k)] = 1.0 / gamma;
        jac[(k, p)] = -params[k] / (gamma * gamma);
    }
    jac[(p, p)] = -1.0 / (gamma * gamma);
    let mut covariance = &jac * v_olsen * jac.transpose();
    symmetrize(&mut covariance);

    Ok(TobitFit {
        names: names.to_vec(),
        beta,
        sigma,
        covariance,
        robust: opts.robust,
        log_likelihood: ll,
        n,
        n_censored,
        censor_point: censor,
        convergence: Convergence { iterations: iterations + 1, grad_norm, converged },
        warnings,
    })
}

/// Likelihood-ratio test of a restricted model nested in a full model.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct LrTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

pub fn lr_test(full: &TobitFit, restricted: &TobitFit) -> Result<LrTest> {
    if full.n != restricted.n {
        return Err(Error::Estimation(format!(
            "models are not nested: full has n = {}, restricted has n = {}",
            full.n, restricted.n
        )));
    }
    if restricted.names.len() > full.names.len() {
        return Err(Error::Estimation(
            "restricted model has more parameters than the full model".into(),
        ));
    }
    let dof = full.names.len() - restricted.names.len();
    let statistic = (2.0 * (full.log_likelihood - restricted.log_likelihood)).max(0.0);
    let p_value = if dof == 0 {
        if statistic < 1e-8 {
            1.0
        } else {
            return Err(Error::Estimation(
                "models have equal parameter counts but different likelihoods; not nested".into(),
            ));
        }
    } else {
        crate::numeric::chi_square_sf(statistic, dof)
    };
    Ok(LrTest { statistic, dof, p_value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn names(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    /// The documented test DGP: y* = 2 + 1.5 x - 0.8 z + eps, sigma = 3,
    /// y = max(0, y*), roughly 25% censored.
    fn censored_dgp(seed: u64, n: usize) -> (DMatrix<f64>, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let std_norm = Normal::new(0.0, 1.0).unwrap();
        let x = DMatrix::from_fn(n, 3, |_, j| match j {
            0 => 1.0,
            _ => std_norm.sample(&mut rng),
        });
        let y = DVector::from_fn(n, |i, _| {
            let latent: f64 =
                2.0 + 1.5 * x[(i, 1)] - 0.8 * x[(i, 2)] + 3.0 * std_norm.sample(&mut rng);
            latent.max(0.0)
        });
        (x, y)
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let (x, y) = censored_dgp(42, 400);
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let p = x.ncols();
        for _ in 0..20 {
            let mut params = DVector::zeros(p + 1);
            for j in 0..p {
                params[j] = rng.random_range(-0.8..0.8);
            }
            params[p] = rng.random_range(0.1..1.2);
            let g = olsen_grad(&x, &y, 0.0, &params);
            let step = 1e-5;
            for k in 0..=p {
                let mut hi = params.clone();
                let mut lo = params.clone();
                hi[k] += step;
                lo[k] -= step;
                let fd = (olsen_loglik(&x, &y, 0.0, &hi) - olsen_loglik(&x, &y, 0.0, &lo))
                    / (2.0 * step);
                assert_relative_eq!(g[k], fd, max_relative = 1e-6, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn hessian_negative_definite_along_path() {
        let (x, y) = censored_dgp(7, 500);
        let p = x.ncols();
        let start = ols_fit(&x, &y, &names(&["c", "x", "z"])).unwrap();
        let s0 = start.sigma_ml();
        let mut params = DVector::zeros(p + 1);
        for j in 0..p {
            params[j] = start.beta[j] / s0;
        }
        params[p] = 1.0 / s0;
        for _ in 0..8 {
            let h = olsen_hessian(&x, &y, 0.0, &params);
            let a = -h;
            let chol = a.cholesky();
            assert!(chol.is_some(), "Hessian not negative definite at an iterate");
            let g = olsen_grad(&x, &y, 0.0, &params);
            let step = chol.unwrap().solve(&g);
            params += step;
        }
    }

    #[test]
    fn loglik_nondecreasing_and_converges() {
        let (x, y) = censored_dgp(13, 2_000);
        let fit = tobit_fit(&x, &y, &names(&["c", "x", "z"]), TobitOptions::default()).unwrap();
        assert!(fit.convergence.converged);
        assert!(fit.convergence.grad_norm < 1e-6);
        assert!(fit.n_censored > 300 && fit.n_censored < 800);
    }

    #[test]
    fn zero_censoring_matches_ols() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let std_norm = Normal::new(0.0, 1.0).unwrap();
        let n = 900;
        let x = DMatrix::from_fn(n, 3, |_, j| match j {
            0 => 1.0,
            _ => std_norm.sample(&mut rng),
        });
        // keep everything far above zero so nothing censors
        let y = DVector::from_fn(n, |i, _| {
            50.0 + 1.5 * x[(i, 1)] - 0.8 * x[(i, 2)] + 2.0 * std_norm.sample(&mut rng)
        });
        let fit = tobit_fit(&x, &y, &names(&["c", "x", "z"]), TobitOptions::default()).unwrap();
        assert_eq!(fit.n_censored, 0);
        assert!(!fit.warnings.is_empty());

        let ols = ols_fit(&x, &y, &names(&["c", "x", "z"])).unwrap();
        for j in 0..3 {
            assert_relative_eq!(fit.beta[j], ols.beta[j], max_relative = 1e-6);
        }
        assert_relative_eq!(fit.sigma, ols.sigma_ml(), max_relative = 1e-6);
    }

    #[test]
    fn all_censored_is_an_error() {
        let x = DMatrix::from_fn(30, 2, |i, j| if j == 0 { 1.0 } else { i as f64 / 15.0 });
        let y = DVector::zeros(30);
        assert!(matches!(
            tobit_fit(&x, &y, &names(&["c", "x"]), TobitOptions::default()),
            Err(Error::Estimation(_))
        ));
    }

    #[test]
    fn monte_carlo_coverage_of_truth() {
        // Each coefficient within 3 estimated SEs of truth in >= 95/100 seeds.
        let truth = [2.0, 1.5, -0.8, 3.0]; // beta0, beta1, beta2, sigma
        let mut hits = [0usize; 4];
        let reps = 100;
        for seed in 0..reps {
            let (x, y) = censored_dgp(1_000 + seed, 5_000);
            let fit =
                tobit_fit(&x, &y, &names(&["c", "x", "z"]), TobitOptions::default()).unwrap();
            let se = fit.se();
            for k in 0..3 {
                if (fit.beta[k] - truth[k]).abs() <= 3.0 * se[k] {
                    hits[k] += 1;
                }
            }
            if (fit.sigma - truth[3]).abs() <= 3.0 * se[3] {
                hits[3] += 1;
            }
        }
        for (k, h) in hits.iter().enumerate() {
            assert!(*h >= 95, "parameter {k} within 3 SE in only {h}/{reps} replications");
        }
    }

    #[test]
    fn scale_equivariance() {
        let (x, y) = censored_dgp(29, 1_500);
        let base = tobit_fit(&x, &y, &names(&["c", "x", "z"]), TobitOptions::default()).unwrap();
        let c = 7.5;
        let yc = &y * c;
        let scaled = tobit_fit(&x, &yc, &names(&["c", "x", "z"]), TobitOptions::default()).unwrap();
        for j in 0..3 {
            assert_relative_eq!(scaled.beta[j], c * base.beta[j], max_relative = 1e-8);
        }
        assert_relative_eq!(scaled.sigma, c * base.sigma, max_relative = 1e-8);
    }

    #[test]
    fn row_permutation_invariance() {
        let (x, y) = censored_dgp(31, 800);
        let base = tobit_fit(&x, &y, &names(&["c", "x", "z"]), TobitOptions::default()).unwrap();

        let mut order: Vec<usize> = (0..800).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        order.shuffle(&mut rng);
        let xp = DMatrix::from_fn(800, 3, |i, j| x[(order[i], j)]);
        let yp = DVector::from_fn(800, |i, _| y[order[i]]);
        let perm = tobit_fit(&xp, &yp, &names(&["c", "x", "z"]), TobitOptions::default()).unwrap();

        for j in 0..3 {
            assert_relative_eq!(base.beta[j], perm.beta[j], max_relative = 1e-8);
        }
        assert_relative_eq!(base.sigma, perm.sigma, max_relative = 1e-8);
    }

    #[test]
    fn covariance_symmetric_psd() {
        let (x, y) = censored_dgp(37, 1_000);
        let fit = tobit_fit(&x, &y, &names(&["c", "x", "z"]), TobitOptions::default()).unwrap();
        assert_eq!(fit.covariance, fit.covariance.transpose());
        assert!(fit.covariance.clone().cholesky().is_some());
        // classical covariance also available
        let classical = tobit_fit(
            &x,
            &y,
            &names(&["c", "x", "z"]),
            TobitOptions { robust: false, ..TobitOptions::default() },
        )
        .unwrap();
        assert!(classical.se().iter().all(|s| *s > 0.0));
    }

    #[test]
    fn lr_test_identity_and_errors() {
        let (x, y) = censored_dgp(41, 600);
        let full = tobit_fit(&x, &y, &names(&["c", "x", "z"]), TobitOptions::default()).unwrap();
        let same = lr_test(&full, &full).unwrap();
        assert_eq!(same.statistic, 0.0);
        assert_eq!(same.p_value, 1.0);

        let restricted_x = x.columns(0, 1).into_owned();
        let restricted =
            tobit_fit(&restricted_x, &y, &names(&["c"]), TobitOptions::default()).unwrap();
        let test = lr_test(&full, &restricted).unwrap();
        assert_eq!(test.dof, 2);
        assert!(test.statistic > 0.0);
        assert!(test.p_value < 0.001, "strong regressors must reject");

        // different n -> error
        let (x2, y2) = censored_dgp(43, 500);
        let other = tobit_fit(&x2, &y2, &names(&["c", "x", "z"]), TobitOptions::default()).unwrap();
        assert!(lr_test(&full, &other).is_err());
    }
}
