//! Instrumented estimation: first-stage diagnostics, two-stage least
//! squares with the Sargan over-identification test, and the plug-in
//! two-step IV-Tobit with pairs-bootstrap standard errors.
//!
//! The two-step estimator replaces endogenous design columns with their
//! first-stage OLS fitted values inside the Tobit second stage. Naive
//! second-stage standard errors ignore the generated-regressor step and
//! are reported only as such; the bootstrap reruns both stages per
//! resample, with one RNG substream per replication so results do not
//! depend on thread scheduling.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::chi_square_sf;
use crate::regress::ols::{check_full_rank, ols_fit, symmetrize};
use crate::regress::tobit::{tobit_fit, TobitFit, TobitOptions};

/// Rule-of-thumb weak-instrument threshold on the first-stage F.
pub const WEAK_F_THRESHOLD: f64 = 10.0;

/// Sentinel cap reported when the unrestricted first stage fits perfectly.
pub const F_CAP: f64 = 1e12;

#[derive(Debug, Clone, Serialize)]
pub struct FirstStageFit {
    pub endog: String,
    /// Joint F for excluding the instruments from the first stage.
    pub f_stat: f64,
    pub weak: bool,
    pub r_squared: f64,
}

#[derive(Debug, Clone)]
pub struct FirstStage {
    pub fits: Vec<FirstStageFit>,
    /// Fitted endogenous columns, n x k_endog.
    pub fitted: DMatrix<f64>,
}

/// Regress each endogenous column on [exog | instruments] and report the
/// joint F-statistic for the instruments (restricted-vs-unrestricted SSR).
pub fn first_stage(
    endog: &DMatrix<f64>,
    endog_names: &[String],
    exog: &DMatrix<f64>,
    instruments: &DMatrix<f64>,
) -> Result<FirstStage> {
    let n = endog.nrows();
    let k_endog = endog.ncols();
    let m = instruments.ncols();
    if k_endog == 0 {
        return Err(Error::Config("no endogenous columns given".into()));
    }
    if m < k_endog {
        return Err(Error::Config(format!(
            "order condition violated: {m} instruments for {k_endog} endogenous regressors"
        )));
    }
    if exog.nrows() != n || instruments.nrows() != n {
        return Err(Error::Data("first-stage matrices have mismatched row counts".into()));
    }

    let p_ex = exog.ncols();
    let k_u = p_ex + m;
    if n <= k_u {
        return Err(Error::Estimation(format!(
            "first stage needs n > exog + instruments columns (n = {n}, k = {k_u})"
        )));
    }

    let mut w = DMatrix::zeros(n, k_u);
    w.view_mut((0, 0), (n, p_ex)).copy_from(exog);
    w.view_mut((0, p_ex), (n, m)).copy_from(instruments);
    let w_names: Vec<String> = (0..k_u).map(|j| format!("w{j}")).collect();
    check_full_rank(&w, &w_names)
        .map_err(|_| Error::RankDeficient("stacked first-stage design [exog | instruments]".into()))?;

    let mut fits = Vec::with_capacity(k_endog);
    let mut fitted = DMatrix::zeros(n, k_endog);
    for e in 0..k_endog {
        let target = endog.column(e).into_owned();

        let unrestricted = ols_fit(&w, &target, &w_names)?;
        let ssr_u = unrestricted.residuals.norm_squared();
        fitted.set_column(e, &unrestricted.fitted);

        let ssr_r = if p_ex > 0 {
            let ex_names: Vec<String> = (0..p_ex).map(|j| format!("x{j}")).collect();
            let restricted = ols_fit(&exog.clone_owned(), &target, &ex_names)?;
            restricted.residuals.norm_squared()
        } else {
            let mean = target.mean();
            target.iter().map(|v| (v - mean).powi(2)).sum()
        };

        let f_stat = if ssr_u <= 1e-12 * ssr_r.max(1e-300) {
            F_CAP
        } else {
            (((ssr_r - ssr_u) / m as f64) / (ssr_u / (n - k_u) as f64)).min(F_CAP)
        };
        fits.push(FirstStageFit {
            endog: endog_names.get(e).cloned().unwrap_or_else(|| format!("endog{e}")),
            f_stat,
            weak: f_stat < WEAK_F_THRESHOLD,
            r_squared: unrestricted.r_squared,
        });
    }

    Ok(FirstStage { fits, fitted })
}

/// A fitted two-stage least squares model. Residuals are computed from the
/// original (not fitted) regressors, as the covariance requires.
#[derive(Debug, Clone)]
pub struct TwoSlsFit {
    pub names: Vec<String>,
    pub beta: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub residuals: DVector<f64>,
    pub first_stage: Vec<FirstStageFit>,
    pub n: usize,
    pub n_endog: usize,
    pub n_instruments: usize,
}

impl TwoSlsFit {
    pub fn se(&self) -> DVector<f64> {
        let p = self.beta.len();
        DVector::from_iterator(p, (0..p).map(|i| self.covariance[(i, i)].max(0.0).sqrt()))
    }
}

fn split_design(
    x: &DMatrix<f64>,
    endog_idx: &[usize],
) -> Result<(DMatrix<f64>, DMatrix<f64>, Vec<usize>)> {
    let p = x.ncols();
    for &j in endog_idx {
        if j >= p {
            return Err(Error::Config(format!("endogenous column index {j} out of range")));
        }
    }
    let exog_idx: Vec<usize> = (0..p).filter(|j| !endog_idx.contains(j)).collect();
    let n = x.nrows();
    let mut exog = DMatrix::zeros(n, exog_idx.len());
    for (k, &j) in exog_idx.iter().enumerate() {
        exog.set_column(k, &x.column(j));
    }
    let mut endog = DMatrix::zeros(n, endog_idx.len());
    for (k, &j) in endog_idx.iter().enumerate() {
        endog.set_column(k, &x.column(j));
    }
    Ok((exog, endog, exog_idx))
}

/// Replace the endogenous columns of `x` with first-stage fitted values.
fn substitute_fitted(x: &DMatrix<f64>, endog_idx: &[usize], fitted: &DMatrix<f64>) -> DMatrix<f64> {
    let mut x_hat = x.clone();
    for (k, &j) in endog_idx.iter().enumerate() {
        x_hat.set_column(j, &fitted.column(k));
    }
    x_hat
}

/// Standard 2SLS: first-stage fitted endogenous columns, OLS second stage,
/// covariance from original-regressor residuals.
pub fn two_sls(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    names: &[String],
    endog_idx: &[usize],
    instruments: &DMatrix<f64>,
    endog_names: &[String],
) -> Result<TwoSlsFit> {
    let n = x.nrows();
    let p = x.ncols();
    let (exog, endog, _) = split_design(x, endog_idx)?;
    let fs = first_stage(&endog, endog_names, &exog, instruments)?;
    let x_hat = substitute_fitted(x, endog_idx, &fs.fitted);

    check_full_rank(&x_hat, names)?;
    let second = ols_fit(&x_hat, y, names)?;
    let beta = second.beta;

    // 2SLS covariance: residuals from the ORIGINAL regressors.
    let residuals = y - x * &beta;
    let s2 = residuals.norm_squared() / (n - p) as f64;
    let xtx = x_hat.transpose() * &x_hat;
    let mut covariance = xtx
        .cholesky()
        .ok_or_else(|| Error::Estimation("projected design X'X not positive definite".into()))?
        .inverse()
        * s2;
    symmetrize(&mut covariance);

    Ok(TwoSlsFit {
        names: names.to_vec(),
        beta,
        covariance,
        residuals,
        first_stage: fs.fits,
        n,
        n_endog: endog_idx.len(),
        n_instruments: instruments.ncols(),
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SarganTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Sargan over-identification test: n R^2 from regressing the 2SLS
/// residuals on all instruments and exogenous columns; chi-square with
/// dof = instruments - endogenous. Exactly identified models are an error.
pub fn sargan_test(
    fit: &TwoSlsFit,
    x: &DMatrix<f64>,
    endog_idx: &[usize],
    instruments: &DMatrix<f64>,
) -> Result<SarganTest> {
    if fit.n_instruments < fit.n_endog {
        return Err(Error::Config("order condition violated".into()));
    }
    let dof = fit.n_instruments - fit.n_endog;
    if dof == 0 {
        return Err(Error::Estimation(
            "over-identification test undefined: exactly identified model (dof = 0)".into(),
        ));
    }
    let (exog, _, _) = split_design(x, endog_idx)?;
    let n = x.nrows();
    let p_ex = exog.ncols();
    let m = instruments.ncols();
    let mut w = DMatrix::zeros(n, p_ex + m);
    w.view_mut((0, 0), (n, p_ex)).copy_from(&exog);
    w.view_mut((0, p_ex), (n, m)).copy_from(instruments);
    let w_names: Vec<String> = (0..w.ncols()).map(|j| format!("w{j}")).collect();
    let aux = ols_fit(&w, &fit.residuals, &w_names)?;
    let statistic = n as f64 * aux.r_squared;
    Ok(SarganTest { statistic, dof, p_value: chi_square_sf(statistic, dof) })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BootstrapInfo {
    pub reps: usize,
    pub seed: u64,
    /// Resamples redrawn because they were degenerate (e.g. all censored).
    pub redraws: usize,
}

/// Two-step IV-Tobit fit with its 2SLS counterpart and diagnostics.
#[derive(Debug, Clone)]
pub struct IvFit {
    pub first_stage: Vec<FirstStageFit>,
    /// Tobit on the design with fitted endogenous columns. Its internal
    /// covariance is the naive one (generated regressors ignored).
    pub second_stage: TobitFit,
    /// Naive second-stage SEs for (beta..., sigma), flagged as such.
    pub naive_se: DVector<f64>,
    /// Pairs-bootstrap SEs over both stages for (beta..., sigma).
    pub bootstrap_se: DVector<f64>,
    pub bootstrap: BootstrapInfo,
    /// The 2SLS counterpart fitted on the same data.
    pub two_sls: TwoSlsFit,
    /// Over-identification test of the 2SLS counterpart, when defined.
    pub sargan: Option<SarganTest>,
    pub sargan_note: Option<String>,
}

const MAX_REDRAWS_PER_REP: usize = 100;

/// Plug-in two-step IV-Tobit: first-stage OLS fitted values substituted
/// into a Tobit second stage, with nonparametric pairs-bootstrap standard
/// errors rerunning both stages per resample.
#[allow(clippy::too_many_arguments)]
pub fn iv_tobit_two_step(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    names: &[String],
    endog_idx: &[usize],
    instruments: &DMatrix<f64>,
    opts: TobitOptions,
    bootstrap_reps: usize,
    seed: u64,
) -> Result<IvFit> {
    if endog_idx.is_empty() {
        return Err(Error::Config("no endogenous columns designated".into()));
    }
    if bootstrap_reps < 2 {
        return Err(Error::Config(format!(
            "bootstrap needs at least 2 replications, got {bootstrap_reps}"
        )));
    }
    let n = x.nrows();
    let endog_names: Vec<String> = endog_idx.iter().map(|&j| names[j].clone()).collect();

    let (exog, endog, _) = split_design(x, endog_idx)?;
    let fs = first_stage(&endog, &endog_names, &exog, instruments)?;
    let x_hat = substitute_fitted(x, endog_idx, &fs.fitted);
    let second_stage = tobit_fit(&x_hat, y, names, opts)?;
    let naive_se = second_stage.se();

    let counterpart = two_sls(x, y, names, endog_idx, instruments, &endog_names)?;
    let (sargan, sargan_note) = match sargan_test(&counterpart, x, endog_idx, instruments) {
        Ok(t) => (Some(t), None),
        Err(e) => (None, Some(e.to_string())),
    };

    // Pairs bootstrap: each replication draws its own RNG substream so the
    // result is independent of thread scheduling.
    let p1 = names.len() + 1; // beta..., sigma
    let draws: Result<Vec<(DVector<f64>, usize)>> = (0..bootstrap_reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(rep as u64 + 1);
            let mut redraws = 0usize;
            loop {
                let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                let xb = DMatrix::from_fn(n, x.ncols(), |i, j| x[(idx[i], j)]);
                let yb = DVector::from_fn(n, |i, _| y[idx[i]]);
                let zb = DMatrix::from_fn(n, instruments.ncols(), |i, j| {
                    instruments[(idx[i], j)]
                });
                let attempt = (|| -> Result<DVector<f64>> {
                    let (exog_b, endog_b, _) = split_design(&xb, endog_idx)?;
                    let fs_b = first_stage(&endog_b, &endog_names, &exog_b, zb_ref(&zb))?;
                    let xh = substitute_fitted(&xb, endog_idx, &fs_b.fitted);
                    let fit = tobit_fit(&xh, &yb, names, opts)?;
                    let mut v = DVector::zeros(p1);
                    v.rows_mut(0, names.len()).copy_from(&fit.beta);
                    v[p1 - 1] = fit.sigma;
                    Ok(v)
                })();
                match attempt {
                    Ok(v) => return Ok((v, redraws)),
                    Err(_) if redraws < MAX_REDRAWS_PER_REP => {
                        redraws += 1;
                        continue;
                    }
                    Err(e) => {
                        return Err(Error::Estimation(format!(
                            "bootstrap replication {rep} kept failing after \
                             {MAX_REDRAWS_PER_REP} redraws: {e}"
                        )))
                    }
                }
            }
        })
        .collect();
    let draws = draws?;
    let redraws: usize = draws.iter().map(|(_, r)| r).sum();

    let mut bootstrap_se = DVector::zeros(p1);
    for k in 0..p1 {
        let mean: f64 = draws.iter().map(|(v, _)| v[k]).sum::<f64>() / bootstrap_reps as f64;
        let var: f64 = draws.iter().map(|(v, _)| (v[k] - mean).powi(2)).sum::<f64>()
            / (bootstrap_reps - 1) as f64;
        bootstrap_se[k] = var.sqrt();
    }

    Ok(IvFit {
        first_stage: fs.fits,
        second_stage,
        naive_se,
        bootstrap_se,
        bootstrap: BootstrapInfo { reps: bootstrap_reps, seed, redraws },
        two_sls: counterpart,
        sargan,
        sargan_note,
    })
}

// rayon closures capture by reference; keep the borrow explicit
fn zb_ref(z: &DMatrix<f64>) -> &DMatrix<f64> {
    z
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

    /// Linear DGP with optional confounding: x_e = 1 + z + delta*u + 0.5 v,
    /// y = 2 + 1.5 x_e + (u + eta).
    fn linear_dgp(
        seed: u64,
        n: usize,
        delta: f64,
    ) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let norm = Normal::new(0.0, 1.0).unwrap();
        let mut x = DMatrix::zeros(n, 2);
        let mut z = DMatrix::zeros(n, 1);
        let mut y = DVector::zeros(n);
        for i in 0..n {
            let zi = norm.sample(&mut rng);
            let u = norm.sample(&mut rng);
            let v = norm.sample(&mut rng);
            let eta = norm.sample(&mut rng);
            let xe = 1.0 + zi + delta * u + 0.5 * v;
            x[(i, 0)] = 1.0;
            x[(i, 1)] = xe;
            z[(i, 0)] = zi;
            y[i] = 2.0 + 1.5 * xe + u + eta;
        }
        (x, y, z)
    }

    #[test]
    fn perfect_instrument_caps_f() {
        let (x, _, _) = linear_dgp(1, 300, 0.0);
        let endog = x.columns(1, 1).into_owned();
        let exog = x.columns(0, 1).into_owned();
        let fs = first_stage(&endog, &names(&["xe"]), &exog, &endog.clone()).unwrap();
        assert_eq!(fs.fits[0].f_stat, F_CAP);
        assert!(!fs.fits[0].weak);
        assert_relative_eq!(fs.fits[0].r_squared, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn irrelevant_instrument_flagged_weak() {
        let mut weak_count = 0;
        let mut f_sum = 0.0;
        let reps = 200;
        for seed in 0..reps {
            let mut rng = ChaCha8Rng::seed_from_u64(10_000 + seed);
            let norm = Normal::new(0.0, 1.0).unwrap();
            let n = 2_000;
            let exog = DMatrix::from_element(n, 1, 1.0);
            let endog = DMatrix::from_fn(n, 1, |_, _| norm.sample(&mut rng));
            let z = DMatrix::from_fn(n, 1, |_, _| norm.sample(&mut rng));
            let fs = first_stage(&endog, &names(&["xe"]), &exog, &z).unwrap();
            f_sum += fs.fits[0].f_stat;
            if fs.fits[0].weak {
                weak_count += 1;
            }
        }
        let mean_f = f_sum / reps as f64;
        assert!((0.6..1.6).contains(&mean_f), "mean F {mean_f} not near 1");
        assert!(
            weak_count * 100 > 95 * reps as usize,
            "weak flag raised in only {weak_count}/{reps}"
        );
    }

    #[test]
    fn f_matches_hand_ssr_formula() {
        let (x, _, z) = linear_dgp(3, 150, 0.0);
        let endog = x.columns(1, 1).into_owned();
        let exog = x.columns(0, 1).into_owned();
        let fs = first_stage(&endog, &names(&["xe"]), &exog, &z).unwrap();

        // Hand SSR arithmetic: restricted = mean-only (intercept), then
        // unrestricted via explicit normal equations on [1, z].
        let n = 150usize;
        let target = endog.column(0);
        let mean = target.mean();
        let ssr_r: f64 = target.iter().map(|v| (v - mean).powi(2)).sum();
        let mut w = DMatrix::zeros(n, 2);
        for i in 0..n {
            w[(i, 0)] = 1.0;
            w[(i, 1)] = z[(i, 0)];
        }
        let beta = (w.transpose() * &w).lu().solve(&(w.transpose() * target)).unwrap();
        let resid = target - &w * beta;
        let ssr_u: f64 = resid.norm_squared();
        let f_hand = ((ssr_r - ssr_u) / 1.0) / (ssr_u / (n - 2) as f64);
        assert_relative_eq!(fs.fits[0].f_stat, f_hand, max_relative = 1e-10);
    }

    #[test]
    fn order_condition_enforced() {
        let (x, y, _) = linear_dgp(4, 100, 0.0);
        let z0 = DMatrix::<f64>::zeros(100, 0);
        assert!(matches!(
            two_sls(&x, &y, &names(&["c", "xe"]), &[1], &z0, &names(&["xe"])),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn clean_dgp_two_sls_close_to_ols() {
        let mut within = 0;
        let reps = 100;
        for seed in 0..reps {
            let (x, y, z) = linear_dgp(100 + seed, 2_000, 0.0);
            let nms = names(&["c", "xe"]);
            let ols = ols_fit(&x, &y, &nms).unwrap();
            let iv = two_sls(&x, &y, &nms, &[1], &z, &names(&["xe"])).unwrap();
            let se = iv.se()[1];
            if (iv.beta[1] - ols.beta[1]).abs() <= 2.0 * se {
                within += 1;
            }
        }
        assert!(within >= 95, "2SLS within 2 SE of OLS in only {within}/{reps}");
    }

    #[test]
    fn confounded_dgp_two_sls_recovers_truth() {
        let mut ols_biased = 0;
        let mut iv_within = 0;
        let reps = 100;
        for seed in 0..reps {
            let (x, y, z) = linear_dgp(200 + seed, 2_000, 1.0);
            let nms = names(&["c", "xe"]);
            let ols = ols_fit(&x, &y, &nms).unwrap();
            // population OLS bias: delta/var(x) = 1/2.25
            if (ols.beta[1] - 1.5).abs() > 0.2 {
                ols_biased += 1;
            }
            let iv = two_sls(&x, &y, &nms, &[1], &z, &names(&["xe"])).unwrap();
            if (iv.beta[1] - 1.5).abs() <= 3.0 * iv.se()[1] {
                iv_within += 1;
            }
        }
        assert!(ols_biased >= 95, "OLS biased in only {ols_biased}/{reps}");
        assert!(iv_within >= 95, "2SLS within 3 SE of truth in only {iv_within}/{reps}");
    }

    #[test]
    fn exactly_identified_matches_iv_ratio() {
        let (x, y, z) = linear_dgp(7, 500, 1.0);
        let nms = names(&["c", "xe"]);
        let fit = two_sls(&x, &y, &nms, &[1], &z, &names(&["xe"])).unwrap();

        // Closed-form IV ratio: cov(z, y) / cov(z, x).
        let n = 500;
        let zb = z.column(0).mean();
        let xb = x.column(1).mean();
        let yb = y.mean();
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..n {
            num += (z[(i, 0)] - zb) * (y[i] - yb);
            den += (z[(i, 0)] - zb) * (x[(i, 1)] - xb);
        }
        let ratio = num / den;
        assert_relative_eq!(fit.beta[1], ratio, max_relative = 1e-8);

        // And the over-identification test is undefined.
        assert!(matches!(
            sargan_test(&fit, &x, &[1], &z),
            Err(Error::Estimation(_))
        ));
    }

    #[test]
    fn sargan_p_uniformish_under_valid_instruments() {
        // With two valid instruments (dof = 1), the p-value is roughly
        // uniform; its mean over seeds should be near 1/2.
        let mut p_sum = 0.0;
        let reps = 200;
        for seed in 0..reps {
            let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
            let norm = Normal::new(0.0, 1.0).unwrap();
            let n = 1_500;
            let mut x = DMatrix::zeros(n, 2);
            let mut z = DMatrix::zeros(n, 2);
            let mut y = DVector::zeros(n);
            for i in 0..n {
                let z1 = norm.sample(&mut rng);
                let z2 = norm.sample(&mut rng);
                let u = norm.sample(&mut rng);
                let v = norm.sample(&mut rng);
                let xe = 0.8 * z1 + 0.8 * z2 + u + 0.5 * v;
                x[(i, 0)] = 1.0;
                x[(i, 1)] = xe;
                z[(i, 0)] = z1;
                z[(i, 1)] = z2;
                y[i] = 1.0 + 0.7 * xe + u + norm.sample(&mut rng);
            }
            let fit = two_sls(&x, &y, &names(&["c", "xe"]), &[1], &z, &names(&["xe"])).unwrap();
            let test = sargan_test(&fit, &x, &[1], &z).unwrap();
            assert_eq!(test.dof, 1);
            p_sum += test.p_value;
        }
        let mean_p = p_sum / reps as f64;
        assert!((0.40..0.60).contains(&mean_p), "mean Sargan p {mean_p} far from 0.5");
    }

    #[test]
    fn sargan_invariant_to_instrument_recombination() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let norm = Normal::new(0.0, 1.0).unwrap();
        let n = 800;
        let mut x = DMatrix::zeros(n, 2);
        let mut z = DMatrix::zeros(n, 2);
        let mut y = DVector::zeros(n);
        for i in 0..n {
            let z1 = norm.sample(&mut rng);
            let z2 = norm.sample(&mut rng);
            let u = norm.sample(&mut rng);
            let xe = z1 + 0.6 * z2 + u;
            x[(i, 0)] = 1.0;
            x[(i, 1)] = xe;
            z[(i, 0)] = z1;
            z[(i, 1)] = z2;
            y[i] = 1.0 + 0.7 * xe + u + norm.sample(&mut rng);
        }
        let nms = names(&["c", "xe"]);
        let fit = two_sls(&x, &y, &nms, &[1], &z, &names(&["xe"])).unwrap();
        let base = sargan_test(&fit, &x, &[1], &z).unwrap();

        // Nonsingular recombination of the instrument columns.
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, -1.0, 3.0]);
        let z2 = &z * a;
        let fit2 = two_sls(&x, &y, &nms, &[1], &z2, &names(&["xe"])).unwrap();
        let re = sargan_test(&fit2, &x, &[1], &z2).unwrap();
        assert_relative_eq!(base.statistic, re.statistic, max_relative = 1e-8);
    }

    /// Censored confounded DGP for the IV-Tobit: the unobservable u enters
    /// both the endogenous regressor and the error.
    fn tobit_dgp(seed: u64, n: usize, delta: f64) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let norm = Normal::new(0.0, 1.0).unwrap();
        let mut x = DMatrix::zeros(n, 2);
        let mut z = DMatrix::zeros(n, 1);
        let mut y = DVector::zeros(n);
        for i in 0..n {
            let zi = norm.sample(&mut rng);
            let u = norm.sample(&mut rng);
            let v = norm.sample(&mut rng);
            let xe = 1.0 + zi + delta * u + 0.5 * v;
            let latent = -1.0 + 1.5 * xe + 2.0 * u + 1.5 * norm.sample(&mut rng);
            x[(i, 0)] = 1.0;
            x[(i, 1)] = xe;
            z[(i, 0)] = zi;
            y[i] = latent.max(0.0);
        }
        (x, y, z)
    }

    #[test]
    fn instruments_equal_to_endog_reproduce_plain_tobit() {
        let (x, y, _) = tobit_dgp(21, 1_200, 0.0);
        let nms = names(&["c", "xe"]);
        let plain = tobit_fit(&x, &y, &nms, TobitOptions::default()).unwrap();
        let z = x.columns(1, 1).into_owned();
        let iv = iv_tobit_two_step(&x, &y, &nms, &[1], &z, TobitOptions::default(), 10, 99)
            .unwrap();
        for j in 0..2 {
            assert_relative_eq!(iv.second_stage.beta[j], plain.beta[j], max_relative = 1e-8);
        }
        assert_relative_eq!(iv.second_stage.sigma, plain.sigma, max_relative = 1e-8);
    }

    #[test]
    fn iv_tobit_reduces_bias_under_confounding() {
        let mut tobit_bias = 0.0;
        let mut iv_bias = 0.0;
        let reps = 20;
        for seed in 0..reps {
            let (x, y, z) = tobit_dgp(400 + seed, 2_500, 1.0);
            let nms = names(&["c", "xe"]);
            let plain = tobit_fit(&x, &y, &nms, TobitOptions::default()).unwrap();
            let iv = iv_tobit_two_step(&x, &y, &nms, &[1], &z, TobitOptions::default(), 2, 5)
                .unwrap();
            tobit_bias += (plain.beta[1] - 1.5).abs();
            iv_bias += (iv.second_stage.beta[1] - 1.5).abs();
        }
        tobit_bias /= reps as f64;
        iv_bias /= reps as f64;
        assert!(
            iv_bias < tobit_bias / 2.0,
            "IV bias {iv_bias} not well below plain Tobit bias {tobit_bias}"
        );
    }

    #[test]
    fn bootstrap_reproducible_and_seed_sensitive() {
        let (x, y, z) = tobit_dgp(31, 600, 1.0);
        let nms = names(&["c", "xe"]);
        let a = iv_tobit_two_step(&x, &y, &nms, &[1], &z, TobitOptions::default(), 30, 7).unwrap();
        let b = iv_tobit_two_step(&x, &y, &nms, &[1], &z, TobitOptions::default(), 30, 7).unwrap();
        assert_eq!(a.bootstrap_se, b.bootstrap_se, "same seed must be bit-identical");
        let c = iv_tobit_two_step(&x, &y, &nms, &[1], &z, TobitOptions::default(), 30, 8).unwrap();
        assert_ne!(a.bootstrap_se, c.bootstrap_se, "different seed should differ");
        // bootstrap SEs should exceed the naive ones for the endogenous column
        assert!(a.bootstrap_se[1] > 0.0 && a.naive_se[1] > 0.0);
    }
}
