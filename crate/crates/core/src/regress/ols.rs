//! Ordinary least squares with heteroskedasticity-robust (HC1 sandwich)
//! covariance. Used as the baseline model, the IV first stage, and the
//! starting point for the Tobit Newton iterations.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct OlsFit {
    pub names: Vec<String>,
    pub beta: DVector<f64>,
    /// HC1 sandwich covariance.
    pub cov_robust: DMatrix<f64>,
    /// Classical s^2 (X'X)^-1 covariance.
    pub cov_classical: DMatrix<f64>,
    pub residuals: DVector<f64>,
    pub fitted: DVector<f64>,
    pub r_squared: f64,
    pub n: usize,
    pub p: usize,
}

impl OlsFit {
    pub fn robust_se(&self) -> DVector<f64> {
        DVector::from_iterator(self.p, (0..self.p).map(|i| self.cov_robust[(i, i)].max(0.0).sqrt()))
    }

    /// Maximum-likelihood residual scale sqrt(SSR/n).
    pub fn sigma_ml(&self) -> f64 {
        (self.residuals.norm_squared() / self.n as f64).sqrt()
    }
}

/// Verify X has full column rank; names the first column that is linearly
/// dependent on its predecessors. Twice-iterated Gram-Schmidt keeps the
/// test stable without forming X'X.
pub(crate) fn check_full_rank(x: &DMatrix<f64>, names: &[String]) -> Result<()> {
    let p = x.ncols();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(p);
    for j in 0..p {
        let mut v = x.column(j).into_owned();
        let norm0 = v.norm();
        if norm0 == 0.0 {
            return Err(Error::RankDeficient(column_name(names, j)));
        }
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&v);
                v.axpy(-c, b, 1.0);
            }
        }
        let norm = v.norm();
        if norm <= 1e-10 * norm0 {
            return Err(Error::RankDeficient(column_name(names, j)));
        }
        basis.push(v / norm);
    }
    Ok(())
}

fn column_name(names: &[String], j: usize) -> String {
    names.get(j).cloned().unwrap_or_else(|| format!("column {j}"))
}

/// Least squares via Householder QR, with robust and classical covariance.
pub fn ols_fit(x: &DMatrix<f64>, y: &DVector<f64>, names: &[String]) -> Result<OlsFit> {
    let n = x.nrows();
    let p = x.ncols();
    if y.len() != n {
        return Err(Error::Data(format!(
            "response length {} does not match design rows {n}",
            y.len()
        )));
    }
    if p == 0 {
        return Err(Error::Config("design matrix has no columns".into()));
    }
    if n <= p {
        return Err(Error::Estimation(format!(
            "need more observations than parameters for robust errors (n = {n}, p = {p})"
        )));
    }
    check_full_rank(x, names)?;

    let qr = x.clone().qr();
    let qty = qr.q().transpose() * y;
    let beta = qr
        .r()
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Estimation("QR solve failed on full-rank design".into()))?;

    let fitted = x * &beta;
    let residuals = y - &fitted;
    let ssr = residuals.norm_squared();
    let y_mean = y.mean();
    let sst: f64 = y.iter().map(|v| (v - y_mean).powi(2)).sum();
    let r_squared = if sst > 0.0 { 1.0 - ssr / sst } else if ssr == 0.0 { 1.0 } else { 0.0 };

    let xtx = x.transpose() * x;
    let xtx_inv = xtx
        .cholesky()
        .ok_or_else(|| Error::Estimation("X'X not positive definite".into()))?
        .inverse();

    // HC1: omega_i = n/(n-p) * e_i^2
    let dof_scale = n as f64 / (n - p) as f64;
    let mut meat = DMatrix::zeros(p, p);
    for i in 0..n {
        let w = dof_scale * residuals[i] * residuals[i];
        let xi = x.row(i);
        for a in 0..p {
            for b in 0..p {
                meat[(a, b)] += w * xi[a] * xi[b];
            }
        }
    }
    let mut cov_robust = &xtx_inv * meat * &xtx_inv;
    symmetrize(&mut cov_robust);

    let s2 = ssr / (n - p) as f64;
    let cov_classical = xtx_inv * s2;

    Ok(OlsFit {
        names: names.to_vec(),
        beta,
        cov_robust,
        cov_classical,
        residuals,
        fitted,
        r_squared,
        n,
        p,
    })
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}
