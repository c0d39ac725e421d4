//! Ordinary least squares with classical t inference.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::design::DesignMatrix;
use crate::error::{Error, Result};
use crate::special::student_t_two_sided;

/// Relative size below which a diagonal entry of R marks a dependent column.
const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OlsFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub t_statistics: Vec<f64>,
    pub p_values: Vec<f64>,
    pub residual_variance: f64,
    pub dof: usize,
}

impl OlsFit {
    pub fn predict(&self, z: &DMatrix<f64>) -> Vec<f64> {
        (z * DVector::from_column_slice(&self.coefficients)).as_slice().to_vec()
    }
}

/// Two-sided p-value of a t statistic with `dof` degrees of freedom.
pub fn t_p_value(t: f64, dof: f64) -> f64 {
    student_t_two_sided(t, dof)
}

/// Fit `[1 | X_main | X_int]`.
pub fn fit_ols(x: &DesignMatrix, y: &[f64]) -> Result<OlsFit> {
    fit_ols_matrix(&x.full(), y, x.feature_map().coefficient_names())
}

/// Fit an explicit design matrix whose columns are named by `names`.
pub fn fit_ols_matrix(z: &DMatrix<f64>, y: &[f64], names: Vec<String>) -> Result<OlsFit> {
    let (n, d) = z.shape();
    if y.len() != n || names.len() != d {
        return Err(Error::Shape(format!("{n}×{d} design, {} responses, {} names", y.len(), names.len())));
    }
    if n <= d {
        return Err(Error::InvalidArgument(format!("least squares needs more rows than columns ({n} ≤ {d})")));
    }
    if z.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("least-squares input".into()));
    }
    let qr = z.clone().qr();
    let r = qr.r();
    let dependent: Vec<String> = (0..d)
        .filter(|&j| r[(j, j)].abs() <= RANK_TOL * z.column(j).norm().max(f64::MIN_POSITIVE))
        .map(|j| names[j].clone())
        .collect();
    if !dependent.is_empty() {
        return Err(Error::RankDeficient(dependent));
    }
    let mut qty = DVector::from_column_slice(y);
    qr.q_tr_mul(&mut qty);
    let rhs = qty.rows(0, d).into_owned();
    let beta = r.solve_upper_triangular(&rhs).ok_or_else(|| Error::RankDeficient(names.clone()))?;
    let resid = DVector::from_column_slice(y) - z * &beta;
    let dof = n - d;
    let s2 = resid.norm_squared() / dof as f64;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(d, d))
        .ok_or_else(|| Error::RankDeficient(names.clone()))?;
    let mut se = Vec::with_capacity(d);
    let mut t = Vec::with_capacity(d);
    let mut pv = Vec::with_capacity(d);
    for j in 0..d {
        let s = (s2 * r_inv.row(j).norm_squared()).sqrt();
        let tj = if s > 0.0 {
            beta[j] / s
        } else if beta[j] == 0.0 {
            0.0
        } else {
            beta[j].signum() * f64::INFINITY
        };
        se.push(s);
        t.push(tj);
        pv.push(t_p_value(tj, dof as f64));
    }
    Ok(OlsFit {
        names,
        coefficients: beta.as_slice().to_vec(),
        standard_errors: se,
        t_statistics: t,
        p_values: pv,
        residual_variance: s2,
        dof,
    })
}
