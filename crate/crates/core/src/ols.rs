//! Dense least squares via Householder QR, shared by the small regressions.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub(crate) struct Ols {
    pub coef: DVector<f64>,
    pub resid: DVector<f64>,
    /// `(X'X)^{-1}`
    pub xtx_inv: DMatrix<f64>,
    pub rss: f64,
}

pub(crate) fn ols(x: &DMatrix<f64>, y: &DVector<f64>, what: &'static str) -> Result<Ols> {
    let (n, k) = x.shape();
    if n < k || k == 0 {
        return Err(Error::InsufficientData { needed: k, have: n });
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let scale = (0..k).map(|j| x.column(j).norm()).fold(0.0, f64::max);
    let tol = scale * f64::EPSILON * (n.max(k) as f64) * 10.0;
    if scale == 0.0 || (0..k).any(|j| r[(j, j)].abs() <= tol) {
        return Err(Error::Singular(what));
    }
    let qty = qr.q().transpose() * y;
    let coef = r
        .solve_upper_triangular(&qty)
        .ok_or(Error::Singular(what))?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or(Error::Singular(what))?;
    let xtx_inv = &r_inv * r_inv.transpose();
    let resid = y - x * &coef;
    let rss = resid.norm_squared();
    if !coef.iter().all(|v| v.is_finite()) || !rss.is_finite() {
        return Err(Error::NonFinite(what));
    }
    Ok(Ols { coef, resid, xtx_inv, rss })
}
