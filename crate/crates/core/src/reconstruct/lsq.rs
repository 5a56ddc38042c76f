use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::imaging::{Image, MeasurementSeries, PatternSequence};

use super::check_lengths;

/// Least-squares solution of `[A 1] [x; d] = y`.
#[derive(Debug, Clone)]
pub struct LsqSolution {
    pub image: Vec<f64>,
    pub offset: f64,
}

const SVD_EPS: f64 = 1e-10;

/// Solves `min ||A x + d 1 - y||^2` over `(x, d)`. Overdetermined systems
/// use the normal equations (Cholesky); underdetermined ones the
/// minimum-norm solution `M^T (M M^T)^{-1} y`. Either falls back to an SVD
/// pseudo-inverse when the Gram matrix is not positive definite.
pub fn solve_lsq(series: &MeasurementSeries, patterns: &PatternSequence) -> Result<LsqSolution> {
    check_lengths(series, patterns)?;
    let rows = patterns.count();
    let cols = patterns.width() * patterns.height() + 1;
    let mut m = DMatrix::<f64>::zeros(rows, cols);
    for (r, p) in patterns.patterns().iter().enumerate() {
        for (c, &b) in p.bits().iter().enumerate() {
            m[(r, c)] = b as f64;
        }
        m[(r, cols - 1)] = 1.0;
    }
    let y = DVector::from_column_slice(&series.values);

    let sol = if rows >= cols {
        let gram = m.tr_mul(&m);
        let rhs = m.tr_mul(&y);
        match gram.cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => pinv_solve(m, &y)?,
        }
    } else {
        let gram = &m * m.transpose();
        match gram.cholesky() {
            Some(ch) => m.tr_mul(&ch.solve(&y)),
            None => pinv_solve(m, &y)?,
        }
    };
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged("non-finite least-squares solution".into()));
    }
    let offset = sol[cols - 1];
    Ok(LsqSolution {
        image: sol.rows(0, cols - 1).iter().copied().collect(),
        offset,
    })
}

fn pinv_solve(m: DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let svd = m.svd(true, true);
    let tol = SVD_EPS * svd.singular_values.max();
    svd.solve(y, tol)
        .map_err(|e| Error::Diverged(e.to_string()))
}

/// Least-squares reconstruction. Negative pixels, which only arise from
/// noise or rank deficiency, are clamped to zero in the returned image;
/// [`solve_lsq`] exposes the raw solution.
pub fn reconstruct_lsq(series: &MeasurementSeries, patterns: &PatternSequence) -> Result<Image> {
    let sol = solve_lsq(series, patterns)?;
    Image::from_clamped(patterns.width(), patterns.height(), sol.image)
}
