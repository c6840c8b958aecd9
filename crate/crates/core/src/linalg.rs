//! Dense linear-algebra helpers shared by the samplers.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};

/// Relative jitter added on the first Cholesky retry.
pub const JITTER_START: f64 = 1e-10;
/// Number of jittered retries before giving up.
pub const JITTER_RETRIES: usize = 3;

/// Cholesky factorization with escalating diagonal jitter.
///
/// On failure `JITTER_START * mean(diag) * I` is added and the
/// factorization retried, escalating the jitter tenfold each time, up to
/// [`JITTER_RETRIES`] retries.
pub fn cholesky_jittered(m: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "cholesky of non-square {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(
            "cholesky input has non-finite entries".into(),
        ));
    }
    if let Some(c) = m.clone().cholesky() {
        return Ok(c);
    }
    let n = m.nrows();
    let mean_diag = (m.diagonal().sum() / n as f64).abs().max(f64::MIN_POSITIVE);
    let mut eps = JITTER_START * mean_diag;
    for _ in 0..JITTER_RETRIES {
        let mut jittered = m.clone();
        for i in 0..n {
            jittered[(i, i)] += eps;
        }
        if let Some(c) = jittered.cholesky() {
            return Ok(c);
        }
        eps *= 10.0;
    }
    Err(Error::Numeric(format!(
        "cholesky failed on {n}x{n} matrix after {JITTER_RETRIES} jittered retries"
    )))
}

/// Symmetric positive-definite matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdMatrix(DMatrix<f64>);

impl SpdMatrix {
    /// Validates symmetry (1e-12 relative) and positive definiteness.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "SPD matrix must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let scale = m.amax().max(f64::MIN_POSITIVE);
        let n = m.nrows();
        for i in 0..n {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::Domain(format!(
                        "matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        if m.clone().cholesky().is_none() {
            return Err(Error::Domain("matrix is not positive definite".into()));
        }
        Ok(Self(symmetrize(m)))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    /// Wraps a matrix the caller has constructed as SPD (symmetrizes it).
    pub(crate) fn from_trusted(m: DMatrix<f64>) -> Self {
        Self(symmetrize(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn cholesky(&self) -> Result<Cholesky<f64, Dyn>> {
        cholesky_jittered(&self.0)
    }

    pub fn log_det(&self) -> Result<f64> {
        Ok(log_det_from_cholesky(&self.cholesky()?))
    }

    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        Ok(symmetrize(self.cholesky()?.inverse()))
    }
}

pub fn log_det_from_cholesky(c: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * c.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

pub fn symmetrize(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(SpdMatrix::new(m), Err(Error::Domain(_))));
    }

    #[test]
    fn rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(SpdMatrix::new(m).is_err());
    }

    #[test]
    fn log_det_matches_product_of_eigenvalues() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let s = SpdMatrix::new(m).unwrap();
        assert!((s.log_det().unwrap() - (2.0f64 - 0.25).ln()).abs() < 1e-14);
    }

    #[test]
    fn jitter_rescues_semidefinite() {
        // rank-one PSD matrix: plain factorization fails, jitter succeeds
        let v = nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let m = &v * v.transpose();
        assert!(cholesky_jittered(&m).is_ok());
    }

    #[test]
    fn jitter_gives_up_on_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(cholesky_jittered(&m), Err(Error::Numeric(_))));
    }
}
