//! Posterior of Student's t regression under a flat prior, with the
//! residual-scaled candidate diffusion
//! `sigma(t) = (1 + r^T S^{-1} r / nu)^{1/2} I_d`, `r = y - X t`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::oracle::{Diffusion, Potential};
use crate::rng::{fill_standard_normal, tags, RngStream};

#[derive(Debug, Clone)]
pub struct StudentTRegression {
    x: DMatrix<f64>,
    y: DVector<f64>,
    nu: f64,
    cov: DMatrix<f64>,
    cov_inv: DMatrix<f64>,
}

impl StudentTRegression {
    /// `x` is n x d, `cov` n x n symmetric positive definite, `nu >= 1`.
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, nu: u32, cov: DMatrix<f64>) -> Result<Self> {
        let n = x.nrows();
        if n == 0 || x.ncols() == 0 || y.len() != n {
            return Err(Error::domain(
                "design, responses and covariance disagree in size",
            ));
        }
        if cov.nrows() != n || cov.ncols() != n {
            return Err(Error::domain("covariance must be n x n"));
        }
        if nu == 0 {
            return Err(Error::domain("degrees of freedom must be >= 1"));
        }
        if (&cov - cov.transpose()).abs().max() > 1e-12 {
            return Err(Error::domain("covariance must be symmetric"));
        }
        let chol = cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::domain("covariance must be positive definite"))?;
        let cov_inv = chol.inverse();
        Ok(StudentTRegression {
            x,
            y,
            nu: nu as f64,
            cov,
            cov_inv,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// Weighted residual `S^{-1} (y - X t)` and `s(t) = 1 + r^T S^{-1} r / nu`.
    fn residual(&self, t: &[f64]) -> (DVector<f64>, f64) {
        let r = &self.y - &self.x * DVector::from_column_slice(t);
        let w = &self.cov_inv * &r;
        let s = 1.0 + r.dot(&w) / self.nu;
        (w, s)
    }

    fn shape(&self) -> f64 {
        0.5 * (self.nu + self.n() as f64)
    }

    /// Sufficient condition for uniform dissipativity,
    /// `nu + n > (2 + d) lmax(S_X) / lmin(S) * lmax(S) / lmin(S_X)` with
    /// `S_X = X^T X / n`.
    pub fn dissipativity_condition(&self) -> bool {
        let n = self.n() as f64;
        let d = self.x.ncols() as f64;
        let sx = self.x.transpose() * &self.x / n;
        let ex = sx.symmetric_eigen().eigenvalues;
        let es = self.cov.clone().symmetric_eigen().eigenvalues;
        let (xmax, xmin) = (ex.max(), ex.min());
        let (smax, smin) = (es.max(), es.min());
        self.nu + n > (2.0 * xmax / smin + d * xmax / smin) * smax / xmin
    }
}

impl Potential for StudentTRegression {
    fn dim(&self) -> usize {
        self.x.ncols()
    }

    fn value(&self, t: &[f64]) -> f64 {
        let (_, s) = self.residual(t);
        self.shape() * s.ln()
    }

    fn gradient(&self, t: &[f64], out: &mut [f64]) {
        let (w, s) = self.residual(t);
        let g = self.x.transpose() * w * (-2.0 * self.shape() / (self.nu * s));
        out.copy_from_slice(g.as_slice());
    }
}

impl Diffusion for StudentTRegression {
    fn dim(&self) -> usize {
        self.x.ncols()
    }

    fn noise_dim(&self) -> usize {
        self.x.ncols()
    }

    /// `b(t) = ((nu + n)/2 - 1) X^T S^{-1} r / nu`.
    fn drift(&self, t: &[f64], out: &mut [f64]) {
        let (w, _) = self.residual(t);
        let b = self.x.transpose() * w * ((self.shape() - 1.0) / self.nu);
        out.copy_from_slice(b.as_slice());
    }

    fn diffusion_column(&self, t: &[f64], i: usize, out: &mut [f64]) {
        let (_, s) = self.residual(t);
        out.fill(0.0);
        out[i] = s.sqrt();
    }

    fn apply_diffusion(&self, t: &[f64], v: &[f64], out: &mut [f64]) {
        let (_, s) = self.residual(t);
        let s = s.sqrt();
        for (o, vi) in out.iter_mut().zip(v) {
            *o += s * vi;
        }
    }
}

pub fn student_t_diffusion(spec: StudentTRegression) -> StudentTRegression {
    spec
}

/// Noise-free linear data `y = X 1_d` with rows `x_i ~ N(0, I_d / d)` and
/// identity covariance.
pub fn student_t_generate(seed: u64, n: usize, d: usize, nu: u32) -> Result<StudentTRegression> {
    if n == 0 || d == 0 {
        return Err(Error::domain("need n, d >= 1"));
    }
    let mut rng = RngStream::new(seed).tag(tags::AUX).rng();
    let mut vals = vec![0.0; n * d];
    fill_standard_normal(&mut rng, &mut vals);
    let scale = 1.0 / (d as f64).sqrt();
    vals.iter_mut().for_each(|v| *v *= scale);
    let x = DMatrix::from_row_slice(n, d, &vals);
    let y = &x * DVector::from_element(d, 1.0);
    StudentTRegression::new(x, y, nu, DMatrix::identity(n, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::uniform_dissipativity_margin;
    use crate::oracle::{drift_from_divergence, gradient_check, relative_error};
    use crate::point::Point;
    use rand::Rng;

    #[test]
    fn unit_scale_at_truth() {
        let m = student_t_generate(1, 50, 2, 2).unwrap();
        let mut col = vec![0.0; 2];
        m.diffusion_column(&[1.0, 1.0], 0, &mut col);
        assert!((col[0] - 1.0).abs() < 1e-12);
        assert_eq!(col[1], 0.0);
    }

    #[test]
    fn drift_and_gradient_oracles() {
        let m = student_t_generate(2, 50, 2, 2).unwrap();
        for p in 0..50 {
            let mut rng = RngStream::new(31).particle(p).rng();
            let t: Vec<f64> = (0..2).map(|_| rng.random_range(-3.0..3.0)).collect();
            let pt = Point::new(t.clone()).unwrap();
            assert!(gradient_check(&m, &pt, 1e-5).unwrap() <= 1e-5);
            let mut b = vec![0.0; 2];
            Diffusion::drift(&m, &t, &mut b);
            let fd = drift_from_divergence(&m, &m, &pt, 1e-5).unwrap();
            assert!(relative_error(&fd, &b) <= 1e-4, "{fd:?} vs {b:?}");
        }
    }

    #[test]
    fn dissipative_instance_has_positive_margin() {
        let m = student_t_generate(3, 50, 2, 2).unwrap();
        assert!(m.dissipativity_condition());
        let margin = uniform_dissipativity_margin(&m, 5, 2000, 3.0).unwrap();
        assert!(margin > 0.0, "margin {margin}");
    }

    #[test]
    fn rejects_indefinite_covariance() {
        let x = DMatrix::from_element(2, 1, 1.0);
        let y = DVector::from_element(2, 1.0);
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(StudentTRegression::new(x, y, 2, cov).is_err());
    }
}
