use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::assignment::min_cost_assignment;
use crate::error::{check_dim, Error, Result};
use crate::point::{sq_dist, ParticleSet};

/// Eigenvalues below this (in magnitude) are treated as zero.
pub const EIGEN_CLAMP: f64 = 1e-10;

/// Mean and covariance of a Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianParams {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianParams {
    pub fn new(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::domain("Gaussian dimension must be >= 1"));
        }
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: cov.nrows(),
            });
        }
        if (&cov - cov.transpose()).abs().max() > 1e-12 {
            return Err(Error::domain("covariance is not symmetric"));
        }
        let min_eig = cov.clone().symmetric_eigen().eigenvalues.min();
        if min_eig < -EIGEN_CLAMP {
            return Err(Error::domain(format!(
                "covariance has negative eigenvalue {min_eig}"
            )));
        }
        Ok(GaussianParams {
            mean: DVector::from_vec(mean),
            cov,
        })
    }

    pub fn standard(d: usize) -> Result<Self> {
        GaussianParams::new(vec![0.0; d], DMatrix::identity(d, d))
    }

    /// Empirical mean and (population) covariance of a sample, symmetrized.
    pub fn from_sample(s: &ParticleSet) -> Result<Self> {
        let d = s.dim();
        let c = DMatrix::from_row_slice(d, d, &s.covariance());
        let c = (&c + c.transpose()) * 0.5;
        GaussianParams::new(s.mean(), c)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

fn sqrt_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let vals = eig
        .eigenvalues
        .map(|l| if l > 0.0 { l.sqrt() } else { 0.0 });
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// Closed-form squared W2 between Gaussians,
/// `|m1 - m2|^2 + tr(S1 + S2 - 2 (S1^{1/2} S2 S1^{1/2})^{1/2})`.
pub fn gaussian_w2_squared(p: &GaussianParams, q: &GaussianParams) -> Result<f64> {
    check_dim(p.dim(), q.dim())?;
    let mean_term = (&p.mean - &q.mean).norm_squared();
    let r = sqrt_psd(&p.cov);
    let inner = &r * &q.cov * &r;
    let inner = (&inner + inner.transpose()) * 0.5;
    let cross = sqrt_psd(&inner).trace();
    Ok(mean_term + p.cov.trace() + q.cov.trace() - 2.0 * cross)
}

fn check_same_size(a: &ParticleSet, b: &ParticleSet) -> Result<()> {
    check_dim(a.dim(), b.dim())?;
    if a.len() != b.len() {
        return Err(Error::SizeMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// Squared W2 between two equal-size empirical measures via exact matching.
pub fn empirical_w2_squared(a: &ParticleSet, b: &ParticleSet) -> Result<f64> {
    check_same_size(a, b)?;
    let n = a.len();
    let cost: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let ai = a.row(i);
            (0..n).map(move |j| sq_dist(ai, b.row(j)))
        })
        .collect();
    let (_, total) = min_cost_assignment(&cost, n)?;
    Ok(total / n as f64)
}

/// The four sample distances behind the corrected estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct W2Components {
    /// W2^2(A, B)
    pub ab: f64,
    /// W2^2(A', B')
    pub ab_prime: f64,
    /// W2^2(A, A')
    pub aa_prime: f64,
    /// W2^2(B, B')
    pub bb_prime: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct W2Report {
    /// Plain sample estimate W2^2(A, B).
    pub vanilla: f64,
    /// `(ab + ab' - aa' - bb') / 2`.
    pub corrected: f64,
    pub components: W2Components,
}

impl W2Components {
    pub fn corrected(&self) -> f64 {
        0.5 * (self.ab + self.ab_prime - self.aa_prime - self.bb_prime)
    }
}

/// Null-corrected squared W2 from two samples of each measure:
/// `a`, `a2` from the first, `b`, `b2` from the second, all of equal size.
pub fn corrected_w2_squared(
    a: &ParticleSet,
    a2: &ParticleSet,
    b: &ParticleSet,
    b2: &ParticleSet,
) -> Result<W2Report> {
    check_same_size(a, a2)?;
    check_same_size(a, b)?;
    check_same_size(a, b2)?;
    let components = W2Components {
        ab: empirical_w2_squared(a, b)?,
        ab_prime: empirical_w2_squared(a2, b2)?,
        aa_prime: empirical_w2_squared(a, a2)?,
        bb_prime: empirical_w2_squared(b, b2)?,
    };
    Ok(W2Report {
        vanilla: components.ab,
        corrected: components.corrected(),
        components,
    })
}
