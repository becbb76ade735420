//! Concrete potentials and candidate diffusions.

mod blr;
mod dissipativity;
mod mixture;
mod pseudo_huber;
#[cfg(feature = "student-t")]
mod student_t;

pub use blr::{blr_generate, blr_potential, BlrDataset, BlrPotential, LabelConvention};
pub use dissipativity::{pseudo_huber_dissipativity_bound, uniform_dissipativity_margin};
pub use mixture::{gaussian_mixture_potential, GaussianMixture};
pub use pseudo_huber::{pseudo_huber_diffusion, PseudoHuber};
#[cfg(feature = "student-t")]
pub use student_t::{student_t_diffusion, student_t_generate, StudentTRegression};

use crate::oracle::Potential;
use crate::point::norm_sq;

/// `f(x) = |x|^2 / 2`. Its Langevin diffusion is the Ornstein-Uhlenbeck
/// process with stationary law N(0, I).
#[derive(Debug, Clone, Copy)]
pub struct Quadratic {
    pub dim: usize,
}

impl Potential for Quadratic {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * norm_sq(x)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
    }
}

/// `log(1 + exp(z))` without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// `1 / (1 + exp(-z))` without overflow.
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softplus_is_stable() {
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0 && softplus(-1000.0) < 1e-300);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(1000.0), 1.0);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(0.0), 0.5);
    }
}
