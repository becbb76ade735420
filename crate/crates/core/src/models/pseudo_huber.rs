use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{Diffusion, Potential};
use crate::point::norm_sq;

/// Non-convex potential `f(x) = g(x) + gamma log g(x)^2` with
/// `g(x) = (beta + |x|^2)^{1/2}`, and its candidate diffusion
/// `sigma(x) = g(x)^{1/2} I_d`.
///
/// With `w = g I` and `p = exp(-f)` the invariant-measure drift
/// `div(p w) / (2p)` reduces to `b(x) = x ((1 - 2 gamma) / g(x) - 1) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoHuber {
    pub beta: f64,
    pub gamma: f64,
    pub dim: usize,
}

impl PseudoHuber {
    pub fn new(beta: f64, gamma: f64, dim: usize) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) || !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::domain(format!(
                "pseudo-Huber needs beta > 0 and gamma > 0, got beta = {beta}, gamma = {gamma}"
            )));
        }
        if dim == 0 {
            return Err(Error::domain("pseudo-Huber dimension must be >= 1"));
        }
        Ok(PseudoHuber { beta, gamma, dim })
    }

    #[inline]
    fn g(&self, x: &[f64]) -> f64 {
        (self.beta + norm_sq(x)).sqrt()
    }
}

impl Potential for PseudoHuber {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        let g = self.g(x);
        g + 2.0 * self.gamma * g.ln()
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let g = self.g(x);
        let w = 1.0 / g + 2.0 * self.gamma / (g * g);
        for (o, v) in out.iter_mut().zip(x) {
            *o = w * v;
        }
    }
}

impl Diffusion for PseudoHuber {
    fn dim(&self) -> usize {
        self.dim
    }

    fn noise_dim(&self) -> usize {
        self.dim
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        let w = 0.5 * ((1.0 - 2.0 * self.gamma) / self.g(x) - 1.0);
        for (o, v) in out.iter_mut().zip(x) {
            *o = w * v;
        }
    }

    fn diffusion_column(&self, x: &[f64], i: usize, out: &mut [f64]) {
        out.fill(0.0);
        out[i] = self.g(x).sqrt();
    }

    fn apply_diffusion(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        let s = self.g(x).sqrt();
        for (o, vi) in out.iter_mut().zip(v) {
            *o += s * vi;
        }
    }
}

/// The candidate diffusion; the same value also serves as the potential.
pub fn pseudo_huber_diffusion(spec: PseudoHuber) -> PseudoHuber {
    spec
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{drift_from_divergence, gradient_check, relative_error};
    use crate::point::Point;
    use crate::rng::RngStream;
    use rand::Rng;

    fn drift(m: &PseudoHuber, x: &[f64]) -> Vec<f64> {
        let mut b = vec![0.0; x.len()];
        Diffusion::drift(m, x, &mut b);
        b
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(PseudoHuber::new(0.0, 0.5, 1).is_err());
        assert!(PseudoHuber::new(1.0, -0.5, 1).is_err());
        assert!(PseudoHuber::new(1.0, 0.5, 0).is_err());
    }

    #[test]
    fn drift_at_origin_is_zero() {
        let m = PseudoHuber::new(0.33, 1.3, 3).unwrap();
        assert_eq!(drift(&m, &[0.0, 0.0, 0.0]), vec![0.0; 3]);
    }

    #[test]
    fn half_gamma_gives_linear_drift() {
        for beta in [0.01, 0.33, 5.0] {
            let m = PseudoHuber::new(beta, 0.5, 2).unwrap();
            let x = [0.7, -1.9];
            let b = drift(&m, &x);
            assert_eq!(b, vec![-0.35, 0.95]);
            let fd = drift_from_divergence(&m, &m, &Point::new(x.to_vec()).unwrap(), 1e-5).unwrap();
            assert!(relative_error(&fd, &b) < 1e-4);
        }
    }

    #[test]
    fn scalar_hand_value() {
        let m = PseudoHuber::new(1.0, 1.0, 1).unwrap();
        let b = drift(&m, &[1.0])[0];
        let expected = -0.5 - 1.0 / (2.0 * 2f64.sqrt());
        assert!((b - expected).abs() < 1e-14);
        assert!((b + 0.85355).abs() < 1e-5);
        let fd = drift_from_divergence(&m, &m, &Point::new(vec![1.0]).unwrap(), 1e-5).unwrap();
        assert!((fd[0] - expected).abs() < 1e-6);
    }

    #[test]
    fn gradient_and_drift_oracles() {
        let m = PseudoHuber::new(0.33, 0.8, 3).unwrap();
        for p in 0..100 {
            let mut rng = RngStream::new(21).particle(p).rng();
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            let pt = Point::new(x.clone()).unwrap();
            assert!(gradient_check(&m, &pt, 1e-5).unwrap() <= 1e-5);
            let fd = drift_from_divergence(&m, &m, &pt, 1e-5).unwrap();
            assert!(relative_error(&fd, &drift(&m, &x)) <= 1e-4);
        }
    }

    #[test]
    fn columns_match_matrix() {
        let m = PseudoHuber::new(0.5, 0.5, 2).unwrap();
        let x = [0.3, 0.4];
        let s = m.diffusion_matrix(&x);
        let mut col = vec![0.0; 2];
        for i in 0..2 {
            m.diffusion_column(&x, i, &mut col);
            assert_eq!(col[0], s[(0, i)]);
            assert_eq!(col[1], s[(1, i)]);
        }
        assert_eq!(s[(0, 0)], 0.75f64.sqrt().sqrt());
    }
}
