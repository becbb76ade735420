use serde::{Deserialize, Serialize};

use super::{sigmoid, softplus};
use crate::error::{Error, Result};
use crate::oracle::Potential;
use crate::point::{dot, norm_sq, sq_dist, ParticleSet};
use crate::rng::{fill_standard_normal, RngStream};

/// Equal-weight mixture of N(a, I) and N(-a, I).
///
/// The potential is `f(t) = |t - a|^2 / 2 - log(1 + exp(-2 t.a))`, strongly
/// convex when `|a| < 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    pub a: Vec<f64>,
}

impl GaussianMixture {
    pub fn new(a: Vec<f64>) -> Result<Self> {
        if a.is_empty() || a.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain(
                "mixture offset must be a finite, non-empty vector",
            ));
        }
        Ok(GaussianMixture { a })
    }

    pub fn is_strongly_convex(&self) -> bool {
        norm_sq(&self.a) < 1.0
    }

    /// Exact i.i.d. draws from the target.
    pub fn sample(&self, stream: RngStream, n: usize) -> Result<ParticleSet> {
        let d = self.a.len();
        let mut data = vec![0.0; n * d];
        for (p, row) in data.chunks_exact_mut(d).enumerate() {
            let mut rng = stream.particle(p as u64).rng();
            fill_standard_normal(&mut rng, row);
            let sign = if rand::Rng::random::<bool>(&mut rng) {
                1.0
            } else {
                -1.0
            };
            for (r, a) in row.iter_mut().zip(&self.a) {
                *r += sign * a;
            }
        }
        ParticleSet::from_flat(d, data)
    }
}

impl Potential for GaussianMixture {
    fn dim(&self) -> usize {
        self.a.len()
    }

    fn value(&self, t: &[f64]) -> f64 {
        0.5 * sq_dist(t, &self.a) - softplus(-2.0 * dot(t, &self.a))
    }

    fn gradient(&self, t: &[f64], out: &mut [f64]) {
        let w = 2.0 * sigmoid(-2.0 * dot(t, &self.a));
        for ((o, ti), ai) in out.iter_mut().zip(t).zip(&self.a) {
            *o = ti - ai + w * ai;
        }
    }
}

/// Warns (on stderr) outside the strongly convex regime; never fails.
pub fn gaussian_mixture_potential(spec: GaussianMixture) -> GaussianMixture {
    if !spec.is_strongly_convex() {
        eprintln!(
            "warning: mixture offset has norm {:.4} >= 1; potential is not strongly convex",
            norm_sq(&spec.a).sqrt()
        );
    }
    spec
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::gradient_check;
    use crate::point::Point;

    #[test]
    fn gradient_vanishes_at_origin() {
        let m = GaussianMixture::new(vec![0.3, -0.2, 0.5]).unwrap();
        assert_eq!(m.gradient_vec(&[0.0, 0.0, 0.0]), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn scalar_hand_value() {
        let m = GaussianMixture::new(vec![0.5]).unwrap();
        let g = m.gradient_vec(&[1.0])[0];
        let expected = 0.5 + 1.0 / (1.0 + 1f64.exp());
        assert!((g - expected).abs() < 1e-14);
        assert!((g - 0.76894).abs() < 1e-5);
    }

    #[test]
    fn value_is_the_mixture_log_density() {
        // exp(-f) must be proportional to the two-component density.
        let m = GaussianMixture::new(vec![0.4, 0.1]).unwrap();
        let dens = |t: &[f64]| {
            (-0.5 * sq_dist(t, &[0.4, 0.1])).exp() + (-0.5 * sq_dist(t, &[-0.4, -0.1])).exp()
        };
        let r0 = dens(&[0.0, 0.0]) / (-m.value(&[0.0, 0.0])).exp();
        for t in [[1.0, 2.0], [-3.0, 0.5], [0.2, -0.7]] {
            let r = dens(&t) / (-m.value(&t)).exp();
            assert!((r / r0 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn large_arguments_stay_finite() {
        let m = GaussianMixture::new(vec![0.9]).unwrap();
        assert!(m.value(&[-1e4]).is_finite());
        assert!(m.gradient_vec(&[-1e4])[0].is_finite());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = GaussianMixture::new(vec![0.5 / 2f64.sqrt(), 0.5 / 2f64.sqrt()]).unwrap();
        let s = RngStream::new(1);
        for p in 0..100 {
            let mut rng = s.particle(p).rng();
            let x: Vec<f64> = (0..2)
                .map(|_| rand::Rng::random_range(&mut rng, -3.0..3.0))
                .collect();
            let err = gradient_check(&m, &Point::new(x).unwrap(), 1e-5).unwrap();
            assert!(err <= 1e-5, "rel err {err}");
        }
    }

    #[test]
    fn exact_sampler_moments() {
        let m = GaussianMixture::new(vec![0.5, 0.0]).unwrap();
        let s = m.sample(RngStream::new(3), 40_000).unwrap();
        let mean = s.mean();
        let cov = s.covariance();
        assert!(mean[0].abs() < 0.03 && mean[1].abs() < 0.03);
        // Var along a is 1 + |a|^2
        assert!((cov[0] - 1.25).abs() < 0.04);
        assert!((cov[3] - 1.0).abs() < 0.04);
    }
}
