use crate::error::{check_dim, Error, Result};
use crate::oracle::Diffusion;
use crate::point::{dot, norm_sq};
use crate::rng::{fill_standard_normal, tags, RngStream};

use super::PseudoHuber;

/// Uniform draw from the d-dimensional ball of the given radius.
fn ball_point(rng: &mut impl rand::Rng, d: usize, radius: f64, out: &mut [f64]) {
    fill_standard_normal(rng, out);
    let n = norm_sq(out).sqrt();
    let u: f64 = rng.random();
    let r = radius * u.powf(1.0 / d as f64);
    out.iter_mut().for_each(|v| *v *= r / n);
}

/// Smallest sampled value of
/// `-[<b(x) - b(y), x - y> + |sigma(x) - sigma(y)|_F^2 / 2] / |x - y|^2`
/// over `pairs` random pairs in the ball of `radius`. A positive value
/// certifies uniform dissipativity on the sample.
pub fn uniform_dissipativity_margin(
    model: &dyn Diffusion,
    seed: u64,
    pairs: usize,
    radius: f64,
) -> Result<f64> {
    if pairs == 0 {
        return Err(Error::domain("need at least one pair"));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::domain("radius must be > 0"));
    }
    let d = model.dim();
    let root = RngStream::new(seed).tag(tags::AUX);
    let (mut x, mut y) = (vec![0.0; d], vec![0.0; d]);
    let (mut bx, mut by) = (vec![0.0; d], vec![0.0; d]);
    let mut margin = f64::INFINITY;
    let mut used = 0usize;
    for p in 0..pairs {
        let mut rng = root.particle(p as u64).rng();
        ball_point(&mut rng, d, radius, &mut x);
        ball_point(&mut rng, d, radius, &mut y);
        let diff: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        let dist2 = norm_sq(&diff);
        if dist2 == 0.0 {
            continue;
        }
        model.drift(&x, &mut bx);
        model.drift(&y, &mut by);
        check_dim(d, bx.len())?;
        let db: Vec<f64> = bx.iter().zip(&by).map(|(a, b)| a - b).collect();
        let ds = model.diffusion_matrix(&x) - model.diffusion_matrix(&y);
        let val = -(dot(&db, &diff) + 0.5 * ds.norm_squared()) / dist2;
        if !val.is_finite() {
            return Err(Error::Evaluation(
                "dissipativity ratio is not finite".into(),
            ));
        }
        margin = margin.min(val);
        used += 1;
    }
    if used == 0 {
        return Err(Error::domain("every sampled pair was degenerate"));
    }
    Ok(margin)
}

/// Analytic lower bound `1/2 - |gamma - 1/2| 2 / sqrt(beta) - d / (8 sqrt(beta))`
/// on the dissipativity constant of the pseudo-Huber candidate diffusion.
pub fn pseudo_huber_dissipativity_bound(spec: &PseudoHuber) -> f64 {
    let sb = spec.beta.sqrt();
    0.5 - (spec.gamma - 0.5).abs() * 2.0 / sb - spec.dim as f64 / (8.0 * sb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Quadratic;
    use crate::oracle::Langevin;

    #[test]
    fn ou_margin_is_one() {
        let lang = Langevin(Quadratic { dim: 3 });
        let m = uniform_dissipativity_margin(&lang, 1, 500, 4.0).unwrap();
        assert!((m - 1.0).abs() < 1e-10);
    }

    #[test]
    fn bound_value() {
        let spec = PseudoHuber::new(0.33, 0.5, 1).unwrap();
        let b = pseudo_huber_dissipativity_bound(&spec);
        let expected = 0.5 - 1.0 / (8.0 * 0.33f64.sqrt());
        assert!((b - expected).abs() < 1e-15);
        assert!((b - 0.28239).abs() < 1e-4);
    }

    #[test]
    fn bound_monotone_and_limits() {
        let mut prev = f64::INFINITY;
        for d in 1..40 {
            let b = pseudo_huber_dissipativity_bound(&PseudoHuber::new(0.33, 0.5, d).unwrap());
            assert!(b < prev);
            prev = b;
        }
        assert!(prev < 0.0);
        let mut prev = f64::INFINITY;
        for k in 0..20 {
            let g = 0.5 + 0.05 * k as f64;
            let b = pseudo_huber_dissipativity_bound(&PseudoHuber::new(2.0, g, 2).unwrap());
            assert!(b <= prev);
            prev = b;
        }
        let far = pseudo_huber_dissipativity_bound(&PseudoHuber::new(1e16, 0.5, 3).unwrap());
        assert!((far - 0.5).abs() < 1e-7);
    }

    #[test]
    fn sampled_margin_respects_bound() {
        let spec = PseudoHuber::new(0.33, 0.5, 1).unwrap();
        let m = uniform_dissipativity_margin(&spec, 7, 2000, 5.0).unwrap();
        assert!(m >= pseudo_huber_dissipativity_bound(&spec));
    }

    #[test]
    fn zero_pairs_rejected() {
        let lang = Langevin(Quadratic { dim: 1 });
        assert!(uniform_dissipativity_margin(&lang, 1, 0, 1.0).is_err());
    }
}
