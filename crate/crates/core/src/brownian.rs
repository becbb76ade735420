//! Brownian increments, the truncated Kloeden-Platen-Wright series for
//! iterated Ito integrals, and the Brownian time integral.

use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::point::Point;
use crate::rng::{fill_standard_normal, tags, RngStream};

/// Default number of series terms for the Levy-area approximation.
pub const DEFAULT_LEVY_TRUNCATION: usize = 3000;

/// Brownian increments `I_(i)` over one step together with the matrix of
/// iterated integrals `J[l][i] = I_(l,i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IteratedIntegrals {
    increments: Vec<f64>,
    /// Row-major m x m.
    matrix: Vec<f64>,
    /// Row-major m x m, antisymmetric.
    areas: Vec<f64>,
    h: f64,
    truncation: usize,
}

impl IteratedIntegrals {
    /// Exact diagonal with zero Levy areas; this is exact for m = 1.
    pub fn diagonal_only(increments: Vec<f64>, h: f64) -> Result<Self> {
        check_step(h)?;
        let m = increments.len();
        let mut matrix = vec![0.0; m * m];
        for l in 0..m {
            for i in 0..m {
                matrix[l * m + i] = if l == i {
                    0.5 * (increments[l] * increments[l] - h)
                } else {
                    0.5 * increments[l] * increments[i]
                };
            }
        }
        Ok(IteratedIntegrals {
            increments,
            matrix,
            areas: vec![0.0; m * m],
            h,
            truncation: 0,
        })
    }

    pub fn noise_dim(&self) -> usize {
        self.increments.len()
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// `I_(l,i)`.
    pub fn get(&self, l: usize, i: usize) -> f64 {
        self.matrix[l * self.noise_dim() + i]
    }

    /// Antisymmetric part `A_(l,i)`, with `I_(l,i) = I_(l) I_(i) / 2 + A_(l,i)`
    /// off the diagonal.
    pub fn levy_area(&self, l: usize, i: usize) -> f64 {
        self.areas[l * self.noise_dim() + i]
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }
}

fn check_step(h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::domain(format!("step size must be > 0, got {h}")));
    }
    Ok(())
}

/// m independent N(0, h) increments.
pub fn sample_increments(stream: RngStream, m: usize, h: f64) -> Result<Vec<f64>> {
    check_step(h)?;
    if m == 0 {
        return Err(Error::domain("Brownian dimension must be >= 1"));
    }
    let mut rng = stream.rng();
    let mut v = vec![0.0; m];
    fill_standard_normal(&mut rng, &mut v);
    let s = h.sqrt();
    v.iter_mut().for_each(|x| *x *= s);
    Ok(v)
}

/// Iterated integrals from the truncated series with `n` terms.
///
/// The series variables `(xi_{l,k}, eta_{l,k})` for coordinate `l` come from
/// substream `tags::LEVY_BASE + l` of `stream`, drawn in order of `k`, so
/// raising `n` extends the series without changing its leading terms.
pub fn kpw_iterated_integrals(
    stream: RngStream,
    increments: &[f64],
    h: f64,
    n: usize,
) -> Result<IteratedIntegrals> {
    check_step(h)?;
    if n == 0 {
        return Err(Error::domain("Levy-area truncation must be >= 1"));
    }
    let m = increments.len();
    if m == 0 {
        return Err(Error::domain("Brownian dimension must be >= 1"));
    }
    let mut ii = IteratedIntegrals::diagonal_only(increments.to_vec(), h)?;
    ii.truncation = n;
    if m == 1 {
        return Ok(ii);
    }

    // xi[l * n + k], eta[l * n + k] for k = 0..n (series index k + 1)
    let mut xi = vec![0.0; m * n];
    let mut eta = vec![0.0; m * n];
    for l in 0..m {
        let mut rng = stream.tag(tags::LEVY_BASE + l as u64).rng();
        for k in 0..n {
            xi[l * n + k] = StandardNormal.sample(&mut rng);
            eta[l * n + k] = StandardNormal.sample(&mut rng);
        }
    }
    let c = (2.0 / h).sqrt();
    for l in 0..m {
        for i in (l + 1)..m {
            let (bl, bi) = (c * increments[l], c * increments[i]);
            let mut acc = 0.0;
            for k in 0..n {
                let term =
                    xi[l * n + k] * (eta[i * n + k] + bi) - xi[i * n + k] * (eta[l * n + k] + bl);
                acc += term / (k + 1) as f64;
            }
            let area = h / (2.0 * PI) * acc;
            let sym = 0.5 * increments[l] * increments[i];
            ii.matrix[l * m + i] = sym + area;
            ii.matrix[i * m + l] = sym - area;
            ii.areas[l * m + i] = area;
            ii.areas[i * m + l] = -area;
        }
    }
    Ok(ii)
}

/// Jointly sample `(B_t, Z_t)` with `Z_t = int_0^t B_s ds`, d-dimensional.
///
/// `B_t = sqrt(t) xi` and `Z_t = t^{3/2} (xi / 2 + eta / (2 sqrt 3))`, which
/// reproduces `Var Z = t^3 / 3` and `Cov(B_t, Z_t) = t^2 / 2`.
pub fn brownian_with_time_integral(stream: RngStream, d: usize, t: f64) -> Result<(Point, Point)> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("time must be > 0, got {t}")));
    }
    if d == 0 {
        return Err(Error::domain("dimension must be >= 1"));
    }
    let mut rng = stream.rng();
    let mut xi = vec![0.0; d];
    let mut eta = vec![0.0; d];
    fill_standard_normal(&mut rng, &mut xi);
    fill_standard_normal(&mut rng, &mut eta);
    let st = t.sqrt();
    let t32 = t * st;
    let b = xi.iter().map(|x| st * x).collect();
    let z = xi
        .iter()
        .zip(&eta)
        .map(|(x, e)| t32 * (0.5 * x + e / (2.0 * 3f64.sqrt())))
        .collect();
    Ok((Point::new(b)?, Point::new(z)?))
}

/// One draw of `int_0^t int_0^s dB_u ds ~ N(0, t^3 I / 3)`.
pub fn double_time_integral_sample(stream: RngStream, d: usize, t: f64) -> Result<Point> {
    brownian_with_time_integral(stream, d, t).map(|(_, z)| z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn increments_reject_bad_step() {
        assert!(sample_increments(RngStream::new(0), 2, 0.0).is_err());
        assert!(sample_increments(RngStream::new(0), 2, -1.0).is_err());
        assert!(sample_increments(RngStream::new(0), 0, 1.0).is_err());
    }

    #[test]
    fn increments_deterministic() {
        let s = RngStream::new(3).particle(1).step(2);
        assert_eq!(
            sample_increments(s, 3, 0.1).unwrap(),
            sample_increments(s, 3, 0.1).unwrap()
        );
    }

    #[test]
    fn increment_variance_at_unit_step() {
        let n = 1_000_000u64;
        let mut sq = 0.0;
        let mut sum = 0.0;
        for j in 0..n / 2 {
            let v = sample_increments(RngStream::new(11).step(j), 2, 1.0).unwrap();
            sum += v[0] + v[1];
            sq += v[0] * v[0] + v[1] * v[1];
        }
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean * mean;
        assert!((var - 1.0).abs() < 0.01, "var {var}");
    }

    #[test]
    fn scalar_case_has_no_series() {
        let ii = kpw_iterated_integrals(RngStream::new(1), &[0.3], 0.1, 5).unwrap();
        assert_eq!(ii.get(0, 0), (0.09 - 0.1) / 2.0);
        assert_eq!(ii.truncation(), 5);
    }

    #[test]
    fn zero_truncation_rejected() {
        assert!(kpw_iterated_integrals(RngStream::new(1), &[0.3, 0.1], 0.1, 0).is_err());
    }

    #[test]
    fn series_identities() {
        for seed in 0..20 {
            let s = RngStream::new(seed);
            let inc = sample_increments(s.tag(tags::XI), 4, 0.05).unwrap();
            let ii = kpw_iterated_integrals(s, &inc, 0.05, 50).unwrap();
            for l in 0..4 {
                assert_eq!(ii.get(l, l), 0.5 * (inc[l] * inc[l] - 0.05));
                for i in 0..4 {
                    if l == i {
                        continue;
                    }
                    let sum = ii.get(l, i) + ii.get(i, l);
                    assert!((sum - inc[l] * inc[i]).abs() <= 1e-15 * (1.0 + sum.abs()));
                    assert!((ii.levy_area(l, i) + ii.levy_area(i, l)).abs() < 1e-16);
                }
            }
        }
    }

    #[test]
    fn longer_series_extends_shorter_one() {
        // Prefix stability: the first terms do not move when n grows.
        let s = RngStream::new(9).step(4);
        let inc = [0.1, -0.2];
        let a = kpw_iterated_integrals(s, &inc, 0.01, 1).unwrap();
        let b = kpw_iterated_integrals(s, &inc, 0.01, 2).unwrap();
        let mut rng0 = s.tag(tags::LEVY_BASE).rng();
        let mut rng1 = s.tag(tags::LEVY_BASE + 1).rng();
        let x0: f64 = StandardNormal.sample(&mut rng0);
        let e0: f64 = StandardNormal.sample(&mut rng0);
        let x1: f64 = StandardNormal.sample(&mut rng1);
        let e1: f64 = StandardNormal.sample(&mut rng1);
        let c = (2.0f64 / 0.01).sqrt();
        let first = 0.01 / (2.0 * PI) * (x0 * (e1 + c * inc[1]) - x1 * (e0 + c * inc[0]));
        assert!((a.levy_area(0, 1) - first).abs() < 1e-15);
        assert_ne!(a.levy_area(0, 1), b.levy_area(0, 1));
    }

    #[test]
    fn time_integral_rejects_bad_time() {
        assert!(double_time_integral_sample(RngStream::new(0), 1, 0.0).is_err());
    }

    #[test]
    fn time_integral_deterministic() {
        let s = RngStream::new(5).particle(2);
        assert_eq!(
            double_time_integral_sample(s, 3, 0.7).unwrap(),
            double_time_integral_sample(s, 3, 0.7).unwrap()
        );
    }
}
