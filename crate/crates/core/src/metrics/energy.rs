use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::point::{sq_dist, ParticleSet};

/// Rows sorted lexicographically so that sums are independent of input order.
fn canonical_rows(s: &ParticleSet) -> Vec<&[f64]> {
    let mut rows: Vec<&[f64]> = s.rows().collect();
    rows.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    rows
}

/// `sum_i sum_j |a_i - b_j|`, reduced row by row in a fixed order.
fn pair_sum(a: &[&[f64]], b: &[&[f64]]) -> f64 {
    let rows: Vec<f64> = a
        .par_iter()
        .map(|x| b.iter().map(|y| sq_dist(x, y).sqrt()).sum::<f64>())
        .collect();
    rows.iter().sum()
}

/// V-statistic estimate of the squared energy distance
/// `2 E|Y - Z| - E|Y - Y'| - E|Z - Z'|`. Sample sizes may differ.
pub fn energy_distance_squared(a: &ParticleSet, b: &ParticleSet) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::domain("energy distance needs non-empty samples"));
    }
    let (m, n) = (a.len() as f64, b.len() as f64);
    let ra = canonical_rows(a);
    let rb = canonical_rows(b);
    let cross = pair_sum(&ra, &rb) / (m * n);
    let within_a = pair_sum(&ra, &ra) / (m * m);
    let within_b = pair_sum(&rb, &rb) / (n * n);
    Ok(2.0 * cross - within_a - within_b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{fill_standard_normal, RngStream};
    use proptest::prelude::*;

    fn gaussian_set(seed: u64, n: usize, d: usize, shift: f64) -> ParticleSet {
        let mut data = vec![0.0; n * d];
        fill_standard_normal(&mut RngStream::new(seed).rng(), &mut data);
        data.iter_mut().for_each(|v| *v += shift);
        ParticleSet::from_flat(d, data).unwrap()
    }

    fn naive(a: &ParticleSet, b: &ParticleSet) -> f64 {
        let mean = |x: &ParticleSet, y: &ParticleSet| {
            let mut s = 0.0;
            for p in x.rows() {
                for q in y.rows() {
                    s += sq_dist(p, q).sqrt();
                }
            }
            s / (x.len() * y.len()) as f64
        };
        2.0 * mean(a, b) - mean(a, a) - mean(b, b)
    }

    #[test]
    fn two_points() {
        let a = ParticleSet::from_flat(1, vec![0.0]).unwrap();
        let b = ParticleSet::from_flat(1, vec![2.0]).unwrap();
        assert_eq!(energy_distance_squared(&a, &b).unwrap(), 4.0);
    }

    #[test]
    fn matches_naive_double_loop() {
        let a = gaussian_set(1, 37, 3, 0.0);
        let b = gaussian_set(2, 23, 3, 0.4);
        let e = energy_distance_squared(&a, &b).unwrap();
        assert!((e - naive(&a, &b)).abs() < 1e-12);
    }

    #[test]
    fn rejects_mismatch() {
        let a = gaussian_set(1, 5, 2, 0.0);
        let b = gaussian_set(1, 5, 3, 0.0);
        assert!(energy_distance_squared(&a, &b).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn zero_on_permuted_copies(seed in any::<u64>(), n in 1usize..40, d in 1usize..4) {
            let a = gaussian_set(seed, n, d, 0.0);
            let mut rows: Vec<Vec<f64>> = a.rows().map(|r| r.to_vec()).collect();
            rows.reverse();
            rows.rotate_left(n / 3);
            let b = ParticleSet::from_flat(d, rows.concat()).unwrap();
            prop_assert_eq!(energy_distance_squared(&a, &b).unwrap(), 0.0);
        }

        #[test]
        fn nonnegative_and_symmetric(seed in any::<u64>(), n in 1usize..30, m in 1usize..30) {
            let a = gaussian_set(seed, n, 2, 0.0);
            let b = gaussian_set(seed ^ 3, m, 2, 0.5);
            let ab = energy_distance_squared(&a, &b).unwrap();
            let ba = energy_distance_squared(&b, &a).unwrap();
            prop_assert!(ab >= -1e-12);
            prop_assert!((ab - ba).abs() < 1e-12);
        }
    }
}
