//! Counter-style random streams.
//!
//! Every draw in the crate is addressed by `(seed, particle, step, tag)`. The
//! coordinates are hashed into a 64-bit key which seeds a fresh
//! Xoshiro256++ generator, so a particle's noise at a given step does not
//! depend on how many other particles exist or which thread advances them.

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};
use crate::point::Point;

/// Substream tags used across the crate.
pub mod tags {
    /// Primary N(0, I) draw of a step (`xi`, or Brownian increments scaled by sqrt(h)).
    pub const XI: u64 = 0;
    /// Secondary N(0, I) draw of SRK-LD (`eta`).
    pub const ETA: u64 = 1;
    /// Residual draw used when coupling to the exact OU transition.
    pub const EXACT_RESIDUAL: u64 = 2;
    /// Fine-lattice Brownian increments in coupled runs.
    pub const FINE_BROWNIAN: u64 = 3;
    /// Initial-set draws.
    pub const INIT: u64 = 4;
    /// Reference-sample draws.
    pub const REFERENCE: u64 = 5;
    /// Generic Monte Carlo draws (data generators, pair sampling).
    pub const AUX: u64 = 6;
    /// Levy-area series for Brownian coordinate `l` uses `LEVY_BASE + l`.
    pub const LEVY_BASE: u64 = 1 << 32;
}

/// Type of generator handed out by [`RngStream::rng`].
pub type StreamRng = Xoshiro256PlusPlus;

/// Address of a deterministic random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub particle: u64,
    pub step: u64,
    pub tag: u64,
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            particle: 0,
            step: 0,
            tag: 0,
        }
    }

    pub fn particle(self, particle: u64) -> Self {
        RngStream { particle, ..self }
    }

    pub fn step(self, step: u64) -> Self {
        RngStream { step, ..self }
    }

    pub fn tag(self, tag: u64) -> Self {
        RngStream { tag, ..self }
    }

    /// 64-bit key of this stream. Distinct coordinates give unrelated keys.
    pub fn key(&self) -> u64 {
        let mut k = mix64(self.seed.wrapping_add(GOLDEN));
        k = mix64(k ^ self.particle.wrapping_add(GOLDEN.wrapping_mul(2)));
        k = mix64(k ^ self.step.wrapping_add(GOLDEN.wrapping_mul(3)));
        mix64(k ^ self.tag.wrapping_add(GOLDEN.wrapping_mul(4)))
    }

    /// Derive a new root seed, e.g. for a sweep cell.
    pub fn derive_seed(&self) -> u64 {
        mix64(self.key() ^ GOLDEN)
    }

    pub fn rng(&self) -> StreamRng {
        Xoshiro256PlusPlus::seed_from_u64(self.key())
    }
}

pub fn fill_standard_normal<R: rand::Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
}

/// `d` independent N(0, 1) draws from `stream`.
pub fn standard_normal_vector(stream: RngStream, d: usize) -> Result<Point> {
    if d == 0 {
        return Err(Error::domain("standard_normal_vector requires d >= 1"));
    }
    let mut rng = stream.rng();
    let mut v = vec![0.0; d];
    fill_standard_normal(&mut rng, &mut v);
    Point::new(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_coordinates_same_draws() {
        let s = RngStream::new(7).particle(3).step(11).tag(tags::ETA);
        let a = standard_normal_vector(s, 5).unwrap();
        let b = standard_normal_vector(s, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn different_coordinates_differ() {
        let s = RngStream::new(7);
        let keys = [
            s.key(),
            s.particle(1).key(),
            s.step(1).key(),
            s.tag(1).key(),
            RngStream::new(8).key(),
        ];
        for i in 0..keys.len() {
            for j in i + 1..keys.len() {
                assert_ne!(keys[i], keys[j]);
            }
        }
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(matches!(
            standard_normal_vector(RngStream::new(1), 0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn moments_of_a_million_draws() {
        let d = 4;
        let n = 250_000; // 10^6 draws in total
        let mut sum = vec![0.0; d];
        let mut sq = vec![0.0; d];
        let mut rng = RngStream::new(2024).rng();
        let mut v = vec![0.0; d];
        for _ in 0..n {
            fill_standard_normal(&mut rng, &mut v);
            for k in 0..d {
                sum[k] += v[k];
                sq[k] += v[k] * v[k];
            }
        }
        let nf = n as f64;
        for k in 0..d {
            let mean = sum[k] / nf;
            let var = sq[k] / nf - mean * mean;
            assert!(mean.abs() < 4.0 / nf.sqrt(), "mean {mean}");
            assert!((var - 1.0).abs() < 0.01, "var {var}");
        }
    }

    #[test]
    fn a_million_draws_from_one_vector() {
        let v = standard_normal_vector(RngStream::new(99), 1_000_000).unwrap();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 4.0 / n.sqrt());
        assert!((var - 1.0).abs() < 0.01);
    }

    #[test]
    fn neighbouring_streams_are_uncorrelated() {
        // Correlation between streams differing in a single coordinate.
        let n = 200_000u64;
        let base = RngStream::new(5);
        let pairs = [
            (base.particle(0), base.particle(1)),
            (base.step(0), base.step(1)),
            (base.tag(tags::XI), base.tag(tags::ETA)),
        ];
        for (a, b) in pairs {
            let mut acc = 0.0;
            for j in 0..n {
                let x = standard_normal_vector(a.step(a.step + 2 * j), 1).unwrap()[0];
                let y = standard_normal_vector(b.step(b.step + 2 * j), 1).unwrap()[0];
                acc += x * y;
            }
            let corr = acc / n as f64;
            assert!(corr.abs() < 5.0 / (n as f64).sqrt(), "corr {corr}");
        }
    }
}
