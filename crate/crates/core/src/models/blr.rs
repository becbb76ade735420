//! Bayesian logistic regression posterior with a Gaussian prior whose
//! covariance is proportional to the inverse sample covariance of the design.

use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{sigmoid, softplus};
use crate::error::{Error, Result};
use crate::oracle::Potential;
use crate::point::dot;
use crate::rng::{tags, RngStream};

/// Which logistic term enters the potential.
///
/// `AsPrinted` uses `-Y^T X t + sum log(1 + exp(-t.x_i))`, the default form of
/// this model. `Standard` uses the textbook Bernoulli likelihood
/// `-Y^T X t + sum log(1 + exp(t.x_i))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelConvention {
    #[default]
    AsPrinted,
    Standard,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlrDataset {
    n: usize,
    d: usize,
    /// Row-major n x d design.
    x: Vec<f64>,
    y: Vec<f64>,
    alpha: f64,
    /// X^T X / n, row-major d x d.
    sigma_x: Vec<f64>,
}

/// Default regularizer `0.3 d / pi^2`.
pub fn default_alpha(d: usize) -> f64 {
    0.3 * d as f64 / (PI * PI)
}

impl BlrDataset {
    pub fn new(n: usize, d: usize, x: Vec<f64>, y: Vec<f64>, alpha: f64) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::domain("BLR dataset needs n, d >= 1"));
        }
        if x.len() != n * d || y.len() != n {
            return Err(Error::domain(format!(
                "design has {} entries and labels {} for n = {n}, d = {d}",
                x.len(),
                y.len()
            )));
        }
        if y.iter().any(|v| *v != 0.0 && *v != 1.0) {
            return Err(Error::domain("labels must be 0 or 1"));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::domain("regularizer must be finite and >= 0"));
        }
        let mut sigma_x = vec![0.0; d * d];
        for row in x.chunks_exact(d) {
            for i in 0..d {
                for j in 0..d {
                    sigma_x[i * d + j] += row[i] * row[j];
                }
            }
        }
        sigma_x.iter_mut().for_each(|v| *v /= n as f64);
        Ok(BlrDataset {
            n,
            d,
            x,
            y,
            alpha,
            sigma_x,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn labels(&self) -> &[f64] {
        &self.y
    }

    pub fn design(&self) -> &[f64] {
        &self.x
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn sample_covariance(&self) -> &[f64] {
        &self.sigma_x
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::domain("regularizer must be finite and >= 0"));
        }
        self.alpha = alpha;
        Ok(self)
    }

    /// CSV with header `x1,...,xd,y`, one row per observation.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        let mut header: Vec<String> = (1..=self.d).map(|j| format!("x{j}")).collect();
        header.push("y".into());
        wr.write_record(&header)?;
        for i in 0..self.n {
            let mut rec: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            rec.push(self.y[i].to_string());
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads the CSV written by [`BlrDataset::write_csv`]; the last column is
    /// the label. The regularizer is set to its default for the dimension.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let cols = rd.headers()?.len();
        if cols < 2 {
            return Err(Error::Parse(
                "BLR CSV needs at least one feature and a label".into(),
            ));
        }
        let d = cols - 1;
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for rec in rd.records() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let vals = rec
                .iter()
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse(format!("line {line}: {e}")))?;
            if vals.len() != cols {
                return Err(Error::Parse(format!("line {line}: expected {cols} fields")));
            }
            x.extend_from_slice(&vals[..d]);
            y.push(vals[d]);
        }
        let n = y.len();
        BlrDataset::new(n, d, x, y, default_alpha(d))
    }
}

/// Rademacher design normalized so `|X|_F = sqrt(d)`, labels drawn from the
/// logistic model at `theta* = 1_d`, regularizer `0.3 d / pi^2`.
pub fn blr_generate(seed: u64, n: usize, d: usize) -> Result<BlrDataset> {
    if n == 0 || d == 0 {
        return Err(Error::domain("BLR generation needs n, d >= 1"));
    }
    let root = RngStream::new(seed).tag(tags::AUX);
    let mut rng = root.rng();
    let mut x: Vec<f64> = (0..n * d)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    let fro = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = fro / (d as f64).sqrt();
    x.iter_mut().for_each(|v| *v /= scale);

    let mut rng = root.step(1).rng();
    let y = x
        .chunks_exact(d)
        .map(|row| {
            let p = sigmoid(row.iter().sum::<f64>());
            if rng.random::<f64>() < p {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    BlrDataset::new(n, d, x, y, default_alpha(d))
}

#[derive(Debug, Clone)]
pub struct BlrPotential {
    data: BlrDataset,
    convention: LabelConvention,
    /// X^T Y, cached.
    xty: Vec<f64>,
}

pub fn blr_potential(data: BlrDataset, convention: LabelConvention) -> BlrPotential {
    let d = data.d;
    let mut xty = vec![0.0; d];
    for i in 0..data.n {
        for (acc, v) in xty.iter_mut().zip(data.row(i)) {
            *acc += v * data.y[i];
        }
    }
    BlrPotential {
        data,
        convention,
        xty,
    }
}

impl BlrPotential {
    pub fn data(&self) -> &BlrDataset {
        &self.data
    }

    fn sign(&self) -> f64 {
        match self.convention {
            LabelConvention::AsPrinted => -1.0,
            LabelConvention::Standard => 1.0,
        }
    }
}

impl Potential for BlrPotential {
    fn dim(&self) -> usize {
        self.data.d
    }

    fn value(&self, t: &[f64]) -> f64 {
        let d = self.data.d;
        let s = self.sign();
        let mut f = -dot(&self.xty, t);
        for i in 0..self.data.n {
            f += softplus(s * dot(t, self.data.row(i)));
        }
        let mut quad = 0.0;
        for i in 0..d {
            for j in 0..d {
                quad += t[i] * self.data.sigma_x[i * d + j] * t[j];
            }
        }
        f + 0.5 * self.data.alpha * quad
    }

    fn gradient(&self, t: &[f64], out: &mut [f64]) {
        let d = self.data.d;
        let s = self.sign();
        for (o, v) in out.iter_mut().zip(&self.xty) {
            *o = -v;
        }
        for i in 0..self.data.n {
            let row = self.data.row(i);
            let w = s * sigmoid(s * dot(t, row));
            for (o, v) in out.iter_mut().zip(row) {
                *o += w * v;
            }
        }
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..d {
                acc += self.data.sigma_x[i * d + j] * t[j];
            }
            out[i] += self.data.alpha * acc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::gradient_check;
    use crate::point::Point;

    #[test]
    fn generated_design_normalization() {
        for (n, d) in [(50, 2), (100, 5), (7, 20)] {
            let data = blr_generate(3, n, d).unwrap();
            assert!((data.frobenius_norm() - (d as f64).sqrt()).abs() < 1e-12);
            assert!(data.labels().iter().all(|y| *y == 0.0 || *y == 1.0));
            assert_eq!(data.alpha(), default_alpha(d));
        }
    }

    #[test]
    fn alpha_for_two_dimensions() {
        assert!((default_alpha(2) - 0.060793).abs() < 1e-6);
    }

    #[test]
    fn sample_covariance_is_symmetric_psd() {
        let data = blr_generate(8, 30, 4).unwrap();
        let s = nalgebra::DMatrix::from_row_slice(4, 4, data.sample_covariance());
        assert!((&s - s.transpose()).abs().max() < 1e-15);
        let eig = s.symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|v| *v >= -1e-12));
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(
            blr_generate(5, 20, 3).unwrap(),
            blr_generate(5, 20, 3).unwrap()
        );
        assert_ne!(
            blr_generate(5, 20, 3).unwrap(),
            blr_generate(6, 20, 3).unwrap()
        );
    }

    fn brute_gradient_at_zero(data: &BlrDataset, sign: f64) -> Vec<f64> {
        // alpha = 0 and Y = 0: each logistic term contributes sign * x_i / 2
        let mut g = vec![0.0; data.dim()];
        for i in 0..data.n() {
            for (gj, v) in g.iter_mut().zip(data.row(i)) {
                *gj += sign * v / 2.0;
            }
        }
        g
    }

    #[test]
    fn gradient_at_origin_with_zero_labels() {
        let x = vec![0.5, -1.0, 2.0, 0.25, -0.75, 1.5];
        let data = BlrDataset::new(3, 2, x, vec![0.0; 3], 0.0).unwrap();
        let std = blr_potential(data.clone(), LabelConvention::Standard);
        let printed = blr_potential(data.clone(), LabelConvention::AsPrinted);
        let g = std.gradient_vec(&[0.0, 0.0]);
        let want = brute_gradient_at_zero(&data, 1.0);
        assert!((g[0] - want[0]).abs() < 1e-15 && (g[1] - want[1]).abs() < 1e-15);
        assert_eq!(want, vec![0.875, 0.375]);
        let g = printed.gradient_vec(&[0.0, 0.0]);
        assert_eq!(g, brute_gradient_at_zero(&data, -1.0));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let data = blr_generate(11, 100, 3).unwrap();
        for conv in [LabelConvention::AsPrinted, LabelConvention::Standard] {
            let pot = blr_potential(data.clone(), conv);
            for p in 0..100 {
                let mut rng = RngStream::new(4).particle(p).rng();
                let t: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
                let err = gradient_check(&pot, &Point::new(t).unwrap(), 1e-5).unwrap();
                assert!(err <= 1e-5, "{conv:?}: rel err {err}");
            }
        }
    }

    #[test]
    fn potential_is_convex_along_random_lines() {
        let data = blr_generate(2, 60, 3).unwrap();
        let pot = blr_potential(data, LabelConvention::AsPrinted);
        let e = 1e-3;
        for p in 0..100 {
            let mut rng = RngStream::new(6).particle(p).rng();
            let t: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            let v: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let at = |s: f64| {
                let q: Vec<f64> = t.iter().zip(&v).map(|(a, b)| a + s * b).collect();
                pot.value(&q)
            };
            let second = (at(e) - 2.0 * at(0.0) + at(-e)) / (e * e);
            assert!(second >= -1e-6, "second difference {second}");
        }
    }

    #[test]
    fn csv_round_trip() {
        let data = blr_generate(1, 10, 3).unwrap();
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        assert!(std::str::from_utf8(&buf)
            .unwrap()
            .starts_with("x1,x2,x3,y\n"));
        let back = BlrDataset::read_csv(&buf[..]).unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn rejects_bad_labels() {
        assert!(BlrDataset::new(1, 1, vec![1.0], vec![0.5], 0.1).is_err());
        assert!(BlrDataset::new(2, 1, vec![1.0], vec![0.0], 0.1).is_err());
    }
}
