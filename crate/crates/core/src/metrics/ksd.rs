use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::oracle::Potential;
use crate::point::{dot, sq_dist, ParticleSet};

/// Inverse multiquadric kernel `k(x, y) = (c^2 + |x - y|^2)^beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImqKernel {
    pub c: f64,
    pub beta: f64,
}

impl Default for ImqKernel {
    fn default() -> Self {
        ImqKernel { c: 1.0, beta: -0.5 }
    }
}

impl ImqKernel {
    pub fn new(c: f64, beta: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::domain(format!("IMQ scale c must be > 0, got {c}")));
        }
        if !(beta > -1.0 && beta < 0.0) {
            return Err(Error::domain(format!(
                "IMQ exponent must lie in (-1, 0), got {beta}"
            )));
        }
        Ok(ImqKernel { c, beta })
    }

    pub fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        (self.c * self.c + sq_dist(x, y)).powf(self.beta)
    }

    /// `grad_x k = 2 beta q^{beta-1} (x - y)`; `grad_y k` is its negation.
    pub fn grad_x(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let q = self.c * self.c + sq_dist(x, y);
        let s = 2.0 * self.beta * q.powf(self.beta - 1.0);
        for ((o, a), b) in out.iter_mut().zip(x).zip(y) {
            *o = s * (a - b);
        }
    }

    /// `tr(grad_x grad_y k) = -2 beta d q^{beta-1} - 4 beta (beta-1) q^{beta-2} r^2`.
    pub fn trace_mixed(&self, x: &[f64], y: &[f64]) -> f64 {
        let r2 = sq_dist(x, y);
        let q = self.c * self.c + r2;
        let b = self.beta;
        let d = x.len() as f64;
        -2.0 * b * d * q.powf(b - 1.0) - 4.0 * b * (b - 1.0) * q.powf(b - 2.0) * r2
    }

    /// Stein kernel
    /// `s_x^T s_y k + s_x^T grad_y k + s_y^T grad_x k + tr(grad_x grad_y k)`.
    pub fn stein(&self, x: &[f64], y: &[f64], sx: &[f64], sy: &[f64]) -> f64 {
        let r2 = sq_dist(x, y);
        let q = self.c * self.c + r2;
        let b = self.beta;
        let d = x.len() as f64;
        let k = q.powf(b);
        let g = 2.0 * b * q.powf(b - 1.0);
        // sx . grad_y k + sy . grad_x k = g (sy - sx) . (x - y)
        let mut cross = 0.0;
        for i in 0..x.len() {
            cross += (sy[i] - sx[i]) * (x[i] - y[i]);
        }
        let trace = -g * d - 4.0 * b * (b - 1.0) * q.powf(b - 2.0) * r2;
        dot(sx, sy) * k + g * cross + trace
    }
}

/// V-statistic squared kernel Stein discrepancy of `sample` against the
/// target with score `score(x, out)` (i.e. `-grad f`).
pub fn ksd_squared_imq<S>(sample: &ParticleSet, score: S, kernel: ImqKernel) -> Result<f64>
where
    S: Fn(&[f64], &mut [f64]) + Sync,
{
    let kernel = ImqKernel::new(kernel.c, kernel.beta)?;
    let n = sample.len();
    if n == 0 {
        return Err(Error::domain("KSD needs a non-empty sample"));
    }
    let d = sample.dim();
    let scores: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut s = vec![0.0; d];
            score(sample.row(i), &mut s);
            s
        })
        .collect();
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(Error::Evaluation(
            "score is not finite on the sample".into(),
        ));
    }
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = sample.row(i);
            let sx = &scores[i * d..(i + 1) * d];
            (0..n)
                .map(|j| kernel.stein(x, sample.row(j), sx, &scores[j * d..(j + 1) * d]))
                .sum::<f64>()
        })
        .collect();
    Ok(rows.iter().sum::<f64>() / (n as f64 * n as f64))
}

/// KSD against the density proportional to `exp(-f)`.
pub fn ksd_squared_potential(
    sample: &ParticleSet,
    potential: &dyn Potential,
    kernel: ImqKernel,
) -> Result<f64> {
    crate::error::check_dim(potential.dim(), sample.dim())?;
    ksd_squared_imq(
        sample,
        |x, out| {
            potential.gradient(x, out);
            out.iter_mut().for_each(|v| *v = -*v);
        },
        kernel,
    )
}
