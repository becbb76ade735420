//! Potential and diffusion oracles, plus the finite-difference checks used to
//! validate every closed-form gradient and drift shipped with the crate.

use nalgebra::DMatrix;

use crate::error::{check_dim, Error, Result};
use crate::point::{norm_sq, Point};

/// A target potential `f` (negative log density up to a constant).
pub trait Potential: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// Writes `grad f(x)` into `out`.
    fn gradient(&self, x: &[f64], out: &mut [f64]);

    fn gradient_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.gradient(x, &mut g);
        g
    }
}

/// An Ito diffusion `dX = b(X) dt + sigma(X) dB` with `B` an m-dimensional
/// Brownian motion.
pub trait Diffusion: Send + Sync {
    fn dim(&self) -> usize;

    /// Brownian dimension m.
    fn noise_dim(&self) -> usize;

    fn drift(&self, x: &[f64], out: &mut [f64]);

    /// Column `i` of `sigma(x)`.
    fn diffusion_column(&self, x: &[f64], i: usize, out: &mut [f64]);

    /// `out += sigma(x) v` for `v` of length m.
    fn apply_diffusion(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        let mut col = vec![0.0; self.dim()];
        for (i, vi) in v.iter().enumerate().take(self.noise_dim()) {
            self.diffusion_column(x, i, &mut col);
            for (o, c) in out.iter_mut().zip(&col) {
                *o += c * vi;
            }
        }
    }

    /// The full d x m matrix `sigma(x)`.
    fn diffusion_matrix(&self, x: &[f64]) -> DMatrix<f64> {
        let (d, m) = (self.dim(), self.noise_dim());
        let mut s = DMatrix::zeros(d, m);
        let mut col = vec![0.0; d];
        for i in 0..m {
            self.diffusion_column(x, i, &mut col);
            s.set_column(i, &nalgebra::DVector::from_column_slice(&col));
        }
        s
    }

    /// Whether `sigma` is constant in x. Schemes may skip correction terms.
    fn constant_diffusion(&self) -> bool {
        false
    }
}

/// Overdamped Langevin diffusion `dX = -grad f(X) dt + sqrt(2) dB`.
#[derive(Debug, Clone)]
pub struct Langevin<P>(pub P);

impl<P: Potential> Diffusion for Langevin<P> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn noise_dim(&self) -> usize {
        self.0.dim()
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        self.0.gradient(x, out);
        out.iter_mut().for_each(|v| *v = -*v);
    }

    fn diffusion_column(&self, _x: &[f64], i: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        out[i] = std::f64::consts::SQRT_2;
    }

    fn apply_diffusion(&self, _x: &[f64], v: &[f64], out: &mut [f64]) {
        for (o, vi) in out.iter_mut().zip(v) {
            *o += std::f64::consts::SQRT_2 * vi;
        }
    }

    fn constant_diffusion(&self) -> bool {
        true
    }
}

impl<P: Potential + ?Sized> Potential for &P {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        (**self).gradient(x, out)
    }
}

impl<P: Potential + ?Sized> Potential for Box<P> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        (**self).gradient(x, out)
    }
}

/// Central-difference approximation of `grad f(x)`.
pub fn finite_difference_gradient(model: &dyn Potential, x: &Point, step: f64) -> Result<Point> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::domain(format!(
            "finite-difference step must be > 0, got {step}"
        )));
    }
    check_dim(model.dim(), x.dim())?;
    let mut probe = x.to_vec();
    let mut g = vec![0.0; x.dim()];
    for j in 0..x.dim() {
        probe[j] = x[j] + step;
        let up = model.value(&probe);
        probe[j] = x[j] - step;
        let down = model.value(&probe);
        probe[j] = x[j];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::Evaluation(format!(
                "potential is not finite near coordinate {j}"
            )));
        }
        g[j] = (up - down) / (2.0 * step);
    }
    Point::new(g)
}

/// Relative error `|a - b| / max(|a|, |b|, 1)`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let scale = norm_sq(a).sqrt().max(norm_sq(b).sqrt()).max(1.0);
    diff / scale
}

/// Gradient-oracle vs central differences at `x`.
pub fn gradient_check(model: &dyn Potential, x: &Point, step: f64) -> Result<f64> {
    let fd = finite_difference_gradient(model, x, step)?;
    let g = model.gradient_vec(x);
    Ok(relative_error(&g, &fd))
}

/// Drift implied by a target potential and a diffusion coefficient,
/// `b(x) = <div, p w>(x) / (2 p(x))` with `w = sigma sigma^T` and `p = exp(-f)`,
/// evaluated by central differences of `p w`.
///
/// Ratios `p(x +- step e_j) / p(x)` are formed as `exp(f(x) - f(x +- step e_j))`
/// so the oracle works for unnormalised densities of any scale.
pub fn drift_from_divergence(
    potential: &dyn Potential,
    diffusion: &dyn Diffusion,
    x: &Point,
    step: f64,
) -> Result<Point> {
    let d = diffusion.dim();
    check_dim(d, x.dim())?;
    check_dim(d, potential.dim())?;
    if !(step > 0.0) {
        return Err(Error::domain("finite-difference step must be > 0"));
    }
    let f0 = potential.value(x);
    let mut probe = x.to_vec();
    let mut b = vec![0.0; d];
    for j in 0..d {
        let mut side = |delta: f64| -> DMatrix<f64> {
            probe[j] = x[j] + delta;
            let ratio = (f0 - potential.value(&probe)).exp();
            let s = diffusion.diffusion_matrix(&probe);
            probe[j] = x[j];
            (&s * s.transpose()) * ratio
        };
        let wp = side(step);
        let wm = side(-step);
        for i in 0..d {
            b[i] += (wp[(i, j)] - wm[(i, j)]) / (2.0 * step);
        }
    }
    b.iter_mut().for_each(|v| *v *= 0.5);
    Point::new(b)
}
