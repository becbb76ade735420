//! Synchronous coupling of coarse schemes to a fine Euler-Maruyama path.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brownian::{kpw_iterated_integrals, DEFAULT_LEVY_TRUNCATION};
use crate::error::{check_dim, Error, Result};
use crate::point::{sq_dist, Point};
use crate::rng::{fill_standard_normal, tags, RngStream};
use crate::schemes::{
    em_into, is_divergent, Dynamics, SchemeConfig, SchemeKind, StepNoise, Stepper,
};

pub const DEFAULT_REFINEMENT: usize = 64;

/// How the time integral of the fine lattice path over a coarse step is formed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PsiQuadrature {
    /// `h_f * sum_j B(t_j)` over the left endpoints; matches the drift
    /// sampling of the fine EM reference.
    #[default]
    LeftRiemann,
    /// Integral of the piecewise-linear interpolant of the lattice.
    Trapezoid,
}

#[derive(Clone, Copy)]
pub struct CouplingPlan<'a> {
    pub dynamics: Dynamics<'a>,
    pub h: f64,
    /// Fine step is `h / refinement`.
    pub refinement: usize,
    pub horizon: f64,
    pub particles: usize,
    pub levy_truncation: usize,
    pub quadrature: PsiQuadrature,
}

impl<'a> CouplingPlan<'a> {
    pub fn new(dynamics: Dynamics<'a>, h: f64, horizon: f64, particles: usize) -> Self {
        CouplingPlan {
            dynamics,
            h,
            refinement: DEFAULT_REFINEMENT,
            horizon,
            particles,
            levy_truncation: DEFAULT_LEVY_TRUNCATION,
            quadrature: PsiQuadrature::default(),
        }
    }

    /// Number of coarse steps; errors unless `horizon / h` is a whole number.
    pub fn coarse_steps(&self) -> Result<usize> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::domain(format!(
                "step size must be > 0, got {}",
                self.h
            )));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::domain(format!(
                "horizon must be > 0, got {}",
                self.horizon
            )));
        }
        let ratio = self.horizon / self.h;
        let n = ratio.round();
        if (ratio - n).abs() > 1e-9 * ratio.max(1.0) || n < 1.0 {
            return Err(Error::domain(format!(
                "horizon {} is not a whole number of steps of {}",
                self.horizon, self.h
            )));
        }
        Ok(n as usize)
    }

    pub fn validate(&self) -> Result<usize> {
        if self.refinement < 2 {
            return Err(Error::domain("refinement must be >= 2"));
        }
        if self.particles == 0 {
            return Err(Error::domain("need at least one particle"));
        }
        if self.levy_truncation == 0 {
            return Err(Error::domain("Levy-area truncation must be >= 1"));
        }
        self.coarse_steps()
    }
}

/// Recover SRK-LD's `(xi, eta)` from the coarse increment `B_h` and the time
/// integral `psi = int_0^h B_s ds`:
/// `xi = B_h / sqrt(h)`, `eta = 2 sqrt(3) (psi / h^{3/2} - xi / 2)`.
pub fn reconstruct_srk_ld_noise(b_h: &[f64], psi: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    let sh = h.sqrt();
    let h32 = h * sh;
    let c = 2.0 * 3f64.sqrt();
    let xi: Vec<f64> = b_h.iter().map(|b| b / sh).collect();
    let eta = psi
        .iter()
        .zip(&xi)
        .map(|(p, x)| c * (p / h32 - 0.5 * x))
        .collect();
    (xi, eta)
}

/// Aggregates the fine lattice over one coarse step.
pub(crate) struct CoarseNoise {
    pub b_h: Vec<f64>,
    pub psi: Vec<f64>,
}

/// Walks one particle's fine Brownian lattice.
pub(crate) struct FineLattice {
    root: RngStream,
    h_fine: f64,
    sqrt_h_fine: f64,
    next: u64,
    pub xi: Vec<f64>,
}

impl FineLattice {
    pub fn new(seed: u64, particle: usize, m: usize, h_fine: f64) -> Self {
        FineLattice {
            root: RngStream::new(seed)
                .particle(particle as u64)
                .tag(tags::FINE_BROWNIAN),
            h_fine,
            sqrt_h_fine: h_fine.sqrt(),
            next: 0,
            xi: vec![0.0; m],
        }
    }

    /// Draws the next N(0, I) lattice variable into `self.xi`.
    pub fn advance(&mut self) {
        let mut rng = self.root.step(self.next).rng();
        fill_standard_normal(&mut rng, &mut self.xi);
        self.next += 1;
    }

    /// Adds the current increment into the running aggregates.
    pub fn accumulate(&self, acc: &mut CoarseNoise, quadrature: PsiQuadrature) {
        for k in 0..self.xi.len() {
            let db = self.sqrt_h_fine * self.xi[k];
            let left = acc.b_h[k];
            acc.b_h[k] += db;
            acc.psi[k] += self.h_fine
                * match quadrature {
                    PsiQuadrature::LeftRiemann => left,
                    PsiQuadrature::Trapezoid => left + 0.5 * db,
                };
        }
    }
}

/// Per-scheme result of [`coupled_mse`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseSeries {
    pub scheme: SchemeKind,
    pub h: f64,
    /// Coarse step indices `0..=N`.
    pub steps: Vec<usize>,
    pub mse: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl MseSeries {
    pub fn final_mse(&self) -> (f64, f64) {
        (*self.mse.last().unwrap(), *self.stderr.last().unwrap())
    }
}

fn coarse_noise(
    kind: SchemeKind,
    acc: &CoarseNoise,
    h: f64,
    stream: RngStream,
    truncation: usize,
) -> Result<StepNoise> {
    Ok(match kind {
        SchemeKind::Em => StepNoise::Em {
            xi: acc.b_h.iter().map(|b| b / h.sqrt()).collect(),
        },
        SchemeKind::SrkLd => {
            let (xi, eta) = reconstruct_srk_ld_noise(&acc.b_h, &acc.psi, h);
            StepNoise::SrkLd { xi, eta }
        }
        SchemeKind::SrkId => StepNoise::SrkId {
            integrals: kpw_iterated_integrals(stream, &acc.b_h, h, truncation)?,
        },
    })
}

/// Mean squared gap between a fine-step EM reference and each coarse scheme,
/// all driven by the same Brownian lattice and started at `initial`.
///
/// Lévy areas for SRK-ID come from the coarse-step substream
/// `RngStream::new(seed).particle(p).step(n)`.
pub fn coupled_mse(
    plan: &CouplingPlan<'_>,
    schemes: &[SchemeKind],
    initial: &Point,
    seed: u64,
) -> Result<Vec<MseSeries>> {
    let n_coarse = plan.validate()?;
    if schemes.is_empty() {
        return Err(Error::domain("no schemes to couple"));
    }
    let d = plan.dynamics.dim();
    let m = plan.dynamics.noise_dim();
    check_dim(d, initial.dim())?;
    let r = plan.refinement;
    let h = plan.h;
    let h_fine = h / r as f64;
    let fine = Stepper::new(plan.dynamics, SchemeConfig::new(SchemeKind::Em, h_fine)?)?;
    let coarse: Vec<Stepper> = schemes
        .iter()
        .map(|&k| {
            let cfg = SchemeConfig::new(k, h)?.with_levy_truncation(plan.levy_truncation)?;
            Stepper::new(plan.dynamics, cfg)
        })
        .collect::<Result<_>>()?;
    let s = schemes.len();
    let width = n_coarse + 1;

    // errors[p][c * width + n]
    let per_particle: Vec<Result<Vec<f64>>> = (0..plan.particles)
        .into_par_iter()
        .map(|p| {
            let mut lattice = FineLattice::new(seed, p, m, h_fine);
            let mut xf = initial.to_vec();
            let mut xc: Vec<Vec<f64>> = vec![initial.to_vec(); s];
            let mut wf = fine.workspace();
            let mut wc: Vec<_> = coarse.iter().map(|st| st.workspace()).collect();
            let mut errs = vec![0.0; s * width];
            let mut acc = CoarseNoise {
                b_h: vec![0.0; m],
                psi: vec![0.0; m],
            };
            let diverged = |step| Error::Diverged { particle: p, step };
            for n in 0..n_coarse {
                acc.b_h.fill(0.0);
                acc.psi.fill(0.0);
                for _ in 0..r {
                    lattice.advance();
                    lattice.accumulate(&mut acc, plan.quadrature);
                    if em_into(&mut xf, fine.diffusion(), h_fine, &lattice.xi, &mut wf).is_err()
                        || is_divergent(&xf)
                    {
                        return Err(diverged(n + 1));
                    }
                }
                let stream = RngStream::new(seed).particle(p as u64).step(n as u64);
                for c in 0..s {
                    let noise = coarse_noise(schemes[c], &acc, h, stream, plan.levy_truncation)?;
                    if coarse[c].advance(&mut xc[c], &noise, &mut wc[c]).is_err()
                        || is_divergent(&xc[c])
                    {
                        return Err(diverged(n + 1));
                    }
                    errs[c * width + n + 1] = sq_dist(&xf, &xc[c]);
                }
            }
            Ok(errs)
        })
        .collect();

    let errs = per_particle.into_iter().collect::<Result<Vec<_>>>()?;
    let np = plan.particles as f64;
    let mut mean = vec![0.0; s * width];
    for e in &errs {
        for (m, v) in mean.iter_mut().zip(e) {
            *m += v / np;
        }
    }
    let mut var = vec![0.0; s * width];
    if plan.particles > 1 {
        for e in &errs {
            for ((w, v), m) in var.iter_mut().zip(e).zip(&mean) {
                *w += (v - m).powi(2) / (np - 1.0);
            }
        }
    }
    Ok(schemes
        .iter()
        .enumerate()
        .map(|(c, &kind)| {
            let mut mse = Vec::with_capacity(width);
            let mut se = Vec::with_capacity(width);
            for n in 0..width {
                mse.push(mean[c * width + n]);
                se.push((var[c * width + n] / np).sqrt());
            }
            MseSeries {
                scheme: kind,
                h,
                steps: (0..width).collect(),
                mse,
                stderr: se,
            }
        })
        .collect())
}
