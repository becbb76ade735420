//! Long-run error of each scheme as a function of the step size.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::order::{fit_log_log, OrderFit};
use super::sweep::{SweepResult, SweepRow, DIVERGED};
use crate::error::{Error, Result};
use crate::metrics::{corrected_w2_squared, gaussian_w2_squared, GaussianParams};
use crate::models::{GaussianMixture, Quadratic};
use crate::point::ParticleSet;
use crate::rng::{fill_standard_normal, tags, RngStream};
use crate::schemes::{
    is_divergent, simulate, Dynamics, SchemeConfig, SchemeKind, StepNoise, Stepper,
};

/// Target of a stationary-bias sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BiasTarget {
    /// `f(x) = |x|^2 / 2`, stationary law N(0, I).
    Ou {
        dim: usize,
    },
    Mixture {
        a: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StationaryOptions {
    /// Steps discarded before measuring; `None` means `ceil(10 / h)`.
    pub burn_in: Option<usize>,
    /// OU only: time span after burn-in over which moments are averaged.
    pub window_time: f64,
    /// Mixture only: independent repetitions per step size.
    pub reps: usize,
}

impl Default for StationaryOptions {
    fn default() -> Self {
        StationaryOptions {
            burn_in: None,
            window_time: 10.0,
            reps: 4,
        }
    }
}

/// Floor on the measured part of a run (the OU window, the whole mixture
/// run), so that large step sizes still run long enough to expose divergence.
pub const MIN_RUN_STEPS: usize = 100;

pub fn default_burn_in(h: f64) -> usize {
    (10.0 / h).ceil() as usize
}

/// Seed of one `(h, rep)` cell, keyed by the bits of `h` so that adding step
/// sizes to a sweep leaves existing cells unchanged.
fn cell_seed(seed: u64, h: f64, rep: usize) -> u64 {
    RngStream::new(seed)
        .step(h.to_bits())
        .particle(rep as u64)
        .tag(tags::AUX)
        .derive_seed()
}

/// Coefficients `(c1, c2, c3)` with which
/// `Z = int_0^h e^{-(h-s)} dB_s = c1 xi + c2 eta + c3 zeta`, where `xi`, `eta`
/// are the normalized `(B_h, int B ds)` pair and `zeta` is independent.
pub fn ou_exact_coefficients(h: f64) -> [f64; 3] {
    let e = (-h).exp();
    let c1 = (1.0 - e) / h.sqrt();
    let c2 = 2.0 * 3f64.sqrt() * ((1.0 - e * (1.0 + h)) / h.powf(1.5) - 0.5 * c1);
    let var = 0.5 * (1.0 - e * e);
    let c3 = (var - c1 * c1 - c2 * c2).max(0.0).sqrt();
    [c1, c2, c3]
}

struct OuParticle {
    m2: f64,
    cv: f64,
    sum: Vec<f64>,
    last: Vec<f64>,
}

/// One OU cell; alongside the scheme it advances the exact transition driven
/// by the same noise, which yields a low-variance estimate of the chain's
/// second moment (`1 + E[X_s^2 - X_e^2]`, as the exact chain stays N(0, I)).
fn ou_cell(
    dim: usize,
    kind: SchemeKind,
    h: f64,
    particles: usize,
    seed: u64,
    opts: &StationaryOptions,
) -> Result<std::result::Result<Vec<(String, f64, f64)>, usize>> {
    let q = Quadratic { dim };
    let stepper = Stepper::new(Dynamics::Langevin(&q), SchemeConfig::new(kind, h)?)?;
    let burn = opts.burn_in.unwrap_or_else(|| default_burn_in(h));
    let window = ((opts.window_time / h).ceil() as usize).max(MIN_RUN_STEPS);
    let [c1, c2, c3] = ou_exact_coefficients(h);
    let decay = (-h).exp();
    let root = RngStream::new(seed);

    let per: Vec<Result<OuParticle>> = (0..particles)
        .into_par_iter()
        .map(|p| {
            let pr = root.particle(p as u64);
            let mut xs = vec![0.0; dim];
            fill_standard_normal(&mut pr.tag(tags::INIT).rng(), &mut xs);
            let mut xe = xs.clone();
            let mut ws = stepper.workspace();
            let mut eta = vec![0.0; dim];
            let mut zeta = vec![0.0; dim];
            let mut acc = OuParticle {
                m2: 0.0,
                cv: 0.0,
                sum: vec![0.0; dim],
                last: Vec::new(),
            };
            for k in 0..burn + window {
                let stream = pr.step(k as u64);
                let noise = stepper.draw_noise(stream)?;
                let xi: Vec<f64> = match &noise {
                    StepNoise::Em { xi } => xi[..dim].to_vec(),
                    StepNoise::SrkLd { xi, eta: e } => {
                        eta.copy_from_slice(e);
                        xi.clone()
                    }
                    StepNoise::SrkId { integrals } => integrals
                        .increments()
                        .iter()
                        .map(|v| v / h.sqrt())
                        .collect(),
                };
                if !matches!(noise, StepNoise::SrkLd { .. }) {
                    fill_standard_normal(&mut stream.tag(tags::ETA).rng(), &mut eta);
                }
                fill_standard_normal(&mut stream.tag(tags::EXACT_RESIDUAL).rng(), &mut zeta);
                match stepper.advance(&mut xs, &noise, &mut ws) {
                    Ok(()) if !is_divergent(&xs) => {}
                    Ok(()) | Err(Error::Evaluation(_)) => {
                        return Err(Error::Diverged {
                            particle: p,
                            step: k + 1,
                        })
                    }
                    Err(e) => return Err(e),
                }
                for i in 0..dim {
                    xe[i] = decay * xe[i] + 2f64.sqrt() * (c1 * xi[i] + c2 * eta[i] + c3 * zeta[i]);
                }
                if k >= burn {
                    for i in 0..dim {
                        acc.m2 += xs[i] * xs[i];
                        acc.cv += xs[i] * xs[i] - xe[i] * xe[i];
                        acc.sum[i] += xs[i];
                    }
                }
            }
            let scale = 1.0 / (window * dim) as f64;
            acc.m2 *= scale;
            acc.cv *= scale;
            acc.last = xs;
            Ok(acc)
        })
        .collect();

    let mut parts = Vec::with_capacity(particles);
    for r in per {
        match r {
            Ok(v) => parts.push(v),
            Err(Error::Diverged { step, .. }) => return Ok(Err(step)),
            Err(e) => return Err(e),
        }
    }
    let n = particles as f64;
    let mean_se = |vals: &[f64]| {
        let m = vals.iter().sum::<f64>() / n;
        let var = if particles > 1 {
            vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        (m, (var / n).sqrt())
    };
    let m2: Vec<f64> = parts.iter().map(|p| p.m2).collect();
    let cv: Vec<f64> = parts.iter().map(|p| p.cv).collect();
    let mut mean = vec![0.0; dim];
    for p in &parts {
        for (m, s) in mean.iter_mut().zip(&p.sum) {
            *m += s / (window as f64 * n);
        }
    }
    let (m2_mean, m2_se) = mean_se(&m2);
    let variance = m2_mean - mean.iter().map(|m| m * m).sum::<f64>() / dim as f64;
    let (cv_mean, cv_se) = mean_se(&cv);
    let last: Vec<f64> = parts.iter().flat_map(|p| p.last.iter().copied()).collect();
    let final_set = ParticleSet::from_flat(dim, last)?;
    let w2 = gaussian_w2_squared(
        &GaussianParams::from_sample(&final_set)?,
        &GaussianParams::standard(dim)?,
    )?;
    Ok(Ok(vec![
        ("variance".into(), variance, m2_se),
        ("variance_cv".into(), 1.0 + cv_mean, cv_se),
        ("w2_sq_gaussian".into(), w2, 0.0),
    ]))
}

/// One mixture repetition: corrected W2 between two halves of a chain
/// population and two exact reference samples.
fn mixture_rep(
    mix: &GaussianMixture,
    kind: SchemeKind,
    h: f64,
    particles: usize,
    seed: u64,
    opts: &StationaryOptions,
) -> Result<std::result::Result<(f64, f64), usize>> {
    let burn = opts
        .burn_in
        .unwrap_or_else(|| default_burn_in(h))
        .max(MIN_RUN_STEPS);
    let root = RngStream::new(seed);
    let initial = mix.sample(root.tag(tags::INIT), 2 * particles)?;
    let cfg = SchemeConfig::new(kind, h)?;
    let traj = match simulate(
        &initial,
        Dynamics::Langevin(mix),
        &cfg,
        burn,
        seed,
        burn.max(1),
    ) {
        Ok(t) => t,
        Err(Error::Diverged { step, .. }) => return Ok(Err(step)),
        Err(e) => return Err(e),
    };
    let chain = traj.last();
    let a = chain.slice(0, particles)?;
    let a2 = chain.slice(particles, 2 * particles)?;
    let b = mix.sample(root.tag(tags::REFERENCE).step(0), particles)?;
    let b2 = mix.sample(root.tag(tags::REFERENCE).step(1), particles)?;
    let r = corrected_w2_squared(&a, &a2, &b, &b2)?;
    Ok(Ok((r.corrected, r.vanilla)))
}

/// Runs `scheme` to stationarity at each `h` and records its error.
///
/// OU rows: `variance` (window-averaged empirical variance), `variance_cv`
/// (coupled control-variate estimate) and `w2_sq_gaussian` (closed-form W2
/// between the fitted Gaussian of the final population and N(0, I)).
/// Mixture rows: `corrected_w2_sq` and `vanilla_w2_sq`, averaged over
/// repetitions. A cell that leaves the finite domain yields a single
/// `diverged` row whose value is the step of divergence.
pub fn stationary_bias_sweep(
    target: &BiasTarget,
    scheme: SchemeKind,
    hs: &[f64],
    particles: usize,
    seed: u64,
    opts: &StationaryOptions,
) -> Result<SweepResult> {
    if hs.is_empty() || hs.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
        return Err(Error::domain("step sizes must be positive and finite"));
    }
    if particles < 2 {
        return Err(Error::domain("need at least 2 particles"));
    }
    if !(opts.window_time > 0.0) || opts.reps == 0 {
        return Err(Error::domain("window_time must be > 0 and reps >= 1"));
    }
    let mixture = match target {
        BiasTarget::Ou { dim } if *dim == 0 => return Err(Error::domain("dimension must be >= 1")),
        BiasTarget::Ou { .. } => None,
        BiasTarget::Mixture { a } => Some(GaussianMixture::new(a.clone())?),
    };
    let name = scheme.name().to_string();
    let row = |h: f64, metric: &str, value: f64, stderr: f64| SweepRow {
        scheme: name.clone(),
        h,
        metric: metric.into(),
        value,
        stderr,
        n: particles,
        seed,
    };

    let mut out = SweepResult::new();
    for &h in hs {
        match (target, &mixture) {
            (BiasTarget::Ou { dim }, _) => {
                match ou_cell(*dim, scheme, h, particles, cell_seed(seed, h, 0), opts)? {
                    Ok(metrics) => {
                        for (m, v, se) in metrics {
                            out.push(row(h, &m, v, se))?;
                        }
                    }
                    Err(step) => out.push(row(h, DIVERGED, step as f64, 0.0))?,
                }
            }
            (_, Some(mix)) => {
                let reps: Vec<_> = (0..opts.reps)
                    .into_par_iter()
                    .map(|r| mixture_rep(mix, scheme, h, particles, cell_seed(seed, h, r), opts))
                    .collect::<Result<_>>()?;
                if let Some(step) = reps.iter().filter_map(|r| r.err()).min() {
                    out.push(row(h, DIVERGED, step as f64, 0.0))?;
                    continue;
                }
                let ok: Vec<(f64, f64)> = reps.into_iter().map(|r| r.unwrap()).collect();
                let k = ok.len() as f64;
                for (metric, pick) in [("corrected_w2_sq", 0usize), ("vanilla_w2_sq", 1usize)] {
                    let vals: Vec<f64> = ok
                        .iter()
                        .map(|p| if pick == 0 { p.0 } else { p.1 })
                        .collect();
                    let m = vals.iter().sum::<f64>() / k;
                    let se = if ok.len() > 1 {
                        (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt()
                    } else {
                        0.0
                    };
                    out.push(row(h, metric, m, se))?;
                }
            }
            _ => unreachable!(),
        }
    }
    out.sort();
    Ok(out)
}

/// Slope of `ln |sqrt(v(h)) - 1|` against `ln h` from the OU rows of one
/// scheme, using the given variance metric.
pub fn ou_bias_fit(result: &SweepResult, scheme: SchemeKind, metric: &str) -> Result<OrderFit> {
    let rows = result.select(scheme.name(), metric);
    let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let bias: Vec<f64> = rows.iter().map(|r| (r.value.sqrt() - 1.0).abs()).collect();
    fit_log_log(&hs, &bias)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_coefficients_reproduce_the_ou_transition_law() {
        for &h in &[0.01, 0.1, 0.4, 1.5] {
            let [c1, c2, c3] = ou_exact_coefficients(h);
            let var = c1 * c1 + c2 * c2 + c3 * c3;
            assert!((var - 0.5 * (1.0 - (-2.0 * h).exp())).abs() < 1e-14);
            assert!(c3 >= 0.0);
            // leading terms: Z ~ sqrt(h) [(1 - h/2) xi - h eta / (2 sqrt 3)]
            if h <= 0.1 {
                assert!((c1 / h.sqrt() - (1.0 - 0.5 * h)).abs() < h * h);
                assert!((c2 / h.powf(1.5) + 1.0 / (2.0 * 3f64.sqrt())).abs() < h);
            }
        }
    }

    #[test]
    fn ou_sweep_is_reproducible_and_sensible() {
        let t = BiasTarget::Ou { dim: 1 };
        let o = StationaryOptions::default();
        let a = stationary_bias_sweep(&t, SchemeKind::Em, &[0.2], 2000, 4, &o).unwrap();
        let b = stationary_bias_sweep(&t, SchemeKind::Em, &[0.2], 2000, 4, &o).unwrap();
        assert_eq!(a.to_csv_string(), b.to_csv_string());
        let v = a.select("em", "variance_cv")[0];
        assert!((v.value - 1.0 / 0.9).abs() < 5.0 * v.stderr + 1e-3, "{v:?}");
    }

    #[test]
    fn unstable_step_gives_a_diverged_row() {
        let t = BiasTarget::Ou { dim: 1 };
        let o = StationaryOptions::default();
        let r = stationary_bias_sweep(&t, SchemeKind::Em, &[0.5, 2.5], 50, 1, &o).unwrap();
        let div = r.select("em", DIVERGED);
        assert_eq!(div.len(), 1);
        assert_eq!(div[0].h, 2.5);
        assert!(div[0].value >= 1.0);
        assert_eq!(r.select("em", "variance").len(), 1);
    }

    #[test]
    fn mixture_rows() {
        let t = BiasTarget::Mixture {
            a: vec![0.35, 0.35],
        };
        let o = StationaryOptions {
            reps: 2,
            ..Default::default()
        };
        let r = stationary_bias_sweep(&t, SchemeKind::SrkLd, &[0.3], 100, 2, &o).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert!(r.rows.iter().all(|row| row.stderr >= 0.0));
    }

    #[test]
    fn bad_arguments() {
        let t = BiasTarget::Ou { dim: 1 };
        let o = StationaryOptions::default();
        assert!(stationary_bias_sweep(&t, SchemeKind::Em, &[], 10, 1, &o).is_err());
        assert!(stationary_bias_sweep(&t, SchemeKind::Em, &[-0.1], 10, 1, &o).is_err());
        assert!(stationary_bias_sweep(
            &BiasTarget::Ou { dim: 0 },
            SchemeKind::Em,
            &[0.1],
            10,
            1,
            &o
        )
        .is_err());
    }
}
