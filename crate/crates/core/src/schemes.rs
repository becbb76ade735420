//! One-step integrators and chain simulation.
//!
//! * Euler-Maruyama: `x + h b(x) + sqrt(h) sigma(x) xi`.
//! * SRK-LD: the order-1.5 stochastic Runge-Kutta scheme for the overdamped
//!   Langevin diffusion, driven by two independent N(0, I_d) draws.
//! * SRK-ID: the derivative-free order-1.0 scheme for general Ito diffusions,
//!   driven by Brownian increments and iterated integrals.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brownian::{kpw_iterated_integrals, IteratedIntegrals, DEFAULT_LEVY_TRUNCATION};
use crate::error::{check_dim, Error, Result};
use crate::oracle::{Diffusion, Langevin, Potential};
use crate::point::{norm_sq, ParticleSet, Point};
use crate::rng::{fill_standard_normal, tags, RngStream};

/// Iterate norm above which a chain is declared divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    Em,
    SrkLd,
    SrkId,
}

impl SchemeKind {
    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::Em => "em",
            SchemeKind::SrkLd => "srk-ld",
            SchemeKind::SrkId => "srk-id",
        }
    }
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "em" => Ok(SchemeKind::Em),
            "srk-ld" => Ok(SchemeKind::SrkLd),
            "srk-id" => Ok(SchemeKind::SrkId),
            other => Err(Error::Parse(format!("unknown scheme `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    pub h: f64,
    /// Series length for the Levy areas (SRK-ID only).
    pub levy_truncation: usize,
}

impl SchemeConfig {
    pub fn new(kind: SchemeKind, h: f64) -> Result<Self> {
        let cfg = SchemeConfig {
            kind,
            h,
            levy_truncation: DEFAULT_LEVY_TRUNCATION,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_levy_truncation(mut self, n: usize) -> Result<Self> {
        self.levy_truncation = n;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::domain(format!(
                "step size must be > 0, got {}",
                self.h
            )));
        }
        if self.kind == SchemeKind::SrkId && self.levy_truncation == 0 {
            return Err(Error::domain("SRK-ID needs levy_truncation >= 1"));
        }
        Ok(())
    }
}

/// The model a chain is run on.
#[derive(Clone, Copy)]
pub enum Dynamics<'a> {
    /// Overdamped Langevin diffusion of a potential. All three schemes apply.
    Langevin(&'a dyn Potential),
    /// A general Ito diffusion. SRK-LD does not apply.
    Ito(&'a dyn Diffusion),
}

impl<'a> Dynamics<'a> {
    pub fn dim(&self) -> usize {
        match self {
            Dynamics::Langevin(p) => p.dim(),
            Dynamics::Ito(s) => s.dim(),
        }
    }

    pub fn noise_dim(&self) -> usize {
        match self {
            Dynamics::Langevin(p) => p.dim(),
            Dynamics::Ito(s) => s.noise_dim(),
        }
    }
}

/// Noise consumed by one step of a scheme.
#[derive(Debug, Clone)]
pub enum StepNoise {
    /// Raw N(0, I) draw; EM scales it by sqrt(h).
    Em {
        xi: Vec<f64>,
    },
    SrkLd {
        xi: Vec<f64>,
        eta: Vec<f64>,
    },
    SrkId {
        integrals: IteratedIntegrals,
    },
}

/// Scratch buffers reused across steps.
#[derive(Debug, Clone)]
pub struct Workspace {
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    e: Vec<f64>,
    noise: Vec<f64>,
    cols: Vec<f64>,
}

impl Workspace {
    pub fn new(d: usize, m: usize) -> Self {
        Workspace {
            a: vec![0.0; d],
            b: vec![0.0; d],
            c: vec![0.0; d],
            e: vec![0.0; d],
            noise: vec![0.0; m],
            cols: vec![0.0; d * m],
        }
    }
}

fn finite_or(v: &[f64], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Evaluation(format!("{what} is not finite")))
    }
}

pub(crate) fn em_into(
    x: &mut [f64],
    model: &dyn Diffusion,
    h: f64,
    xi: &[f64],
    ws: &mut Workspace,
) -> Result<()> {
    let m = model.noise_dim();
    if xi.len() < m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: xi.len(),
        });
    }
    let sh = h.sqrt();
    model.drift(x, &mut ws.a);
    finite_or(&ws.a, "drift")?;
    for k in 0..x.len() {
        ws.b[k] = x[k] + h * ws.a[k];
    }
    for (n, v) in ws.noise.iter_mut().zip(&xi[..m]) {
        *n = sh * v;
    }
    model.apply_diffusion(x, &ws.noise, &mut ws.b);
    x.copy_from_slice(&ws.b);
    finite_or(x, "iterate")
}

pub(crate) fn srk_ld_into(
    x: &mut [f64],
    potential: &dyn Potential,
    h: f64,
    xi: &[f64],
    eta: &[f64],
    ws: &mut Workspace,
) -> Result<()> {
    let d = x.len();
    check_dim(d, xi.len())?;
    check_dim(d, eta.len())?;
    let s = (2.0 * h).sqrt();
    let r6 = 1.0 / 6f64.sqrt();
    let r12 = 1.0 / 12f64.sqrt();

    potential.gradient(x, &mut ws.a);
    finite_or(&ws.a, "gradient")?;
    // H1 in b, H2 in c
    for k in 0..d {
        ws.b[k] = x[k] + s * ((0.5 + r6) * xi[k] + r12 * eta[k]);
        ws.c[k] = x[k] - h * ws.a[k] + s * ((0.5 - r6) * xi[k] + r12 * eta[k]);
    }
    potential.gradient(&ws.b, &mut ws.e);
    finite_or(&ws.e, "gradient")?;
    potential.gradient(&ws.c, &mut ws.a);
    finite_or(&ws.a, "gradient")?;
    for k in 0..d {
        x[k] += -0.5 * h * (ws.e[k] + ws.a[k]) + s * xi[k];
    }
    finite_or(x, "iterate")
}

pub(crate) fn srk_id_into(
    x: &mut [f64],
    model: &dyn Diffusion,
    h: f64,
    ii: &IteratedIntegrals,
    ws: &mut Workspace,
) -> Result<()> {
    let d = x.len();
    let m = model.noise_dim();
    check_dim(m, ii.noise_dim())?;
    let sh = h.sqrt();

    // sigma(x) columns, column i at cols[i*d..]
    for i in 0..m {
        model.diffusion_column(x, i, &mut ws.cols[i * d..(i + 1) * d]);
    }
    finite_or(&ws.cols, "diffusion coefficient")?;
    model.drift(x, &mut ws.a);
    finite_or(&ws.a, "drift")?;

    // e accumulates the update
    let inc = ii.increments();
    for k in 0..d {
        let mut v = x[k] + h * ws.a[k];
        for i in 0..m {
            v += ws.cols[i * d + k] * inc[i];
        }
        ws.e[k] = v;
    }
    if !model.constant_diffusion() {
        for i in 0..m {
            // offset = sum_j sigma_j(x) J[j][i] / sqrt(h)
            for k in 0..d {
                let mut off = 0.0;
                for j in 0..m {
                    off += ws.cols[j * d + k] * ii.get(j, i);
                }
                off /= sh;
                ws.b[k] = x[k] + off;
                ws.c[k] = x[k] - off;
            }
            model.diffusion_column(&ws.b, i, &mut ws.a);
            for k in 0..d {
                ws.e[k] += 0.5 * sh * ws.a[k];
            }
            model.diffusion_column(&ws.c, i, &mut ws.a);
            for k in 0..d {
                ws.e[k] -= 0.5 * sh * ws.a[k];
            }
        }
    }
    x.copy_from_slice(&ws.e);
    finite_or(x, "iterate")
}

/// One Euler-Maruyama step. `xi` is a raw N(0, I) draw of length >= m; only
/// its first m entries are used.
pub fn em_step(x: &[f64], model: &dyn Diffusion, h: f64, xi: &[f64]) -> Result<Point> {
    check_dim(model.dim(), x.len())?;
    let mut ws = Workspace::new(model.dim(), model.noise_dim());
    let mut out = x.to_vec();
    em_into(&mut out, model, h, xi, &mut ws)?;
    Point::new(out)
}

/// One SRK-LD step; three gradient evaluations.
pub fn srk_ld_step(
    x: &[f64],
    potential: &dyn Potential,
    h: f64,
    xi: &[f64],
    eta: &[f64],
) -> Result<Point> {
    check_dim(potential.dim(), x.len())?;
    let mut ws = Workspace::new(x.len(), 0);
    let mut out = x.to_vec();
    srk_ld_into(&mut out, potential, h, xi, eta, &mut ws)?;
    Point::new(out)
}

/// One SRK-ID step. `ii` must be built with the same `h` and m = model.m.
pub fn srk_id_step(
    x: &[f64],
    model: &dyn Diffusion,
    h: f64,
    ii: &IteratedIntegrals,
) -> Result<Point> {
    check_dim(model.dim(), x.len())?;
    let mut ws = Workspace::new(model.dim(), model.noise_dim());
    let mut out = x.to_vec();
    srk_id_into(&mut out, model, h, ii, &mut ws)?;
    Point::new(out)
}

/// A configured scheme bound to a model.
pub struct Stepper<'a> {
    cfg: SchemeConfig,
    potential: Option<&'a dyn Potential>,
    langevin: Option<Langevin<&'a dyn Potential>>,
    ito: Option<&'a dyn Diffusion>,
    d: usize,
    m: usize,
}

impl<'a> Stepper<'a> {
    pub fn new(dynamics: Dynamics<'a>, cfg: SchemeConfig) -> Result<Self> {
        cfg.validate()?;
        let (potential, langevin, ito) = match dynamics {
            Dynamics::Langevin(p) => (Some(p), Some(Langevin(p)), None),
            Dynamics::Ito(s) => (None, None, Some(s)),
        };
        if cfg.kind == SchemeKind::SrkLd && potential.is_none() {
            return Err(Error::domain(
                "SRK-LD integrates the Langevin diffusion of a potential; got a general diffusion",
            ));
        }
        Ok(Stepper {
            cfg,
            potential,
            langevin,
            ito,
            d: dynamics.dim(),
            m: dynamics.noise_dim(),
        })
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.cfg
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn noise_dim(&self) -> usize {
        self.m
    }

    pub fn diffusion(&self) -> &dyn Diffusion {
        match (&self.langevin, self.ito) {
            (Some(l), _) => l,
            (None, Some(s)) => s,
            _ => unreachable!("stepper holds a model"),
        }
    }

    pub fn workspace(&self) -> Workspace {
        Workspace::new(self.d, self.m)
    }

    /// Draw the noise of step `stream` (already keyed by particle and step).
    pub fn draw_noise(&self, stream: RngStream) -> Result<StepNoise> {
        let width = self.d.max(self.m);
        let mut xi = vec![0.0; width];
        fill_standard_normal(&mut stream.tag(tags::XI).rng(), &mut xi);
        Ok(match self.cfg.kind {
            SchemeKind::Em => StepNoise::Em { xi },
            SchemeKind::SrkLd => {
                let mut eta = vec![0.0; self.d];
                fill_standard_normal(&mut stream.tag(tags::ETA).rng(), &mut eta);
                StepNoise::SrkLd { xi, eta }
            }
            SchemeKind::SrkId => {
                let sh = self.cfg.h.sqrt();
                let inc: Vec<f64> = xi[..self.m].iter().map(|v| sh * v).collect();
                let integrals =
                    kpw_iterated_integrals(stream, &inc, self.cfg.h, self.cfg.levy_truncation)?;
                StepNoise::SrkId { integrals }
            }
        })
    }

    /// Advance `x` in place by one step with the supplied noise.
    pub fn advance(&self, x: &mut [f64], noise: &StepNoise, ws: &mut Workspace) -> Result<()> {
        let h = self.cfg.h;
        match (self.cfg.kind, noise) {
            (SchemeKind::Em, StepNoise::Em { xi }) => em_into(x, self.diffusion(), h, xi, ws),
            (SchemeKind::SrkLd, StepNoise::SrkLd { xi, eta }) => {
                let p = self.potential.expect("checked at construction");
                srk_ld_into(x, p, h, xi, eta, ws)
            }
            (SchemeKind::SrkId, StepNoise::SrkId { integrals }) => {
                srk_id_into(x, self.diffusion(), h, integrals, ws)
            }
            (kind, _) => Err(Error::domain(format!("noise does not match scheme {kind}"))),
        }
    }
}

/// Whether `x` counts as divergent.
pub fn is_divergent(x: &[f64]) -> bool {
    let n = norm_sq(x);
    !n.is_finite() || n > DIVERGENCE_THRESHOLD * DIVERGENCE_THRESHOLD
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub particles: ParticleSet,
}

/// Particle sets recorded at a stride, with strictly increasing step indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
}

impl Trajectory {
    pub fn last(&self) -> &ParticleSet {
        &self
            .snapshots
            .last()
            .expect("trajectory is never empty")
            .particles
    }
}

/// Steps at which a run of `steps` steps with `stride` records a snapshot.
pub fn snapshot_steps(steps: usize, stride: usize) -> Vec<usize> {
    let stride = stride.max(1);
    let mut v: Vec<usize> = (0..=steps).step_by(stride).collect();
    if *v.last().unwrap() != steps {
        v.push(steps);
    }
    v
}

/// Run every particle of `initial` for `steps` steps.
///
/// Particle `p` at step `k` draws its noise from `RngStream::new(seed)
/// .particle(p).step(k)`, so the result is independent of scheduling.
pub fn simulate(
    initial: &ParticleSet,
    dynamics: Dynamics<'_>,
    cfg: &SchemeConfig,
    steps: usize,
    seed: u64,
    stride: usize,
) -> Result<Trajectory> {
    if stride == 0 {
        return Err(Error::domain("snapshot stride must be >= 1"));
    }
    let stepper = Stepper::new(dynamics, *cfg)?;
    let d = stepper.dim();
    check_dim(d, initial.dim())?;
    let marks = snapshot_steps(steps, stride);
    let root = RngStream::new(seed);

    let per_particle: Vec<Result<Vec<f64>>> = (0..initial.len())
        .into_par_iter()
        .map(|p| {
            let mut x = initial.row(p).to_vec();
            let mut ws = stepper.workspace();
            let mut rec = Vec::with_capacity(marks.len() * d);
            rec.extend_from_slice(&x);
            let mut next_mark = 1;
            for k in 0..steps {
                let noise = stepper.draw_noise(root.particle(p as u64).step(k as u64))?;
                match stepper.advance(&mut x, &noise, &mut ws) {
                    Ok(()) if !is_divergent(&x) => {}
                    Ok(()) | Err(Error::Evaluation(_)) => {
                        return Err(Error::Diverged {
                            particle: p,
                            step: k + 1,
                        })
                    }
                    Err(e) => return Err(e),
                }
                if next_mark < marks.len() && marks[next_mark] == k + 1 {
                    rec.extend_from_slice(&x);
                    next_mark += 1;
                }
            }
            Ok(rec)
        })
        .collect();

    let mut rows = Vec::with_capacity(per_particle.len());
    for r in per_particle {
        rows.push(r?);
    }
    let snapshots = marks
        .iter()
        .enumerate()
        .map(|(s, &step)| {
            let mut data = Vec::with_capacity(rows.len() * d);
            for r in &rows {
                data.extend_from_slice(&r[s * d..(s + 1) * d]);
            }
            Ok(Snapshot {
                step,
                particles: ParticleSet::from_flat(d, data)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory { snapshots })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Quadratic;

    #[test]
    fn snapshot_marks() {
        assert_eq!(snapshot_steps(0, 1), vec![0]);
        assert_eq!(snapshot_steps(5, 2), vec![0, 2, 4, 5]);
        assert_eq!(snapshot_steps(4, 2), vec![0, 2, 4]);
    }

    #[test]
    fn config_validation() {
        assert!(SchemeConfig::new(SchemeKind::Em, 0.0).is_err());
        assert!(SchemeConfig::new(SchemeKind::Em, f64::NAN).is_err());
        let c = SchemeConfig::new(SchemeKind::SrkId, 0.1).unwrap();
        assert!(c.with_levy_truncation(0).is_err());
    }

    #[test]
    fn srk_ld_needs_a_potential() {
        let q = Quadratic { dim: 1 };
        let lang = Langevin(q);
        let cfg = SchemeConfig::new(SchemeKind::SrkLd, 0.1).unwrap();
        assert!(Stepper::new(Dynamics::Ito(&lang), cfg).is_err());
        assert!(Stepper::new(Dynamics::Langevin(&q), cfg).is_ok());
    }

    #[test]
    fn em_rejects_short_noise() {
        let lang = Langevin(Quadratic { dim: 2 });
        assert!(matches!(
            em_step(&[1.0, 1.0], &lang, 0.1, &[0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(em_step(&[1.0], &lang, 0.1, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn mismatched_noise_kind_rejected() {
        let q = Quadratic { dim: 1 };
        let st = Stepper::new(
            Dynamics::Langevin(&q),
            SchemeConfig::new(SchemeKind::Em, 0.1).unwrap(),
        )
        .unwrap();
        let mut ws = st.workspace();
        let noise = StepNoise::SrkLd {
            xi: vec![0.0],
            eta: vec![0.0],
        };
        assert!(st.advance(&mut [1.0], &noise, &mut ws).is_err());
    }
}
