use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sweep::{metric_at, SweepResult, SweepRow};
use crate::error::{check_dim, Error, Result};
use crate::metrics::{
    corrected_w2_squared, energy_distance_squared, ksd_squared_potential, ImqKernel,
};
use crate::oracle::Potential;
use crate::point::ParticleSet;
use crate::schemes::{simulate, Dynamics, SchemeConfig, SchemeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComparisonMetric {
    /// Null-corrected squared W2; the chain population is split in halves
    /// and compared with the two halves of the reference sample.
    CorrectedW2,
    /// Squared energy distance between the chain population and the
    /// reference sample.
    Energy,
    /// Squared IMQ kernel Stein discrepancy against the target.
    Ksd,
}

impl ComparisonMetric {
    pub fn name(&self) -> &'static str {
        match self {
            ComparisonMetric::CorrectedW2 => "corrected_w2_sq",
            ComparisonMetric::Energy => "energy_sq",
            ComparisonMetric::Ksd => "ksd_sq",
        }
    }
}

impl std::str::FromStr for ComparisonMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "corrected-w2" | "corrected_w2_sq" => Ok(ComparisonMetric::CorrectedW2),
            "energy" | "energy_sq" => Ok(ComparisonMetric::Energy),
            "ksd" | "ksd_sq" => Ok(ComparisonMetric::Ksd),
            other => Err(Error::Parse(format!("unknown metric {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonPlan {
    pub h: f64,
    pub steps: usize,
    /// Metrics are evaluated every `stride` steps (and at the last step).
    pub stride: usize,
    pub kernel_c: f64,
    pub kernel_beta: f64,
}

impl ComparisonPlan {
    pub fn new(h: f64, steps: usize, stride: usize) -> Self {
        let k = ImqKernel::default();
        ComparisonPlan {
            h,
            steps,
            stride,
            kernel_c: k.c,
            kernel_beta: k.beta,
        }
    }
}

fn evaluate(
    metric: ComparisonMetric,
    chain: &ParticleSet,
    reference: &ParticleSet,
    potential: &dyn Potential,
    kernel: ImqKernel,
) -> Result<f64> {
    let n = chain.len();
    match metric {
        ComparisonMetric::CorrectedW2 => {
            let half = n / 2;
            let a = chain.slice(0, half)?;
            let a2 = chain.slice(half, 2 * half)?;
            let b = reference.slice(0, half)?;
            let b2 = reference.slice(half, 2 * half)?;
            Ok(corrected_w2_squared(&a, &a2, &b, &b2)?.corrected)
        }
        ComparisonMetric::Energy => energy_distance_squared(chain, &reference.slice(0, n)?),
        ComparisonMetric::Ksd => ksd_squared_potential(chain, potential, kernel),
    }
}

/// Runs every scheme from the same initial set with the same noise streams
/// and evaluates each metric along the way. Metric names carry the step,
/// e.g. `corrected_w2_sq@200`.
#[allow(clippy::too_many_arguments)]
pub fn scheme_comparison(
    potential: &dyn Potential,
    schemes: &[SchemeKind],
    plan: &ComparisonPlan,
    initial: &ParticleSet,
    metrics: &[ComparisonMetric],
    reference: &ParticleSet,
    seed: u64,
) -> Result<SweepResult> {
    if schemes.is_empty() || metrics.is_empty() {
        return Err(Error::domain("need at least one scheme and one metric"));
    }
    check_dim(potential.dim(), initial.dim())?;
    check_dim(initial.dim(), reference.dim())?;
    let n = initial.len();
    if metrics.contains(&ComparisonMetric::CorrectedW2) && n < 4 {
        return Err(Error::domain("corrected W2 needs at least 4 particles"));
    }
    if reference.len() < n {
        return Err(Error::SizeMismatch {
            left: n,
            right: reference.len(),
        });
    }
    let kernel = ImqKernel::new(plan.kernel_c, plan.kernel_beta)?;
    let mut out = SweepResult::new();
    for &kind in schemes {
        let cfg = SchemeConfig::new(kind, plan.h)?;
        let traj = simulate(
            initial,
            Dynamics::Langevin(potential),
            &cfg,
            plan.steps,
            seed,
            plan.stride,
        )?;
        let cells: Vec<(usize, ComparisonMetric)> = traj
            .snapshots
            .iter()
            .enumerate()
            .flat_map(|(i, _)| metrics.iter().map(move |&m| (i, m)))
            .collect();
        let values: Vec<f64> = cells
            .par_iter()
            .map(|&(i, m)| {
                evaluate(
                    m,
                    &traj.snapshots[i].particles,
                    reference,
                    potential,
                    kernel,
                )
            })
            .collect::<Result<_>>()?;
        for (&(i, m), v) in cells.iter().zip(values) {
            out.push(SweepRow {
                scheme: kind.name().into(),
                h: plan.h,
                metric: metric_at(m.name(), traj.snapshots[i].step),
                value: v,
                stderr: 0.0,
                n,
                seed,
            })?;
        }
    }
    Ok(out)
}

/// Mean of a metric over the snapshots at or after `from_step`.
pub fn tail_average(
    result: &SweepResult,
    scheme: SchemeKind,
    metric: ComparisonMetric,
    from_step: usize,
) -> Option<f64> {
    let prefix = format!("{}@", metric.name());
    let vals: Vec<f64> = result
        .rows
        .iter()
        .filter(|r| r.scheme == scheme.name())
        .filter_map(|r| {
            let step: usize = r.metric.strip_prefix(&prefix)?.parse().ok()?;
            (step >= from_step).then_some(r.value)
        })
        .collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::GaussianMixture;
    use crate::rng::{tags, RngStream};

    fn setup() -> (GaussianMixture, ParticleSet, ParticleSet) {
        let mix = GaussianMixture::new(vec![0.35, 0.35]).unwrap();
        let init = mix.sample(RngStream::new(1).tag(tags::INIT), 40).unwrap();
        let reference = mix
            .sample(RngStream::new(1).tag(tags::REFERENCE), 40)
            .unwrap();
        (mix, init, reference)
    }

    #[test]
    fn duplicate_scheme_gives_identical_series() {
        let (mix, init, reference) = setup();
        let plan = ComparisonPlan::new(0.3, 10, 5);
        let all = [
            ComparisonMetric::CorrectedW2,
            ComparisonMetric::Energy,
            ComparisonMetric::Ksd,
        ];
        let r = scheme_comparison(
            &mix,
            &[SchemeKind::Em, SchemeKind::Em],
            &plan,
            &init,
            &all,
            &reference,
            9,
        )
        .unwrap();
        let per = r.rows.len() / 2;
        assert_eq!(per, 3 * 3);
        for i in 0..per {
            assert_eq!(r.rows[i].metric, r.rows[i + per].metric);
            assert_eq!(r.rows[i].value, r.rows[i + per].value);
        }
    }

    #[test]
    fn series_length_follows_stride() {
        let (mix, init, reference) = setup();
        let plan = ComparisonPlan::new(0.3, 25, 10);
        let r = scheme_comparison(
            &mix,
            &[SchemeKind::SrkLd],
            &plan,
            &init,
            &[ComparisonMetric::Energy],
            &reference,
            2,
        )
        .unwrap();
        let steps: Vec<&str> = r.rows.iter().map(|r| r.metric.as_str()).collect();
        assert_eq!(
            steps,
            vec![
                "energy_sq@0",
                "energy_sq@10",
                "energy_sq@20",
                "energy_sq@25"
            ]
        );
        assert!(tail_average(&r, SchemeKind::SrkLd, ComparisonMetric::Energy, 20).is_some());
        assert!(tail_average(&r, SchemeKind::Em, ComparisonMetric::Energy, 0).is_none());
    }

    #[test]
    fn short_reference_rejected() {
        let (mix, init, reference) = setup();
        let plan = ComparisonPlan::new(0.3, 1, 1);
        let short = reference.slice(0, 10).unwrap();
        let r = scheme_comparison(
            &mix,
            &[SchemeKind::Em],
            &plan,
            &init,
            &[ComparisonMetric::Energy],
            &short,
            2,
        );
        assert!(matches!(r, Err(Error::SizeMismatch { .. })));
    }

    #[test]
    fn metric_names_parse() {
        assert_eq!(
            "ksd".parse::<ComparisonMetric>().unwrap(),
            ComparisonMetric::Ksd
        );
        assert!("w1".parse::<ComparisonMetric>().is_err());
    }
}
