use serde::{Deserialize, Serialize};

use super::coupling::{coupled_mse, CouplingPlan, PsiQuadrature, DEFAULT_REFINEMENT};
use crate::brownian::DEFAULT_LEVY_TRUNCATION;
use crate::error::{Error, Result};
use crate::point::Point;
use crate::schemes::{Dynamics, SchemeKind};

/// Least-squares line through `(ln h, ln value)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

impl OrderFit {
    /// Mean-square order: half the MSE slope.
    pub fn order(&self) -> f64 {
        0.5 * self.slope
    }
}

pub fn fit_log_log(hs: &[f64], values: &[f64]) -> Result<OrderFit> {
    if hs.len() != values.len() {
        return Err(Error::SizeMismatch {
            left: hs.len(),
            right: values.len(),
        });
    }
    if hs.len() < 3 {
        return Err(Error::domain("need at least 3 points for an order fit"));
    }
    if hs
        .iter()
        .chain(values)
        .any(|v| !(*v > 0.0 && v.is_finite()))
    {
        return Err(Error::domain(
            "order fit needs positive finite step sizes and values",
        ));
    }
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("step sizes must not all be equal"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        let ss_res: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum();
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(OrderFit {
        slope,
        intercept,
        r_squared,
        points: hs.len(),
    })
}

/// Knobs of a strong-order study beyond the required arguments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderOptions {
    pub refinement: usize,
    pub levy_truncation: usize,
    pub quadrature: PsiQuadrature,
    /// Shared starting point; defaults to all ones.
    pub initial: Option<Vec<f64>>,
}

impl Default for OrderOptions {
    fn default() -> Self {
        OrderOptions {
            refinement: DEFAULT_REFINEMENT,
            levy_truncation: DEFAULT_LEVY_TRUNCATION,
            quadrature: PsiQuadrature::default(),
            initial: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsePoint {
    pub h: f64,
    pub mse: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderStudy {
    pub scheme: SchemeKind,
    pub fit: OrderFit,
    pub points: Vec<MsePoint>,
}

/// Fits the slope of `ln MSE(T)` against `ln h` from coupled runs.
#[allow(clippy::too_many_arguments)]
pub fn strong_order_fit(
    dynamics: Dynamics<'_>,
    scheme: SchemeKind,
    hs: &[f64],
    horizon: f64,
    particles: usize,
    seed: u64,
    opts: &OrderOptions,
) -> Result<OrderStudy> {
    if hs.len() < 3 {
        return Err(Error::domain("need at least 3 step sizes"));
    }
    let lo = hs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = hs.iter().cloned().fold(0.0, f64::max);
    if !(lo > 0.0) || hi < 4.0 * lo * (1.0 - 1e-12) {
        return Err(Error::domain(
            "step sizes must be positive and span at least a factor of 4",
        ));
    }
    let initial = match &opts.initial {
        Some(v) => Point::new(v.clone())?,
        None => Point::new(vec![1.0; dynamics.dim()])?,
    };
    let mut points = Vec::with_capacity(hs.len());
    for &h in hs {
        let mut plan = CouplingPlan::new(dynamics, h, horizon, particles);
        plan.refinement = opts.refinement;
        plan.levy_truncation = opts.levy_truncation;
        plan.quadrature = opts.quadrature;
        let series = coupled_mse(&plan, &[scheme], &initial, seed)?;
        let (mse, stderr) = series[0].final_mse();
        points.push(MsePoint { h, mse, stderr });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.h).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.mse).collect();
    Ok(OrderStudy {
        scheme,
        fit: fit_log_log(&xs, &ys)?,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Quadratic;
    use proptest::prelude::*;

    #[test]
    fn rejects_degenerate_input() {
        assert!(fit_log_log(&[0.1, 0.2], &[1.0, 2.0]).is_err());
        assert!(fit_log_log(&[0.1, 0.2, 0.4], &[1.0, 0.0, 2.0]).is_err());
        assert!(fit_log_log(&[0.1, 0.1, 0.1], &[1.0, 2.0, 3.0]).is_err());
        assert!(fit_log_log(&[0.1, 0.2, 0.4], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn order_study_preconditions() {
        let q = Quadratic { dim: 1 };
        let d = Dynamics::Langevin(&q);
        let o = OrderOptions::default();
        assert!(strong_order_fit(d, SchemeKind::Em, &[0.1, 0.2], 1.0, 10, 1, &o).is_err());
        assert!(strong_order_fit(d, SchemeKind::Em, &[0.1, 0.15, 0.2], 1.0, 10, 1, &o).is_err());
    }

    proptest! {
        #[test]
        fn exact_power_law_is_recovered(c in 1e-3f64..1e3, p in 0.5f64..4.0) {
            let hs = [0.025f64, 0.05, 0.1, 0.2];
            let vals: Vec<f64> = hs.iter().map(|h| c * h.powf(p)).collect();
            let fit = fit_log_log(&hs, &vals).unwrap();
            prop_assert!((fit.slope - p).abs() < 1e-10);
            prop_assert!((fit.intercept - c.ln()).abs() < 1e-9);
            prop_assert!((fit.r_squared - 1.0).abs() < 1e-12);
            prop_assert!((fit.order() - p / 2.0).abs() < 1e-10);
        }
    }
}
