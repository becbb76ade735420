//! Run configuration: parsing (TOML or JSON) and fail-fast validation.

use std::path::{Path, PathBuf};

use itosample::harness::{ComparisonMetric, DEFAULT_REFINEMENT};
use itosample::models::LabelConvention;
use itosample::{SchemeConfig, SchemeKind};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

fn default_particles() -> usize {
    1000
}

fn default_stride() -> usize {
    1
}

fn default_levy_truncation() -> usize {
    itosample::brownian::DEFAULT_LEVY_TRUNCATION
}

fn default_refinement() -> usize {
    DEFAULT_REFINEMENT
}

fn default_horizon() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub dynamics: DynamicsKind,
    #[serde(default)]
    pub schemes: Vec<SchemeKind>,
    pub h: Option<f64>,
    #[serde(default)]
    pub hs: Vec<f64>,
    pub steps: Option<usize>,
    /// Used when `steps` is absent, and as T for `order`.
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_particles")]
    pub particles: usize,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub metrics: Vec<String>,
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default = "default_levy_truncation")]
    pub levy_truncation: usize,
    #[serde(default = "default_refinement")]
    pub refinement: usize,
    /// Sample files for `metrics`: two (A, B) or four (A, A', B, B').
    #[serde(default)]
    pub inputs: Vec<PathBuf>,
    #[serde(default)]
    pub kernel: KernelSpec,
    pub experiment: Option<ExperimentSpec>,
    #[serde(default)]
    pub dissipativity: DissipativitySpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DynamicsKind {
    /// Overdamped Langevin diffusion of the model's potential.
    #[default]
    Langevin,
    /// The model's own candidate diffusion (pseudo-Huber, Student-t).
    Candidate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Standard Gaussian target; Langevin dynamics give the OU process.
    Ou {
        dim: usize,
    },
    GaussianMixture {
        a: Vec<f64>,
    },
    PseudoHuber {
        beta: f64,
        gamma: f64,
        dim: usize,
    },
    Blr {
        /// Dataset CSV as written by `gen-blr`.
        data: Option<PathBuf>,
        generate: Option<BlrGenerate>,
        #[serde(default)]
        convention: LabelConvention,
        alpha: Option<f64>,
    },
    StudentT {
        n: usize,
        dim: usize,
        nu: u32,
    },
}

impl ModelSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelSpec::Ou { .. } => "ou",
            ModelSpec::GaussianMixture { .. } => "gaussian-mixture",
            ModelSpec::PseudoHuber { .. } => "pseudo-huber",
            ModelSpec::Blr { .. } => "blr",
            ModelSpec::StudentT { .. } => "student-t",
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlrGenerate {
    pub n: usize,
    pub d: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialSpec {
    /// i.i.d. N(0, I) particles.
    #[default]
    StandardNormal,
    /// Every particle starts at `x`.
    Point { x: Vec<f64> },
    /// Warm start from a particle CSV.
    File { path: PathBuf },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub c: f64,
    pub beta: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        let k = itosample::metrics::ImqKernel::default();
        KernelSpec {
            c: k.c,
            beta: k.beta,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ExperimentSpec {
    /// Long-run error against step size; model must be `ou` or
    /// `gaussian-mixture`.
    StationaryBias {
        burn_in: Option<usize>,
        #[serde(default = "default_window_time")]
        window_time: f64,
        #[serde(default = "default_reps")]
        reps: usize,
    },
    /// Metric trajectories of each scheme at a single `h`.
    Comparison {
        /// Reference sample; generated from the target when the model is
        /// `ou` or `gaussian-mixture` and this is absent.
        reference: Option<PathBuf>,
    },
}

fn default_window_time() -> f64 {
    10.0
}

fn default_reps() -> usize {
    4
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DissipativitySpec {
    pub pairs: usize,
    pub radius: f64,
}

impl Default for DissipativitySpec {
    fn default() -> Self {
        DissipativitySpec {
            pairs: 10_000,
            radius: 5.0,
        }
    }
}

/// Subcommand the config is validated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Sample,
    Order,
    Metrics,
    Experiment,
    Dissipativity,
    GenBlr,
}

/// Metric names accepted by `metrics`.
pub const METRIC_NAMES: [&str; 4] = ["w2", "corrected-w2", "energy", "ksd"];

impl RunConfig {
    /// Reads TOML, or JSON when the extension is `.json`. Relative paths are
    /// resolved against the config file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e == "json");
        let mut cfg = Self::parse(&text, is_json)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let Some(dir) = path.parent() {
            cfg.rebase(dir);
        }
        Ok(cfg)
    }

    pub fn parse(text: &str, json: bool) -> Result<Self, String> {
        fn describe<E: std::fmt::Display>(e: serde_path_to_error::Error<E>) -> String {
            let path = e.path().to_string();
            if path.is_empty() || path == "." {
                e.inner().to_string()
            } else {
                format!("field `{path}`: {}", e.inner())
            }
        }
        if json {
            let mut de = serde_json::Deserializer::from_str(text);
            serde_path_to_error::deserialize(&mut de).map_err(describe)
        } else {
            let de = toml::Deserializer::parse(text).map_err(|e| e.to_string())?;
            serde_path_to_error::deserialize(de).map_err(describe)
        }
    }

    fn rebase(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        self.inputs.iter_mut().for_each(fix);
        if let Some(p) = self.output.as_mut() {
            fix(p);
        }
        if let InitialSpec::File { path } = &mut self.initial {
            fix(path);
        }
        if let Some(ModelSpec::Blr { data: Some(p), .. }) = &mut self.model {
            fix(p);
        }
        if let Some(ExperimentSpec::Comparison { reference: Some(p) }) = &mut self.experiment {
            fix(p);
        }
    }

    pub fn model(&self) -> Result<&ModelSpec, CliError> {
        self.model
            .as_ref()
            .ok_or_else(|| CliError::Config("field `model` is required".into()))
    }

    pub fn single_h(&self) -> Result<f64, CliError> {
        self.h
            .ok_or_else(|| CliError::Config("field `h` is required".into()))
    }

    pub fn steps_for(&self, h: f64) -> usize {
        self.steps
            .unwrap_or_else(|| (self.horizon / h).round() as usize)
    }

    /// Step sizes of a sweep: `hs`, or `[h]` when only `h` is given.
    pub fn h_list(&self) -> Vec<f64> {
        if self.hs.is_empty() {
            self.h.into_iter().collect()
        } else {
            self.hs.clone()
        }
    }

    pub fn comparison_metrics(&self) -> Result<Vec<ComparisonMetric>, CliError> {
        if self.metrics.is_empty() {
            return Ok(vec![ComparisonMetric::CorrectedW2]);
        }
        self.metrics
            .iter()
            .map(|m| {
                m.parse()
                    .map_err(|_| CliError::Config(format!("field `metrics`: unknown metric `{m}`")))
            })
            .collect()
    }

    /// Checks everything that can be checked without running a chain.
    pub fn validate(&self, cmd: Command) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!(
                "field `horizon`: must be > 0, got {}",
                self.horizon
            ));
        }
        for &h in self.h.iter().chain(&self.hs) {
            if !(h > 0.0 && h.is_finite()) {
                return bad(format!("step sizes must be positive and finite, got {h}"));
            }
        }
        if self.stride == 0 {
            return bad("field `stride`: must be >= 1".into());
        }
        if self.levy_truncation == 0 || self.refinement == 0 {
            return bad("`levy_truncation` and `refinement` must be >= 1".into());
        }
        let needs_schemes = matches!(cmd, Command::Sample | Command::Order | Command::Experiment);
        if needs_schemes {
            if self.schemes.is_empty() {
                return bad("field `schemes`: at least one scheme is required".into());
            }
            if self.particles == 0 {
                return bad("field `particles`: must be >= 1".into());
            }
            if self.dynamics == DynamicsKind::Candidate && self.schemes.contains(&SchemeKind::SrkLd)
            {
                return bad(
                    "SRK-LD applies to Langevin dynamics only (`dynamics = \"langevin\"`)".into(),
                );
            }
            for &s in &self.schemes {
                for h in self.h_list() {
                    SchemeConfig::new(s, h)
                        .and_then(|c| c.with_levy_truncation(self.levy_truncation))
                        .map_err(|e| CliError::Config(e.to_string()))?;
                }
            }
        }
        match cmd {
            Command::Sample => {
                self.single_h()?;
                self.model()?;
            }
            Command::Order => {
                self.model()?;
                let hs = &self.hs;
                if hs.len() < 3 {
                    return bad("field `hs`: `order` needs at least 3 step sizes".into());
                }
                let lo = hs.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = hs.iter().cloned().fold(0.0, f64::max);
                if hi < 4.0 * lo * (1.0 - 1e-12) {
                    return bad("field `hs`: step sizes must span at least a factor of 4".into());
                }
            }
            Command::Metrics => {
                if self.inputs.len() != 2 && self.inputs.len() != 4 {
                    return bad(format!(
                        "field `inputs`: expected 2 or 4 sample files, got {}",
                        self.inputs.len()
                    ));
                }
                for m in &self.metrics {
                    if !METRIC_NAMES.contains(&m.as_str()) {
                        return bad(format!(
                            "field `metrics`: unknown metric `{m}`, expected one of {METRIC_NAMES:?}"
                        ));
                    }
                }
                if self.metrics.iter().any(|m| m == "corrected-w2") && self.inputs.len() != 4 {
                    return bad("metric `corrected-w2` needs four input files".into());
                }
                if self.metrics.iter().any(|m| m == "ksd") {
                    self.model()?;
                }
                itosample::metrics::ImqKernel::new(self.kernel.c, self.kernel.beta)
                    .map_err(|e| CliError::Config(format!("field `kernel`: {e}")))?;
            }
            Command::Experiment => {
                let model = self.model()?;
                match &self.experiment {
                    None => return bad("field `experiment` is required".into()),
                    Some(ExperimentSpec::StationaryBias {
                        reps, window_time, ..
                    }) => {
                        if !matches!(
                            model,
                            ModelSpec::Ou { .. } | ModelSpec::GaussianMixture { .. }
                        ) {
                            return bad(format!(
                                "stationary-bias sweeps need model `ou` or `gaussian-mixture`, got `{}`",
                                model.kind()
                            ));
                        }
                        if self.dynamics != DynamicsKind::Langevin {
                            return bad("stationary-bias sweeps use Langevin dynamics".into());
                        }
                        if self.h_list().is_empty() {
                            return bad("field `hs` (or `h`) is required".into());
                        }
                        if *reps == 0
                            || window_time.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater)
                        {
                            return bad("`reps` must be >= 1 and `window_time` > 0".into());
                        }
                    }
                    Some(ExperimentSpec::Comparison { reference }) => {
                        self.single_h()?;
                        self.comparison_metrics()?;
                        if self.dynamics != DynamicsKind::Langevin {
                            return bad("scheme comparisons use Langevin dynamics".into());
                        }
                        let generated = matches!(
                            model,
                            ModelSpec::Ou { .. } | ModelSpec::GaussianMixture { .. }
                        );
                        if reference.is_none() && !generated {
                            return bad(format!(
                                "field `experiment.reference` is required for model `{}`",
                                model.kind()
                            ));
                        }
                        itosample::metrics::ImqKernel::new(self.kernel.c, self.kernel.beta)
                            .map_err(|e| CliError::Config(format!("field `kernel`: {e}")))?;
                    }
                }
            }
            Command::Dissipativity => {
                self.model()?;
                let s = self.dissipativity;
                if s.pairs == 0 || !(s.radius > 0.0 && s.radius.is_finite()) {
                    return bad("field `dissipativity`: need pairs >= 1 and radius > 0".into());
                }
            }
            Command::GenBlr => {
                match self.model()? {
                    ModelSpec::Blr {
                        generate: Some(g), ..
                    } => {
                        if g.n == 0 || g.d == 0 {
                            return bad("field `model.generate`: n and d must be >= 1".into());
                        }
                    }
                    _ => return bad(
                        "`gen-blr` needs `model.kind = \"blr\"` with a `generate = { n, d }` table"
                            .into(),
                    ),
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_toml_fills_defaults() {
        let c = RunConfig::parse(
            "seed = 3\nschemes = [\"em\"]\nh = 0.1\n[model]\nkind = \"ou\"\ndim = 2\n",
            false,
        )
        .unwrap();
        assert_eq!(c.particles, 1000);
        assert_eq!(c.stride, 1);
        assert!(matches!(c.initial, InitialSpec::StandardNormal));
        c.validate(Command::Sample).unwrap();
    }

    #[test]
    fn json_is_accepted() {
        let c = RunConfig::parse(
            r#"{"seed": 1, "schemes": ["srk-ld"], "h": 0.2, "model": {"kind": "gaussian-mixture", "a": [0.3, 0.3]}}"#,
            true,
        )
        .unwrap();
        c.validate(Command::Sample).unwrap();
    }

    #[test]
    fn seed_is_mandatory() {
        let e = RunConfig::parse("h = 0.1\n", false).unwrap_err();
        assert!(e.contains("seed"), "{e}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let e = RunConfig::parse("seed = 1\nsteps_size = 0.1\n", false).unwrap_err();
        assert!(e.contains("steps_size"), "{e}");
    }

    #[test]
    fn order_needs_spread_out_steps() {
        let c = RunConfig::parse(
            "seed = 1\nschemes = [\"em\"]\nhs = [0.1, 0.15, 0.2]\n[model]\nkind = \"ou\"\ndim = 1\n",
            false,
        )
        .unwrap();
        assert!(c.validate(Command::Order).is_err());
    }

    #[test]
    fn srk_ld_needs_langevin() {
        let c = RunConfig::parse(
            "seed = 1\nschemes = [\"srk-ld\"]\nh = 0.1\ndynamics = \"candidate\"\n[model]\nkind = \"pseudo-huber\"\nbeta = 0.33\ngamma = 0.5\ndim = 1\n",
            false,
        )
        .unwrap();
        assert!(c.validate(Command::Sample).is_err());
    }
}
