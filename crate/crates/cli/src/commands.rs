//! Subcommand bodies. Each one validates the whole config, computes every
//! result in memory, and only then writes files.

use std::io::Write;
use std::path::Path;

use itosample::harness::{
    scheme_comparison, stationary_bias_sweep, strong_order_fit, write_sweep, BiasTarget,
    ComparisonPlan, OrderOptions, StationaryOptions, SweepResult, SweepRow, DIVERGED,
};
use itosample::metrics::{
    corrected_w2_squared, empirical_w2_squared, energy_distance_squared, ksd_squared_potential,
    ImqKernel, MetricRecord,
};
use itosample::models::{pseudo_huber_dissipativity_bound, uniform_dissipativity_margin};
use itosample::rng::{fill_standard_normal, tags};
use itosample::schemes::simulate;
use itosample::{Diffusion, Langevin, ParticleSet, Point, RngStream, SchemeConfig, SchemeKind};
use serde::Serialize;

use crate::config::{Command, DynamicsKind, ExperimentSpec, InitialSpec, RunConfig};
use crate::error::{with_path, CliError};
use crate::model::Model;

type CmdResult = Result<(), CliError>;

/// Output files of a command, written together once everything succeeded.
#[derive(Default)]
struct Outputs(Vec<(String, Vec<u8>)>);

impl Outputs {
    fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.0.push((name.into(), bytes));
    }

    fn add_json<T: Serialize>(&mut self, name: &str, value: &T) {
        let mut s = serde_json::to_string_pretty(value).expect("serializable output");
        s.push('\n');
        self.add(name, s.into_bytes());
    }

    fn write(self, dir: &Path) -> CmdResult {
        create_dir(dir)?;
        for (name, bytes) in self.0 {
            let path = dir.join(&name);
            std::fs::write(&path, bytes)
                .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
        }
        Ok(())
    }
}

fn create_dir(dir: &Path) -> CmdResult {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))
}

#[derive(Serialize)]
struct RunInfo<'a> {
    command: &'a str,
    config: &'a RunConfig,
    crate_version: &'a str,
}

fn run_info<'a>(command: &'a str, config: &'a RunConfig) -> RunInfo<'a> {
    RunInfo {
        command,
        config,
        crate_version: env!("CARGO_PKG_VERSION"),
    }
}

fn particles_csv(set: &ParticleSet) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    set.write_csv(&mut buf)?;
    Ok(buf)
}

fn read_particles(path: &Path) -> Result<ParticleSet, CliError> {
    ParticleSet::read_csv_path(path).map_err(with_path(path))
}

fn initial_set(cfg: &RunConfig, dim: usize) -> Result<ParticleSet, CliError> {
    let set = match &cfg.initial {
        InitialSpec::StandardNormal => {
            let mut data = vec![0.0; cfg.particles * dim];
            fill_standard_normal(
                &mut RngStream::new(cfg.seed).tag(tags::INIT).rng(),
                &mut data,
            );
            ParticleSet::from_flat(dim, data)?
        }
        InitialSpec::Point { x } => {
            ParticleSet::point_mass(&Point::new(x.clone())?, cfg.particles)?
        }
        InitialSpec::File { path } => read_particles(path)?,
    };
    if set.dim() != dim {
        return Err(CliError::Shape(format!(
            "initial particles have dimension {}, model has {dim}",
            set.dim()
        )));
    }
    Ok(set)
}

fn scheme_config(cfg: &RunConfig, kind: SchemeKind, h: f64) -> Result<SchemeConfig, CliError> {
    Ok(SchemeConfig::new(kind, h)?.with_levy_truncation(cfg.levy_truncation)?)
}

fn build_model(cfg: &RunConfig) -> Result<Model, CliError> {
    Model::build(cfg.model()?, cfg.seed)
}

pub fn sample(cfg: &RunConfig, out: &Path) -> CmdResult {
    cfg.validate(Command::Sample)?;
    let model = build_model(cfg)?;
    let dynamics = model.dynamics(cfg.dynamics)?;
    let initial = initial_set(cfg, model.dim())?;
    let h = cfg.single_h()?;
    let steps = cfg.steps_for(h);
    let d = model.dim();

    let mut files = Outputs::default();
    for &kind in &cfg.schemes {
        let traj = simulate(
            &initial,
            dynamics,
            &scheme_config(cfg, kind, h)?,
            steps,
            cfg.seed,
            cfg.stride,
        )?;
        let mut long = Vec::new();
        let header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
        writeln!(long, "step,particle,{}", header.join(",")).expect("write to memory");
        for snap in &traj.snapshots {
            for (p, row) in snap.particles.rows().enumerate() {
                let vals: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                writeln!(long, "{},{p},{}", snap.step, vals.join(",")).expect("write to memory");
            }
        }
        files.add(format!("{kind}_trajectory.csv"), long);
        files.add(format!("{kind}_final.csv"), particles_csv(traj.last())?);
    }
    files.add_json("sample.json", &run_info("sample", cfg));
    files.write(out)
}

#[derive(Serialize)]
struct FitRecord {
    scheme: SchemeKind,
    slope: f64,
    intercept: f64,
    r_squared: f64,
    order: f64,
    points: usize,
}

pub fn order(cfg: &RunConfig, out: &Path) -> CmdResult {
    cfg.validate(Command::Order)?;
    let model = build_model(cfg)?;
    let dynamics = model.dynamics(cfg.dynamics)?;
    let initial =
        match &cfg.initial {
            InitialSpec::StandardNormal => None,
            InitialSpec::Point { x } => {
                if x.len() != model.dim() {
                    return Err(CliError::Shape(format!(
                        "initial point has dimension {}, model has {}",
                        x.len(),
                        model.dim()
                    )));
                }
                Some(x.clone())
            }
            InitialSpec::File { .. } => return Err(CliError::Config(
                "field `initial`: `order` starts every particle at one point; use kind = \"point\""
                    .into(),
            )),
        };
    let opts = OrderOptions {
        refinement: cfg.refinement,
        levy_truncation: cfg.levy_truncation,
        initial,
        ..OrderOptions::default()
    };
    let mut rows = SweepResult::new();
    let mut fits = Vec::new();
    for &kind in &cfg.schemes {
        let study = strong_order_fit(
            dynamics,
            kind,
            &cfg.hs,
            cfg.horizon,
            cfg.particles,
            cfg.seed,
            &opts,
        )?;
        for p in &study.points {
            rows.push(SweepRow {
                scheme: kind.name().into(),
                h: p.h,
                metric: "mse_T".into(),
                value: p.mse,
                stderr: p.stderr,
                n: cfg.particles,
                seed: cfg.seed,
            })?;
        }
        fits.push(FitRecord {
            scheme: kind,
            slope: study.fit.slope,
            intercept: study.fit.intercept,
            r_squared: study.fit.r_squared,
            order: study.fit.order(),
            points: study.fit.points,
        });
    }
    create_dir(out)?;
    write_sweep(out, "order", &rows, cfg)?;
    let mut files = Outputs::default();
    files.add_json("order_fit.json", &fits);
    files.write(out)
}

pub fn metrics(cfg: &RunConfig, out: &Path) -> CmdResult {
    cfg.validate(Command::Metrics)?;
    let sets: Vec<ParticleSet> = cfg
        .inputs
        .iter()
        .map(|p| read_particles(p))
        .collect::<Result<_, _>>()?;
    let d = sets[0].dim();
    for (s, p) in sets.iter().zip(&cfg.inputs) {
        if s.dim() != d {
            return Err(CliError::Shape(format!(
                "{} has dimension {}, {} has {d}",
                p.display(),
                s.dim(),
                cfg.inputs[0].display()
            )));
        }
    }
    let model = match &cfg.model {
        Some(spec) => Some(Model::build(spec, cfg.seed)?),
        None => None,
    };
    let names: Vec<String> = if cfg.metrics.is_empty() {
        let mut v = vec!["w2".to_string(), "energy".to_string()];
        if sets.len() == 4 {
            v.insert(1, "corrected-w2".into());
        }
        if model.is_some() {
            v.push("ksd".into());
        }
        v
    } else {
        cfg.metrics.clone()
    };
    let (a, b) = if sets.len() == 4 {
        (&sets[0], &sets[2])
    } else {
        (&sets[0], &sets[1])
    };
    let mut records = Vec::new();
    for name in &names {
        let rec = match name.as_str() {
            "w2" => MetricRecord {
                metric: "w2_sq".into(),
                value: empirical_w2_squared(a, b)?,
                n: a.len(),
                w2: None,
            },
            "corrected-w2" => {
                let report = corrected_w2_squared(&sets[0], &sets[1], &sets[2], &sets[3])?;
                MetricRecord {
                    metric: "corrected_w2_sq".into(),
                    value: report.corrected,
                    n: a.len(),
                    w2: Some(report),
                }
            }
            "energy" => MetricRecord {
                metric: "energy_sq".into(),
                value: energy_distance_squared(a, b)?,
                n: a.len(),
                w2: None,
            },
            "ksd" => {
                let model = model.as_ref().expect("validated");
                let kernel = ImqKernel::new(cfg.kernel.c, cfg.kernel.beta)?;
                MetricRecord {
                    metric: "ksd_sq".into(),
                    value: ksd_squared_potential(a, model.potential(), kernel)?,
                    n: a.len(),
                    w2: None,
                }
            }
            other => unreachable!("metric {other} passed validation"),
        };
        records.push(rec);
    }
    let mut files = Outputs::default();
    files.add_json("metrics.json", &records);
    files.write(out)
}

fn target_sample(model: &Model, seed: u64, n: usize) -> Result<Option<ParticleSet>, CliError> {
    let stream = RngStream::new(seed).tag(tags::REFERENCE);
    Ok(match model {
        Model::Mixture(m) => Some(m.sample(stream, n)?),
        Model::Ou(q) => {
            let mut data = vec![0.0; n * q.dim];
            fill_standard_normal(&mut stream.rng(), &mut data);
            Some(ParticleSet::from_flat(q.dim, data)?)
        }
        _ => None,
    })
}

pub fn experiment(cfg: &RunConfig, out: &Path) -> CmdResult {
    cfg.validate(Command::Experiment)?;
    let model = build_model(cfg)?;
    let mut result = SweepResult::new();
    match cfg.experiment.as_ref().expect("validated") {
        ExperimentSpec::StationaryBias {
            burn_in,
            window_time,
            reps,
        } => {
            let target = match &model {
                Model::Ou(q) => BiasTarget::Ou { dim: q.dim },
                Model::Mixture(m) => BiasTarget::Mixture { a: m.a.clone() },
                _ => unreachable!("validated"),
            };
            let opts = StationaryOptions {
                burn_in: *burn_in,
                window_time: *window_time,
                reps: *reps,
            };
            let hs = cfg.h_list();
            for &kind in &cfg.schemes {
                result.extend(stationary_bias_sweep(
                    &target,
                    kind,
                    &hs,
                    cfg.particles,
                    cfg.seed,
                    &opts,
                )?);
            }
        }
        ExperimentSpec::Comparison { reference } => {
            let h = cfg.single_h()?;
            let initial = initial_set(cfg, model.dim())?;
            let n = initial.len();
            let reference = match reference {
                Some(p) => read_particles(p)?,
                None => target_sample(&model, cfg.seed, n)?.expect("validated"),
            };
            let mut plan = ComparisonPlan::new(h, cfg.steps_for(h), cfg.stride);
            plan.kernel_c = cfg.kernel.c;
            plan.kernel_beta = cfg.kernel.beta;
            let metrics = cfg.comparison_metrics()?;
            for &kind in &cfg.schemes {
                match scheme_comparison(
                    model.potential(),
                    &[kind],
                    &plan,
                    &initial,
                    &metrics,
                    &reference,
                    cfg.seed,
                ) {
                    Ok(r) => result.extend(r),
                    Err(itosample::Error::Diverged { step, .. }) => result.push(SweepRow {
                        scheme: kind.name().into(),
                        h,
                        metric: DIVERGED.into(),
                        value: step as f64,
                        stderr: 0.0,
                        n,
                        seed: cfg.seed,
                    })?,
                    Err(e) => return Err(e.into()),
                }
            }
        }
    }
    create_dir(out)?;
    write_sweep(out, "experiment", &result, cfg)?;
    Ok(())
}

#[derive(Serialize)]
struct DissipativityReport {
    model: &'static str,
    dynamics: DynamicsKind,
    pairs: usize,
    radius: f64,
    sampled_margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    analytic_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sufficient_condition: Option<bool>,
}

pub fn dissipativity(cfg: &RunConfig, out: &Path) -> CmdResult {
    cfg.validate(Command::Dissipativity)?;
    let model = build_model(cfg)?;
    let spec = cfg.dissipativity;
    let langevin = Langevin(model.potential());
    let diffusion: &dyn Diffusion = match cfg.dynamics {
        DynamicsKind::Langevin => &langevin,
        DynamicsKind::Candidate => match model.dynamics(DynamicsKind::Candidate)? {
            itosample::Dynamics::Ito(d) => d,
            itosample::Dynamics::Langevin(_) => unreachable!(),
        },
    };
    let margin = uniform_dissipativity_margin(diffusion, cfg.seed, spec.pairs, spec.radius)?;
    let (analytic_bound, sufficient_condition) = match (&model, cfg.dynamics) {
        (Model::PseudoHuber(p), DynamicsKind::Candidate) => {
            (Some(pseudo_huber_dissipativity_bound(p)), None)
        }
        (Model::StudentT(s), DynamicsKind::Candidate) => (None, Some(s.dissipativity_condition())),
        _ => (None, None),
    };
    let report = DissipativityReport {
        model: cfg.model()?.kind(),
        dynamics: cfg.dynamics,
        pairs: spec.pairs,
        radius: spec.radius,
        sampled_margin: margin,
        analytic_bound,
        sufficient_condition,
    };
    let mut files = Outputs::default();
    files.add_json("dissipativity.json", &report);
    files.write(out)
}

pub fn gen_blr(cfg: &RunConfig, out: &Path) -> CmdResult {
    cfg.validate(Command::GenBlr)?;
    let Model::Blr(blr) = build_model(cfg)? else {
        unreachable!("validated")
    };
    let mut buf = Vec::new();
    blr.data().write_csv(&mut buf)?;
    let mut files = Outputs::default();
    files.add("blr.csv", buf);
    files.add_json("gen-blr.json", &run_info("gen-blr", cfg));
    files.write(out)
}
