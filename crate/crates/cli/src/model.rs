use itosample::models::{
    blr_generate, blr_potential, student_t_generate, BlrDataset, BlrPotential, GaussianMixture,
    PseudoHuber, Quadratic, StudentTRegression,
};
use itosample::{Diffusion, Dynamics, Potential};

use crate::config::{DynamicsKind, ModelSpec};
use crate::error::{with_path, CliError};

pub enum Model {
    Ou(Quadratic),
    Mixture(GaussianMixture),
    PseudoHuber(PseudoHuber),
    Blr(BlrPotential),
    StudentT(StudentTRegression),
}

fn field(name: &str) -> impl Fn(itosample::Error) -> CliError + '_ {
    move |e| CliError::Config(format!("field `model.{name}`: {e}"))
}

impl Model {
    /// Builds the model; generated data use `seed`.
    pub fn build(spec: &ModelSpec, seed: u64) -> Result<Self, CliError> {
        Ok(match spec {
            ModelSpec::Ou { dim } => {
                if *dim == 0 {
                    return Err(CliError::Config("field `model.dim`: must be >= 1".into()));
                }
                Model::Ou(Quadratic { dim: *dim })
            }
            ModelSpec::GaussianMixture { a } => {
                Model::Mixture(GaussianMixture::new(a.clone()).map_err(field("a"))?)
            }
            ModelSpec::PseudoHuber { beta, gamma, dim } => {
                Model::PseudoHuber(PseudoHuber::new(*beta, *gamma, *dim).map_err(field("beta"))?)
            }
            ModelSpec::Blr {
                data,
                generate,
                convention,
                alpha,
            } => {
                let mut ds = match (data, generate) {
                    (Some(path), None) => {
                        let f = std::fs::File::open(path).map_err(|e| {
                            CliError::Config(format!("cannot open {}: {e}", path.display()))
                        })?;
                        BlrDataset::read_csv(std::io::BufReader::new(f)).map_err(with_path(path))?
                    }
                    (None, Some(g)) => blr_generate(seed, g.n, g.d).map_err(field("generate"))?,
                    _ => {
                        return Err(CliError::Config(
                            "model `blr` needs exactly one of `data` and `generate`".into(),
                        ))
                    }
                };
                if let Some(alpha) = alpha {
                    ds = ds.with_alpha(*alpha).map_err(field("alpha"))?;
                }
                Model::Blr(blr_potential(ds, *convention))
            }
            ModelSpec::StudentT { n, dim, nu } => {
                Model::StudentT(student_t_generate(seed, *n, *dim, *nu).map_err(field("n"))?)
            }
        })
    }

    pub fn potential(&self) -> &dyn Potential {
        match self {
            Model::Ou(m) => m,
            Model::Mixture(m) => m,
            Model::PseudoHuber(m) => m,
            Model::Blr(m) => m,
            Model::StudentT(m) => m,
        }
    }

    pub fn candidate(&self) -> Option<&dyn Diffusion> {
        match self {
            Model::PseudoHuber(m) => Some(m),
            Model::StudentT(m) => Some(m),
            _ => None,
        }
    }

    pub fn dim(&self) -> usize {
        self.potential().dim()
    }

    pub fn dynamics(&self, kind: DynamicsKind) -> Result<Dynamics<'_>, CliError> {
        match kind {
            DynamicsKind::Langevin => Ok(Dynamics::Langevin(self.potential())),
            DynamicsKind::Candidate => self.candidate().map(Dynamics::Ito).ok_or_else(|| {
                CliError::Config(
                    "field `dynamics`: this model has no candidate diffusion; use \"langevin\""
                        .into(),
                )
            }),
        }
    }
}
