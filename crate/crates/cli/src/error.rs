use std::fmt;

/// Failure of a command, carrying its process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration or unreadable/unwritable file.
    Config(String),
    /// Inputs of incompatible shape.
    Shape(String),
    /// A chain diverged in a command that cannot record it.
    Diverged(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Shape(_) => 3,
            CliError::Diverged(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Shape(m) | CliError::Diverged(m) => f.write_str(m),
        }
    }
}

impl From<itosample::Error> for CliError {
    fn from(e: itosample::Error) -> Self {
        use itosample::Error as E;
        let msg = e.to_string();
        match e {
            E::DimensionMismatch { .. } | E::SizeMismatch { .. } => CliError::Shape(msg),
            E::Diverged { .. } | E::Evaluation(_) => CliError::Diverged(msg),
            E::Domain(_) | E::Io(_) | E::Csv(_) | E::Parse(_) => CliError::Config(msg),
        }
    }
}

/// Attaches the offending path to a library error.
pub fn with_path(path: &std::path::Path) -> impl Fn(itosample::Error) -> CliError + '_ {
    move |e| match CliError::from(e) {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        CliError::Shape(m) => CliError::Shape(format!("{}: {m}", path.display())),
        other => other,
    }
}
