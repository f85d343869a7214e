use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{0}")]
    Input(phaseforge_core::Error),

    #[error("degenerate run: {0}")]
    Degenerate(String),

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    /// Process exit status: 2 usage, 3 config or input, 4 degenerate run, 1 I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Config(_) | CliError::Input(_) => 3,
            CliError::Degenerate(_) => 4,
            CliError::Io { .. } => 1,
        }
    }
}

impl From<phaseforge_core::Error> for CliError {
    fn from(e: phaseforge_core::Error) -> Self {
        use phaseforge_core::Error as E;
        match e {
            E::DegenerateInput(_) | E::DegenerateSpectrum { .. } | E::Generation(_) => CliError::Degenerate(e.to_string()),
            E::Io(source) => CliError::Io { path: "<io>".into(), source },
            other => CliError::Input(other),
        }
    }
}
