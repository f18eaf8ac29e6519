use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{file} not found in {dir}: run {stage} first")]
    MissingArtifact {
        file: String,
        dir: String,
        stage: &'static str,
    },
    #[error("{file} was produced by a different configuration: run {stage} first")]
    StaleArtifact { file: String, stage: &'static str },
    #[error("stage {stage}: {source}")]
    Numerical {
        stage: &'static str,
        #[source]
        source: navicontrol::Error,
    },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical { .. } => 3,
            CliError::Io(_) => 3,
            _ => 2,
        }
    }
}

pub(crate) trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError>;
}

impl<T> StageContext<T> for navicontrol::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Numerical { stage, source })
    }
}
