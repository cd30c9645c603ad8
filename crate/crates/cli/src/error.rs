use std::path::PathBuf;

use adiaphase::models::ModelError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Usage(String),

    #[error("model: {0}")]
    Model(#[from] ModelError),

    #[error("{stage} failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: adiaphase::Error,
    },

    #[error("cannot write {}: {message}", path.display())]
    Output { path: PathBuf, message: String },
}

impl CliError {
    pub fn stage(stage: impl Into<String>) -> impl FnOnce(adiaphase::Error) -> Self {
        let stage = stage.into();
        move |source| CliError::Stage { stage, source }
    }

    /// 1 numerical failure, 2 bad input, 3 tracking or degeneracy.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Model(_) | CliError::Output { .. } => 2,
            CliError::Stage { source, .. } => {
                if source.is_spectral() {
                    3
                } else {
                    match source {
                        adiaphase::Error::Model(_)
                        | adiaphase::Error::InvalidArgument(_)
                        | adiaphase::Error::LevelOutOfRange { .. } => 2,
                        _ => 1,
                    }
                }
            }
        }
    }
}
