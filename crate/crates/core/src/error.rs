use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input text is not well-formed JSON (or not UTF-8).
    #[error("syntax error: {0}")]
    Syntax(String),

    /// Well-formed input that violates a field bound or structural rule.
    #[error("invalid {field}{}: {reason}", context.as_ref().map(|c| format!(" in {c}")).unwrap_or_default())]
    Validation {
        field: String,
        context: Option<String>,
        reason: String,
    },

    #[error("insufficient paths: need at least 2, have {0}")]
    InsufficientPaths(u64),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate latency fit: fitted seconds-per-path {0} is not positive")]
    DegenerateFit(f64),

    #[error("no model for platform `{platform}` and task `{task}`")]
    MissingModel { platform: String, task: String },

    #[error("instance too large for brute force: {platforms}x{tasks} exceeds 9 cells")]
    InstanceTooLarge { platforms: usize, tasks: usize },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("unknown platform `{0}`")]
    UnknownPlatform(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(
        field: impl Into<String>,
        context: Option<&str>,
        reason: impl Into<String>,
    ) -> Self {
        Error::Validation {
            field: field.into(),
            context: context.map(str::to_owned),
            reason: reason.into(),
        }
    }

    /// Validation-class errors: malformed or out-of-bounds user input.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Syntax(_)
                | Error::Validation { .. }
                | Error::Precondition(_)
                | Error::UnknownPlatform(_)
                | Error::InsufficientPaths(_)
        )
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible(_))
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        use serde_json::error::Category;
        match e.classify() {
            Category::Data => Error::invalid("schema", None, e.to_string()),
            Category::Syntax | Category::Eof | Category::Io => Error::Syntax(e.to_string()),
        }
    }
}
