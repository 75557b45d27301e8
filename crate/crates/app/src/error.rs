use std::fmt;

use ontosearch_core::embedder::EmbedError;
use ontosearch_core::eval::EvalError;
use ontosearch_core::ontology::OntologyError;
use ontosearch_core::ranker::RankError;
use ontosearch_core::text::StopwordError;
use ontosearch_core::tripletgen::TripletError;
use serde::Serialize;

/// Stdout was closed by the reader; not reported.
pub const BROKEN_PIPE: &str = "app.BrokenPipe";

/// A failure with a `module.Kind` code, printed as one JSON line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AppError {
    pub code: String,
    pub message: String,
}

#[derive(Serialize)]
struct Body<'a> {
    code: &'a str,
    message: &'a str,
}

#[derive(Serialize)]
struct Envelope<'a> {
    error: Body<'a>,
}

impl AppError {
    pub fn new(code: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            code: code.into(),
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new("app.UsageError", message)
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new("app.ConfigError", message)
    }

    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Self::new("app.Io", format!("{}: {err}", path.display()))
    }

    pub fn is_usage(&self) -> bool {
        self.code == "app.UsageError"
    }

    /// `{"error":{"code":...,"message":...}}` without a trailing newline.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&Envelope {
            error: Body {
                code: &self.code,
                message: &self.message,
            },
        })
        .expect("error serialises")
    }

    /// Process exit status: 2 for usage errors, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        if self.is_usage() {
            2
        } else {
            1
        }
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for AppError {}

impl From<OntologyError> for AppError {
    fn from(e: OntologyError) -> Self {
        Self::new(format!("ontology.{}", e.code()), e.to_string())
    }
}

impl From<EmbedError> for AppError {
    fn from(e: EmbedError) -> Self {
        Self::new(format!("embedder.{}", e.code()), e.to_string())
    }
}

impl From<TripletError> for AppError {
    fn from(e: TripletError) -> Self {
        Self::new(format!("tripletgen.{}", e.code()), e.to_string())
    }
}

impl From<RankError> for AppError {
    fn from(e: RankError) -> Self {
        Self::new(e.code(), e.to_string())
    }
}

impl From<EvalError> for AppError {
    fn from(e: EvalError) -> Self {
        Self::new(e.code(), e.to_string())
    }
}

impl From<StopwordError> for AppError {
    fn from(e: StopwordError) -> Self {
        Self::new("ranker.MalformedStopwordFile", e.to_string())
    }
}
