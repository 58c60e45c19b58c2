use thiserror::Error;

use crate::config::Violation;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid config:\n{}", format_violations(.0))]
    Validation(Vec<Violation>),

    #[error("scenario {scenario}: {source}")]
    Engine {
        scenario: String,
        #[source]
        source: synergistic::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("nothing to export: {0}")]
    EmptyRecord(String),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| format!("  {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}
