//! Closed-loop scenarios: configuration, simulation and trace output.

mod run;
mod scenario;
mod trace;

pub use run::{run_closed_loop, SetSnapshot, SimulationTrace, StepRecord};
pub use scenario::{
    builtin_dcdc_scenario, load_scenario, parse_scenario, ConfigSpec, Event, Matrix, Method,
    Scenario, ScenarioParts, SetSpec, SystemSpec, TimedEvent,
};
pub use trace::{export_sets, render_trace, write_trace, TraceFormat};

use crate::error::Error;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("cannot access {0}: {1}")]
    Io(String, #[source] std::io::Error),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("schema violation in {field}: {detail}")]
    Schema { field: String, detail: String },

    #[error("assumption {assumption} failed: {detail}")]
    Assumption { assumption: u8, detail: String },

    #[error("simulation aborted at step {step}: {source}")]
    Abort {
        step: usize,
        #[source]
        source: Error,
    },
}

impl SimError {
    pub(crate) fn schema(field: &str, detail: impl Into<String>) -> Self {
        SimError::Schema {
            field: field.to_string(),
            detail: detail.into(),
        }
    }

    fn from_json(e: serde_json::Error) -> Self {
        use serde_json::error::Category;
        match e.classify() {
            Category::Syntax | Category::Eof => SimError::Parse {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            },
            _ => SimError::schema("document", e.to_string()),
        }
    }

    fn from_build(e: Error) -> Self {
        match e {
            Error::Assumption { assumption, detail } => SimError::Assumption { assumption, detail },
            Error::InvalidInput(_) | Error::DimensionMismatch { .. } | Error::Unsupported(_) => {
                SimError::schema("model", e.to_string())
            }
            other => SimError::Abort { step: 0, source: other },
        }
    }
}
