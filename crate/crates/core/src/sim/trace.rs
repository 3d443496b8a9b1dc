use std::fmt::Write as _;
use std::path::Path;

use super::run::SimulationTrace;
use super::SimError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceFormat {
    Csv,
    Json,
}

fn num(out: &mut String, v: f64) {
    if v.is_nan() {
        out.push_str("NaN");
    } else {
        write!(out, "{v:.16e}").unwrap();
    }
}

fn to_csv(trace: &SimulationTrace) -> String {
    let nx = trace.final_state.len();
    let nu = trace.target_u.len();
    let mut out = String::from("t");
    for i in 1..=nx {
        write!(out, ",x{i}").unwrap();
    }
    if nu == 1 {
        out.push_str(",u");
    } else {
        for i in 1..=nu {
            write!(out, ",u{i}").unwrap();
        }
    }
    out.push_str(",case,p_violation,lyapunov,objective\n");
    for s in &trace.steps {
        write!(out, "{}", s.t).unwrap();
        for &v in s.x.iter().chain(&s.u) {
            out.push(',');
            num(&mut out, v);
        }
        write!(out, ",{}", s.case.as_str()).unwrap();
        for v in [s.p_violation, s.lyapunov, s.objective] {
            out.push(',');
            num(&mut out, v);
        }
        out.push('\n');
    }
    out
}

fn write_file(path: &Path, text: &str) -> Result<(), SimError> {
    std::fs::write(path, text).map_err(|e| SimError::Io(path.display().to_string(), e))
}

/// CSV holds one row per step; JSON holds every recorded field and the set
/// geometry. Numbers round-trip exactly in both.
pub fn write_trace(trace: &SimulationTrace, path: impl AsRef<Path>, format: TraceFormat) -> Result<(), SimError> {
    write_file(path.as_ref(), &render_trace(trace, format))
}

pub fn render_trace(trace: &SimulationTrace, format: TraceFormat) -> String {
    match format {
        TraceFormat::Csv => to_csv(trace),
        TraceFormat::Json => serde_json::to_string_pretty(trace).expect("trace serializes"),
    }
}

/// Named sets with ordered vertices, as JSON.
pub fn export_sets(trace: &SimulationTrace, path: impl AsRef<Path>) -> Result<(), SimError> {
    let text = serde_json::to_string_pretty(&trace.sets).expect("sets serialize");
    write_file(path.as_ref(), &text)
}
