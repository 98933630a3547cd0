//! Strategy engines: given the current iteration context, produce the
//! next set of parameter patches.
//!
//! Four interchangeable strategists cover the experiment matrix: an
//! LLM-backed one (with or without gm/Id tables in the prompt), a fixed
//! rule list, a deterministic gm/Id sizing heuristic, and a scripted
//! replay of a recorded trajectory.

pub mod digest;
pub mod gmid;
pub mod llm;
pub mod parse;
pub mod prompt;
pub mod replay;
pub mod rules;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::backends::PerfMetrics;
use crate::device_model::ProcessCorner;
use crate::netlist::{CircuitParams, ParamPatch};
use crate::specs::{EvalMode, EvalReport, MetricVerdict};

/// Patch value bounds enforced on every plan regardless of source.
pub mod bounds {
    pub const W_UM: (f64, f64) = (0.3, 500.0);
    pub const L_UM: (f64, f64) = (0.15, 5.0);
    pub const M: (u32, u32) = (1, 64);
    pub const C_F: (f64, f64) = (0.1e-12, 20e-12);
}

#[derive(Debug, thiserror::Error)]
pub enum StrategyError {
    #[error("reply contains no fenced ACTIONS block")]
    MissingActionBlock,
    #[error("line {line}: unparseable assignment {text:?}: {msg}")]
    BadAssignment {
        line: usize,
        text: String,
        msg: String,
    },
    #[error("line {line}: {target}.{field} = {value} violates bound [{lo}, {hi}]")]
    BoundsViolation {
        line: usize,
        target: String,
        field: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("unknown patch target {0:?} (allowed: M1..M7, C1)")]
    UnknownRole(String),
    #[error("endpoint credential env var {0} is not set")]
    MissingCredential(String),
    #[error("chat endpoint returned an empty completion")]
    EmptyCompletion,
    #[error("transport failure after {attempts} attempts: {last}")]
    Transport { attempts: u32, last: String },
    #[error("sizing infeasible: {0}")]
    Sizing(#[from] crate::lut::LutError),
    #[error(transparent)]
    Backend(#[from] crate::backends::BackendError),
    #[error("replay script line {line}: {msg}")]
    Script { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parsed strategist output: narrative sections plus machine patches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionPlan {
    pub observation: String,
    pub thinking: String,
    pub patches: Vec<ParamPatch>,
    pub declared_done: bool,
}

impl ActionPlan {
    pub fn done(observation: &str, thinking: &str) -> ActionPlan {
        ActionPlan {
            observation: observation.to_string(),
            thinking: thinking.to_string(),
            patches: Vec::new(),
            declared_done: true,
        }
    }
}

/// Static prompt material: circuit brief, heuristics, gm/Id digest and the
/// rendered spec table. Immutable for a run.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticKnowledge {
    pub circuit_brief: String,
    pub heuristics: String,
    pub lut_digest: String,
    pub spec_table: String,
}

/// Everything a strategist may look at for one decision.
#[derive(Debug, Clone)]
pub struct IterationContext {
    pub iteration: usize,
    pub phase: EvalMode,
    pub params: CircuitParams,
    pub metrics: BTreeMap<ProcessCorner, PerfMetrics>,
    /// Effective report: TT vs TT targets in phase 1, worst-case vs
    /// derated targets in phase 2.
    pub report: EvalReport,
    pub history_summary: String,
    pub unmet: Vec<MetricVerdict>,
}

/// A strategy engine. Calls within one run are strictly sequential.
pub trait Strategist {
    /// Optional opening move before any simulation (the "theoretical
    /// calculator" step). `None` keeps the seed netlist parameters.
    fn initial(&mut self) -> Result<Option<ActionPlan>, StrategyError> {
        Ok(None)
    }

    fn propose(&mut self, ctx: &IterationContext) -> Result<ActionPlan, StrategyError>;

    fn name(&self) -> &'static str;
}
