//! Closed-loop sizing framework for a two-stage Miller op-amp built on
//! the gm/Id methodology: a compact device model, gm/Id lookup tables,
//! a netlist patcher, evaluation backends, interchangeable sizing
//! strategists, and the orchestration loop that ties them together.

pub mod assets;
pub mod backends;
pub mod device_model;
pub mod lut;
pub mod cli;
pub mod netlist;
pub mod orchestrator;
pub mod specs;
pub mod strategy;

pub use backends::{AnalyticBackend, Backend, BackendError, LutSet, PerfMetrics};
pub use device_model::{DeviceKind, ModelConfig, ProcessCorner};
pub use lut::LutGrid;
pub use netlist::{CircuitParams, NetlistDoc, ParamPatch};
pub use specs::{EvalMode, EvalReport, SpecSet};
pub use strategy::{ActionPlan, Strategist};
