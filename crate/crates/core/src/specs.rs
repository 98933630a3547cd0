//! Design targets, corner-derated targets, pass/fail reports and
//! figure-of-merit accounting.
//!
//! Targets live in the same units as `PerfMetrics`: dB, Hz, degrees,
//! V/us, A. Thresholds are inclusive in the passing direction.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backends::PerfMetrics;
use crate::device_model::ProcessCorner;
use crate::netlist::CircuitParams;

#[derive(Debug, thiserror::Error)]
pub enum SpecError {
    #[error("spec file line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("unknown FOM formula {0:?} (known: gbw_cl_over_idc)")]
    UnknownFormula(String),
    #[error("worst_case needs at least one corner")]
    EmptyCornerMap,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    Gain,
    Gbw,
    Pm,
    Sr,
    Idc,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::Gain, Metric::Gbw, Metric::Pm, Metric::Sr, Metric::Idc];

    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Gain => "GAIN",
            Metric::Gbw => "GBW",
            Metric::Pm => "PM",
            Metric::Sr => "SR",
            Metric::Idc => "IDC",
        }
    }

    pub fn parse(s: &str) -> Option<Metric> {
        match s.to_ascii_uppercase().as_str() {
            "GAIN" => Some(Metric::Gain),
            "GBW" => Some(Metric::Gbw),
            "PM" => Some(Metric::Pm),
            "SR" => Some(Metric::Sr),
            "IDC" => Some(Metric::Idc),
            _ => None,
        }
    }

    pub fn of(&self, m: &PerfMetrics) -> f64 {
        match self {
            Metric::Gain => m.gain_db,
            Metric::Gbw => m.gbw_hz,
            Metric::Pm => m.pm_deg,
            Metric::Sr => m.sr_v_per_us,
            Metric::Idc => m.idc_a,
        }
    }

    /// Human display with the natural unit scaling.
    pub fn display(&self, v: f64) -> String {
        match self {
            Metric::Gain => format!("{v:.2} dB"),
            Metric::Gbw => format!("{:.2} MHz", v / 1e6),
            Metric::Pm => format!("{v:.2} deg"),
            Metric::Sr => format!("{v:.2} V/us"),
            Metric::Idc => format!("{:.1} uA", v * 1e6),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    AtLeast,
    AtMost,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::AtLeast => "at_least",
            Direction::AtMost => "at_most",
        }
    }

    pub fn parse(s: &str) -> Option<Direction> {
        match s {
            "at_least" => Some(Direction::AtLeast),
            "at_most" => Some(Direction::AtMost),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpecItem {
    pub metric: Metric,
    pub direction: Direction,
    pub tt_target: f64,
    pub corner_factor: f64,
}

impl SpecItem {
    pub fn corner_target(&self) -> f64 {
        self.tt_target * self.corner_factor
    }

    pub fn target(&self, mode: EvalMode) -> f64 {
        match mode {
            EvalMode::Tt => self.tt_target,
            EvalMode::Corner => self.corner_target(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvalMode {
    Tt,
    Corner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecSet {
    pub items: Vec<SpecItem>,
}

impl SpecSet {
    /// Table-I defaults with the Table-IV derating factors.
    pub fn default_opamp() -> SpecSet {
        SpecSet {
            items: vec![
                SpecItem {
                    metric: Metric::Gain,
                    direction: Direction::AtLeast,
                    tt_target: 60.0,
                    corner_factor: 0.90,
                },
                SpecItem {
                    metric: Metric::Gbw,
                    direction: Direction::AtLeast,
                    tt_target: 20e6,
                    corner_factor: 0.95,
                },
                SpecItem {
                    metric: Metric::Pm,
                    direction: Direction::AtLeast,
                    tt_target: 60.0,
                    corner_factor: 0.90,
                },
                SpecItem {
                    metric: Metric::Sr,
                    direction: Direction::AtLeast,
                    tt_target: 20.0,
                    corner_factor: 0.90,
                },
                SpecItem {
                    metric: Metric::Idc,
                    direction: Direction::AtMost,
                    tt_target: 200e-6,
                    corner_factor: 1.20,
                },
            ],
        }
    }

    pub fn get(&self, metric: Metric) -> Option<&SpecItem> {
        self.items.iter().find(|i| i.metric == metric)
    }

    /// Per-metric corner targets (Table-IV style derating).
    pub fn derated_targets(&self) -> BTreeMap<Metric, f64> {
        self.items
            .iter()
            .map(|i| (i.metric, i.corner_target()))
            .collect()
    }

    /// Parse the plain-text spec file: one item per line of
    /// `metric=GAIN direction=at_least tt_target=60 corner_factor=0.90`.
    pub fn from_text(text: &str) -> Result<SpecSet, SpecError> {
        let mut items = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut metric = None;
            let mut direction = None;
            let mut tt_target = None;
            let mut corner_factor = None;
            for tok in line.split_ascii_whitespace() {
                let (k, v) = tok.split_once('=').ok_or_else(|| SpecError::Format {
                    line: n + 1,
                    msg: format!("expected key=value, got {tok:?}"),
                })?;
                match k {
                    "metric" => {
                        metric = Some(Metric::parse(v).ok_or_else(|| SpecError::Format {
                            line: n + 1,
                            msg: format!("unknown metric {v:?}"),
                        })?)
                    }
                    "direction" => {
                        direction = Some(Direction::parse(v).ok_or_else(|| SpecError::Format {
                            line: n + 1,
                            msg: format!("unknown direction {v:?}"),
                        })?)
                    }
                    "tt_target" => {
                        tt_target = Some(v.parse::<f64>().map_err(|_| SpecError::Format {
                            line: n + 1,
                            msg: format!("bad float {v:?}"),
                        })?)
                    }
                    "corner_factor" => {
                        corner_factor = Some(v.parse::<f64>().map_err(|_| SpecError::Format {
                            line: n + 1,
                            msg: format!("bad float {v:?}"),
                        })?)
                    }
                    _ => {
                        return Err(SpecError::Format {
                            line: n + 1,
                            msg: format!("unknown key {k:?}"),
                        })
                    }
                }
            }
            let missing = |what: &str| SpecError::Format {
                line: n + 1,
                msg: format!("missing {what}"),
            };
            let item = SpecItem {
                metric: metric.ok_or_else(|| missing("metric"))?,
                direction: direction.ok_or_else(|| missing("direction"))?,
                tt_target: tt_target.ok_or_else(|| missing("tt_target"))?,
                corner_factor: corner_factor.ok_or_else(|| missing("corner_factor"))?,
            };
            if !(item.corner_factor > 0.0) {
                return Err(SpecError::Format {
                    line: n + 1,
                    msg: "corner_factor must be > 0".into(),
                });
            }
            items.push(item);
        }
        Ok(SpecSet { items })
    }

    pub fn from_file(path: &Path) -> Result<SpecSet, SpecError> {
        SpecSet::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for i in &self.items {
            out.push_str(&format!(
                "metric={} direction={} tt_target={} corner_factor={}\n",
                i.metric,
                i.direction.as_str(),
                i.tt_target,
                i.corner_factor
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricVerdict {
    pub metric: Metric,
    pub value: f64,
    pub target: f64,
    /// Signed toward passing: >= 0 iff the metric passes.
    pub margin_frac: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub entries: Vec<MetricVerdict>,
    pub all_pass: bool,
}

impl EvalReport {
    pub fn get(&self, metric: Metric) -> Option<&MetricVerdict> {
        self.entries.iter().find(|e| e.metric == metric)
    }

    pub fn failing(&self) -> Vec<&MetricVerdict> {
        self.entries.iter().filter(|e| !e.pass).collect()
    }
}

/// Evaluate metrics against the spec set at TT or derated corner targets.
pub fn evaluate_specs(metrics: &PerfMetrics, specs: &SpecSet, mode: EvalMode) -> EvalReport {
    let mut entries = Vec::with_capacity(specs.items.len());
    for item in &specs.items {
        let value = item.metric.of(metrics);
        let target = item.target(mode);
        let margin_frac = match item.direction {
            Direction::AtLeast => (value - target) / target,
            Direction::AtMost => (target - value) / target,
        };
        entries.push(MetricVerdict {
            metric: item.metric,
            value,
            target,
            margin_frac,
            pass: margin_frac >= 0.0,
        });
    }
    let all_pass = entries.iter().all(|e| e.pass);
    EvalReport { entries, all_pass }
}

/// Per-metric worst value across corners, with the corner it came from.
/// Minimum for at_least metrics, maximum for at_most; ties break by the
/// corner enum order.
pub fn worst_case(
    per_corner: &BTreeMap<ProcessCorner, PerfMetrics>,
    specs: &SpecSet,
) -> Result<BTreeMap<Metric, (f64, ProcessCorner)>, SpecError> {
    if per_corner.is_empty() {
        return Err(SpecError::EmptyCornerMap);
    }
    let mut out = BTreeMap::new();
    for item in &specs.items {
        let mut best: Option<(f64, ProcessCorner)> = None;
        for corner in ProcessCorner::ALL {
            let Some(m) = per_corner.get(&corner) else {
                continue;
            };
            let v = item.metric.of(m);
            let worse = match (&best, item.direction) {
                (None, _) => true,
                (Some((bv, _)), Direction::AtLeast) => v < *bv,
                (Some((bv, _)), Direction::AtMost) => v > *bv,
            };
            if worse {
                best = Some((v, corner));
            }
        }
        out.insert(item.metric, best.expect("nonempty map"));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FomReport {
    pub formula: String,
    pub fom: f64,
    pub area_um2: f64,
    pub foma: f64,
}

pub const DEFAULT_FOM_FORMULA: &str = "gbw_cl_over_idc";

/// Gate-area estimate: sum of W*L*m over M1..M7, um^2.
pub fn estimate_area_um2(params: &CircuitParams) -> f64 {
    params
        .devices
        .iter()
        .map(|d| d.w_um * d.l_um * d.m as f64)
        .sum()
}

/// Compute the configured figure of merit. The FoMA = FOM/area identity
/// holds for every formula.
pub fn compute_fom(
    metrics: &PerfMetrics,
    params: &CircuitParams,
    formula: &str,
) -> Result<FomReport, SpecError> {
    let fom = match formula {
        "gbw_cl_over_idc" => {
            let gbw_mhz = metrics.gbw_hz / 1e6;
            let cl_pf = params.cl_f * 1e12;
            let idc_ma = metrics.idc_a * 1e3;
            gbw_mhz * cl_pf / idc_ma
        }
        other => return Err(SpecError::UnknownFormula(other.to_string())),
    };
    let area_um2 = estimate_area_um2(params);
    Ok(FomReport {
        formula: formula.to_string(),
        fom,
        area_um2,
        foma: fom / area_um2,
    })
}
