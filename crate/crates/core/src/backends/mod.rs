//! Performance evaluation backends.
//!
//! The analytic backend composes LUT small-signal data with the standard
//! two-stage Miller formulas and is fully hermetic. The SPICE backend
//! shells out to an external simulator for the fidelity path. A recorded
//! stub backend replays fixture metrics keyed by parameter state.

pub mod extract;
pub mod spice;
pub mod stub;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::device_model::{DeviceKind, ModelConfig, ProcessCorner};
use crate::lut::{LutError, LutGrid};
use crate::netlist::{CircuitParams, NetlistDoc};

/// The five reported performance numbers for one (params, corner) point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfMetrics {
    pub gain_db: f64,
    pub gbw_hz: f64,
    pub pm_deg: f64,
    pub sr_v_per_us: f64,
    pub idc_a: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("bias infeasible for {device}: needs {density:.3e} A/um at L={l_um} um, LUT supports [{lo:.3e}, {hi:.3e}]")]
    BiasInfeasible {
        device: &'static str,
        density: f64,
        l_um: f64,
        lo: f64,
        hi: f64,
    },
    #[error("no LUT loaded for {kind} at {corner}")]
    MissingLut {
        kind: DeviceKind,
        corner: ProcessCorner,
    },
    #[error(transparent)]
    Lut(#[from] LutError),
    #[error(transparent)]
    Extract(#[from] extract::ExtractError),
    #[error("failed to spawn simulator {command:?}: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("simulator exited with status {status}; stderr: {stderr}")]
    SimulatorFailed { status: i32, stderr: String },
    #[error("simulator timed out after {secs} s (workdir preserved at {workdir})")]
    Timeout { secs: u64, workdir: String },
    #[error("garbled simulator output {path}: {msg}")]
    GarbledOutput { path: String, msg: String },
    #[error("no recorded metrics for parameter state {fingerprint} at {corner}")]
    NoRecordedMetrics {
        fingerprint: String,
        corner: ProcessCorner,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-corner, per-polarity LUT collection.
#[derive(Debug, Clone)]
pub struct LutSet {
    grids: BTreeMap<(DeviceKind, ProcessCorner), LutGrid>,
}

impl LutSet {
    pub fn new() -> LutSet {
        LutSet {
            grids: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, grid: LutGrid) {
        self.grids.insert((grid.kind, grid.corner), grid);
    }

    pub fn get(&self, kind: DeviceKind, corner: ProcessCorner) -> Result<&LutGrid, BackendError> {
        self.grids
            .get(&(kind, corner))
            .ok_or(BackendError::MissingLut { kind, corner })
    }

    /// Build every (kind, corner) table from the compact model.
    pub fn build_default(model: &ModelConfig) -> Result<LutSet, LutError> {
        let mut set = LutSet::new();
        for kind in DeviceKind::ALL {
            for corner in ProcessCorner::ALL {
                set.insert(LutGrid::build_default(model, kind, corner)?);
            }
        }
        Ok(set)
    }

    /// Load the canonical `<kind>_<corner>.lut` files from a directory.
    pub fn load_dir(dir: &Path) -> Result<LutSet, LutError> {
        let mut set = LutSet::new();
        for kind in DeviceKind::ALL {
            for corner in ProcessCorner::ALL {
                let path = dir.join(LutGrid::file_name(kind, corner));
                if path.exists() {
                    set.insert(LutGrid::read_from(&path)?);
                }
            }
        }
        Ok(set)
    }
}

impl Default for LutSet {
    fn default() -> Self {
        LutSet::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasConfig {
    /// Reference current mirrored into the tail and second stage, A.
    pub i_ref: f64,
}

impl Default for BiasConfig {
    fn default() -> Self {
        BiasConfig { i_ref: 10e-6 }
    }
}

/// Role map of the fixed topology (index = role - 1):
/// M1/M2 diff pair (nmos), M3/M4 mirror load (pmos), M5 tail (nmos),
/// M6 stage-2 source (pmos), M7 common-source stage 2 (nmos).
pub const DEVICE_KINDS: [DeviceKind; 7] = [
    DeviceKind::Nmos,
    DeviceKind::Nmos,
    DeviceKind::Pmos,
    DeviceKind::Pmos,
    DeviceKind::Nmos,
    DeviceKind::Pmos,
    DeviceKind::Nmos,
];

const DEVICE_NAMES: [&str; 7] = ["M1", "M2", "M3", "M4", "M5", "M6", "M7"];

/// Solved operating point of the whole amplifier at one corner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasSolution {
    pub i_tail: f64,
    pub i_stage2: f64,
    pub vgs: [f64; 7],
    pub gm: [f64; 7],
    pub gds: [f64; 7],
}

impl BiasSolution {
    pub fn vgs1(&self) -> f64 {
        self.vgs[0]
    }
    pub fn vgs7(&self) -> f64 {
        self.vgs[6]
    }
}

/// Solve every device's Vgs so it carries its branch current at its
/// geometry, then read gm/gds from the LUT scaled by W*m.
pub fn solve_bias(
    params: &CircuitParams,
    luts: &LutSet,
    corner: ProcessCorner,
    config: &BiasConfig,
) -> Result<BiasSolution, BackendError> {
    let i_tail = config.i_ref * params.device(5).m as f64;
    let i_stage2 = config.i_ref * params.device(6).m as f64;
    let branch = [
        i_tail / 2.0,
        i_tail / 2.0,
        i_tail / 2.0,
        i_tail / 2.0,
        i_tail,
        i_stage2,
        i_stage2,
    ];
    let mut vgs = [0.0; 7];
    let mut gm = [0.0; 7];
    let mut gds = [0.0; 7];
    for i in 0..7 {
        let dev = &params.devices[i];
        let grid = luts.get(DEVICE_KINDS[i], corner)?;
        let width = dev.w_um * dev.m as f64;
        let density = branch[i] / width;
        let v = solve_vgs_for_density(grid, DEVICE_NAMES[i], dev.l_um, density)?;
        let op = grid.query(dev.l_um, v)?;
        vgs[i] = v;
        gm[i] = op.gm_per_w * width;
        gds[i] = op.gds_per_w * width;
    }
    Ok(BiasSolution {
        i_tail,
        i_stage2,
        vgs,
        gm,
        gds,
    })
}

/// Bisection on the strictly increasing id(Vgs) density curve.
fn solve_vgs_for_density(
    grid: &LutGrid,
    device: &'static str,
    l_um: f64,
    density: f64,
) -> Result<f64, BackendError> {
    let vlo = grid.vgs_axis[0];
    let vhi = *grid.vgs_axis.last().unwrap();
    let dlo = grid.query(l_um, vlo)?.id_per_w;
    let dhi = grid.query(l_um, vhi)?.id_per_w;
    if !(density >= dlo && density <= dhi) {
        return Err(BackendError::BiasInfeasible {
            device,
            density,
            l_um,
            lo: dlo,
            hi: dhi,
        });
    }
    let (mut lo, mut hi) = (vlo, vhi);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if grid.query(l_um, mid)?.id_per_w < density {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Two-stage Miller small-signal metrics from a bias solution.
///
/// Gain = gm1/(gds2+gds4) * gm7/(gds6+gds7); GBW = gm1/(2 pi Cc);
/// PM accounts for the second pole gm7/(2 pi CL) and the RHP zero
/// gm7/(2 pi Cc); SR = min(i_tail/Cc, i_stage2/CL).
pub fn analytic_metrics(params: &CircuitParams, bias: &BiasSolution, config: &BiasConfig) -> PerfMetrics {
    let cc = params.c1_f;
    let cl = params.cl_f;
    let gm1 = bias.gm[0];
    let gm7 = bias.gm[6];
    let a1 = gm1 / (bias.gds[1] + bias.gds[3]);
    let a2 = gm7 / (bias.gds[5] + bias.gds[6]);
    let gain_db = 20.0 * (a1 * a2).log10();
    let gbw_hz = gm1 / (2.0 * PI * cc);
    let f_p2 = gm7 / (2.0 * PI * cl);
    let f_z = gm7 / (2.0 * PI * cc);
    let pm_deg = 90.0 - (gbw_hz / f_p2).atan().to_degrees() - (gbw_hz / f_z).atan().to_degrees();
    let sr_v_per_us = (bias.i_tail / cc).min(bias.i_stage2 / cl) / 1e6;
    let idc_a = config.i_ref + bias.i_tail + bias.i_stage2;
    PerfMetrics {
        gain_db,
        gbw_hz,
        pm_deg,
        sr_v_per_us,
        idc_a,
    }
}

/// Evaluate a parameter set into metrics at one corner.
pub trait Backend {
    fn evaluate(
        &self,
        doc: &NetlistDoc,
        params: &CircuitParams,
        corner: ProcessCorner,
        tag: &str,
    ) -> Result<PerfMetrics, BackendError>;

    fn name(&self) -> &'static str;
}

/// Hermetic backend: bias solve over LUTs plus closed-form composition.
pub struct AnalyticBackend {
    pub luts: LutSet,
    pub config: BiasConfig,
}

impl AnalyticBackend {
    pub fn new(luts: LutSet) -> AnalyticBackend {
        AnalyticBackend {
            luts,
            config: BiasConfig::default(),
        }
    }

    pub fn solve(&self, params: &CircuitParams, corner: ProcessCorner) -> Result<BiasSolution, BackendError> {
        solve_bias(params, &self.luts, corner, &self.config)
    }
}

impl Backend for AnalyticBackend {
    fn evaluate(
        &self,
        _doc: &NetlistDoc,
        params: &CircuitParams,
        corner: ProcessCorner,
        _tag: &str,
    ) -> Result<PerfMetrics, BackendError> {
        let bias = self.solve(params, corner)?;
        Ok(analytic_metrics(params, &bias, &self.config))
    }

    fn name(&self) -> &'static str {
        "analytic"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use crate::netlist::{extract_params, NameMap};

    pub(crate) fn fixture_doc() -> NetlistDoc {
        NetlistDoc::parse(crate::assets::ITER1_NETLIST).unwrap()
    }

    fn tt_setup() -> (AnalyticBackend, CircuitParams, NetlistDoc) {
        let luts = LutSet::build_default(&ModelConfig::default()).unwrap();
        let doc = fixture_doc();
        let params = extract_params(&doc, &NameMap::default()).unwrap();
        (AnalyticBackend::new(luts), params, doc)
    }

    #[test]
    fn tail_current_is_mirror_arithmetic() {
        let (backend, params, _) = tt_setup();
        let bias = backend.solve(&params, ProcessCorner::TT).unwrap();
        assert_relative_eq!(bias.i_tail, 20e-6, max_relative = 1e-12); // m(M5)=2
        assert_relative_eq!(bias.i_stage2, 80e-6, max_relative = 1e-12); // m(M6)=8
    }

    #[test]
    fn solved_vgs_carries_branch_current() {
        let (backend, params, _) = tt_setup();
        let bias = backend.solve(&params, ProcessCorner::TT).unwrap();
        let grid = backend.luts.get(DeviceKind::Nmos, ProcessCorner::TT).unwrap();
        let d1 = params.device(1);
        let id = grid.query(d1.l_um, bias.vgs1()).unwrap().id_per_w * d1.w_um * d1.m as f64;
        assert_relative_eq!(id, bias.i_tail / 2.0, max_relative = 1e-3);
    }

    #[test]
    fn undersized_device_is_bias_infeasible() {
        let (backend, mut params, _) = tt_setup();
        params.devices[0].w_um = 0.005; // cannot carry 10 uA inside the hull
        assert!(matches!(
            backend.solve(&params, ProcessCorner::TT),
            Err(BackendError::BiasInfeasible { device: "M1", .. })
        ));
    }

    #[test]
    fn gbw_formula() {
        // gm1 = 1 mS, Cc = 1 pF -> 159.15 MHz
        let gbw = 1e-3 / (2.0 * PI * 1e-12);
        assert_relative_eq!(gbw, 159.155e6, max_relative = 1e-4);
    }

    #[test]
    fn analytic_matches_scripted_formula_chain() {
        let (backend, params, doc) = tt_setup();
        let bias = backend.solve(&params, ProcessCorner::TT).unwrap();
        let m = backend.evaluate(&doc, &params, ProcessCorner::TT, "t").unwrap();

        // independent composition of the same chain
        let cc = params.c1_f;
        let cl = params.cl_f;
        let a = (bias.gm[0] / (bias.gds[1] + bias.gds[3])) * (bias.gm[6] / (bias.gds[5] + bias.gds[6]));
        let gbw = bias.gm[0] / (2.0 * PI * cc);
        let pm = 90.0
            - (gbw / (bias.gm[6] / (2.0 * PI * cl))).atan().to_degrees()
            - (gbw / (bias.gm[6] / (2.0 * PI * cc))).atan().to_degrees();
        assert_relative_eq!(m.gain_db, 20.0 * a.log10(), max_relative = 1e-9);
        assert_relative_eq!(m.gbw_hz, gbw, max_relative = 1e-9);
        assert_relative_eq!(m.pm_deg, pm, max_relative = 1e-9);
        assert_relative_eq!(m.sr_v_per_us, (bias.i_tail / cc).min(bias.i_stage2 / cl) / 1e6, max_relative = 1e-9);
        assert_relative_eq!(m.idc_a, 10e-6 + bias.i_tail + bias.i_stage2, max_relative = 1e-12);
    }

    #[test]
    fn current_conservation() {
        let (backend, params, doc) = tt_setup();
        let bias = backend.solve(&params, ProcessCorner::TT).unwrap();
        let m = backend.evaluate(&doc, &params, ProcessCorner::TT, "t").unwrap();
        assert_eq!(m.idc_a, backend.config.i_ref + bias.i_tail + bias.i_stage2);
    }

    #[test]
    fn analytic_tradeoff_monotonicities() {
        let (backend, base, doc) = tt_setup();
        let mut seed = 4242u64;
        let mut rand01 = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut checked = 0;
        while checked < 100 {
            let mut p = base.clone();
            p.devices[0].w_um = 1.0 + rand01() * 10.0;
            p.devices[1].w_um = p.devices[0].w_um;
            p.devices[6].w_um = 4.0 + rand01() * 20.0;
            p.c1_f = (0.5 + rand01() * 2.0) * 1e-12;
            let Ok(m0) = backend.evaluate(&doc, &p, ProcessCorner::TT, "t") else {
                continue;
            };

            // larger Cc: gbw strictly down, sr non-increasing, pm strictly up
            let mut p_cc = p.clone();
            p_cc.c1_f *= 1.3;
            let Ok(m1) = backend.evaluate(&doc, &p_cc, ProcessCorner::TT, "t") else {
                continue;
            };
            assert!(m1.gbw_hz < m0.gbw_hz);
            assert!(m1.sr_v_per_us <= m0.sr_v_per_us);
            assert!(m1.pm_deg > m0.pm_deg);

            // larger gm7 (wider M7): pm strictly up
            let mut p_m7 = p.clone();
            p_m7.devices[6].w_um *= 1.5;
            let Ok(m2) = backend.evaluate(&doc, &p_m7, ProcessCorner::TT, "t") else {
                continue;
            };
            assert!(m2.pm_deg > m0.pm_deg);
            checked += 1;
        }
    }

    #[test]
    fn missing_lut_reported() {
        let set = LutSet::new();
        assert!(matches!(
            set.get(DeviceKind::Nmos, ProcessCorner::TT),
            Err(BackendError::MissingLut { .. })
        ));
    }
}
