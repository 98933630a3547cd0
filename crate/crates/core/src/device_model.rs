//! Smooth analytic MOSFET model used to build gm/Id tables without a PDK.
//!
//! A single weak/strong-inversion interpolation (EKV-style) keeps every
//! quantity differentiable, so gm/Id inversion downstream is well posed.
//! All geometry is in micrometers; currents and conductances are per unit
//! width (A/um, S/um). Corner behavior is realized as deterministic shifts
//! of the base parameters.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

/// Thermal voltage at room temperature, volts.
pub const UT: f64 = 25.85e-3;

/// Gate overlap allowance added to the 2/3 channel-charge factor in Cgg.
const CGG_OVERLAP: f64 = 0.2;

/// Valid argument ranges for [`ModelConfig::evaluate`].
pub const L_RANGE_UM: (f64, f64) = (0.15, 5.0);
pub const VGS_RANGE_V: (f64, f64) = (0.0, 1.8);
pub const VDS_MAX_V: f64 = 1.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DeviceKind {
    Nmos,
    Pmos,
}

impl DeviceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DeviceKind::Nmos => "nmos",
            DeviceKind::Pmos => "pmos",
        }
    }

    pub fn parse(s: &str) -> Option<DeviceKind> {
        match s.to_ascii_lowercase().as_str() {
            "nmos" => Some(DeviceKind::Nmos),
            "pmos" => Some(DeviceKind::Pmos),
            _ => None,
        }
    }

    pub const ALL: [DeviceKind; 2] = [DeviceKind::Nmos, DeviceKind::Pmos];
}

impl fmt::Display for DeviceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Process corner. FS means fast nmos / slow pmos; SF the reverse.
///
/// Enum order is the tie-break order used by worst-case reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProcessCorner {
    TT,
    FF,
    SS,
    FS,
    SF,
}

impl ProcessCorner {
    pub const ALL: [ProcessCorner; 5] = [
        ProcessCorner::TT,
        ProcessCorner::FF,
        ProcessCorner::SS,
        ProcessCorner::FS,
        ProcessCorner::SF,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ProcessCorner::TT => "TT",
            ProcessCorner::FF => "FF",
            ProcessCorner::SS => "SS",
            ProcessCorner::FS => "FS",
            ProcessCorner::SF => "SF",
        }
    }

    pub fn parse(s: &str) -> Option<ProcessCorner> {
        match s.to_ascii_uppercase().as_str() {
            "TT" => Some(ProcessCorner::TT),
            "FF" => Some(ProcessCorner::FF),
            "SS" => Some(ProcessCorner::SS),
            "FS" => Some(ProcessCorner::FS),
            "SF" => Some(ProcessCorner::SF),
            _ => None,
        }
    }

    /// Speed of the given polarity at this corner: -1 slow, 0 typical, +1 fast.
    fn speed(&self, kind: DeviceKind) -> i8 {
        match (self, kind) {
            (ProcessCorner::TT, _) => 0,
            (ProcessCorner::FF, _) => 1,
            (ProcessCorner::SS, _) => -1,
            (ProcessCorner::FS, DeviceKind::Nmos) => 1,
            (ProcessCorner::FS, DeviceKind::Pmos) => -1,
            (ProcessCorner::SF, DeviceKind::Nmos) => -1,
            (ProcessCorner::SF, DeviceKind::Pmos) => 1,
        }
    }
}

impl fmt::Display for ProcessCorner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Compact-model constants for one device polarity at one corner.
///
/// `kp` is the current factor per unit W/L (A/V^2), `lambda` the
/// channel-length modulation per unit L (1/(V*um)), `cox_area` the gate
/// capacitance density in F/um^2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub vth0: f64,
    pub kp: f64,
    pub n_slope: f64,
    pub lambda: f64,
    pub cox_area: f64,
    pub ut: f64,
}

impl ModelParams {
    fn validate(&self) -> Result<(), DeviceError> {
        if !(self.kp > 0.0 && self.n_slope >= 1.0 && self.lambda >= 0.0 && self.cox_area > 0.0) {
            return Err(DeviceError::BadParams);
        }
        Ok(())
    }
}

/// One per-unit-width operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpPoint {
    /// Drain current per unit width, A/um.
    pub id_per_w: f64,
    /// Transconductance per unit width, S/um.
    pub gm_per_w: f64,
    /// Output conductance per unit width, S/um.
    pub gds_per_w: f64,
    /// Gate capacitance per unit width, F/um.
    pub cgg_per_w: f64,
    /// gm/Id, 1/V. Always the quotient of the two fields above.
    pub gm_over_id: f64,
    /// Overdrive Vgs - Vth, V.
    pub vov: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum DeviceError {
    #[error("model parameter out of range (kp>0, n>=1, lambda>=0, cox>0 required)")]
    BadParams,
    #[error("{name}={value} outside [{lo}, {hi}]")]
    Domain {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("model config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Full model configuration: base params per polarity plus corner shifts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub nmos: ModelParams,
    pub pmos: ModelParams,
    /// Threshold shift applied at a fast corner, volts (negative).
    pub fast_dvth: f64,
    /// kp multiplier applied at a fast corner (> 1).
    pub fast_kp_scale: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        // Synthetic constants in the ballpark of a 180/130nm node. The
        // n/p kp asymmetry is 2.5x.
        ModelConfig {
            nmos: ModelParams {
                vth0: 0.40,
                kp: 4.0e-4,
                n_slope: 1.3,
                lambda: 0.08,
                cox_area: 8.0e-15,
                ut: UT,
            },
            pmos: ModelParams {
                vth0: 0.45,
                kp: 1.6e-4,
                n_slope: 1.3,
                lambda: 0.10,
                cox_area: 8.0e-15,
                ut: UT,
            },
            fast_dvth: -0.030,
            fast_kp_scale: 1.10,
        }
    }
}

impl ModelConfig {
    pub fn base(&self, kind: DeviceKind) -> &ModelParams {
        match kind {
            DeviceKind::Nmos => &self.nmos,
            DeviceKind::Pmos => &self.pmos,
        }
    }

    /// Deterministic corner realization: fast shifts vth0 by `fast_dvth`
    /// and scales kp by `fast_kp_scale`; slow applies the opposite shifts;
    /// mixed corners shift each polarity independently.
    pub fn corner_params(&self, kind: DeviceKind, corner: ProcessCorner) -> ModelParams {
        let mut p = *self.base(kind);
        match corner.speed(kind) {
            0 => {}
            1 => {
                p.vth0 += self.fast_dvth;
                p.kp *= self.fast_kp_scale;
            }
            _ => {
                p.vth0 -= self.fast_dvth;
                p.kp *= 2.0 - self.fast_kp_scale;
            }
        }
        p
    }

    /// Evaluate the compact model at one bias point.
    ///
    /// id = 2*n*(kp/L)*ut^2 * ln^2(1+exp((Vgs-vth)/(2*n*ut))) * (1+lam_eff*Vds)
    /// with lam_eff = lambda/L; gm is the exact analytic dId/dVgs.
    pub fn evaluate(
        &self,
        kind: DeviceKind,
        corner: ProcessCorner,
        l_um: f64,
        vgs: f64,
        vds: f64,
    ) -> Result<OpPoint, DeviceError> {
        check_range("L", l_um, L_RANGE_UM.0, L_RANGE_UM.1)?;
        check_range("Vgs", vgs, VGS_RANGE_V.0, VGS_RANGE_V.1)?;
        if !(vds > 0.0 && vds <= VDS_MAX_V) || !vds.is_finite() {
            return Err(DeviceError::Domain {
                name: "Vds",
                value: vds,
                lo: 0.0,
                hi: VDS_MAX_V,
            });
        }
        let p = self.corner_params(kind, corner);
        p.validate()?;

        let n = p.n_slope;
        let x = (vgs - p.vth0) / (2.0 * n * p.ut);
        let f = ln_1p_exp(x);
        let sig = sigmoid(x);
        let lam_eff = p.lambda / l_um;
        let clm = 1.0 + lam_eff * vds;

        let k = 2.0 * n * (p.kp / l_um) * p.ut * p.ut;
        let id = k * f * f * clm;
        // d/dVgs [f^2] = 2 f sigma(x) / (2 n ut)
        let gm = k * clm * f * sig / (n * p.ut);
        let gds = id * lam_eff / clm;
        let cgg = p.cox_area * l_um * (2.0 / 3.0 + CGG_OVERLAP);

        Ok(OpPoint {
            id_per_w: id,
            gm_per_w: gm,
            gds_per_w: gds,
            cgg_per_w: cgg,
            gm_over_id: gm / id,
            vov: vgs - p.vth0,
        })
    }

    /// Load constants from a plain key=value file; unset keys keep defaults.
    ///
    /// Keys: `nmos.vth0`, `nmos.kp`, `nmos.n_slope`, `nmos.lambda`,
    /// `nmos.cox_area` (same under `pmos.`), `fast_dvth`, `fast_kp_scale`.
    pub fn from_file(path: &Path) -> Result<ModelConfig, DeviceError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_config_text(&text)
    }

    pub fn from_config_text(text: &str) -> Result<ModelConfig, DeviceError> {
        let mut cfg = ModelConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, val) = line.split_once('=').ok_or_else(|| DeviceError::Config {
                line: i + 1,
                msg: format!("expected key=value, got {raw:?}"),
            })?;
            let v: f64 = val.trim().parse().map_err(|_| DeviceError::Config {
                line: i + 1,
                msg: format!("bad float {:?}", val.trim()),
            })?;
            let key = key.trim();
            let slot = match key {
                "fast_dvth" => {
                    cfg.fast_dvth = v;
                    continue;
                }
                "fast_kp_scale" => {
                    cfg.fast_kp_scale = v;
                    continue;
                }
                _ => key,
            };
            let (kind, field) = slot.split_once('.').ok_or_else(|| DeviceError::Config {
                line: i + 1,
                msg: format!("unknown key {key:?}"),
            })?;
            let params = match kind {
                "nmos" => &mut cfg.nmos,
                "pmos" => &mut cfg.pmos,
                _ => {
                    return Err(DeviceError::Config {
                        line: i + 1,
                        msg: format!("unknown device kind {kind:?}"),
                    })
                }
            };
            match field {
                "vth0" => params.vth0 = v,
                "kp" => params.kp = v,
                "n_slope" => params.n_slope = v,
                "lambda" => params.lambda = v,
                "cox_area" => params.cox_area = v,
                _ => {
                    return Err(DeviceError::Config {
                        line: i + 1,
                        msg: format!("unknown field {field:?}"),
                    })
                }
            }
        }
        cfg.nmos.validate()?;
        cfg.pmos.validate()?;
        Ok(cfg)
    }
}

fn check_range(name: &'static str, v: f64, lo: f64, hi: f64) -> Result<(), DeviceError> {
    if !v.is_finite() || v < lo || v > hi {
        return Err(DeviceError::Domain {
            name,
            value: v,
            lo,
            hi,
        });
    }
    Ok(())
}

/// Numerically stable ln(1 + e^x).
fn ln_1p_exp(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Numerically stable logistic function.
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
