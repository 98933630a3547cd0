//! Metric extraction from AC sweeps and transient waveforms.

use serde::{Deserialize, Serialize};

/// One AC sweep sample. Phase is expected continuous (unwrapped).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcPoint {
    pub freq: f64,
    pub mag_db: f64,
    pub phase_deg: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum ExtractError {
    #[error("AC sweep needs at least 2 samples")]
    TooShort,
    #[error("AC sweep frequency not strictly increasing at index {index}")]
    NonMonotonicFreq { index: usize },
    #[error("magnitude never crosses 0 dB (last sample {last_db:.2} dB)")]
    NoUnityCrossing { last_db: f64 },
    #[error("waveform never crosses the {which}% level")]
    MissingCrossing { which: u8 },
}

/// Low-frequency gain, unity crossing (log-frequency interpolation), and
/// phase margin from an AC sweep.
pub fn extract_ac_metrics(sweep: &[AcPoint]) -> Result<(f64, f64, f64), ExtractError> {
    if sweep.len() < 2 {
        return Err(ExtractError::TooShort);
    }
    for (i, w) in sweep.windows(2).enumerate() {
        if !(w[1].freq > w[0].freq) {
            return Err(ExtractError::NonMonotonicFreq { index: i + 1 });
        }
    }
    let gain_db = sweep[0].mag_db;
    for w in sweep.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.mag_db >= 0.0 && b.mag_db < 0.0 {
            let t = a.mag_db / (a.mag_db - b.mag_db);
            let logf = a.freq.log10() + t * (b.freq.log10() - a.freq.log10());
            let gbw_hz = 10f64.powf(logf);
            let phase = a.phase_deg + t * (b.phase_deg - a.phase_deg);
            let pm_deg = 180.0 + phase;
            return Ok((gain_db, gbw_hz, pm_deg));
        }
    }
    Err(ExtractError::NoUnityCrossing {
        last_db: sweep.last().unwrap().mag_db,
    })
}

/// 10-90% rising-edge slew rate in V/us.
pub fn extract_sr(waveform: &[(f64, f64)], v_lo: f64, v_hi: f64) -> Result<f64, ExtractError> {
    let swing = v_hi - v_lo;
    let t10 = crossing_time(waveform, v_lo + 0.1 * swing).ok_or(ExtractError::MissingCrossing { which: 10 })?;
    let t90 = crossing_time(waveform, v_lo + 0.9 * swing).ok_or(ExtractError::MissingCrossing { which: 90 })?;
    if !(t90 > t10) {
        return Err(ExtractError::MissingCrossing { which: 90 });
    }
    Ok(0.8 * swing / (t90 - t10) / 1e6)
}

/// First upward crossing of `level`, located by linear interpolation.
fn crossing_time(waveform: &[(f64, f64)], level: f64) -> Option<f64> {
    for w in waveform.windows(2) {
        let ((t0, v0), (t1, v1)) = (w[0], w[1]);
        if v0 < level && v1 >= level {
            return Some(t0 + (level - v0) / (v1 - v0) * (t1 - t0));
        }
    }
    None
}

/// Closed-form two-pole open-loop response, used by tests and the stub
/// simulator assets: magnitude |A| = A0 / sqrt((1+(f/p1)^2)(1+(f/p2)^2)),
/// phase = -atan(f/p1) - atan(f/p2).
pub fn two_pole_response(a0_db: f64, p1: f64, p2: f64, freq: f64) -> AcPoint {
    let a0 = 10f64.powf(a0_db / 20.0);
    let m = a0 / ((1.0 + (freq / p1).powi(2)) * (1.0 + (freq / p2).powi(2))).sqrt();
    AcPoint {
        freq,
        mag_db: 20.0 * m.log10(),
        phase_deg: -(freq / p1).atan().to_degrees() - (freq / p2).atan().to_degrees(),
    }
}

/// Log-spaced two-pole sweep.
pub fn two_pole_sweep(a0_db: f64, p1: f64, p2: f64, f_lo: f64, f_hi: f64, pts_per_decade: usize) -> Vec<AcPoint> {
    let decades = (f_hi / f_lo).log10();
    let n = (decades * pts_per_decade as f64).ceil() as usize + 1;
    (0..n)
        .map(|i| {
            let f = f_lo * 10f64.powf(decades * i as f64 / (n - 1) as f64);
            two_pole_response(a0_db, p1, p2, f)
        })
        .collect()
}

/// Exact unity-crossing frequency and phase margin of the two-pole model,
/// solved by bisection on the closed-form magnitude.
pub fn two_pole_closed_form(a0_db: f64, p1: f64, p2: f64) -> (f64, f64) {
    let mut lo = p1 * 1e-3;
    let mut hi = p2 * 1e3;
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if two_pole_response(a0_db, p1, p2, mid).mag_db > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let fu = (lo * hi).sqrt();
    let pm = 180.0 - (fu / p1).atan().to_degrees() - (fu / p2).atan().to_degrees();
    (fu, pm)
}
