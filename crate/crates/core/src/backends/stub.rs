//! Recorded-metrics backend: replays fixture metrics keyed by the
//! canonical parameter fingerprint, so a published optimization trace can
//! be re-run without a PDK or simulator.
//!
//! Fixture format, one record per line:
//! `key=<fingerprint> corner=<TT|..> gain_db=.. gbw_hz=.. pm_deg=.. sr=.. idc_a=..`

use std::collections::BTreeMap;
use std::path::Path;

use crate::backends::{Backend, BackendError, PerfMetrics};
use crate::device_model::ProcessCorner;
use crate::netlist::{CircuitParams, NetlistDoc};

pub struct RecordedBackend {
    records: BTreeMap<(String, ProcessCorner), PerfMetrics>,
}

impl RecordedBackend {
    pub fn from_text(text: &str) -> Result<RecordedBackend, BackendError> {
        let mut records = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut key = None;
            let mut corner = None;
            let mut gain = None;
            let mut gbw = None;
            let mut pm = None;
            let mut sr = None;
            let mut idc = None;
            for tok in line.split_ascii_whitespace() {
                let (k, v) = tok.split_once('=').ok_or_else(|| garbled(n, "expected key=value"))?;
                match k {
                    "key" => key = Some(v.to_string()),
                    "corner" => corner = ProcessCorner::parse(v),
                    "gain_db" => gain = v.parse().ok(),
                    "gbw_hz" => gbw = v.parse().ok(),
                    "pm_deg" => pm = v.parse().ok(),
                    "sr" => sr = v.parse().ok(),
                    "idc_a" => idc = v.parse().ok(),
                    _ => return Err(garbled(n, "unknown field")),
                }
            }
            let metrics = PerfMetrics {
                gain_db: gain.ok_or_else(|| garbled(n, "missing gain_db"))?,
                gbw_hz: gbw.ok_or_else(|| garbled(n, "missing gbw_hz"))?,
                pm_deg: pm.ok_or_else(|| garbled(n, "missing pm_deg"))?,
                sr_v_per_us: sr.ok_or_else(|| garbled(n, "missing sr"))?,
                idc_a: idc.ok_or_else(|| garbled(n, "missing idc_a"))?,
            };
            records.insert(
                (
                    key.ok_or_else(|| garbled(n, "missing key"))?,
                    corner.ok_or_else(|| garbled(n, "missing/unknown corner"))?,
                ),
                metrics,
            );
        }
        Ok(RecordedBackend { records })
    }

    pub fn from_file(path: &Path) -> Result<RecordedBackend, BackendError> {
        RecordedBackend::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

fn garbled(line: usize, msg: &str) -> BackendError {
    BackendError::GarbledOutput {
        path: "<recorded metrics>".into(),
        msg: format!("line {}: {msg}", line + 1),
    }
}

impl Backend for RecordedBackend {
    fn evaluate(
        &self,
        _doc: &NetlistDoc,
        params: &CircuitParams,
        corner: ProcessCorner,
        _tag: &str,
    ) -> Result<PerfMetrics, BackendError> {
        let fingerprint = params.fingerprint();
        self.records
            .get(&(fingerprint.clone(), corner))
            .copied()
            .ok_or(BackendError::NoRecordedMetrics {
                fingerprint,
                corner,
            })
    }

    fn name(&self) -> &'static str {
        "stub-fixtures"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{extract_params, NameMap};

    #[test]
    fn replays_by_fingerprint() {
        let doc = NetlistDoc::parse(crate::assets::ITER1_NETLIST).unwrap();
        let params = extract_params(&doc, &NameMap::default()).unwrap();
        let text = format!(
            "key={} corner=TT gain_db=52.19 gbw_hz=17.58e6 pm_deg=58.49 sr=20.0 idc_a=110e-6\n",
            params.fingerprint()
        );
        let backend = RecordedBackend::from_text(&text).unwrap();
        let m = backend.evaluate(&doc, &params, ProcessCorner::TT, "t").unwrap();
        assert_eq!(m.gain_db, 52.19);
        assert!(matches!(
            backend.evaluate(&doc, &params, ProcessCorner::FF, "t"),
            Err(BackendError::NoRecordedMetrics { .. })
        ));
    }

    #[test]
    fn rejects_malformed_records() {
        assert!(RecordedBackend::from_text("key=x corner=TT gain_db=1\n").is_err());
        assert!(RecordedBackend::from_text("who knows\n").is_err());
    }
}
