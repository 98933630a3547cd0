//! External-simulator backend.
//!
//! The framework owns the control deck: it writes the netlist plus a
//! generated deck into an isolated working directory, runs the configured
//! simulator command, and parses three fixed column-ASCII exports:
//! `ac.out` (freq mag_db phase_deg), `tran.out` (time voltage) and
//! `op.out` (one line: supply current in A). The workdir is removed on
//! success and preserved on failure for debugging.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::backends::extract::{extract_ac_metrics, extract_sr, AcPoint};
use crate::backends::{Backend, BackendError, PerfMetrics};
use crate::device_model::ProcessCorner;
use crate::netlist::{CircuitParams, NetlistDoc};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpiceConfig {
    /// Simulator executable; invoked as `<command> deck.sp` in the workdir.
    pub command: String,
    /// Corner name -> model library include path, substituted into the deck.
    pub corner_includes: BTreeMap<String, String>,
    pub timeout_secs: u64,
    /// Root under which per-evaluation workdirs are created.
    pub workdir_root: PathBuf,
    /// Transient step swing used for slew extraction, V.
    pub step_v_lo: f64,
    pub step_v_hi: f64,
}

impl SpiceConfig {
    pub fn new(command: &str, workdir_root: &Path) -> SpiceConfig {
        SpiceConfig {
            command: command.to_string(),
            corner_includes: BTreeMap::new(),
            timeout_secs: 120,
            workdir_root: workdir_root.to_path_buf(),
            step_v_lo: 0.0,
            step_v_hi: 1.0,
        }
    }
}

pub struct SpiceBackend {
    pub config: SpiceConfig,
}

impl SpiceBackend {
    pub fn new(config: SpiceConfig) -> SpiceBackend {
        SpiceBackend { config }
    }

    fn deck_text(&self, doc: &NetlistDoc, corner: ProcessCorner) -> String {
        let mut deck = String::new();
        deck.push_str("* generated deck\n");
        if let Some(lib) = self.config.corner_includes.get(corner.as_str()) {
            deck.push_str(&format!(".include {lib}\n"));
        }
        deck.push_str(&doc.render());
        deck.push_str(
            "\n.control\n\
             op\n\
             wrdata op.out i(vdd)\n\
             ac dec 20 10 1g\n\
             wrdata ac.out vdb(out) vp(out)\n\
             tran 0.1n 200n\n\
             wrdata tran.out v(out)\n\
             quit\n\
             .endc\n",
        );
        deck
    }
}

impl Backend for SpiceBackend {
    fn evaluate(
        &self,
        doc: &NetlistDoc,
        params: &CircuitParams,
        corner: ProcessCorner,
        tag: &str,
    ) -> Result<PerfMetrics, BackendError> {
        let workdir = self.config.workdir_root.join(format!("{tag}_{corner}"));
        std::fs::create_dir_all(&workdir)?;
        std::fs::write(workdir.join("deck.sp"), self.deck_text(doc, corner))?;

        run_with_timeout(
            &self.config.command,
            &["deck.sp"],
            &workdir,
            self.config.timeout_secs,
        )?;

        let ac = parse_ac_file(&workdir.join("ac.out"))?;
        let tran = parse_tran_file(&workdir.join("tran.out"))?;
        let idc_a = parse_op_file(&workdir.join("op.out"))?;
        let (gain_db, gbw_hz, pm_deg) = extract_ac_metrics(&ac)?;
        let sr_v_per_us = extract_sr(&tran, self.config.step_v_lo, self.config.step_v_hi)?;
        let _ = params;

        // success: evaluation artifacts are no longer needed
        let _ = std::fs::remove_dir_all(&workdir);
        Ok(PerfMetrics {
            gain_db,
            gbw_hz,
            pm_deg,
            sr_v_per_us,
            idc_a,
        })
    }

    fn name(&self) -> &'static str {
        "spice"
    }
}

fn run_with_timeout(
    command: &str,
    args: &[&str],
    workdir: &Path,
    timeout_secs: u64,
) -> Result<(), BackendError> {
    let mut child = Command::new(command)
        .args(args)
        .current_dir(workdir)
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|source| BackendError::Spawn {
            command: command.to_string(),
            source,
        })?;
    let start = Instant::now();
    loop {
        if let Some(status) = child.try_wait()? {
            if status.success() {
                return Ok(());
            }
            let mut stderr = String::new();
            if let Some(mut pipe) = child.stderr.take() {
                use std::io::Read;
                let _ = pipe.read_to_string(&mut stderr);
            }
            return Err(BackendError::SimulatorFailed {
                status: status.code().unwrap_or(-1),
                stderr: stderr.trim().to_string(),
            });
        }
        if start.elapsed() > Duration::from_secs(timeout_secs) {
            let _ = child.kill();
            let _ = child.wait();
            return Err(BackendError::Timeout {
                secs: timeout_secs,
                workdir: workdir.display().to_string(),
            });
        }
        std::thread::sleep(Duration::from_millis(10));
    }
}

fn garbled(path: &Path, msg: impl Into<String>) -> BackendError {
    BackendError::GarbledOutput {
        path: path.display().to_string(),
        msg: msg.into(),
    }
}

fn read_columns(path: &Path, ncols: usize) -> Result<Vec<Vec<f64>>, BackendError> {
    let text = std::fs::read_to_string(path).map_err(|e| garbled(path, e.to_string()))?;
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Result<Vec<f64>, _> = line.split_ascii_whitespace().map(|t| t.parse()).collect();
        let vals = vals.map_err(|_| garbled(path, format!("line {}: bad number", n + 1)))?;
        if vals.len() != ncols {
            return Err(garbled(
                path,
                format!("line {}: expected {ncols} columns, found {}", n + 1, vals.len()),
            ));
        }
        rows.push(vals);
    }
    if rows.is_empty() {
        return Err(garbled(path, "empty data file"));
    }
    Ok(rows)
}

fn parse_ac_file(path: &Path) -> Result<Vec<AcPoint>, BackendError> {
    Ok(read_columns(path, 3)?
        .into_iter()
        .map(|r| AcPoint {
            freq: r[0],
            mag_db: r[1],
            phase_deg: r[2],
        })
        .collect())
}

fn parse_tran_file(path: &Path) -> Result<Vec<(f64, f64)>, BackendError> {
    Ok(read_columns(path, 2)?.into_iter().map(|r| (r[0], r[1])).collect())
}

fn parse_op_file(path: &Path) -> Result<f64, BackendError> {
    let rows = read_columns(path, 1)?;
    Ok(rows[0][0].abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{extract_params, NameMap};

    fn fixture() -> (NetlistDoc, CircuitParams) {
        let doc = NetlistDoc::parse(crate::assets::ITER1_NETLIST).unwrap();
        let params = extract_params(&doc, &NameMap::default()).unwrap();
        (doc, params)
    }

    #[test]
    fn absent_simulator_is_spawn_error() {
        let dir = tempfile::tempdir().unwrap();
        let backend = SpiceBackend::new(SpiceConfig::new("/no/such/simulator", dir.path()));
        let (doc, params) = fixture();
        match backend.evaluate(&doc, &params, ProcessCorner::TT, "r1") {
            Err(BackendError::Spawn { command, .. }) => {
                assert!(command.contains("/no/such/simulator"))
            }
            other => panic!("expected spawn error, got {other:?}"),
        }
    }

    #[cfg(unix)]
    fn write_stub_simulator(dir: &Path, body: &str) -> PathBuf {
        use std::os::unix::fs::PermissionsExt;
        let path = dir.join("fakespice.sh");
        std::fs::write(&path, format!("#!/bin/sh\n{body}\n")).unwrap();
        std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();
        path
    }

    #[cfg(unix)]
    #[test]
    fn stub_simulator_round_trip() {
        use crate::backends::extract::two_pole_sweep;

        let dir = tempfile::tempdir().unwrap();
        // canned exports: two-pole AC response, ideal 50 ns ramp, 110 uA op
        let sweep = two_pole_sweep(60.0, 1e4, 1e8, 10.0, 1e9, 20);
        let mut ac = String::new();
        for p in &sweep {
            ac.push_str(&format!("{} {} {}\n", p.freq, p.mag_db, p.phase_deg));
        }
        let mut tran = String::new();
        for i in 0..=100 {
            let t = i as f64 * 1e-9;
            tran.push_str(&format!("{} {}\n", t, (t / 50e-9).min(1.0)));
        }
        std::fs::write(dir.path().join("canned_ac"), &ac).unwrap();
        std::fs::write(dir.path().join("canned_tran"), &tran).unwrap();
        let sim = write_stub_simulator(
            dir.path(),
            &format!(
                "cp {0}/canned_ac ac.out\ncp {0}/canned_tran tran.out\nprintf '1.1e-4\\n' > op.out",
                dir.path().display()
            ),
        );

        let backend = SpiceBackend::new(SpiceConfig::new(sim.to_str().unwrap(), dir.path()));
        let (doc, params) = fixture();
        let m = backend.evaluate(&doc, &params, ProcessCorner::TT, "r1").unwrap();

        let (gain, gbw, pm) = extract_ac_metrics(&sweep).unwrap();
        assert_eq!(m.gain_db, gain);
        assert_eq!(m.gbw_hz, gbw);
        assert_eq!(m.pm_deg, pm);
        assert!((m.sr_v_per_us - 20.0).abs() < 1e-6);
        assert_eq!(m.idc_a, 1.1e-4);
        // workdir cleaned on success
        assert!(!dir.path().join("r1_TT").exists());
    }

    #[cfg(unix)]
    #[test]
    fn truncated_output_is_garbled_error_and_preserves_workdir() {
        let dir = tempfile::tempdir().unwrap();
        let sim = write_stub_simulator(
            dir.path(),
            "printf '10 20\\n' > ac.out\nprintf '0 0\\n' > tran.out\nprintf '1e-4\\n' > op.out",
        );
        let backend = SpiceBackend::new(SpiceConfig::new(sim.to_str().unwrap(), dir.path()));
        let (doc, params) = fixture();
        match backend.evaluate(&doc, &params, ProcessCorner::TT, "r2") {
            Err(BackendError::GarbledOutput { path, .. }) => assert!(path.ends_with("ac.out")),
            other => panic!("expected garbled output, got {other:?}"),
        }
        assert!(dir.path().join("r2_TT").exists());
    }

    #[cfg(unix)]
    #[test]
    fn nonzero_exit_carries_stderr() {
        let dir = tempfile::tempdir().unwrap();
        let sim = write_stub_simulator(dir.path(), "echo 'model file not found' >&2\nexit 3");
        let backend = SpiceBackend::new(SpiceConfig::new(sim.to_str().unwrap(), dir.path()));
        let (doc, params) = fixture();
        match backend.evaluate(&doc, &params, ProcessCorner::TT, "r3") {
            Err(BackendError::SimulatorFailed { status, stderr }) => {
                assert_eq!(status, 3);
                assert!(stderr.contains("model file not found"));
            }
            other => panic!("expected simulator failure, got {other:?}"),
        }
    }
}
