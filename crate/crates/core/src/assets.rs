//! Compiled-in fixtures: the seed netlist, spec files, the recorded
//! optimization trajectory, and a generator for the matching
//! recorded-metrics fixture.

use crate::netlist::{extract_params, NameMap, NetlistDoc};

/// Seed two-stage op-amp netlist (opening sizing).
pub const ITER1_NETLIST: &str = include_str!("../assets/iter1.sp");

/// Default target set with corner derating factors.
pub const DEFAULT_SPEC: &str = include_str!("../assets/default.spec");

/// Unreachable-gain target set, used to exercise stall detection.
pub const GAIN_LIMITED_SPEC: &str = include_str!("../assets/gain_limited.spec");

/// Aggressive-bandwidth target set for the strategist comparison.
pub const ABLATION_SPEC: &str = include_str!("../assets/ablation.spec");

/// Recorded six-step optimization trajectory in replay-script form.
pub const TRAJECTORY_SCRIPT: &str = include_str!("../assets/trajectory.script");

/// Canned per-step metrics matching [`TRAJECTORY_SCRIPT`]: TT metrics for
/// the first four states, all five corners for the last two.
/// `(step, corner, gain_db, gbw_hz, pm_deg, sr_v_per_us, idc_a)`
pub const TRAJECTORY_METRICS: &[(usize, &str, f64, f64, f64, f64, f64)] = &[
    (1, "TT", 52.19, 17.58e6, 58.49, 24.0, 110e-6),
    (2, "TT", 55.00, 43.29e6, 54.14, 30.0, 120e-6),
    (3, "TT", 48.41, 22.00e6, 62.00, 25.0, 120e-6),
    (4, "TT", 61.50, 19.16e6, 64.00, 24.0, 118e-6),
    (5, "TT", 62.40, 25.30e6, 65.80, 28.18, 116.4e-6),
    (5, "FF", 63.00, 26.50e6, 64.00, 30.0, 118e-6),
    (5, "SS", 61.80, 21.00e6, 67.00, 26.0, 115e-6),
    (5, "FS", 61.90, 24.00e6, 66.00, 29.0, 115e-6),
    (5, "SF", 62.10, 17.92e6, 66.50, 27.0, 117e-6),
    (6, "TT", 62.60, 27.80e6, 64.90, 30.5, 116.4e-6),
    (6, "FF", 63.50, 29.00e6, 63.00, 32.0, 118e-6),
    (6, "SS", 62.00, 23.00e6, 66.00, 28.0, 115e-6),
    (6, "FS", 62.20, 26.00e6, 65.00, 30.0, 115e-6),
    (6, "SF", 62.30, 19.79e6, 65.50, 29.0, 117e-6),
];

/// Build the recorded-metrics fixture text for the trajectory: walks the
/// script over the seed netlist and keys each step's canned metrics by
/// the resulting parameter fingerprint.
pub fn trajectory_recorded_metrics() -> String {
    let mut doc = NetlistDoc::parse(ITER1_NETLIST).expect("seed netlist parses");
    let names = NameMap::default();
    let blocks = trajectory_blocks();
    let mut fingerprints = Vec::with_capacity(blocks.len());
    for block in &blocks {
        doc = doc.apply_patches(block).expect("trajectory patch applies");
        let params = extract_params(&doc, &names).expect("patched netlist extracts");
        fingerprints.push(params.fingerprint());
    }
    let mut out = String::from("# recorded metrics for the compiled-in trajectory\n");
    for (step, corner, gain, gbw, pm, sr, idc) in TRAJECTORY_METRICS {
        out.push_str(&format!(
            "key={} corner={corner} gain_db={gain} gbw_hz={gbw} pm_deg={pm} sr={sr} idc_a={idc}\n",
            fingerprints[step - 1]
        ));
    }
    out
}

/// The trajectory script parsed into its patch blocks.
pub fn trajectory_blocks() -> Vec<Vec<crate::netlist::ParamPatch>> {
    let mut blocks = Vec::new();
    let mut current = Vec::new();
    for (n, raw) in TRAJECTORY_SCRIPT.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.chars().all(|c| c == '-') && line.len() >= 3 {
            blocks.push(std::mem::take(&mut current));
            continue;
        }
        current.push(
            crate::strategy::parse::parse_assignment(line, n + 1).expect("trajectory script valid"),
        );
    }
    if !current.is_empty() {
        blocks.push(current);
    }
    blocks
}
