//! Compact gm/Id digest: a small text table carved out of the full LUTs,
//! sized to fit in a prompt while still covering weak through strong
//! inversion at several channel lengths.

use crate::backends::LutSet;
use crate::device_model::{DeviceKind, ProcessCorner};

/// gm/Id sample points, 1/V: weak (26, 22), moderate (18, 15, 12, 10)
/// and strong inversion (8, 5).
pub const DIGEST_RATIOS: [f64; 8] = [5.0, 8.0, 10.0, 12.0, 15.0, 18.0, 22.0, 26.0];

/// Channel lengths sampled, um.
pub const DIGEST_LENGTHS: [f64; 4] = [0.18, 0.5, 1.0, 2.0];

/// Render the TT digest for both polarities. Rows whose gm/Id target is
/// outside the achievable range at that L are skipped.
pub fn lut_digest(luts: &LutSet) -> String {
    let mut out = String::new();
    for kind in DeviceKind::ALL {
        let Ok(grid) = luts.get(kind, ProcessCorner::TT) else {
            continue;
        };
        out.push_str(&format!(
            "{} (TT, Vds = {} V), per um of width:\n",
            kind, grid.vds
        ));
        out.push_str("  L_um  gm/Id  Vov_V    Id/W_A_um   gm/W_S_um   gds/W_S_um\n");
        for &l in &DIGEST_LENGTHS {
            for &ratio in &DIGEST_RATIOS {
                let Ok(vgs) = grid.invert_gm_over_id(l, ratio) else {
                    continue;
                };
                let Ok(op) = grid.query(l, vgs) else {
                    continue;
                };
                out.push_str(&format!(
                    "  {:<5} {:<6} {:+.3}  {:.4e}  {:.4e}  {:.4e}\n",
                    l, ratio, op.vov, op.id_per_w, op.gm_per_w, op.gds_per_w
                ));
            }
        }
        out.push('\n');
    }
    out
}
