//! gm/Id lookup tables: build, persist, query, invert.
//!
//! Tables are 2-D over (L, Vgs) at a fixed Vds, one per (kind, corner).
//! Raw quantities (id, gm, gds, cgg) are interpolated bilinearly and
//! ratios are recomputed from the interpolated values, so gm/Id stays
//! consistent with gm and Id.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::device_model::{DeviceKind, ModelConfig, OpPoint, ProcessCorner};

/// Widest device the sizer will ever request, um.
pub const DEFAULT_MAX_W_UM: f64 = 500.0;

/// Vds plane the default tables are built at (mid-rail).
pub const DEFAULT_VDS: f64 = 0.9;

/// Default L axis, um.
pub const DEFAULT_L_AXIS: [f64; 8] = [0.18, 0.25, 0.35, 0.5, 0.75, 1.0, 1.5, 2.0];

/// Default Vgs axis: 0.2 .. 1.2 V in 0.02 V steps (51 points).
pub fn default_vgs_axis() -> Vec<f64> {
    (0..51).map(|i| 0.2 + 0.02 * i as f64).collect()
}

#[derive(Debug, thiserror::Error)]
pub enum LutError {
    #[error("axis {axis} must be strictly increasing with at least 4 points")]
    BadAxis { axis: &'static str },
    #[error("evaluator failed at (L={l_um}, Vgs={vgs}): {source}")]
    Build {
        l_um: f64,
        vgs: f64,
        #[source]
        source: crate::device_model::DeviceError,
    },
    #[error("{axis}={value} outside table hull [{lo}, {hi}]")]
    OutOfRange {
        axis: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("gm/Id={target} unreachable at L={l_um}; achievable range [{lo:.4}, {hi:.4}]")]
    UnreachableRatio {
        target: f64,
        l_um: f64,
        lo: f64,
        hi: f64,
    },
    #[error("required width {w_um:.3} um exceeds maximum {max_um} um")]
    WidthTooLarge { w_um: f64, max_um: f64 },
    #[error("LUT file line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Dense table of unit-width operating points over (L, Vgs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LutGrid {
    pub kind: DeviceKind,
    pub corner: ProcessCorner,
    pub vds: f64,
    pub l_axis: Vec<f64>,
    pub vgs_axis: Vec<f64>,
    /// Row-major, L-major: cells[i * vgs_axis.len() + j].
    cells: Vec<OpPoint>,
}

/// Width solution for a gm target at a current budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizingResult {
    pub w_um: f64,
    pub vgs: f64,
    pub vov: f64,
    pub achieved_gm: f64,
    pub achieved_id: f64,
}

fn check_axis(axis: &'static str, v: &[f64]) -> Result<(), LutError> {
    if v.len() < 4 || v.windows(2).any(|w| !(w[1] > w[0])) || v.iter().any(|x| !x.is_finite()) {
        return Err(LutError::BadAxis { axis });
    }
    Ok(())
}

impl LutGrid {
    /// Build a grid by evaluating `eval` at every (L, Vgs) node.
    pub fn build<F>(
        eval: F,
        kind: DeviceKind,
        corner: ProcessCorner,
        l_axis: Vec<f64>,
        vgs_axis: Vec<f64>,
        vds: f64,
    ) -> Result<LutGrid, LutError>
    where
        F: Fn(DeviceKind, ProcessCorner, f64, f64, f64) -> Result<OpPoint, crate::device_model::DeviceError>,
    {
        check_axis("L", &l_axis)?;
        check_axis("Vgs", &vgs_axis)?;
        let mut cells = Vec::with_capacity(l_axis.len() * vgs_axis.len());
        for &l in &l_axis {
            for &vgs in &vgs_axis {
                let op = eval(kind, corner, l, vgs, vds).map_err(|source| LutError::Build {
                    l_um: l,
                    vgs,
                    source,
                })?;
                cells.push(op);
            }
        }
        Ok(LutGrid {
            kind,
            corner,
            vds,
            l_axis,
            vgs_axis,
            cells,
        })
    }

    /// Build from the compact device model on the default axes.
    pub fn build_default(
        model: &ModelConfig,
        kind: DeviceKind,
        corner: ProcessCorner,
    ) -> Result<LutGrid, LutError> {
        LutGrid::build(
            |k, c, l, vgs, vds| model.evaluate(k, c, l, vgs, vds),
            kind,
            corner,
            DEFAULT_L_AXIS.to_vec(),
            default_vgs_axis(),
            DEFAULT_VDS,
        )
    }

    pub fn cell(&self, i: usize, j: usize) -> &OpPoint {
        &self.cells[i * self.vgs_axis.len() + j]
    }

    pub fn l_min(&self) -> f64 {
        self.l_axis[0]
    }

    pub fn l_max(&self) -> f64 {
        *self.l_axis.last().unwrap()
    }

    /// Bilinear interpolation of each per-width quantity independently,
    /// in coordinates matched to the device physics: the strictly
    /// positive fields (id, gm, gds, cgg) blend log-linearly along Vgs
    /// (faithful across the exponential weak-inversion region) and
    /// linearly in 1/L along the length axis (per-width current scales
    /// as 1/L). vov, which changes sign, stays plain bilinear. Exact at
    /// grid nodes. gm/Id is recomputed from the interpolated gm and id.
    pub fn query(&self, l_um: f64, vgs: f64) -> Result<OpPoint, LutError> {
        let (i, tl) = locate("L", &self.l_axis, l_um)?;
        let (j, tv) = locate("Vgs", &self.vgs_axis, vgs)?;
        if tl == 0.0 && tv == 0.0 {
            return Ok(*self.cell(i, j));
        }
        let c00 = self.cell(i, j);
        let c01 = self.cell(i, j + 1);
        let c10 = self.cell(i + 1, j);
        let c11 = self.cell(i + 1, j + 1);
        // fractional position along 1/L between the bracketing rows
        let (l0, l1) = (self.l_axis[i], self.l_axis[i + 1]);
        let tu = (1.0 / l_um - 1.0 / l0) / (1.0 / l1 - 1.0 / l0);
        let lerp2 = |f: &dyn Fn(&OpPoint) -> f64| -> f64 {
            let a = f(c00) + tv * (f(c01) - f(c00));
            let b = f(c10) + tv * (f(c11) - f(c10));
            a + tl * (b - a)
        };
        let mixerp2 = |f: fn(&OpPoint) -> f64| -> f64 {
            let a = (f(c00).ln() + tv * (f(c01).ln() - f(c00).ln())).exp();
            let b = (f(c10).ln() + tv * (f(c11).ln() - f(c10).ln())).exp();
            a + tu * (b - a)
        };
        let id = mixerp2(|c| c.id_per_w);
        let gm = mixerp2(|c| c.gm_per_w);
        let gds = mixerp2(|c| c.gds_per_w);
        let cgg = mixerp2(|c| c.cgg_per_w);
        let vov = lerp2(&|c| c.vov);
        Ok(OpPoint {
            id_per_w: id,
            gm_per_w: gm,
            gds_per_w: gds,
            cgg_per_w: cgg,
            gm_over_id: gm / id,
            vov,
        })
    }

    /// Achievable gm/Id range at this L: (min at max Vgs, max at min Vgs).
    pub fn ratio_range(&self, l_um: f64) -> Result<(f64, f64), LutError> {
        let lo = self.query(l_um, *self.vgs_axis.last().unwrap())?.gm_over_id;
        let hi = self.query(l_um, self.vgs_axis[0])?.gm_over_id;
        Ok((lo, hi))
    }

    /// Solve gm/Id(L, Vgs) = target for Vgs by bisection on the strictly
    /// decreasing interpolated ratio curve.
    pub fn invert_gm_over_id(&self, l_um: f64, target: f64) -> Result<f64, LutError> {
        let (rmin, rmax) = self.ratio_range(l_um)?;
        if !(target >= rmin && target <= rmax) {
            return Err(LutError::UnreachableRatio {
                target,
                l_um,
                lo: rmin,
                hi: rmax,
            });
        }
        let mut lo = self.vgs_axis[0];
        let mut hi = *self.vgs_axis.last().unwrap();
        let tol = 1e-4 * target;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let r = self.query(l_um, mid)?.gm_over_id;
            if (r - target).abs() < tol {
                return Ok(mid);
            }
            // ratio decreases with Vgs
            if r > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Width and bias achieving `target_gm` while spending `id_budget`.
    pub fn size_for_gm(
        &self,
        l_um: f64,
        target_gm: f64,
        id_budget: f64,
    ) -> Result<SizingResult, LutError> {
        self.size_for_gm_capped(l_um, target_gm, id_budget, DEFAULT_MAX_W_UM)
    }

    pub fn size_for_gm_capped(
        &self,
        l_um: f64,
        target_gm: f64,
        id_budget: f64,
        max_w_um: f64,
    ) -> Result<SizingResult, LutError> {
        let ratio = target_gm / id_budget;
        let vgs = self.invert_gm_over_id(l_um, ratio)?;
        let op = self.query(l_um, vgs)?;
        let w_um = id_budget / op.id_per_w;
        if w_um > max_w_um {
            return Err(LutError::WidthTooLarge {
                w_um,
                max_um: max_w_um,
            });
        }
        Ok(SizingResult {
            w_um,
            vgs,
            vov: op.vov,
            achieved_gm: op.gm_per_w * w_um,
            achieved_id: op.id_per_w * w_um,
        })
    }

    /// Render the grid in the `gmidlut v1` text format.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        out.push_str("gmidlut v1\n");
        out.push_str(&format!("kind={}\n", self.kind));
        out.push_str(&format!("corner={}\n", self.corner));
        out.push_str(&format!("vds={}\n", self.vds));
        out.push_str(&format!("l_axis={}\n", join_floats(&self.l_axis)));
        out.push_str(&format!("vgs_axis={}\n", join_floats(&self.vgs_axis)));
        for c in &self.cells {
            out.push_str(&format!(
                "{:.8e} {:.8e} {:.8e} {:.8e}\n",
                c.id_per_w, c.gm_per_w, c.gds_per_w, c.cgg_per_w
            ));
        }
        out
    }

    /// Parse the `gmidlut v1` text format.
    ///
    /// vov and gm/Id are not stored in the file; gm/Id is recomputed as
    /// gm/id and vov from the compiled-in corner threshold.
    pub fn deserialize(text: &str) -> Result<LutGrid, LutError> {
        let mut lines = text.lines().enumerate();
        let header = |want: &'static str,
                      got: Option<(usize, &str)>|
         -> Result<(usize, String), LutError> {
            let (n, line) = got.ok_or(LutError::Format {
                line: 0,
                msg: format!("missing {want} header"),
            })?;
            if want == "version" {
                if line != "gmidlut v1" {
                    return Err(LutError::Format {
                        line: n + 1,
                        msg: format!("expected `gmidlut v1`, got {line:?}"),
                    });
                }
                return Ok((n, String::new()));
            }
            let (k, v) = line.split_once('=').ok_or(LutError::Format {
                line: n + 1,
                msg: format!("expected {want}=..."),
            })?;
            if k != want {
                return Err(LutError::Format {
                    line: n + 1,
                    msg: format!("expected {want}=..., got {k}="),
                });
            }
            Ok((n, v.to_string()))
        };
        header("version", lines.next())?;
        let (_, kind_s) = header("kind", lines.next())?;
        let (ln, corner_s) = header("corner", lines.next())?;
        let (_, vds_s) = header("vds", lines.next())?;
        let (_, l_s) = header("l_axis", lines.next())?;
        let (vgs_ln, vgs_s) = header("vgs_axis", lines.next())?;

        let kind = DeviceKind::parse(&kind_s).ok_or(LutError::Format {
            line: 2,
            msg: format!("unknown kind {kind_s:?}"),
        })?;
        let corner = ProcessCorner::parse(&corner_s).ok_or(LutError::Format {
            line: ln + 1,
            msg: format!("unknown corner {corner_s:?}"),
        })?;
        let vds = parse_float(&vds_s, 4)?;
        let l_axis = parse_float_list(&l_s, 5)?;
        let vgs_axis = parse_float_list(&vgs_s, vgs_ln + 1)?;
        check_axis("L", &l_axis)?;
        check_axis("Vgs", &vgs_axis)?;

        let model = ModelConfig::default();
        let vth = model.corner_params(kind, corner).vth0;
        let expected = l_axis.len() * vgs_axis.len();
        let mut cells = Vec::with_capacity(expected);
        for (n, line) in lines {
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_ascii_whitespace();
            let mut next = || -> Result<f64, LutError> {
                let tok = it.next().ok_or(LutError::Format {
                    line: n + 1,
                    msg: "expected 4 columns: id gm gds cgg".into(),
                })?;
                parse_float(tok, n + 1)
            };
            let id = next()?;
            let gm = next()?;
            let gds = next()?;
            let cgg = next()?;
            if it.next().is_some() {
                return Err(LutError::Format {
                    line: n + 1,
                    msg: "trailing columns".into(),
                });
            }
            let j = cells.len() % vgs_axis.len();
            cells.push(OpPoint {
                id_per_w: id,
                gm_per_w: gm,
                gds_per_w: gds,
                cgg_per_w: cgg,
                gm_over_id: gm / id,
                vov: vgs_axis[j] - vth,
            });
        }
        if cells.len() != expected {
            return Err(LutError::Format {
                line: 0,
                msg: format!("expected {expected} cells, found {}", cells.len()),
            });
        }
        Ok(LutGrid {
            kind,
            corner,
            vds,
            l_axis,
            vgs_axis,
            cells,
        })
    }

    pub fn write_to(&self, path: &Path) -> Result<(), LutError> {
        std::fs::write(path, self.serialize())?;
        Ok(())
    }

    pub fn read_from(path: &Path) -> Result<LutGrid, LutError> {
        let text = std::fs::read_to_string(path)?;
        LutGrid::deserialize(&text)
    }

    /// Canonical file name for one table: e.g. `nmos_TT.lut`.
    pub fn file_name(kind: DeviceKind, corner: ProcessCorner) -> String {
        format!("{}_{}.lut", kind, corner)
    }
}

fn join_floats(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_float(s: &str, line: usize) -> Result<f64, LutError> {
    let v: f64 = s.trim().parse().map_err(|_| LutError::Format {
        line,
        msg: format!("bad float {s:?}"),
    })?;
    if !v.is_finite() {
        return Err(LutError::Format {
            line,
            msg: format!("non-finite value {s:?}"),
        });
    }
    Ok(v)
}

fn parse_float_list(s: &str, line: usize) -> Result<Vec<f64>, LutError> {
    s.split(',').map(|t| parse_float(t, line)).collect()
}

/// Locate `v` on `axis`: returns (lower index, fractional position).
fn locate(axis_name: &'static str, axis: &[f64], v: f64) -> Result<(usize, f64), LutError> {
    let lo = axis[0];
    let hi = *axis.last().unwrap();
    if !v.is_finite() || v < lo || v > hi {
        return Err(LutError::OutOfRange {
            axis: axis_name,
            value: v,
            lo,
            hi,
        });
    }
    // upper end maps into the last cell
    let i = match axis.iter().position(|&a| a > v) {
        Some(p) => p - 1,
        None => axis.len() - 2,
    };
    let t = (v - axis[i]) / (axis[i + 1] - axis[i]);
    Ok((i, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use crate::device_model::ModelConfig;

    fn tt_nmos() -> LutGrid {
        LutGrid::build_default(&ModelConfig::default(), DeviceKind::Nmos, ProcessCorner::TT)
            .unwrap()
    }

    #[test]
    fn build_matches_direct_evaluation() {
        let model = ModelConfig::default();
        let l_axis = vec![0.2, 0.4, 0.8, 1.6];
        let vgs_axis = vec![0.3, 0.5, 0.7, 0.9];
        let grid = LutGrid::build(
            |k, c, l, vgs, vds| model.evaluate(k, c, l, vgs, vds),
            DeviceKind::Nmos,
            ProcessCorner::TT,
            l_axis.clone(),
            vgs_axis.clone(),
            0.9,
        )
        .unwrap();
        for (i, &l) in l_axis.iter().enumerate() {
            for (j, &vgs) in vgs_axis.iter().enumerate() {
                let direct = model
                    .evaluate(DeviceKind::Nmos, ProcessCorner::TT, l, vgs, 0.9)
                    .unwrap();
                assert_eq!(*grid.cell(i, j), direct);
            }
        }
    }

    #[test]
    fn default_axes_shape() {
        let grid = tt_nmos();
        assert_eq!(grid.l_axis.len(), 8);
        assert_eq!(grid.vgs_axis.len(), 51);
        assert_relative_eq!(*grid.vgs_axis.last().unwrap(), 1.2, epsilon = 1e-12);
    }

    #[test]
    fn rows_have_decreasing_gm_over_id() {
        let grid = tt_nmos();
        for i in 0..grid.l_axis.len() {
            for j in 1..grid.vgs_axis.len() {
                assert!(grid.cell(i, j).gm_over_id < grid.cell(i, j - 1).gm_over_id);
            }
        }
    }

    #[test]
    fn query_at_node_is_exact() {
        let grid = tt_nmos();
        let got = grid.query(grid.l_axis[2], grid.vgs_axis[7]).unwrap();
        assert_eq!(got, *grid.cell(2, 7));
    }

    #[test]
    fn query_below_hull_errors() {
        let grid = tt_nmos();
        let err = grid.query(0.1, 0.5).unwrap_err();
        assert!(matches!(err, LutError::OutOfRange { axis: "L", .. }), "{err}");
    }

    #[test]
    fn interpolation_tracks_model_within_2_percent() {
        let model = ModelConfig::default();
        let grid = tt_nmos();
        // deterministic pseudo-random interior points
        let mut seed = 0x1234_5678_u64;
        let mut rand01 = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..200 {
            let l = 0.18 + rand01() * (2.0 - 0.18);
            let vgs = 0.2 + rand01() * 1.0;
            let q = grid.query(l, vgs).unwrap();
            let d = model
                .evaluate(DeviceKind::Nmos, ProcessCorner::TT, l, vgs, 0.9)
                .unwrap();
            assert_relative_eq!(q.id_per_w, d.id_per_w, max_relative = 0.02);
            assert_relative_eq!(q.gm_per_w, d.gm_per_w, max_relative = 0.02);
        }
    }

    #[test]
    fn invert_round_trips() {
        let grid = tt_nmos();
        let vgs = grid.invert_gm_over_id(0.5, 10.0).unwrap();
        let back = grid.query(0.5, vgs).unwrap().gm_over_id;
        assert!((back - 10.0).abs() < 1e-3, "back={back}");
    }

    #[test]
    fn invert_at_node_recovers_node_vgs() {
        let grid = tt_nmos();
        let target = grid.cell(3, 20).gm_over_id;
        let vgs = grid.invert_gm_over_id(grid.l_axis[3], target).unwrap();
        assert!((vgs - grid.vgs_axis[20]).abs() < 1e-3);
    }

    #[test]
    fn invert_unreachable_ratio_errors() {
        let grid = tt_nmos();
        assert!(matches!(
            grid.invert_gm_over_id(0.5, 1000.0),
            Err(LutError::UnreachableRatio { .. })
        ));
    }

    #[test]
    fn size_for_gm_round_trip() {
        let grid = tt_nmos();
        let res = grid.size_for_gm(0.5, 1e-3, 100e-6).unwrap();
        assert!(res.w_um > 0.0);
        let op = grid.query(0.5, res.vgs).unwrap();
        assert_relative_eq!(op.gm_per_w * res.w_um, 1e-3, max_relative = 0.01);
        assert_relative_eq!(res.achieved_gm / res.achieved_id, op.gm_over_id, max_relative = 1e-6);
    }

    #[test]
    fn size_for_gm_is_linear_in_width() {
        let grid = tt_nmos();
        let a = grid.size_for_gm(0.5, 1e-3, 100e-6).unwrap();
        let b = grid.size_for_gm(0.5, 2e-3, 200e-6).unwrap();
        assert_relative_eq!(b.w_um, 2.0 * a.w_um, max_relative = 1e-9);
        assert_relative_eq!(b.vgs, a.vgs, max_relative = 1e-12);
    }

    #[test]
    fn size_for_gm_rejects_runaway_width() {
        let grid = tt_nmos();
        let res = grid.size_for_gm_capped(0.5, 1e-3, 100e-6, 1.0);
        assert!(matches!(res, Err(LutError::WidthTooLarge { .. })));
    }

    #[test]
    fn size_for_gm_rejects_unreachable_ratio() {
        let grid = tt_nmos();
        assert!(matches!(
            grid.size_for_gm(0.5, 1e-3, 1e-6),
            Err(LutError::UnreachableRatio { .. })
        ));
    }

    #[test]
    fn serialize_round_trip_bytes() {
        let grid = tt_nmos();
        let text = grid.serialize();
        let back = LutGrid::deserialize(&text).unwrap();
        assert_eq!(back.serialize(), text);
        assert_eq!(back.kind, grid.kind);
        assert_eq!(back.corner, grid.corner);
        assert_eq!(back.l_axis, grid.l_axis);
    }

    #[test]
    fn deserialize_rejects_wrong_cell_count() {
        let grid = tt_nmos();
        let mut text = grid.serialize();
        // drop the final cell line
        text.truncate(text.trim_end().rfind('\n').unwrap() + 1);
        assert!(matches!(
            LutGrid::deserialize(&text),
            Err(LutError::Format { .. })
        ));
    }

    #[test]
    fn deserialize_rejects_bad_header() {
        assert!(LutGrid::deserialize("bogus v9\n").is_err());
        let grid = tt_nmos();
        let text = grid.serialize().replace("kind=nmos", "kind=weird");
        assert!(LutGrid::deserialize(&text).is_err());
    }
}
