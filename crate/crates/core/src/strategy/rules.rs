//! Fixed-rule baseline: a top-down rule list where the first failing
//! metric fires exactly one corrective action. Deliberately naive — it is
//! the control arm for the smarter strategists.

use crate::netlist::{EngNumber, ParamPatch, PatchField, PatchValue};
use crate::specs::Metric;
use crate::strategy::{bounds, ActionPlan, IterationContext, Strategist, StrategyError};

/// Longest channel the rule list will request; matches the LUT L axis so
/// the analytic backend can still evaluate the result.
pub const RULES_L_CAP_UM: f64 = 2.0;

pub struct RulesStrategist;

impl RulesStrategist {
    pub fn new() -> RulesStrategist {
        RulesStrategist
    }
}

impl Default for RulesStrategist {
    fn default() -> Self {
        RulesStrategist::new()
    }
}

fn eng_patch(target: &str, field: PatchField, value: f64) -> ParamPatch {
    ParamPatch::new(target, field, PatchValue::Eng(EngNumber::from_value(value)))
}

impl Strategist for RulesStrategist {
    fn propose(&mut self, ctx: &IterationContext) -> Result<ActionPlan, StrategyError> {
        let failing = |m: Metric| ctx.report.get(m).map(|e| !e.pass).unwrap_or(false);
        let p = &ctx.params;

        let (rule, patches): (&str, Vec<ParamPatch>) = if failing(Metric::Pm) {
            let cc = (p.c1_f * 1.1).min(bounds::C_F.1);
            ("PM below target: Cc *= 1.1", vec![eng_patch("C1", PatchField::Value, cc)])
        } else if failing(Metric::Gbw) {
            let w = (p.devices[0].w_um * 1.2).min(bounds::W_UM.1) * 1e-6;
            (
                "GBW below target: W(M1), W(M2) *= 1.2",
                vec![
                    eng_patch("M1", PatchField::W, w),
                    eng_patch("M2", PatchField::W, w),
                ],
            )
        } else if failing(Metric::Gain) {
            let l = (p.devices[0].l_um * 1.5).min(RULES_L_CAP_UM) * 1e-6;
            (
                "GAIN below target: L(M1..M4) *= 1.5 (capped)",
                (1..=4).map(|r| eng_patch(&format!("M{r}"), PatchField::L, l)).collect(),
            )
        } else if failing(Metric::Sr) {
            let m = (p.devices[4].m + 1).min(bounds::M.1);
            (
                "SR below target: m(M5) += 1",
                vec![ParamPatch::new("M5", PatchField::M, PatchValue::Int(m))],
            )
        } else if failing(Metric::Idc) {
            let m = p.devices[4].m.saturating_sub(1).max(1);
            (
                "IDC above target: m(M5) -= 1",
                vec![ParamPatch::new("M5", PatchField::M, PatchValue::Int(m))],
            )
        } else {
            return Ok(ActionPlan::done(
                "All specifications pass.",
                "Rule list fixed point: nothing fires.",
            ));
        };

        Ok(ActionPlan {
            observation: format!(
                "Failing metrics: {}.",
                ctx.report
                    .failing()
                    .iter()
                    .map(|e| e.metric.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
            thinking: format!("Fired rule: {rule}."),
            patches,
            declared_done: false,
        })
    }

    fn name(&self) -> &'static str {
        "rules"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    use crate::backends::PerfMetrics;
    use crate::device_model::ProcessCorner;
    use crate::netlist::{extract_params, NameMap, NetlistDoc};
    use crate::specs::{evaluate_specs, EvalMode, SpecSet};

    fn ctx_for(m: PerfMetrics) -> IterationContext {
        let doc = NetlistDoc::parse(crate::assets::ITER1_NETLIST).unwrap();
        let params = extract_params(&doc, &NameMap::default()).unwrap();
        let report = evaluate_specs(&m, &SpecSet::default_opamp(), EvalMode::Tt);
        let unmet = report.failing().into_iter().copied().collect();
        let mut metrics = BTreeMap::new();
        metrics.insert(ProcessCorner::TT, m);
        IterationContext {
            iteration: 1,
            phase: EvalMode::Tt,
            params,
            metrics,
            report,
            history_summary: String::new(),
            unmet,
        }
    }

    fn metrics(gain: f64, gbw: f64, pm: f64, sr: f64, idc: f64) -> PerfMetrics {
        PerfMetrics {
            gain_db: gain,
            gbw_hz: gbw,
            pm_deg: pm,
            sr_v_per_us: sr,
            idc_a: idc,
        }
    }

    #[test]
    fn low_pm_fires_cc_rule() {
        let plan = RulesStrategist::new()
            .propose(&ctx_for(metrics(65.0, 25e6, 55.0, 25.0, 150e-6)))
            .unwrap();
        assert_eq!(plan.patches.len(), 1);
        assert_eq!(plan.patches[0].target, "C1");
        match &plan.patches[0].new_value {
            PatchValue::Eng(e) => assert!((e.value - 1.1e-12).abs() < 1e-18),
            other => panic!("{other:?}"),
        }
        assert!(plan.thinking.contains("Cc *= 1.1"));
    }

    #[test]
    fn pm_rule_has_precedence_over_gbw() {
        let plan = RulesStrategist::new()
            .propose(&ctx_for(metrics(65.0, 15e6, 55.0, 25.0, 150e-6)))
            .unwrap();
        assert_eq!(plan.patches.len(), 1);
        assert_eq!(plan.patches[0].target, "C1");
    }

    #[test]
    fn gbw_rule_widens_the_pair() {
        let plan = RulesStrategist::new()
            .propose(&ctx_for(metrics(65.0, 15e6, 65.0, 25.0, 150e-6)))
            .unwrap();
        let targets: Vec<&str> = plan.patches.iter().map(|p| p.target.as_str()).collect();
        assert_eq!(targets, ["M1", "M2"]);
        assert_eq!(plan.patches[0].field, PatchField::W);
    }

    #[test]
    fn gain_rule_lengthens_the_first_stage_with_cap() {
        let plan = RulesStrategist::new()
            .propose(&ctx_for(metrics(55.0, 25e6, 65.0, 25.0, 150e-6)))
            .unwrap();
        let targets: Vec<&str> = plan.patches.iter().map(|p| p.target.as_str()).collect();
        assert_eq!(targets, ["M1", "M2", "M3", "M4"]);
        // fixture L = 0.18u -> 0.27u, below the cap
        match &plan.patches[0].new_value {
            PatchValue::Eng(e) => assert!((e.value - 0.27e-6).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn gain_rule_is_a_noop_at_the_cap() {
        let mut ctx = ctx_for(metrics(55.0, 25e6, 65.0, 25.0, 150e-6));
        for d in ctx.params.devices.iter_mut().take(4) {
            d.l_um = RULES_L_CAP_UM;
        }
        let plan = RulesStrategist::new().propose(&ctx).unwrap();
        match &plan.patches[0].new_value {
            PatchValue::Eng(e) => assert_eq!(e.value, RULES_L_CAP_UM * 1e-6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sr_and_idc_rules_move_the_tail_mirror() {
        let plan = RulesStrategist::new()
            .propose(&ctx_for(metrics(65.0, 25e6, 65.0, 15.0, 150e-6)))
            .unwrap();
        assert_eq!(plan.patches[0].target, "M5");
        assert_eq!(plan.patches[0].new_value, PatchValue::Int(3));

        let plan = RulesStrategist::new()
            .propose(&ctx_for(metrics(65.0, 25e6, 65.0, 25.0, 250e-6)))
            .unwrap();
        assert_eq!(plan.patches[0].new_value, PatchValue::Int(1));
    }

    #[test]
    fn all_pass_is_the_fixed_point() {
        let plan = RulesStrategist::new()
            .propose(&ctx_for(metrics(65.0, 25e6, 65.0, 25.0, 150e-6)))
            .unwrap();
        assert!(plan.declared_done);
        assert!(plan.patches.is_empty());
    }

    #[test]
    fn every_emitted_patch_respects_bounds() {
        use crate::strategy::parse::check_bounds;
        let cases = [
            metrics(55.0, 15e6, 55.0, 15.0, 250e-6),
            metrics(55.0, 25e6, 65.0, 25.0, 150e-6),
            metrics(65.0, 15e6, 65.0, 25.0, 150e-6),
        ];
        for m in cases {
            let plan = RulesStrategist::new().propose(&ctx_for(m)).unwrap();
            for p in &plan.patches {
                check_bounds(p, 0).unwrap();
            }
        }
    }
}
