//! Scripted replay: plays back an ordered list of patch sets, one per
//! step, then declares done. Used to re-run a recorded optimization
//! trajectory without any decision logic.
//!
//! Script format: assignment lines in the action grammar, blocks
//! separated by `---` lines; `#` starts a comment.

use std::path::Path;

use crate::netlist::ParamPatch;
use crate::strategy::parse::parse_assignment;
use crate::strategy::{ActionPlan, IterationContext, Strategist, StrategyError};

#[derive(Debug, Clone)]
pub struct ReplayStrategist {
    blocks: Vec<Vec<ParamPatch>>,
    cursor: usize,
}

impl ReplayStrategist {
    pub fn from_text(text: &str) -> Result<ReplayStrategist, StrategyError> {
        let mut blocks: Vec<Vec<ParamPatch>> = Vec::new();
        let mut current: Vec<ParamPatch> = Vec::new();
        let mut saw_content = false;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.chars().all(|c| c == '-') && line.len() >= 3 {
                if current.is_empty() {
                    return Err(StrategyError::Script {
                        line: n + 1,
                        msg: "empty patch block before separator".into(),
                    });
                }
                blocks.push(std::mem::take(&mut current));
                continue;
            }
            saw_content = true;
            current.push(parse_assignment(line, n + 1)?);
        }
        if !current.is_empty() {
            blocks.push(current);
        }
        if !saw_content {
            return Err(StrategyError::Script {
                line: 0,
                msg: "script contains no patch blocks".into(),
            });
        }
        Ok(ReplayStrategist { blocks, cursor: 0 })
    }

    pub fn from_file(path: &Path) -> Result<ReplayStrategist, StrategyError> {
        ReplayStrategist::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    fn step_plan(&mut self) -> ActionPlan {
        let i = self.cursor;
        self.cursor += 1;
        ActionPlan {
            observation: format!("Scripted step {} of {}.", i + 1, self.blocks.len()),
            thinking: "Replaying the recorded trajectory.".into(),
            patches: self.blocks[i].clone(),
            declared_done: false,
        }
    }
}

impl Strategist for ReplayStrategist {
    fn initial(&mut self) -> Result<Option<ActionPlan>, StrategyError> {
        if self.blocks.is_empty() {
            return Ok(None);
        }
        Ok(Some(self.step_plan()))
    }

    fn propose(&mut self, _ctx: &IterationContext) -> Result<ActionPlan, StrategyError> {
        if self.cursor >= self.blocks.len() {
            return Ok(ActionPlan::done(
                "Script exhausted.",
                "No further recorded steps.",
            ));
        }
        Ok(self.step_plan())
    }

    fn name(&self) -> &'static str {
        "replay"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    use crate::netlist::{extract_params, NameMap, NetlistDoc, PatchField, PatchValue};
    use crate::specs::{evaluate_specs, EvalMode, SpecSet};

    const SCRIPT: &str = "\
# opening sizing
M1.W = 2u
M2.W = 2u
---
C1 = 0.7p
---
C1 = 1.2p   # back off the zero
M1.W = 3u
M2.W = 3u
";

    fn dummy_ctx() -> IterationContext {
        let doc = NetlistDoc::parse(crate::assets::ITER1_NETLIST).unwrap();
        let params = extract_params(&doc, &NameMap::default()).unwrap();
        let m = crate::backends::PerfMetrics {
            gain_db: 0.0,
            gbw_hz: 1.0,
            pm_deg: 0.0,
            sr_v_per_us: 0.0,
            idc_a: 1.0,
        };
        let report = evaluate_specs(&m, &SpecSet::default_opamp(), EvalMode::Tt);
        IterationContext {
            iteration: 1,
            phase: EvalMode::Tt,
            params,
            metrics: BTreeMap::new(),
            report,
            history_summary: String::new(),
            unmet: Vec::new(),
        }
    }

    #[test]
    fn plays_blocks_in_order_then_done() {
        let mut r = ReplayStrategist::from_text(SCRIPT).unwrap();
        assert_eq!(r.len(), 3);
        let first = r.initial().unwrap().unwrap();
        assert_eq!(first.patches.len(), 2);
        assert_eq!(first.patches[0].target, "M1");

        let ctx = dummy_ctx();
        let second = r.propose(&ctx).unwrap();
        assert_eq!(second.patches.len(), 1);
        assert_eq!(second.patches[0].target, "C1");

        let third = r.propose(&ctx).unwrap();
        assert_eq!(third.patches.len(), 3);
        match &third.patches[0].new_value {
            PatchValue::Eng(e) => assert_eq!(e.value, 1.2e-12),
            other => panic!("{other:?}"),
        }
        assert_eq!(third.patches[1].field, PatchField::W);

        let past = r.propose(&ctx).unwrap();
        assert!(past.declared_done);
        assert!(past.patches.is_empty());
    }

    #[test]
    fn bad_line_reports_position() {
        match ReplayStrategist::from_text("M1.W = 2u\nM1.Q = 3\n") {
            Err(StrategyError::BadAssignment { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_script_rejected() {
        assert!(matches!(
            ReplayStrategist::from_text("# nothing here\n"),
            Err(StrategyError::Script { .. })
        ));
        assert!(matches!(
            ReplayStrategist::from_text("---\n"),
            Err(StrategyError::Script { .. })
        ));
    }
}
