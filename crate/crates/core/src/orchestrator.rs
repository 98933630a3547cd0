//! The closed loop: propose, patch, evaluate, judge, feed back. Phase 1
//! iterates at the typical corner; once TT passes, phase 2 validates all
//! configured corners against derated targets and lets the strategist fix
//! corner-specific failures. Every record is persisted before the next
//! strategist call, so a crashed run leaves a complete audit trail.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::backends::{Backend, PerfMetrics};
use crate::device_model::ProcessCorner;
use crate::netlist::{extract_params, CircuitParams, NameMap, NetlistDoc};
use crate::specs::{
    compute_fom, evaluate_specs, worst_case, EvalMode, EvalReport, FomReport, Metric, SpecSet,
    DEFAULT_FOM_FORMULA,
};
use crate::strategy::{ActionPlan, IterationContext, Strategist, StrategyError};

/// Run-log schema header.
pub const RUNLOG_HEADER: &str = "gmidrun v1";

/// History window shown to the strategist.
pub const HISTORY_K: usize = 5;

/// Default stall-detection window.
pub const STALL_WINDOW: usize = 6;

/// Relative margin improvement below which a window counts as a plateau.
pub const PLATEAU_EPS: f64 = 0.01;

#[derive(Debug, thiserror::Error)]
pub enum OrchestratorError {
    #[error("run log {path}: line {line}: {msg}")]
    CorruptLog {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("run log {path}: missing `{RUNLOG_HEADER}` header")]
    BadHeader { path: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub max_tt_iters: usize,
    pub max_corner_iters: usize,
    pub corners: Vec<ProcessCorner>,
    pub stall_window: usize,
    pub log_path: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            max_tt_iters: 15,
            max_corner_iters: 5,
            corners: ProcessCorner::ALL.to_vec(),
            stall_window: STALL_WINDOW,
            log_path: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_tt_iters < 1 || self.max_corner_iters < 1 {
            return Err("iteration budgets must be >= 1".into());
        }
        if self.corners.is_empty() {
            return Err("corner list must be nonempty".into());
        }
        let mut seen = Vec::new();
        for c in &self.corners {
            if seen.contains(c) {
                return Err(format!("duplicate corner {c}"));
            }
            seen.push(*c);
        }
        if self.stall_window < 3 {
            return Err("stall window must be >= 3".into());
        }
        Ok(())
    }
}

/// One evaluated state of the loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub phase: EvalMode,
    pub params: CircuitParams,
    pub plan: ActionPlan,
    pub metrics: BTreeMap<ProcessCorner, PerfMetrics>,
    /// TT-vs-TT targets in phase 1; worst-case-vs-derated in phase 2.
    pub report: EvalReport,
    pub all_pass: bool,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    Converged,
    IterationLimit,
    Stalled,
    Error,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::IterationLimit => "iteration_limit",
            RunStatus::Stalled => "stalled",
            RunStatus::Error => "error",
        }
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub history: Vec<IterationRecord>,
    pub fom: Option<FomReport>,
    /// Stall evidence or error message, when status warrants one.
    pub detail: Option<String>,
}

impl RunOutcome {
    pub fn final_record(&self) -> Option<&IterationRecord> {
        self.history.last()
    }
}

/// Execute one optimization run.
pub fn run(
    config: &RunConfig,
    seed_doc: &NetlistDoc,
    specs: &SpecSet,
    strategist: &mut dyn Strategist,
    backend: &dyn Backend,
) -> RunOutcome {
    match run_inner(config, seed_doc, specs, strategist, backend) {
        Ok(outcome) => outcome,
        Err(RunAbort { history, message }) => RunOutcome {
            status: RunStatus::Error,
            fom: fom_of_last(&history),
            history,
            detail: Some(message),
        },
    }
}

struct RunAbort {
    history: Vec<IterationRecord>,
    message: String,
}

struct Loop<'a> {
    config: &'a RunConfig,
    specs: &'a SpecSet,
    backend: &'a dyn Backend,
    names: NameMap,
    doc: NetlistDoc,
    history: Vec<IterationRecord>,
}

impl Loop<'_> {
    fn abort(&mut self, message: String) -> RunAbort {
        RunAbort {
            history: std::mem::take(&mut self.history),
            message,
        }
    }

    fn params(&mut self) -> Result<CircuitParams, RunAbort> {
        extract_params(&self.doc, &self.names).map_err(|e| self.abort(e.to_string()))
    }

    fn apply(&mut self, plan: &ActionPlan) -> Result<(), RunAbort> {
        match self.doc.apply_patches(&plan.patches) {
            Ok(doc) => {
                self.doc = doc;
                Ok(())
            }
            Err(e) => Err(self.abort(format!("patch application failed: {e}"))),
        }
    }

    fn evaluate(
        &mut self,
        corners: &[ProcessCorner],
        iteration: usize,
    ) -> Result<BTreeMap<ProcessCorner, PerfMetrics>, RunAbort> {
        let params = self.params()?;
        let mut metrics = BTreeMap::new();
        for &corner in corners {
            let tag = format!("iter{iteration}");
            match self.backend.evaluate(&self.doc, &params, corner, &tag) {
                Ok(m) => {
                    metrics.insert(corner, m);
                }
                Err(e) => return Err(self.abort(format!("backend failed at {corner}: {e}"))),
            }
        }
        Ok(metrics)
    }

    fn record(
        &mut self,
        iteration: usize,
        phase: EvalMode,
        plan: ActionPlan,
        metrics: BTreeMap<ProcessCorner, PerfMetrics>,
        started: Instant,
    ) -> Result<(), RunAbort> {
        let params = self.params()?;
        let report = match phase {
            EvalMode::Tt => evaluate_specs(&metrics[&ProcessCorner::TT], self.specs, EvalMode::Tt),
            EvalMode::Corner => {
                let wc = worst_case(&metrics, self.specs)
                    .map_err(|e| self.abort(e.to_string()))?;
                evaluate_specs(&worst_metrics(&wc), self.specs, EvalMode::Corner)
            }
        };
        let record = IterationRecord {
            iteration,
            phase,
            params,
            plan,
            all_pass: report.all_pass,
            metrics,
            report,
            wall_ms: started.elapsed().as_millis() as u64,
        };
        if let Some(path) = &self.config.log_path {
            if let Err(e) = persist_record(path, &record) {
                return Err(self.abort(format!("failed to persist run log: {e}")));
            }
        }
        self.history.push(record);
        Ok(())
    }

    fn context(&self, iteration: usize, phase: EvalMode) -> IterationContext {
        let last = self.history.last().expect("context after first record");
        IterationContext {
            iteration,
            phase,
            params: last.params.clone(),
            metrics: last.metrics.clone(),
            report: last.report.clone(),
            history_summary: summarize_history(&self.history, HISTORY_K),
            unmet: last.report.failing().into_iter().copied().collect(),
        }
    }

    fn propose(
        &mut self,
        strategist: &mut dyn Strategist,
        iteration: usize,
        phase: EvalMode,
    ) -> Result<ActionPlan, RunAbort> {
        let ctx = self.context(iteration, phase);
        strategist
            .propose(&ctx)
            .map_err(|e: StrategyError| self.abort(format!("strategist failed: {e}")))
    }

    fn outcome(&mut self, status: RunStatus, detail: Option<String>) -> RunOutcome {
        RunOutcome {
            status,
            fom: fom_of_last(&self.history),
            history: std::mem::take(&mut self.history),
            detail,
        }
    }
}

fn run_inner(
    config: &RunConfig,
    seed_doc: &NetlistDoc,
    specs: &SpecSet,
    strategist: &mut dyn Strategist,
    backend: &dyn Backend,
) -> Result<RunOutcome, RunAbort> {
    if let Err(msg) = config.validate() {
        return Err(RunAbort {
            history: Vec::new(),
            message: msg,
        });
    }
    if let Some(path) = &config.log_path {
        if let Err(e) = init_log(path) {
            return Err(RunAbort {
                history: Vec::new(),
                message: format!("cannot initialize run log: {e}"),
            });
        }
    }

    let mut lp = Loop {
        config,
        specs,
        backend,
        names: NameMap::default(),
        doc: seed_doc.clone(),
        history: Vec::new(),
    };

    let mut iteration = 1;
    let opening = strategist
        .initial()
        .map_err(|e| lp.abort(format!("strategist failed: {e}")))?
        .unwrap_or_else(|| ActionPlan {
            observation: "Seed netlist taken as-is.".into(),
            thinking: "No opening calculation.".into(),
            patches: Vec::new(),
            declared_done: false,
        });
    lp.apply(&opening)?;

    // phase 1: typical corner
    let mut plan = opening;
    loop {
        let started = Instant::now();
        let metrics = lp.evaluate(&[ProcessCorner::TT], iteration)?;
        lp.record(iteration, EvalMode::Tt, plan, metrics, started)?;
        if lp.history.last().unwrap().all_pass {
            break;
        }
        if let Some(evidence) = stall_evidence(&lp.history, config.stall_window) {
            return Ok(lp.outcome(RunStatus::Stalled, Some(evidence)));
        }
        if iteration >= config.max_tt_iters {
            return Ok(lp.outcome(
                RunStatus::IterationLimit,
                Some(format!("phase 1 budget of {} iterations exhausted", config.max_tt_iters)),
            ));
        }
        plan = lp.propose(strategist, iteration, EvalMode::Tt)?;
        if plan.declared_done {
            return Ok(lp.outcome(
                RunStatus::Stalled,
                Some("strategist declared done while specifications still fail".into()),
            ));
        }
        lp.apply(&plan)?;
        iteration += 1;
    }

    // phase 2: all corners against derated targets. The first corner
    // evaluation re-judges the TT-passing state, so it reuses that
    // iteration number.
    let mut corner_fixes = 0;
    let mut plan = ActionPlan {
        observation: "TT targets met; entering all-corner validation.".into(),
        thinking: "Re-evaluate the same state across corners.".into(),
        patches: Vec::new(),
        declared_done: false,
    };
    loop {
        let started = Instant::now();
        let metrics = lp.evaluate(&config.corners, iteration)?;
        lp.record(iteration, EvalMode::Corner, plan, metrics, started)?;
        let last = lp.history.last().unwrap();
        if last.all_pass {
            return Ok(lp.outcome(RunStatus::Converged, None));
        }
        // a corner fix must not regress the TT pass
        if let Some(tt) = last.metrics.get(&ProcessCorner::TT) {
            if !evaluate_specs(tt, specs, EvalMode::Tt).all_pass {
                return run_reenter(lp, config, specs, strategist, iteration);
            }
        }
        let corner_history: Vec<IterationRecord> = lp
            .history
            .iter()
            .filter(|r| r.phase == EvalMode::Corner)
            .cloned()
            .collect();
        if let Some(evidence) = stall_evidence(&corner_history, config.stall_window) {
            return Ok(lp.outcome(RunStatus::Stalled, Some(evidence)));
        }
        if corner_fixes >= config.max_corner_iters {
            return Ok(lp.outcome(
                RunStatus::IterationLimit,
                Some(format!("phase 2 budget of {} fixes exhausted", config.max_corner_iters)),
            ));
        }
        plan = lp.propose(strategist, iteration, EvalMode::Corner)?;
        if plan.declared_done {
            return Ok(lp.outcome(
                RunStatus::Stalled,
                Some("strategist declared done while corner targets still fail".into()),
            ));
        }
        lp.apply(&plan)?;
        iteration += 1;
        corner_fixes += 1;
    }
}

/// A corner fix regressed TT: fall back to phase 1 by restarting the run
/// from the current netlist state with the remaining budget.
fn run_reenter(
    mut lp: Loop<'_>,
    config: &RunConfig,
    specs: &SpecSet,
    strategist: &mut dyn Strategist,
    iteration: usize,
) -> Result<RunOutcome, RunAbort> {
    let remaining = config.max_tt_iters.saturating_sub(iteration);
    if remaining == 0 {
        return Ok(lp.outcome(
            RunStatus::IterationLimit,
            Some("TT regression with no phase-1 budget left".into()),
        ));
    }
    let mut sub = config.clone();
    sub.max_tt_iters = remaining;
    sub.log_path = None; // already persisted up to here; sub-run appends
    let doc = lp.doc.clone();
    let mut prior = std::mem::take(&mut lp.history);
    let mut outcome = run_with_offset(&sub, &doc, specs, strategist, lp.backend, iteration, config.log_path.as_deref());
    prior.append(&mut outcome.history);
    outcome.history = prior;
    Ok(outcome)
}

/// Re-run starting from `doc` with iteration numbers offset; used for
/// phase-1 re-entry after a TT regression.
fn run_with_offset(
    config: &RunConfig,
    seed_doc: &NetlistDoc,
    specs: &SpecSet,
    strategist: &mut dyn Strategist,
    backend: &dyn Backend,
    offset: usize,
    log_path: Option<&Path>,
) -> RunOutcome {
    let mut sub = config.clone();
    sub.log_path = log_path.map(|p| p.to_path_buf());
    // the sub-run must append, not rewrite: init_log is skipped because
    // the header already exists
    let mut outcome = match run_inner_no_header(&sub, seed_doc, specs, strategist, backend) {
        Ok(o) => o,
        Err(RunAbort { history, message }) => RunOutcome {
            status: RunStatus::Error,
            fom: fom_of_last(&history),
            history,
            detail: Some(message),
        },
    };
    for r in &mut outcome.history {
        r.iteration += offset;
    }
    outcome
}

fn run_inner_no_header(
    config: &RunConfig,
    seed_doc: &NetlistDoc,
    specs: &SpecSet,
    strategist: &mut dyn Strategist,
    backend: &dyn Backend,
) -> Result<RunOutcome, RunAbort> {
    // identical to run_inner but assumes the log header is present
    let mut sub = config.clone();
    let path = sub.log_path.take();
    let mut outcome = run_inner(&sub, seed_doc, specs, strategist, backend)?;
    if let Some(path) = path {
        for r in &outcome.history {
            if let Err(e) = persist_record(&path, r) {
                outcome.detail = Some(format!("failed to persist run log: {e}"));
                outcome.status = RunStatus::Error;
                break;
            }
        }
    }
    Ok(outcome)
}

fn worst_metrics(wc: &BTreeMap<Metric, (f64, ProcessCorner)>) -> PerfMetrics {
    PerfMetrics {
        gain_db: wc.get(&Metric::Gain).map(|v| v.0).unwrap_or(f64::NAN),
        gbw_hz: wc.get(&Metric::Gbw).map(|v| v.0).unwrap_or(f64::NAN),
        pm_deg: wc.get(&Metric::Pm).map(|v| v.0).unwrap_or(f64::NAN),
        sr_v_per_us: wc.get(&Metric::Sr).map(|v| v.0).unwrap_or(f64::NAN),
        idc_a: wc.get(&Metric::Idc).map(|v| v.0).unwrap_or(f64::NAN),
    }
}

fn fom_of_last(history: &[IterationRecord]) -> Option<FomReport> {
    let last = history.last()?;
    let tt = last.metrics.get(&ProcessCorner::TT)?;
    compute_fom(tt, &last.params, DEFAULT_FOM_FORMULA).ok()
}

/// Stall verdict with human-readable evidence. `None` means no stall.
pub fn stall_evidence(history: &[IterationRecord], window: usize) -> Option<String> {
    if history.len() < window {
        return None;
    }
    let recent = &history[history.len() - window..];

    // (a) cycle: the exact parameter vector recurs within the window
    for i in 0..recent.len() {
        for j in i + 1..recent.len() {
            if recent[i].params.fingerprint() == recent[j].params.fingerprint() {
                return Some(format!(
                    "cycle: parameter state of iteration {} recurs at iteration {}",
                    recent[i].iteration, recent[j].iteration
                ));
            }
        }
    }

    // (b) plateau: no failing-metric margin improved by > 1% relative
    let first = &recent[0];
    let last = recent.last().unwrap();
    let mut any_failing = false;
    for e in first.report.entries.iter().filter(|e| !e.pass) {
        any_failing = true;
        if let Some(now) = last.report.get(e.metric) {
            if now.margin_frac - e.margin_frac > PLATEAU_EPS {
                return None;
            }
        }
    }
    if any_failing {
        return Some(format!(
            "plateau: no failing margin improved by more than {:.0}% across the last {window} iterations",
            PLATEAU_EPS * 100.0
        ));
    }
    None
}

/// Boolean form of [`stall_evidence`].
pub fn detect_stall(history: &[IterationRecord], window: usize) -> bool {
    stall_evidence(history, window).is_some()
}

/// Fixed-format digest of the last `k` records: changed knobs plus each
/// metric with a pass mark.
pub fn summarize_history(history: &[IterationRecord], k: usize) -> String {
    if history.is_empty() {
        return "none".into();
    }
    let start = history.len().saturating_sub(k);
    let mut out = String::new();
    for idx in start..history.len() {
        let r = &history[idx];
        let changed = if idx == 0 {
            "seed".to_string()
        } else {
            diff_params(&history[idx - 1].params, &r.params)
        };
        let phase = match r.phase {
            EvalMode::Tt => "tt",
            EvalMode::Corner => "corner",
        };
        let verdicts = r
            .report
            .entries
            .iter()
            .map(|e| {
                format!(
                    "{} {} {}",
                    e.metric.as_str(),
                    e.metric.display(e.value),
                    if e.pass { "PASS" } else { "FAIL" }
                )
            })
            .collect::<Vec<_>>()
            .join(", ");
        out.push_str(&format!("iter {} ({phase}): [{changed}] {verdicts}\n", r.iteration));
    }
    out.trim_end().to_string()
}

fn trim_num(v: f64) -> String {
    let s = format!("{v:.4}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn diff_params(old: &CircuitParams, new: &CircuitParams) -> String {
    let mut changes = Vec::new();
    for i in 0..7 {
        let (o, n) = (&old.devices[i], &new.devices[i]);
        if o.w_um != n.w_um {
            changes.push(format!("M{}.W {}u->{}u", i + 1, trim_num(o.w_um), trim_num(n.w_um)));
        }
        if o.l_um != n.l_um {
            changes.push(format!("M{}.L {}u->{}u", i + 1, trim_num(o.l_um), trim_num(n.l_um)));
        }
        if o.m != n.m {
            changes.push(format!("M{}.m {}->{}", i + 1, o.m, n.m));
        }
    }
    if old.c1_f != new.c1_f {
        changes.push(format!(
            "C1 {}p->{}p",
            trim_num(old.c1_f * 1e12),
            trim_num(new.c1_f * 1e12)
        ));
    }
    if changes.is_empty() {
        "no change".into()
    } else {
        changes.join(", ")
    }
}

fn init_log(path: &Path) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, format!("{RUNLOG_HEADER}\n"))
}

/// Append one record to the run log.
pub fn persist_record(path: &Path, record: &IterationRecord) -> std::io::Result<()> {
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    let line = serde_json::to_string(record).expect("record serializes");
    writeln!(f, "{line}")
}

/// Load a run log. A corrupt final line is tolerated (crash recovery) and
/// reported through the returned flag; corruption elsewhere is an error.
pub fn load_run(path: &Path) -> Result<(Vec<IterationRecord>, bool), OrchestratorError> {
    let file = std::fs::File::open(path).map_err(OrchestratorError::Io)?;
    let mut reader = std::io::BufReader::new(file);
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    load_run_text(&text, &path.display().to_string())
}

/// Text form of [`load_run`]; `origin` labels error messages.
pub fn load_run_text(
    text: &str,
    origin: &str,
) -> Result<(Vec<IterationRecord>, bool), OrchestratorError> {
    let lines: Vec<&str> = text.lines().collect();
    if lines.iter().all(|l| l.trim().is_empty()) {
        return Ok((Vec::new(), false));
    }
    if lines[0].trim() != RUNLOG_HEADER {
        return Err(OrchestratorError::BadHeader {
            path: origin.to_string(),
        });
    }
    let mut records = Vec::new();
    let mut truncated = false;
    let body: Vec<&&str> = lines[1..].iter().filter(|l| !l.trim().is_empty()).collect();
    for (i, line) in body.iter().enumerate() {
        match serde_json::from_str::<IterationRecord>(line) {
            Ok(r) => records.push(r),
            Err(e) if i + 1 == body.len() => {
                log::warn!("run log {origin}: dropping truncated final record: {e}");
                truncated = true;
            }
            Err(e) => {
                return Err(OrchestratorError::CorruptLog {
                    path: origin.to_string(),
                    line: i + 2,
                    msg: e.to_string(),
                })
            }
        }
    }
    Ok((records, truncated))
}

/// Verify a converged verdict from the log alone: the final record must
/// be an all-corner evaluation whose worst-case values pass the derated
/// targets.
pub fn recheck_converged(history: &[IterationRecord], specs: &SpecSet) -> bool {
    let Some(last) = history.last() else {
        return false;
    };
    if last.phase != EvalMode::Corner {
        return false;
    }
    let Ok(wc) = worst_case(&last.metrics, specs) else {
        return false;
    };
    evaluate_specs(&worst_metrics(&wc), specs, EvalMode::Corner).all_pass
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;
    use crate::backends::stub::RecordedBackend;
    use crate::backends::{AnalyticBackend, LutSet};
    use crate::device_model::ModelConfig;
    use crate::netlist::parse_eng;
    use crate::specs::Direction;
    use crate::strategy::gmid::GmidStrategist;
    use crate::strategy::replay::ReplayStrategist;
    use crate::strategy::rules::RulesStrategist;

    fn seed_doc() -> NetlistDoc {
        NetlistDoc::parse(assets::ITER1_NETLIST).unwrap()
    }

    fn record_with(iteration: usize, c1_f: f64, margins: &[(Metric, f64)]) -> IterationRecord {
        let doc = seed_doc();
        let mut params = extract_params(&doc, &NameMap::default()).unwrap();
        params.c1_f = c1_f;
        let entries = margins
            .iter()
            .map(|&(metric, margin_frac)| crate::specs::MetricVerdict {
                metric,
                value: 0.0,
                target: 1.0,
                margin_frac,
                pass: margin_frac >= 0.0,
            })
            .collect::<Vec<_>>();
        let all_pass = entries.iter().all(|e| e.pass);
        IterationRecord {
            iteration,
            phase: EvalMode::Tt,
            params,
            plan: ActionPlan::done("", ""),
            metrics: BTreeMap::new(),
            report: EvalReport { entries, all_pass },
            all_pass,
            wall_ms: 0,
        }
    }

    #[test]
    fn alternating_cc_is_a_cycle() {
        let mut h = Vec::new();
        for i in 0..6 {
            let c1 = if i % 2 == 0 { 1.0e-12 } else { 1.1e-12 };
            h.push(record_with(i + 1, c1, &[(Metric::Gain, -0.1)]));
        }
        let evidence = stall_evidence(&h, 6).unwrap();
        assert!(evidence.contains("cycle"), "{evidence}");
    }

    #[test]
    fn improving_margins_are_not_a_stall() {
        let mut h = Vec::new();
        for i in 0..6 {
            // distinct params each step, margin improving 5% per step
            h.push(record_with(
                i + 1,
                (1.0 + i as f64 * 0.05) * 1e-12,
                &[(Metric::Gain, -0.30 + i as f64 * 0.05)],
            ));
        }
        assert!(!detect_stall(&h, 6));
    }

    #[test]
    fn short_history_is_never_a_stall() {
        let h = vec![
            record_with(1, 1e-12, &[(Metric::Gain, -0.1)]),
            record_with(2, 1e-12, &[(Metric::Gain, -0.1)]),
        ];
        assert!(!detect_stall(&h, 6));
    }

    #[test]
    fn flat_failing_margins_are_a_plateau() {
        let mut h = Vec::new();
        for i in 0..6 {
            // params all distinct, margin frozen
            h.push(record_with(i + 1, (1.0 + i as f64 * 0.01) * 1e-12, &[(Metric::Gain, -0.2)]));
        }
        let evidence = stall_evidence(&h, 6).unwrap();
        assert!(evidence.contains("plateau"), "{evidence}");
    }

    #[test]
    fn summary_covers_last_k_and_shows_deltas() {
        let mut h = Vec::new();
        for i in 0..8 {
            h.push(record_with(i + 1, (1.0 + i as f64 * 0.1) * 1e-12, &[(Metric::Gain, -0.1)]));
        }
        let s = summarize_history(&h, 5);
        assert_eq!(s.lines().count(), 5);
        assert!(s.contains("iter 8"));
        assert!(!s.contains("iter 3 "));
        assert!(s.contains("C1 1.6p->1.7p"), "{s}");
        assert_eq!(summarize_history(&[], 5), "none");
    }

    #[test]
    fn runlog_round_trip_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.log");
        init_log(&path).unwrap();
        let records: Vec<IterationRecord> = (0..6)
            .map(|i| record_with(i + 1, 1e-12 * (i + 1) as f64, &[(Metric::Gbw, -0.05)]))
            .collect();
        for r in &records {
            persist_record(&path, r).unwrap();
        }
        let (loaded, truncated) = load_run(&path).unwrap();
        assert_eq!(loaded, records);
        assert!(!truncated);

        // chop the final line mid-record
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, &text[..text.len() - 40]).unwrap();
        let (loaded, truncated) = load_run(&path).unwrap();
        assert_eq!(loaded.len(), 5);
        assert!(truncated);
    }

    #[test]
    fn runlog_rejects_corruption_and_bad_headers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.log");

        std::fs::write(&path, "").unwrap();
        // an empty file is a valid, empty history (crash before any record)
        assert_eq!(load_run(&path).unwrap(), (Vec::new(), false));

        std::fs::write(&path, "something else\n").unwrap();
        assert!(matches!(load_run(&path), Err(OrchestratorError::BadHeader { .. })));

        init_log(&path).unwrap();
        let r = record_with(1, 1e-12, &[(Metric::Gain, -0.1)]);
        persist_record(&path, &r).unwrap();
        let mut text = std::fs::read_to_string(&path).unwrap();
        text.push_str("garbage in the middle\n");
        persist_and_reload_error(&path, text, &r);
    }

    fn persist_and_reload_error(path: &Path, text: String, r: &IterationRecord) {
        std::fs::write(path, text).unwrap();
        persist_record(path, r).unwrap();
        match load_run(path) {
            Err(OrchestratorError::CorruptLog { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn replay_run_reproduces_the_recorded_trajectory() {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("replay.log");
        let backend = RecordedBackend::from_text(&assets::trajectory_recorded_metrics()).unwrap();
        let mut strategist = ReplayStrategist::from_text(assets::TRAJECTORY_SCRIPT).unwrap();
        let config = RunConfig {
            log_path: Some(log.clone()),
            ..RunConfig::default()
        };
        let outcome = run(
            &config,
            &seed_doc(),
            &SpecSet::default_opamp(),
            &mut strategist,
            &backend,
        );
        assert_eq!(outcome.status, RunStatus::Converged, "{:?}", outcome.detail);

        // TT pass at iteration 5, corner fix at iteration 6
        let tt_pass = outcome
            .history
            .iter()
            .find(|r| r.phase == EvalMode::Tt && r.all_pass)
            .unwrap();
        assert_eq!(tt_pass.iteration, 5);
        let last = outcome.final_record().unwrap();
        assert_eq!(last.iteration, 6);
        assert_eq!(last.phase, EvalMode::Corner);
        assert_eq!(last.params.c1_f, parse_eng("0.9p").unwrap());

        // parameter states along phase 1 equal the script columns
        let expected_c1 = ["1.0p", "0.7p", "1.2p", "1.2p", "1.0p"];
        for (i, want) in expected_c1.iter().enumerate() {
            let r = &outcome.history[i];
            assert_eq!(r.iteration, i + 1);
            assert_eq!(r.params.c1_f, parse_eng(want).unwrap(), "iteration {}", i + 1);
        }
        assert_eq!(outcome.history[4].params.devices[0].w_um, 4.0);

        // log round-trip reconstructs the same history, and the converged
        // verdict can be rechecked from the log alone
        let (loaded, truncated) = load_run(&log).unwrap();
        assert!(!truncated);
        assert_eq!(loaded, outcome.history);
        assert!(recheck_converged(&loaded, &SpecSet::default_opamp()));
    }

    #[test]
    fn gmid_run_converges_hermetically() {
        let luts = LutSet::build_default(&ModelConfig::default()).unwrap();
        let mut strategist = GmidStrategist::new(luts.clone());
        let backend = AnalyticBackend::new(luts);
        let outcome = run(
            &RunConfig::default(),
            &seed_doc(),
            &SpecSet::default_opamp(),
            &mut strategist,
            &backend,
        );
        assert_eq!(outcome.status, RunStatus::Converged, "{:?}", outcome.detail);
        let total = outcome.final_record().unwrap().iteration;
        assert!(total <= 10, "took {total} iterations");
        assert!(recheck_converged(&outcome.history, &SpecSet::default_opamp()));
    }

    #[test]
    fn rules_run_stalls_on_unreachable_gain() {
        let luts = LutSet::build_default(&ModelConfig::default()).unwrap();
        let mut strategist = RulesStrategist::new();
        let backend = AnalyticBackend::new(luts);
        let specs = SpecSet::from_text(assets::GAIN_LIMITED_SPEC).unwrap();
        let config = RunConfig {
            max_tt_iters: 80,
            ..RunConfig::default()
        };
        let outcome = run(&config, &seed_doc(), &specs, &mut strategist, &backend);
        assert_eq!(outcome.status, RunStatus::Stalled, "{:?}", outcome.detail);
        let detail = outcome.detail.unwrap();
        assert!(
            detail.contains("cycle") || detail.contains("plateau"),
            "{detail}"
        );
    }

    #[test]
    fn config_validation_rejects_nonsense() {
        let mut c = RunConfig::default();
        c.max_tt_iters = 0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.corners = vec![];
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.corners = vec![ProcessCorner::TT, ProcessCorner::TT];
        assert!(c.validate().is_err());
    }

    #[test]
    fn no_corner_record_before_tt_pass() {
        // replay run: every corner-phase record must come after the first
        // all-pass TT record
        let backend = RecordedBackend::from_text(&assets::trajectory_recorded_metrics()).unwrap();
        let mut strategist = ReplayStrategist::from_text(assets::TRAJECTORY_SCRIPT).unwrap();
        let outcome = run(
            &RunConfig::default(),
            &seed_doc(),
            &SpecSet::default_opamp(),
            &mut strategist,
            &backend,
        );
        let first_pass = outcome
            .history
            .iter()
            .position(|r| r.phase == EvalMode::Tt && r.all_pass)
            .unwrap();
        for (i, r) in outcome.history.iter().enumerate() {
            if r.phase == EvalMode::Corner {
                assert!(i > first_pass || outcome.history[first_pass].iteration == r.iteration);
                assert!(i >= first_pass);
                for corner in &RunConfig::default().corners {
                    assert!(r.metrics.contains_key(corner), "missing {corner}");
                }
            } else {
                assert_eq!(r.metrics.len(), 1);
            }
        }
        // worst-case direction sanity: at_most metrics pick the max
        let specs = SpecSet::default_opamp();
        for item in &specs.items {
            if item.direction == Direction::AtMost {
                assert_eq!(item.metric, Metric::Idc);
            }
        }
    }
}
