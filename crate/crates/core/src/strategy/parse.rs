//! Reply parsing: tolerant section headers, strict machine grammar.
//!
//! The machine block is a fenced code block whose first line is `ACTIONS`,
//! followed by `<name>.<W|L|m> = <value>` or `<capname> = <value>` lines,
//! or the single token `DONE`.

use crate::netlist::{EngNumber, ParamPatch, PatchField, PatchValue};
use crate::strategy::{bounds, ActionPlan, StrategyError};

/// Targets a plan may legally touch: the seven transistor roles plus the
/// compensation capacitor. The load capacitor is a fixed spec condition.
pub const ALLOWED_TARGETS: [&str; 8] = ["M1", "M2", "M3", "M4", "M5", "M6", "M7", "C1"];

pub fn parse_response(text: &str) -> Result<ActionPlan, StrategyError> {
    let observation = section_text(text, &["observation"]);
    let thinking = section_text(text, &["thinking process", "thinking"]);

    let block = action_block(text).ok_or(StrategyError::MissingActionBlock)?;
    let mut patches = Vec::new();
    let mut declared_done = false;
    for (line_no, line) in block {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.eq_ignore_ascii_case("DONE") {
            declared_done = true;
            continue;
        }
        patches.push(parse_assignment(trimmed, line_no)?);
    }
    Ok(ActionPlan {
        observation,
        thinking,
        patches,
        declared_done,
    })
}

/// One grammar line -> validated patch.
pub fn parse_assignment(text: &str, line: usize) -> Result<ParamPatch, StrategyError> {
    let bad = |msg: &str| StrategyError::BadAssignment {
        line,
        text: text.to_string(),
        msg: msg.to_string(),
    };
    let (lhs, rhs) = text.split_once('=').ok_or_else(|| bad("missing `=`"))?;
    let lhs = lhs.trim();
    let rhs = rhs.trim();
    if rhs.is_empty() {
        return Err(bad("missing value"));
    }

    let patch = if let Some((name, field)) = lhs.split_once('.') {
        let target = name.trim().to_ascii_uppercase();
        let field = match field.trim() {
            f if f.eq_ignore_ascii_case("W") => PatchField::W,
            f if f.eq_ignore_ascii_case("L") => PatchField::L,
            f if f.eq_ignore_ascii_case("m") => PatchField::M,
            other => return Err(bad(&format!("unknown field {other:?}"))),
        };
        let value = if field == PatchField::M {
            let m: u32 = rhs.parse().map_err(|_| bad("m must be an integer"))?;
            PatchValue::Int(m)
        } else {
            PatchValue::Eng(EngNumber::parse(rhs).map_err(|e| bad(&e.to_string()))?)
        };
        ParamPatch::new(&target, field, value)
    } else {
        let target = lhs.to_ascii_uppercase();
        let value = EngNumber::parse(rhs).map_err(|e| bad(&e.to_string()))?;
        ParamPatch::new(&target, PatchField::Value, PatchValue::Eng(value))
    };
    check_bounds(&patch, line)?;
    Ok(patch)
}

/// Enforce role-map membership and the global value bounds.
pub fn check_bounds(patch: &ParamPatch, line: usize) -> Result<(), StrategyError> {
    if !ALLOWED_TARGETS.contains(&patch.target.as_str()) {
        return Err(StrategyError::UnknownRole(patch.target.clone()));
    }
    let violation = |field: &'static str, value: f64, lo: f64, hi: f64| StrategyError::BoundsViolation {
        line,
        target: patch.target.clone(),
        field,
        value,
        lo,
        hi,
    };
    match (&patch.field, &patch.new_value) {
        (PatchField::W, PatchValue::Eng(e)) => {
            let um = e.value * 1e6;
            if um < bounds::W_UM.0 || um > bounds::W_UM.1 {
                return Err(violation("W", um, bounds::W_UM.0, bounds::W_UM.1));
            }
        }
        (PatchField::L, PatchValue::Eng(e)) => {
            let um = e.value * 1e6;
            if um < bounds::L_UM.0 || um > bounds::L_UM.1 {
                return Err(violation("L", um, bounds::L_UM.0, bounds::L_UM.1));
            }
        }
        (PatchField::M, PatchValue::Int(m)) => {
            if *m < bounds::M.0 || *m > bounds::M.1 {
                return Err(violation("m", *m as f64, bounds::M.0 as f64, bounds::M.1 as f64));
            }
        }
        (PatchField::Value, PatchValue::Eng(e)) => {
            if e.value < bounds::C_F.0 || e.value > bounds::C_F.1 {
                return Err(violation("C", e.value, bounds::C_F.0, bounds::C_F.1));
            }
        }
        _ => {
            return Err(StrategyError::BadAssignment {
                line,
                text: String::new(),
                msg: "value type does not match field".into(),
            })
        }
    }
    Ok(())
}

/// Render a plan in the response-format contract; inverse of
/// [`parse_response`] for valid plans.
pub fn render_plan(plan: &ActionPlan) -> String {
    let mut out = String::new();
    out.push_str("Observation:\n");
    out.push_str(plan.observation.trim());
    out.push_str("\n\nThinking Process:\n");
    out.push_str(plan.thinking.trim());
    out.push_str("\n\nAction:\n```\nACTIONS\n");
    for p in &plan.patches {
        out.push_str(&render_assignment(p));
        out.push('\n');
    }
    if plan.declared_done {
        out.push_str("DONE\n");
    }
    out.push_str("```\n");
    out
}

pub fn render_assignment(p: &ParamPatch) -> String {
    match (&p.field, &p.new_value) {
        (PatchField::Value, PatchValue::Eng(e)) => format!("{} = {}", p.target, e.rendered),
        (PatchField::M, PatchValue::Int(m)) => format!("{}.m = {}", p.target, m),
        (field, PatchValue::Eng(e)) => format!("{}.{} = {}", p.target, field.as_str(), e.rendered),
        _ => unreachable!("validated patch"),
    }
}

/// Lines of the fenced block whose first non-empty line is `ACTIONS`,
/// with their 1-based line numbers in the original reply.
fn action_block(text: &str) -> Option<Vec<(usize, String)>> {
    let lines: Vec<&str> = text.lines().collect();
    let mut i = 0;
    while i < lines.len() {
        if lines[i].trim_start().starts_with("```") {
            let mut body = Vec::new();
            let mut j = i + 1;
            while j < lines.len() && !lines[j].trim_start().starts_with("```") {
                body.push((j + 1, lines[j].to_string()));
                j += 1;
            }
            let first = body
                .iter()
                .find(|(_, l)| !l.trim().is_empty())
                .map(|(_, l)| l.trim().to_ascii_uppercase());
            if first.as_deref() == Some("ACTIONS") {
                let start = body
                    .iter()
                    .position(|(_, l)| l.trim().eq_ignore_ascii_case("ACTIONS"))
                    .unwrap();
                return Some(body.split_off(start + 1));
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    None
}

/// Body text of a headed section, tolerant to numbering, markdown and
/// case ("1. Observation:", "**Observation**:", ...).
fn section_text(text: &str, names: &[&str]) -> String {
    let lines: Vec<&str> = text.lines().collect();
    for (i, line) in lines.iter().enumerate() {
        if let Some(rest) = match_header(line, names) {
            let mut body = Vec::new();
            if !rest.is_empty() {
                body.push(rest.to_string());
            }
            for next in &lines[i + 1..] {
                if next.trim_start().starts_with("```")
                    || match_header(next, &["observation", "thinking process", "thinking", "action"])
                        .is_some()
                {
                    break;
                }
                body.push(next.to_string());
            }
            return body.join("\n").trim().to_string();
        }
    }
    String::new()
}

fn match_header<'a>(line: &'a str, names: &[&str]) -> Option<&'a str> {
    let stripped = line
        .trim_start()
        .trim_start_matches(|c: char| c.is_ascii_digit() || c == '.' || c == ')' || c == '#' || c == '*' || c == ' ');
    let lower = stripped.to_ascii_lowercase();
    for name in names {
        if lower.starts_with(name) {
            let after = &stripped[name.len()..];
            let after = after.trim_start_matches('*');
            if let Some(rest) = after.strip_prefix(':') {
                return Some(rest.trim());
            }
        }
    }
    None
}
