//! Prompt assembly for the chat-backed strategists.
//!
//! Both chat variants share the same prompt skeleton; the ablated variant
//! simply omits the gm/Id tables section, so any behavioral difference is
//! attributable to that one block.

use crate::netlist::CircuitParams;
use crate::specs::EvalMode;
use crate::strategy::{IterationContext, StaticKnowledge};

/// Fixed response-format contract appended to every prompt.
pub const RESPONSE_FORMAT: &str = "\
Reply with three sections, then a fenced code block:

Observation: <what the measurements say>
Thinking Process: <why the chosen knobs move the failing metrics>
Action:
```
ACTIONS
<device>.<W|L|m> = <value>      e.g. M1.W = 4u, M5.m = 4
<capacitor> = <value>           e.g. C1 = 1.2p
DONE                            only when every target is met
```

Only M1..M7 and C1 may be changed. Bounds: W in [0.3u, 500u],
L in [0.15u, 5u], m in [1, 64] (integer), C in [0.1p, 20p].
";

fn section(out: &mut String, title: &str, body: &str) {
    out.push_str("== ");
    out.push_str(title);
    out.push_str(" ==\n");
    out.push_str(body.trim_end());
    out.push_str("\n\n");
}

/// Fixed-precision number with trailing zeros trimmed: stable display for
/// values reconstructed through unit conversions.
fn trim4(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

/// Render the current sizing state, one knob per line.
pub fn render_params(params: &CircuitParams) -> String {
    let mut out = String::new();
    for (i, d) in params.devices.iter().enumerate() {
        out.push_str(&format!(
            "M{}: W = {}u, L = {}u, m = {}\n",
            i + 1,
            trim4(d.w_um),
            trim4(d.l_um),
            d.m
        ));
    }
    out.push_str(&format!("C1 = {}p\n", trim4(params.c1_f * 1e12)));
    out.push_str(&format!("CL = {}p (fixed load)\n", trim4(params.cl_f * 1e12)));
    out
}

fn render_measurements(ctx: &IterationContext) -> String {
    let mut out = String::new();
    for (corner, m) in &ctx.metrics {
        out.push_str(&format!(
            "{corner}: gain = {:.2} dB, GBW = {:.2} MHz, PM = {:.2} deg, SR = {:.2} V/us, Idc = {:.1} uA\n",
            m.gain_db,
            m.gbw_hz / 1e6,
            m.pm_deg,
            m.sr_v_per_us,
            m.idc_a * 1e6
        ));
    }
    out.push('\n');
    let basis = match ctx.phase {
        EvalMode::Tt => "TT targets",
        EvalMode::Corner => "derated worst-case targets",
    };
    out.push_str(&format!("Verdicts against {basis}:\n"));
    for e in &ctx.report.entries {
        out.push_str(&format!(
            "{:<4} value {} target {} margin {:+.1}% -> {}\n",
            e.metric.as_str(),
            e.metric.display(e.value),
            e.metric.display(e.target),
            e.margin_frac * 100.0,
            if e.pass { "PASS" } else { "FAIL" }
        ));
    }
    out
}

/// Opening prompt: static knowledge only, asking for a theoretical
/// starting point before any simulation.
pub fn build_initial_prompt(know: &StaticKnowledge, include_tables: bool) -> String {
    let mut out = String::new();
    section(
        &mut out,
        "Task",
        "You are sizing a two-stage Miller-compensated op-amp. Propose an \
         initial sizing from first principles before any simulation runs.",
    );
    section(&mut out, "Circuit", &know.circuit_brief);
    section(&mut out, "Design Heuristics", &know.heuristics);
    if include_tables {
        section(&mut out, "gm/Id Tables", &know.lut_digest);
    }
    section(&mut out, "Specifications", &know.spec_table);
    section(&mut out, "Response Format", RESPONSE_FORMAT);
    out
}

/// Per-iteration prompt: static knowledge plus the live state.
pub fn build_iteration_prompt(
    know: &StaticKnowledge,
    ctx: &IterationContext,
    include_tables: bool,
) -> String {
    let mut out = String::new();
    let phase = match ctx.phase {
        EvalMode::Tt => "phase 1 (typical corner)",
        EvalMode::Corner => "phase 2 (all process corners, derated targets)",
    };
    section(
        &mut out,
        "Task",
        &format!(
            "Iteration {} of {phase}. Adjust the sizing so every failing \
             metric passes without breaking the passing ones. Emit DONE \
             only when all verdicts are PASS.",
            ctx.iteration
        ),
    );
    section(&mut out, "Circuit", &know.circuit_brief);
    section(&mut out, "Design Heuristics", &know.heuristics);
    if include_tables {
        section(&mut out, "gm/Id Tables", &know.lut_digest);
    }
    section(&mut out, "Specifications", &know.spec_table);
    section(&mut out, "Current Parameters", &render_params(&ctx.params));
    section(&mut out, "Measured Performance", &render_measurements(ctx));
    let history = if ctx.history_summary.is_empty() {
        "none"
    } else {
        ctx.history_summary.as_str()
    };
    section(&mut out, "History", history);
    section(&mut out, "Response Format", RESPONSE_FORMAT);
    out
}
