//! SPICE-subset netlist handling for the fixed two-stage op-amp topology.
//!
//! Only MOS cards (`M<name> d g s b <model> W=.. L=.. [m=..]`) and
//! capacitor cards (`C<name> n1 n2 <value>`) are indexed; every other line
//! passes through untouched. Patches are token-level edits so all bytes
//! outside the targeted field survive verbatim.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum NetlistError {
    #[error("malformed number {token:?}")]
    BadNumber { token: String },
    #[error("line {line}: duplicate element name {name}")]
    DuplicateName { line: usize, name: String },
    #[error("line {line}: device card missing {field}")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: malformed {kind} card")]
    BadCard { line: usize, kind: &'static str },
    #[error("unknown target {target}; known elements: {known}")]
    UnknownTarget { target: String, known: String },
    #[error("field {field} illegal for {target}")]
    IllegalField { field: &'static str, target: String },
    #[error("missing device {name} (role {role})")]
    MissingDevice { name: String, role: &'static str },
    #[error("{target}: {field} must be positive")]
    NonPositive { target: String, field: &'static str },
    #[error("{target}: m must be an integer >= 1")]
    BadMultiplier { target: String },
}

/// An engineering-notation number that remembers its original token, so
/// re-parsing the rendered text always returns the same value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngNumber {
    pub value: f64,
    pub rendered: String,
}

impl EngNumber {
    pub fn parse(token: &str) -> Result<EngNumber, NetlistError> {
        Ok(EngNumber {
            value: parse_eng(token)?,
            rendered: token.to_string(),
        })
    }

    /// Render a value with an engineering suffix. Falls back to plain
    /// decimal whenever the suffixed form would not re-parse exactly.
    pub fn from_value(value: f64) -> EngNumber {
        let rendered = format_eng(value);
        EngNumber { value, rendered }
    }
}

/// SPICE numeric suffixes, longest match first so `meg` beats `m`.
const SUFFIXES: [(&str, f64); 9] = [
    ("meg", 1e6),
    ("t", 1e12),
    ("g", 1e9),
    ("k", 1e3),
    ("m", 1e-3),
    ("u", 1e-6),
    ("n", 1e-9),
    ("p", 1e-12),
    ("f", 1e-15),
];

/// Parse a SPICE number: `<float><suffix?>`, case-insensitive, trailing
/// unit letters after the suffix ignored (e.g. `pF`).
pub fn parse_eng(token: &str) -> Result<f64, NetlistError> {
    let bad = || NetlistError::BadNumber {
        token: token.to_string(),
    };
    let t = token.trim();
    if t.is_empty() {
        return Err(bad());
    }
    let num_end = t
        .char_indices()
        .take_while(|&(i, c)| {
            c.is_ascii_digit()
                || c == '.'
                || c == '+'
                || c == '-'
                || (matches!(c, 'e' | 'E')
                    && t[i + 1..]
                        .chars()
                        .next()
                        .is_some_and(|n| n.is_ascii_digit() || n == '+' || n == '-'))
        })
        .last()
        .map(|(i, c)| i + c.len_utf8())
        .unwrap_or(0);
    let (num, rest) = t.split_at(num_end);
    let base: f64 = num.parse().map_err(|_| bad())?;
    let rest_lc = rest.to_ascii_lowercase();
    if rest_lc.is_empty() {
        return Ok(base);
    }
    if !rest_lc.chars().all(|c| c.is_ascii_alphabetic()) {
        return Err(bad());
    }
    for (suffix, mult) in SUFFIXES {
        if rest_lc.starts_with(suffix) {
            return Ok(base * mult);
        }
    }
    // a bare unit like "F" carries no scale
    Ok(base)
}

/// Inverse of [`parse_eng`], exact by construction.
pub fn format_eng(value: f64) -> String {
    if value == 0.0 || !value.is_finite() {
        return value.to_string();
    }
    let candidates: [(&str, f64); 7] = [
        ("f", 1e-15),
        ("p", 1e-12),
        ("n", 1e-9),
        ("u", 1e-6),
        ("m", 1e-3),
        ("k", 1e3),
        ("meg", 1e6),
    ];
    let mag = value.abs();
    for (suffix, mult) in candidates {
        let mant = value / mult;
        if mag >= mult && mag < mult * 1000.0 {
            let rendered = format!("{mant}{suffix}");
            if parse_eng(&rendered).map(|v| v == value).unwrap_or(false) {
                return rendered;
            }
        }
    }
    value.to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PatchField {
    W,
    L,
    M,
    Value,
}

impl PatchField {
    pub fn as_str(&self) -> &'static str {
        match self {
            PatchField::W => "W",
            PatchField::L => "L",
            PatchField::M => "m",
            PatchField::Value => "VALUE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PatchValue {
    Eng(EngNumber),
    Int(u32),
}

/// One parameter edit: set `field` of `target` to `new_value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamPatch {
    /// Canonical uppercase element name.
    pub target: String,
    pub field: PatchField,
    pub new_value: PatchValue,
}

impl ParamPatch {
    pub fn new(target: &str, field: PatchField, new_value: PatchValue) -> ParamPatch {
        ParamPatch {
            target: target.to_ascii_uppercase(),
            field,
            new_value,
        }
    }

    pub fn eng(target: &str, field: PatchField, token: &str) -> Result<ParamPatch, NetlistError> {
        Ok(ParamPatch::new(target, field, PatchValue::Eng(EngNumber::parse(token)?)))
    }

    pub fn validate(&self) -> Result<(), NetlistError> {
        match (&self.field, &self.new_value) {
            (PatchField::M, PatchValue::Int(m)) => {
                if *m < 1 {
                    return Err(NetlistError::BadMultiplier {
                        target: self.target.clone(),
                    });
                }
            }
            (PatchField::M, PatchValue::Eng(_)) => {
                return Err(NetlistError::BadMultiplier {
                    target: self.target.clone(),
                })
            }
            (PatchField::W | PatchField::L | PatchField::Value, PatchValue::Eng(e)) => {
                if !(e.value > 0.0) {
                    return Err(NetlistError::NonPositive {
                        target: self.target.clone(),
                        field: self.field.as_str(),
                    });
                }
            }
            (PatchField::W | PatchField::L | PatchField::Value, PatchValue::Int(_)) => {
                return Err(NetlistError::NonPositive {
                    target: self.target.clone(),
                    field: self.field.as_str(),
                })
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceEntry {
    pub model: String,
    pub w: EngNumber,
    pub l: EngNumber,
    pub m: u32,
    pub line_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapEntry {
    pub value: EngNumber,
    pub line_index: usize,
}

/// Parsed netlist: raw lines plus indexes into the device/cap cards.
#[derive(Debug, Clone, PartialEq)]
pub struct NetlistDoc {
    pub lines: Vec<String>,
    pub devices: BTreeMap<String, DeviceEntry>,
    pub capacitors: BTreeMap<String, CapEntry>,
    trailing_newline: bool,
}

impl NetlistDoc {
    pub fn parse(text: &str) -> Result<NetlistDoc, NetlistError> {
        let lines: Vec<String> = text.lines().map(|l| l.to_string()).collect();
        let mut devices = BTreeMap::new();
        let mut capacitors = BTreeMap::new();
        for (idx, line) in lines.iter().enumerate() {
            let trimmed = line.trim_start();
            if trimmed.starts_with('*') || trimmed.starts_with('.') || trimmed.is_empty() {
                continue;
            }
            let first = trimmed.split_ascii_whitespace().next().unwrap_or("");
            let name = first.to_ascii_uppercase();
            match name.chars().next() {
                Some('M') => {
                    let entry = parse_device_card(trimmed, idx)?;
                    if devices.insert(name.clone(), entry).is_some() {
                        return Err(NetlistError::DuplicateName {
                            line: idx + 1,
                            name,
                        });
                    }
                }
                Some('C') => {
                    let entry = parse_cap_card(trimmed, idx)?;
                    if capacitors.insert(name.clone(), entry).is_some() {
                        return Err(NetlistError::DuplicateName {
                            line: idx + 1,
                            name,
                        });
                    }
                }
                _ => {}
            }
        }
        Ok(NetlistDoc {
            lines,
            devices,
            capacitors,
            trailing_newline: text.ends_with('\n') || text.is_empty(),
        })
    }

    pub fn render(&self) -> String {
        let mut out = self.lines.join("\n");
        if self.trailing_newline && !self.lines.is_empty() {
            out.push('\n');
        }
        out
    }

    fn known_names(&self) -> String {
        self.devices
            .keys()
            .chain(self.capacitors.keys())
            .cloned()
            .collect::<Vec<_>>()
            .join(", ")
    }

    /// Apply patches in order; only the named field tokens on the targeted
    /// lines change. Last writer wins on duplicate targets.
    pub fn apply_patches(&self, patches: &[ParamPatch]) -> Result<NetlistDoc, NetlistError> {
        let mut doc = self.clone();
        for patch in patches {
            patch.validate()?;
            let target = patch.target.to_ascii_uppercase();
            if let Some(entry) = doc.devices.get_mut(&target) {
                let line = &mut doc.lines[entry.line_index];
                match (&patch.field, &patch.new_value) {
                    (PatchField::W, PatchValue::Eng(e)) => {
                        *line = replace_assignment(line, "W", &e.rendered, entry.line_index)?;
                        entry.w = e.clone();
                    }
                    (PatchField::L, PatchValue::Eng(e)) => {
                        *line = replace_assignment(line, "L", &e.rendered, entry.line_index)?;
                        entry.l = e.clone();
                    }
                    (PatchField::M, PatchValue::Int(m)) => {
                        *line = replace_assignment(line, "m", &m.to_string(), entry.line_index)?;
                        entry.m = *m;
                    }
                    _ => {
                        return Err(NetlistError::IllegalField {
                            field: patch.field.as_str(),
                            target: target.clone(),
                        })
                    }
                }
            } else if let Some(entry) = doc.capacitors.get_mut(&target) {
                match (&patch.field, &patch.new_value) {
                    (PatchField::Value, PatchValue::Eng(e)) => {
                        let line = &mut doc.lines[entry.line_index];
                        *line = replace_nth_token(line, 3, &e.rendered);
                        entry.value = e.clone();
                    }
                    _ => {
                        return Err(NetlistError::IllegalField {
                            field: patch.field.as_str(),
                            target: target.clone(),
                        })
                    }
                }
            } else {
                return Err(NetlistError::UnknownTarget {
                    target: target.clone(),
                    known: doc.known_names(),
                });
            }
        }
        Ok(doc)
    }
}

fn parse_device_card(line: &str, idx: usize) -> Result<DeviceEntry, NetlistError> {
    let tokens: Vec<&str> = line.split_ascii_whitespace().collect();
    if tokens.len() < 6 {
        return Err(NetlistError::BadCard {
            line: idx + 1,
            kind: "device",
        });
    }
    let model = tokens[5].to_string();
    let mut w = None;
    let mut l = None;
    let mut m = 1u32;
    for tok in &tokens[6..] {
        let Some((key, val)) = tok.split_once('=') else {
            continue;
        };
        match key.to_ascii_uppercase().as_str() {
            "W" => w = Some(EngNumber::parse(val)?),
            "L" => l = Some(EngNumber::parse(val)?),
            "M" => {
                m = val.parse().map_err(|_| NetlistError::BadMultiplier {
                    target: tokens[0].to_ascii_uppercase(),
                })?
            }
            _ => {}
        }
    }
    let w = w.ok_or(NetlistError::MissingField {
        line: idx + 1,
        field: "W",
    })?;
    let l = l.ok_or(NetlistError::MissingField {
        line: idx + 1,
        field: "L",
    })?;
    Ok(DeviceEntry {
        model,
        w,
        l,
        m,
        line_index: idx,
    })
}

fn parse_cap_card(line: &str, idx: usize) -> Result<CapEntry, NetlistError> {
    let tokens: Vec<&str> = line.split_ascii_whitespace().collect();
    if tokens.len() < 4 {
        return Err(NetlistError::BadCard {
            line: idx + 1,
            kind: "capacitor",
        });
    }
    Ok(CapEntry {
        value: EngNumber::parse(tokens[3])?,
        line_index: idx,
    })
}

/// Replace the value of `key=<val>` on a card line, preserving every other
/// byte including whitespace runs.
fn replace_assignment(
    line: &str,
    key: &str,
    new_val: &str,
    line_index: usize,
) -> Result<String, NetlistError> {
    let lower = line.to_ascii_lowercase();
    let pat = format!("{}=", key.to_ascii_lowercase());
    let mut search = 0;
    while let Some(rel) = lower[search..].find(&pat) {
        let pos = search + rel;
        // must start a token
        let starts_token = pos == 0 || lower.as_bytes()[pos - 1].is_ascii_whitespace();
        if starts_token {
            let val_start = pos + pat.len();
            let val_end = line[val_start..]
                .find(|c: char| c.is_ascii_whitespace())
                .map(|o| val_start + o)
                .unwrap_or(line.len());
            let mut out = String::with_capacity(line.len());
            out.push_str(&line[..val_start]);
            out.push_str(new_val);
            out.push_str(&line[val_end..]);
            return Ok(out);
        }
        search = pos + 1;
    }
    Err(NetlistError::MissingField {
        line: line_index + 1,
        field: if key.eq_ignore_ascii_case("w") {
            "W"
        } else if key.eq_ignore_ascii_case("l") {
            "L"
        } else {
            "m"
        },
    })
}

/// Replace the nth whitespace-separated token (0-based), preserving spacing.
fn replace_nth_token(line: &str, n: usize, new_tok: &str) -> String {
    let mut out = String::with_capacity(line.len());
    let mut chars = line.char_indices().peekable();
    let mut tok_idx = 0usize;
    let mut in_tok = false;
    let mut replaced = false;
    while let Some((i, c)) = chars.next() {
        if c.is_ascii_whitespace() {
            in_tok = false;
            out.push(c);
        } else {
            if !in_tok {
                in_tok = true;
                if tok_idx == n && !replaced {
                    out.push_str(new_tok);
                    replaced = true;
                    // skip the rest of the original token
                    let mut end = i;
                    while let Some(&(j, cj)) = chars.peek() {
                        if cj.is_ascii_whitespace() {
                            break;
                        }
                        end = j;
                        chars.next();
                    }
                    let _ = end;
                    tok_idx += 1;
                    continue;
                }
                tok_idx += 1;
            }
            out.push(c);
        }
    }
    out
}

/// Device geometry for one named transistor role.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceGeom {
    pub w_um: f64,
    pub l_um: f64,
    pub m: u32,
}

/// Full parameter state of the fixed topology. Geometry in um, caps in F.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    pub devices: [DeviceGeom; 7],
    pub c1_f: f64,
    pub cl_f: f64,
}

pub const DEFAULT_CL_F: f64 = 2e-12;

impl CircuitParams {
    pub fn device(&self, role: usize) -> &DeviceGeom {
        &self.devices[role - 1]
    }

    /// Canonical fingerprint used as a lookup key by recorded-metrics
    /// backends and by stall detection.
    pub fn fingerprint(&self) -> String {
        let mut s = String::new();
        for (i, d) in self.devices.iter().enumerate() {
            s.push_str(&format!("M{}={:.6e}/{:.6e}/{};", i + 1, d.w_um, d.l_um, d.m));
        }
        s.push_str(&format!("C1={:.6e};CL={:.6e}", self.c1_f, self.cl_f));
        s
    }
}

/// Which netlist names play the M1..M7 / C1 / CL roles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NameMap {
    pub transistors: [String; 7],
    pub c1: String,
    pub cl: String,
}

impl Default for NameMap {
    fn default() -> Self {
        NameMap {
            transistors: [
                "M1".into(),
                "M2".into(),
                "M3".into(),
                "M4".into(),
                "M5".into(),
                "M6".into(),
                "M7".into(),
            ],
            c1: "C1".into(),
            cl: "CL".into(),
        }
    }
}

/// Pull the CircuitParams out of a parsed netlist under a name map.
pub fn extract_params(doc: &NetlistDoc, names: &NameMap) -> Result<CircuitParams, NetlistError> {
    const ROLES: [&str; 7] = ["M1", "M2", "M3", "M4", "M5", "M6", "M7"];
    let mut devices = [DeviceGeom {
        w_um: 0.0,
        l_um: 0.0,
        m: 1,
    }; 7];
    for (i, role) in ROLES.iter().enumerate() {
        let name = names.transistors[i].to_ascii_uppercase();
        let entry = doc.devices.get(&name).ok_or(NetlistError::MissingDevice {
            name: name.clone(),
            role,
        })?;
        devices[i] = DeviceGeom {
            w_um: entry.w.value * 1e6,
            l_um: entry.l.value * 1e6,
            m: entry.m,
        };
    }
    let c1 = doc
        .capacitors
        .get(&names.c1.to_ascii_uppercase())
        .ok_or(NetlistError::MissingDevice {
            name: names.c1.clone(),
            role: "C1",
        })?;
    let cl_f = doc
        .capacitors
        .get(&names.cl.to_ascii_uppercase())
        .map(|c| c.value.value)
        .unwrap_or(DEFAULT_CL_F);
    Ok(CircuitParams {
        devices,
        c1_f: c1.value.value,
        cl_f,
    })
}
