//! The `.rtl` text netlist format: a line-oriented, SPICE-adjacent grammar
//! with SI-suffixed units, `#` comments and case-insensitive keywords.
//!
//! One declaration per line:
//!
//! ```text
//! param  r_on=100 r_off=100meg v_tr=3.5 t_switch=10n p=2 polarity=positive_sets_high
//! phase  frame=0.5u write=0.05
//! vpulse V1 node=V1 low=0 high=1 period=1u duty=0.5 delay=0
//! vconst VC node=VC value=0
//! cell   U1 in=V1,V2 vc=VC out=OUT [kind=nand|nor|xor|cell] [control=applied|trained]
//!        [role=logic|control] [r1|r2|rc=high|low] [vth=0.5] [vdd=1]
//! memr   M1 a=TOP b=BOT [x=0]
//! inv    I1 in=A out=Y [vth=0.5] [vdd=1]
//! sw     S1 in=A out=B phase=write|read
//! probe  v(OUT)
//! probe  r(U1.rc)
//! ```
//!
//! Unit suffixes follow SPICE conventions: `t g meg k m u n p f`, with `meg`
//! (1e6) distinct from `m` (1e-3). Element and node names are case-sensitive;
//! keywords, field keys and enumerated values are not. Every cell `c`
//! implicitly creates its divider node `c.vo` and memristors `c.r1`, `c.r2`,
//! `c.rc`. Nodes come into existence by reference; `0` (alias `gnd`) is
//! ground.

use std::fmt;

use thiserror::Error;

use crate::circuit::{
    CellOptions, CellRole, ControlPolicy, GateKind, Netlist, NetlistBuilder, SourceWave,
    SwitchPhase,
};
use crate::device::{MemristorParams, Polarity, ResistanceLevel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagKind {
    Syntax,
    Semantic,
}

/// A positioned parse or lowering error. Lines and columns are 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub line: u32,
    pub col: u32,
    pub kind: DiagKind,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            DiagKind::Syntax => "syntax",
            DiagKind::Semantic => "semantic",
        };
        write!(
            f,
            "{}:{}: {kind} error: {}",
            self.line, self.col, self.message
        )
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub struct Diagnostics(pub Vec<Diagnostic>);

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

/// Reference to a recordable signal: a node voltage or a device memristance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SignalRef {
    Node(String),
    Device(String),
}

impl SignalRef {
    /// Waveform key as produced by the engine.
    pub fn key(&self) -> String {
        match self {
            SignalRef::Node(n) => crate::engine::node_signal(n),
            SignalRef::Device(d) => crate::engine::device_signal(d),
        }
    }
}

impl fmt::Display for SignalRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignalRef::Node(n) => write!(f, "v({n})"),
            SignalRef::Device(d) => write!(f, "r({d})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamDecl {
    pub r_on: Option<f64>,
    pub r_off: Option<f64>,
    pub v_tr: Option<f64>,
    pub t_switch: Option<f64>,
    pub p: Option<u32>,
    pub polarity: Option<Polarity>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDecl {
    pub frame: f64,
    pub write: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellDecl {
    pub name: String,
    pub a: String,
    pub b: String,
    pub vc: String,
    pub out: String,
    pub kind: GateKind,
    pub control: ControlPolicy,
    pub role: CellRole,
    pub r1: ResistanceLevel,
    pub r2: ResistanceLevel,
    pub rc: ResistanceLevel,
    pub v_th: f64,
    pub v_dd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemrDecl {
    pub name: String,
    pub a: String,
    pub b: String,
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvDecl {
    pub name: String,
    pub input: String,
    pub output: String,
    pub v_th: f64,
    pub v_dd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchDecl {
    pub name: String,
    pub input: String,
    pub output: String,
    pub phase: SwitchPhase,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseDecl {
    pub name: String,
    pub node: String,
    pub low: f64,
    pub high: f64,
    pub period: f64,
    pub duty: f64,
    pub delay: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstDecl {
    pub name: String,
    pub node: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decl {
    Param(ParamDecl),
    Phase(PhaseDecl),
    Cell(CellDecl),
    Memr(MemrDecl),
    Inv(InvDecl),
    Switch(SwitchDecl),
    VPulse(PulseDecl),
    VConst(ConstDecl),
    Probe(SignalRef),
}

#[derive(Debug, Clone)]
struct Spanned {
    line: u32,
    value: Decl,
}

/// Parsed netlist document: the declaration list in source order. Equality
/// compares the structured form only, not source positions.
#[derive(Debug, Clone, Default)]
pub struct NetlistDocument {
    decls: Vec<Spanned>,
}

impl PartialEq for NetlistDocument {
    fn eq(&self, other: &Self) -> bool {
        self.decls.len() == other.decls.len()
            && self
                .decls
                .iter()
                .zip(&other.decls)
                .all(|(a, b)| a.value == b.value)
    }
}

impl NetlistDocument {
    pub fn decls(&self) -> impl Iterator<Item = &Decl> {
        self.decls.iter().map(|s| &s.value)
    }

    pub fn probes(&self) -> Vec<SignalRef> {
        self.decls()
            .filter_map(|d| match d {
                Decl::Probe(p) => Some(p.clone()),
                _ => None,
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Values and unit suffixes
// ---------------------------------------------------------------------------

/// Parses a number with an optional SI suffix. `meg` is tried before the
/// single-letter suffixes so that `1meg` is 1e6 while `1m` is 1e-3.
pub fn parse_value(text: &str) -> Result<f64, String> {
    parse_unit_value(text)
}

fn parse_unit_value(text: &str) -> Result<f64, String> {
    let lower = text.to_ascii_lowercase();
    let candidates: [(&str, f64); 10] = [
        ("meg", 1e6),
        ("t", 1e12),
        ("g", 1e9),
        ("k", 1e3),
        ("m", 1e-3),
        ("u", 1e-6),
        ("n", 1e-9),
        ("p", 1e-12),
        ("f", 1e-15),
        ("", 1.0),
    ];
    for (suffix, mult) in candidates {
        if let Some(head) = lower.strip_suffix(suffix) {
            if head.is_empty() {
                continue;
            }
            if let Ok(v) = head.parse::<f64>() {
                let value = v * mult;
                if value.is_finite() && !head.contains("inf") && !head.contains("nan") {
                    return Ok(value);
                }
            }
        }
    }
    Err(format!(
        "expected a number with optional SI suffix, found '{text}'"
    ))
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
struct Tok<'a> {
    text: &'a str,
    col: u32,
}

fn tokenize(line: &str) -> Vec<Tok<'_>> {
    let mut toks = Vec::new();
    let mut start: Option<usize> = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                toks.push(Tok {
                    text: &line[s..i],
                    col: s as u32 + 1,
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        toks.push(Tok {
            text: &line[s..],
            col: s as u32 + 1,
        });
    }
    toks
}

/// key=value fields of one declaration, with duplicate and leftover tracking.
struct Fields<'a> {
    line: u32,
    entries: Vec<(String, Tok<'a>, bool)>,
}

impl<'a> Fields<'a> {
    fn new(line: u32, toks: &[Tok<'a>], diags: &mut Vec<Diagnostic>) -> Self {
        let mut entries: Vec<(String, Tok<'a>, bool)> = Vec::new();
        for tok in toks {
            match tok.text.split_once('=') {
                Some((key, value)) if !key.is_empty() && !value.is_empty() => {
                    let key = key.to_ascii_lowercase();
                    let value_tok = Tok {
                        text: value,
                        col: tok.col + key.len() as u32 + 1,
                    };
                    if entries.iter().any(|(k, _, _)| *k == key) {
                        diags.push(Diagnostic {
                            line,
                            col: tok.col,
                            kind: DiagKind::Syntax,
                            message: format!("duplicate field '{key}'"),
                        });
                    } else {
                        entries.push((key, value_tok, false));
                    }
                }
                _ => diags.push(Diagnostic {
                    line,
                    col: tok.col,
                    kind: DiagKind::Syntax,
                    message: format!("expected key=value, found '{}'", tok.text),
                }),
            }
        }
        Self { line, entries }
    }

    fn take(&mut self, key: &str) -> Option<Tok<'a>> {
        for (k, tok, used) in self.entries.iter_mut() {
            if k == key {
                *used = true;
                return Some(*tok);
            }
        }
        None
    }

    fn req_str(&mut self, key: &str, diags: &mut Vec<Diagnostic>) -> Option<String> {
        match self.take(key) {
            Some(tok) => Some(tok.text.to_string()),
            None => {
                diags.push(Diagnostic {
                    line: self.line,
                    col: 1,
                    kind: DiagKind::Syntax,
                    message: format!("missing required field '{key}'"),
                });
                None
            }
        }
    }

    fn req_num(&mut self, key: &str, diags: &mut Vec<Diagnostic>) -> Option<f64> {
        let tok = self.take(key);
        match tok {
            Some(tok) => match parse_unit_value(tok.text) {
                Ok(v) => Some(v),
                Err(msg) => {
                    diags.push(Diagnostic {
                        line: self.line,
                        col: tok.col,
                        kind: DiagKind::Syntax,
                        message: msg,
                    });
                    None
                }
            },
            None => {
                diags.push(Diagnostic {
                    line: self.line,
                    col: 1,
                    kind: DiagKind::Syntax,
                    message: format!("missing required field '{key}'"),
                });
                None
            }
        }
    }

    fn opt_num(&mut self, key: &str, default: f64, diags: &mut Vec<Diagnostic>) -> f64 {
        match self.take(key) {
            Some(tok) => match parse_unit_value(tok.text) {
                Ok(v) => v,
                Err(msg) => {
                    diags.push(Diagnostic {
                        line: self.line,
                        col: tok.col,
                        kind: DiagKind::Syntax,
                        message: msg,
                    });
                    default
                }
            },
            None => default,
        }
    }

    fn opt_enum<T: Copy>(
        &mut self,
        key: &str,
        default: T,
        table: &[(&str, T)],
        diags: &mut Vec<Diagnostic>,
    ) -> T {
        match self.take(key) {
            Some(tok) => {
                let lower = tok.text.to_ascii_lowercase();
                for (name, value) in table {
                    if *name == lower {
                        return *value;
                    }
                }
                let options: Vec<&str> = table.iter().map(|(n, _)| *n).collect();
                diags.push(Diagnostic {
                    line: self.line,
                    col: tok.col,
                    kind: DiagKind::Syntax,
                    message: format!(
                        "expected one of {} for '{key}', found '{}'",
                        options.join("|"),
                        tok.text
                    ),
                });
                default
            }
            None => default,
        }
    }

    fn finish(self, diags: &mut Vec<Diagnostic>) {
        for (key, tok, used) in self.entries {
            if !used {
                diags.push(Diagnostic {
                    line: self.line,
                    col: tok.col,
                    kind: DiagKind::Syntax,
                    message: format!("unknown field '{key}'"),
                });
            }
        }
    }
}

const LEVELS: [(&str, ResistanceLevel); 2] = [
    ("high", ResistanceLevel::High),
    ("low", ResistanceLevel::Low),
];

fn named_decl<'a>(
    line: u32,
    toks: &[Tok<'a>],
    diags: &mut Vec<Diagnostic>,
) -> Option<(String, Fields<'a>)> {
    let Some(name_tok) = toks.first() else {
        diags.push(Diagnostic {
            line,
            col: 1,
            kind: DiagKind::Syntax,
            message: "expected an element name".into(),
        });
        return None;
    };
    if name_tok.text.contains('=') {
        diags.push(Diagnostic {
            line,
            col: name_tok.col,
            kind: DiagKind::Syntax,
            message: format!("expected an element name, found field '{}'", name_tok.text),
        });
        return None;
    }
    Some((
        name_tok.text.to_string(),
        Fields::new(line, &toks[1..], diags),
    ))
}

/// Parses `.rtl` text into a document, or every positioned error found.
/// Total: any input yields either a document or diagnostics.
pub fn parse(text: &str) -> Result<NetlistDocument, Diagnostics> {
    let mut decls = Vec::new();
    let mut diags = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx as u32 + 1;
        let content = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        let toks = tokenize(content);
        let Some(keyword) = toks.first() else {
            continue;
        };
        let rest = &toks[1..];
        let before = diags.len();
        let decl = match keyword.text.to_ascii_lowercase().as_str() {
            "param" => parse_param(line, rest, &mut diags),
            "phase" => parse_phase(line, rest, &mut diags),
            "cell" => parse_cell(line, rest, &mut diags),
            "memr" => parse_memr(line, rest, &mut diags),
            "inv" => parse_inv(line, rest, &mut diags),
            "sw" => parse_sw(line, rest, &mut diags),
            "vpulse" => parse_vpulse(line, rest, &mut diags),
            "vconst" => parse_vconst(line, rest, &mut diags),
            "probe" => parse_probe(line, rest, &mut diags),
            other => {
                diags.push(Diagnostic {
                    line,
                    col: keyword.col,
                    kind: DiagKind::Syntax,
                    message: format!(
                        "unknown declaration '{other}', expected one of param|phase|cell|memr|inv|sw|vpulse|vconst|probe"
                    ),
                });
                None
            }
        };
        if let Some(value) = decl {
            if diags.len() == before {
                decls.push(Spanned { line, value });
            }
        }
    }

    if decls.is_empty() && diags.is_empty() {
        diags.push(Diagnostic {
            line: 1,
            col: 1,
            kind: DiagKind::Syntax,
            message: "expected at least one declaration".into(),
        });
    }
    if diags.is_empty() {
        Ok(NetlistDocument { decls })
    } else {
        Err(Diagnostics(diags))
    }
}

fn parse_param(line: u32, toks: &[Tok<'_>], diags: &mut Vec<Diagnostic>) -> Option<Decl> {
    let mut f = Fields::new(line, toks, diags);
    let mut d = ParamDecl::default();
    if let Some(tok) = f.take("r_on") {
        d.r_on = num_or_diag(line, tok, diags);
    }
    if let Some(tok) = f.take("r_off") {
        d.r_off = num_or_diag(line, tok, diags);
    }
    if let Some(tok) = f.take("v_tr") {
        d.v_tr = num_or_diag(line, tok, diags);
    }
    if let Some(tok) = f.take("t_switch") {
        d.t_switch = num_or_diag(line, tok, diags);
    }
    if let Some(tok) = f.take("p") {
        d.p = match num_or_diag(line, tok, diags) {
            Some(v) if v.fract() == 0.0 && v >= 1.0 && v <= u32::MAX as f64 => Some(v as u32),
            Some(_) => {
                diags.push(Diagnostic {
                    line,
                    col: tok.col,
                    kind: DiagKind::Syntax,
                    message: format!(
                        "window exponent p must be a positive integer, found '{}'",
                        tok.text
                    ),
                });
                None
            }
            None => None,
        };
    }
    if let Some(tok) = f.take("polarity") {
        d.polarity = match tok.text.to_ascii_lowercase().as_str() {
            "positive_sets_high" => Some(Polarity::PositiveSetsHigh),
            "positive_sets_low" => Some(Polarity::PositiveSetsLow),
            other => {
                diags.push(Diagnostic {
                    line,
                    col: tok.col,
                    kind: DiagKind::Syntax,
                    message: format!(
                        "expected positive_sets_high|positive_sets_low, found '{other}'"
                    ),
                });
                None
            }
        };
    }
    f.finish(diags);
    Some(Decl::Param(d))
}

fn num_or_diag(line: u32, tok: Tok<'_>, diags: &mut Vec<Diagnostic>) -> Option<f64> {
    match parse_unit_value(tok.text) {
        Ok(v) => Some(v),
        Err(msg) => {
            diags.push(Diagnostic {
                line,
                col: tok.col,
                kind: DiagKind::Syntax,
                message: msg,
            });
            None
        }
    }
}

fn parse_phase(line: u32, toks: &[Tok<'_>], diags: &mut Vec<Diagnostic>) -> Option<Decl> {
    let mut f = Fields::new(line, toks, diags);
    let frame = f.req_num("frame", diags)?;
    let write = f.req_num("write", diags)?;
    f.finish(diags);
    Some(Decl::Phase(PhaseDecl { frame, write }))
}

fn parse_cell(line: u32, toks: &[Tok<'_>], diags: &mut Vec<Diagnostic>) -> Option<Decl> {
    let (name, mut f) = named_decl(line, toks, diags)?;
    let in_pair = f.req_str("in", diags)?;
    let (a, b) = match in_pair.split_once(',') {
        Some((a, b)) if !a.is_empty() && !b.is_empty() => (a.to_string(), b.to_string()),
        _ => {
            diags.push(Diagnostic {
                line,
                col: 1,
                kind: DiagKind::Syntax,
                message: format!("expected in=<node>,<node>, found in={in_pair}"),
            });
            return None;
        }
    };
    let vc = f.req_str("vc", diags)?;
    let out = f.req_str("out", diags)?;
    let kind = f.opt_enum(
        "kind",
        GateKind::Cell,
        &[
            ("nand", GateKind::Nand),
            ("nor", GateKind::Nor),
            ("xor", GateKind::Xor),
            ("cell", GateKind::Cell),
        ],
        diags,
    );
    let control = f.opt_enum(
        "control",
        ControlPolicy::Applied,
        &[
            ("applied", ControlPolicy::Applied),
            ("trained", ControlPolicy::Trained),
        ],
        diags,
    );
    let role = f.opt_enum(
        "role",
        CellRole::Logic,
        &[("logic", CellRole::Logic), ("control", CellRole::Control)],
        diags,
    );
    let r1 = f.opt_enum("r1", ResistanceLevel::High, &LEVELS, diags);
    let r2 = f.opt_enum("r2", ResistanceLevel::High, &LEVELS, diags);
    let rc = f.opt_enum("rc", ResistanceLevel::High, &LEVELS, diags);
    let v_th = f.opt_num("vth", 0.5, diags);
    let v_dd = f.opt_num("vdd", 1.0, diags);
    f.finish(diags);
    Some(Decl::Cell(CellDecl {
        name,
        a,
        b,
        vc,
        out,
        kind,
        control,
        role,
        r1,
        r2,
        rc,
        v_th,
        v_dd,
    }))
}

fn parse_memr(line: u32, toks: &[Tok<'_>], diags: &mut Vec<Diagnostic>) -> Option<Decl> {
    let (name, mut f) = named_decl(line, toks, diags)?;
    let a = f.req_str("a", diags)?;
    let b = f.req_str("b", diags)?;
    let x = f.opt_num("x", 0.0, diags);
    f.finish(diags);
    Some(Decl::Memr(MemrDecl { name, a, b, x }))
}

fn parse_inv(line: u32, toks: &[Tok<'_>], diags: &mut Vec<Diagnostic>) -> Option<Decl> {
    let (name, mut f) = named_decl(line, toks, diags)?;
    let input = f.req_str("in", diags)?;
    let output = f.req_str("out", diags)?;
    let v_th = f.opt_num("vth", 0.5, diags);
    let v_dd = f.opt_num("vdd", 1.0, diags);
    f.finish(diags);
    Some(Decl::Inv(InvDecl {
        name,
        input,
        output,
        v_th,
        v_dd,
    }))
}

fn parse_sw(line: u32, toks: &[Tok<'_>], diags: &mut Vec<Diagnostic>) -> Option<Decl> {
    let (name, mut f) = named_decl(line, toks, diags)?;
    let input = f.req_str("in", diags)?;
    let output = f.req_str("out", diags)?;
    let phase = f.opt_enum(
        "phase",
        SwitchPhase::Read,
        &[("write", SwitchPhase::Write), ("read", SwitchPhase::Read)],
        diags,
    );
    f.finish(diags);
    Some(Decl::Switch(SwitchDecl {
        name,
        input,
        output,
        phase,
    }))
}

fn parse_vpulse(line: u32, toks: &[Tok<'_>], diags: &mut Vec<Diagnostic>) -> Option<Decl> {
    let (name, mut f) = named_decl(line, toks, diags)?;
    let node = f.req_str("node", diags)?;
    let low = f.req_num("low", diags)?;
    let high = f.req_num("high", diags)?;
    let period = f.req_num("period", diags)?;
    let duty = f.req_num("duty", diags)?;
    let delay = f.opt_num("delay", 0.0, diags);
    f.finish(diags);
    Some(Decl::VPulse(PulseDecl {
        name,
        node,
        low,
        high,
        period,
        duty,
        delay,
    }))
}

fn parse_vconst(line: u32, toks: &[Tok<'_>], diags: &mut Vec<Diagnostic>) -> Option<Decl> {
    let (name, mut f) = named_decl(line, toks, diags)?;
    let node = f.req_str("node", diags)?;
    let value = f.req_num("value", diags)?;
    f.finish(diags);
    Some(Decl::VConst(ConstDecl { name, node, value }))
}

fn parse_probe(line: u32, toks: &[Tok<'_>], diags: &mut Vec<Diagnostic>) -> Option<Decl> {
    let Some(tok) = toks.first() else {
        diags.push(Diagnostic {
            line,
            col: 1,
            kind: DiagKind::Syntax,
            message: "expected a signal reference v(<node>) or r(<device>)".into(),
        });
        return None;
    };
    if toks.len() > 1 {
        diags.push(Diagnostic {
            line,
            col: toks[1].col,
            kind: DiagKind::Syntax,
            message: "one probe per line".into(),
        });
        return None;
    }
    let text = tok.text;
    let lower = text.to_ascii_lowercase();
    let (kind, rest) = if let Some(r) = lower.strip_prefix("v(") {
        ('v', r)
    } else if let Some(r) = lower.strip_prefix("r(") {
        ('r', r)
    } else {
        diags.push(Diagnostic {
            line,
            col: tok.col,
            kind: DiagKind::Syntax,
            message: format!("expected v(<node>) or r(<device>), found '{text}'"),
        });
        return None;
    };
    if !rest.ends_with(')') || rest.len() < 2 {
        diags.push(Diagnostic {
            line,
            col: tok.col,
            kind: DiagKind::Syntax,
            message: format!("expected a closing ')' in '{text}'"),
        });
        return None;
    }
    // Recover the original case of the referenced name.
    let inner = &text[2..text.len() - 1];
    Some(Decl::Probe(if kind == 'v' {
        SignalRef::Node(inner.to_string())
    } else {
        SignalRef::Device(inner.to_string())
    }))
}

// ---------------------------------------------------------------------------
// Lowering
// ---------------------------------------------------------------------------

fn semantic(line: u32, message: String) -> Diagnostic {
    Diagnostic {
        line,
        col: 1,
        kind: DiagKind::Semantic,
        message,
    }
}

impl NetlistDocument {
    /// Lowers the document to a validated netlist, or the semantic errors
    /// preventing one.
    pub fn to_netlist(&self) -> Result<Netlist, Diagnostics> {
        let mut diags = Vec::new();

        // Device parameter block: at most one, defaults for absent fields.
        let defaults = MemristorParams::default();
        let mut params = defaults;
        let mut param_line = None;
        let mut phase_decl: Option<(u32, &PhaseDecl)> = None;
        for d in &self.decls {
            match &d.value {
                Decl::Param(p) => {
                    if param_line.is_some() {
                        diags.push(semantic(d.line, "duplicate param block".into()));
                        continue;
                    }
                    param_line = Some(d.line);
                    match MemristorParams::new(
                        p.r_on.unwrap_or(defaults.r_on()),
                        p.r_off.unwrap_or(defaults.r_off()),
                        p.v_tr.unwrap_or(defaults.v_tr()),
                        p.t_switch.unwrap_or(defaults.t_switch()),
                        p.p.unwrap_or(defaults.p()),
                        p.polarity.unwrap_or(defaults.polarity()),
                    ) {
                        Ok(v) => params = v,
                        Err(e) => diags.push(semantic(d.line, e.to_string())),
                    }
                }
                Decl::Phase(p) => {
                    if phase_decl.is_some() {
                        diags.push(semantic(d.line, "duplicate phase declaration".into()));
                    } else {
                        phase_decl = Some((d.line, p));
                    }
                }
                _ => {}
            }
        }

        let mut b = NetlistBuilder::with_params(params);
        if let Some((line, p)) = phase_decl {
            if !(p.frame > 0.0) {
                diags.push(semantic(
                    line,
                    format!("frame period {} must be positive", p.frame),
                ));
            }
            if !(0.0..1.0).contains(&p.write) {
                diags.push(semantic(
                    line,
                    format!("write fraction {} outside [0, 1)", p.write),
                ));
            }
            b.set_phase(p.frame, p.write);
        }

        let mut names: Vec<(String, u32)> = Vec::new();
        let mut claim = |name: &str, line: u32, diags: &mut Vec<Diagnostic>| {
            if names.iter().any(|(n, _)| n == name) {
                diags.push(semantic(line, format!("duplicate element name '{name}'")));
            } else {
                names.push((name.to_string(), line));
            }
        };

        let node = |b: &mut NetlistBuilder, name: &str| {
            let canon = if name.eq_ignore_ascii_case("gnd") {
                "0"
            } else {
                name
            };
            b.node(canon)
        };

        for d in &self.decls {
            match &d.value {
                Decl::Param(_) | Decl::Phase(_) | Decl::Probe(_) => {}
                Decl::Cell(c) => {
                    claim(&c.name, d.line, &mut diags);
                    claim(&format!("{}.r1", c.name), d.line, &mut diags);
                    claim(&format!("{}.r2", c.name), d.line, &mut diags);
                    claim(&format!("{}.rc", c.name), d.line, &mut diags);
                    if !(c.v_th > 0.0 && c.v_th < c.v_dd) {
                        diags.push(semantic(
                            d.line,
                            format!(
                                "cell '{}' requires 0 < vth < vdd (vth = {}, vdd = {})",
                                c.name, c.v_th, c.v_dd
                            ),
                        ));
                    }
                    let a = node(&mut b, &c.a);
                    let bb = node(&mut b, &c.b);
                    let vc = node(&mut b, &c.vc);
                    let out = node(&mut b, &c.out);
                    b.cell(
                        &c.name,
                        [a, bb],
                        vc,
                        out,
                        CellOptions {
                            kind: c.kind,
                            role: c.role,
                            policy: c.control,
                            r1: c.r1,
                            r2: c.r2,
                            rc: c.rc,
                            v_th: c.v_th,
                            v_dd: c.v_dd,
                        },
                    );
                }
                Decl::Memr(m) => {
                    claim(&m.name, d.line, &mut diags);
                    if !(0.0..=1.0).contains(&m.x) {
                        diags.push(semantic(
                            d.line,
                            format!(
                                "memristor '{}' initial state {} outside [0, 1]",
                                m.name, m.x
                            ),
                        ));
                    }
                    let a = node(&mut b, &m.a);
                    let bb = node(&mut b, &m.b);
                    b.memristor(&m.name, a, bb, m.x.clamp(0.0, 1.0));
                }
                Decl::Inv(i) => {
                    claim(&i.name, d.line, &mut diags);
                    if !(i.v_th > 0.0 && i.v_th < i.v_dd) {
                        diags.push(semantic(
                            d.line,
                            format!("inverter '{}' requires 0 < vth < vdd", i.name),
                        ));
                    }
                    let input = node(&mut b, &i.input);
                    let output = node(&mut b, &i.output);
                    b.inverter(&i.name, input, output, i.v_th, i.v_dd);
                }
                Decl::Switch(s) => {
                    claim(&s.name, d.line, &mut diags);
                    let input = node(&mut b, &s.input);
                    let output = node(&mut b, &s.output);
                    b.switch(&s.name, input, output, s.phase);
                }
                Decl::VPulse(p) => {
                    claim(&p.name, d.line, &mut diags);
                    if !(p.period > 0.0) {
                        diags.push(semantic(
                            d.line,
                            format!("source '{}' period {} must be positive", p.name, p.period),
                        ));
                    }
                    if !(p.duty > 0.0 && p.duty <= 1.0) {
                        diags.push(semantic(
                            d.line,
                            format!("source '{}' duty {} outside (0, 1]", p.name, p.duty),
                        ));
                    }
                    b.pulse_source(&p.name, &p.node, p.low, p.high, p.period, p.duty, p.delay);
                }
                Decl::VConst(c) => {
                    claim(&c.name, d.line, &mut diags);
                    b.const_source(&c.name, &c.node, c.value);
                }
            }
        }

        let netlist = b.finish();

        for d in &self.decls {
            if let Decl::Probe(p) = &d.value {
                let known = match p {
                    SignalRef::Node(n) => netlist.node_id(n).is_some(),
                    SignalRef::Device(n) => netlist.device_id(n).is_some(),
                };
                if !known {
                    diags.push(semantic(
                        d.line,
                        format!("probe references unknown signal {p}"),
                    ));
                }
            }
        }

        if diags.is_empty() {
            for issue in netlist.validate() {
                let line = match &issue {
                    crate::circuit::ValidationIssue::DuplicateName(n) => {
                        names.iter().find(|(m, _)| m == n).map(|(_, l)| *l)
                    }
                    _ => None,
                };
                diags.push(semantic(line.unwrap_or(1), issue.to_string()));
            }
        }

        if diags.is_empty() {
            Ok(netlist)
        } else {
            Err(Diagnostics(diags))
        }
    }

    /// Canonical document for a netlist, with the given probes appended.
    /// Default device parameters and default phase schedules are elided.
    pub fn from_netlist(netlist: &Netlist, probes: &[SignalRef]) -> NetlistDocument {
        let mut decls = Vec::new();
        let mut push = |value: Decl| {
            decls.push(Spanned { line: 0, value });
        };

        let params = netlist.params();
        let defaults = MemristorParams::default();
        if *params != defaults {
            push(Decl::Param(ParamDecl {
                r_on: (params.r_on() != defaults.r_on()).then(|| params.r_on()),
                r_off: (params.r_off() != defaults.r_off()).then(|| params.r_off()),
                v_tr: (params.v_tr() != defaults.v_tr()).then(|| params.v_tr()),
                t_switch: (params.t_switch() != defaults.t_switch()).then(|| params.t_switch()),
                p: (params.p() != defaults.p()).then(|| params.p()),
                polarity: (params.polarity() != defaults.polarity()).then(|| params.polarity()),
            }));
        }
        let phase = netlist.phase();
        let default_phase = crate::circuit::PhaseSchedule::default();
        if phase != default_phase {
            push(Decl::Phase(PhaseDecl {
                frame: phase.frame_period,
                write: phase.write_fraction,
            }));
        }
        for src in netlist.sources() {
            let node = netlist.node_name(src.node).to_string();
            match src.wave {
                SourceWave::Const(value) => push(Decl::VConst(ConstDecl {
                    name: src.name.clone(),
                    node,
                    value,
                })),
                SourceWave::Pulse {
                    low,
                    high,
                    period,
                    duty,
                    delay,
                } => push(Decl::VPulse(PulseDecl {
                    name: src.name.clone(),
                    node,
                    low,
                    high,
                    period,
                    duty,
                    delay,
                })),
            }
        }
        for m in netlist.memristor_elements() {
            let dev = &netlist.devices()[m.device.index()];
            push(Decl::Memr(MemrDecl {
                name: dev.name.clone(),
                a: netlist.node_name(m.a).to_string(),
                b: netlist.node_name(m.b).to_string(),
                x: dev.initial_x,
            }));
        }
        let level_of = |x: f64| {
            if x == params.x_high() {
                ResistanceLevel::High
            } else {
                ResistanceLevel::Low
            }
        };
        for cell in netlist.cells() {
            push(Decl::Cell(CellDecl {
                name: cell.name.clone(),
                a: netlist.node_name(cell.inputs[0]).to_string(),
                b: netlist.node_name(cell.inputs[1]).to_string(),
                vc: netlist.node_name(cell.control).to_string(),
                out: netlist.node_name(cell.output).to_string(),
                kind: cell.kind,
                control: cell.policy,
                role: cell.role,
                r1: level_of(netlist.devices()[cell.input_devices[0].index()].initial_x),
                r2: level_of(netlist.devices()[cell.input_devices[1].index()].initial_x),
                rc: level_of(netlist.devices()[cell.control_device.index()].initial_x),
                v_th: cell.v_th,
                v_dd: cell.v_dd,
            }));
        }
        for inv in netlist.inverters() {
            push(Decl::Inv(InvDecl {
                name: inv.name.clone(),
                input: netlist.node_name(inv.input).to_string(),
                output: netlist.node_name(inv.output).to_string(),
                v_th: inv.v_th,
                v_dd: inv.v_dd,
            }));
        }
        for sw in netlist.switches() {
            push(Decl::Switch(SwitchDecl {
                name: sw.name.clone(),
                input: netlist.node_name(sw.input).to_string(),
                output: netlist.node_name(sw.output).to_string(),
                phase: sw.phase,
            }));
        }
        for p in probes {
            push(Decl::Probe(p.clone()));
        }
        NetlistDocument { decls }
    }
}

// ---------------------------------------------------------------------------
// Serializer
// ---------------------------------------------------------------------------

/// Canonical text form. Numbers are written in plain decimal (shortest form
/// that re-parses to the identical value); defaulted fields are elided.
pub fn serialize(doc: &NetlistDocument) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    for decl in doc.decls() {
        match decl {
            Decl::Param(p) => {
                let mut line = String::from("param");
                if let Some(v) = p.r_on {
                    write!(line, " r_on={v}").unwrap();
                }
                if let Some(v) = p.r_off {
                    write!(line, " r_off={v}").unwrap();
                }
                if let Some(v) = p.v_tr {
                    write!(line, " v_tr={v}").unwrap();
                }
                if let Some(v) = p.t_switch {
                    write!(line, " t_switch={v}").unwrap();
                }
                if let Some(v) = p.p {
                    write!(line, " p={v}").unwrap();
                }
                if let Some(v) = p.polarity {
                    let name = match v {
                        Polarity::PositiveSetsHigh => "positive_sets_high",
                        Polarity::PositiveSetsLow => "positive_sets_low",
                    };
                    write!(line, " polarity={name}").unwrap();
                }
                out.push_str(&line);
                out.push('\n');
            }
            Decl::Phase(p) => {
                writeln!(out, "phase frame={} write={}", p.frame, p.write).unwrap();
            }
            Decl::Cell(c) => {
                let mut line = format!(
                    "cell {} in={},{} vc={} out={}",
                    c.name, c.a, c.b, c.vc, c.out
                );
                if c.kind != GateKind::Cell {
                    write!(line, " kind={}", c.kind).unwrap();
                }
                if c.control != ControlPolicy::Applied {
                    line.push_str(" control=trained");
                }
                if c.role != CellRole::Logic {
                    line.push_str(" role=control");
                }
                for (key, level) in [("r1", c.r1), ("r2", c.r2), ("rc", c.rc)] {
                    if level != ResistanceLevel::High {
                        write!(line, " {key}=low").unwrap();
                    }
                }
                if c.v_th != 0.5 {
                    write!(line, " vth={}", c.v_th).unwrap();
                }
                if c.v_dd != 1.0 {
                    write!(line, " vdd={}", c.v_dd).unwrap();
                }
                out.push_str(&line);
                out.push('\n');
            }
            Decl::Memr(m) => {
                let mut line = format!("memr {} a={} b={}", m.name, m.a, m.b);
                if m.x != 0.0 {
                    write!(line, " x={}", m.x).unwrap();
                }
                out.push_str(&line);
                out.push('\n');
            }
            Decl::Inv(i) => {
                let mut line = format!("inv {} in={} out={}", i.name, i.input, i.output);
                if i.v_th != 0.5 {
                    write!(line, " vth={}", i.v_th).unwrap();
                }
                if i.v_dd != 1.0 {
                    write!(line, " vdd={}", i.v_dd).unwrap();
                }
                out.push_str(&line);
                out.push('\n');
            }
            Decl::Switch(s) => {
                let phase = match s.phase {
                    SwitchPhase::Write => "write",
                    SwitchPhase::Read => "read",
                };
                writeln!(
                    out,
                    "sw {} in={} out={} phase={phase}",
                    s.name, s.input, s.output
                )
                .unwrap();
            }
            Decl::VPulse(p) => {
                let mut line = format!(
                    "vpulse {} node={} low={} high={} period={} duty={}",
                    p.name, p.node, p.low, p.high, p.period, p.duty
                );
                if p.delay != 0.0 {
                    write!(line, " delay={}", p.delay).unwrap();
                }
                out.push_str(&line);
                out.push('\n');
            }
            Decl::VConst(c) => {
                writeln!(out, "vconst {} node={} value={}", c.name, c.node, c.value).unwrap();
            }
            Decl::Probe(p) => {
                writeln!(out, "probe {p}").unwrap();
            }
        }
    }
    out
}
