//! Text format for models: parser (with line/column diagnostics) and a
//! canonical serializer.
//!
//! ```text
//! pppta geometric
//! clocks c1, c2;
//! clock_params T in [0, 4];
//! location init init;
//! location goal;
//! edge init -- alpha [c1 <= T && c2 == 1] -> {
//!   1/2 : goto goal;
//!   1/2 : reset { c2 } goto init
//! };
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::constraints::{Atom, BoundTerm, ClockConstraint, Relation};
use crate::model::{Outcome, Pppta, Subject, Transition};
use crate::ratfun::{parse_rational, rational_to_string, RatFunError, Rational, RationalFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{span}: {message}")]
pub struct DslError {
    pub span: Span,
    pub message: String,
}

impl DslError {
    fn new(span: Span, message: impl Into<String>) -> Self {
        DslError {
            span,
            message: message.into(),
        }
    }
}

/// A document plus a label for where it came from.
#[derive(Debug, Clone)]
pub struct ModelSource {
    pub text: String,
    pub origin: String,
}

/// Where each declaration was written, for attaching spans to validation results.
#[derive(Debug, Clone, Default)]
pub struct SourceMap {
    pub params: BTreeMap<String, Span>,
    pub locations: BTreeMap<String, Span>,
    pub edges: BTreeMap<(String, String), Span>,
}

impl SourceMap {
    pub fn span_of(&self, subject: &Subject) -> Span {
        let found = match subject {
            Subject::Model => None,
            Subject::Param(p) => self.params.get(p),
            Subject::Location(l) => self.locations.get(l),
            Subject::Edge(l, a) => self.edges.get(&(l.clone(), a.clone())),
        };
        found.copied().unwrap_or(Span { line: 1, col: 1 })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Sym(&'static str),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) | Tok::Number(s) => write!(f, "`{s}`"),
            Tok::Sym(s) => write!(f, "`{s}`"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    span: Span,
    start: usize,
    end: usize,
}

const SYMBOLS: [&str; 21] = [
    "--", "->", "&&", "<=", ">=", "==", "<", ">", ";", ",", "[", "]", "{", "}", "(", ")", ":", "+", "-", "*",
    "/",
];

fn lex(src: &str) -> Result<(Vec<Token>, Span), DslError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let (mut i, mut line, mut line_start) = (0usize, 1usize, 0usize);
    let span_at = |i: usize, line: usize, line_start: usize| Span {
        line,
        col: src[line_start..i].chars().count() + 1,
    };
    while i < bytes.len() {
        let c = bytes[i];
        if c == b'\n' {
            i += 1;
            line += 1;
            line_start = i;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if bytes[i..].starts_with(b"//") {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let span = span_at(i, line, line_start);
        let start = i;
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(src[start..i].to_string()),
                span,
                start,
                end: i,
            });
            continue;
        }
        if c.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            out.push(Token {
                tok: Tok::Number(src[start..i].to_string()),
                span,
                start,
                end: i,
            });
            continue;
        }
        match SYMBOLS.iter().find(|s| bytes[i..].starts_with(s.as_bytes())) {
            Some(s) => {
                i += s.len();
                out.push(Token {
                    tok: Tok::Sym(s),
                    span,
                    start,
                    end: i,
                });
            }
            None => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(DslError::new(span, format!("unexpected character `{ch}`")));
            }
        }
    }
    Ok((out, span_at(i, line, line_start)))
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Token>,
    pos: usize,
    eof: Span,
}

/// An atom as written, resolved once all declarations are known.
struct RawAtom {
    clock: (String, Span),
    rel: Relation,
    bound: Result<u64, (String, Span)>,
}

struct RawEdge {
    source: (String, Span),
    action: String,
    guard: Vec<RawAtom>,
    branches: Vec<RawBranch>,
}

struct RawBranch {
    weight: RationalFunction,
    weight_span: Span,
    resets: Vec<(String, Span)>,
    target: (String, Span),
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn span(&self) -> Span {
        self.toks.get(self.pos).map_or(self.eof, |t| t.span)
    }

    fn describe(&self) -> String {
        self.peek().map_or("end of input".to_string(), |t| t.to_string())
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, DslError> {
        Err(DslError::new(self.span(), msg))
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(x)) if *x == s)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(x)) if x == k)
    }

    fn sym(&mut self, s: &str) -> Result<(), DslError> {
        if self.is_sym(s) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected `{s}`, found {}", self.describe()))
        }
    }

    fn kw(&mut self, k: &str) -> Result<(), DslError> {
        if self.is_kw(k) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected `{k}`, found {}", self.describe()))
        }
    }

    fn ident(&mut self) -> Result<(String, Span), DslError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let r = (s.clone(), self.span());
                self.pos += 1;
                Ok(r)
            }
            _ => self.err(format!("expected an identifier, found {}", self.describe())),
        }
    }

    fn number(&mut self) -> Result<(String, Span), DslError> {
        match self.peek() {
            Some(Tok::Number(s)) => {
                let r = (s.clone(), self.span());
                self.pos += 1;
                Ok(r)
            }
            _ => self.err(format!("expected a number, found {}", self.describe())),
        }
    }

    fn nat(&mut self) -> Result<u64, DslError> {
        let (s, span) = self.number()?;
        s.parse::<u64>()
            .map_err(|_| DslError::new(span, format!("`{s}` is not a natural number")))
    }

    fn rat(&mut self) -> Result<Rational, DslError> {
        let (s, span) = self.number()?;
        let mut text = s;
        if self.is_sym("/") {
            self.pos += 1;
            let (d, _) = self.number()?;
            text = format!("{text}/{d}");
        }
        parse_rational(&text).map_err(|_| DslError::new(span, format!("`{text}` is not a rational")))
    }

    fn ident_list(&mut self) -> Result<Vec<(String, Span)>, DslError> {
        let mut v = vec![self.ident()?];
        while self.is_sym(",") {
            self.pos += 1;
            v.push(self.ident()?);
        }
        Ok(v)
    }

    fn relation(&mut self) -> Result<Relation, DslError> {
        let r = match self.peek() {
            Some(Tok::Sym("<=")) => Relation::Le,
            Some(Tok::Sym("<")) => Relation::Lt,
            Some(Tok::Sym("==")) => Relation::Eq,
            Some(Tok::Sym(">=")) => Relation::Ge,
            Some(Tok::Sym(">")) => Relation::Gt,
            Some(Tok::Sym("-")) => {
                return self.err("diagonal constraint: clock differences are not supported");
            }
            _ => return self.err(format!("expected a relation, found {}", self.describe())),
        };
        self.pos += 1;
        Ok(r)
    }

    fn constraint(&mut self) -> Result<Vec<RawAtom>, DslError> {
        let mut atoms = vec![self.atom()?];
        while self.is_sym("&&") {
            self.pos += 1;
            atoms.push(self.atom()?);
        }
        Ok(atoms)
    }

    fn atom(&mut self) -> Result<RawAtom, DslError> {
        let clock = self.ident()?;
        let rel = self.relation()?;
        let bound = match self.peek() {
            Some(Tok::Number(_)) => Ok(self.nat()?),
            Some(Tok::Ident(_)) => Err(self.ident()?),
            _ => return self.err(format!("expected a constant or parameter, found {}", self.describe())),
        };
        if self.is_sym("-") || self.is_sym("+") {
            return self.err("diagonal constraint: only `clock REL bound` atoms are supported");
        }
        Ok(RawAtom { clock, rel, bound })
    }

    /// A weight expression runs up to the `:` at parenthesis depth zero.
    fn ratexpr(&mut self) -> Result<(RationalFunction, Span), DslError> {
        let first = self.pos;
        let span = self.span();
        let mut depth = 0usize;
        while let Some(t) = self.peek() {
            match t {
                Tok::Sym(":") if depth == 0 => break,
                Tok::Sym("(") => depth += 1,
                Tok::Sym(")") => depth = depth.saturating_sub(1),
                Tok::Sym("+" | "-" | "*" | "/") | Tok::Number(_) | Tok::Ident(_) => {}
                _ => return self.err(format!("unexpected {} in probability expression", self.describe())),
            }
            self.pos += 1;
        }
        if self.pos == first {
            return self.err("expected a probability expression");
        }
        let (start, end) = (self.toks[first].start, self.toks[self.pos - 1].end);
        let text = &self.src[start..end];
        let f: RationalFunction = text.parse().map_err(|e: RatFunError| match e {
            RatFunError::Parse { offset, message } => {
                let at = self
                    .toks
                    .iter()
                    .rev()
                    .find(|t| t.start <= start + offset)
                    .map_or(span, |t| t.span);
                DslError::new(at, message)
            }
            other => DslError::new(span, other.to_string()),
        })?;
        Ok((f, span))
    }

    fn branch(&mut self) -> Result<RawBranch, DslError> {
        let (weight, weight_span) = self.ratexpr()?;
        self.sym(":")?;
        let mut resets = Vec::new();
        if self.is_kw("reset") {
            self.pos += 1;
            self.sym("{")?;
            if !self.is_sym("}") {
                resets = self.ident_list()?;
            }
            self.sym("}")?;
        }
        self.kw("goto")?;
        let target = self.ident()?;
        Ok(RawBranch {
            weight,
            weight_span,
            resets,
            target,
        })
    }

    fn edge(&mut self) -> Result<RawEdge, DslError> {
        let source = self.ident()?;
        self.sym("--")?;
        let (action, _) = self.ident()?;
        self.sym("[")?;
        let guard = if self.is_sym("]") { Vec::new() } else { self.constraint()? };
        self.sym("]")?;
        self.sym("->")?;
        self.sym("{")?;
        let mut branches = vec![self.branch()?];
        while self.is_sym(";") {
            self.pos += 1;
            if self.is_sym("}") {
                break;
            }
            branches.push(self.branch()?);
        }
        self.sym("}")?;
        self.sym(";")?;
        Ok(RawEdge {
            source,
            action,
            guard,
            branches,
        })
    }
}

/// Parses a model without running semantic validation.
pub fn parse(src: &str) -> Result<Pppta, DslError> {
    parse_with_map(src).map(|(m, _)| m)
}

/// Parses raw bytes; invalid UTF-8 is an error, never a panic.
pub fn parse_bytes(bytes: &[u8]) -> Result<Pppta, DslError> {
    let src = std::str::from_utf8(bytes).map_err(|e| {
        let prefix = &bytes[..e.valid_up_to()];
        let line = prefix.iter().filter(|b| **b == b'\n').count() + 1;
        let col = prefix.iter().rev().take_while(|b| **b != b'\n').count() + 1;
        DslError::new(Span { line, col }, "invalid UTF-8")
    })?;
    parse(src)
}

/// Parses and validates; every diagnostic carries a span.
pub fn load(source: &ModelSource) -> Result<Pppta, Vec<DslError>> {
    let (m, map) = parse_with_map(&source.text).map_err(|e| vec![e])?;
    let diags = m.validate();
    if diags.is_empty() {
        return Ok(m);
    }
    Err(diags
        .into_iter()
        .map(|d| DslError::new(map.span_of(&d.subject), d.to_string()))
        .collect())
}

pub fn parse_with_map(src: &str) -> Result<(Pppta, SourceMap), DslError> {
    let (toks, eof) = lex(src)?;
    let mut p = Parser { src, toks, pos: 0, eof };
    let mut map = SourceMap::default();
    let mut m = Pppta::default();

    p.kw("pppta")?;
    m.name = p.ident()?.0;

    let mut declared: BTreeSet<String> = BTreeSet::new();
    let mut clocks: BTreeMap<String, Span> = BTreeMap::new();
    let mut invariants: Vec<(String, Vec<RawAtom>)> = Vec::new();
    let mut edges: Vec<RawEdge> = Vec::new();
    let mut initial: Option<(String, Span)> = None;

    while p.peek().is_some() {
        let span = p.span();
        let (kw, _) = p.ident()?;
        match kw.as_str() {
            "clocks" => {
                for (c, s) in p.ident_list()? {
                    if !declared.insert(c.clone()) {
                        return Err(DslError::new(s, format!("duplicate declaration of `{c}`")));
                    }
                    clocks.insert(c, s);
                }
                p.sym(";")?;
            }
            "clock_params" | "prob_params" => {
                loop {
                    let (name, s) = p.ident()?;
                    if !declared.insert(name.clone()) {
                        return Err(DslError::new(s, format!("duplicate parameter `{name}`")));
                    }
                    p.kw("in")?;
                    p.sym("[")?;
                    if kw == "clock_params" {
                        let lo = p.nat()?;
                        p.sym(",")?;
                        let hi = p.nat()?;
                        m.clock_params.insert(name.clone(), (lo, hi));
                    } else {
                        let lo = p.rat()?;
                        p.sym(",")?;
                        let hi = p.rat()?;
                        m.prob_params.insert(name.clone(), (lo, hi));
                    }
                    p.sym("]")?;
                    map.params.insert(name, s);
                    if !p.is_sym(",") {
                        break;
                    }
                    p.pos += 1;
                }
                p.sym(";")?;
            }
            "location" => {
                let (name, s) = p.ident()?;
                if map.locations.contains_key(&name) {
                    return Err(DslError::new(s, format!("duplicate location `{name}`")));
                }
                if p.is_kw("init") {
                    p.pos += 1;
                    if let Some((prev, _)) = &initial {
                        return Err(DslError::new(s, format!("second initial location (`{prev}` is already initial)")));
                    }
                    initial = Some((name.clone(), s));
                }
                let inv = if p.is_kw("invariant") {
                    p.pos += 1;
                    p.constraint()?
                } else {
                    Vec::new()
                };
                p.sym(";")?;
                map.locations.insert(name.clone(), s);
                invariants.push((name, inv));
            }
            "edge" => {
                let e = p.edge()?;
                let key = (e.source.0.clone(), e.action.clone());
                if map.edges.contains_key(&key) {
                    return Err(DslError::new(span, format!("duplicate edge {} -- {}", key.0, key.1)));
                }
                map.edges.insert(key, span);
                edges.push(e);
            }
            other => {
                return Err(DslError::new(
                    span,
                    format!("expected `clocks`, `clock_params`, `prob_params`, `location` or `edge`, found `{other}`"),
                ))
            }
        }
    }

    let Some((init, _)) = initial else {
        return Err(DslError::new(eof, "no initial location (mark one location with `init`)"));
    };
    m.initial = init;
    m.clocks = clocks.keys().cloned().collect();

    let resolve = |atoms: Vec<RawAtom>| -> Result<ClockConstraint, DslError> {
        let mut out = Vec::with_capacity(atoms.len());
        for a in atoms {
            let (c, cs) = a.clock;
            if m.clock_params.contains_key(&c) || m.prob_params.contains_key(&c) {
                return Err(DslError::new(cs, format!("`{c}` is a parameter, not a clock")));
            }
            if !m.clocks.contains(&c) {
                return Err(DslError::new(cs, format!("undeclared clock `{c}`")));
            }
            let bound = match a.bound {
                Ok(k) => BoundTerm::Const(k),
                Err((b, bs)) => {
                    if m.clocks.contains(&b) {
                        return Err(DslError::new(bs, format!("diagonal constraint: `{c}` compared with clock `{b}`")));
                    }
                    if !m.clock_params.contains_key(&b) {
                        return Err(DslError::new(bs, format!("undeclared clock parameter `{b}`")));
                    }
                    BoundTerm::Param(b)
                }
            };
            out.push(Atom::new(&c, a.rel, bound));
        }
        Ok(ClockConstraint::new(out))
    };

    for (l, inv) in invariants {
        let phi = resolve(inv)?;
        m.locations.insert(l, phi);
    }
    for e in edges {
        let (src, ss) = e.source;
        if !m.locations.contains_key(&src) {
            return Err(DslError::new(ss, format!("undeclared location `{src}`")));
        }
        let guard = resolve(e.guard)?;
        let mut branches = BTreeMap::new();
        for b in e.branches {
            for v in b.weight.variables() {
                if !m.prob_params.contains_key(&v) {
                    return Err(DslError::new(b.weight_span, format!("undeclared probability parameter `{v}`")));
                }
            }
            let mut resets = BTreeSet::new();
            for (c, cs) in b.resets {
                if !m.clocks.contains(&c) {
                    return Err(DslError::new(cs, format!("undeclared clock `{c}`")));
                }
                resets.insert(c);
            }
            let (t, ts) = b.target;
            if !m.locations.contains_key(&t) {
                return Err(DslError::new(ts, format!("undeclared location `{t}`")));
            }
            let o = Outcome { resets, target: t };
            if branches.contains_key(&o) {
                return Err(DslError::new(b.weight_span, format!("duplicate branch {o}")));
            }
            branches.insert(o, b.weight);
        }
        m.transitions.insert((src, e.action), Transition { guard, branches });
    }
    Ok((m, map))
}

/// Canonical text: declarations sorted, one branch per line.
pub fn serialize(m: &Pppta) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "pppta {}", m.name);
    if !m.clocks.is_empty() {
        let cl: Vec<&str> = m.clocks.iter().map(String::as_str).collect();
        let _ = writeln!(out, "clocks {};", cl.join(", "));
    }
    if !m.clock_params.is_empty() {
        let ps: Vec<String> = m
            .clock_params
            .iter()
            .map(|(p, (lo, hi))| format!("{p} in [{lo}, {hi}]"))
            .collect();
        let _ = writeln!(out, "clock_params {};", ps.join(", "));
    }
    if !m.prob_params.is_empty() {
        let ps: Vec<String> = m
            .prob_params
            .iter()
            .map(|(p, (lo, hi))| format!("{p} in [{}, {}]", rational_to_string(lo), rational_to_string(hi)))
            .collect();
        let _ = writeln!(out, "prob_params {};", ps.join(", "));
    }
    for (l, inv) in &m.locations {
        let _ = write!(out, "location {l}");
        if *l == m.initial {
            out.push_str(" init");
        }
        if !inv.is_top() {
            let _ = write!(out, " invariant {inv}");
        }
        out.push_str(";\n");
    }
    for ((l, a), t) in &m.transitions {
        let guard = if t.guard.is_top() { String::new() } else { t.guard.to_string() };
        let _ = writeln!(out, "edge {l} -- {a} [{guard}] -> {{");
        let n = t.branches.len();
        for (i, (o, w)) in t.branches.iter().enumerate() {
            let _ = write!(out, "  {w} : ");
            if !o.resets.is_empty() {
                let r: Vec<&str> = o.resets.iter().map(String::as_str).collect();
                let _ = write!(out, "reset {{ {} }} ", r.join(", "));
            }
            let _ = write!(out, "goto {}", o.target);
            out.push_str(if i + 1 < n { ";\n" } else { "\n" });
        }
        out.push_str("};\n");
    }
    out
}
