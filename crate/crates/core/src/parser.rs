//! Parser for the protocol description language.
//!
//! The language is line-oriented: one declaration or statement per line,
//! tokens separated by whitespace (punctuation also self-delimits), `#`
//! starting a comment. A file opens with a header — protocol name, parties,
//! register size, ownership, initial state factors, channels — followed by
//! the program body:
//!
//! ```text
//! protocol teleport
//! party Alice
//! party Bob
//! qubits 3
//! owns Alice q0 q1
//! owns Bob q2
//! init amp 0 0.6 0.0 1 0.8 0.0
//! init bell 1 2
//! chan ch bit Alice -> Bob
//! par {
//!   Alice: apply CNOT q0 q1
//!   ...
//! } {
//!   Bob: recv ch -> b0
//!   ...
//! }
//! ```
//!
//! Statements carry a party prefix (`Alice:` — the colon is optional); a
//! bare statement reuses the most recently named party of the enclosing
//! block. `if VAR = INT { … } else { … }` and `par { … } { … }` open
//! multi-line blocks closed by `}` lines.
//!
//! Initial-state factors (`init bell i j`, `init ket BITS`, `init amp IDX RE
//! IM …`) each claim disjoint qubits — `bell` names its pair, the others
//! take the lowest-numbered unclaimed qubits — and the full register is
//! their tensor product, unclaimed qubits defaulting to |0⟩. Channel
//! endpoints are checked statically; qubit *ownership* is deliberately left
//! to the runtime, so a program where Bob measures Alice's qubit parses and
//! then fails with an ownership error when run.

use std::fmt::Write as _;

use thiserror::Error;

use crate::channel::ChannelKind;
use crate::expr::{BinOp, Expr};
use crate::operator::{extract_bits, GateId};
use crate::program::{GateExpr, PartyId, Program};
use crate::state::{Amplitude, StateVector, EPS_NORM};
use crate::world::World;

/// A positioned syntax or well-formedness error.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    /// 1-based line of the offending token (one past the last line at EOF).
    pub line: usize,
    /// 1-based column of the offending token.
    pub column: usize,
    /// What went wrong.
    pub message: String,
}

impl ParseError {
    fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            column,
            message: message.into(),
        }
    }
}

/// Parses a protocol file into its program and initial world.
pub fn parse_protocol(text: &str) -> Result<(Program, World), ParseError> {
    parse_protocol_with_overrides(text, None)
}

/// The name declared by the file's `protocol` line, without parsing the
/// rest — how a front end picks the verification suite for a file.
pub fn protocol_name(text: &str) -> Result<String, ParseError> {
    for (i, raw) in text.lines().enumerate() {
        let toks = tokenize_line(raw, i + 1);
        if toks.is_empty() {
            continue;
        }
        if toks[0].text != "protocol" {
            return Err(toks[0].err("the file must open with a `protocol` line"));
        }
        let mut cur = Cur::new(&toks);
        cur.next();
        let name = cur.ident("a protocol name")?.text.clone();
        cur.expect_end()?;
        return Ok(name);
    }
    Err(ParseError::new(
        text.lines().count() + 1,
        1,
        "the file must open with a `protocol` line",
    ))
}

/// [`parse_protocol`], optionally replacing the amplitudes of the file's
/// first single-qubit `init amp` factor — how a command line supplies the
/// (α, β) of a message qubit. The override must itself be normalized.
pub fn parse_protocol_with_overrides(
    text: &str,
    message: Option<(Amplitude, Amplitude)>,
) -> Result<(Program, World), ParseError> {
    Parser::new(text)?.finish(message)
}

#[derive(Debug, Clone)]
struct Tok {
    text: String,
    line: usize,
    col: usize,
}

impl Tok {
    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError::new(self.line, self.col, message)
    }
}

/// Splits one source line into tokens: punctuation (`{ } ( ) = < > + - *`
/// and the digraphs `-> != <= >=`) self-delimits; everything else runs until
/// whitespace or punctuation; `#` ends the line.
fn tokenize_line(src: &str, line_no: usize) -> Vec<Tok> {
    const SINGLES: &[char] = &['{', '}', '(', ')', '=', '<', '>', '+', '-', '*'];
    let mut toks = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '#' {
            break;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let col = i + 1;
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        if ["->", "!=", "<=", ">="].contains(&two.as_str()) {
            toks.push(Tok { text: two, line: line_no, col });
            i += 2;
        } else if SINGLES.contains(&c) || c == '!' {
            toks.push(Tok { text: c.to_string(), line: line_no, col });
            i += 1;
        } else {
            let start = i;
            while i < chars.len()
                && !chars[i].is_whitespace()
                && !SINGLES.contains(&chars[i])
                && chars[i] != '!'
                && chars[i] != '#'
            {
                i += 1;
            }
            toks.push(Tok {
                text: chars[start..i].iter().collect(),
                line: line_no,
                col,
            });
        }
    }
    toks
}

/// Cursor over one line's tokens.
struct Cur<'a> {
    toks: &'a [Tok],
    pos: usize,
}

impl<'a> Cur<'a> {
    fn new(toks: &'a [Tok]) -> Self {
        Cur { toks, pos: 0 }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<&Tok> {
        let t = self.toks.get(self.pos);
        self.pos += t.is_some() as usize;
        t
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    /// Position just past the last token, for "expected more" errors.
    fn end_err(&self, message: impl Into<String>) -> ParseError {
        let last = self.toks.last().expect("cursor lines are non-empty");
        ParseError::new(last.line, last.col + last.text.chars().count(), message)
    }

    fn need(&mut self, what: &str) -> Result<&Tok, ParseError> {
        if self.pos >= self.toks.len() {
            return Err(self.end_err(format!("expected {what}")));
        }
        let t = &self.toks[self.pos];
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, literal: &str) -> Result<(), ParseError> {
        let t = self.need(&format!("`{literal}`"))?;
        if t.text != literal {
            return Err(t.err(format!("expected `{literal}`, found `{}`", t.text)));
        }
        Ok(())
    }

    fn expect_end(&self) -> Result<(), ParseError> {
        match self.peek() {
            None => Ok(()),
            Some(t) => Err(t.err(format!("unexpected `{}` at end of line", t.text))),
        }
    }

    fn int(&mut self, what: &str) -> Result<(i64, &Tok), ParseError> {
        let t = self.need(what)?;
        match t.text.parse::<i64>() {
            Ok(v) => Ok((v, t)),
            Err(_) => Err(t.err(format!("expected {what}, found `{}`", t.text))),
        }
    }

    fn float(&mut self, what: &str) -> Result<f64, ParseError> {
        let t = self.need(what)?;
        match t.text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(t.err(format!("expected {what}, found `{}`", t.text))),
        }
    }

    /// A qubit reference `q<i>`.
    fn qubit(&mut self) -> Result<(usize, &Tok), ParseError> {
        let t = self.need("a qubit like `q0`")?;
        let idx = t
            .text
            .strip_prefix('q')
            .and_then(|d| d.parse::<usize>().ok());
        match idx {
            Some(i) => Ok((i, t)),
            None => Err(t.err(format!("expected a qubit like `q0`, found `{}`", t.text))),
        }
    }

    /// An identifier: letters, digits, `_`, starting with a letter.
    fn ident(&mut self, what: &str) -> Result<&Tok, ParseError> {
        let t = self.need(what)?;
        let mut cs = t.text.chars();
        let ok = cs.next().is_some_and(|c| c.is_ascii_alphabetic())
            && cs.all(|c| c.is_ascii_alphanumeric() || c == '_');
        if ok {
            Ok(t)
        } else {
            Err(t.err(format!("expected {what}, found `{}`", t.text)))
        }
    }
}

#[derive(Debug, Clone)]
struct Factor {
    qubits: Vec<usize>,
    amps: Vec<Amplitude>,
}

#[derive(Debug, Clone)]
struct ChanDecl {
    name: String,
    kind: ChannelKind,
    writer: PartyId,
    reader: PartyId,
}

enum FrameKind {
    If {
        party: PartyId,
        cond: Expr,
        then: Vec<Program>,
        els: Vec<Program>,
        in_else: bool,
    },
    Par {
        first: Vec<Program>,
        second: Vec<Program>,
        in_second: bool,
    },
}

struct Frame {
    kind: FrameKind,
    default_party: Option<PartyId>,
    open_line: usize,
}

struct Parser {
    // Header.
    name: Option<String>,
    parties: Vec<PartyId>,
    qubits: Option<usize>,
    qubits_pos: (usize, usize),
    owner: Vec<Option<PartyId>>,
    vars: Vec<(String, i64)>,
    factors: Vec<Factor>,
    claimed: Vec<bool>,
    chans: Vec<ChanDecl>,
    // Body.
    body_started: bool,
    root: Vec<Program>,
    root_party: Option<PartyId>,
    frames: Vec<Frame>,
    eof: (usize, usize),
}

impl Parser {
    fn new(text: &str) -> Result<Self, ParseError> {
        let mut p = Parser {
            name: None,
            parties: Vec::new(),
            qubits: None,
            qubits_pos: (1, 1),
            owner: Vec::new(),
            vars: Vec::new(),
            factors: Vec::new(),
            claimed: Vec::new(),
            chans: Vec::new(),
            body_started: false,
            root: Vec::new(),
            root_party: None,
            frames: Vec::new(),
            eof: (text.lines().count() + 1, 1),
        };
        for (i, raw) in text.lines().enumerate() {
            let toks = tokenize_line(raw, i + 1);
            if toks.is_empty() {
                continue;
            }
            p.line(&toks)?;
        }
        Ok(p)
    }

    fn party(&self, tok: &Tok) -> Result<PartyId, ParseError> {
        let stripped = tok.text.strip_suffix(':').unwrap_or(&tok.text);
        let id = PartyId::new(stripped);
        if self.parties.contains(&id) {
            Ok(id)
        } else {
            Err(tok.err(format!("unknown party `{stripped}`")))
        }
    }

    fn chan(&self, tok: &Tok) -> Result<&ChanDecl, ParseError> {
        self.chans
            .iter()
            .find(|c| c.name == tok.text)
            .ok_or_else(|| tok.err(format!("unknown channel `{}`", tok.text)))
    }

    fn qubit_count(&self, at: &Tok) -> Result<usize, ParseError> {
        self.qubits
            .ok_or_else(|| at.err("`qubits` must be declared before this line"))
    }

    fn check_qubit(&self, idx: usize, tok: &Tok) -> Result<usize, ParseError> {
        let n = self.qubit_count(tok)?;
        if idx >= n {
            return Err(tok.err(format!("qubit q{idx} is out of range for {n} qubit(s)")));
        }
        Ok(idx)
    }

    /// Claims `count` unclaimed qubits, lowest indices first.
    fn claim_lowest(&mut self, count: usize, at: &Tok) -> Result<Vec<usize>, ParseError> {
        let free: Vec<usize> = (0..self.claimed.len()).filter(|&i| !self.claimed[i]).collect();
        if free.len() < count {
            return Err(at.err(format!(
                "initial-state factor needs {count} free qubit(s), only {} remain",
                free.len()
            )));
        }
        let take = free[..count].to_vec();
        for &i in &take {
            self.claimed[i] = true;
        }
        Ok(take)
    }

    fn header_line(&mut self, cur: &mut Cur<'_>, keyword: &Tok) -> Result<(), ParseError> {
        if self.body_started {
            return Err(keyword.err(format!(
                "`{}` must appear before the first statement",
                keyword.text
            )));
        }
        match keyword.text.as_str() {
            "protocol" => {
                if self.name.is_some() {
                    return Err(keyword.err("duplicate `protocol` line"));
                }
                self.name = Some(cur.ident("a protocol name")?.text.clone());
            }
            "party" => {
                let t = cur.ident("a party name")?;
                let id = PartyId::new(&t.text);
                if self.parties.contains(&id) {
                    return Err(t.err(format!("duplicate party `{}`", t.text)));
                }
                self.parties.push(id);
            }
            "qubits" => {
                if self.qubits.is_some() {
                    return Err(keyword.err("duplicate `qubits` line"));
                }
                let (n, t) = cur.int("a register size")?;
                if n < 1 {
                    return Err(t.err("the register needs at least one qubit"));
                }
                self.qubits = Some(n as usize);
                self.qubits_pos = (keyword.line, keyword.col);
                self.owner = vec![None; n as usize];
                self.claimed = vec![false; n as usize];
            }
            "owns" => {
                let pt = cur.need("a party name")?.clone();
                let party = self.party(&pt)?;
                if cur.peek().is_some_and(|t| t.text == "var") {
                    cur.next();
                    while !cur.at_end() {
                        let name = cur.ident("a variable name")?.text.clone();
                        cur.expect("=")?;
                        let (v, _) = cur.int("an integer")?;
                        self.vars.push((name, v));
                    }
                } else {
                    if cur.at_end() {
                        return Err(cur.end_err("expected qubits or `var` bindings"));
                    }
                    while !cur.at_end() {
                        let (idx, t) = cur.qubit()?;
                        let t = t.clone();
                        self.check_qubit(idx, &t)?;
                        if self.owner[idx].is_some() {
                            return Err(t.err(format!("qubit q{idx} already has an owner")));
                        }
                        self.owner[idx] = Some(party.clone());
                    }
                }
            }
            "init" => self.init_line(cur)?,
            "chan" => {
                let name = cur.ident("a channel name")?.text.clone();
                self.check_chan_name(&name, keyword)?;
                let kt = cur.need("a channel kind")?;
                if kt.text != "bit" {
                    return Err(kt.err(format!("unknown channel kind `{}`", kt.text)));
                }
                let wt = cur.need("the writing party")?.clone();
                let writer = self.party(&wt)?;
                cur.expect("->")?;
                let rt = cur.need("the reading party")?.clone();
                let reader = self.party(&rt)?;
                self.chans.push(ChanDecl {
                    name,
                    kind: ChannelKind::Bit,
                    writer,
                    reader,
                });
            }
            "qchan" => {
                let name = cur.ident("a channel name")?.text.clone();
                self.check_chan_name(&name, keyword)?;
                let wt = cur.need("the writing party")?.clone();
                let writer = self.party(&wt)?;
                cur.expect("->")?;
                let rt = cur.need("the reading party")?.clone();
                let reader = self.party(&rt)?;
                self.chans.push(ChanDecl {
                    name,
                    kind: ChannelKind::Quantum,
                    writer,
                    reader,
                });
            }
            _ => unreachable!("header_line called for header keywords only"),
        }
        cur.expect_end()
    }

    fn check_chan_name(&self, name: &str, at: &Tok) -> Result<(), ParseError> {
        if self.chans.iter().any(|c| c.name == name) {
            return Err(at.err(format!("duplicate channel `{name}`")));
        }
        Ok(())
    }

    fn init_line(&mut self, cur: &mut Cur<'_>) -> Result<(), ParseError> {
        let form = cur.need("`bell`, `ket`, or `amp`")?.clone();
        match form.text.as_str() {
            "bell" => {
                let (i, ti) = cur.int("a qubit index")?;
                let ti = ti.clone();
                let (j, tj) = cur.int("a qubit index")?;
                let tj = tj.clone();
                if i < 0 || j < 0 {
                    return Err(tj.err("qubit indices are non-negative"));
                }
                let (i, j) = (i as usize, j as usize);
                self.check_qubit(i, &ti)?;
                self.check_qubit(j, &tj)?;
                if i == j {
                    return Err(tj.err("the pair needs two distinct qubits"));
                }
                for (idx, t) in [(i, &ti), (j, &tj)] {
                    if self.claimed[idx] {
                        return Err(t.err(format!("qubit q{idx} is already initialized")));
                    }
                    self.claimed[idx] = true;
                }
                let s = std::f64::consts::FRAC_1_SQRT_2;
                let zero = Amplitude::new(0.0, 0.0);
                let one = Amplitude::new(s, 0.0);
                self.factors.push(Factor {
                    qubits: vec![i, j],
                    amps: vec![one, zero, zero, one],
                });
            }
            "ket" => {
                let t = cur.need("a bitstring")?.clone();
                let bits: Option<Vec<usize>> = t
                    .text
                    .chars()
                    .map(|c| match c {
                        '0' => Some(0),
                        '1' => Some(1),
                        _ => None,
                    })
                    .collect();
                let bits = bits
                    .filter(|b| !b.is_empty())
                    .ok_or_else(|| t.err(format!("expected a bitstring, found `{}`", t.text)))?;
                self.qubit_count(&t)?;
                let qubits = self.claim_lowest(bits.len(), &t)?;
                let label = bits.iter().fold(0usize, |acc, b| (acc << 1) | b);
                let dim = 1usize << bits.len();
                let mut amps = vec![Amplitude::new(0.0, 0.0); dim];
                amps[label] = Amplitude::new(1.0, 0.0);
                self.factors.push(Factor { qubits, amps });
            }
            "amp" => {
                self.qubit_count(&form)?;
                let mut entries: Vec<(usize, Amplitude)> = Vec::new();
                loop {
                    let (idx, t) = cur.int("an amplitude index")?;
                    let t = t.clone();
                    if idx < 0 {
                        return Err(t.err("amplitude indices are non-negative"));
                    }
                    let idx = idx as usize;
                    if entries.iter().any(|(i, _)| *i == idx) {
                        return Err(t.err(format!("duplicate amplitude index {idx}")));
                    }
                    let re = cur.float("a real part")?;
                    let im = cur.float("an imaginary part")?;
                    entries.push((idx, Amplitude::new(re, im)));
                    if cur.at_end() {
                        break;
                    }
                }
                let max_idx = entries.iter().map(|(i, _)| *i).max().expect("non-empty");
                let width = if max_idx == 0 {
                    1
                } else {
                    usize::BITS as usize - max_idx.leading_zeros() as usize
                };
                let dim = 1usize << width;
                let mut amps = vec![Amplitude::new(0.0, 0.0); dim];
                for (i, a) in &entries {
                    amps[*i] = *a;
                }
                let norm_sq: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
                if (norm_sq - 1.0).abs() > EPS_NORM {
                    return Err(form.err(format!(
                        "amplitude factor has squared norm {norm_sq}, expected 1"
                    )));
                }
                let qubits = self.claim_lowest(width, &form)?;
                self.factors.push(Factor { qubits, amps });
            }
            _ => {
                return Err(form.err(format!(
                    "expected `bell`, `ket`, or `amp`, found `{}`",
                    form.text
                )))
            }
        }
        Ok(())
    }

    fn default_party(&self) -> Option<PartyId> {
        match self.frames.last() {
            Some(f) => f.default_party.clone(),
            None => self.root_party.clone(),
        }
    }

    fn set_default_party(&mut self, party: PartyId) {
        match self.frames.last_mut() {
            Some(f) => f.default_party = Some(party),
            None => self.root_party = Some(party),
        }
    }

    fn push_statement(&mut self, stmt: Program) {
        let sink = match self.frames.last_mut() {
            Some(Frame {
                kind: FrameKind::If { then, els, in_else, .. },
                ..
            }) => {
                if *in_else {
                    els
                } else {
                    then
                }
            }
            Some(Frame {
                kind: FrameKind::Par { first, second, in_second },
                ..
            }) => {
                if *in_second {
                    second
                } else {
                    first
                }
            }
            None => &mut self.root,
        };
        sink.push(stmt);
    }

    fn line(&mut self, toks: &[Tok]) -> Result<(), ParseError> {
        let mut cur = Cur::new(toks);
        let first = cur.peek().expect("non-empty line").clone();
        match first.text.as_str() {
            "protocol" | "party" | "qubits" | "owns" | "init" | "chan" | "qchan" => {
                cur.next();
                return self.header_line(&mut cur, &first);
            }
            _ => {}
        }
        if self.name.is_none() {
            return Err(first.err("the file must open with a `protocol` line"));
        }
        self.body_started = true;
        match first.text.as_str() {
            "par" => {
                cur.next();
                cur.expect("{")?;
                cur.expect_end()?;
                self.frames.push(Frame {
                    kind: FrameKind::Par {
                        first: Vec::new(),
                        second: Vec::new(),
                        in_second: false,
                    },
                    default_party: None,
                    open_line: first.line,
                });
                Ok(())
            }
            "}" => {
                cur.next();
                self.close_line(&mut cur, &first)
            }
            _ => self.statement_line(&mut cur),
        }
    }

    /// A line starting with `}`: closes the innermost block, then `else {`
    /// or `{` reopens the matching frame's next section — possibly of an
    /// outer frame once inner ones are closed and appended.
    fn close_line(&mut self, cur: &mut Cur<'_>, at: &Tok) -> Result<(), ParseError> {
        #[derive(PartialEq)]
        enum Rest {
            End,
            Else,
            Block,
        }
        let rest = match cur.peek().map(|t| t.text.as_str()) {
            None => Rest::End,
            Some("else") => {
                cur.next();
                cur.expect("{")?;
                cur.expect_end()?;
                Rest::Else
            }
            Some("{") => {
                cur.next();
                cur.expect_end()?;
                Rest::Block
            }
            Some(other) => {
                return Err(cur
                    .peek()
                    .expect("just matched")
                    .err(format!("unexpected `{other}` after `}}`")))
            }
        };
        loop {
            let frame = match self.frames.pop() {
                Some(f) => f,
                None => return Err(at.err("unmatched `}`")),
            };
            match frame.kind {
                FrameKind::If {
                    party,
                    cond,
                    then,
                    els,
                    in_else,
                } => {
                    if rest == Rest::Else && !in_else {
                        self.frames.push(Frame {
                            kind: FrameKind::If {
                                party,
                                cond,
                                then,
                                els,
                                in_else: true,
                            },
                            default_party: frame.default_party,
                            open_line: frame.open_line,
                        });
                        return Ok(());
                    }
                    let stmt = Program::if_else(
                        party,
                        cond,
                        Program::seq_all(then),
                        Program::seq_all(els),
                    );
                    self.push_statement(stmt);
                    if rest == Rest::End {
                        return Ok(());
                    }
                    // `else {` or `{` applies to an enclosing frame.
                }
                FrameKind::Par {
                    first,
                    second,
                    in_second,
                } => match rest {
                    Rest::Block if !in_second => {
                        self.frames.push(Frame {
                            kind: FrameKind::Par {
                                first,
                                second,
                                in_second: true,
                            },
                            default_party: None,
                            open_line: frame.open_line,
                        });
                        return Ok(());
                    }
                    Rest::End if in_second => {
                        self.push_statement(Program::par(
                            Program::seq_all(first),
                            Program::seq_all(second),
                        ));
                        return Ok(());
                    }
                    Rest::End => {
                        return Err(at.err("`par` needs a second block: expected `} {`"))
                    }
                    _ => return Err(at.err("unexpected block opener after closing `par`")),
                },
            }
        }
    }

    fn statement_line(&mut self, cur: &mut Cur<'_>) -> Result<(), ParseError> {
        const KEYWORDS: &[&str] = &[
            "ok", "apply", "measure", "send", "recv", "qsend", "qrecv", "if",
        ];
        let first = cur.peek().expect("non-empty line").clone();
        let party = if KEYWORDS.contains(&first.text.trim_end_matches(':')) {
            match self.default_party() {
                Some(p) => p,
                None => {
                    return Err(first.err(
                        "no party named yet in this block; prefix the statement with one",
                    ))
                }
            }
        } else {
            cur.next();
            let p = self.party(&first)?;
            self.set_default_party(p.clone());
            p
        };
        let kw = cur.need("a statement")?.clone();
        match kw.text.as_str() {
            "ok" => {
                cur.expect_end()?;
                self.push_statement(Program::Ok);
            }
            "apply" => {
                let gt = cur.need("a gate name")?.clone();
                let gate = GateId::parse(&gt.text)
                    .ok_or_else(|| gt.err(format!("unknown gate `{}`", gt.text)))?;
                let mut targets = Vec::new();
                while !cur.at_end() {
                    let (idx, t) = cur.qubit()?;
                    let t = t.clone();
                    self.check_qubit(idx, &t)?;
                    if targets.contains(&idx) {
                        return Err(t.err(format!("duplicate target q{idx}")));
                    }
                    targets.push(idx);
                }
                if targets.len() != gate.arity() {
                    return Err(gt.err(format!(
                        "{} acts on {} qubit(s), got {}",
                        gt.text,
                        gate.arity(),
                        targets.len()
                    )));
                }
                self.push_statement(Program::Apply {
                    party,
                    gate: GateExpr::gate(gate),
                    targets,
                });
            }
            "measure" => {
                let mut targets = Vec::new();
                loop {
                    let t = cur.need("a qubit or `->`")?.clone();
                    if t.text == "->" {
                        break;
                    }
                    let idx = t
                        .text
                        .strip_prefix('q')
                        .and_then(|d| d.parse::<usize>().ok())
                        .ok_or_else(|| {
                            t.err(format!("expected a qubit like `q0`, found `{}`", t.text))
                        })?;
                    self.check_qubit(idx, &t)?;
                    if targets.contains(&idx) {
                        return Err(t.err(format!("duplicate target q{idx}")));
                    }
                    targets.push(idx);
                }
                if targets.is_empty() {
                    return Err(kw.err("measure needs at least one qubit"));
                }
                let mut vars = Vec::new();
                while !cur.at_end() {
                    vars.push(cur.ident("a variable name")?.text.clone());
                }
                if vars.len() != targets.len() {
                    return Err(kw.err(format!(
                        "measure binds {} variable(s) for {} qubit(s)",
                        vars.len(),
                        targets.len()
                    )));
                }
                self.push_statement(Program::Measure {
                    party,
                    targets,
                    vars,
                });
            }
            "send" => {
                let ct = cur.need("a channel name")?.clone();
                let decl = self.chan(&ct)?.clone();
                if decl.kind == ChannelKind::Quantum {
                    return Err(ct.err(format!(
                        "channel `{}` is quantum; use `qsend`",
                        decl.name
                    )));
                }
                if decl.writer != party {
                    return Err(ct.err(format!(
                        "{party} is not the writer of channel `{}`",
                        decl.name
                    )));
                }
                let expr = parse_expr(cur)?;
                cur.expect_end()?;
                self.push_statement(Program::SendC {
                    party,
                    channel: decl.name,
                    expr,
                });
            }
            "recv" => {
                let ct = cur.need("a channel name")?.clone();
                let decl = self.chan(&ct)?.clone();
                if decl.kind == ChannelKind::Quantum {
                    return Err(ct.err(format!(
                        "channel `{}` is quantum; use `qrecv`",
                        decl.name
                    )));
                }
                if decl.reader != party {
                    return Err(ct.err(format!(
                        "{party} is not the reader of channel `{}`",
                        decl.name
                    )));
                }
                cur.expect("->")?;
                let var = cur.ident("a variable name")?.text.clone();
                cur.expect_end()?;
                self.push_statement(Program::RecvC {
                    party,
                    channel: decl.name,
                    var,
                });
            }
            "qsend" => {
                let ct = cur.need("a channel name")?.clone();
                let decl = self.chan(&ct)?.clone();
                if decl.kind != ChannelKind::Quantum {
                    return Err(ct.err(format!(
                        "channel `{}` is classical; use `send`",
                        decl.name
                    )));
                }
                if decl.writer != party {
                    return Err(ct.err(format!(
                        "{party} is not the writer of channel `{}`",
                        decl.name
                    )));
                }
                let (idx, t) = cur.qubit()?;
                let t = t.clone();
                self.check_qubit(idx, &t)?;
                cur.expect_end()?;
                self.push_statement(Program::SendQ {
                    party,
                    channel: decl.name,
                    qubit: idx,
                });
            }
            "qrecv" => {
                let ct = cur.need("a channel name")?.clone();
                let decl = self.chan(&ct)?.clone();
                if decl.kind != ChannelKind::Quantum {
                    return Err(ct.err(format!(
                        "channel `{}` is classical; use `recv`",
                        decl.name
                    )));
                }
                if decl.reader != party {
                    return Err(ct.err(format!(
                        "{party} is not the reader of channel `{}`",
                        decl.name
                    )));
                }
                cur.expect("->")?;
                let (idx, t) = cur.qubit()?;
                let t = t.clone();
                self.check_qubit(idx, &t)?;
                cur.expect_end()?;
                self.push_statement(Program::RecvQ {
                    party,
                    channel: decl.name,
                    qubit: idx,
                });
            }
            "if" => {
                let vt = cur.ident("a variable name")?.text.clone();
                cur.expect("=")?;
                let (v, _) = cur.int("an integer")?;
                cur.expect("{")?;
                cur.expect_end()?;
                self.frames.push(Frame {
                    kind: FrameKind::If {
                        party: party.clone(),
                        cond: Expr::eq(Expr::var(vt), Expr::con(v)),
                        then: Vec::new(),
                        els: Vec::new(),
                        in_else: false,
                    },
                    default_party: Some(party),
                    open_line: kw.line,
                });
            }
            other => {
                return Err(kw.err(format!("unknown statement `{other}`")));
            }
        }
        Ok(())
    }

    fn finish(
        mut self,
        message: Option<(Amplitude, Amplitude)>,
    ) -> Result<(Program, World), ParseError> {
        let (eof_line, eof_col) = self.eof;
        if self.name.is_none() {
            return Err(ParseError::new(
                eof_line,
                eof_col,
                "the file must open with a `protocol` line",
            ));
        }
        if let Some(frame) = self.frames.last() {
            return Err(ParseError::new(
                eof_line,
                eof_col,
                format!("block opened on line {} is never closed", frame.open_line),
            ));
        }
        let (qline, qcol) = self.qubits_pos;
        let n = self
            .qubits
            .ok_or_else(|| ParseError::new(eof_line, eof_col, "missing `qubits` line"))?;

        // Every qubit needs an owner.
        let mut owner = Vec::with_capacity(n);
        for (i, o) in self.owner.iter().enumerate() {
            match o {
                Some(p) => owner.push(p.clone()),
                None => {
                    return Err(ParseError::new(
                        qline,
                        qcol,
                        format!("ownership declaration missing for qubit q{i}"),
                    ))
                }
            }
        }

        if let Some((alpha, beta)) = message {
            let target = self.factors.iter_mut().find(|f| f.qubits.len() == 1);
            match target {
                Some(f) => f.amps = vec![alpha, beta],
                None => {
                    return Err(ParseError::new(
                        qline,
                        qcol,
                        "amplitude override requires a single-qubit `init amp` factor",
                    ))
                }
            }
        }

        // Assemble the initial state: tensor product of the declared factors,
        // unclaimed qubits in |0⟩.
        let unclaimed: Vec<usize> = (0..n).filter(|&i| !self.claimed[i]).collect();
        let dim = 1usize << n;
        let mut amps = Vec::with_capacity(dim);
        for x in 0..dim {
            let mut a = Amplitude::new(1.0, 0.0);
            if unclaimed.iter().any(|&u| StateVector::bit_of(x, u, n) == 1) {
                a = Amplitude::new(0.0, 0.0);
            } else {
                for f in &self.factors {
                    a *= f.amps[extract_bits(x, &f.qubits, n)];
                }
            }
            amps.push(a);
        }
        // Factors are individually normalized; squeeze out accumulated float
        // dust so the state constructor's norm check cannot trip.
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(ParseError::new(
                qline,
                qcol,
                format!("initial state has norm {norm}, expected 1"),
            ));
        }
        for a in &mut amps {
            *a /= norm;
        }
        let state = StateVector::new(n, amps)
            .map_err(|e| ParseError::new(qline, qcol, format!("initial state: {e}")))?;

        let mut world = World::new(state, owner)
            .map_err(|e| ParseError::new(qline, qcol, e.to_string()))?;
        for (name, value) in &self.vars {
            world.classical.insert(name.clone(), *value);
        }

        // Wrap the body in channel scopes, first declared outermost.
        let mut program = Program::seq_all(self.root);
        for decl in self.chans.into_iter().rev() {
            program = match decl.kind {
                ChannelKind::Quantum => Program::DeclQChan {
                    name: decl.name,
                    writer: decl.writer,
                    reader: decl.reader,
                    body: Box::new(program),
                },
                kind => Program::DeclChan {
                    name: decl.name,
                    kind,
                    writer: decl.writer,
                    reader: decl.reader,
                    body: Box::new(program),
                },
            };
        }
        Ok((program, world))
    }
}

/// Expression grammar for `send` payloads: comparisons over sums over
/// products, `( … )` for grouping, `-` usable as unary minus.
fn parse_expr(cur: &mut Cur<'_>) -> Result<Expr, ParseError> {
    let lhs = parse_sum(cur)?;
    let op = match cur.peek().map(|t| t.text.as_str()) {
        Some("=") => Some(BinOp::Eq),
        Some("!=") => Some(BinOp::Ne),
        Some("<") => Some(BinOp::Lt),
        Some("<=") => Some(BinOp::Le),
        Some(">") => Some(BinOp::Gt),
        Some(">=") => Some(BinOp::Ge),
        _ => None,
    };
    match op {
        Some(op) => {
            cur.next();
            let rhs = parse_sum(cur)?;
            Ok(Expr::bin(op, lhs, rhs))
        }
        None => Ok(lhs),
    }
}

fn parse_sum(cur: &mut Cur<'_>) -> Result<Expr, ParseError> {
    let mut acc = parse_product(cur)?;
    loop {
        let op = match cur.peek().map(|t| t.text.as_str()) {
            Some("+") => BinOp::Add,
            Some("-") => BinOp::Sub,
            _ => return Ok(acc),
        };
        cur.next();
        let rhs = parse_product(cur)?;
        acc = Expr::bin(op, acc, rhs);
    }
}

fn parse_product(cur: &mut Cur<'_>) -> Result<Expr, ParseError> {
    let mut acc = parse_atom(cur)?;
    loop {
        let op = match cur.peek().map(|t| t.text.as_str()) {
            Some("*") => BinOp::Mul,
            Some("div") => BinOp::Div,
            Some("mod") => BinOp::Mod,
            _ => return Ok(acc),
        };
        cur.next();
        let rhs = parse_atom(cur)?;
        acc = Expr::bin(op, acc, rhs);
    }
}

fn parse_atom(cur: &mut Cur<'_>) -> Result<Expr, ParseError> {
    let t = cur.need("an expression")?.clone();
    match t.text.as_str() {
        "(" => {
            let inner = parse_expr(cur)?;
            cur.expect(")")?;
            Ok(inner)
        }
        "-" => match parse_atom(cur)? {
            Expr::Const(k) => Ok(Expr::con(-k)),
            e => Ok(Expr::bin(BinOp::Sub, Expr::con(0), e)),
        },
        text => {
            if let Ok(v) = text.parse::<i64>() {
                return Ok(Expr::con(v));
            }
            let mut cs = text.chars();
            let ident = cs.next().is_some_and(|c| c.is_ascii_alphabetic())
                && cs.all(|c| c.is_ascii_alphanumeric() || c == '_');
            if ident {
                Ok(Expr::var(text))
            } else {
                Err(t.err(format!("expected an expression, found `{text}`")))
            }
        }
    }
}

/// Renders a parse error with a caret under the offending column — the CLI's
/// error display.
pub fn render_error(path: &str, text: &str, err: &ParseError) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{path}:{}:{}: error: {}", err.line, err.column, err.message);
    if let Some(line) = text.lines().nth(err.line.saturating_sub(1)) {
        let _ = writeln!(out, "  {line}");
        let pad: String = line
            .chars()
            .take(err.column.saturating_sub(1))
            .map(|c| if c == '\t' { '\t' } else { ' ' })
            .collect();
        let _ = writeln!(out, "  {pad}^");
    }
    out
}
