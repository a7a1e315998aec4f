//! Concrete syntax for contracts and orchestrators.
//!
//! ```text
//! contract      1 | a.S | !a.S | S + S | S (+) S | X | rec X . S | (S)
//! orchestrator  1 | <l,r>.F | F \/ F | X | rec X . F | (F)
//! ```
//!
//! `.` binds tighter than the choice operators, a `rec` body extends as far
//! right as possible and a trailing `.1` may be left out. `#` starts a
//! comment that runs to the end of the line.

use std::fmt;

use crate::contracts::SessionContract;
use crate::error::{Error, Result};
use crate::names::{Name, NameScope, RecVar, Var};
use crate::orchestrators::{OrchAction, Orchestrator};

/// Position of a token: 1-based line and column, length in characters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SourceSpan {
    pub line: usize,
    pub column: usize,
    pub length: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{}:{}: {message}", span.line, span.column)]
pub struct ParseError {
    pub message: String,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Name(String),
    Var(String),
    Rec,
    One,
    Dot,
    Plus,
    OPlus,
    Or,
    LParen,
    RParen,
    Lt,
    Gt,
    Comma,
    Bang,
    Under,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Name(n) | Tok::Var(n) => return write!(f, "`{n}`"),
            Tok::Rec => "`rec`",
            Tok::One => "`1`",
            Tok::Dot => "`.`",
            Tok::Plus => "`+`",
            Tok::OPlus => "`(+)`",
            Tok::Or => "`\\/`",
            Tok::LParen => "`(`",
            Tok::RParen => "`)`",
            Tok::Lt => "`<`",
            Tok::Gt => "`>`",
            Tok::Comma => "`,`",
            Tok::Bang => "`!`",
            Tok::Under => "`_`",
            Tok::Eof => "end of input",
        };
        f.write_str(s)
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, SourceSpan)>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let (mut last_line, mut last_col) = (1, 1);
    while i < chars.len() {
        let c = chars[i];
        let span = |length| SourceSpan { line, column: col, length };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
                col += 1;
            }
            continue;
        }
        last_line = line;
        last_col = col;
        let starts = |s: &str| chars[i..].iter().take(s.len()).copied().eq(s.chars());
        let (tok, len) = if starts("(+)") {
            (Tok::OPlus, 3)
        } else if starts("\\/") {
            (Tok::Or, 2)
        } else if c.is_ascii_alphabetic() {
            let mut j = i;
            while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                j += 1;
            }
            let word: String = chars[i..j].iter().collect();
            let tok = if word == "rec" {
                Tok::Rec
            } else if c.is_ascii_uppercase() {
                Tok::Var(word)
            } else {
                Tok::Name(word)
            };
            (tok, j - i)
        } else {
            let tok = match c {
                '1' => Tok::One,
                '.' => Tok::Dot,
                '+' => Tok::Plus,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '<' => Tok::Lt,
                '>' => Tok::Gt,
                ',' => Tok::Comma,
                '!' => Tok::Bang,
                '_' => Tok::Under,
                _ => {
                    return Err(ParseError {
                        message: format!("unexpected character {c:?}"),
                        span: span(1),
                    })
                }
            };
            (tok, 1)
        };
        toks.push((tok, span(len)));
        i += len;
        col += len;
    }
    let eof = SourceSpan {
        line: last_line,
        column: last_col,
        length: 1,
    };
    toks.push((Tok::Eof, eof));
    Ok(toks)
}

struct Parser {
    toks: Vec<(Tok, SourceSpan)>,
    pos: usize,
}

enum Side {
    In(String),
    Out(String),
    Empty,
}

impl Parser {
    fn new(src: &str) -> Result<Self, ParseError> {
        Ok(Parser {
            toks: lex(src)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn span(&self) -> SourceSpan {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, SourceSpan) {
        let t = self.toks[self.pos].clone();
        if t.0 != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            message: message.into(),
            span: self.span(),
        })
    }

    fn unexpected<T>(&self, wanted: &str) -> Result<T, ParseError> {
        self.error(format!("expected {wanted}, found {}", self.peek()))
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.unexpected(&tok.to_string())
        }
    }

    fn finish(&self) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Eof => Ok(()),
            _ => self.unexpected("end of input"),
        }
    }

    fn var_name(&mut self) -> Result<RecVar, ParseError> {
        match self.peek().clone() {
            Tok::Var(v) => {
                self.bump();
                Ok(RecVar::new(v))
            }
            _ => self.unexpected("a recursion variable"),
        }
    }

    fn name(&mut self) -> Result<Name, ParseError> {
        match self.peek().clone() {
            Tok::Name(n) => {
                self.bump();
                Ok(Name::new(n))
            }
            _ => self.unexpected("a name"),
        }
    }

    // ---- contracts ----

    fn contract(&mut self) -> Result<SessionContract, ParseError> {
        if *self.peek() == Tok::Rec {
            self.bump();
            let var = self.var_name()?;
            self.expect(Tok::Dot)?;
            let body = self.contract()?;
            return Ok(SessionContract::rec(var, body));
        }
        let first_span = self.span();
        let first = self.contract_operand()?;
        let op = match self.peek() {
            Tok::Plus | Tok::OPlus => self.peek().clone(),
            _ => return Ok(first),
        };
        let mut operands = vec![(first, first_span)];
        while matches!(self.peek(), Tok::Plus | Tok::OPlus) {
            if *self.peek() != op {
                return self.error("cannot mix `+` and `(+)` in one choice");
            }
            self.bump();
            let span = self.span();
            operands.push((self.contract_operand()?, span));
        }
        let mut branches = Vec::new();
        for (operand, span) in operands {
            match (operand, &op) {
                (SessionContract::External(bs), Tok::Plus)
                | (SessionContract::Internal(bs), Tok::OPlus) => branches.extend(bs),
                (SessionContract::Internal(_), Tok::Plus) | (SessionContract::External(_), Tok::OPlus) => {
                    return Err(ParseError {
                        message: "mixed choice: `+` joins inputs, `(+)` joins outputs".into(),
                        span,
                    })
                }
                _ => {
                    return Err(ParseError {
                        message: "choice branches must start with an action".into(),
                        span,
                    })
                }
            }
        }
        Ok(match op {
            Tok::Plus => SessionContract::external(branches),
            _ => SessionContract::internal(branches),
        })
    }

    fn contract_operand(&mut self) -> Result<SessionContract, ParseError> {
        match self.peek().clone() {
            Tok::One => {
                self.bump();
                Ok(SessionContract::Success)
            }
            Tok::Var(_) => Ok(SessionContract::var(self.var_name()?)),
            Tok::LParen => {
                self.bump();
                let inner = self.contract()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::Name(_) => {
                let n = self.name()?;
                Ok(SessionContract::input(n, self.contract_cont()?))
            }
            Tok::Bang => {
                self.bump();
                let n = self.name()?;
                Ok(SessionContract::output(n, self.contract_cont()?))
            }
            _ => self.unexpected("a contract"),
        }
    }

    fn contract_cont(&mut self) -> Result<SessionContract, ParseError> {
        if *self.peek() != Tok::Dot {
            return Ok(SessionContract::Success);
        }
        self.bump();
        if *self.peek() == Tok::Rec {
            self.contract()
        } else {
            self.contract_operand()
        }
    }

    // ---- orchestrators ----

    fn orchestrator(&mut self) -> Result<Orchestrator, ParseError> {
        if *self.peek() == Tok::Rec {
            self.bump();
            let var = self.var_name()?;
            self.expect(Tok::Dot)?;
            let body = self.orchestrator()?;
            return Ok(Orchestrator::rec(var, body));
        }
        let mut branches = vec![self.orch_operand()?];
        while *self.peek() == Tok::Or {
            self.bump();
            if *self.peek() == Tok::Rec {
                // A rec branch swallows every later branch.
                branches.push(self.orchestrator()?);
            } else {
                branches.push(self.orch_operand()?);
            }
        }
        Ok(Orchestrator::choice(branches))
    }

    fn orch_operand(&mut self) -> Result<Orchestrator, ParseError> {
        match self.peek().clone() {
            Tok::One => {
                self.bump();
                Ok(Orchestrator::Stop)
            }
            Tok::Var(_) => Ok(Orchestrator::var(self.var_name()?)),
            Tok::LParen => {
                self.bump();
                let inner = self.orchestrator()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::Lt => {
                let action = self.action()?;
                let cont = if *self.peek() == Tok::Dot {
                    self.bump();
                    if *self.peek() == Tok::Rec {
                        self.orchestrator()?
                    } else {
                        self.orch_operand()?
                    }
                } else {
                    Orchestrator::Stop
                };
                Ok(Orchestrator::prefix(action, cont))
            }
            _ => self.unexpected("an orchestrator"),
        }
    }

    fn side(&mut self) -> Result<Side, ParseError> {
        match self.peek() {
            Tok::Under => {
                self.bump();
                Ok(Side::Empty)
            }
            Tok::Bang => {
                self.bump();
                Ok(Side::Out(self.name()?.as_str().to_string()))
            }
            Tok::Name(_) => Ok(Side::In(self.name()?.as_str().to_string())),
            _ => self.unexpected("a name, `!name` or `_`"),
        }
    }

    fn action(&mut self) -> Result<OrchAction, ParseError> {
        let start = self.span();
        self.expect(Tok::Lt)?;
        let left = self.side()?;
        self.expect(Tok::Comma)?;
        let right = self.side()?;
        let end = self.span();
        self.expect(Tok::Gt)?;
        let span = SourceSpan {
            length: if end.line == start.line {
                end.column + 1 - start.column
            } else {
                1
            },
            ..start
        };
        let fail = |message: String| Err(ParseError { message, span });
        Ok(match (left, right) {
            (Side::In(a), Side::Out(b)) if a == b => OrchAction::SyncL(Name::new(a)),
            (Side::Out(a), Side::In(b)) if a == b => OrchAction::SyncR(Name::new(a)),
            (Side::In(a), Side::Out(b)) | (Side::Out(a), Side::In(b)) => {
                return fail(format!("name mismatch in synchronous action: `{a}` vs `{b}`"))
            }
            (Side::In(a), Side::Empty) => OrchAction::InC(Name::new(a)),
            (Side::Empty, Side::In(a)) => OrchAction::InS(Name::new(a)),
            (Side::Out(a), Side::Empty) => OrchAction::OutC(Name::new(a)),
            (Side::Empty, Side::Out(a)) => OrchAction::OutS(Name::new(a)),
            _ => {
                return fail(
                    "illegal action shape; expected <a,!a>, <!a,a>, <a,_>, <_,a>, <!a,_> or <_,!a>".into(),
                )
            }
        })
    }
}

/// Parses a contract without checking well-formedness.
pub fn parse_contract_raw(src: &str) -> Result<SessionContract, ParseError> {
    let mut p = Parser::new(src)?;
    let t = p.contract()?;
    p.finish()?;
    Ok(t)
}

/// Parses a contract and rejects it unless it is well formed.
pub fn parse_contract(src: &str) -> Result<SessionContract> {
    let t = parse_contract_raw(src)?;
    let violations = t.well_formed();
    if !violations.is_empty() {
        return Err(Error::IllFormed {
            what: "contract",
            violations,
        });
    }
    Ok(t)
}

/// Parses an orchestrator without checking well-formedness.
pub fn parse_orchestrator_raw(src: &str) -> Result<Orchestrator, ParseError> {
    let mut p = Parser::new(src)?;
    let t = p.orchestrator()?;
    p.finish()?;
    Ok(t)
}

/// Parses an orchestrator and rejects it unless it is well formed.
pub fn parse_orchestrator(src: &str) -> Result<Orchestrator> {
    let t = parse_orchestrator_raw(src)?;
    let violations = t.well_formed();
    if !violations.is_empty() {
        return Err(Error::IllFormed {
            what: "orchestrator",
            violations,
        });
    }
    Ok(t)
}

// ---- rendering ----

fn var_text(v: &Var, scope: &NameScope) -> String {
    match v {
        Var::Bound(i) => scope.lookup(*i).to_string(),
        Var::Free(x) => x.to_string(),
    }
}

pub fn render_contract(t: &SessionContract) -> String {
    let reserved = t.free_vars().into_iter().map(|v| v.as_str().to_string()).collect();
    let mut scope = NameScope::new(reserved);
    let mut out = String::new();
    contract_to(t, &mut scope, true, &mut out);
    out
}

/// `open` is true when nothing follows the term at its level, so a trailing
/// `rec` needs no parentheses.
fn contract_to(t: &SessionContract, scope: &mut NameScope, open: bool, out: &mut String) {
    match t {
        SessionContract::Success => out.push('1'),
        SessionContract::Var(v) => out.push_str(&var_text(v, scope)),
        SessionContract::Rec(b, body) => {
            if !open {
                out.push('(');
            }
            let name = scope.push(b.name());
            out.push_str(&format!("rec {name} . "));
            contract_to(body, scope, true, out);
            scope.pop();
            if !open {
                out.push(')');
            }
        }
        SessionContract::External(bs) | SessionContract::Internal(bs) => {
            let (sep, bang) = match t {
                SessionContract::External(_) => (" + ", ""),
                _ => (" (+) ", "!"),
            };
            for (i, (n, cont)) in bs.iter().enumerate() {
                if i > 0 {
                    out.push_str(sep);
                }
                out.push_str(bang);
                out.push_str(n.as_str());
                if !cont.is_success() {
                    out.push('.');
                    let last = open && i + 1 == bs.len();
                    let is_choice = matches!(cont,
                        SessionContract::External(c) | SessionContract::Internal(c) if c.len() > 1);
                    if is_choice {
                        out.push('(');
                        contract_to(cont, scope, true, out);
                        out.push(')');
                    } else {
                        contract_to(cont, scope, last, out);
                    }
                }
            }
        }
    }
}

pub fn render_orchestrator(t: &Orchestrator) -> String {
    let reserved = t.free_vars().into_iter().map(|v| v.as_str().to_string()).collect();
    let mut scope = NameScope::new(reserved);
    let mut out = String::new();
    orch_to(t, &mut scope, true, &mut out);
    out
}

fn orch_to(t: &Orchestrator, scope: &mut NameScope, open: bool, out: &mut String) {
    match t {
        Orchestrator::Stop => out.push('1'),
        Orchestrator::Var(v) => out.push_str(&var_text(v, scope)),
        Orchestrator::Rec(b, body) => {
            if !open {
                out.push('(');
            }
            let name = scope.push(b.name());
            out.push_str(&format!("rec {name} . "));
            orch_to(body, scope, true, out);
            scope.pop();
            if !open {
                out.push(')');
            }
        }
        Orchestrator::Prefix(a, cont) => {
            out.push_str(&a.to_string());
            match cont.as_ref() {
                Orchestrator::Stop => {}
                Orchestrator::Choice(_) => {
                    out.push_str(".(");
                    orch_to(cont, scope, true, out);
                    out.push(')');
                }
                _ => {
                    out.push('.');
                    orch_to(cont, scope, open, out);
                }
            }
        }
        Orchestrator::Choice(bs) => {
            for (i, b) in bs.iter().enumerate() {
                if i > 0 {
                    out.push_str(" \\/ ");
                }
                let nested = matches!(b, Orchestrator::Choice(_));
                if nested {
                    out.push('(');
                }
                orch_to(b, scope, nested || (open && i + 1 == bs.len()), out);
                if nested {
                    out.push(')');
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::violation::ViolationKind;

    #[test]
    fn mdps_contract() {
        let t = parse_contract("rec X . !tempReq . !humReq . temperature . humidity . X").unwrap();
        let expected = SessionContract::rec(
            "X",
            SessionContract::output(
                "tempReq",
                SessionContract::output(
                    "humReq",
                    SessionContract::input(
                        "temperature",
                        SessionContract::input("humidity", SessionContract::var("X")),
                    ),
                ),
            ),
        );
        assert_eq!(t, expected);
    }

    #[test]
    fn mixed_contract_choice_is_rejected() {
        let e = parse_contract_raw("a + !b").unwrap_err();
        assert!(e.message.contains("mixed"), "{e}");
        assert_eq!(e.span.column, 5);
        assert!(parse_contract_raw("!a + !b").is_err());
        assert!(parse_contract_raw("a + b (+) c").is_err());
    }

    #[test]
    fn internal_choice_and_elision() {
        assert_eq!(
            parse_contract("!a.1 (+) !b.1").unwrap(),
            SessionContract::internal([("a", SessionContract::Success), ("b", SessionContract::Success)])
        );
        assert_eq!(parse_contract("a + b").unwrap(), parse_contract("a.1 + b.1").unwrap());
    }

    #[test]
    fn dot_binds_tighter_than_choice() {
        assert_eq!(
            parse_contract("a.b + c").unwrap(),
            SessionContract::external([
                ("a", SessionContract::input("b", SessionContract::Success)),
                ("c", SessionContract::Success),
            ])
        );
    }

    #[test]
    fn orchestrator_actions() {
        let t = parse_orchestrator("<a,!a>.<b,_>.1").unwrap();
        assert_eq!(
            t,
            Orchestrator::prefix(
                OrchAction::SyncL("a".into()),
                Orchestrator::prefix(OrchAction::InC("b".into()), Orchestrator::Stop)
            )
        );
        let e = parse_orchestrator_raw("<a,!b>.1").unwrap_err();
        assert!(e.message.contains("mismatch"), "{e}");
        assert_eq!((e.span.column, e.span.length), (1, 6));
        assert!(parse_orchestrator_raw("<_,_>").is_err());
        let g = parse_orchestrator("rec X . <a,!a>.X").unwrap();
        assert_eq!(
            g,
            Orchestrator::rec("X", Orchestrator::prefix(OrchAction::SyncL("a".into()), Orchestrator::var("X")))
        );
    }

    #[test]
    fn ill_formed_terms_are_reported_distinctly() {
        match parse_contract("a.1 + a.b.1") {
            Err(Error::IllFormed { violations, .. }) => assert_eq!(
                violations[0].kind,
                ViolationKind::DuplicateBranchName { name: "a".into() }
            ),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_orchestrator(r"<_,a> \/ <b,_>"), Err(Error::IllFormed { .. })));
        assert!(matches!(parse_orchestrator("<a,!b>"), Err(Error::Parse(_))));
    }

    #[test]
    fn comments_and_whitespace() {
        let t = parse_contract("# the client\n!a . # first\n !b\n").unwrap();
        assert_eq!(render_contract(&t), "!a.!b");
    }

    #[test]
    fn rendering() {
        assert_eq!(render_contract(&SessionContract::Success), "1");
        assert_eq!(render_contract(&parse_contract("b.1 + a.1").unwrap()), "a + b");
        assert_eq!(
            render_orchestrator(&Orchestrator::prefix(OrchAction::InS("w".into()), Orchestrator::var("X"))),
            "<_,w>.X"
        );
        assert_eq!(render_orchestrator(&parse_orchestrator("rec Y.<a,!a>.Y").unwrap()), "rec Y . <a,!a>.Y");
    }

    #[test]
    fn rendering_parenthesizes_where_needed() {
        for src in [
            "a.(b + c)",
            "a.(rec X . b.X) + c",
            "a.rec X . b.X + c",
            "rec X . rec Y . a.X + b.Y",
            "!a.(b + c) (+) !d",
        ] {
            let t = parse_contract_raw(src).unwrap();
            let back = parse_contract_raw(&render_contract(&t)).unwrap();
            assert_eq!(back, t, "{src} -> {}", render_contract(&t));
        }
        for src in [
            r"<a,_>.(<b,_> \/ <c,_>)",
            r"<a,_>.(rec X . <b,_>.X) \/ <c,_>",
            r"rec X . <a,_>.rec Y . (<b,_>.X \/ <c,_>.Y)",
            r"<c,!c>.rec X.(<!a,a>.1 \/ <_,b>.<_,c>.X)",
        ] {
            let t = parse_orchestrator_raw(src).unwrap();
            let back = parse_orchestrator_raw(&render_orchestrator(&t)).unwrap();
            assert_eq!(back, t, "{src} -> {}", render_orchestrator(&t));
        }
    }

    #[test]
    fn shadowed_binders_get_fresh_display_names() {
        let t = parse_contract("rec X . a.rec X . b.X").unwrap();
        assert_eq!(render_contract(&t), "rec X . a.rec Y . b.Y");
    }

    #[test]
    fn spans_stay_inside_the_input() {
        for src in ["a +", "<a,", "rec", "(a", "a . ?"] {
            let e = parse_contract_raw(src)
                .err()
                .or_else(|| parse_orchestrator_raw(src).err())
                .unwrap();
            assert_eq!(e.span.line, 1);
            assert!(e.span.column + e.span.length - 1 <= src.chars().count(), "{src}: {e:?}");
        }
    }
}
