//! Reader and writer for the fact format:
//!
//! ```text
//! route(P,I,G,T,MinB,MaxB,S).   setup(G,S,T,MinOps).   pm(G,L,lots|time,Min,Max,T).
//! tool(G,M).                    lot(L,P).
//! ```
//!
//! Only ground facts are accepted. `%` starts a comment running to the end
//! of the line.

use std::fmt::Write as _;

use thiserror::Error;

use super::{BuildError, DeclRef, Instance, MaintenanceSpec, OpSpec, SetupReq, SetupSpec, Term, Trigger};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown predicate {0}")]
    UnknownPredicate(String),
    #[error("{predicate} expects {expected} arguments, found {found}")]
    Arity {
        predicate: String,
        expected: usize,
        found: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("duplicate declaration: {0}")]
    Duplicate(String),
    #[error("dangling reference: {0}")]
    Dangling(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Pos {
    line: usize,
    column: usize,
}

impl Pos {
    fn error(self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            line: self.line,
            column: self.column,
            kind,
        }
    }
}

struct Lexer<'a> {
    src: &'a [u8],
    at: usize,
    line: usize,
    column: usize,
}

#[derive(Debug, PartialEq)]
enum Tok {
    Word(String),
    Punct(u8),
    Eof,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            at: 0,
            line: 1,
            column: 1,
        }
    }

    fn bump(&mut self) -> u8 {
        let b = self.src[self.at];
        self.at += 1;
        if b == b'\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        b
    }

    fn skip_trivia(&mut self) {
        while self.at < self.src.len() {
            match self.src[self.at] {
                b' ' | b'\t' | b'\r' | b'\n' => {
                    self.bump();
                }
                b'%' => {
                    while self.at < self.src.len() && self.src[self.at] != b'\n' {
                        self.bump();
                    }
                }
                _ => break,
            }
        }
    }

    fn next(&mut self) -> Result<(Pos, Tok), ParseError> {
        self.skip_trivia();
        let pos = Pos {
            line: self.line,
            column: self.column,
        };
        if self.at >= self.src.len() {
            return Ok((pos, Tok::Eof));
        }
        let b = self.src[self.at];
        match b {
            b'(' | b')' | b',' | b'.' => {
                self.bump();
                Ok((pos, Tok::Punct(b)))
            }
            b if b.is_ascii_alphanumeric() || b == b'_' => {
                let start = self.at;
                while self.at < self.src.len()
                    && (self.src[self.at].is_ascii_alphanumeric() || self.src[self.at] == b'_')
                {
                    self.bump();
                }
                let word = std::str::from_utf8(&self.src[start..self.at])
                    .expect("ascii")
                    .to_string();
                Ok((pos, Tok::Word(word)))
            }
            _ => {
                let ch = std::str::from_utf8(&self.src[self.at..])
                    .ok()
                    .and_then(|s| s.chars().next())
                    .unwrap_or('?');
                Err(pos.error(ParseErrorKind::Syntax(format!("unexpected character {ch:?}"))))
            }
        }
    }
}

struct Fact {
    pos: Pos,
    predicate: String,
    args: Vec<(Pos, Term)>,
}

fn read_facts(text: &str) -> Result<Vec<Fact>, ParseError> {
    let mut lx = Lexer::new(text);
    let mut facts = Vec::new();
    loop {
        let (pos, tok) = lx.next()?;
        let predicate = match tok {
            Tok::Eof => break,
            Tok::Word(w) if Term::is_symbol(&w) => w,
            Tok::Word(w) => {
                return Err(pos.error(ParseErrorKind::Syntax(format!(
                    "expected a predicate name, found `{w}`"
                ))))
            }
            Tok::Punct(p) => {
                return Err(pos.error(ParseErrorKind::Syntax(format!(
                    "expected a predicate name, found `{}`",
                    p as char
                ))))
            }
        };
        let (p, tok) = lx.next()?;
        if tok != Tok::Punct(b'(') {
            return Err(p.error(ParseErrorKind::Syntax(format!("expected `(` after {predicate}"))));
        }
        let mut args = Vec::new();
        loop {
            let (p, tok) = lx.next()?;
            let term = match tok {
                Tok::Word(w) => w
                    .parse::<Term>()
                    .map_err(|e| p.error(ParseErrorKind::Syntax(e.to_string())))?,
                _ => return Err(p.error(ParseErrorKind::Syntax("expected a term".into()))),
            };
            args.push((p, term));
            let (p, tok) = lx.next()?;
            match tok {
                Tok::Punct(b',') => continue,
                Tok::Punct(b')') => break,
                _ => return Err(p.error(ParseErrorKind::Syntax("expected `,` or `)`".into()))),
            }
        }
        let (p, tok) = lx.next()?;
        if tok != Tok::Punct(b'.') {
            return Err(p.error(ParseErrorKind::Syntax("expected `.` ending the fact".into())));
        }
        facts.push(Fact { pos, predicate, args });
    }
    Ok(facts)
}

fn int_arg<T: TryFrom<u64>>(arg: &(Pos, Term), what: &str) -> Result<T, ParseError> {
    match &arg.1 {
        Term::Int(v) => T::try_from(*v).map_err(|_| {
            arg.0
                .error(ParseErrorKind::InvalidArgument(format!("{what} {v} is out of range")))
        }),
        Term::Sym(s) => Err(arg.0.error(ParseErrorKind::InvalidArgument(format!(
            "{what} must be an integer, found `{s}`"
        )))),
    }
}

/// Parses fact-format text into an [`Instance`].
pub fn parse_facts(text: &str) -> Result<Instance, ParseError> {
    let facts = read_facts(text)?;
    let mut builder = Instance::builder();
    // position of each declaration, by kind, for mapping builder errors back
    let mut positions: [Vec<Pos>; 5] = Default::default();

    for fact in &facts {
        let expected = match fact.predicate.as_str() {
            "route" => 7,
            "setup" => 4,
            "pm" => 6,
            "tool" => 2,
            "lot" => 2,
            other => {
                return Err(fact
                    .pos
                    .error(ParseErrorKind::UnknownPredicate(format!("{other}/{}", fact.args.len()))))
            }
        };
        if fact.args.len() != expected {
            return Err(fact.pos.error(ParseErrorKind::Arity {
                predicate: fact.predicate.clone(),
                expected,
                found: fact.args.len(),
            }));
        }
        let a = &fact.args;
        match fact.predicate.as_str() {
            "route" => {
                let index: u32 = int_arg(&a[1], "route index")?;
                if index == 0 {
                    return Err(a[1]
                        .0
                        .error(ParseErrorKind::InvalidArgument("route index must be positive".into())));
                }
                let setup = match &a[6].1 {
                    Term::Int(0) => SetupReq::Any,
                    t => SetupReq::Setup(super::SetupId(t.clone())),
                };
                builder.route_step(OpSpec {
                    product: super::ProductId(a[0].1.clone()),
                    index,
                    group: super::ToolGroupId(a[2].1.clone()),
                    proc_time: int_arg(&a[3], "processing time")?,
                    min_batch: int_arg(&a[4], "minimum batch size")?,
                    max_batch: int_arg(&a[5], "maximum batch size")?,
                    setup,
                });
                positions[0].push(fact.pos);
            }
            "setup" => {
                if a[1].1 == Term::Int(0) {
                    return Err(a[1].0.error(ParseErrorKind::InvalidArgument(
                        "setup 0 is reserved for operations without setup requirement".into(),
                    )));
                }
                builder.setup(SetupSpec {
                    group: super::ToolGroupId(a[0].1.clone()),
                    id: super::SetupId(a[1].1.clone()),
                    change_time: int_arg(&a[2], "setup time")?,
                    min_ops: int_arg(&a[3], "minimum operation count")?,
                });
                positions[1].push(fact.pos);
            }
            "pm" => {
                let trigger = match &a[2].1 {
                    Term::Sym(s) if s == "lots" => Trigger::Lots,
                    Term::Sym(s) if s == "time" => Trigger::Time,
                    t => {
                        return Err(a[2].0.error(ParseErrorKind::InvalidArgument(format!(
                            "maintenance type must be `lots` or `time`, found `{t}`"
                        ))))
                    }
                };
                builder.maintenance(MaintenanceSpec {
                    group: super::ToolGroupId(a[0].1.clone()),
                    label: super::MaintLabel(a[1].1.clone()),
                    trigger,
                    min: int_arg(&a[3], "maintenance minimum")?,
                    max: int_arg(&a[4], "maintenance maximum")?,
                    duration: int_arg(&a[5], "maintenance duration")?,
                });
                positions[2].push(fact.pos);
            }
            "tool" => {
                builder.machine(super::ToolGroupId(a[0].1.clone()), super::MachineId(a[1].1.clone()));
                positions[3].push(fact.pos);
            }
            "lot" => {
                builder.lot(super::LotId(a[0].1.clone()), super::ProductId(a[1].1.clone()));
                positions[4].push(fact.pos);
            }
            _ => unreachable!(),
        }
    }

    builder.build().map_err(|err| {
        let pos = match err.decl() {
            DeclRef::Route(n) => positions[0][n],
            DeclRef::Setup(n) => positions[1][n],
            DeclRef::Maintenance(n) => positions[2][n],
            DeclRef::Machine(n) => positions[3][n],
            DeclRef::Lot(n) => positions[4][n],
        };
        let kind = match err {
            BuildError::Duplicate { what, .. } => ParseErrorKind::Duplicate(what),
            BuildError::Dangling { what, .. } => ParseErrorKind::Dangling(what),
        };
        pos.error(kind)
    })
}

/// Writes the instance as facts, one per line, grouped by predicate in the
/// order route, setup, pm, tool, lot. Within a predicate, facts are sorted
/// by their arguments, except that machines keep their declaration order
/// within a tool group (it is significant for preallocation).
pub fn serialize_facts(inst: &Instance) -> String {
    let mut out = String::new();
    for route in inst.routes.values() {
        for op in &route.steps {
            let _ = writeln!(
                out,
                "route({},{},{},{},{},{},{}).",
                op.product, op.index, op.group, op.proc_time, op.min_batch, op.max_batch, op.setup
            );
        }
    }
    for s in inst.setups.values() {
        let _ = writeln!(out, "setup({},{},{},{}).", s.group, s.id, s.change_time, s.min_ops);
    }
    for list in inst.maints.values() {
        for m in list {
            let _ = writeln!(
                out,
                "pm({},{},{},{},{},{}).",
                m.group, m.label, m.trigger, m.min, m.max, m.duration
            );
        }
    }
    for list in inst.machines.values() {
        for m in list {
            let _ = writeln!(out, "tool({},{}).", m.group, m.id);
        }
    }
    for lot in &inst.lots {
        let _ = writeln!(out, "lot({},{}).", lot.id, lot.product);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::REFERENCE_FACTS;

    #[test]
    fn parses_reference_instance() {
        let inst = parse_facts(REFERENCE_FACTS).unwrap();
        assert_eq!(inst.routes.len(), 1);
        assert_eq!(inst.routes.values().next().unwrap().len(), 5);
        assert_eq!(inst.machines.len(), 3);
        assert!(inst.machines.values().all(|m| m.len() == 1));
        assert_eq!(inst.setups.len(), 3);
        assert_eq!(inst.maints.values().map(Vec::len).sum::<usize>(), 3);
        assert_eq!(inst.lots.len(), 2);
        let op1 = inst.op(&1u64.into(), 1).unwrap();
        assert_eq!(op1.setup, SetupReq::Any);
        assert_eq!((op1.min_batch, op1.max_batch, op1.proc_time), (2, 4, 20));
    }

    #[test]
    fn lone_lot_is_dangling() {
        let err = parse_facts("lot(1,1).").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::Dangling(_)), "{err}");
        assert_eq!((err.line, err.column), (1, 1));
    }

    #[test]
    fn route_to_undeclared_group_is_dangling() {
        let err = parse_facts("route(1,1,g,5,1,1,0).").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::Dangling(_)));
    }

    #[test]
    fn syntax_errors_report_position() {
        let err = parse_facts("tool(g,1).\n  tool(g 2).").unwrap_err();
        assert_eq!((err.line, err.column), (2, 10));
        assert!(matches!(err.kind, ParseErrorKind::Syntax(_)));

        let err = parse_facts("tool(g,1)").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::Syntax(_)));

        let err = parse_facts("tool(G,1).").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::Syntax(_)));

        let err = parse_facts("p(X) :- q(X).").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::Syntax(_)));
    }

    #[test]
    fn arity_and_predicate_errors() {
        let err = parse_facts("tool(g).").unwrap_err();
        assert!(matches!(
            err.kind,
            ParseErrorKind::Arity {
                expected: 2,
                found: 1,
                ..
            }
        ));
        let err = parse_facts("machine(g,1).").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::UnknownPredicate(_)));
    }

    #[test]
    fn duplicate_and_reserved_setup() {
        let err = parse_facts("tool(g,1). tool(g,1).").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::Duplicate(_)));
        assert_eq!(err.column, 12);
        let err = parse_facts("tool(g,1). setup(g,0,5,1).").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::InvalidArgument(_)));
        let err = parse_facts("tool(g,1). pm(g,x,hours,1,2,3).").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::InvalidArgument(_)));
    }

    #[test]
    fn comments_and_whitespace() {
        let inst = parse_facts("% header\n tool( g , 1 ) . % trailing\n\n").unwrap();
        assert_eq!(inst.machine_count(), 1);
    }

    #[test]
    fn serialize_edge_cases() {
        assert_eq!(serialize_facts(&Instance::default()), "");
        let inst = parse_facts("tool(g,1).").unwrap();
        assert_eq!(serialize_facts(&inst), "tool(g,1).\n");
    }

    #[test]
    fn reference_instance_round_trips() {
        let inst = parse_facts(REFERENCE_FACTS).unwrap();
        let text = serialize_facts(&inst);
        assert!(text.contains("route(1,1,diffusion_fe_120,20,2,4,0)."));
        assert_eq!(parse_facts(&text).unwrap(), inst);
        assert_eq!(serialize_facts(&parse_facts(&text).unwrap()), text);
    }

    #[test]
    fn machine_declaration_order_survives() {
        let inst = parse_facts("tool(g,3). tool(g,1). tool(g,2).").unwrap();
        let text = serialize_facts(&inst);
        assert_eq!(text, "tool(g,3).\ntool(g,1).\ntool(g,2).\n");
        assert_eq!(parse_facts(&text).unwrap(), inst);
    }
}
