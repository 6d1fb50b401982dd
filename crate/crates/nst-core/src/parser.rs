//! Recursive-descent parser for the ASCII formula grammar.
//!
//! Precedence, tightest first: `not`, `and`, `or`, `->` (right
//! associative), `<->`. Quantifier scope extends maximally to the right;
//! parentheses override. `notin`, `!=` and `sub` are sugar for a negation
//! and a bounded universal; `t != emptyset` is sugar for non-emptiness.

use crate::syntax::{
    and, eq, exists, forall, fresh_name, iff, implies, mem, not, or, Formula, Term,
};
use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub expected: Vec<String>,
    pub found: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}: expected {}, found {}",
            self.line,
            self.col,
            self.expected.join(" | "),
            self.found
        )
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Forall,
    Exists,
    Not,
    And,
    Or,
    Arrow,
    DArrow,
    In,
    NotIn,
    Eq,
    Neq,
    Sub,
    Upair,
    Opair,
    Extr,
    Emptyset,
    LParen,
    RParen,
    Comma,
    Dot,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Forall => "`forall`".into(),
            Tok::Exists => "`exists`".into(),
            Tok::Not => "`not`".into(),
            Tok::And => "`and`".into(),
            Tok::Or => "`or`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::DArrow => "`<->`".into(),
            Tok::In => "`in`".into(),
            Tok::NotIn => "`notin`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Neq => "`!=`".into(),
            Tok::Sub => "`sub`".into(),
            Tok::Upair => "`upair`".into(),
            Tok::Opair => "`opair`".into(),
            Tok::Extr => "`extr`".into(),
            Tok::Emptyset => "`emptyset`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_cont(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '+' | '\'' | '-')
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn peek_char(&self) -> Option<char> {
        self.src.get(self.pos).map(|&b| b as char)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek_char()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn tokens(mut self) -> Result<Vec<(Tok, usize, usize)>, ParseError> {
        let mut out = Vec::new();
        loop {
            while let Some(c) = self.peek_char() {
                if c == '#' {
                    // Comment to end of line.
                    while let Some(c) = self.peek_char() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                } else if c.is_ascii_whitespace() {
                    self.bump();
                } else {
                    break;
                }
            }
            let (line, col) = (self.line, self.col);
            let Some(c) = self.peek_char() else {
                out.push((Tok::Eof, line, col));
                return Ok(out);
            };
            let tok = if is_ident_start(c) {
                let mut name = String::new();
                while let Some(c) = self.peek_char() {
                    if !is_ident_cont(c) {
                        break;
                    }
                    // `-` is an identifier character except when it starts
                    // an `->` token.
                    if c == '-' && self.src.get(self.pos + 1) == Some(&b'>') {
                        break;
                    }
                    name.push(c);
                    self.bump();
                }
                match name.as_str() {
                    "forall" => Tok::Forall,
                    "exists" => Tok::Exists,
                    "not" => Tok::Not,
                    "and" => Tok::And,
                    "or" => Tok::Or,
                    "in" => Tok::In,
                    "notin" => Tok::NotIn,
                    "sub" => Tok::Sub,
                    "upair" => Tok::Upair,
                    "opair" => Tok::Opair,
                    "extr" => Tok::Extr,
                    "emptyset" => Tok::Emptyset,
                    _ => Tok::Ident(name),
                }
            } else {
                match c {
                    '(' => {
                        self.bump();
                        Tok::LParen
                    }
                    ')' => {
                        self.bump();
                        Tok::RParen
                    }
                    ',' => {
                        self.bump();
                        Tok::Comma
                    }
                    '.' => {
                        self.bump();
                        Tok::Dot
                    }
                    '=' => {
                        self.bump();
                        Tok::Eq
                    }
                    '!' => {
                        self.bump();
                        if self.peek_char() == Some('=') {
                            self.bump();
                            Tok::Neq
                        } else {
                            return Err(ParseError {
                                line,
                                col,
                                expected: vec!["`!=`".into()],
                                found: "`!`".into(),
                            });
                        }
                    }
                    '-' => {
                        self.bump();
                        if self.peek_char() == Some('>') {
                            self.bump();
                            Tok::Arrow
                        } else {
                            return Err(ParseError {
                                line,
                                col,
                                expected: vec!["`->`".into()],
                                found: "`-`".into(),
                            });
                        }
                    }
                    '<' => {
                        self.bump();
                        if self.peek_char() == Some('-') {
                            self.bump();
                            if self.peek_char() == Some('>') {
                                self.bump();
                                Tok::DArrow
                            } else {
                                return Err(ParseError {
                                    line,
                                    col,
                                    expected: vec!["`<->`".into()],
                                    found: "`<-`".into(),
                                });
                            }
                        } else {
                            return Err(ParseError {
                                line,
                                col,
                                expected: vec!["`<->`".into()],
                                found: "`<`".into(),
                            });
                        }
                    }
                    other => {
                        return Err(ParseError {
                            line,
                            col,
                            expected: vec!["token".into()],
                            found: format!("`{other}`"),
                        })
                    }
                }
            };
            out.push((tok, line, col));
        }
    }
}

struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, expected: Vec<&str>) -> ParseError {
        let (tok, line, col) = &self.toks[self.pos];
        ParseError {
            line: *line,
            col: *col,
            expected: expected.into_iter().map(String::from).collect(),
            found: tok.describe(),
        }
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            Err(self.err(vec![what]))
        }
    }

    fn formula(&mut self) -> Result<Formula, ParseError> {
        self.iff_level()
    }

    fn iff_level(&mut self) -> Result<Formula, ParseError> {
        let mut l = self.imp_level()?;
        while *self.peek() == Tok::DArrow {
            self.bump();
            let r = self.imp_level()?;
            l = iff(l, r);
        }
        Ok(l)
    }

    fn imp_level(&mut self) -> Result<Formula, ParseError> {
        let l = self.or_level()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let r = self.imp_level()?; // right associative
            Ok(implies(l, r))
        } else {
            Ok(l)
        }
    }

    fn or_level(&mut self) -> Result<Formula, ParseError> {
        let mut l = self.and_level()?;
        while *self.peek() == Tok::Or {
            self.bump();
            let r = self.and_level()?;
            l = or(l, r);
        }
        Ok(l)
    }

    fn and_level(&mut self) -> Result<Formula, ParseError> {
        let mut l = self.unary()?;
        while *self.peek() == Tok::And {
            self.bump();
            let r = self.unary()?;
            l = and(l, r);
        }
        Ok(l)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        match self.peek() {
            Tok::Not => {
                self.bump();
                Ok(not(self.unary()?))
            }
            Tok::Forall | Tok::Exists => {
                let is_forall = *self.peek() == Tok::Forall;
                self.bump();
                let v = match self.peek().clone() {
                    Tok::Ident(v) => {
                        self.bump();
                        v
                    }
                    _ => return Err(self.err(vec!["bound variable"])),
                };
                self.expect(Tok::Dot, "`.`")?;
                // Quantifier scope extends maximally to the right.
                let body = self.iff_level()?;
                Ok(if is_forall {
                    forall(v, body)
                } else {
                    exists(v, body)
                })
            }
            Tok::LParen => {
                self.bump();
                let f = self.iff_level()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(f)
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Formula, ParseError> {
        let t1 = self.term()?;
        let relop = self.peek().clone();
        if !matches!(relop, Tok::In | Tok::NotIn | Tok::Eq | Tok::Neq | Tok::Sub) {
            return Err(self.err(vec!["`in`", "`notin`", "`=`", "`!=`", "`sub`"]));
        }
        self.bump();
        match relop {
            Tok::In => Ok(mem(t1, self.term()?)),
            Tok::NotIn => Ok(not(mem(t1, self.term()?))),
            Tok::Eq => Ok(eq(t1, self.term()?)),
            Tok::Neq => {
                if *self.peek() == Tok::Emptyset {
                    self.bump();
                    // t != emptyset  ~>  exists w. w in t
                    let mut used = BTreeSet::new();
                    t1.vars(&mut used);
                    let w = fresh_name("w", &used);
                    Ok(exists(&w, mem(Term::var(&w), t1)))
                } else {
                    Ok(not(eq(t1, self.term()?)))
                }
            }
            Tok::Sub => {
                // a sub b  ~>  forall z. (z in a -> z in b)
                let t2 = self.term()?;
                let mut used = BTreeSet::new();
                t1.vars(&mut used);
                t2.vars(&mut used);
                let z = fresh_name("z", &used);
                Ok(forall(
                    &z,
                    implies(mem(Term::var(&z), t1), mem(Term::var(&z), t2)),
                ))
            }
            _ => unreachable!(),
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                Ok(Term::Var(name))
            }
            Tok::Upair => {
                self.bump();
                let (a, b) = self.term_pair()?;
                Ok(Term::Upair(Box::new(a), Box::new(b)))
            }
            Tok::Opair => {
                self.bump();
                let (a, b) = self.term_pair()?;
                Ok(Term::Opair(Box::new(a), Box::new(b)))
            }
            Tok::Extr => {
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                let a = self.term()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(Term::Extr(Box::new(a)))
            }
            _ => Err(self.err(vec!["term"])),
        }
    }

    fn term_pair(&mut self) -> Result<(Term, Term), ParseError> {
        self.expect(Tok::LParen, "`(`")?;
        let a = self.term()?;
        self.expect(Tok::Comma, "`,`")?;
        let b = self.term()?;
        self.expect(Tok::RParen, "`)`")?;
        Ok((a, b))
    }
}

/// Parses a single formula. All identifiers come back as variables;
/// constants are resolved against a fragment signature by the caller
/// (see [`crate::syntax::mark_constants`]).
pub fn parse(text: &str) -> Result<Formula, ParseError> {
    let toks = Lexer::new(text).tokens()?;
    let mut p = Parser { toks, pos: 0 };
    let f = p.formula()?;
    p.expect(Tok::Eof, "end of input")?;
    Ok(f)
}

/// Parses an `.nst` document: one sentence per line, `#` comments.
/// Returns `(line_number, formula)` pairs.
pub fn parse_document(text: &str) -> Result<Vec<(usize, Formula)>, ParseError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let stripped = match line.find('#') {
            Some(p) => &line[..p],
            None => line,
        };
        if stripped.trim().is_empty() {
            continue;
        }
        let f = parse(stripped).map_err(|e| ParseError {
            line: i + 1,
            col: e.col,
            expected: e.expected,
            found: e.found,
        })?;
        out.push((i + 1, f));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{forall, Formula};

    #[test]
    fn smallest_sentence() {
        let f = parse("forall x. x = x").unwrap();
        assert_eq!(f, forall("x", eq(Term::var("x"), Term::var("x"))));
    }

    #[test]
    fn russell_instance() {
        let f = parse("exists y. forall x. (x in y <-> not x in x)").unwrap();
        let g = parse("exists y. forall x. (x in y <-> x notin x)").unwrap();
        assert_eq!(f, g);
        assert_eq!(f.to_string(), "exists y. forall x. (x in y <-> not x in x)");
    }

    #[test]
    fn arrow_binds_tighter_than_iff() {
        let f = parse("x in y -> y in x <-> z = z").unwrap();
        match f {
            Formula::Iff(l, r) => {
                assert!(matches!(*l, Formula::Implies(..)));
                assert!(matches!(*r, Formula::Eq(..)));
            }
            other => panic!("unexpected shape: {other:?}"),
        }
    }

    #[test]
    fn arrow_right_assoc() {
        let f = parse("x = x -> y = y -> z = z").unwrap();
        match f {
            Formula::Implies(_, r) => assert!(matches!(*r, Formula::Implies(..))),
            other => panic!("unexpected shape: {other:?}"),
        }
    }

    #[test]
    fn quantifier_scope_maximal() {
        let f = parse("forall x. x in y and x = x").unwrap();
        assert!(matches!(f, Formula::Forall(..)));
    }

    #[test]
    fn sub_sugar() {
        let f = parse("a sub b").unwrap();
        assert_eq!(f.to_string(), "forall z. (z in a -> z in b)");
        // Fresh variable avoids the operands.
        let f = parse("z sub b").unwrap();
        assert_eq!(f.to_string(), "forall z0. (z0 in z -> z0 in b)");
    }

    #[test]
    fn nonempty_sugar() {
        let f = parse("s != emptyset").unwrap();
        assert_eq!(f.to_string(), "exists w. w in s");
    }

    #[test]
    fn hyphen_in_identifier_vs_arrow() {
        let f = parse("H- in H- -> H- = H-").unwrap();
        assert!(matches!(f, Formula::Implies(..)));
        let g = parse("x in y->y in x").unwrap();
        assert!(matches!(g, Formula::Implies(..)));
    }

    #[test]
    fn error_position() {
        let e = parse("forall x. x in").unwrap_err();
        assert_eq!(e.line, 1);
        assert!(!e.expected.is_empty());
    }

    #[test]
    fn comments_and_blank_lines() {
        let doc = "# a comment\nforall x. x = x\n\nx in y # trailing\n";
        let fs = parse_document(doc).unwrap();
        assert_eq!(fs.len(), 2);
        assert_eq!(fs[0].0, 2);
        assert_eq!(fs[1].0, 4);
    }
}
