use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{BinOp, Func, Node, ParseError, ParseErrorKind};

const MAX_DEPTH: usize = 200;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

impl Tok {
    fn text(&self) -> String {
        match self {
            Tok::Num(v) => alloc::format!("{v}"),
            Tok::Ident(s) => s.clone(),
            Tok::Op(c) => c.to_string(),
            Tok::LParen => "(".into(),
            Tok::RParen => ")".into(),
            Tok::Comma => ",".into(),
        }
    }
}

fn err(position: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { position, kind }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == b'.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                // exponent only if followed by digits (with optional sign)
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &src[start..i];
            let value: f64 = text
                .parse()
                .map_err(|_| err(start, ParseErrorKind::BadNumber(text.into())))?;
            if !value.is_finite() {
                return Err(err(start, ParseErrorKind::BadNumber(text.into())));
            }
            out.push((Tok::Num(value), start));
        } else if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].into()), start));
        } else {
            let tok = match c {
                b'+' | b'-' | b'*' | b'/' | b'^' => Tok::Op(c as char),
                b'(' => Tok::LParen,
                b')' => Tok::RParen,
                b',' => Tok::Comma,
                _ => {
                    let ch = src[start..].chars().next().unwrap_or('?');
                    return Err(err(start, ParseErrorKind::UnexpectedChar(ch)));
                }
            };
            out.push((tok, start));
            i += 1;
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    vars: &'a [&'a str],
    depth: usize,
    end: usize,
}

pub(super) fn parse(src: &str, vars: &[&str]) -> Result<Node, ParseError> {
    let toks = lex(src)?;
    if toks.is_empty() {
        return Err(err(0, ParseErrorKind::Empty));
    }
    let mut p = Parser {
        toks,
        pos: 0,
        vars,
        depth: 0,
        end: src.len(),
    };
    let node = p.expr()?;
    if let Some((tok, at)) = p.toks.get(p.pos) {
        return Err(err(*at, ParseErrorKind::UnexpectedToken(tok.text())));
    }
    Ok(node)
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(_, at)| *at)
    }

    fn bump(&mut self) -> Option<(Tok, usize)> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(err(self.here(), ParseErrorKind::TooDeep));
        }
        Ok(())
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        match self.bump() {
            Some((t, _)) if t == want => Ok(()),
            Some((t, at)) => Err(err(at, ParseErrorKind::UnexpectedToken(t.text()))),
            None => Err(err(self.end, ParseErrorKind::UnexpectedEnd)),
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' { BinOp::Add } else { BinOp::Sub };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek() {
            let op = if *c == '*' { BinOp::Mul } else { BinOp::Div };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        self.enter()?;
        let node = if let Some(Tok::Op('-')) = self.peek() {
            self.pos += 1;
            Node::Neg(Box::new(self.unary()?))
        } else {
            self.power()?
        };
        self.depth -= 1;
        Ok(node)
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.primary()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Node::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node, ParseError> {
        let Some((tok, at)) = self.bump() else {
            return Err(err(self.end, ParseErrorKind::UnexpectedEnd));
        };
        match tok {
            Tok::Num(v) => Ok(Node::Number(v)),
            Tok::LParen => {
                self.enter()?;
                let inner = self.expr()?;
                self.depth -= 1;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if let Some(Tok::LParen) = self.peek() {
                    self.pos += 1;
                    return self.call(name, at);
                }
                if let Some(slot) = self.vars.iter().position(|v| *v == name) {
                    return Ok(Node::Var(slot));
                }
                match name.as_str() {
                    "pi" => Ok(Node::Number(core::f64::consts::PI)),
                    "e" => Ok(Node::Number(core::f64::consts::E)),
                    _ => Err(err(at, ParseErrorKind::UnknownVariable(name))),
                }
            }
            other => Err(err(at, ParseErrorKind::UnexpectedToken(other.text()))),
        }
    }

    fn call(&mut self, name: String, at: usize) -> Result<Node, ParseError> {
        let Some(func) = Func::lookup(&name) else {
            return Err(err(at, ParseErrorKind::UnknownFunction(name)));
        };
        self.enter()?;
        let mut args = Vec::new();
        if let Some(Tok::RParen) = self.peek() {
            self.pos += 1;
        } else {
            loop {
                args.push(self.expr()?);
                match self.bump() {
                    Some((Tok::Comma, _)) => continue,
                    Some((Tok::RParen, _)) => break,
                    Some((t, p)) => return Err(err(p, ParseErrorKind::UnexpectedToken(t.text()))),
                    None => return Err(err(self.end, ParseErrorKind::UnexpectedEnd)),
                }
            }
        }
        self.depth -= 1;
        if args.len() != func.arity() {
            return Err(err(
                at,
                ParseErrorKind::WrongArity {
                    function: name,
                    expected: func.arity(),
                    found: args.len(),
                },
            ));
        }
        Ok(Node::Call(func, args))
    }
}
