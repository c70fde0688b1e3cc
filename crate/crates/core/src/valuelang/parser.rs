//! Recursive-descent parser for value expressions.
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | primary ;
//! primary = number
//!         | ("min" | "max") "(" expr "," expr ")"
//!         | "count" "(" ident ")"
//!         | ident
//!         | "(" expr ")" ;
//! ident   = letter { letter | digit | "_" | "." } ;
//! number  = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ] ;
//! ```
//!
//! `×` and `÷` are accepted as aliases of `*` and `/`. Offsets in errors are
//! character offsets into the input.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            Self::Add => '+',
            Self::Sub => '-',
            Self::Mul => '*',
            Self::Div => '/',
        }
    }

    fn precedence(self) -> u8 {
        match self {
            Self::Add | Self::Sub => 1,
            Self::Mul | Self::Div => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ValueExpr {
    Number(f64),
    Measure(String),
    Count(String),
    Neg(Box<ValueExpr>),
    Binary(BinOp, Box<ValueExpr>, Box<ValueExpr>),
    Call(Func, Box<ValueExpr>, Box<ValueExpr>),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("syntax error at offset {offset}: {message}")]
pub struct SyntaxError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
}

impl Lexer {
    fn err<T>(&self, offset: usize, message: impl Into<String>) -> Result<T, SyntaxError> {
        Err(SyntaxError { offset, message: message.into() })
    }

    fn next(&mut self) -> Result<(usize, Tok), SyntaxError> {
        while self.chars.get(self.pos).is_some_and(|c| c.is_whitespace()) {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = self.chars.get(self.pos) else {
            return Ok((start, Tok::End));
        };
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            '+' | '-' | '*' | '/' => Tok::Op(c),
            '×' => Tok::Op('*'),
            '÷' => Tok::Op('/'),
            d if d.is_ascii_digit() || d == '.' => return self.number(start),
            a if a.is_alphabetic() || a == '_' => {
                while self
                    .chars
                    .get(self.pos)
                    .is_some_and(|c| c.is_alphanumeric() || *c == '_' || *c == '.')
                {
                    self.pos += 1;
                }
                return Ok((start, Tok::Ident(self.chars[start..self.pos].iter().collect())));
            }
            other => return self.err(start, format!("unexpected character {other:?}")),
        };
        self.pos += 1;
        Ok((start, tok))
    }

    fn digits(&mut self) -> usize {
        let from = self.pos;
        while self.chars.get(self.pos).is_some_and(char::is_ascii_digit) {
            self.pos += 1;
        }
        self.pos - from
    }

    fn number(&mut self, start: usize) -> Result<(usize, Tok), SyntaxError> {
        let mut n = self.digits();
        if self.chars.get(self.pos) == Some(&'.') {
            self.pos += 1;
            n += self.digits();
        }
        if n == 0 {
            return self.err(start, "malformed number");
        }
        if matches!(self.chars.get(self.pos), Some('e' | 'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.chars.get(self.pos), Some('+' | '-')) {
                self.pos += 1;
            }
            if self.digits() == 0 {
                self.pos = save;
                return self.err(save, "malformed exponent");
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse::<f64>()
            .map(|v| (start, Tok::Num(v)))
            .or_else(|_| self.err(start, format!("malformed number {text:?}")))
    }
}

struct Parser {
    lexer: Lexer,
    peeked: (usize, Tok),
}

const MAX_DEPTH: usize = 256;

impl Parser {
    fn new(text: &str) -> Result<Self, SyntaxError> {
        let mut lexer = Lexer { chars: text.chars().collect(), pos: 0 };
        let peeked = lexer.next()?;
        Ok(Self { lexer, peeked })
    }

    fn bump(&mut self) -> Result<(usize, Tok), SyntaxError> {
        let next = self.lexer.next()?;
        Ok(std::mem::replace(&mut self.peeked, next))
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), SyntaxError> {
        let (at, tok) = self.bump()?;
        if tok == want {
            Ok(())
        } else {
            Err(SyntaxError { offset: at, message: format!("expected {what}, found {}", describe(&tok)) })
        }
    }

    fn expr(&mut self, depth: usize) -> Result<ValueExpr, SyntaxError> {
        if depth > MAX_DEPTH {
            return Err(SyntaxError { offset: self.peeked.0, message: "expression nested too deeply".into() });
        }
        let mut lhs = self.term(depth)?;
        while let Tok::Op(c @ ('+' | '-')) = self.peeked.1 {
            self.bump()?;
            let rhs = self.term(depth)?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = ValueExpr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self, depth: usize) -> Result<ValueExpr, SyntaxError> {
        let mut lhs = self.unary(depth)?;
        while let Tok::Op(c @ ('*' | '/')) = self.peeked.1 {
            self.bump()?;
            let rhs = self.unary(depth)?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = ValueExpr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self, depth: usize) -> Result<ValueExpr, SyntaxError> {
        if self.peeked.1 == Tok::Op('-') {
            self.bump()?;
            if depth > MAX_DEPTH {
                return Err(SyntaxError { offset: self.peeked.0, message: "expression nested too deeply".into() });
            }
            return Ok(ValueExpr::Neg(Box::new(self.unary(depth + 1)?)));
        }
        self.primary(depth)
    }

    fn primary(&mut self, depth: usize) -> Result<ValueExpr, SyntaxError> {
        let (at, tok) = self.bump()?;
        match tok {
            Tok::Num(v) => Ok(ValueExpr::Number(v)),
            Tok::LParen => {
                let inner = self.expr(depth + 1)?;
                self.expect(Tok::RParen, "')'")?;
                Ok(inner)
            }
            Tok::Ident(name) if self.peeked.1 == Tok::LParen => {
                self.bump()?;
                match name.as_str() {
                    "min" | "max" => {
                        let a = self.expr(depth + 1)?;
                        self.expect(Tok::Comma, "','")?;
                        let b = self.expr(depth + 1)?;
                        self.expect(Tok::RParen, "')'")?;
                        let f = if name == "min" { Func::Min } else { Func::Max };
                        Ok(ValueExpr::Call(f, Box::new(a), Box::new(b)))
                    }
                    "count" => {
                        let (kat, ktok) = self.bump()?;
                        let Tok::Ident(kind) = ktok else {
                            return Err(SyntaxError {
                                offset: kat,
                                message: format!("expected event kind, found {}", describe(&ktok)),
                            });
                        };
                        self.expect(Tok::RParen, "')'")?;
                        Ok(ValueExpr::Count(kind))
                    }
                    _ => Err(SyntaxError { offset: at, message: format!("unknown function {name:?}") }),
                }
            }
            Tok::Ident(name) => Ok(ValueExpr::Measure(name)),
            other => Err(SyntaxError { offset: at, message: format!("expected a value, found {}", describe(&other)) }),
        }
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("identifier {s:?}"),
        Tok::Op(c) => format!("'{c}'"),
        Tok::LParen => "'('".into(),
        Tok::RParen => "')'".into(),
        Tok::Comma => "','".into(),
        Tok::End => "end of input".into(),
    }
}

/// Parse an expression. Identifiers are not resolved here.
pub fn parse(text: &str) -> Result<ValueExpr, SyntaxError> {
    let mut p = Parser::new(text)?;
    let e = p.expr(0)?;
    match &p.peeked {
        (_, Tok::End) => Ok(e),
        (at, tok) => Err(SyntaxError { offset: *at, message: format!("unexpected {}", describe(tok)) }),
    }
}

impl ValueExpr {
    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, parent: u8, right: bool) -> fmt::Result {
        match self {
            Self::Number(v) => write!(f, "{v}"),
            Self::Measure(m) => f.write_str(m),
            Self::Count(k) => write!(f, "count({k})"),
            Self::Neg(inner) => {
                f.write_str("-")?;
                inner.fmt_prec(f, 3, false)
            }
            Self::Call(func, a, b) => {
                f.write_str(match func {
                    Func::Min => "min(",
                    Func::Max => "max(",
                })?;
                a.fmt_prec(f, 0, false)?;
                f.write_str(", ")?;
                b.fmt_prec(f, 0, false)?;
                f.write_str(")")
            }
            Self::Binary(op, a, b) => {
                let p = op.precedence();
                let wrap = p < parent || (right && p == parent);
                if wrap {
                    f.write_str("(")?;
                }
                a.fmt_prec(f, p, false)?;
                write!(f, " {} ", op.symbol())?;
                b.fmt_prec(f, p, true)?;
                if wrap {
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }

    /// Every measure name the expression reads, including `count(...)`.
    pub fn references(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect(&self, out: &mut Vec<String>) {
        match self {
            Self::Number(_) => {}
            Self::Measure(m) => out.push(m.clone()),
            Self::Count(k) => out.push(format!("count({k})")),
            Self::Neg(a) => a.collect(out),
            Self::Binary(_, a, b) | Self::Call(_, a, b) => {
                a.collect(out);
                b.collect(out);
            }
        }
    }
}

/// Minimal-parenthesis rendering that parses back to the same tree.
impl fmt::Display for ValueExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0, false)
    }
}
