//! Recursive-descent parser for the expression grammar:
//!
//! ```text
//! expr   = term { ("+"|"-") term } ;
//! term   = factor { ("*"|"/") factor } ;
//! factor = ["-"] power ;
//! power  = atom [ "^" factor ] ;
//! atom   = NUMBER | "x" | "y" | "(" expr ")" | IDENT "(" expr { "," expr } ")" ;
//! ```

use thiserror::Error;

use super::{BinOp, Expr, Func, Var};

const MAX_DEPTH: usize = 200;
// Bounds the depth of left-nested operator chains such as `x+x+...+x`.
const MAX_TOKENS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at position {position}: expected {expected}")]
    Syntax { position: usize, expected: String },
    #[error("unknown function `{name}` at position {position}")]
    UnknownFunction { name: String, position: usize },
    #[error("`{name}` takes {expected} argument(s), got {found} (position {position})")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
        position: usize,
    },
}

impl ParseError {
    pub fn position(&self) -> usize {
        match self {
            ParseError::Syntax { position, .. }
            | ParseError::UnknownFunction { position, .. }
            | ParseError::Arity { position, .. } => *position,
        }
    }
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

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Op(c) => format!("`{c}`"),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::End => "end of input".into(),
    }
}

fn syntax(position: usize, expected: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        position,
        expected: expected.into(),
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        match c {
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                out.push((Tok::Op(c as char), start));
                i += 1;
            }
            b'(' => {
                out.push((Tok::LParen, start));
                i += 1;
            }
            b')' => {
                out.push((Tok::RParen, start));
                i += 1;
            }
            b',' => {
                out.push((Tok::Comma, start));
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                let digits = |i: &mut usize| {
                    let s = *i;
                    while *i < bytes.len() && bytes[*i].is_ascii_digit() {
                        *i += 1;
                    }
                    *i - s
                };
                let mut n = digits(&mut i);
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    n += digits(&mut i);
                }
                if n == 0 {
                    return Err(syntax(start, "digit"));
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    i += 1;
                    if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
                        i += 1;
                    }
                    if digits(&mut i) == 0 {
                        return Err(syntax(i, "exponent digits"));
                    }
                }
                let value: f64 = text[start..i]
                    .parse()
                    .map_err(|_| syntax(start, "decimal literal"))?;
                if !value.is_finite() {
                    return Err(syntax(start, "finite number"));
                }
                out.push((Tok::Num(value), start));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(text[start..i].to_string()), start));
            }
            _ => return Err(syntax(start, "token")),
        }
    }
    if out.len() > MAX_TOKENS {
        return Err(syntax(out[MAX_TOKENS].1, "shorter expression"));
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    depth: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(syntax(
                self.offset(),
                format!("{what}, found {}", describe(self.peek())),
            ))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(syntax(self.offset(), "shallower nesting"));
        }
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => break,
            };
            self.bump();
            lhs = Expr::binary(op, lhs, self.term()?);
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => break,
            };
            self.bump();
            lhs = Expr::binary(op, lhs, self.factor()?);
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            Ok(Expr::Neg(Box::new(self.power()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            self.depth += 1;
            if self.depth > MAX_DEPTH {
                return Err(syntax(self.offset(), "shallower nesting"));
            }
            let exp = self.factor()?;
            self.depth -= 1;
            Ok(Expr::binary(BinOp::Pow, base, exp))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let at = self.offset();
        match self.bump() {
            Tok::Num(v) => Ok(Expr::Number(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => match name.as_str() {
                "x" => Ok(Expr::Var(Var::X)),
                "y" => Ok(Expr::Var(Var::Y)),
                _ => {
                    let func =
                        Func::from_name(&name).ok_or_else(|| ParseError::UnknownFunction {
                            name: name.clone(),
                            position: at,
                        })?;
                    self.expect(Tok::LParen, "`(` after function name")?;
                    let mut args = vec![self.expr()?];
                    while *self.peek() == Tok::Comma {
                        self.bump();
                        args.push(self.expr()?);
                    }
                    self.expect(Tok::RParen, "`,` or `)`")?;
                    if args.len() != func.arity() {
                        return Err(ParseError::Arity {
                            name,
                            expected: func.arity(),
                            found: args.len(),
                            position: at,
                        });
                    }
                    Ok(Expr::Call(func, args))
                }
            },
            other => Err(syntax(
                at,
                format!(
                    "number, variable, `(` or function, found {}",
                    describe(&other)
                ),
            )),
        }
    }
}

/// Parses expression text. Positions in errors are byte offsets.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        depth: 0,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(syntax(
            p.offset(),
            format!("operator or end of input, found {}", describe(p.peek())),
        ));
    }
    Ok(e)
}
