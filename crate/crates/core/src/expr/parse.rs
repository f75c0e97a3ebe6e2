use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow};
use thiserror::Error;

use super::{Expr, Func, Number, SymbolTable};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Unexpected(String),
    UnexpectedEnd,
    UnknownIdentifier(String),
    UnknownFunction(String),
    MalformedNumber(String),
    BadExponent(String),
    Arity { name: String, expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{} at offset {offset}", describe(.kind))]
pub struct ParseError {
    /// Byte offset into the input.
    pub offset: usize,
    pub kind: ParseErrorKind,
}

fn describe(k: &ParseErrorKind) -> String {
    match k {
        ParseErrorKind::Unexpected(t) => format!("syntax error: unexpected `{t}`"),
        ParseErrorKind::UnexpectedEnd => "syntax error: unexpected end of input".into(),
        ParseErrorKind::UnknownIdentifier(n) => format!("unknown identifier `{n}`"),
        ParseErrorKind::UnknownFunction(n) => format!("unknown function `{n}`"),
        ParseErrorKind::MalformedNumber(n) => format!("malformed number `{n}`"),
        ParseErrorKind::BadExponent(n) => format!("exponent must be an unsigned integer, found `{n}`"),
        ParseErrorKind::Arity { name, expected, found } => {
            format!("`{name}` takes {expected} argument(s), found {found}")
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(String),
    Ident(String),
    Op(char),
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn digits(&mut self) -> usize {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        self.pos - start
    }

    fn next(&mut self) -> Result<(usize, Tok), ParseError> {
        self.skip_ws();
        let start = self.pos;
        let Some(&c) = self.src.get(self.pos) else {
            return Ok((start, Tok::End));
        };
        let text = |l: &Self| String::from_utf8_lossy(&l.src[start..l.pos]).into_owned();
        if c.is_ascii_digit() {
            self.digits();
            let mut ok = true;
            if self.src.get(self.pos) == Some(&b'.') {
                self.pos += 1;
                ok &= self.digits() > 0;
            }
            if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
                self.pos += 1;
                if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                    self.pos += 1;
                }
                ok &= self.digits() > 0;
            }
            // Trailing junk glued to a number ("1.2.3", "3e") is malformed, not two tokens.
            if matches!(self.src.get(self.pos), Some(b'.')) {
                self.pos += 1;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'.')
                {
                    self.pos += 1;
                }
                ok = false;
            }
            if !ok {
                return Err(ParseError { offset: start, kind: ParseErrorKind::MalformedNumber(text(self)) });
            }
            return Ok((start, Tok::Num(text(self))));
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while self.pos < self.src.len()
                && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
            {
                self.pos += 1;
            }
            return Ok((start, Tok::Ident(text(self))));
        }
        if b"+-*/^(),".contains(&c) {
            self.pos += 1;
            return Ok((start, Tok::Op(c as char)));
        }
        // Step over a whole UTF-8 character for the message.
        let ch = std::str::from_utf8(&self.src[start..])
            .ok()
            .and_then(|s| s.chars().next())
            .map(String::from)
            .unwrap_or_else(|| format!("\\x{c:02x}"));
        Err(ParseError { offset: start, kind: ParseErrorKind::Unexpected(ch) })
    }
}

fn number_value(text: &str) -> Option<BigRational> {
    let (mant, exp) = match text.find(['e', 'E']) {
        Some(i) => (&text[..i], text[i + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (int, frac) = mant.split_once('.').unwrap_or((mant, ""));
    let digits = BigInt::from_str(&format!("{int}{frac}")).ok()?;
    let scale = exp - i32::try_from(frac.len()).ok()?;
    let ten = BigRational::from_integer(BigInt::from(10));
    let factor: BigRational = if scale >= 0 {
        Pow::pow(&ten, scale as u32)
    } else {
        BigRational::one() / Pow::pow(&ten, (-scale) as u32)
    };
    Some(BigRational::from_integer(digits) * factor)
}

struct Parser<'a> {
    lex: Lexer<'a>,
    peeked: (usize, Tok),
    table: Option<&'a SymbolTable>,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str, table: Option<&'a SymbolTable>) -> Result<Self, ParseError> {
        let mut lex = Lexer { src: text.as_bytes(), pos: 0 };
        let peeked = lex.next()?;
        Ok(Parser { lex, peeked, table })
    }

    fn bump(&mut self) -> Result<(usize, Tok), ParseError> {
        let next = self.lex.next()?;
        Ok(std::mem::replace(&mut self.peeked, next))
    }

    fn unexpected(&self) -> ParseError {
        let (offset, tok) = &self.peeked;
        let kind = match tok {
            Tok::End => ParseErrorKind::UnexpectedEnd,
            Tok::Num(s) | Tok::Ident(s) => ParseErrorKind::Unexpected(s.clone()),
            Tok::Op(c) => ParseErrorKind::Unexpected(c.to_string()),
        };
        ParseError { offset: *offset, kind }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.peeked.1 == Tok::Op(c) {
            self.bump()?;
            Ok(())
        } else {
            Err(self.unexpected())
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut terms = vec![self.term()?];
        loop {
            match self.peeked.1 {
                Tok::Op('+') => {
                    self.bump()?;
                    terms.push(self.term()?);
                }
                Tok::Op('-') => {
                    self.bump()?;
                    let t = self.term()?;
                    terms.push(Expr::Mul(vec![Expr::int(-1), t]));
                }
                _ => break,
            }
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { Expr::Add(terms) })
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.factor()?;
        loop {
            match self.peeked.1 {
                Tok::Op('*') => {
                    self.bump()?;
                    acc = Expr::Mul(vec![acc, self.factor()?]);
                }
                Tok::Op('/') => {
                    self.bump()?;
                    acc = Expr::Div(Box::new(acc), Box::new(self.factor()?));
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peeked.1 != Tok::Op('^') {
            return Ok(base);
        }
        self.bump()?;
        let (offset, tok) = self.bump()?;
        match tok {
            Tok::Num(s) => match s.parse::<i64>() {
                Ok(k) if s.bytes().all(|b| b.is_ascii_digit()) => Ok(Expr::Pow(Box::new(base), k)),
                _ => Err(ParseError { offset, kind: ParseErrorKind::BadExponent(s) }),
            },
            Tok::End => Err(ParseError { offset, kind: ParseErrorKind::UnexpectedEnd }),
            Tok::Ident(s) => Err(ParseError { offset, kind: ParseErrorKind::BadExponent(s) }),
            Tok::Op(c) => Err(ParseError { offset, kind: ParseErrorKind::BadExponent(c.to_string()) }),
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let (offset, tok) = self.peeked.clone();
        match tok {
            Tok::Num(s) => {
                self.bump()?;
                let v = number_value(&s)
                    .ok_or(ParseError { offset, kind: ParseErrorKind::MalformedNumber(s) })?;
                Ok(Expr::Const(Number::Rational(v)))
            }
            Tok::Op('-') => {
                self.bump()?;
                Ok(Expr::Mul(vec![Expr::int(-1), self.atom()?]))
            }
            Tok::Op('(') => {
                self.bump()?;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump()?;
                if self.peeked.1 == Tok::Op('(') {
                    let f = Func::from_name(&name)
                        .ok_or(ParseError { offset, kind: ParseErrorKind::UnknownFunction(name.clone()) })?;
                    self.bump()?;
                    let mut args = vec![self.expr()?];
                    while self.peeked.1 == Tok::Op(',') {
                        self.bump()?;
                        args.push(self.expr()?);
                    }
                    self.expect(')')?;
                    if args.len() != f.arity() {
                        return Err(ParseError {
                            offset,
                            kind: ParseErrorKind::Arity { name, expected: f.arity(), found: args.len() },
                        });
                    }
                    return Ok(Expr::Fun(f, args));
                }
                if let Some(t) = self.table {
                    if !t.contains(&name) {
                        return Err(ParseError { offset, kind: ParseErrorKind::UnknownIdentifier(name) });
                    }
                }
                Ok(Expr::sym(&name))
            }
            _ => Err(self.unexpected()),
        }
    }

    fn finish(mut self) -> Result<Expr, ParseError> {
        let e = self.expr()?;
        if self.peeked.1 != Tok::End {
            return Err(self.unexpected());
        }
        Ok(e)
    }
}

/// Parses `text` against `table`; every identifier must be declared there.
/// The result is normalized.
pub fn parse(text: &str, table: &SymbolTable) -> Result<Expr, ParseError> {
    Ok(Parser::new(text, Some(table))?.finish()?.normalize())
}

/// Parses without an identifier whitelist.
impl FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(Parser::new(s, None)?.finish()?.normalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Role;

    fn table() -> SymbolTable {
        SymbolTable::new()
            .with("x", Role::Coordinate)
            .with("y", Role::Coordinate)
            .with("p_x", Role::Momentum)
            .with("p_y", Role::Momentum)
    }

    #[test]
    fn grammar_basics() {
        let e = parse("x*p_y - y*p_x", &table()).unwrap();
        let x = Expr::sym("x");
        let y = Expr::sym("y");
        assert_eq!(e, &x * Expr::sym("p_y") - &y * Expr::sym("p_x"));
        let a = parse("atan2(x, y)", &table()).unwrap();
        assert_eq!(a, x.atan2(&y));
    }

    #[test]
    fn incomplete_input_offset() {
        let err = parse("x +", &table()).unwrap_err();
        assert_eq!(err.offset, 3);
        assert_eq!(err.kind, ParseErrorKind::UnexpectedEnd);
    }

    #[test]
    fn error_kinds() {
        let t = table();
        assert!(matches!(parse("x + q", &t).unwrap_err().kind, ParseErrorKind::UnknownIdentifier(_)));
        assert!(matches!(parse("tan(x)", &t).unwrap_err().kind, ParseErrorKind::UnknownFunction(_)));
        assert!(matches!(parse("1.2.3", &t).unwrap_err().kind, ParseErrorKind::MalformedNumber(_)));
        assert!(matches!(parse("3e", &t).unwrap_err().kind, ParseErrorKind::MalformedNumber(_)));
        assert!(matches!(parse("x^y", &t).unwrap_err().kind, ParseErrorKind::BadExponent(_)));
        assert!(matches!(parse("sin(x, y)", &t).unwrap_err().kind, ParseErrorKind::Arity { .. }));
        assert_eq!(parse("(x", &t).unwrap_err().offset, 2);
    }

    #[test]
    fn numbers_are_exact() {
        let e: Expr = "0.1 + 0.2".parse().unwrap();
        assert_eq!(e, Expr::ratio(3, 10));
        let e: Expr = "2.5e-3".parse().unwrap();
        assert_eq!(e, Expr::ratio(1, 400));
        let e: Expr = "1E2".parse().unwrap();
        assert_eq!(e, Expr::int(100));
    }

    #[test]
    fn unary_minus_binds_to_atom() {
        let e: Expr = "-x^2".parse().unwrap();
        assert_eq!(e, Expr::sym("x").pow(2));
        let e: Expr = "-(x^2)".parse().unwrap();
        assert_eq!(e, -Expr::sym("x").pow(2));
    }
}
