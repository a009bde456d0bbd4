//! Recursive-descent parser for the functional surface form.
//!
//! ```text
//! expr := "Add(" args ")" | "Mul(" args ")" | "Pow(" expr "," expr ")"
//!       | fn "(" expr ")" | "Symbol('" name "')" | "Integer(" int ")"
//!       | "Rational(" int "," int ")"
//! fn   := "cos" | "sin" | "log" | "exp"
//! args := expr ("," expr)+
//! ```

use num_bigint::BigInt;
use num_traits::Zero;

use crate::error::ParseError;
use crate::expr::{Expr, Func};
use crate::number::Number;

/// Parses the functional form and returns the canonicalized expression.
pub fn parse_functional(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0 };
    p.skip_ws();
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.error("trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, lit: &str) -> bool {
        if self.src[self.pos..].starts_with(lit.as_bytes()) {
            self.pos += lit.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, lit: &str) -> Result<(), ParseError> {
        self.skip_ws();
        if self.eat(lit) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{lit}`")))
        }
    }

    fn ident(&mut self) -> &str {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("")
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let head = self.ident().to_string();
        if head.is_empty() {
            return Err(self.error("expected an expression"));
        }
        if !self.eat("(") {
            return Err(self.error("expected `(`"));
        }
        match head.as_str() {
            "Add" | "Mul" => {
                let args = self.args()?;
                if args.len() < 2 {
                    return Err(ParseError {
                        offset: start,
                        message: format!("{head} needs at least two arguments"),
                    });
                }
                Ok(if head == "Add" {
                    Expr::sum(args)
                } else {
                    Expr::product(args)
                })
            }
            "Pow" => {
                let base = self.expr()?;
                self.expect(",")?;
                let exp = self.expr()?;
                self.expect(")")?;
                Ok(Expr::power(base, exp))
            }
            "Symbol" => {
                self.skip_ws();
                if !self.eat("'") {
                    return Err(self.error("expected `'`"));
                }
                let name = self.ident().to_string();
                if name.is_empty() || name.as_bytes()[0].is_ascii_digit() {
                    return Err(self.error("invalid symbol name"));
                }
                if !self.eat("'") {
                    return Err(self.error("expected `'`"));
                }
                self.expect(")")?;
                Ok(Expr::Symbol(name))
            }
            "Integer" => {
                let v = self.integer()?;
                self.expect(")")?;
                Ok(Expr::Number(Number::from_big(v, BigInt::from(1))))
            }
            "Rational" => {
                let num = self.integer()?;
                self.expect(",")?;
                self.skip_ws();
                let den_at = self.pos;
                let den = self.integer()?;
                if den.is_zero() {
                    return Err(ParseError {
                        offset: den_at,
                        message: "zero denominator".into(),
                    });
                }
                self.expect(")")?;
                Ok(Expr::Number(Number::from_big(num, den)))
            }
            name => match Func::from_name(name) {
                Some(f) => {
                    let arg = self.expr()?;
                    self.expect(")")?;
                    Ok(Expr::function(f, arg))
                }
                None => Err(ParseError {
                    offset: start,
                    message: format!("unknown head `{name}`"),
                }),
            },
        }
    }

    fn args(&mut self) -> Result<Vec<Expr>, ParseError> {
        let mut out = vec![self.expr()?];
        loop {
            self.skip_ws();
            if self.eat(")") {
                return Ok(out);
            }
            if !self.eat(",") {
                return Err(self.error("expected `,` or `)`"));
            }
            out.push(self.expr()?);
        }
    }

    fn integer(&mut self) -> Result<BigInt, ParseError> {
        self.skip_ws();
        let start = self.pos;
        if self.pos < self.src.len() && (self.src[self.pos] == b'-' || self.src[self.pos] == b'+') {
            self.pos += 1;
        }
        let digits_start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == digits_start {
            return Err(self.error("expected an integer"));
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<BigInt>().map_err(|_| ParseError {
            offset: start,
            message: "invalid integer".into(),
        })
    }
}
