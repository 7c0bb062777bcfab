//! Conditioning rules such as `0.5n`, `n^1.5`, `2n + n^0.9` or `floor(sqrt(n))`.
//!
//! Grammar: `+ - * / ^`, parentheses, numbers, the variable `n`, and the
//! functions `sqrt`, `log`, `exp`, `floor`, `ceil`, `round`. A number directly
//! followed by `n`, a function or `(` multiplies it. A non-integral result is
//! rounded to the nearest integer unless the rule applies its own rounding.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RuleError {
    #[error("cannot parse rule {rule:?} at byte {pos}: {msg}")]
    Parse { rule: String, pos: usize, msg: String },
    #[error("rule {rule:?} gives {value} at n = {n}, not a nonnegative finite number")]
    BadValue { rule: String, n: usize, value: f64 },
}

#[derive(Clone, Debug, PartialEq)]
enum Expr {
    Num(f64),
    N,
    Neg(Box<Expr>),
    Bin(char, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Func {
    Sqrt,
    Log,
    Exp,
    Floor,
    Ceil,
    Round,
}

impl Func {
    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sqrt" => Func::Sqrt,
            "log" | "ln" => Func::Log,
            "exp" => Func::Exp,
            "floor" => Func::Floor,
            "ceil" => Func::Ceil,
            "round" => Func::Round,
            _ => return None,
        })
    }
    fn apply(self, x: f64) -> f64 {
        // Float noise such as 0.1 * 30 = 3.0000000000000004 must not move ceil or floor.
        let r = x.round();
        let snapped = if (x - r).abs() < 1e-9 * r.abs().max(1.0) { r } else { x };
        match self {
            Func::Sqrt => x.sqrt(),
            Func::Log => x.ln(),
            Func::Exp => x.exp(),
            Func::Floor => snapped.floor(),
            Func::Ceil => snapped.ceil(),
            Func::Round => x.round(),
        }
    }
}

impl Expr {
    fn eval(&self, n: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::N => n,
            Expr::Neg(e) => -e.eval(n),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(n), b.eval(n));
                match op {
                    '+' => a + b,
                    '-' => a - b,
                    '*' => a * b,
                    '/' => a / b,
                    _ => a.powf(b),
                }
            }
            Expr::Call(f, e) => f.apply(e.eval(n)),
        }
    }
}

/// A parsed rule `n -> value`; serialises as its source text.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Rule {
    source: String,
    expr: Expr,
}

impl TryFrom<String> for Rule {
    type Error = RuleError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        Rule::parse(&s)
    }
}

impl From<Rule> for String {
    fn from(r: Rule) -> Self {
        r.source
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl std::str::FromStr for Rule {
    type Err = RuleError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Rule::parse(s)
    }
}

impl Rule {
    pub fn parse(s: &str) -> Result<Rule, RuleError> {
        let mut p = Parser {
            src: s,
            bytes: s.as_bytes(),
            pos: 0,
        };
        let expr = p.sum()?;
        p.skip_ws();
        if p.pos != p.bytes.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(Rule {
            source: s.trim().to_string(),
            expr,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Raw real value at `n`.
    pub fn eval(&self, n: usize) -> f64 {
        self.expr.eval(n as f64)
    }

    /// Integer value at `n`.
    pub fn value(&self, n: usize) -> Result<usize, RuleError> {
        let v = self.eval(n).round();
        if !v.is_finite() || v < 0.0 || v > u64::MAX as f64 {
            return Err(RuleError::BadValue {
                rule: self.source.clone(),
                n,
                value: v,
            });
        }
        Ok(v as usize)
    }
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> RuleError {
        RuleError::Parse {
            rule: self.src.to_string(),
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn sum(&mut self) -> Result<Expr, RuleError> {
        let mut lhs = self.product()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.product()?;
            lhs = Expr::Bin(c as char, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expr, RuleError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(c @ (b'*' | b'/')) => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = Expr::Bin(c as char, Box::new(lhs), Box::new(rhs));
                }
                // Implicit multiplication: `2n`, `3sqrt(n)`, `2(n + 1)`.
                Some(c) if c == b'(' || c.is_ascii_alphabetic() => {
                    let rhs = self.power()?;
                    lhs = Expr::Bin('*', Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, RuleError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, RuleError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            // Right associative; the exponent may carry a sign.
            let exp = self.unary()?;
            return Ok(Expr::Bin('^', Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, RuleError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.sum()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let start = self.pos;
                while self.pos < self.bytes.len()
                    && (self.bytes[self.pos].is_ascii_digit()
                        || self.bytes[self.pos] == b'.'
                        || ((self.bytes[self.pos] == b'e' || self.bytes[self.pos] == b'E')
                            && self.bytes.get(self.pos + 1).is_some_and(|b| b.is_ascii_digit() || *b == b'-')))
                {
                    if matches!(self.bytes[self.pos], b'e' | b'E') {
                        self.pos += 1;
                    }
                    self.pos += 1;
                }
                self.src[start..self.pos]
                    .parse()
                    .map(Expr::Num)
                    .map_err(|_| RuleError::Parse {
                        rule: self.src.to_string(),
                        pos: start,
                        msg: "bad number".into(),
                    })
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_alphabetic() {
                    self.pos += 1;
                }
                let name = &self.src[start..self.pos];
                if name == "n" {
                    return Ok(Expr::N);
                }
                let f = Func::from_name(name).ok_or_else(|| RuleError::Parse {
                    rule: self.src.to_string(),
                    pos: start,
                    msg: format!("unknown name {name:?}"),
                })?;
                if self.peek() != Some(b'(') {
                    return Err(self.err("expected '(' after function name"));
                }
                Ok(Expr::Call(f, Box::new(self.atom()?)))
            }
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of rule")),
        }
    }
}
