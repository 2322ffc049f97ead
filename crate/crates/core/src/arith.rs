//! Arithmetic-only evaluator behind the `execute_code` stub.
//!
//! Grammar: `+ - * /`, unary minus, parentheses and decimal literals.

use alloc::format;
use alloc::string::String;
use core::fmt;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EvalError {
    Syntax(usize),
    DivisionByZero,
    Empty,
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::Syntax(at) => write!(f, "syntax error at byte {at}"),
            EvalError::DivisionByZero => f.write_str("division by zero"),
            EvalError::Empty => f.write_str("empty expression"),
        }
    }
}

impl core::error::Error for EvalError {}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<f64, EvalError> {
        let mut acc = self.term()?;
        while let Some(op @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            acc = if op == b'+' { acc + rhs } else { acc - rhs };
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<f64, EvalError> {
        let mut acc = self.factor()?;
        while let Some(op @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.factor()?;
            if op == b'*' {
                acc *= rhs;
            } else if rhs == 0.0 {
                return Err(EvalError::DivisionByZero);
            } else {
                acc /= rhs;
            }
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<f64, EvalError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(-self.factor()?)
            }
            Some(b'(') => {
                self.pos += 1;
                let v = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(EvalError::Syntax(self.pos));
                }
                self.pos += 1;
                Ok(v)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            _ => Err(EvalError::Syntax(self.pos)),
        }
    }

    fn number(&mut self) -> Result<f64, EvalError> {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.') {
            self.pos += 1;
        }
        let s = core::str::from_utf8(&self.src[start..self.pos]).map_err(|_| EvalError::Syntax(start))?;
        s.parse::<f64>().map_err(|_| EvalError::Syntax(start))
    }
}

pub fn evaluate(expr: &str) -> Result<f64, EvalError> {
    if expr.trim().is_empty() {
        return Err(EvalError::Empty);
    }
    let mut p = Parser { src: expr.as_bytes(), pos: 0 };
    let v = p.expr()?;
    if p.peek().is_some() {
        return Err(EvalError::Syntax(p.pos));
    }
    Ok(v)
}

/// Evaluates and formats the result, integers without a fractional part.
pub fn evaluate_to_string(expr: &str) -> Result<String, EvalError> {
    let v = evaluate(expr)?;
    Ok(format!("{v}"))
}
