//! Small analytic formula language for endpoint data.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary ('*' unary)*
//! unary  := '-' unary | atom
//! atom   := number | axis | ('sin' | 'cos') '(' expr ')' | '(' expr ')'
//! axis   := x1 | y1 | x2 | y2
//! ```
//!
//! e.g. `0.3*sin(x1) - 0.1*cos(2*y1)*sin(x2) + 1.5`.

use crate::error::{Error, Result};
use crate::grid::{ScalarField, TorusGrid};

const MAX_DEPTH: usize = 64;
const MAX_LEN: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    Axis(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Sin(Box<Node>),
    Cos(Box<Node>),
}

impl Node {
    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Node::Num(v) => *v,
            Node::Axis(a) => x[*a],
            Node::Neg(a) => -a.eval(x),
            Node::Add(a, b) => a.eval(x) + b.eval(x),
            Node::Sub(a, b) => a.eval(x) - b.eval(x),
            Node::Mul(a, b) => a.eval(x) * b.eval(x),
            Node::Sin(a) => a.eval(x).sin(),
            Node::Cos(a) => a.eval(x).cos(),
        }
    }

    fn max_axis(&self) -> Option<usize> {
        match self {
            Node::Num(_) => None,
            Node::Axis(a) => Some(*a),
            Node::Neg(a) | Node::Sin(a) | Node::Cos(a) => a.max_axis(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) => match (a.max_axis(), b.max_axis()) {
                (Some(p), Some(q)) => Some(p.max(q)),
                (p, q) => p.or(q),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Formula {
    source: String,
    root: Node,
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
    depth: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> Error {
        Error::Formula(format!("{msg} at byte {}", self.pos))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn enter(&mut self) -> Result<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.err("expression nested too deeply"));
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Node> {
        self.enter()?;
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                break;
            }
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while self.eat(b'*') {
            lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        self.enter()?;
        let node = if self.eat(b'-') { Node::Neg(Box::new(self.unary()?)) } else { self.atom()? };
        self.depth -= 1;
        Ok(node)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.s.len() && self.s[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let word = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
                match word {
                    "x1" => Ok(Node::Axis(0)),
                    "y1" => Ok(Node::Axis(1)),
                    "x2" => Ok(Node::Axis(2)),
                    "y2" => Ok(Node::Axis(3)),
                    "sin" | "cos" => {
                        if !self.eat(b'(') {
                            return Err(self.err("expected '(' after function name"));
                        }
                        let arg = Box::new(self.expr()?);
                        if !self.eat(b')') {
                            return Err(self.err("expected ')'"));
                        }
                        Ok(if word == "sin" { Node::Sin(arg) } else { Node::Cos(arg) })
                    }
                    "pi" => Ok(Node::Num(std::f64::consts::PI)),
                    _ => Err(Error::Formula(format!("unknown identifier '{word}'"))),
                }
            }
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of formula")),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        let s = self.s;
        let digits = |p: &mut usize| {
            while *p < s.len() && s[*p].is_ascii_digit() {
                *p += 1;
            }
        };
        digits(&mut self.pos);
        if self.pos < s.len() && s[self.pos] == b'.' {
            self.pos += 1;
            digits(&mut self.pos);
        }
        if self.pos < s.len() && (s[self.pos] == b'e' || s[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < s.len() && (s[self.pos] == b'+' || s[self.pos] == b'-') {
                self.pos += 1;
            }
            let before = self.pos;
            digits(&mut self.pos);
            if self.pos == before {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&s[start..self.pos]).unwrap();
        let v: f64 = text.parse().map_err(|_| Error::Formula(format!("bad number '{text}'")))?;
        if !v.is_finite() {
            return Err(Error::Formula(format!("number '{text}' is not finite")));
        }
        Ok(Node::Num(v))
    }
}

impl Formula {
    pub fn parse(source: &str) -> Result<Self> {
        if source.len() > MAX_LEN {
            return Err(Error::Formula(format!("formula longer than {MAX_LEN} bytes")));
        }
        let mut p = Parser { s: source.as_bytes(), pos: 0, depth: 0 };
        let root = p.expr()?;
        if p.peek().is_some() {
            return Err(p.err("trailing input"));
        }
        Ok(Formula { source: source.trim().to_string(), root })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Number of complex dimensions the formula refers to (0 for constants).
    pub fn complex_dim_used(&self) -> usize {
        self.root.max_axis().map_or(0, |a| a / 2 + 1)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.root.eval(x)
    }

    pub fn sample(&self, grid: TorusGrid) -> Result<ScalarField> {
        if self.complex_dim_used() > grid.complex_dim() {
            return Err(Error::Formula(format!(
                "'{}' uses coordinates beyond complex dimension {}",
                self.source,
                grid.complex_dim()
            )));
        }
        let f = ScalarField::from_fn(grid, |x| self.eval(x));
        if f.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::Formula(format!("'{}' produced non-finite values", self.source)));
        }
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_sums_of_products() {
        let f = Formula::parse("0.3*sin(x1) - 0.1*cos(2*y1)*sin(x2) + 1.5").unwrap();
        let x = [0.4, 1.1, -0.7, 2.0];
        let expected = 0.3 * 0.4f64.sin() - 0.1 * (2.2f64).cos() * (-0.7f64).sin() + 1.5;
        assert!((f.eval(&x) - expected).abs() < 1e-15);
        assert_eq!(f.complex_dim_used(), 2);
        assert_eq!(Formula::parse("-2.5e-1").unwrap().eval(&x), -0.25);
        assert_eq!(Formula::parse("--1").unwrap().eval(&x), 1.0);
    }

    #[test]
    fn rejects_malformed_input() {
        for bad in ["", "sin x1", "0.3*", "foo(x1)", "(1", "1)", "x3", "1e999", "3 4"] {
            assert!(Formula::parse(bad).is_err(), "{bad}");
        }
        let deep = "(".repeat(200) + "1" + &")".repeat(200);
        assert!(Formula::parse(&deep).is_err());
    }

    #[test]
    fn dimension_check_on_sampling() {
        let g = TorusGrid::standard(1, 8).unwrap();
        assert!(Formula::parse("sin(y2)").unwrap().sample(g).is_err());
        assert!(Formula::parse("sin(y1)").unwrap().sample(g).is_ok());
    }
}
