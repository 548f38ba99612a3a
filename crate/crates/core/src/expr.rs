//! Arithmetic expressions over `x1`, `x2` used for data in configuration
//! files.
//!
//! Grammar: `+ - * / ^`, unary minus, parentheses, numbers, `pi`, the
//! variables `x1`, `x2` and the functions `sqrt`, `exp`, `log`, `abs`,
//! `sign`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mesh::Point;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Func {
    Sqrt,
    Exp,
    Log,
    Abs,
    Sign,
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    X1,
    X2,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    fn eval(&self, x: Point) -> f64 {
        match self {
            Node::Num(v) => *v,
            Node::X1 => x.x,
            Node::X2 => x.y,
            Node::Neg(a) => -a.eval(x),
            Node::Add(a, b) => a.eval(x) + b.eval(x),
            Node::Sub(a, b) => a.eval(x) - b.eval(x),
            Node::Mul(a, b) => a.eval(x) * b.eval(x),
            Node::Div(a, b) => a.eval(x) / b.eval(x),
            Node::Pow(a, b) => a.eval(x).powf(b.eval(x)),
            Node::Call(f, a) => {
                let v = a.eval(x);
                match f {
                    Func::Sqrt => v.sqrt(),
                    Func::Exp => v.exp(),
                    Func::Log => v.ln(),
                    Func::Abs => v.abs(),
                    Func::Sign => {
                        if v > 0.0 {
                            1.0
                        } else if v < 0.0 {
                            -1.0
                        } else {
                            0.0
                        }
                    }
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(s: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let chars: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text.parse::<f64>().map_err(|_| Error::Expression(format!("bad number '{text}'")))?;
            out.push(Token::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Token::Op(c));
            i += 1;
        } else {
            return Err(Error::Expression(format!("unexpected character '{c}'")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Token::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat('^') {
            return Ok(Node::Pow(Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let tok = self.peek().cloned().ok_or_else(|| Error::Expression("unexpected end of input".into()))?;
        self.pos += 1;
        match tok {
            Token::Num(v) => Ok(Node::Num(v)),
            Token::Op('(') => {
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(Error::Expression("missing ')'".into()));
                }
                Ok(e)
            }
            Token::Ident(name) => match name.as_str() {
                "x1" => Ok(Node::X1),
                "x2" => Ok(Node::X2),
                "pi" => Ok(Node::Num(std::f64::consts::PI)),
                _ => {
                    let f = match name.as_str() {
                        "sqrt" => Func::Sqrt,
                        "exp" => Func::Exp,
                        "log" => Func::Log,
                        "abs" => Func::Abs,
                        "sign" => Func::Sign,
                        _ => return Err(Error::Expression(format!("unknown identifier '{name}'"))),
                    };
                    if !self.eat('(') {
                        return Err(Error::Expression(format!("'{name}' needs an argument")));
                    }
                    let a = self.expr()?;
                    if !self.eat(')') {
                        return Err(Error::Expression("missing ')'".into()));
                    }
                    Ok(Node::Call(f, Box::new(a)))
                }
            },
            Token::Op(c) => Err(Error::Expression(format!("unexpected '{c}'"))),
        }
    }
}

/// A parsed scalar expression.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

impl Expr {
    pub fn parse(s: &str) -> Result<Self> {
        let mut p = Parser { tokens: tokenize(s)?, pos: 0 };
        if p.tokens.is_empty() {
            return Err(Error::Expression("empty expression".into()));
        }
        let root = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Expression(format!("trailing input in '{s}'")));
        }
        Ok(Expr { source: s.to_string(), root })
    }

    pub fn constant(v: f64) -> Self {
        Expr { source: format!("{v:?}"), root: Node::Num(v) }
    }

    pub fn eval(&self, x: Point) -> f64 {
        self.root.eval(x)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Value if the expression does not depend on the position.
    pub fn as_constant(&self) -> Option<f64> {
        fn free(n: &Node) -> bool {
            match n {
                Node::X1 | Node::X2 => false,
                Node::Num(_) => true,
                Node::Neg(a) | Node::Call(_, a) => free(a),
                Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
                    free(a) && free(b)
                }
            }
        }
        free(&self.root).then(|| self.root.eval(Point::zeros()))
    }
}

impl FromStr for Expr {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Expr::parse(s)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl<'de> serde::Deserialize<'de> for Expr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(serde::Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Expr::constant(v)),
            Raw::Text(s) => Expr::parse(&s).map_err(serde::de::Error::custom),
        }
    }
}

impl serde::Serialize for Expr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.source)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x1: f64, x2: f64) -> f64 {
        Expr::parse(s).unwrap().eval(Point::new(x1, x2))
    }

    #[test]
    fn precedence_and_functions() {
        assert_eq!(ev("1 + 2 * 3", 0.0, 0.0), 7.0);
        assert_eq!(ev("-2^2", 0.0, 0.0), -4.0);
        assert_eq!(ev("2^-1", 0.0, 0.0), 0.5);
        assert_eq!(ev("(x1 - x2) / 2", 3.0, 1.0), 1.0);
        assert_eq!(ev("sign(x1) * abs(x2)", -0.3, -2.0), -2.0);
        assert_eq!(ev("sign(0)", 0.0, 0.0), 0.0);
        assert!((ev("1 - sqrt(1 - 0.01 * x1^2)", 0.5, 0.0) - (1.0 - (1.0f64 - 0.0025).sqrt())).abs() < 1e-16);
        assert!((ev("exp(-10*(x2+0.4)^2)", 0.0, -0.4) - 1.0).abs() < 1e-16);
        assert_eq!(ev("1.5e-3", 0.0, 0.0), 1.5e-3);
    }

    #[test]
    fn rejects_garbage() {
        for s in ["", "1 +", "foo(1)", "x3", "(1", "2 3", "1 $ 2", "sqrt 2"] {
            assert!(Expr::parse(s).is_err(), "{s}");
        }
    }

    #[test]
    fn constants() {
        assert_eq!(Expr::parse("0.211 + 0.412 * x1").unwrap().as_constant(), None);
        assert_eq!(Expr::parse("2 * 0.15").unwrap().as_constant(), Some(0.3));
    }
}
