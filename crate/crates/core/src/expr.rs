//! Tiny arithmetic grammar for user-supplied metric components.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//! Names are the coordinates `t x1 x2 x3`, the constant `pi`, or caller-supplied
//! parameters. Functions: sin cos tan exp ln log sqrt abs pow.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::numdiff::FieldFn;
use crate::point::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Pow,
}

impl Func {
    fn lookup(name: &str) -> Option<(Func, usize)> {
        Some(match name {
            "sin" => (Func::Sin, 1),
            "cos" => (Func::Cos, 1),
            "tan" => (Func::Tan, 1),
            "exp" => (Func::Exp, 1),
            "ln" | "log" => (Func::Ln, 1),
            "sqrt" => (Func::Sqrt, 1),
            "abs" => (Func::Abs, 1),
            "pow" => (Func::Pow, 2),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Coord(usize),
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

impl Node {
    fn eval(&self, c: &[f64; 4]) -> f64 {
        match self {
            Node::Num(v) => *v,
            Node::Coord(i) => c[*i],
            Node::Neg(a) => -a.eval(c),
            Node::Bin(op, a, b) => {
                let (x, y) = (a.eval(c), b.eval(c));
                match op {
                    '+' => x + y,
                    '-' => x - y,
                    '*' => x * y,
                    '/' => x / y,
                    _ => pow(x, y),
                }
            }
            Node::Call(f, args) => {
                let x = args[0].eval(c);
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Tan => x.tan(),
                    Func::Exp => x.exp(),
                    Func::Ln => x.ln(),
                    Func::Sqrt => x.sqrt(),
                    Func::Abs => x.abs(),
                    Func::Pow => pow(x, args[1].eval(c)),
                }
            }
        }
    }
}

fn pow(x: f64, y: f64) -> f64 {
    if y.fract() == 0.0 && y.abs() <= 64.0 {
        x.powi(y as i32)
    } else {
        x.powf(y)
    }
}

/// A parsed expression in the coordinates (t, x1, x2, x3).
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Expr {
    pub fn parse(source: &str) -> Result<Self> {
        Self::parse_with(source, &BTreeMap::new())
    }

    /// Parses with named constants substituted at parse time.
    pub fn parse_with(source: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let tokens = tokenize(source)?;
        let mut p = Parser { tokens, pos: 0, params, len: source.len() };
        let root = p.expr()?;
        if let Some(tok) = p.tokens.get(p.pos) {
            return Err(err(tok.col, format!("unexpected `{}`", tok.kind)));
        }
        Ok(Self { source: source.to_string(), root })
    }

    pub fn eval(&self, p: &Point) -> f64 {
        self.root.eval(&p.coords())
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn into_field(self) -> FieldFn {
        FieldFn::new(move |p| self.eval(p))
    }
}

fn err(column: usize, message: String) -> Error {
    Error::Expression { column, message }
}

#[derive(Debug, Clone, PartialEq)]
enum TokKind {
    Num(f64),
    Name(String),
    Sym(char),
}

impl fmt::Display for TokKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokKind::Num(v) => write!(f, "{v}"),
            TokKind::Name(n) => f.write_str(n),
            TokKind::Sym(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokKind,
    col: usize,
}

fn tokenize(s: &str) -> Result<Vec<Token>> {
    let bytes = s.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let col = i + 1;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &s[start..i];
            let v: f64 = text.parse().map_err(|_| err(col, format!("bad number `{text}`")))?;
            out.push(Token { kind: TokKind::Num(v), col });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token { kind: TokKind::Name(s[start..i].to_string()), col });
        } else if "+-*/^(),".contains(c) {
            out.push(Token { kind: TokKind::Sym(c), col });
            i += 1;
        } else {
            return Err(err(col, format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    params: &'a BTreeMap<String, f64>,
    len: usize,
}

impl Parser<'_> {
    fn peek_sym(&self) -> Option<char> {
        match self.tokens.get(self.pos) {
            Some(Token { kind: TokKind::Sym(c), .. }) => Some(*c),
            _ => None,
        }
    }

    fn col(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.len + 1, |t| t.col)
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.peek_sym() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(err(self.col(), format!("expected `{c}`")))
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_sym() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_sym() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        if self.peek_sym() == Some('-') {
            self.pos += 1;
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.peek_sym() == Some('+') {
            self.pos += 1;
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.peek_sym() == Some('^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Bin('^', Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let col = self.col();
        let Some(tok) = self.tokens.get(self.pos).cloned() else {
            return Err(err(col, "unexpected end of expression".into()));
        };
        self.pos += 1;
        match tok.kind {
            TokKind::Num(v) => Ok(Node::Num(v)),
            TokKind::Sym('(') => {
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(inner)
            }
            TokKind::Sym(c) => Err(err(col, format!("unexpected `{c}`"))),
            TokKind::Name(name) => {
                if self.peek_sym() == Some('(') {
                    let (func, arity) =
                        Func::lookup(&name).ok_or_else(|| err(col, format!("unknown function `{name}`")))?;
                    self.pos += 1;
                    let mut args = vec![self.expr()?];
                    while self.peek_sym() == Some(',') {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.expect(')')?;
                    if args.len() != arity {
                        return Err(err(col, format!("`{name}` takes {arity} argument(s), got {}", args.len())));
                    }
                    return Ok(Node::Call(func, args));
                }
                match name.as_str() {
                    "t" => Ok(Node::Coord(0)),
                    "x1" => Ok(Node::Coord(1)),
                    "x2" => Ok(Node::Coord(2)),
                    "x3" => Ok(Node::Coord(3)),
                    "pi" => Ok(Node::Num(std::f64::consts::PI)),
                    other => self
                        .params
                        .get(other)
                        .map(|v| Node::Num(*v))
                        .ok_or_else(|| err(col, format!("unknown name `{other}`"))),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(src: &str, t: f64, x: [f64; 3]) -> f64 {
        Expr::parse(src).unwrap().eval(&Point::new(t, x))
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(at("1 + 2 * 3", 0.0, [0.0; 3]), 7.0);
        assert_eq!(at("2 ^ 3 ^ 2", 0.0, [0.0; 3]), 512.0);
        assert_eq!(at("-2 ^ 2", 0.0, [0.0; 3]), -4.0);
        assert_eq!(at("(1 - 2) - 3", 0.0, [0.0; 3]), -4.0);
        assert_eq!(at("8 / 4 / 2", 0.0, [0.0; 3]), 1.0);
        assert_eq!(at("1.5e2 + 2E-1", 0.0, [0.0; 3]), 150.2);
    }

    #[test]
    fn coordinates_and_functions() {
        let v = at("t^(4/3) * exp(2*x1) + sin(x2)*cos(x3) - sqrt(pow(x1, 2))", 2.0, [0.5, 0.3, -0.1]);
        let expect = 2f64.powf(4.0 / 3.0) * 1f64.exp() + 0.3f64.sin() * 0.1f64.cos() - 0.5;
        assert!((v - expect).abs() < 1e-14);
        assert!((at("2/3*ln(t)", 3.0, [0.0; 3]) - 2.0 / 3.0 * 3f64.ln()).abs() < 1e-15);
        assert!((at("pi", 0.0, [0.0; 3]) - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn parameters_substitute() {
        let mut params = BTreeMap::new();
        params.insert("m".to_string(), 2.0);
        let e = Expr::parse_with("1 - 2*m/x1", &params).unwrap();
        assert_eq!(e.eval(&Point::new(0.0, [8.0, 0.0, 0.0])), 0.5);
    }

    #[test]
    fn errors_carry_columns() {
        match Expr::parse("1 + foo").unwrap_err() {
            Error::Expression { column, .. } => assert_eq!(column, 5),
            other => panic!("{other:?}"),
        }
        assert!(Expr::parse("sin(1, 2)").is_err());
        assert!(Expr::parse("(1 + 2").is_err());
        assert!(Expr::parse("1 2").is_err());
        assert!(Expr::parse("3 $ 4").is_err());
        assert!(Expr::parse("").is_err());
    }
}
