//! Closed-form expressions used for exponent fields, sources and nonlinearities.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := atom ('^' unary)?          right-associative
//! atom    := number | name | name '(' expr ')' | '(' expr ')'
//! ```
//!
//! Functions: `sin cos exp log abs sqrt sign` (`sign(0) = 0`). The constant `pi` is predefined.
//! Any other name is a variable, resolved when the expression is bound
//! (`x`, `y`, `tau` and named nodal fields).

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Abs,
    Sqrt,
    Sign,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            "sign" => Func::Sign,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Sign => "sign",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

/// Parsed expression tree.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Call(Func, Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        if let Some(t) = p.peek() {
            return Err(Error::Expression {
                position: t.pos,
                message: format!("unexpected `{}`", t.kind),
            });
        }
        Ok(e)
    }

    pub fn num(v: f64) -> Self {
        Expr::Num(v)
    }

    pub fn var(name: &str) -> Self {
        Expr::Var(name.to_string())
    }

    /// Replaces every occurrence of variable `name` by `with`.
    pub fn substitute(&self, name: &str, with: &Expr) -> Expr {
        match self {
            Expr::Var(v) if v == name => with.clone(),
            Expr::Num(_) | Expr::Var(_) => self.clone(),
            Expr::Neg(a) => Expr::Neg(Box::new(a.substitute(name, with))),
            Expr::Call(f, a) => Expr::Call(*f, Box::new(a.substitute(name, with))),
            Expr::Bin(op, a, b) => Expr::Bin(
                *op,
                Box::new(a.substitute(name, with)),
                Box::new(b.substitute(name, with)),
            ),
        }
    }

    /// Distinct variable names in first-occurrence order (`pi` excluded).
    pub fn variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Expr::Var(v) => {
                if v != "pi" && !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Expr::Num(_) => {}
            Expr::Neg(a) | Expr::Call(_, a) => a.collect_vars(out),
            Expr::Bin(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// Resolves variable names to slot indices. `pi` is always available.
    pub fn bind(&self, names: &[&str]) -> Result<Compiled> {
        Ok(Compiled {
            root: self.compile(names)?,
        })
    }

    fn compile(&self, names: &[&str]) -> Result<Node> {
        Ok(match self {
            Expr::Num(v) => Node::Num(*v),
            Expr::Var(v) => match names.iter().position(|n| n == v) {
                Some(k) => Node::Slot(k),
                None if v == "pi" => Node::Num(std::f64::consts::PI),
                None => {
                    return Err(Error::Expression {
                        position: 0,
                        message: format!(
                            "unknown variable `{v}` (available: {})",
                            names.join(", ")
                        ),
                    })
                }
            },
            Expr::Neg(a) => Node::Neg(Box::new(a.compile(names)?)),
            Expr::Call(f, a) => Node::Call(*f, Box::new(a.compile(names)?)),
            Expr::Bin(op, a, b) => {
                Node::Bin(*op, Box::new(a.compile(names)?), Box::new(b.compile(names)?))
            }
        })
    }
}

impl fmt::Display for Expr {
    /// Fully parenthesised; parses back to an identical tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => {
                if *v < 0.0 {
                    write!(f, "(-{:?})", -v)
                } else {
                    write!(f, "{v:?}")
                }
            }
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Bin(op, a, b) => write!(f, "({a}{}{b})", op.symbol()),
        }
    }
}

/// An expression whose variables are resolved to slot indices.
#[derive(Clone, Debug)]
pub struct Compiled {
    root: Node,
}

#[derive(Clone, Debug)]
enum Node {
    Num(f64),
    Slot(usize),
    Neg(Box<Node>),
    Call(Func, Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
}

impl Compiled {
    pub fn eval<T: Scalar>(&self, slot: &dyn Fn(usize) -> T) -> T {
        eval(&self.root, slot)
    }

    /// Value and derivative with respect to slot `wrt`, by forward-mode propagation.
    pub fn eval_dual<T: Scalar>(&self, slot: &dyn Fn(usize) -> T, wrt: usize) -> (T, T) {
        eval_dual(&self.root, slot, wrt)
    }
}

fn apply_func<T: Scalar>(f: Func, a: T) -> T {
    match f {
        Func::Sin => a.sin(),
        Func::Cos => a.cos(),
        Func::Exp => a.exp(),
        Func::Log => a.ln(),
        Func::Abs => a.abs(),
        Func::Sqrt => a.sqrt(),
        Func::Sign => a.sign0(),
    }
}

fn eval<T: Scalar>(node: &Node, slot: &dyn Fn(usize) -> T) -> T {
    match node {
        Node::Num(v) => T::lit(*v),
        Node::Slot(k) => slot(*k),
        Node::Neg(a) => -eval(a, slot),
        Node::Call(f, a) => apply_func(*f, eval(a, slot)),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, slot), eval(b, slot));
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => a / b,
                BinOp::Pow => a.powf(b),
            }
        }
    }
}

// Zero tangents are propagated as exact zeros so that expressions such as
// |t|^(a-2) t stay differentiable at t = 0 whenever the true derivative is finite.
fn eval_dual<T: Scalar>(node: &Node, slot: &dyn Fn(usize) -> T, wrt: usize) -> (T, T) {
    let zero = T::zero();
    match node {
        Node::Num(v) => (T::lit(*v), zero),
        Node::Slot(k) => (slot(*k), if *k == wrt { T::one() } else { zero }),
        Node::Neg(a) => {
            let (v, d) = eval_dual(a, slot, wrt);
            (-v, -d)
        }
        Node::Call(f, a) => {
            let (v, d) = eval_dual(a, slot, wrt);
            let value = apply_func(*f, v);
            if d == zero {
                return (value, zero);
            }
            let deriv = match f {
                Func::Sin => v.cos() * d,
                Func::Cos => -v.sin() * d,
                Func::Exp => value * d,
                Func::Log => d / v,
                Func::Abs => v.sign0() * d,
                Func::Sqrt => d / (T::lit(2.0) * value),
                Func::Sign => zero,
            };
            (value, deriv)
        }
        Node::Bin(op, a, b) => {
            let (av, ad) = eval_dual(a, slot, wrt);
            let (bv, bd) = eval_dual(b, slot, wrt);
            match op {
                BinOp::Add => (av + bv, ad + bd),
                BinOp::Sub => (av - bv, ad - bd),
                BinOp::Mul => {
                    let mut d = zero;
                    if ad != zero {
                        d += ad * bv;
                    }
                    if bd != zero {
                        d += av * bd;
                    }
                    (av * bv, d)
                }
                BinOp::Div => {
                    let v = av / bv;
                    let mut d = zero;
                    if ad != zero {
                        d += ad / bv;
                    }
                    if bd != zero {
                        d -= v * bd / bv;
                    }
                    (v, d)
                }
                BinOp::Pow => {
                    let v = av.powf(bv);
                    let mut d = zero;
                    if ad != zero && bv != zero {
                        d += bv * av.powf(bv - T::one()) * ad;
                    }
                    if bd != zero {
                        d += v * av.abs().ln() * bd;
                    }
                    (v, d)
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum TokenKind {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Num(v) => write!(f, "{v}"),
            TokenKind::Ident(s) => write!(f, "{s}"),
            TokenKind::Op(c) => write!(f, "{c}"),
            TokenKind::LParen => write!(f, "("),
            TokenKind::RParen => write!(f, ")"),
        }
    }
}

#[derive(Clone, Debug)]
struct Token {
    kind: TokenKind,
    pos: usize,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
            while i < bytes.len() && ((bytes[i] as char).is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v = text.parse::<f64>().map_err(|_| Error::Expression {
                position: start,
                message: format!("malformed number `{text}`"),
            })?;
            out.push(Token { kind: TokenKind::Num(v), pos: start });
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
            {
                i += 1;
            }
            out.push(Token {
                kind: TokenKind::Ident(src[start..i].to_string()),
                pos: start,
            });
        } else {
            let kind = match c {
                '+' | '-' | '*' | '/' | '^' => TokenKind::Op(c),
                '(' => TokenKind::LParen,
                ')' => TokenKind::RParen,
                _ => {
                    return Err(Error::Expression {
                        position: start,
                        message: format!("unexpected character `{c}`"),
                    })
                }
            };
            out.push(Token { kind, pos: start });
            i += 1;
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

    fn end_position(&self) -> usize {
        self.tokens.last().map(|t| t.pos + 1).unwrap_or(0)
    }

    fn eat_op(&mut self, ops: &[char]) -> Option<char> {
        match self.peek() {
            Some(Token { kind: TokenKind::Op(c), .. }) if ops.contains(c) => {
                let c = *c;
                self.pos += 1;
                Some(c)
            }
            _ => None,
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(op) = self.eat_op(&['+', '-']) {
            let rhs = self.term()?;
            let op = if op == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.eat_op(&['*', '/']) {
            let rhs = self.unary()?;
            let op = if op == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.eat_op(&['-', '+']) {
            Some('-') => Ok(Expr::Neg(Box::new(self.unary()?))),
            Some(_) => self.unary(),
            None => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat_op(&['^']).is_some() {
            let exponent = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let Some(tok) = self.tokens.get(self.pos).cloned() else {
            return Err(Error::Expression {
                position: self.end_position(),
                message: "unexpected end of expression".into(),
            });
        };
        self.pos += 1;
        match tok.kind {
            TokenKind::Num(v) => Ok(Expr::Num(v)),
            TokenKind::Ident(name) => {
                if matches!(self.peek(), Some(Token { kind: TokenKind::LParen, .. })) {
                    let func = Func::from_name(&name).ok_or_else(|| Error::Expression {
                        position: tok.pos,
                        message: format!("unknown function `{name}`"),
                    })?;
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    Ok(Expr::Call(func, Box::new(arg)))
                } else if Func::from_name(&name).is_some() {
                    Err(Error::Expression {
                        position: tok.pos,
                        message: format!("function `{name}` needs an argument in parentheses"),
                    })
                } else {
                    Ok(Expr::Var(name))
                }
            }
            TokenKind::LParen => {
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            other => Err(Error::Expression {
                position: tok.pos,
                message: format!("unexpected `{other}`"),
            }),
        }
    }

    fn expect_rparen(&mut self) -> Result<()> {
        match self.peek() {
            Some(Token { kind: TokenKind::RParen, .. }) => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(Error::Expression {
                position: t.pos,
                message: format!("expected `)`, found `{}`", t.kind),
            }),
            None => Err(Error::Expression {
                position: self.end_position(),
                message: "missing `)`".into(),
            }),
        }
    }
}
