//! Scalar expressions of the time variable `t`.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?          (right-associative)
//! primary := number | number 'i' | 't' | 'pi' | 'e'
//!          | func '(' sum ')' | '(' sum ')'
//! func    := sin | cos | exp | log | sqrt | abs
//! ```
//!
//! `^` binds tighter than unary minus, so `-2^2` is `-4`, while the exponent
//! may itself carry a sign (`2^-1`). Identifiers are case-sensitive.

use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("negative base {base} raised to non-integer exponent {exponent}")]
    NegativeBase { base: f64, exponent: Complex64 },
    #[error("zero raised to non-positive exponent {0}")]
    ZeroPower(Complex64),
    #[error("logarithm of zero")]
    LogOfZero,
    #[error("non-finite result")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Function {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Function {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Function::Sin,
            "cos" => Function::Cos,
            "exp" => Function::Exp,
            "log" => Function::Log,
            "sqrt" => Function::Sqrt,
            "abs" => Function::Abs,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Function::Sin => "sin",
            Function::Cos => "cos",
            Function::Exp => "exp",
            Function::Log => "log",
            Function::Sqrt => "sqrt",
            Function::Abs => "abs",
        }
    }

    fn apply(self, z: Complex64) -> Result<Complex64, EvalError> {
        Ok(match self {
            Function::Sin => {
                if z.im == 0.0 {
                    Complex64::new(z.re.sin(), 0.0)
                } else {
                    z.sin()
                }
            }
            Function::Cos => {
                if z.im == 0.0 {
                    Complex64::new(z.re.cos(), 0.0)
                } else {
                    z.cos()
                }
            }
            Function::Exp => {
                if z.im == 0.0 {
                    Complex64::new(z.re.exp(), 0.0)
                } else {
                    z.exp()
                }
            }
            Function::Log => {
                if z == Complex64::new(0.0, 0.0) {
                    return Err(EvalError::LogOfZero);
                }
                if z.im == 0.0 && z.re > 0.0 {
                    Complex64::new(z.re.ln(), 0.0)
                } else {
                    z.ln()
                }
            }
            Function::Sqrt => {
                if z.im == 0.0 && z.re >= 0.0 {
                    Complex64::new(z.re.sqrt(), 0.0)
                } else {
                    z.sqrt()
                }
            }
            Function::Abs => Complex64::new(z.norm(), 0.0),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
            BinaryOp::Pow => '^',
        }
    }
}

/// Parsed expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Real(f64),
    /// Imaginary literal such as `2i`; holds the coefficient.
    Imaginary(f64),
    Pi,
    E,
    Time,
    Neg(Box<Expression>),
    Binary(BinaryOp, Box<Expression>, Box<Expression>),
    Call(Function, Box<Expression>),
}

impl Expression {
    pub fn parse(source: &str) -> Result<Self, ParseError> {
        parse_expression(source)
    }

    /// Evaluates at time `t` in complex arithmetic.
    pub fn evaluate(&self, t: f64) -> Result<Complex64, EvalError> {
        let value = self.eval_inner(t)?;
        if value.re.is_finite() && value.im.is_finite() {
            Ok(value)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    /// Real-valued convenience used for constants such as periods.
    pub fn evaluate_real(&self, t: f64) -> Result<f64, EvalError> {
        Ok(self.evaluate(t)?.re)
    }

    /// True when the tree never references `t`.
    pub fn is_constant(&self) -> bool {
        match self {
            Expression::Time => false,
            Expression::Real(_) | Expression::Imaginary(_) | Expression::Pi | Expression::E => true,
            Expression::Neg(inner) | Expression::Call(_, inner) => inner.is_constant(),
            Expression::Binary(_, lhs, rhs) => lhs.is_constant() && rhs.is_constant(),
        }
    }

    fn eval_inner(&self, t: f64) -> Result<Complex64, EvalError> {
        match self {
            Expression::Real(v) => Ok(Complex64::new(*v, 0.0)),
            Expression::Imaginary(v) => Ok(Complex64::new(0.0, *v)),
            Expression::Pi => Ok(Complex64::new(std::f64::consts::PI, 0.0)),
            Expression::E => Ok(Complex64::new(std::f64::consts::E, 0.0)),
            Expression::Time => Ok(Complex64::new(t, 0.0)),
            // adding +0 clears the signed zeros that would flip branch cuts
            Expression::Neg(inner) => Ok(-inner.eval_inner(t)? + Complex64::new(0.0, 0.0)),
            Expression::Call(func, arg) => func.apply(arg.eval_inner(t)?),
            Expression::Binary(op, lhs, rhs) => {
                let a = lhs.eval_inner(t)?;
                let b = rhs.eval_inner(t)?;
                match op {
                    BinaryOp::Add => Ok(a + b),
                    BinaryOp::Sub => Ok(a - b),
                    BinaryOp::Mul => Ok(a * b),
                    BinaryOp::Div => {
                        if b.re == 0.0 && b.im == 0.0 {
                            Err(EvalError::DivisionByZero)
                        } else if a.im == 0.0 && b.im == 0.0 {
                            Ok(Complex64::new(a.re / b.re, 0.0))
                        } else {
                            Ok(a / b)
                        }
                    }
                    BinaryOp::Pow => power(a, b),
                }
            }
        }
    }
}

fn power(base: Complex64, exponent: Complex64) -> Result<Complex64, EvalError> {
    let integral = exponent.im == 0.0 && exponent.re.fract() == 0.0 && exponent.re.abs() < 1e15;
    if integral {
        let k = exponent.re as i64;
        if base.re == 0.0 && base.im == 0.0 {
            return if k > 0 {
                Ok(Complex64::new(0.0, 0.0))
            } else {
                Err(EvalError::ZeroPower(exponent))
            };
        }
        if base.im == 0.0 {
            return Ok(Complex64::new(base.re.powi(k as i32), 0.0));
        }
        let mut acc = Complex64::new(1.0, 0.0);
        let mut sq = base;
        let mut e = k.unsigned_abs();
        while e > 0 {
            if e & 1 == 1 {
                acc *= sq;
            }
            sq *= sq;
            e >>= 1;
        }
        return Ok(if k < 0 { acc.inv() } else { acc });
    }
    if base.re == 0.0 && base.im == 0.0 {
        return if exponent.re > 0.0 {
            Ok(Complex64::new(0.0, 0.0))
        } else {
            Err(EvalError::ZeroPower(exponent))
        };
    }
    if base.im == 0.0 && base.re < 0.0 {
        return Err(EvalError::NegativeBase {
            base: base.re,
            exponent,
        });
    }
    if base.im == 0.0 && exponent.im == 0.0 {
        return Ok(Complex64::new(base.re.powf(exponent.re), 0.0));
    }
    Ok((exponent * base.ln()).exp())
}

/// Fully parenthesized rendering; reparsing it yields the same tree.
impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expression::Real(v) => write!(f, "{v:?}"),
            Expression::Imaginary(v) => write!(f, "{v:?}i"),
            Expression::Pi => f.write_str("pi"),
            Expression::E => f.write_str("e"),
            Expression::Time => f.write_str("t"),
            Expression::Neg(inner) => write!(f, "(-{inner})"),
            Expression::Binary(op, lhs, rhs) => write!(f, "({lhs}{}{rhs})", op.symbol()),
            Expression::Call(func, arg) => write!(f, "{}({arg})", func.name()),
        }
    }
}

pub fn parse_expression(source: &str) -> Result<Expression, ParseError> {
    let tokens = tokenize(source)?;
    if tokens.is_empty() {
        return Err(ParseError::Syntax {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let mut parser = Parser {
        tokens,
        pos: 0,
        len: source.len(),
    };
    let expr = parser.sum()?;
    if let Some(tok) = parser.peek() {
        return Err(ParseError::Syntax {
            offset: tok.offset,
            message: format!("unexpected {}", tok.kind.describe()),
        });
    }
    Ok(expr)
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Number(f64),
    Imaginary(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

impl TokenKind {
    fn describe(&self) -> String {
        match self {
            TokenKind::Number(v) => format!("number {v}"),
            TokenKind::Imaginary(v) => format!("imaginary literal {v}i"),
            TokenKind::Ident(name) => format!("identifier `{name}`"),
            TokenKind::Op(c) => format!("operator `{c}`"),
            TokenKind::LParen => "`(`".into(),
            TokenKind::RParen => "`)`".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    offset: usize,
}

fn tokenize(source: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            // exponent only when digits follow, so `2e` stays number + identifier
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &source[start..i];
            let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
                offset: start,
                message: format!("malformed number `{text}`"),
            })?;
            let imaginary = i < bytes.len()
                && bytes[i] == b'i'
                && !bytes
                    .get(i + 1)
                    .is_some_and(|b| b.is_ascii_alphanumeric() || *b == b'_');
            if imaginary {
                i += 1;
                tokens.push(Token {
                    kind: TokenKind::Imaginary(value),
                    offset: start,
                });
            } else {
                tokens.push(Token {
                    kind: TokenKind::Number(value),
                    offset: start,
                });
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            tokens.push(Token {
                kind: TokenKind::Ident(source[start..i].to_string()),
                offset: start,
            });
            continue;
        }
        let kind = match c {
            b'+' | b'-' | b'*' | b'/' | b'^' => TokenKind::Op(c as char),
            b'(' => TokenKind::LParen,
            b')' => TokenKind::RParen,
            _ => {
                let ch = source[start..].chars().next().unwrap_or('?');
                return Err(ParseError::Syntax {
                    offset: start,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        };
        tokens.push(Token {
            kind,
            offset: start,
        });
        i += 1;
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let tok = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        tok
    }

    fn peek_op(&self, ops: &[char]) -> Option<char> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::Op(c),
                ..
            }) if ops.contains(c) => Some(*c),
            _ => None,
        }
    }

    fn sum(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.product()?;
        while let Some(op) = self.peek_op(&['+', '-']) {
            self.pos += 1;
            let rhs = self.product()?;
            let op = if op == '+' { BinaryOp::Add } else { BinaryOp::Sub };
            lhs = Expression::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.peek_op(&['*', '/']) {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if op == '*' { BinaryOp::Mul } else { BinaryOp::Div };
            lhs = Expression::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expression, ParseError> {
        if self.peek_op(&['-']).is_some() {
            self.pos += 1;
            return Ok(Expression::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expression, ParseError> {
        let base = self.primary()?;
        if self.peek_op(&['^']).is_some() {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Expression::Binary(
                BinaryOp::Pow,
                Box::new(base),
                Box::new(exponent),
            ));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expression, ParseError> {
        let end = self.len;
        let tok = self.next().ok_or(ParseError::Syntax {
            offset: end,
            message: "unexpected end of input".into(),
        })?;
        match tok.kind {
            TokenKind::Number(v) => Ok(Expression::Real(v)),
            TokenKind::Imaginary(v) => Ok(Expression::Imaginary(v)),
            TokenKind::LParen => {
                let inner = self.sum()?;
                self.expect_rparen(tok.offset)?;
                Ok(inner)
            }
            TokenKind::Ident(name) => match name.as_str() {
                "t" => Ok(Expression::Time),
                "pi" => Ok(Expression::Pi),
                "e" => Ok(Expression::E),
                _ => {
                    let func = Function::from_name(&name).ok_or(ParseError::UnknownIdentifier {
                        offset: tok.offset,
                        name: name.clone(),
                    })?;
                    match self.next() {
                        Some(Token {
                            kind: TokenKind::LParen,
                            offset,
                        }) => {
                            let arg = self.sum()?;
                            self.expect_rparen(offset)?;
                            Ok(Expression::Call(func, Box::new(arg)))
                        }
                        other => Err(ParseError::Syntax {
                            offset: other.map_or(end, |t| t.offset),
                            message: format!("expected `(` after `{name}`"),
                        }),
                    }
                }
            },
            other => Err(ParseError::Syntax {
                offset: tok.offset,
                message: format!("unexpected {}", other.describe()),
            }),
        }
    }

    fn expect_rparen(&mut self, open: usize) -> Result<(), ParseError> {
        match self.next() {
            Some(Token {
                kind: TokenKind::RParen,
                ..
            }) => Ok(()),
            Some(tok) => Err(ParseError::Syntax {
                offset: tok.offset,
                message: format!("expected `)` closing the `(` at byte {open}"),
            }),
            None => Err(ParseError::Syntax {
                offset: self.len,
                message: format!("unclosed `(` at byte {open}"),
            }),
        }
    }
}
