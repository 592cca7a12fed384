//! Expression language for coefficient fields and parametrized maps.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?          right associative
//! atom    := number | name | name '(' sum ')' | '(' sum ')'
//! ```
//!
//! Names are `pi`, the coordinates `x1, x2, ...`, the parameters `u v w s t`,
//! and the functions `sin cos tan exp log sqrt tanh`.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

/// A variable the evaluator can bind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    /// Chart coordinate, zero-based (`x1` is `X(0)`).
    X(usize),
    U,
    V,
    W,
    S,
    T,
}

impl Var {
    fn slot(self) -> Option<usize> {
        match self {
            Var::X(_) => None,
            Var::U => Some(0),
            Var::V => Some(1),
            Var::W => Some(2),
            Var::S => Some(3),
            Var::T => Some(4),
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::X(i) => write!(f, "x{}", i + 1),
            Var::U => f.write_str("u"),
            Var::V => f.write_str("v"),
            Var::W => f.write_str("w"),
            Var::S => f.write_str("s"),
            Var::T => f.write_str("t"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Tanh,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Tanh => "tanh",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

/// Parsed expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Pi,
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Parse failure with a 1-based position.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("syntax error at line {line}, column {column}: found {found}, expected one of {expected:?}")]
pub struct SyntaxError {
    pub line: usize,
    pub column: usize,
    pub found: String,
    pub expected: Vec<String>,
}

/// Evaluation failure.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("unbound variable {0}")]
    Unbound(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("domain error in {op} at operand {value}")]
    Domain { op: &'static str, value: f64 },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Name(String),
    Op(char),
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(x) => format!("number {}", x),
            Tok::Name(n) => format!("name '{}'", n),
            Tok::Op(c) => format!("'{}'", c),
            Tok::LParen => "'('".to_string(),
            Tok::RParen => "')'".to_string(),
            Tok::End => "end of input".to_string(),
        }
    }
}

struct Lexed {
    toks: Vec<(Tok, usize, usize)>,
}

fn lex(src: &str) -> Result<Lexed, SyntaxError> {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let (mut line, mut col) = (1usize, 1usize);
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        if ch == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if ch.is_whitespace() {
            col += 1;
            i += 1;
            continue;
        }
        let (l0, c0) = (line, col);
        if ch.is_ascii_digit() || ch == '.' {
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
            let value: f64 = text.parse().map_err(|_| SyntaxError {
                line: l0,
                column: c0,
                found: format!("malformed number '{}'", text),
                expected: alloc::vec!["number".to_string()],
            })?;
            col += i - start;
            toks.push((Tok::Num(value), l0, c0));
            continue;
        }
        if ch.is_ascii_alphabetic() || ch == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            toks.push((Tok::Name(chars[start..i].iter().collect()), l0, c0));
            continue;
        }
        let tok = match ch {
            '+' | '-' | '*' | '/' | '^' => Tok::Op(ch),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            _ => {
                return Err(SyntaxError {
                    line: l0,
                    column: c0,
                    found: format!("character '{}'", ch),
                    expected: expected_operand(),
                })
            }
        };
        toks.push((tok, l0, c0));
        i += 1;
        col += 1;
    }
    toks.push((Tok::End, line, col));
    Ok(Lexed { toks })
}

fn expected_operand() -> Vec<String> {
    ["number", "name", "'('", "'-'"].iter().map(|s| s.to_string()).collect()
}

struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn error(&self, expected: Vec<String>) -> SyntaxError {
        let (tok, line, column) = &self.toks[self.pos];
        SyntaxError { line: *line, column: *column, found: tok.describe(), expected }
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn sum(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.product()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn product(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, SyntaxError> {
        if let Tok::Op('-') = self.peek() {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, SyntaxError> {
        let base = self.atom()?;
        if let Tok::Op('^') = self.peek() {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, SyntaxError> {
        match self.peek().clone() {
            Tok::Num(x) => {
                self.bump();
                Ok(Expr::Num(x))
            }
            Tok::LParen => {
                self.bump();
                let e = self.sum()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Tok::Name(name) => {
                if let Some(f) = Func::from_name(&name) {
                    self.bump();
                    if *self.peek() != Tok::LParen {
                        return Err(self.error(alloc::vec!["'('".to_string()]));
                    }
                    self.bump();
                    let arg = self.sum()?;
                    self.expect_rparen()?;
                    return Ok(Expr::Call(f, Box::new(arg)));
                }
                let e = match name.as_str() {
                    "pi" => Expr::Pi,
                    "u" => Expr::Var(Var::U),
                    "v" => Expr::Var(Var::V),
                    "w" => Expr::Var(Var::W),
                    "s" => Expr::Var(Var::S),
                    "t" => Expr::Var(Var::T),
                    _ => match coordinate_index(&name) {
                        Some(i) => Expr::Var(Var::X(i)),
                        None => {
                            let (_, line, column) = &self.toks[self.pos];
                            return Err(SyntaxError {
                                line: *line,
                                column: *column,
                                found: format!("unknown name '{}'", name),
                                expected: ["x1..xd", "u", "v", "w", "s", "t", "pi", "function"]
                                    .iter()
                                    .map(|s| s.to_string())
                                    .collect(),
                            });
                        }
                    },
                };
                self.bump();
                Ok(e)
            }
            _ => Err(self.error(expected_operand())),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), SyntaxError> {
        if *self.peek() == Tok::RParen {
            self.bump();
            Ok(())
        } else {
            Err(self.error(["')'", "operator"].iter().map(|s| s.to_string()).collect()))
        }
    }
}

fn coordinate_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('x')?;
    if digits.is_empty() || digits.starts_with('0') || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse::<usize>().ok().map(|k| k - 1)
}

/// Parse source text into an expression.
pub fn parse(src: &str) -> Result<Expr, SyntaxError> {
    let lexed = lex(src)?;
    let mut p = Parser { toks: lexed.toks, pos: 0 };
    let e = p.sum()?;
    if *p.peek() != Tok::End {
        return Err(p.error(["operator", "end of input"].iter().map(|s| s.to_string()).collect()));
    }
    Ok(e)
}

/// Variable bindings: chart coordinates plus the named parameters.
#[derive(Debug, Clone, Copy, Default)]
pub struct Bindings<'a> {
    pub x: &'a [f64],
    params: [Option<f64>; 5],
}

impl<'a> Bindings<'a> {
    pub fn coords(x: &'a [f64]) -> Self {
        Bindings { x, params: [None; 5] }
    }

    /// Bind `u`, `v`, `w` to the leading entries of `p`.
    pub fn params(p: &[f64]) -> Bindings<'static> {
        let mut b = Bindings { x: &[], params: [None; 5] };
        for (slot, &val) in p.iter().take(3).enumerate() {
            b.params[slot] = Some(val);
        }
        b
    }

    pub fn with(mut self, var: Var, value: f64) -> Self {
        if let Some(slot) = var.slot() {
            self.params[slot] = Some(value);
        }
        self
    }

    fn lookup(&self, var: Var) -> Result<f64, EvalError> {
        match var {
            Var::X(i) => self.x.get(i).copied().ok_or_else(|| EvalError::Unbound(var.to_string())),
            other => {
                let slot = other.slot().expect("named parameter");
                self.params[slot].ok_or_else(|| EvalError::Unbound(other.to_string()))
            }
        }
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr, SyntaxError> {
        parse(src)
    }

    /// Evaluate under `b`.
    pub fn eval(&self, b: &Bindings<'_>) -> Result<f64, EvalError> {
        match self {
            Expr::Num(x) => Ok(*x),
            Expr::Pi => Ok(core::f64::consts::PI),
            Expr::Var(v) => b.lookup(*v),
            Expr::Neg(e) => Ok(-e.eval(b)?),
            Expr::Bin(op, l, r) => {
                let x = l.eval(b)?;
                let y = r.eval(b)?;
                match op {
                    BinOp::Add => Ok(x + y),
                    BinOp::Sub => Ok(x - y),
                    BinOp::Mul => Ok(x * y),
                    BinOp::Div => {
                        if y == 0.0 {
                            Err(EvalError::DivisionByZero)
                        } else {
                            Ok(x / y)
                        }
                    }
                    BinOp::Pow => {
                        if y == libm::trunc(y) && y.abs() <= 64.0 {
                            if x == 0.0 && y < 0.0 {
                                return Err(EvalError::DivisionByZero);
                            }
                            Ok(powi(x, y as i32))
                        } else if x < 0.0 {
                            Err(EvalError::Domain { op: "^", value: x })
                        } else {
                            Ok(libm::pow(x, y))
                        }
                    }
                }
            }
            Expr::Call(f, arg) => {
                let x = arg.eval(b)?;
                match f {
                    Func::Sin => Ok(libm::sin(x)),
                    Func::Cos => Ok(libm::cos(x)),
                    Func::Tan => Ok(libm::tan(x)),
                    Func::Exp => Ok(libm::exp(x)),
                    Func::Tanh => Ok(libm::tanh(x)),
                    Func::Log => {
                        if x <= 0.0 {
                            Err(EvalError::Domain { op: "log", value: x })
                        } else {
                            Ok(libm::log(x))
                        }
                    }
                    Func::Sqrt => {
                        if x < 0.0 {
                            Err(EvalError::Domain { op: "sqrt", value: x })
                        } else {
                            Ok(libm::sqrt(x))
                        }
                    }
                }
            }
        }
    }

    /// Evaluate, mapping any error to NaN.
    #[inline]
    pub fn eval_or_nan(&self, b: &Bindings<'_>) -> f64 {
        self.eval(b).unwrap_or(f64::NAN)
    }

    /// Largest coordinate index referenced plus one (0 if none).
    pub fn coordinate_arity(&self) -> usize {
        let mut n = 0;
        self.visit_vars(&mut |v| {
            if let Var::X(i) = v {
                n = n.max(i + 1);
            }
        });
        n
    }

    /// Whether any variable outside `allowed` appears.
    pub fn first_var_outside(&self, allowed: &dyn Fn(Var) -> bool) -> Option<Var> {
        let mut found = None;
        self.visit_vars(&mut |v| {
            if found.is_none() && !allowed(v) {
                found = Some(v);
            }
        });
        found
    }

    fn visit_vars(&self, f: &mut dyn FnMut(Var)) {
        match self {
            Expr::Var(v) => f(*v),
            Expr::Neg(e) | Expr::Call(_, e) => e.visit_vars(f),
            Expr::Bin(_, l, r) => {
                l.visit_vars(f);
                r.visit_vars(f);
            }
            Expr::Num(_) | Expr::Pi => {}
        }
    }
}

fn powi(x: f64, n: i32) -> f64 {
    let mut result = 1.0;
    let mut base = if n < 0 { 1.0 / x } else { x };
    let mut k = n.unsigned_abs();
    while k > 0 {
        if k & 1 == 1 {
            result *= base;
        }
        base *= base;
        k >>= 1;
    }
    result
}

// Binding strength used by the printer: sum 1, product 2, unary 3, power 4, atom 5.
fn strength(e: &Expr) -> u8 {
    match e {
        Expr::Bin(BinOp::Add | BinOp::Sub, _, _) => 1,
        Expr::Bin(BinOp::Mul | BinOp::Div, _, _) => 2,
        Expr::Neg(_) => 3,
        Expr::Bin(BinOp::Pow, _, _) => 4,
        Expr::Num(x) if *x < 0.0 || x.is_sign_negative() => 3,
        _ => 5,
    }
}

fn write_wrapped(f: &mut fmt::Formatter<'_>, e: &Expr, wrap: bool) -> fmt::Result {
    if wrap {
        write!(f, "({})", e)
    } else {
        write!(f, "{}", e)
    }
}

/// Printing produces text that parses back to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) => {
                if x.is_sign_negative() {
                    write!(f, "-{:?}", -x)
                } else {
                    write!(f, "{:?}", x)
                }
            }
            Expr::Pi => f.write_str("pi"),
            Expr::Var(v) => write!(f, "{}", v),
            Expr::Neg(e) => {
                f.write_str("-")?;
                write_wrapped(f, e, strength(e) < 3)
            }
            Expr::Call(func, arg) => write!(f, "{}({})", func.name(), arg),
            Expr::Bin(op, l, r) => {
                let (lwrap, rwrap) = match op {
                    BinOp::Add | BinOp::Sub => (strength(l) < 1, strength(r) <= 1),
                    BinOp::Mul | BinOp::Div => (strength(l) < 2, strength(r) <= 2),
                    BinOp::Pow => (strength(l) <= 4, strength(r) < 3),
                };
                write_wrapped(f, l, lwrap)?;
                write!(f, " {} ", op.symbol())?;
                write_wrapped(f, r, rwrap)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn num(x: f64) -> Box<Expr> {
        Box::new(Expr::Num(x))
    }

    #[test]
    fn zero() {
        assert_eq!(parse("0").unwrap(), Expr::Num(0.0));
    }

    #[test]
    fn power_is_right_associative() {
        let e = parse("x1*sin(pi*u) - 2^3^1").unwrap();
        let expected = parse("(x1*sin(pi*u)) - (2^(3^1))").unwrap();
        assert_eq!(e, expected);
        if let Expr::Bin(BinOp::Sub, _, r) = &e {
            assert_eq!(**r, Expr::Bin(BinOp::Pow, num(2.0), Box::new(Expr::Bin(BinOp::Pow, num(3.0), num(1.0)))));
        } else {
            panic!("unexpected tree {:?}", e);
        }
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        let b = Bindings::default();
        assert_eq!(parse("-2^2").unwrap().eval(&b).unwrap(), -4.0);
        assert_eq!(parse("2^-1").unwrap().eval(&b).unwrap(), 0.5);
        assert_eq!(parse("-2*3").unwrap(), parse("(-2)*3").unwrap());
    }

    #[test]
    fn unterminated_call_reports_column_five() {
        let err = parse("sin(").unwrap_err();
        assert_eq!((err.line, err.column), (1, 5));
        assert!(err.expected.iter().any(|s| s == "number"));
    }

    #[test]
    fn errors_track_lines() {
        let err = parse("1 +\n  * 2").unwrap_err();
        assert_eq!((err.line, err.column), (2, 3));
    }

    #[test]
    fn unknown_names_are_rejected() {
        assert!(parse("y + 1").is_err());
        assert!(parse("x0").is_err());
        assert!(parse("foo(1)").is_err());
    }

    #[test]
    fn eval_examples() {
        let x = [2.0];
        assert_eq!(parse("x1+1").unwrap().eval(&Bindings::coords(&x)).unwrap(), 3.0);
        let one = parse("sin(pi/2)").unwrap().eval(&Bindings::default()).unwrap();
        assert!((one - 1.0).abs() <= 1e-15);
        let zero = [0.0];
        assert_eq!(parse("1/x1").unwrap().eval(&Bindings::coords(&zero)), Err(EvalError::DivisionByZero));
    }

    #[test]
    fn eval_errors_are_named() {
        let b = Bindings::default();
        assert_eq!(parse("u").unwrap().eval(&b), Err(EvalError::Unbound("u".into())));
        assert_eq!(parse("log(0-1)").unwrap().eval(&b), Err(EvalError::Domain { op: "log", value: -1.0 }));
        assert_eq!(parse("sqrt(0-4)").unwrap().eval(&b), Err(EvalError::Domain { op: "sqrt", value: -4.0 }));
    }

    #[test]
    fn scientific_literals() {
        let b = Bindings::default();
        assert_eq!(parse("1.5e-3").unwrap().eval(&b).unwrap(), 1.5e-3);
        assert_eq!(parse("2E2").unwrap().eval(&b).unwrap(), 200.0);
    }

    #[test]
    fn print_round_trip_examples() {
        for src in ["x1*sin(pi*u) - 2^3^1", "-(a)".replace("a", "u+v").as_str(), "(2^3)^u", "u - (v - w)", "u/(v*w)", "-u^2", "(-u)^2", "exp(-t)*cos(s)"] {
            let e = parse(src).unwrap();
            let printed = e.to_string();
            assert_eq!(parse(&printed).unwrap(), e, "{} printed as {}", src, printed);
        }
    }
}
