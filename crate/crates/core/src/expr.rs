//! Expression language for problem data.
//!
//! Grammar: literals, `x`, `lambda`, `pi`, binary `+ - * / ^` (with `^`
//! right-associative and binding tighter than unary minus), unary minus,
//! `sin cos tan exp sqrt abs`, and `indicator(lo, hi)` which is 1 on the
//! closed interval [lo, hi] and 0 elsewhere.  Indicator bounds must be
//! constant expressions with lo < hi.
//!
//! Coefficient slots (p, q, Delta, target functions) may reference `x` but
//! not `lambda`; boundary-pair slots may reference `lambda` but not `x`.
//! Pair expressions are expected to be entire in lambda; `abs`, `sqrt` and
//! `tan` are evaluated on principal branches and it is the caller's business
//! not to feed non-entire pairs to routines that assume entirety (the
//! numerical pair validation catches most such mistakes).

use num_complex::Complex64;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Sqrt,
    Abs,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    X,
    Lambda,
    Pi,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Fun(Func, Box<Expr>),
    /// 1 on [lo, hi], 0 elsewhere.
    Indicator(f64, f64),
}

/// Which variables an expression slot is allowed to reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    /// x allowed, lambda forbidden (p, q, Delta, target functions).
    Coefficient,
    /// lambda allowed, x forbidden (boundary pair entries).
    BoundaryPair,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: expected {expected}, found {found}")]
    Syntax {
        offset: usize,
        expected: &'static str,
        found: String,
    },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("malformed number at byte {offset}")]
    BadNumber { offset: usize },
    #[error("indicator bounds must be constant expressions (at byte {offset})")]
    IndicatorNotConstant { offset: usize },
    #[error("indicator with lo >= hi (at byte {offset})")]
    IndicatorBounds { offset: usize },
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum SlotError {
    #[error("lambda not allowed here")]
    LambdaNotAllowed,
    #[error("x not allowed here")]
    XNotAllowed,
    #[error("indicator not allowed here")]
    IndicatorNotAllowed,
}

#[derive(Debug, Clone, Copy, thiserror::Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("sqrt of a negative number in real evaluation")]
    SqrtNegative,
    #[error("evaluation produced a non-finite value")]
    NonFinite,
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    /// Returns the token and its starting byte offset.
    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        self.skip_ws();
        let start = self.pos;
        if self.pos >= self.src.len() {
            return Ok((Tok::End, start));
        }
        let c = self.src[self.pos];
        let tok = match c {
            b'+' => {
                self.pos += 1;
                Tok::Plus
            }
            b'-' => {
                self.pos += 1;
                Tok::Minus
            }
            b'*' => {
                self.pos += 1;
                Tok::Star
            }
            b'/' => {
                self.pos += 1;
                Tok::Slash
            }
            b'^' => {
                self.pos += 1;
                Tok::Caret
            }
            b'(' => {
                self.pos += 1;
                Tok::LParen
            }
            b')' => {
                self.pos += 1;
                Tok::RParen
            }
            b',' => {
                self.pos += 1;
                Tok::Comma
            }
            b'0'..=b'9' => {
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                if self.pos < self.src.len() && self.src[self.pos] == b'.' {
                    self.pos += 1;
                    if self.pos >= self.src.len() || !self.src[self.pos].is_ascii_digit() {
                        return Err(ParseError::BadNumber { offset: start });
                    }
                    while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                        self.pos += 1;
                    }
                }
                if self.pos < self.src.len() && (self.src[self.pos] | 0x20) == b'e' {
                    let mark = self.pos;
                    self.pos += 1;
                    if self.pos < self.src.len()
                        && (self.src[self.pos] == b'+' || self.src[self.pos] == b'-')
                    {
                        self.pos += 1;
                    }
                    if self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                            self.pos += 1;
                        }
                    } else {
                        // Not an exponent after all ("2e" could prefix an identifier
                        // elsewhere, but here it is just a malformed number).
                        self.pos = mark;
                    }
                }
                let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                let v: f64 = text
                    .parse()
                    .map_err(|_| ParseError::BadNumber { offset: start })?;
                Tok::Num(v)
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                Tok::Ident(std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_owned())
            }
            other => {
                return Err(ParseError::Syntax {
                    offset: start,
                    expected: "a token",
                    found: format!("`{}`", other as char),
                })
            }
        };
        Ok((tok, start))
    }
}

// ---------------------------------------------------------------------------
// Parser

struct Parser<'a> {
    lexer: Lexer<'a>,
    cur: Tok,
    cur_off: usize,
}

fn tok_name(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number `{v}`"),
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Plus => "`+`".into(),
        Tok::Minus => "`-`".into(),
        Tok::Star => "`*`".into(),
        Tok::Slash => "`/`".into(),
        Tok::Caret => "`^`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::End => "end of input".into(),
    }
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self, ParseError> {
        let mut lexer = Lexer::new(src);
        let (cur, cur_off) = lexer.next()?;
        Ok(Parser { lexer, cur, cur_off })
    }

    fn bump(&mut self) -> Result<(), ParseError> {
        let (t, o) = self.lexer.next()?;
        self.cur = t;
        self.cur_off = o;
        Ok(())
    }

    fn expect(&mut self, want: Tok, what: &'static str) -> Result<(), ParseError> {
        if self.cur == want {
            self.bump()
        } else {
            Err(ParseError::Syntax {
                offset: self.cur_off,
                expected: what,
                found: tok_name(&self.cur),
            })
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.cur {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.bump()?;
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.cur {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => break,
            };
            self.bump()?;
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.cur == Tok::Minus {
            self.bump()?;
            let inner = self.unary()?;
            // Fold a negated literal so that printing and reparsing is stable.
            return Ok(match inner {
                Expr::Num(v) => Expr::Num(-v),
                other => Expr::Neg(Box::new(other)),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.cur == Tok::Caret {
            self.bump()?;
            // Right-associative; the exponent admits unary minus: 2^-3.
            let exp = self.unary_in_exponent()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn unary_in_exponent(&mut self) -> Result<Expr, ParseError> {
        if self.cur == Tok::Minus {
            self.bump()?;
            let inner = self.unary_in_exponent()?;
            return Ok(match inner {
                Expr::Num(v) => Expr::Num(-v),
                other => Expr::Neg(Box::new(other)),
            });
        }
        self.power()
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.cur.clone() {
            Tok::Num(v) => {
                self.bump()?;
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.bump()?;
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let off = self.cur_off;
                self.bump()?;
                match name.as_str() {
                    "x" => Ok(Expr::X),
                    "lambda" => Ok(Expr::Lambda),
                    "pi" => Ok(Expr::Pi),
                    "sin" | "cos" | "tan" | "exp" | "sqrt" | "abs" => {
                        let f = match name.as_str() {
                            "sin" => Func::Sin,
                            "cos" => Func::Cos,
                            "tan" => Func::Tan,
                            "exp" => Func::Exp,
                            "sqrt" => Func::Sqrt,
                            _ => Func::Abs,
                        };
                        self.expect(Tok::LParen, "`(`")?;
                        let arg = self.expr()?;
                        self.expect(Tok::RParen, "`)`")?;
                        Ok(Expr::Fun(f, Box::new(arg)))
                    }
                    "indicator" => {
                        self.expect(Tok::LParen, "`(`")?;
                        let lo_expr = self.expr()?;
                        self.expect(Tok::Comma, "`,`")?;
                        let hi_expr = self.expr()?;
                        self.expect(Tok::RParen, "`)`")?;
                        let lo = const_value(&lo_expr)
                            .ok_or(ParseError::IndicatorNotConstant { offset: off })?;
                        let hi = const_value(&hi_expr)
                            .ok_or(ParseError::IndicatorNotConstant { offset: off })?;
                        if !(lo < hi) {
                            return Err(ParseError::IndicatorBounds { offset: off });
                        }
                        Ok(Expr::Indicator(lo, hi))
                    }
                    _ => Err(ParseError::UnknownIdentifier { name, offset: off }),
                }
            }
            other => Err(ParseError::Syntax {
                offset: self.cur_off,
                expected: "a number, name, or `(`",
                found: tok_name(&other),
            }),
        }
    }
}

/// Evaluates an expression that uses neither `x` nor `lambda`; None otherwise.
fn const_value(e: &Expr) -> Option<f64> {
    match e {
        Expr::Num(v) => Some(*v),
        Expr::Pi => Some(std::f64::consts::PI),
        Expr::X | Expr::Lambda => None,
        Expr::Neg(a) => const_value(a).map(|v| -v),
        Expr::Bin(op, a, b) => {
            let (a, b) = (const_value(a)?, const_value(b)?);
            let v = match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => a / b,
                BinOp::Pow => a.powf(b),
            };
            v.is_finite().then_some(v)
        }
        Expr::Fun(f, a) => {
            let a = const_value(a)?;
            let v = match f {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Tan => a.tan(),
                Func::Exp => a.exp(),
                Func::Sqrt => a.sqrt(),
                Func::Abs => a.abs(),
            };
            v.is_finite().then_some(v)
        }
        Expr::Indicator(_, _) => None,
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr, ParseError> {
        let mut p = Parser::new(src)?;
        let e = p.expr()?;
        if p.cur != Tok::End {
            return Err(ParseError::Syntax {
                offset: p.cur_off,
                expected: "end of input",
                found: tok_name(&p.cur),
            });
        }
        Ok(e)
    }

    pub fn check_slot(&self, slot: Slot) -> Result<(), SlotError> {
        match self {
            Expr::Num(_) | Expr::Pi => Ok(()),
            Expr::X => {
                if slot == Slot::BoundaryPair {
                    Err(SlotError::XNotAllowed)
                } else {
                    Ok(())
                }
            }
            Expr::Lambda => {
                if slot == Slot::Coefficient {
                    Err(SlotError::LambdaNotAllowed)
                } else {
                    Ok(())
                }
            }
            Expr::Indicator(_, _) => {
                if slot == Slot::BoundaryPair {
                    Err(SlotError::IndicatorNotAllowed)
                } else {
                    Ok(())
                }
            }
            Expr::Neg(a) | Expr::Fun(_, a) => a.check_slot(slot),
            Expr::Bin(_, a, b) => {
                a.check_slot(slot)?;
                b.check_slot(slot)
            }
        }
    }

    pub fn eval_real(&self, x: f64, lambda: f64) -> Result<f64, EvalError> {
        self.eval_real_sided(x, x, lambda)
    }

    /// Like [`eval_real`](Self::eval_real), but indicator membership is
    /// decided at `side` instead of `x`.  Integrators pass the midpoint of the
    /// current inter-breakpoint segment so that a stage landing exactly on a
    /// breakpoint picks the piece the segment lives on.
    pub fn eval_real_sided(&self, x: f64, side: f64, lambda: f64) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::X => x,
            Expr::Lambda => lambda,
            Expr::Pi => std::f64::consts::PI,
            Expr::Neg(a) => -a.eval_real_sided(x, side, lambda)?,
            Expr::Bin(op, a, b) => {
                let a = a.eval_real_sided(x, side, lambda)?;
                let b = b.eval_real_sided(x, side, lambda)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        a / b
                    }
                    BinOp::Pow => a.powf(b),
                }
            }
            Expr::Fun(f, a) => {
                let a = a.eval_real_sided(x, side, lambda)?;
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Tan => a.tan(),
                    Func::Exp => a.exp(),
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(EvalError::SqrtNegative);
                        }
                        a.sqrt()
                    }
                    Func::Abs => a.abs(),
                }
            }
            Expr::Indicator(lo, hi) => {
                if side >= *lo && side <= *hi {
                    1.0
                } else {
                    0.0
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    /// Evaluation with a complex spectral parameter.  `x` stays real; all
    /// functions use principal branches; `abs` is the complex modulus.
    pub fn eval_complex(&self, x: f64, lambda: Complex64) -> Result<Complex64, EvalError> {
        self.eval_complex_sided(x, x, lambda)
    }

    /// Complex twin of [`eval_real_sided`](Self::eval_real_sided): indicator
    /// membership is decided at `side` instead of `x`.
    pub fn eval_complex_sided(
        &self,
        x: f64,
        side: f64,
        lambda: Complex64,
    ) -> Result<Complex64, EvalError> {
        let v = match self {
            Expr::Num(v) => Complex64::new(*v, 0.0),
            Expr::X => Complex64::new(x, 0.0),
            Expr::Lambda => lambda,
            Expr::Pi => Complex64::new(std::f64::consts::PI, 0.0),
            Expr::Neg(a) => -a.eval_complex_sided(x, side, lambda)?,
            Expr::Bin(op, a, b) => {
                let a = a.eval_complex_sided(x, side, lambda)?;
                let b = b.eval_complex_sided(x, side, lambda)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == Complex64::new(0.0, 0.0) {
                            return Err(EvalError::DivisionByZero);
                        }
                        a / b
                    }
                    BinOp::Pow => {
                        // Integer powers of possibly-negative reals must agree
                        // with the real evaluator, so handle them by repeated
                        // squaring instead of the principal branch.
                        if b.im == 0.0 && b.re.fract() == 0.0 && b.re.abs() <= 64.0 {
                            powi(a, b.re as i64)
                        } else {
                            a.powc(b)
                        }
                    }
                }
            }
            Expr::Fun(f, a) => {
                let a = a.eval_complex_sided(x, side, lambda)?;
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Tan => a.tan(),
                    Func::Exp => a.exp(),
                    Func::Sqrt => a.sqrt(),
                    Func::Abs => Complex64::new(a.norm(), 0.0),
                }
            }
            Expr::Indicator(lo, hi) => {
                if side >= *lo && side <= *hi {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
        };
        if v.re.is_finite() && v.im.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    /// Indicator endpoints lying strictly inside (a, b), sorted, deduplicated.
    pub fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        let mut out = Vec::new();
        self.collect_breakpoints(a, b, &mut out);
        out.sort_by(|u, v| u.partial_cmp(v).unwrap());
        out.dedup();
        out
    }

    fn collect_breakpoints(&self, a: f64, b: f64, out: &mut Vec<f64>) {
        match self {
            Expr::Indicator(lo, hi) => {
                if *lo > a && *lo < b {
                    out.push(*lo);
                }
                if *hi > a && *hi < b {
                    out.push(*hi);
                }
            }
            Expr::Neg(e) | Expr::Fun(_, e) => e.collect_breakpoints(a, b, out),
            Expr::Bin(_, l, r) => {
                l.collect_breakpoints(a, b, out);
                r.collect_breakpoints(a, b, out);
            }
            _ => {}
        }
    }

    pub fn references_lambda(&self) -> bool {
        match self {
            Expr::Lambda => true,
            Expr::Neg(a) | Expr::Fun(_, a) => a.references_lambda(),
            Expr::Bin(_, a, b) => a.references_lambda() || b.references_lambda(),
            _ => false,
        }
    }

    pub fn references_x(&self) -> bool {
        match self {
            Expr::X => true,
            Expr::Indicator(_, _) => true,
            Expr::Neg(a) | Expr::Fun(_, a) => a.references_x(),
            Expr::Bin(_, a, b) => a.references_x() || b.references_x(),
            _ => false,
        }
    }
}

// ---------------------------------------------------------------------------
// Printer

/// Binding strength for parenthesization.  Atoms 5, `^` 4, unary minus and
/// negative literals 3, `* /` 2, `+ -` 1.
fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Num(v) if *v < 0.0 || v.is_sign_negative() => 3,
        Expr::Num(_) | Expr::X | Expr::Lambda | Expr::Pi | Expr::Fun(_, _) | Expr::Indicator(_, _) => 5,
        Expr::Bin(BinOp::Pow, _, _) => 4,
        Expr::Neg(_) => 3,
        Expr::Bin(BinOp::Mul, _, _) | Expr::Bin(BinOp::Div, _, _) => 2,
        Expr::Bin(BinOp::Add, _, _) | Expr::Bin(BinOp::Sub, _, _) => 1,
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, need_parens: bool) -> fmt::Result {
    if need_parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::X => write!(f, "x"),
            Expr::Lambda => write!(f, "lambda"),
            Expr::Pi => write!(f, "pi"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                write_child(f, a, prec(a) < 3)
            }
            Expr::Bin(op, a, b) => match op {
                BinOp::Add | BinOp::Sub => {
                    write_child(f, a, prec(a) < 1)?;
                    write!(f, " {} ", if *op == BinOp::Add { "+" } else { "-" })?;
                    write_child(f, b, prec(b) <= 1)
                }
                BinOp::Mul | BinOp::Div => {
                    write_child(f, a, prec(a) < 2)?;
                    write!(f, "{}", if *op == BinOp::Mul { "*" } else { "/" })?;
                    write_child(f, b, prec(b) <= 2)
                }
                BinOp::Pow => {
                    write_child(f, a, prec(a) <= 4)?;
                    write!(f, "^")?;
                    write_child(f, b, prec(b) < 3)
                }
            },
            Expr::Fun(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Indicator(lo, hi) => write!(f, "indicator({lo},{hi})"),
        }
    }
}

fn powi(a: Complex64, mut n: i64) -> Complex64 {
    let inv = n < 0;
    if inv {
        n = -n;
    }
    let mut base = a;
    let mut acc = Complex64::new(1.0, 0.0);
    while n > 0 {
        if n & 1 == 1 {
            acc *= base;
        }
        base *= base;
        n >>= 1;
    }
    if inv {
        Complex64::new(1.0, 0.0) / acc
    } else {
        acc
    }
}
