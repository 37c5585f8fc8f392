//! Closed-form real functions of one variable.
//!
//! The DSL grammar (standard precedence, `^` right-associative):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' unary)?
//! primary := number | 'x' | 'pi' | 'e' | func '(' expr ')' | '(' expr ')'
//! func    := 'exp' | 'log' | 'sin' | 'cos' | 'sqrt'
//! ```
//!
//! `log` is the natural logarithm. A minus sign written directly on a numeric
//! literal becomes part of the constant.

mod function;
mod parser;

use std::fmt;

use thiserror::Error;

pub use function::{inverse_eval, FunctionError, FunctionSpec, InverseError, MonotoneHint};
pub use parser::{parse, ParseError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Var,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Func(Func, Box<Expr>),
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("domain error in `{node}` at x = {x}: {reason}")]
pub struct DomainError {
    pub node: String,
    pub x: f64,
    pub reason: &'static str,
}

/// A real number stored as `sign * exp(ln_abs)`; `sign == 0` encodes zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogAbs {
    pub ln_abs: f64,
    pub sign: i8,
}

impl LogAbs {
    pub const ZERO: LogAbs = LogAbs {
        ln_abs: f64::NEG_INFINITY,
        sign: 0,
    };

    pub fn from_f64(v: f64) -> LogAbs {
        if v == 0.0 {
            LogAbs::ZERO
        } else {
            LogAbs {
                ln_abs: v.abs().ln(),
                sign: if v > 0.0 { 1 } else { -1 },
            }
        }
    }

    pub fn value(self) -> f64 {
        if self.sign == 0 {
            0.0
        } else {
            f64::from(self.sign) * self.ln_abs.exp()
        }
    }

    fn neg(self) -> LogAbs {
        LogAbs {
            ln_abs: self.ln_abs,
            sign: -self.sign,
        }
    }

    fn add(self, other: LogAbs) -> LogAbs {
        if self.sign == 0 {
            return other;
        }
        if other.sign == 0 {
            return self;
        }
        let (big, small) = if self.ln_abs >= other.ln_abs {
            (self, other)
        } else {
            (other, self)
        };
        if big.ln_abs == f64::INFINITY {
            return big;
        }
        let t = (small.ln_abs - big.ln_abs).exp();
        if big.sign == small.sign {
            LogAbs {
                ln_abs: big.ln_abs + t.ln_1p(),
                sign: big.sign,
            }
        } else if t == 1.0 {
            LogAbs::ZERO
        } else {
            LogAbs {
                ln_abs: big.ln_abs + (-t).ln_1p(),
                sign: big.sign,
            }
        }
    }

    fn mul(self, other: LogAbs) -> LogAbs {
        if self.sign == 0 || other.sign == 0 {
            return LogAbs::ZERO;
        }
        LogAbs {
            ln_abs: self.ln_abs + other.ln_abs,
            sign: self.sign * other.sign,
        }
    }
}

fn is_integer(v: f64) -> bool {
    v.fract() == 0.0 && v.abs() < 2f64.powi(31)
}

impl Expr {
    pub fn constant(v: f64) -> Expr {
        Expr::Const(v)
    }

    pub fn contains_var(&self) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var => true,
            Expr::Neg(a) | Expr::Func(_, a) => a.contains_var(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.contains_var() || b.contains_var(),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var => 1,
            Expr::Neg(a) | Expr::Func(_, a) => 1 + a.node_count(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => 1 + a.node_count() + b.node_count(),
        }
    }

    fn domain_error(&self, x: f64, reason: &'static str) -> DomainError {
        DomainError {
            node: self.to_string(),
            x,
            reason,
        }
    }

    /// IEEE-754 double evaluation at `x`.
    pub fn eval(&self, x: f64) -> Result<f64, DomainError> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Var => x,
            Expr::Neg(a) => -a.eval(x)?,
            Expr::Add(a, b) => a.eval(x)? + b.eval(x)?,
            Expr::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Expr::Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Expr::Div(a, b) => {
                let den = b.eval(x)?;
                if den == 0.0 {
                    return Err(self.domain_error(x, "division by zero"));
                }
                a.eval(x)? / den
            }
            Expr::Pow(a, b) => {
                let base = a.eval(x)?;
                let exponent = b.eval(x)?;
                if base > 0.0 {
                    if exponent == 0.5 {
                        base.sqrt()
                    } else {
                        base.powf(exponent)
                    }
                } else if is_integer(exponent) {
                    if base == 0.0 && exponent < 0.0 {
                        return Err(self.domain_error(x, "negative power of zero"));
                    }
                    base.powi(exponent as i32)
                } else if base == 0.0 && exponent > 0.0 {
                    0.0
                } else {
                    return Err(self.domain_error(x, "non-integer power of a non-positive base"));
                }
            }
            Expr::Func(f, a) => {
                let u = a.eval(x)?;
                match f {
                    Func::Exp => u.exp(),
                    Func::Log => {
                        if u <= 0.0 {
                            return Err(self.domain_error(x, "log of a non-positive number"));
                        }
                        u.ln()
                    }
                    Func::Sin => u.sin(),
                    Func::Cos => u.cos(),
                    Func::Sqrt => {
                        if u < 0.0 {
                            return Err(self.domain_error(x, "sqrt of a negative number"));
                        }
                        u.sqrt()
                    }
                }
            }
        })
    }

    /// Evaluates `ln|e(x)|` and the sign of `e(x)` without forming `e(x)`,
    /// so `exp(x^2)` at `x = 1e6` is still comparable with its derivatives.
    pub fn eval_log(&self, x: f64) -> Result<LogAbs, DomainError> {
        Ok(match self {
            Expr::Const(c) => LogAbs::from_f64(*c),
            Expr::Var => LogAbs::from_f64(x),
            Expr::Neg(a) => a.eval_log(x)?.neg(),
            Expr::Add(a, b) => a.eval_log(x)?.add(b.eval_log(x)?),
            Expr::Sub(a, b) => a.eval_log(x)?.add(b.eval_log(x)?.neg()),
            Expr::Mul(a, b) => a.eval_log(x)?.mul(b.eval_log(x)?),
            Expr::Div(a, b) => {
                let den = b.eval_log(x)?;
                if den.sign == 0 {
                    return Err(self.domain_error(x, "division by zero"));
                }
                a.eval_log(x)?.mul(LogAbs {
                    ln_abs: -den.ln_abs,
                    sign: den.sign,
                })
            }
            Expr::Pow(a, b) => {
                let base = a.eval_log(x)?;
                let exponent = b.eval_log(x)?.value();
                match base.sign {
                    1 => LogAbs {
                        ln_abs: exponent * base.ln_abs,
                        sign: 1,
                    },
                    0 if exponent > 0.0 => LogAbs::ZERO,
                    -1 if is_integer(exponent) => LogAbs {
                        ln_abs: exponent * base.ln_abs,
                        sign: if (exponent as i64) % 2 == 0 { 1 } else { -1 },
                    },
                    0 if is_integer(exponent) && exponent == 0.0 => LogAbs::from_f64(1.0),
                    _ => {
                        return Err(
                            self.domain_error(x, "non-integer power of a non-positive base")
                        )
                    }
                }
            }
            Expr::Func(f, a) => match f {
                Func::Exp => {
                    let u = a.eval_log(x)?.value();
                    LogAbs { ln_abs: u, sign: 1 }
                }
                Func::Log => {
                    let u = a.eval_log(x)?;
                    if u.sign <= 0 {
                        return Err(self.domain_error(x, "log of a non-positive number"));
                    }
                    LogAbs::from_f64(u.ln_abs)
                }
                Func::Sqrt => {
                    let u = a.eval_log(x)?;
                    if u.sign < 0 {
                        return Err(self.domain_error(x, "sqrt of a negative number"));
                    }
                    if u.sign == 0 {
                        LogAbs::ZERO
                    } else {
                        LogAbs {
                            ln_abs: 0.5 * u.ln_abs,
                            sign: 1,
                        }
                    }
                }
                Func::Sin => LogAbs::from_f64(a.eval_log(x)?.value().sin()),
                Func::Cos => LogAbs::from_f64(a.eval_log(x)?.value().cos()),
            },
        })
    }

    /// Exact symbolic derivative with respect to `x`. Only trivial identities
    /// (`0 + e`, `1 * e`, constant folding) are simplified.
    pub fn differentiate(&self) -> Expr {
        use Expr::*;
        match self {
            Const(_) => Const(0.0),
            Var => Const(1.0),
            Neg(a) => neg(a.differentiate()),
            Add(a, b) => add(a.differentiate(), b.differentiate()),
            Sub(a, b) => sub(a.differentiate(), b.differentiate()),
            Mul(a, b) => add(
                mul(a.differentiate(), (**b).clone()),
                mul((**a).clone(), b.differentiate()),
            ),
            Div(a, b) => div(
                sub(
                    mul(a.differentiate(), (**b).clone()),
                    mul((**a).clone(), b.differentiate()),
                ),
                mul((**b).clone(), (**b).clone()),
            ),
            Pow(base, exponent) => {
                if !exponent.contains_var() {
                    let k = fold(exponent);
                    let lowered = match &k {
                        Const(c) => Const(c - 1.0),
                        other => sub(other.clone(), Const(1.0)),
                    };
                    mul(
                        mul(k, pow((**base).clone(), lowered)),
                        base.differentiate(),
                    )
                } else if !base.contains_var() {
                    mul(
                        self.clone(),
                        mul(func(self::Func::Log, fold(base)), exponent.differentiate()),
                    )
                } else {
                    mul(
                        self.clone(),
                        add(
                            mul(exponent.differentiate(), func(self::Func::Log, (**base).clone())),
                            div(
                                mul((**exponent).clone(), base.differentiate()),
                                (**base).clone(),
                            ),
                        ),
                    )
                }
            }
            Func(f, a) => {
                let inner = a.differentiate();
                let outer = match f {
                    self::Func::Exp => self.clone(),
                    self::Func::Log => return div(inner, (**a).clone()),
                    self::Func::Sin => func(self::Func::Cos, (**a).clone()),
                    self::Func::Cos => neg(func(self::Func::Sin, (**a).clone())),
                    self::Func::Sqrt => {
                        return div(inner, mul(Const(2.0), self.clone()));
                    }
                };
                mul(outer, inner)
            }
        }
    }
}

// Replaces a variable-free subtree by its value when that value is finite.
fn fold(e: &Expr) -> Expr {
    if e.contains_var() {
        return e.clone();
    }
    match e.eval(0.0) {
        Ok(v) if v.is_finite() => Expr::Const(v),
        _ => e.clone(),
    }
}

fn as_const(e: &Expr) -> Option<f64> {
    match e {
        Expr::Const(c) => Some(*c),
        _ => None,
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) => Expr::Const(x + y),
        (Some(x), _) if x == 0.0 => b,
        (_, Some(y)) if y == 0.0 => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) => Expr::Const(x - y),
        (Some(x), _) if x == 0.0 => neg(b),
        (_, Some(y)) if y == 0.0 => a,
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) => Expr::Const(x * y),
        (Some(x), _) | (_, Some(x)) if x == 0.0 => Expr::Const(0.0),
        (Some(x), _) if x == 1.0 => b,
        (_, Some(y)) if y == 1.0 => a,
        (Some(x), _) if x == -1.0 => neg(b),
        (_, Some(y)) if y == -1.0 => neg(a),
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (as_const(&a), as_const(&b)) {
        (Some(x), _) if x == 0.0 => Expr::Const(0.0),
        (_, Some(y)) if y == 1.0 => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Expr, b: Expr) -> Expr {
    match as_const(&b) {
        Some(y) if y == 1.0 => a,
        Some(y) if y == 0.0 => Expr::Const(1.0),
        _ => Expr::Pow(Box::new(a), Box::new(b)),
    }
}

fn func(f: Func, a: Expr) -> Expr {
    Expr::Func(f, Box::new(a))
}

/// Fully parenthesised form that `parse` maps back to the identical tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if c.is_sign_negative() {
                    write!(f, "(-{:?})", -c)
                } else {
                    write!(f, "{c:?}")
                }
            }
            Expr::Var => f.write_str("x"),
            Expr::Neg(a) => write!(f, "(-({a}))"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Func(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}
