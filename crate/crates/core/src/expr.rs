//! Integer expressions over classical variables. Comparisons evaluate to 0/1;
//! division and modulus are Euclidean.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExprError {
    #[error("variable `{name}` is unbound")]
    Unbound { name: String },
    #[error("division or modulus by zero")]
    DivideByZero,
    #[error("integer overflow while evaluating expression")]
    Overflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl BinOp {
    fn token(&self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "div",
            BinOp::Mod => "mod",
            BinOp::Eq => "=",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Const(i64),
    Var(String),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Self {
        Expr::Var(name.into())
    }

    pub fn con(value: i64) -> Self {
        Expr::Const(value)
    }

    pub fn bin(op: BinOp, left: Expr, right: Expr) -> Self {
        Expr::Bin(op, Box::new(left), Box::new(right))
    }

    pub fn plus(left: Expr, right: Expr) -> Self {
        Self::bin(BinOp::Add, left, right)
    }

    pub fn eq(left: Expr, right: Expr) -> Self {
        Self::bin(BinOp::Eq, left, right)
    }

    /// The set of variable names the expression reads.
    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, into: &mut BTreeSet<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(name) => {
                into.insert(name.clone());
            }
            Expr::Bin(_, l, r) => {
                l.collect_vars(into);
                r.collect_vars(into);
            }
        }
    }

    /// Replaces every occurrence of the variable `name` with `replacement`.
    pub fn substitute(&self, name: &str, replacement: &Expr) -> Expr {
        match self {
            Expr::Const(_) => self.clone(),
            Expr::Var(v) if v == name => replacement.clone(),
            Expr::Var(_) => self.clone(),
            Expr::Bin(op, l, r) => Expr::bin(
                *op,
                l.substitute(name, replacement),
                r.substitute(name, replacement),
            ),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn child(e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            match e {
                Expr::Bin(..) => write!(f, "({e})"),
                _ => write!(f, "{e}"),
            }
        }
        match self {
            Expr::Const(v) => write!(f, "{v}"),
            Expr::Var(name) => f.write_str(name),
            Expr::Bin(op, l, r) => {
                child(l, f)?;
                write!(f, " {} ", op.token())?;
                child(r, f)
            }
        }
    }
}

/// Evaluates `e` against a variable store.
pub fn eval_expr(e: &Expr, store: &BTreeMap<String, i64>) -> Result<i64, ExprError> {
    match e {
        Expr::Const(v) => Ok(*v),
        Expr::Var(name) => store.get(name).copied().ok_or_else(|| ExprError::Unbound {
            name: name.clone(),
        }),
        Expr::Bin(op, l, r) => {
            let a = eval_expr(l, store)?;
            let b = eval_expr(r, store)?;
            match op {
                BinOp::Add => a.checked_add(b).ok_or(ExprError::Overflow),
                BinOp::Sub => a.checked_sub(b).ok_or(ExprError::Overflow),
                BinOp::Mul => a.checked_mul(b).ok_or(ExprError::Overflow),
                BinOp::Div => {
                    if b == 0 {
                        Err(ExprError::DivideByZero)
                    } else {
                        a.checked_div_euclid(b).ok_or(ExprError::Overflow)
                    }
                }
                BinOp::Mod => {
                    if b == 0 {
                        Err(ExprError::DivideByZero)
                    } else {
                        a.checked_rem_euclid(b).ok_or(ExprError::Overflow)
                    }
                }
                BinOp::Eq => Ok((a == b) as i64),
                BinOp::Ne => Ok((a != b) as i64),
                BinOp::Lt => Ok((a < b) as i64),
                BinOp::Le => Ok((a <= b) as i64),
                BinOp::Gt => Ok((a > b) as i64),
                BinOp::Ge => Ok((a >= b) as i64),
            }
        }
    }
}
