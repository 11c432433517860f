//! Scalar expressions over state variables `x1..xn` and named parameters.
//!
//! An [`Expr`] is an immutable tree. It can be parsed from text
//! ([`parse_expr`]), evaluated ([`Expr::eval`]), differentiated exactly
//! ([`differentiate`]) and tidied with local rewrites ([`simplify`]).
//! `Display` prints a fully parenthesized form that parses back to a
//! value-equal tree.

mod diff;
mod eval;
pub(crate) mod parse;
mod simplify;

use std::collections::BTreeMap;
use std::fmt;

pub use diff::differentiate;
pub use eval::{EvalError, EvalErrorKind, SeamPolicy};
pub use parse::{parse_expr, ParseError, ParseErrorKind};
pub use simplify::simplify;

/// Parameter name to value.
pub type ParamEnv = BTreeMap<String, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Exp,
    Log,
    Sin,
    Cos,
    Tanh,
    Sqrt,
}

impl UnaryOp {
    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Tanh => "tanh",
            UnaryOp::Sqrt => "sqrt",
        }
    }

    pub(crate) fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => UnaryOp::Exp,
            "log" => UnaryOp::Log,
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "tanh" => UnaryOp::Tanh,
            "sqrt" => UnaryOp::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    /// The exponent never depends on the state.
    Pow,
}

impl BinaryOp {
    fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
        }
    }

    pub(crate) fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

/// `if(lhs cmp rhs, then, otherwise)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditional {
    pub lhs: Expr,
    pub cmp: CmpOp,
    pub rhs: Expr,
    pub then: Expr,
    pub otherwise: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    /// 1-based state index.
    Var(usize),
    Param(String),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Cond(Box<Conditional>),
}

impl Expr {
    pub fn var(i: usize) -> Self {
        Expr::Var(i)
    }

    pub fn param(name: impl Into<String>) -> Self {
        Expr::Param(name.into())
    }

    pub fn unary(op: UnaryOp, a: Expr) -> Self {
        Expr::Unary(op, Box::new(a))
    }

    pub fn binary(op: BinaryOp, a: Expr, b: Expr) -> Self {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn neg(a: Expr) -> Self {
        Expr::unary(UnaryOp::Neg, a)
    }

    pub fn add(a: Expr, b: Expr) -> Self {
        Expr::binary(BinaryOp::Add, a, b)
    }

    pub fn sub(a: Expr, b: Expr) -> Self {
        Expr::binary(BinaryOp::Sub, a, b)
    }

    pub fn mul(a: Expr, b: Expr) -> Self {
        Expr::binary(BinaryOp::Mul, a, b)
    }

    pub fn div(a: Expr, b: Expr) -> Self {
        Expr::binary(BinaryOp::Div, a, b)
    }

    pub fn pow(a: Expr, b: Expr) -> Self {
        Expr::binary(BinaryOp::Pow, a, b)
    }

    pub fn cond(lhs: Expr, cmp: CmpOp, rhs: Expr, then: Expr, otherwise: Expr) -> Self {
        Expr::Cond(Box::new(Conditional {
            lhs,
            cmp,
            rhs,
            then,
            otherwise,
        }))
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_const(&self, value: f64) -> bool {
        self.as_const() == Some(value)
    }

    /// Largest state index referenced, 0 when the expression is state-free.
    pub fn max_var(&self) -> usize {
        let mut max = 0;
        self.visit(&mut |e| {
            if let Expr::Var(i) = e {
                max = max.max(*i);
            }
        });
        max
    }

    pub fn depends_on_state(&self) -> bool {
        self.max_var() > 0
    }

    pub fn params(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.visit(&mut |e| {
            if let Expr::Param(name) = e {
                if !out.contains(name) {
                    out.push(name.clone());
                }
            }
        });
        out
    }

    pub fn conditionals(&self) -> Vec<&Conditional> {
        let mut out = Vec::new();
        fn walk<'a>(e: &'a Expr, out: &mut Vec<&'a Conditional>) {
            match e {
                Expr::Const(_) | Expr::Var(_) | Expr::Param(_) => {}
                Expr::Unary(_, a) => walk(a, out),
                Expr::Binary(_, a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                Expr::Cond(c) => {
                    out.push(c);
                    walk(&c.lhs, out);
                    walk(&c.rhs, out);
                    walk(&c.then, out);
                    walk(&c.otherwise, out);
                }
            }
        }
        walk(self, &mut out);
        out
    }

    /// Replaces every parameter found in `env` by its value.
    pub fn bind(&self, env: &ParamEnv) -> Expr {
        match self {
            Expr::Param(name) => match env.get(name) {
                Some(v) => Expr::Const(*v),
                None => self.clone(),
            },
            Expr::Const(_) | Expr::Var(_) => self.clone(),
            Expr::Unary(op, a) => Expr::unary(*op, a.bind(env)),
            Expr::Binary(op, a, b) => Expr::binary(*op, a.bind(env), b.bind(env)),
            Expr::Cond(c) => Expr::cond(
                c.lhs.bind(env),
                c.cmp,
                c.rhs.bind(env),
                c.then.bind(env),
                c.otherwise.bind(env),
            ),
        }
    }

    fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Const(_) | Expr::Var(_) | Expr::Param(_) => {}
            Expr::Unary(_, a) => a.visit(f),
            Expr::Binary(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Expr::Cond(c) => {
                c.lhs.visit(f);
                c.rhs.visit(f);
                c.then.visit(f);
                c.otherwise.visit(f);
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) if *c < 0.0 => write!(f, "(-{})", -c),
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(i) => write!(f, "x{i}"),
            Expr::Param(name) => f.write_str(name),
            Expr::Unary(UnaryOp::Neg, a) => write!(f, "(-{a})"),
            Expr::Unary(op, a) => write!(f, "{}({a})", op.name()),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Cond(c) => write!(
                f,
                "if({} {} {}, {}, {})",
                c.lhs,
                c.cmp.symbol(),
                c.rhs,
                c.then,
                c.otherwise
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bind_replaces_known_params_only() {
        let e = Expr::add(Expr::param("M"), Expr::param("K"));
        let env = ParamEnv::from([("M".to_string(), 2.0)]);
        assert_eq!(e.bind(&env), Expr::add(Expr::Const(2.0), Expr::param("K")));
    }

    #[test]
    fn display_is_parenthesized() {
        let e = Expr::neg(Expr::pow(Expr::var(1), Expr::Const(2.0)));
        assert_eq!(e.to_string(), "(-(x1 ^ 2))");
        assert_eq!(Expr::Const(-0.5).to_string(), "(-0.5)");
    }

    #[test]
    fn max_var_and_params() {
        let e = parse_expr("x3 * M + x1", 3, &["M"]).unwrap();
        assert_eq!(e.max_var(), 3);
        assert_eq!(e.params(), vec!["M".to_string()]);
    }
}
