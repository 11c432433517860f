use thiserror::Error;

use super::{BinaryOp, Expr, ParamEnv, UnaryOp};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{kind} in `{subtree}`")]
pub struct EvalError {
    pub kind: EvalErrorKind,
    /// The offending subtree, printed.
    pub subtree: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalErrorKind {
    #[error("division by zero")]
    DivisionByZero,
    #[error("log of a non-positive value")]
    LogOfNonPositive,
    #[error("sqrt of a negative value")]
    SqrtOfNegative,
    #[error("non-integer power of a negative base")]
    NegativeBasePower,
    #[error("non-finite result")]
    Overflow,
    #[error("parameter '{0}' has no value")]
    UnknownParameter(String),
    #[error("state variable x{0} is out of range")]
    VariableOutOfRange(usize),
}

/// How conditionals close to their switching surface are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SeamPolicy {
    /// Evaluate the predicate as written.
    #[default]
    Strict,
    /// Where `|lhs - rhs| <= margin`, take the given branch regardless of the predicate.
    Force { margin: f64, then: bool },
}

fn fail(kind: EvalErrorKind, e: &Expr) -> EvalError {
    EvalError {
        kind,
        subtree: e.to_string(),
    }
}

pub(crate) fn is_integer(v: f64) -> bool {
    v.fract() == 0.0 && v.abs() < 2f64.powi(31)
}

pub(crate) fn apply_unary(op: UnaryOp, a: f64) -> Result<f64, EvalErrorKind> {
    let v = match op {
        UnaryOp::Neg => -a,
        UnaryOp::Exp => a.exp(),
        UnaryOp::Log if a <= 0.0 => return Err(EvalErrorKind::LogOfNonPositive),
        UnaryOp::Log => a.ln(),
        UnaryOp::Sin => a.sin(),
        UnaryOp::Cos => a.cos(),
        UnaryOp::Tanh => a.tanh(),
        UnaryOp::Sqrt if a < 0.0 => return Err(EvalErrorKind::SqrtOfNegative),
        UnaryOp::Sqrt => a.sqrt(),
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalErrorKind::Overflow)
    }
}

pub(crate) fn apply_binary(op: BinaryOp, a: f64, b: f64) -> Result<f64, EvalErrorKind> {
    let v = match op {
        BinaryOp::Add => a + b,
        BinaryOp::Sub => a - b,
        BinaryOp::Mul => a * b,
        BinaryOp::Div if b == 0.0 => return Err(EvalErrorKind::DivisionByZero),
        BinaryOp::Div => a / b,
        BinaryOp::Pow => {
            if a == 0.0 && b < 0.0 {
                return Err(EvalErrorKind::DivisionByZero);
            }
            if is_integer(b) {
                a.powi(b as i32)
            } else if a < 0.0 {
                return Err(EvalErrorKind::NegativeBasePower);
            } else {
                a.powf(b)
            }
        }
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalErrorKind::Overflow)
    }
}

impl Expr {
    /// Value at state `x` (0-based slice, `x[0]` is `x1`).
    pub fn eval(&self, x: &[f64], env: &ParamEnv) -> Result<f64, EvalError> {
        self.eval_with(x, env, SeamPolicy::Strict)
    }

    pub fn eval_with(&self, x: &[f64], env: &ParamEnv, seam: SeamPolicy) -> Result<f64, EvalError> {
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::Var(i) => match i.checked_sub(1).and_then(|k| x.get(k)) {
                Some(v) => Ok(*v),
                None => Err(fail(EvalErrorKind::VariableOutOfRange(*i), self)),
            },
            Expr::Param(name) => env
                .get(name)
                .copied()
                .ok_or_else(|| fail(EvalErrorKind::UnknownParameter(name.clone()), self)),
            Expr::Unary(op, a) => {
                let a = a.eval_with(x, env, seam)?;
                apply_unary(*op, a).map_err(|k| fail(k, self))
            }
            Expr::Binary(op, a, b) => {
                let a = a.eval_with(x, env, seam)?;
                let b = b.eval_with(x, env, seam)?;
                apply_binary(*op, a, b).map_err(|k| fail(k, self))
            }
            Expr::Cond(c) => {
                let l = c.lhs.eval_with(x, env, seam)?;
                let r = c.rhs.eval_with(x, env, seam)?;
                let take_then = match seam {
                    SeamPolicy::Force { margin, then } if (l - r).abs() <= margin => then,
                    _ => c.cmp.holds(l, r),
                };
                if take_then {
                    c.then.eval_with(x, env, seam)
                } else {
                    c.otherwise.eval_with(x, env, seam)
                }
            }
        }
    }

    /// True when some conditional in the tree has `|lhs - rhs| <= margin` at `x`.
    pub fn near_seam(&self, x: &[f64], env: &ParamEnv, margin: f64) -> bool {
        self.conditionals()
            .into_iter()
            .any(|c| match (c.lhs.eval(x, env), c.rhs.eval(x, env)) {
                (Ok(l), Ok(r)) => (l - r).abs() <= margin,
                _ => false,
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;

    fn env_m(m: f64) -> ParamEnv {
        ParamEnv::from([("M".to_string(), m)])
    }

    #[test]
    fn cube_at_two() {
        let e = parse_expr("x1^3", 1, &["M"]).unwrap();
        assert_eq!(e.eval(&[2.0], &ParamEnv::new()).unwrap(), 8.0);
    }

    #[test]
    fn piecewise_branches() {
        let e = parse_expr("if(x1 >= M, x1 - M, 0)", 1, &["M"]).unwrap();
        assert_eq!(e.eval(&[0.5], &env_m(1.0)).unwrap(), 0.0);
        assert_eq!(e.eval(&[1.5], &env_m(1.0)).unwrap(), 0.5);
    }

    #[test]
    fn untaken_branch_is_not_evaluated() {
        let e = parse_expr("if(x1 > 0, log(x1), 0)", 1, &["M"]).unwrap();
        assert_eq!(e.eval(&[-1.0], &ParamEnv::new()).unwrap(), 0.0);
    }

    #[test]
    fn domain_errors_name_the_subtree() {
        let env = ParamEnv::new();
        let e = parse_expr("1 + 1/(x1 - 1)", 1, &["M"]).unwrap();
        let err = e.eval(&[1.0], &env).unwrap_err();
        assert_eq!(err.kind, EvalErrorKind::DivisionByZero);
        assert_eq!(err.subtree, "(1 / (x1 - 1))");

        let e = parse_expr("log(x1)", 1, &["M"]).unwrap();
        assert_eq!(e.eval(&[0.0], &env).unwrap_err().kind, EvalErrorKind::LogOfNonPositive);
        let e = parse_expr("sqrt(x1)", 1, &["M"]).unwrap();
        assert_eq!(e.eval(&[-1.0], &env).unwrap_err().kind, EvalErrorKind::SqrtOfNegative);
        let e = parse_expr("x1^0.5", 1, &["M"]).unwrap();
        assert_eq!(
            e.eval(&[-1.0], &env).unwrap_err().kind,
            EvalErrorKind::NegativeBasePower
        );
        let e = parse_expr("x1^3", 1, &["M"]).unwrap();
        assert_eq!(e.eval(&[-2.0], &env).unwrap(), -8.0);
        let e = parse_expr("M", 1, &["M"]).unwrap();
        assert!(matches!(
            e.eval(&[0.0], &env).unwrap_err().kind,
            EvalErrorKind::UnknownParameter(_)
        ));
    }

    #[test]
    fn forced_seam_branches() {
        let e = parse_expr("if(x1 >= M, x1 - M, 0)", 1, &["M"]).unwrap();
        let env = env_m(1.0);
        let near = 1.0 - 1e-12;
        assert!(e.near_seam(&[near], &env, 1e-9));
        assert!(!e.near_seam(&[0.5], &env, 1e-9));
        let then = SeamPolicy::Force {
            margin: 1e-9,
            then: true,
        };
        let other = SeamPolicy::Force {
            margin: 1e-9,
            then: false,
        };
        assert!((e.eval_with(&[near], &env, then).unwrap() + 1e-12).abs() < 1e-15);
        assert_eq!(e.eval_with(&[near], &env, other).unwrap(), 0.0);
    }
}
