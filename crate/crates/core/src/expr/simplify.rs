use super::eval::{apply_binary, apply_unary, is_integer};
use super::{BinaryOp, Expr, UnaryOp};

/// Constant folding plus local identities (`0+a`, `1*a`, `0*a`, `a^1`, ...).
///
/// Products are flattened so that constant coefficients collect in front and
/// integer powers of structurally equal bases merge (`x^2 * x^3` -> `x^5`).
/// The result agrees with the input wherever both are defined.
pub fn simplify(e: &Expr) -> Expr {
    match e {
        Expr::Const(_) | Expr::Var(_) | Expr::Param(_) => e.clone(),
        Expr::Unary(op, a) => unary(*op, simplify(a)),
        Expr::Binary(op, a, b) => {
            let (a, b) = (simplify(a), simplify(b));
            if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
                if let Ok(v) = apply_binary(*op, x, y) {
                    return Expr::Const(v);
                }
            }
            match op {
                BinaryOp::Add => add(a, b),
                BinaryOp::Sub => sub(a, b),
                BinaryOp::Mul => product(a, b),
                BinaryOp::Div => div(a, b),
                BinaryOp::Pow => pow(a, b),
            }
        }
        Expr::Cond(c) => {
            let lhs = simplify(&c.lhs);
            let rhs = simplify(&c.rhs);
            let then = simplify(&c.then);
            let otherwise = simplify(&c.otherwise);
            if let (Some(l), Some(r)) = (lhs.as_const(), rhs.as_const()) {
                return if c.cmp.holds(l, r) { then } else { otherwise };
            }
            if then == otherwise {
                return then;
            }
            Expr::cond(lhs, c.cmp, rhs, then, otherwise)
        }
    }
}

fn unary(op: UnaryOp, a: Expr) -> Expr {
    if let Some(c) = a.as_const() {
        if let Ok(v) = apply_unary(op, c) {
            return Expr::Const(v);
        }
    }
    if op == UnaryOp::Neg {
        match a {
            Expr::Unary(UnaryOp::Neg, inner) => return *inner,
            Expr::Binary(BinaryOp::Mul, x, y) => return product(Expr::Const(-1.0), Expr::mul(*x, *y)),
            _ => {}
        }
    }
    Expr::unary(op, a)
}

fn add(a: Expr, b: Expr) -> Expr {
    if a.is_const(0.0) {
        return b;
    }
    if b.is_const(0.0) {
        return a;
    }
    match (a, b) {
        (a, Expr::Unary(UnaryOp::Neg, y)) => sub(a, *y),
        (Expr::Unary(UnaryOp::Neg, y), b) => sub(b, *y),
        (a, b) => Expr::add(a, b),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    if b.is_const(0.0) {
        return a;
    }
    if a.is_const(0.0) {
        return unary(UnaryOp::Neg, b);
    }
    if a == b {
        return Expr::Const(0.0);
    }
    match b {
        Expr::Unary(UnaryOp::Neg, y) => add(a, *y),
        b => Expr::sub(a, b),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    if b.is_const(1.0) {
        return a;
    }
    if b.is_const(-1.0) {
        return unary(UnaryOp::Neg, a);
    }
    if a.is_const(0.0) {
        return Expr::Const(0.0);
    }
    Expr::div(a, b)
}

fn pow(a: Expr, b: Expr) -> Expr {
    if b.is_const(1.0) {
        return a;
    }
    if b.is_const(0.0) || a.is_const(1.0) {
        return Expr::Const(1.0);
    }
    if let (Expr::Binary(BinaryOp::Pow, base, inner), Some(outer)) = (&a, b.as_const()) {
        if let Some(k) = inner.as_const() {
            if is_integer(k) && is_integer(outer) && is_integer(k * outer) {
                return pow((**base).clone(), Expr::Const(k * outer));
            }
        }
    }
    Expr::pow(a, b)
}

/// Flattened product: `coeff * prod(base_i ^ exp_i)`.
struct Product {
    coeff: f64,
    factors: Vec<(Expr, f64)>,
}

impl Product {
    fn collect(&mut self, e: Expr) {
        match e {
            Expr::Const(c) => self.coeff *= c,
            Expr::Binary(BinaryOp::Mul, x, y) => {
                self.collect(*x);
                self.collect(*y);
            }
            Expr::Unary(UnaryOp::Neg, x) => {
                self.coeff = -self.coeff;
                self.collect(*x);
            }
            Expr::Binary(BinaryOp::Pow, base, k) if k.as_const().is_some_and(is_integer) => {
                self.push(*base, k.as_const().unwrap_or(1.0))
            }
            other => self.push(other, 1.0),
        }
    }

    fn push(&mut self, base: Expr, k: f64) {
        match self.factors.iter_mut().find(|(b, _)| *b == base) {
            Some((_, e)) => *e += k,
            None => self.factors.push((base, k)),
        }
    }
}

fn product(a: Expr, b: Expr) -> Expr {
    let mut p = Product {
        coeff: 1.0,
        factors: Vec::new(),
    };
    p.collect(a.clone());
    p.collect(b.clone());
    if !p.coeff.is_finite() || p.factors.iter().any(|(_, k)| !is_integer(*k)) {
        return Expr::mul(a, b);
    }
    if p.coeff == 0.0 {
        return Expr::Const(0.0);
    }
    let body = p
        .factors
        .into_iter()
        .filter(|(_, k)| *k != 0.0)
        .map(|(base, k)| {
            if k == 1.0 {
                base
            } else {
                Expr::pow(base, Expr::Const(k))
            }
        })
        .reduce(Expr::mul);
    match body {
        None => Expr::Const(p.coeff),
        Some(body) if p.coeff == 1.0 => body,
        Some(body) if p.coeff == -1.0 => Expr::neg(body),
        Some(body) => Expr::mul(Expr::Const(p.coeff), body),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_expr, ParamEnv};

    fn x1() -> Expr {
        Expr::var(1)
    }

    #[test]
    fn multiplicative_identity() {
        assert_eq!(simplify(&Expr::mul(Expr::Const(1.0), x1())), x1());
    }

    #[test]
    fn additive_identity() {
        let e = Expr::add(
            Expr::Const(0.0),
            Expr::mul(Expr::Const(3.0), Expr::pow(x1(), Expr::Const(2.0))),
        );
        assert_eq!(
            simplify(&e),
            Expr::mul(Expr::Const(3.0), Expr::pow(x1(), Expr::Const(2.0)))
        );
    }

    #[test]
    fn annihilator() {
        let e = Expr::mul(Expr::Const(0.0), Expr::unary(UnaryOp::Exp, x1()));
        assert_eq!(simplify(&e), Expr::Const(0.0));
    }

    #[test]
    fn powers_merge() {
        let e = parse_expr("3 * x1^2 * x1^3", 1, &[] as &[&str]).unwrap();
        assert_eq!(simplify(&e).to_string(), "(3 * (x1 ^ 5))");
        let e = parse_expr("(5 * x1^4) * (3 * x1^3)", 1, &[] as &[&str]).unwrap();
        assert_eq!(simplify(&e).to_string(), "(15 * (x1 ^ 7))");
        let e = parse_expr("x1 * x1^(-1)", 1, &[] as &[&str]).unwrap();
        assert_eq!(simplify(&e), Expr::Const(1.0));
    }

    #[test]
    fn folding_skips_invalid_constants() {
        let e = Expr::div(Expr::Const(1.0), Expr::Const(0.0));
        assert_eq!(simplify(&e), e);
        let e = Expr::unary(UnaryOp::Log, Expr::Const(-1.0));
        assert_eq!(simplify(&e), e);
    }

    #[test]
    fn conditional_rules() {
        let e = parse_expr("if(x1 > 0, x1 * 1, x1 + 0)", 1, &[] as &[&str]).unwrap();
        assert_eq!(simplify(&e), x1());
        let e = parse_expr("if(2 > 1, x1, 0)", 1, &[] as &[&str]).unwrap();
        assert_eq!(simplify(&e), x1());
    }

    #[test]
    fn negation_rules() {
        let e = parse_expr("-(-x1)", 1, &[] as &[&str]).unwrap();
        assert_eq!(simplify(&e), x1());
        let e = parse_expr("x1 - (-x1)", 1, &[] as &[&str]).unwrap();
        assert_eq!(simplify(&e), Expr::add(x1(), x1()));
        let e = parse_expr("x1 - x1", 1, &[] as &[&str]).unwrap();
        assert_eq!(simplify(&e), Expr::Const(0.0));
        let env = ParamEnv::new();
        let e = parse_expr("-(2 * x1)", 1, &[] as &[&str]).unwrap();
        assert_eq!(simplify(&e).eval(&[3.0], &env).unwrap(), -6.0);
    }
}
