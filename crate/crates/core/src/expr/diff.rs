use super::{simplify, BinaryOp, Expr, UnaryOp};

/// Exact partial derivative with respect to `x_i` (1-based), simplified.
///
/// Conditionals are differentiated branch-wise with the predicate kept as is,
/// so the result is meaningless exactly on a switching surface.
pub fn differentiate(e: &Expr, i: usize) -> Expr {
    simplify(&d(e, i))
}

fn d(e: &Expr, i: usize) -> Expr {
    match e {
        Expr::Const(_) | Expr::Param(_) => Expr::Const(0.0),
        Expr::Var(j) => Expr::Const(if *j == i { 1.0 } else { 0.0 }),
        Expr::Unary(op, a) => {
            let da = d(a, i);
            if da.is_const(0.0) {
                return Expr::Const(0.0);
            }
            let a = (**a).clone();
            let outer = match op {
                UnaryOp::Neg => return Expr::neg(da),
                UnaryOp::Exp => e.clone(),
                UnaryOp::Log => return Expr::div(da, a),
                UnaryOp::Sin => Expr::unary(UnaryOp::Cos, a),
                UnaryOp::Cos => Expr::neg(Expr::unary(UnaryOp::Sin, a)),
                UnaryOp::Tanh => Expr::sub(Expr::Const(1.0), Expr::pow(e.clone(), Expr::Const(2.0))),
                UnaryOp::Sqrt => {
                    return Expr::div(da, Expr::mul(Expr::Const(2.0), e.clone()));
                }
            };
            Expr::mul(outer, da)
        }
        Expr::Binary(op, a, b) => {
            let (da, db) = (d(a, i), d(b, i));
            let (a, b) = ((**a).clone(), (**b).clone());
            match op {
                BinaryOp::Add => Expr::add(da, db),
                BinaryOp::Sub => Expr::sub(da, db),
                BinaryOp::Mul => Expr::add(Expr::mul(da, b), Expr::mul(a, db)),
                BinaryOp::Div => Expr::div(
                    Expr::sub(Expr::mul(da, b.clone()), Expr::mul(a, db)),
                    Expr::pow(b, Expr::Const(2.0)),
                ),
                BinaryOp::Pow if !b.depends_on_state() => {
                    // k * a^(k-1) * a'
                    let lowered = simplify(&Expr::sub(b.clone(), Expr::Const(1.0)));
                    Expr::mul(Expr::mul(b, Expr::pow(a, lowered)), da)
                }
                BinaryOp::Pow => {
                    // a^b * (b' ln a + b a'/a)
                    Expr::mul(
                        e.clone(),
                        Expr::add(
                            Expr::mul(db, Expr::unary(UnaryOp::Log, a.clone())),
                            Expr::div(Expr::mul(b, da), a),
                        ),
                    )
                }
            }
        }
        Expr::Cond(c) => Expr::cond(c.lhs.clone(), c.cmp, c.rhs.clone(), d(&c.then, i), d(&c.otherwise, i)),
    }
}
