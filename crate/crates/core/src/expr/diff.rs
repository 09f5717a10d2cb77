use std::collections::HashMap;

use super::{Expr, Func, Node};

pub(super) fn differentiate(e: &Expr, var: usize) -> Expr {
    let mut memo = HashMap::new();
    diff_rec(e, var, &mut memo)
}

fn diff_rec(e: &Expr, var: usize, memo: &mut HashMap<*const Node, Expr>) -> Expr {
    if let Some(d) = memo.get(&e.key()) {
        return d.clone();
    }
    let d = match e.node() {
        Node::Const(_) => Expr::zero(),
        Node::Var(i) => {
            if *i == var {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Node::Add(a, b) => diff_rec(a, var, memo).add(&diff_rec(b, var, memo)),
        Node::Mul(a, b) => {
            let da = diff_rec(a, var, memo);
            let db = diff_rec(b, var, memo);
            da.mul(b).add(&a.mul(&db))
        }
        Node::Div(a, b) => {
            let da = diff_rec(a, var, memo);
            let db = diff_rec(b, var, memo);
            if db.is_zero() {
                da.div(b)
            } else {
                da.mul(b).sub(&a.mul(&db)).div(&b.powi(2))
            }
        }
        Node::Neg(a) => diff_rec(a, var, memo).neg(),
        Node::Pow(a, k) => {
            let da = diff_rec(a, var, memo);
            Expr::integer(i64::from(*k)).mul(&a.powi(k - 1)).mul(&da)
        }
        Node::Func(f, a) => {
            let da = diff_rec(a, var, memo);
            if da.is_zero() {
                Expr::zero()
            } else {
                let outer = match f {
                    Func::Sin => a.cos(),
                    Func::Cos => a.sin().neg(),
                    Func::Exp => e.clone(),
                    Func::Log => Expr::one().div(a),
                    Func::Sqrt => Expr::rational(1, 2).div(e),
                };
                outer.mul(&da)
            }
        }
    };
    memo.insert(e.key(), d.clone());
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn elementary_rules() {
        let p = [0.3, 1.7];
        let cases = [
            ("sin(x0)*x1", "cos(x0)*x1"),
            ("exp(x0^2)", "2*x0*exp(x0^2)"),
            ("log(x1 + x0)", "1/(x1 + x0)"),
            ("sqrt(x1)*x0", "sqrt(x1)"),
            ("x0/x1", "1/x1"),
            ("1/(1 + x0^2)", "-2*x0/(1 + x0^2)^2"),
            ("x0^-3", "-3*x0^-4"),
        ];
        for (f, df) in cases {
            let d = Expr::parse(f).unwrap().differentiate(0);
            let want = Expr::parse(df).unwrap().evaluate(&p).unwrap();
            assert!(close(d.evaluate(&p).unwrap(), want), "{f}");
        }
    }

    #[test]
    fn independent_variable_gives_zero() {
        let e = Expr::parse("sin(x0)*exp(x0) + x0^5").unwrap();
        assert!(e.differentiate(1).is_zero());
    }

    #[test]
    fn shared_subexpressions_stay_shared() {
        let mut e = Expr::var(0);
        for _ in 0..30 {
            e = e.mul(&e).add(&Expr::one());
        }
        let d = e.differentiate(0);
        assert!(d.node_count() < 400);
    }
}
