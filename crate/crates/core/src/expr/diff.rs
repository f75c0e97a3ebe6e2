use super::normalize::{add, mul, pow};
use super::{Expr, Func, Symbol};

pub(super) fn differentiate(e: &Expr, s: &Symbol) -> Expr {
    if !e.contains(s) {
        return Expr::zero();
    }
    match e {
        Expr::Const(_) => Expr::zero(),
        Expr::Sym(t) => {
            if t == s {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Expr::Add(cs) => add(cs.iter().map(|c| differentiate(c, s)).collect()),
        Expr::Mul(cs) => {
            let mut terms = Vec::with_capacity(cs.len());
            for (i, c) in cs.iter().enumerate() {
                let dc = differentiate(c, s);
                if dc.is_zero() {
                    continue;
                }
                let mut fs: Vec<Expr> = cs
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, f)| f.clone())
                    .collect();
                fs.push(dc);
                terms.push(mul(fs));
            }
            add(terms)
        }
        Expr::Pow(b, k) => {
            let db = differentiate(b, s);
            mul(vec![Expr::int(*k), pow(b.as_ref().clone(), k - 1), db])
        }
        Expr::Div(..) => differentiate(&e.normalize(), s),
        Expr::Fun(f, args) => match f {
            Func::Sin => mul(vec![args[0].cos(), differentiate(&args[0], s)]),
            Func::Cos => mul(vec![Expr::int(-1), args[0].sin(), differentiate(&args[0], s)]),
            Func::Sqrt => mul(vec![
                Expr::ratio(1, 2),
                pow(e.clone(), -1),
                differentiate(&args[0], s),
            ]),
            Func::Atan2 => {
                // d atan2(u, v) = (v du - u dv) / (u^2 + v^2)
                let (u, v) = (&args[0], &args[1]);
                let du = differentiate(u, s);
                let dv = differentiate(v, s);
                let num = add(vec![
                    mul(vec![v.clone(), du]),
                    mul(vec![Expr::int(-1), u.clone(), dv]),
                ]);
                let den = add(vec![pow(u.clone(), 2), pow(v.clone(), 2)]);
                mul(vec![num, pow(den, -1)])
            }
        },
    }
}

#[cfg(test)]
mod tests {
    use super::super::{Expr, Symbol};

    #[test]
    fn polynomial_rule() {
        let x = Expr::sym("x");
        let y = Expr::sym("y");
        let e = x.pow(2) + y.pow(2);
        assert_eq!(e.diff(&Symbol::new("x")), x * 2);
    }

    #[test]
    fn atan2_rule() {
        let x = Expr::sym("x");
        let y = Expr::sym("y");
        let d = x.atan2(&y).diff(&Symbol::new("x"));
        assert_eq!(d, &y / (x.pow(2) + y.pow(2)));
    }

    #[test]
    fn sqrt_rule() {
        let x = Expr::sym("x");
        let y = Expr::sym("y");
        let r = (x.pow(2) + y.pow(2)).sqrt();
        assert_eq!(r.diff(&Symbol::new("y")), &y / &r);
    }

    #[test]
    fn constants_vanish() {
        assert!(Expr::ratio(3, 7).diff(&Symbol::new("x")).is_zero());
        assert!(Expr::sym("y").sin().diff(&Symbol::new("x")).is_zero());
    }
}
