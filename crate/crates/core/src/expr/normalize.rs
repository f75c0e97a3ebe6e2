use std::collections::BTreeMap;

use super::{Expr, Func, Number};

/// Products of sums are only multiplied out while the result stays below this
/// many terms; larger products are kept factored.
const EXPANSION_LIMIT: usize = 4096;

pub(super) fn normalize(e: &Expr) -> Expr {
    match e {
        Expr::Const(_) | Expr::Sym(_) => e.clone(),
        Expr::Add(cs) => add(cs.iter().map(normalize).collect()),
        Expr::Mul(cs) => mul(cs.iter().map(normalize).collect()),
        Expr::Pow(b, k) => pow(normalize(b), *k),
        Expr::Div(n, d) => mul(vec![normalize(n), pow(normalize(d), -1)]),
        Expr::Fun(f, args) => fun(*f, args.iter().map(normalize).collect()),
    }
}

/// Splits a normalized term into its constant coefficient and remaining factors.
fn split_term(t: Expr) -> (Number, Vec<Expr>) {
    match t {
        Expr::Const(n) => (n, Vec::new()),
        Expr::Mul(mut fs) => {
            if let Some(Expr::Const(_)) = fs.first() {
                let Expr::Const(c) = fs.remove(0) else { unreachable!() };
                (c, fs)
            } else {
                (Number::one(), fs)
            }
        }
        other => (Number::one(), vec![other]),
    }
}

fn build_term(c: Number, mut factors: Vec<Expr>) -> Expr {
    if factors.is_empty() {
        return Expr::Const(c);
    }
    if c.is_one() {
        if factors.len() == 1 {
            return factors.pop().unwrap();
        }
        return Expr::Mul(factors);
    }
    let mut v = Vec::with_capacity(factors.len() + 1);
    v.push(Expr::Const(c));
    v.extend(factors);
    Expr::Mul(v)
}

/// Sum of already-normalized children.
pub(super) fn add(children: Vec<Expr>) -> Expr {
    let mut constant = Number::zero();
    let mut terms: BTreeMap<Vec<Expr>, Number> = BTreeMap::new();
    let mut stack = children;
    while let Some(c) = stack.pop() {
        match c {
            Expr::Add(cs) => stack.extend(cs),
            Expr::Const(n) => constant = constant.add(&n),
            other => {
                let (coeff, rest) = split_term(other);
                let slot = terms.entry(rest).or_insert_with(Number::zero);
                *slot = slot.add(&coeff);
            }
        }
    }
    let mut out = Vec::with_capacity(terms.len() + 1);
    if !constant.is_zero() {
        out.push(Expr::Const(constant));
    }
    for (rest, coeff) in terms {
        if !coeff.is_zero() {
            out.push(build_term(coeff, rest));
        }
    }
    match out.len() {
        0 => Expr::zero(),
        1 => out.pop().unwrap(),
        _ => Expr::Add(out),
    }
}

/// Product of already-normalized children.
pub(super) fn mul(children: Vec<Expr>) -> Expr {
    let mut coeff = Number::one();
    let mut powers: BTreeMap<Expr, i64> = BTreeMap::new();
    let mut stack = children;
    while let Some(c) = stack.pop() {
        match c {
            Expr::Const(n) => coeff = coeff.mul(&n),
            Expr::Mul(fs) => stack.extend(fs),
            Expr::Pow(b, k) => *powers.entry(*b).or_insert(0) += k,
            other => *powers.entry(other).or_insert(0) += 1,
        }
    }
    if coeff.is_zero() {
        return Expr::Const(coeff);
    }
    // 0^-k is singular for every k and swallows the coefficient; keep a single
    // canonical representative.
    for (b, k) in powers.iter_mut() {
        if *k < 0 && b.is_zero() {
            *k = -1;
            coeff = Number::one();
        }
    }

    // sqrt(u)^(2j) -> u^j, then re-collect.
    let mut released = Vec::new();
    powers.retain(|b, k| {
        if *k == 0 {
            return false;
        }
        if let Expr::Fun(Func::Sqrt, args) = b {
            if *k % 2 == 0 {
                released.push(pow(args[0].clone(), *k / 2));
                return false;
            }
        }
        true
    });
    if !released.is_empty() {
        let mut rest: Vec<Expr> = powers.into_iter().map(|(b, k)| raw_pow(b, k)).collect();
        rest.push(Expr::Const(coeff));
        rest.extend(released);
        return mul(rest);
    }

    // Multiply out sums raised to small positive powers.
    let mut sums = Vec::new();
    let mut plain = Vec::new();
    let mut projected = 1usize;
    for (b, k) in powers {
        match &b {
            Expr::Add(ts) if k > 0 => {
                projected = projected.saturating_mul(ts.len().saturating_pow(k as u32));
                sums.push((b, k));
            }
            _ => plain.push(raw_pow(b, k)),
        }
    }
    if !sums.is_empty() && projected <= EXPANSION_LIMIT {
        let mut partial: Vec<Vec<Expr>> = vec![{
            let mut v = plain;
            v.push(Expr::Const(coeff));
            v
        }];
        for (b, k) in sums {
            let Expr::Add(ts) = b else { unreachable!() };
            for _ in 0..k {
                let mut next = Vec::with_capacity(partial.len() * ts.len());
                for p in &partial {
                    for t in &ts {
                        let mut q = p.clone();
                        q.push(t.clone());
                        next.push(q);
                    }
                }
                partial = next;
            }
        }
        return add(partial.into_iter().map(mul).collect());
    }
    for (b, k) in sums {
        plain.push(raw_pow(b, k));
    }
    plain.sort();
    build_term(coeff, plain)
}

fn raw_pow(b: Expr, k: i64) -> Expr {
    if k == 1 {
        b
    } else {
        Expr::Pow(Box::new(b), k)
    }
}

/// Integer power of an already-normalized base.
pub(super) fn pow(b: Expr, k: i64) -> Expr {
    if k == 0 {
        return Expr::one();
    }
    if k == 1 {
        return b;
    }
    match b {
        Expr::Const(n) if n.is_zero() && k < 0 => Expr::Pow(Box::new(Expr::Const(n)), -1),
        Expr::Const(n) => match n.powi(k) {
            Some(v) => Expr::Const(v),
            None => Expr::Pow(Box::new(Expr::Const(n)), k),
        },
        Expr::Pow(inner, j) => pow(*inner, j * k),
        Expr::Mul(fs) => mul(fs.into_iter().map(|f| pow(f, k)).collect()),
        Expr::Fun(Func::Sqrt, mut args) if k % 2 == 0 => pow(args.pop().unwrap(), k / 2),
        Expr::Add(_) if k > 1 => mul(vec![b; k as usize]),
        other => Expr::Pow(Box::new(other), k),
    }
}

/// Negative leading coefficient, if any, so odd/even symmetry can be applied.
pub(super) fn strip_negative(e: &Expr) -> Option<Expr> {
    match e {
        Expr::Const(n) if n.is_negative() => Some(Expr::Const(n.neg())),
        Expr::Mul(fs) => match fs.first() {
            Some(Expr::Const(n)) if n.is_negative() => {
                let mut v = fs.clone();
                v[0] = Expr::Const(n.neg());
                Some(mul(v))
            }
            _ => None,
        },
        _ => None,
    }
}

pub(super) fn fun(f: Func, mut args: Vec<Expr>) -> Expr {
    match f {
        Func::Sin => {
            let a = args.pop().unwrap();
            match &a {
                Expr::Const(n) if n.is_zero() => return Expr::zero(),
                Expr::Const(Number::Float(v)) => return Expr::float(v.sin()),
                _ => {}
            }
            if let Some(pos) = strip_negative(&a) {
                return mul(vec![Expr::int(-1), fun(Func::Sin, vec![pos])]);
            }
            Expr::Fun(f, vec![a])
        }
        Func::Cos => {
            let a = args.pop().unwrap();
            match &a {
                Expr::Const(n) if n.is_zero() => return Expr::one(),
                Expr::Const(Number::Float(v)) => return Expr::float(v.cos()),
                _ => {}
            }
            if let Some(pos) = strip_negative(&a) {
                return fun(Func::Cos, vec![pos]);
            }
            Expr::Fun(f, vec![a])
        }
        Func::Sqrt => {
            let a = args.pop().unwrap();
            if let Expr::Const(n) = &a {
                if let Some(r) = n.exact_sqrt() {
                    return Expr::Const(r);
                }
                if let Number::Float(v) = n {
                    if *v >= 0.0 {
                        return Expr::float(v.sqrt());
                    }
                }
            }
            Expr::Fun(f, vec![a])
        }
        Func::Atan2 => {
            let (u, v) = (&args[0], &args[1]);
            if let (Expr::Const(a), Expr::Const(b)) = (u, v) {
                if a.is_zero() && !b.is_zero() && !b.is_negative() {
                    return Expr::zero();
                }
                if matches!(a, Number::Float(_)) || matches!(b, Number::Float(_)) {
                    let (a, b) = (a.to_f64(), b.to_f64());
                    if a != 0.0 || b != 0.0 {
                        return Expr::float(a.atan2(b));
                    }
                }
            }
            Expr::Fun(f, args)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::Expr;

    fn x() -> Expr {
        Expr::sym("x")
    }
    fn y() -> Expr {
        Expr::sym("y")
    }

    #[test]
    fn merges_like_terms_and_constants() {
        let e = x() + 2 + x() * 3 - 2;
        assert_eq!(e, x() * 4);
    }

    #[test]
    fn collects_powers() {
        let e = x() * x() * x().recip();
        assert_eq!(e, x());
        assert_eq!((x() * y()).pow(2), x().pow(2) * y().pow(2));
    }

    #[test]
    fn expands_products_of_sums() {
        let e = (x() + y()) * (x() - y());
        assert_eq!(e, x().pow(2) - y().pow(2));
        let lhs = (x() + 1).pow(3);
        let rhs = x().pow(3) + x().pow(2) * 3 + x() * 3 + 1;
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn sqrt_squared_releases_argument() {
        let r = (x().pow(2) + y().pow(2)).sqrt();
        assert_eq!(&r * &r, x().pow(2) + y().pow(2));
        assert_eq!(Expr::int(2).sqrt() * Expr::int(2).sqrt(), Expr::int(2));
        assert_eq!(Expr::ratio(9, 4).sqrt(), Expr::ratio(3, 2));
    }

    #[test]
    fn sum_over_its_own_reciprocal_cancels() {
        let s = x() + y();
        assert_eq!(&s / &s, Expr::one());
    }

    #[test]
    fn trig_symmetry_and_zero() {
        assert_eq!((-x()).sin(), -x().sin());
        assert_eq!((-x()).cos(), x().cos());
        assert_eq!(Expr::zero().sin(), Expr::zero());
        assert_eq!(Expr::zero().cos(), Expr::one());
    }

    #[test]
    fn div_nodes_are_removed() {
        let raw = Expr::Div(Box::new(x()), Box::new(y()));
        assert_eq!(raw.normalize(), x() * y().recip());
    }
}
