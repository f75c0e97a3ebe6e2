//! Infix printer whose output reparses to the same normalized tree.
//!
//! The grammar binds unary minus to an atom (`-x^2` is `(-x)^2`), so negated
//! powers and products are printed as `-(...)`.

use std::fmt;

use num_traits::{One, Signed};

use super::normalize::strip_negative;
use super::{Expr, Number};

const SUM: u8 = 1;
const PRODUCT: u8 = 2;
const POWER: u8 = 3;
const ATOM: u8 = 4;

fn show(e: &Expr, min: u8) -> String {
    let (s, p) = render(e);
    if p < min {
        format!("({s})")
    } else {
        s
    }
}

fn number(n: &Number) -> (String, u8) {
    match n {
        Number::Rational(r) => {
            if r.is_negative() {
                let (s, _) = number(&Number::Rational(-r));
                return (format!("-{}", if r.is_integer() { s } else { format!("({s})") }), PRODUCT);
            }
            if r.is_integer() {
                (r.numer().to_string(), ATOM)
            } else {
                (format!("{}/{}", r.numer(), r.denom()), PRODUCT)
            }
        }
        Number::Float(f) => {
            if *f < 0.0 {
                (format!("-{}", -f), PRODUCT)
            } else {
                (format!("{f}"), ATOM)
            }
        }
    }
}

/// A sum raised to a power would be multiplied out on reparse, so `1/s^2` is
/// written `1/(s)/(s)`.
fn push_denominator(den: &mut Vec<String>, b: &Expr, k: i64) {
    if matches!(b, Expr::Add(_)) {
        for _ in 0..k {
            den.push(show(b, ATOM));
        }
    } else if k == 1 {
        den.push(show(b, POWER));
    } else {
        den.push(show(&Expr::Pow(Box::new(b.clone()), k), POWER));
    }
}

fn render(e: &Expr) -> (String, u8) {
    if !matches!(e, Expr::Const(_)) {
        if let Some(abs) = strip_negative(e) {
            return (format!("-{}", show(&abs, ATOM)), PRODUCT);
        }
    }
    match e {
        Expr::Const(n) => number(n),
        Expr::Sym(s) => (s.to_string(), ATOM),
        Expr::Fun(f, args) => {
            let a: Vec<String> = args.iter().map(|a| show(a, 0)).collect();
            (format!("{}({})", f.name(), a.join(", ")), ATOM)
        }
        Expr::Pow(b, k) if *k > 0 => (format!("{}^{}", show(b, ATOM), k), POWER),
        Expr::Pow(b, k) => {
            let mut den = Vec::new();
            push_denominator(&mut den, b, -k);
            (den.iter().fold("1".to_string(), |acc, d| format!("{acc}/{d}")), PRODUCT)
        }
        Expr::Div(n, d) => (format!("{}/{}", show(n, PRODUCT), show(d, POWER)), PRODUCT),
        Expr::Mul(fs) => {
            let mut num = Vec::new();
            let mut den = Vec::new();
            for f in fs {
                match f {
                    Expr::Const(Number::Rational(r)) => {
                        if !r.numer().is_one() {
                            num.push(r.numer().to_string());
                        }
                        if !r.denom().is_one() {
                            den.push(r.denom().to_string());
                        }
                    }
                    Expr::Pow(b, k) if *k < 0 => push_denominator(&mut den, b, -k),
                    other => num.push(show(other, POWER)),
                }
            }
            let n = if num.is_empty() { "1".to_string() } else { num.join("*") };
            // Chained divisions; a parenthesised product would be multiplied out on reparse.
            (den.iter().fold(n, |acc, d| format!("{acc}/{d}")), PRODUCT)
        }
        Expr::Add(ts) => {
            // Leading term positive when possible, constant last.
            let is_const = |t: &&Expr| matches!(t, Expr::Const(_));
            let mut order: Vec<&Expr> = ts
                .iter()
                .filter(|t| !is_const(t) && strip_negative(t).is_none())
                .collect();
            order.extend(ts.iter().filter(|t| !is_const(t) && strip_negative(t).is_some()));
            order.extend(ts.iter().filter(is_const));
            let mut out = String::new();
            for (i, t) in order.iter().enumerate() {
                let neg = match t {
                    Expr::Const(n) if n.is_negative() => Some(Expr::Const(n.neg())),
                    _ => strip_negative(t),
                };
                match (i, neg) {
                    (0, _) => out.push_str(&show(t, SUM)),
                    (_, Some(abs)) => {
                        out.push_str(" - ");
                        out.push_str(&show(&abs, PRODUCT));
                    }
                    (_, None) => {
                        out.push_str(" + ");
                        out.push_str(&show(t, PRODUCT));
                    }
                }
            }
            (out, SUM)
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&show(self, 0))
    }
}

#[cfg(test)]
mod tests {
    use super::super::Expr;

    fn roundtrip(s: &str) {
        let e: Expr = s.parse().unwrap();
        let printed = e.to_string();
        let back: Expr = printed.parse().unwrap_or_else(|err| panic!("{printed}: {err}"));
        assert_eq!(e, back, "{s} -> {printed}");
    }

    #[test]
    fn readable_output() {
        let e: Expr = "x*p_y - y*p_x".parse().unwrap();
        assert_eq!(e.to_string(), "p_y*x - p_x*y");
        let e: Expr = "y/(x^2 + y^2)".parse().unwrap();
        assert_eq!(e.to_string(), "y/(x^2 + y^2)");
        let e: Expr = "-(x^2) + 1/2".parse().unwrap();
        assert_eq!(e.to_string(), "-(x^2) + 1/2");
    }

    #[test]
    fn roundtrips() {
        for s in [
            "x",
            "-x",
            "-x^2",
            "-(x^2)",
            "x - 3/4*y",
            "1/(2*x*y^3)",
            "1/(10*(x + y))",
            "(x/(p_x + x))^2",
            "-3/x",
            "sin(-x)*cos(2*x - y)",
            "atan2(x, -y)",
            "sqrt(x^2 + y^2)^3",
            "2.5e-1*x - 7",
        ] {
            roundtrip(s);
        }
    }
}
