use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use super::{Expr, Func, Symbol};

/// Closed interval used to bound an expression over a sampling box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

/// Which guard an expression trips inside a box.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Singularity {
    ZeroDenominator(Expr),
    NegativeSqrt(Expr),
    Atan2Origin(Expr, Expr),
}

impl Singularity {
    /// Symbols the offending subexpression depends on.
    pub fn symbols(&self) -> std::collections::BTreeSet<Symbol> {
        match self {
            Singularity::ZeroDenominator(e) | Singularity::NegativeSqrt(e) => e.free_symbols(),
            Singularity::Atan2Origin(a, b) => a.free_symbols().union(&b.free_symbols()).cloned().collect(),
        }
    }
}

impl std::fmt::Display for Singularity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Singularity::ZeroDenominator(e) => write!(f, "denominator `{e}` can vanish"),
            Singularity::NegativeSqrt(e) => write!(f, "square-root argument `{e}` can be negative"),
            Singularity::Atan2Origin(a, b) => write!(f, "atan2 arguments `{a}, {b}` can both vanish"),
        }
    }
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo: lo.min(hi), hi: lo.max(hi) }
    }

    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn intersects(&self, lo: f64, hi: f64) -> bool {
        self.hi >= lo && self.lo <= hi
    }

    fn add(self, o: Interval) -> Interval {
        Interval::new(self.lo + o.lo, self.hi + o.hi)
    }

    fn mul(self, o: Interval) -> Interval {
        let c = [self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi];
        let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval::new(lo, hi)
    }

    fn recip(self) -> Option<Interval> {
        if self.contains(0.0) {
            None
        } else {
            Some(Interval::new(1.0 / self.hi, 1.0 / self.lo))
        }
    }

    fn powi(self, k: i64) -> Option<Interval> {
        if k < 0 {
            return self.recip()?.powi(-k);
        }
        let k = k as i32;
        if k % 2 == 1 {
            return Some(Interval::new(self.lo.powi(k), self.hi.powi(k)));
        }
        let (a, b) = (self.lo.abs(), self.hi.abs());
        if self.contains(0.0) {
            Some(Interval::new(0.0, a.max(b).powi(k)))
        } else {
            Some(Interval::new(a.min(b).powi(k), a.max(b).powi(k)))
        }
    }

    fn sin(self) -> Interval {
        if self.width() >= TAU {
            return Interval::new(-1.0, 1.0);
        }
        let mut lo = self.lo.sin().min(self.hi.sin());
        let mut hi = self.lo.sin().max(self.hi.sin());
        // Extrema at pi/2 + k pi inside the interval.
        let first = ((self.lo - PI / 2.0) / PI).ceil() as i64;
        let last = ((self.hi - PI / 2.0) / PI).floor() as i64;
        for k in first..=last {
            if k.rem_euclid(2) == 0 {
                hi = 1.0;
            } else {
                lo = -1.0;
            }
        }
        Interval::new(lo, hi)
    }

    fn cos(self) -> Interval {
        Interval::new(self.lo + PI / 2.0, self.hi + PI / 2.0).sin()
    }
}

/// Bounds `e` over `domain`, reporting the first guard that may be violated.
pub(crate) fn bound(e: &Expr, domain: &BTreeMap<Symbol, Interval>) -> Result<Interval, Singularity> {
    match e {
        Expr::Const(n) => Ok(Interval::point(n.to_f64())),
        Expr::Sym(s) => Ok(domain
            .get(s)
            .copied()
            .unwrap_or(Interval::new(f64::NEG_INFINITY, f64::INFINITY))),
        Expr::Add(cs) => cs
            .iter()
            .try_fold(Interval::point(0.0), |acc, c| Ok(acc.add(bound(c, domain)?))),
        Expr::Mul(cs) => cs
            .iter()
            .try_fold(Interval::point(1.0), |acc, c| Ok(acc.mul(bound(c, domain)?))),
        Expr::Pow(b, k) => bound(b, domain)?
            .powi(*k)
            .ok_or_else(|| Singularity::ZeroDenominator((**b).clone())),
        Expr::Div(n, d) => {
            let r = bound(d, domain)?
                .recip()
                .ok_or_else(|| Singularity::ZeroDenominator((**d).clone()))?;
            Ok(bound(n, domain)?.mul(r))
        }
        Expr::Fun(f, args) => {
            let a = bound(&args[0], domain)?;
            match f {
                Func::Sin => Ok(a.sin()),
                Func::Cos => Ok(a.cos()),
                Func::Sqrt => {
                    if a.lo < 0.0 {
                        Err(Singularity::NegativeSqrt(args[0].clone()))
                    } else {
                        Ok(Interval::new(a.lo.sqrt(), a.hi.sqrt()))
                    }
                }
                Func::Atan2 => {
                    let b = bound(&args[1], domain)?;
                    if a.contains(0.0) && b.contains(0.0) {
                        Err(Singularity::Atan2Origin(args[0].clone(), args[1].clone()))
                    } else {
                        Ok(Interval::new(-PI, PI))
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_bounds() {
        let i = Interval::new(0.0, PI).sin();
        assert!((i.lo - 0.0).abs() < 1e-12 && i.hi == 1.0);
        let i = Interval::new(-0.1, 0.1).cos();
        assert_eq!(i.hi, 1.0);
        assert!(i.lo > 0.99);
    }

    #[test]
    fn flags_reciprocal_through_zero() {
        let mut d = BTreeMap::new();
        d.insert(Symbol::new("y"), Interval::new(-1.0, 1.0));
        let e = Expr::sym("y").recip();
        assert!(matches!(bound(&e, &d), Err(Singularity::ZeroDenominator(_))));
        d.insert(Symbol::new("y"), Interval::new(0.1, 1.0));
        assert_eq!(bound(&e, &d).unwrap(), Interval::new(1.0, 10.0));
    }
}
