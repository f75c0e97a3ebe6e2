//! Symbolic expressions over phase-space symbols and parameters.
//!
//! [`Expr`] is an immutable tree. Every constructor exposed here (the arithmetic
//! operators, [`Expr::pow`], [`Expr::fun`], ...) returns the canonical form produced
//! by [`Expr::normalize`]: a sum of products with merged rational constants and
//! collected integer powers. There is no general simplifier; equality of two
//! expressions that are not structurally identical is decided by sampling
//! (see [`sample::numeric_equal`]).

mod diff;
mod eval;
mod interval;
mod normalize;
mod parse;
mod print;
pub mod sample;
mod symbols;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub use eval::{Compiled, Env, EvalError};
pub use interval::Interval;
pub use parse::{parse, ParseError, ParseErrorKind};
pub use sample::{
    compare_with, numeric_compare, numeric_equal, vanishes, Chart, Comparison, Point, SampleError, Sampling,
};
pub use symbols::{Role, SymbolTable, SymbolTableError};

/// Interned symbol name. Cheap to clone and safe to share across threads.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol(Arc<str>);

impl Symbol {
    pub fn new(name: &str) -> Self {
        Symbol(Arc::from(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Symbol {
    fn from(s: &str) -> Self {
        Symbol::new(s)
    }
}

impl From<String> for Symbol {
    fn from(s: String) -> Self {
        Symbol(Arc::from(s))
    }
}

impl std::borrow::Borrow<str> for Symbol {
    fn borrow(&self) -> &str {
        &self.0
    }
}

/// Numeric constant: exact rational, or a float once an irrational value is folded.
#[derive(Clone, Debug)]
pub enum Number {
    Rational(BigRational),
    Float(f64),
}

impl Number {
    pub fn int(v: i64) -> Self {
        Number::Rational(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Number::Rational(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn zero() -> Self {
        Number::int(0)
    }

    pub fn one() -> Self {
        Number::int(1)
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Number::Rational(r) => r.is_zero(),
            Number::Float(f) => *f == 0.0,
        }
    }

    pub fn is_one(&self) -> bool {
        match self {
            Number::Rational(r) => r.is_one(),
            Number::Float(_) => false,
        }
    }

    pub fn is_negative(&self) -> bool {
        match self {
            Number::Rational(r) => r.is_negative(),
            Number::Float(f) => *f < 0.0,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Number::Rational(r) => r.to_f64().unwrap_or(f64::NAN),
            Number::Float(f) => *f,
        }
    }

    pub fn neg(&self) -> Number {
        match self {
            Number::Rational(r) => Number::Rational(-r),
            Number::Float(f) => Number::Float(-f),
        }
    }

    pub fn add(&self, other: &Number) -> Number {
        match (self, other) {
            (Number::Rational(a), Number::Rational(b)) => Number::Rational(a + b),
            _ => Number::Float(self.to_f64() + other.to_f64()),
        }
    }

    pub fn mul(&self, other: &Number) -> Number {
        match (self, other) {
            (Number::Rational(a), Number::Rational(b)) => Number::Rational(a * b),
            _ => Number::Float(self.to_f64() * other.to_f64()),
        }
    }

    /// Integer power. `None` for a zero base with a negative exponent.
    pub fn powi(&self, k: i64) -> Option<Number> {
        if self.is_zero() && k < 0 {
            return None;
        }
        Some(match self {
            Number::Rational(r) => {
                let e = i32::try_from(k).ok()?;
                Number::Rational(num_traits::Pow::pow(r, e))
            }
            Number::Float(f) => Number::Float(f.powi(i32::try_from(k).ok()?)),
        })
    }

    /// Exact square root when both numerator and denominator are perfect squares.
    pub fn exact_sqrt(&self) -> Option<Number> {
        match self {
            Number::Rational(r) if !r.is_negative() => {
                let n = r.numer().sqrt();
                let d = r.denom().sqrt();
                if &(&n * &n) == r.numer() && &(&d * &d) == r.denom() {
                    Some(Number::Rational(BigRational::new(n, d)))
                } else {
                    None
                }
            }
            _ => None,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Number::Rational(_) => 0,
            Number::Float(_) => 1,
        }
    }
}

impl PartialEq for Number {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Number {}

impl PartialOrd for Number {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Number {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Number::Rational(a), Number::Rational(b)) => a.cmp(b),
            (Number::Float(a), Number::Float(b)) => a.total_cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

/// Built-in functions of the expression language.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Func {
    Sin,
    Cos,
    Sqrt,
    Atan2,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
            Func::Atan2 => "atan2",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Atan2 => 2,
            _ => 1,
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "sqrt" => Some(Func::Sqrt),
            "atan2" => Some(Func::Atan2),
            _ => None,
        }
    }
}

/// Expression tree.
///
/// After normalization `Div` never appears (a quotient is a product with a
/// negative power), `Add`/`Mul` have at least two children, and the leading
/// child of a `Mul` is its constant coefficient when that differs from one.
#[derive(Clone, Debug)]
pub enum Expr {
    Const(Number),
    Sym(Symbol),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Pow(Box<Expr>, i64),
    Div(Box<Expr>, Box<Expr>),
    Fun(Func, Vec<Expr>),
}

impl Expr {
    pub fn zero() -> Expr {
        Expr::Const(Number::zero())
    }

    pub fn one() -> Expr {
        Expr::Const(Number::one())
    }

    pub fn int(v: i64) -> Expr {
        Expr::Const(Number::int(v))
    }

    pub fn ratio(num: i64, den: i64) -> Expr {
        Expr::Const(Number::ratio(num, den))
    }

    pub fn float(v: f64) -> Expr {
        Expr::Const(Number::Float(v))
    }

    pub fn sym(name: &str) -> Expr {
        Expr::Sym(Symbol::new(name))
    }

    pub fn symbol(s: &Symbol) -> Expr {
        Expr::Sym(s.clone())
    }

    pub fn pow(&self, k: i64) -> Expr {
        normalize::pow(self.clone(), k)
    }

    pub fn recip(&self) -> Expr {
        self.pow(-1)
    }

    pub fn fun(f: Func, args: Vec<Expr>) -> Expr {
        assert_eq!(args.len(), f.arity(), "wrong arity for {}", f.name());
        normalize::fun(f, args)
    }

    pub fn sin(&self) -> Expr {
        Expr::fun(Func::Sin, vec![self.clone()])
    }

    pub fn cos(&self) -> Expr {
        Expr::fun(Func::Cos, vec![self.clone()])
    }

    pub fn sqrt(&self) -> Expr {
        Expr::fun(Func::Sqrt, vec![self.clone()])
    }

    pub fn atan2(&self, other: &Expr) -> Expr {
        Expr::fun(Func::Atan2, vec![self.clone(), other.clone()])
    }

    /// Canonical form. Idempotent.
    pub fn normalize(&self) -> Expr {
        normalize::normalize(self)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(n) if n.is_zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Const(n) if n.is_one())
    }

    pub fn as_const(&self) -> Option<&Number> {
        match self {
            Expr::Const(n) => Some(n),
            _ => None,
        }
    }

    pub fn as_symbol(&self) -> Option<&Symbol> {
        match self {
            Expr::Sym(s) => Some(s),
            _ => None,
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        1 + self.children().map(Expr::size).sum::<usize>()
    }

    fn children(&self) -> Box<dyn Iterator<Item = &Expr> + '_> {
        match self {
            Expr::Const(_) | Expr::Sym(_) => Box::new(std::iter::empty()),
            Expr::Add(cs) | Expr::Mul(cs) | Expr::Fun(_, cs) => Box::new(cs.iter()),
            Expr::Pow(b, _) => Box::new(std::iter::once(b.as_ref())),
            Expr::Div(n, d) => Box::new([n.as_ref(), d.as_ref()].into_iter()),
        }
    }

    pub fn free_symbols(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<Symbol>) {
        if let Expr::Sym(s) = self {
            out.insert(s.clone());
        }
        for c in self.children() {
            c.collect_symbols(out);
        }
    }

    pub fn contains(&self, s: &Symbol) -> bool {
        match self {
            Expr::Sym(t) => t == s,
            _ => self.children().any(|c| c.contains(s)),
        }
    }

    /// Simultaneous substitution followed by normalization.
    pub fn substitute(&self, bindings: &BTreeMap<Symbol, Expr>) -> Expr {
        self.replace(bindings).normalize()
    }

    /// Convenience wrapper for a single binding.
    pub fn subs(&self, s: &Symbol, value: &Expr) -> Expr {
        let mut m = BTreeMap::new();
        m.insert(s.clone(), value.clone());
        self.substitute(&m)
    }

    fn replace(&self, bindings: &BTreeMap<Symbol, Expr>) -> Expr {
        match self {
            Expr::Const(_) => self.clone(),
            Expr::Sym(s) => bindings.get(s).cloned().unwrap_or_else(|| self.clone()),
            Expr::Add(cs) => Expr::Add(cs.iter().map(|c| c.replace(bindings)).collect()),
            Expr::Mul(cs) => Expr::Mul(cs.iter().map(|c| c.replace(bindings)).collect()),
            Expr::Fun(f, cs) => Expr::Fun(*f, cs.iter().map(|c| c.replace(bindings)).collect()),
            Expr::Pow(b, k) => Expr::Pow(Box::new(b.replace(bindings)), *k),
            Expr::Div(n, d) => Expr::Div(Box::new(n.replace(bindings)), Box::new(d.replace(bindings))),
        }
    }

    /// Partial derivative with respect to `s`, normalized.
    pub fn diff(&self, s: &Symbol) -> Expr {
        diff::differentiate(self, s)
    }

    /// Repeated partial derivative, applied left to right.
    pub fn diff_n(&self, symbols: &[&Symbol]) -> Expr {
        symbols.iter().fold(self.clone(), |e, s| e.diff(s))
    }

    fn rank(&self) -> u8 {
        match self {
            Expr::Const(_) => 0,
            Expr::Sym(_) => 1,
            Expr::Pow(..) => 2,
            Expr::Mul(_) => 3,
            Expr::Add(_) => 4,
            Expr::Div(..) => 5,
            Expr::Fun(..) => 6,
        }
    }
}

/// Free function form of [`Expr::diff`].
pub fn differentiate(e: &Expr, s: &Symbol) -> Expr {
    e.diff(s)
}

/// Free function form of [`Expr::substitute`].
pub fn substitute(e: &Expr, bindings: &BTreeMap<Symbol, Expr>) -> Expr {
    e.substitute(bindings)
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Expr {}

impl PartialOrd for Expr {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Expr {
    fn cmp(&self, other: &Self) -> Ordering {
        use Expr::*;
        match (self, other) {
            (Const(a), Const(b)) => a.cmp(b),
            (Sym(a), Sym(b)) => a.cmp(b),
            (Add(a), Add(b)) | (Mul(a), Mul(b)) => a.cmp(b),
            (Pow(a, j), Pow(b, k)) => a.cmp(b).then(j.cmp(k)),
            (Div(a, b), Div(c, d)) => a.cmp(c).then_with(|| b.cmp(d)),
            (Fun(f, a), Fun(g, b)) => f.cmp(g).then_with(|| a.cmp(b)),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl From<i64> for Expr {
    fn from(v: i64) -> Self {
        Expr::int(v)
    }
}

impl From<&Symbol> for Expr {
    fn from(s: &Symbol) -> Self {
        Expr::Sym(s.clone())
    }
}

macro_rules! binary_op {
    ($trait:ident, $method:ident, $body:expr) => {
        impl ops::$trait<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self, rhs)
            }
        }
        impl ops::$trait<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                ops::$trait::$method(self, rhs.clone())
            }
        }
        impl ops::$trait<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                ops::$trait::$method(self.clone(), rhs)
            }
        }
        impl ops::$trait<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                ops::$trait::$method(self.clone(), rhs.clone())
            }
        }
        impl ops::$trait<i64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: i64) -> Expr {
                ops::$trait::$method(self, Expr::int(rhs))
            }
        }
        impl ops::$trait<i64> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: i64) -> Expr {
                ops::$trait::$method(self.clone(), Expr::int(rhs))
            }
        }
        impl ops::$trait<Expr> for i64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                ops::$trait::$method(Expr::int(self), rhs)
            }
        }
        impl ops::$trait<&Expr> for i64 {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                ops::$trait::$method(Expr::int(self), rhs.clone())
            }
        }
    };
}

binary_op!(Add, add, |a, b| normalize::add(vec![a, b]));
binary_op!(Sub, sub, |a, b| normalize::add(vec![a, normalize::mul(vec![Expr::int(-1), b])]));
binary_op!(Mul, mul, |a, b| normalize::mul(vec![a, b]));
binary_op!(Div, div, |a, b| normalize::mul(vec![a, normalize::pow(b, -1)]));

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        normalize::mul(vec![Expr::int(-1), self])
    }
}

impl ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        -self.clone()
    }
}

impl std::iter::Sum for Expr {
    fn sum<I: Iterator<Item = Expr>>(iter: I) -> Expr {
        normalize::add(iter.collect())
    }
}

impl std::iter::Product for Expr {
    fn product<I: Iterator<Item = Expr>>(iter: I) -> Expr {
        normalize::mul(iter.collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_exact_sqrt() {
        assert_eq!(Number::ratio(9, 4).exact_sqrt(), Some(Number::ratio(3, 2)));
        assert_eq!(Number::int(2).exact_sqrt(), None);
        assert_eq!(Number::int(-4).exact_sqrt(), None);
    }

    #[test]
    fn zero_base_negative_power_is_not_folded() {
        assert!(Number::zero().powi(-1).is_none());
        let e = Expr::zero().pow(-1);
        assert!(matches!(e, Expr::Pow(..)));
    }

    #[test]
    fn free_symbols_and_contains() {
        let x = Expr::sym("x");
        let y = Expr::sym("y");
        let e = &x * &y + x.sin();
        let syms: Vec<_> = e.free_symbols().into_iter().map(|s| s.to_string()).collect();
        assert_eq!(syms, vec!["x", "y"]);
        assert!(e.contains(&Symbol::new("y")));
        assert!(!e.contains(&Symbol::new("z")));
    }
}
