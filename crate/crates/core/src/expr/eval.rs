use std::borrow::Borrow;
use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;

use thiserror::Error;

use super::{Expr, Func, Symbol};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("square root of a negative number")]
    NegativeSqrt,
    #[error("unbound symbol `{0}`")]
    UnboundSymbol(String),
    #[error("atan2 evaluated at the origin")]
    Atan2Origin,
}

/// Anything that can supply numeric values for symbols.
pub trait Env<T> {
    fn value(&self, s: &Symbol) -> Option<T>;
}

impl<K: Borrow<str> + Ord, T: Copy> Env<T> for BTreeMap<K, T> {
    fn value(&self, s: &Symbol) -> Option<T> {
        self.get(s.as_str()).copied()
    }
}

impl<K: Borrow<str> + Hash + Eq, T: Copy> Env<T> for HashMap<K, T> {
    fn value(&self, s: &Symbol) -> Option<T> {
        self.get(s.as_str()).copied()
    }
}

impl<T: Copy> Env<T> for [(Symbol, T)] {
    fn value(&self, s: &Symbol) -> Option<T> {
        self.iter().find(|(k, _)| k == s).map(|(_, v)| *v)
    }
}

impl<T: Copy> Env<T> for Vec<(Symbol, T)> {
    fn value(&self, s: &Symbol) -> Option<T> {
        self.as_slice().value(s)
    }
}

impl<T, E: Env<T> + ?Sized> Env<T> for &E {
    fn value(&self, s: &Symbol) -> Option<T> {
        (**self).value(s)
    }
}

fn powi<T: Scalar>(b: T, k: i64) -> Result<T, EvalError> {
    if k < 0 && b == T::zero() {
        return Err(EvalError::DivisionByZero);
    }
    Ok(match i32::try_from(k) {
        Ok(k) => b.powi(k),
        Err(_) => b.powf(T::lit(k as f64)),
    })
}

fn apply<T: Scalar>(f: Func, args: &[T]) -> Result<T, EvalError> {
    match f {
        Func::Sin => Ok(args[0].sin()),
        Func::Cos => Ok(args[0].cos()),
        Func::Sqrt => {
            if args[0] < T::zero() {
                Err(EvalError::NegativeSqrt)
            } else {
                Ok(args[0].sqrt())
            }
        }
        Func::Atan2 => {
            if args[0] == T::zero() && args[1] == T::zero() {
                Err(EvalError::Atan2Origin)
            } else {
                Ok(args[0].atan2(args[1]))
            }
        }
    }
}

impl Expr {
    /// Numeric value at a point. Every free symbol must be bound by `env`.
    pub fn evaluate<T: Scalar, E: Env<T> + ?Sized>(&self, env: &E) -> Result<T, EvalError> {
        match self {
            Expr::Const(n) => Ok(T::lit(n.to_f64())),
            Expr::Sym(s) => env
                .value(s)
                .ok_or_else(|| EvalError::UnboundSymbol(s.to_string())),
            Expr::Add(cs) => {
                let mut acc = T::zero();
                for c in cs {
                    acc = acc + c.evaluate(env)?;
                }
                Ok(acc)
            }
            Expr::Mul(cs) => {
                let mut acc = T::one();
                for c in cs {
                    acc = acc * c.evaluate(env)?;
                }
                Ok(acc)
            }
            Expr::Pow(b, k) => powi(b.evaluate(env)?, *k),
            Expr::Div(n, d) => {
                let d = d.evaluate::<T, E>(env)?;
                if d == T::zero() {
                    return Err(EvalError::DivisionByZero);
                }
                Ok(n.evaluate::<T, E>(env)? / d)
            }
            Expr::Fun(f, args) => {
                let vals = args
                    .iter()
                    .map(|a| a.evaluate(env))
                    .collect::<Result<Vec<T>, _>>()?;
                apply(*f, &vals)
            }
        }
    }

    /// Resolves symbols to slot indices once, for repeated evaluation.
    pub fn compile<T: Scalar>(&self, slots: &[Symbol]) -> Result<Compiled<T>, EvalError> {
        Ok(Compiled {
            root: compile_node(self, slots)?,
            arity: slots.len(),
        })
    }
}

/// Expression with symbols replaced by positions in a value slice.
#[derive(Debug, Clone)]
pub struct Compiled<T> {
    root: Node<T>,
    arity: usize,
}

#[derive(Debug, Clone)]
enum Node<T> {
    Const(T),
    Slot(usize),
    Add(Vec<Node<T>>),
    Mul(Vec<Node<T>>),
    Pow(Box<Node<T>>, i64),
    Div(Box<Node<T>>, Box<Node<T>>),
    Fun(Func, Vec<Node<T>>),
}

fn compile_node<T: Scalar>(e: &Expr, slots: &[Symbol]) -> Result<Node<T>, EvalError> {
    let all = |cs: &[Expr]| cs.iter().map(|c| compile_node(c, slots)).collect::<Result<Vec<_>, _>>();
    Ok(match e {
        Expr::Const(n) => Node::Const(T::lit(n.to_f64())),
        Expr::Sym(s) => Node::Slot(
            slots
                .iter()
                .position(|t| t == s)
                .ok_or_else(|| EvalError::UnboundSymbol(s.to_string()))?,
        ),
        Expr::Add(cs) => Node::Add(all(cs)?),
        Expr::Mul(cs) => Node::Mul(all(cs)?),
        Expr::Pow(b, k) => Node::Pow(Box::new(compile_node(b, slots)?), *k),
        Expr::Div(n, d) => Node::Div(
            Box::new(compile_node(n, slots)?),
            Box::new(compile_node(d, slots)?),
        ),
        Expr::Fun(f, args) => Node::Fun(*f, all(args)?),
    })
}

impl<T: Scalar> Compiled<T> {
    pub fn arity(&self) -> usize {
        self.arity
    }

    /// `values[i]` is the value of `slots[i]` passed to [`Expr::compile`].
    pub fn eval(&self, values: &[T]) -> Result<T, EvalError> {
        assert_eq!(values.len(), self.arity, "slot count mismatch");
        run(&self.root, values)
    }
}

fn run<T: Scalar>(n: &Node<T>, v: &[T]) -> Result<T, EvalError> {
    match n {
        Node::Const(c) => Ok(*c),
        Node::Slot(i) => Ok(v[*i]),
        Node::Add(cs) => cs.iter().try_fold(T::zero(), |acc, c| Ok(acc + run(c, v)?)),
        Node::Mul(cs) => cs.iter().try_fold(T::one(), |acc, c| Ok(acc * run(c, v)?)),
        Node::Pow(b, k) => powi(run(b, v)?, *k),
        Node::Div(a, b) => {
            let d = run(b, v)?;
            if d == T::zero() {
                return Err(EvalError::DivisionByZero);
            }
            Ok(run(a, v)? / d)
        }
        Node::Fun(f, args) => {
            let mut buf = [T::zero(); 2];
            for (slot, a) in buf.iter_mut().zip(args) {
                *slot = run(a, v)?;
            }
            apply(*f, &buf[..args.len()])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn basic_values() {
        let x = Expr::sym("x");
        let y = Expr::sym("y");
        let e = x.pow(2) + y.pow(2);
        assert_eq!(e.evaluate(&point(&[("x", 3.0), ("y", 4.0)])), Ok(25.0));
        let a = Expr::one().atan2(&Expr::one());
        let v: f64 = a.evaluate(&point(&[])).unwrap();
        assert!((v - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn distinct_errors() {
        let y = Expr::sym("y");
        let p = point(&[("y", 0.0)]);
        assert_eq!(y.recip().evaluate::<f64, _>(&p), Err(EvalError::DivisionByZero));
        let p = point(&[("y", -1.0)]);
        assert_eq!(y.sqrt().evaluate::<f64, _>(&p), Err(EvalError::NegativeSqrt));
        assert_eq!(
            Expr::sym("q").evaluate::<f64, _>(&p),
            Err(EvalError::UnboundSymbol("q".into()))
        );
        let p = point(&[("y", 0.0)]);
        assert_eq!(y.atan2(&y).evaluate::<f64, _>(&p), Err(EvalError::Atan2Origin));
    }

    #[test]
    fn compiled_matches_tree() {
        let x = Expr::sym("x");
        let y = Expr::sym("y");
        let e = (&x * &y).sin() + x.atan2(&y) / (x.pow(2) + 1);
        let slots = [Symbol::new("x"), Symbol::new("y")];
        let c = e.compile::<f64>(&slots).unwrap();
        let p = point(&[("x", 0.3), ("y", -1.2)]);
        assert_eq!(c.eval(&[0.3, -1.2]).unwrap(), e.evaluate(&p).unwrap());
        let c32 = e.compile::<f32>(&slots).unwrap();
        assert!((c32.eval(&[0.3, -1.2]).unwrap() as f64 - e.evaluate::<f64, _>(&p).unwrap()).abs() < 1e-5);
    }
}
