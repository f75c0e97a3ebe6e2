//! Sampling charts and the numeric equality oracle.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::interval::{bound, Interval, Singularity};
use super::{EvalError, Expr, Symbol};

/// A sample point: symbol values in `f64`.
pub type Point = BTreeMap<Symbol, f64>;

/// Deepest bisection level used when refining the singularity guard.
const GUARD_DEPTH: usize = 14;
/// Rejection-sampling budget per requested point.
const TRIES_PER_POINT: usize = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SampleError {
    #[error("chart intersects a singular set: {0}")]
    Singular(String),
    #[error("chart constraints rejected too many candidates ({accepted} of {requested} accepted)")]
    Rejection { accepted: usize, requested: usize },
    #[error("evaluation failed at {point}: {source}")]
    Eval { point: String, source: EvalError },
    #[error("symbol `{0}` has no range in the chart")]
    Unbound(String),
}

/// Sampling box with optional rejection constraints `lo <= expr <= hi`.
#[derive(Debug, Clone, Default)]
pub struct Chart {
    ranges: Vec<(Symbol, f64, f64)>,
    constraints: Vec<(Expr, f64, f64)>,
}

impl Chart {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds or replaces the sampling range of `name`.
    pub fn range(mut self, name: &str, lo: f64, hi: f64) -> Self {
        self.set_range(Symbol::new(name), lo, hi);
        self
    }

    pub fn set_range(&mut self, s: Symbol, lo: f64, hi: f64) {
        let (lo, hi) = (lo.min(hi), lo.max(hi));
        match self.ranges.iter_mut().find(|(t, ..)| *t == s) {
            Some(r) => *r = (s, lo, hi),
            None => self.ranges.push((s, lo, hi)),
        }
    }

    pub fn require(mut self, e: Expr, lo: f64, hi: f64) -> Self {
        self.constraints.push((e, lo, hi));
        self
    }

    pub fn add_constraint(&mut self, e: Expr, lo: f64, hi: f64) {
        self.constraints.push((e, lo, hi));
    }

    /// Ranges of `other` are added; on overlap `other` wins. Constraints are concatenated.
    pub fn merged(&self, other: &Chart) -> Chart {
        let mut out = self.clone();
        for (s, lo, hi) in &other.ranges {
            out.set_range(s.clone(), *lo, *hi);
        }
        out.constraints.extend(other.constraints.iter().cloned());
        out
    }

    pub fn ranges(&self) -> &[(Symbol, f64, f64)] {
        &self.ranges
    }

    pub fn constraints(&self) -> &[(Expr, f64, f64)] {
        &self.constraints
    }

    pub fn symbols(&self) -> Vec<Symbol> {
        self.ranges.iter().map(|(s, ..)| s.clone()).collect()
    }

    pub fn has(&self, s: &Symbol) -> bool {
        self.ranges.iter().any(|(t, ..)| t == s)
    }

    fn accepts(&self, p: &Point) -> bool {
        self.constraints.iter().all(|(e, lo, hi)| match e.evaluate::<f64, _>(p) {
            Ok(v) => v >= *lo && v <= *hi,
            Err(_) => false,
        })
    }

    /// Draws `n` points uniformly from the box, rejecting those that violate a constraint.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<Vec<Point>, SampleError> {
        let mut out = Vec::with_capacity(n);
        let budget = n.max(1) * TRIES_PER_POINT;
        for _ in 0..budget {
            if out.len() == n {
                break;
            }
            let p: Point = self
                .ranges
                .iter()
                .map(|(s, lo, hi)| {
                    let v = if lo == hi { *lo } else { rng.random_range(*lo..*hi) };
                    (s.clone(), v)
                })
                .collect();
            if self.accepts(&p) {
                out.push(p);
            }
        }
        if out.len() < n {
            return Err(SampleError::Rejection { accepted: out.len(), requested: n });
        }
        Ok(out)
    }

    /// Seeded convenience wrapper around [`Chart::sample`].
    pub fn sample_seeded(&self, seed: u64, n: usize) -> Result<Vec<Point>, SampleError> {
        self.sample(&mut ChaCha8Rng::seed_from_u64(seed), n)
    }

    /// Fails if any guard of `e` (denominator, sqrt argument, atan2 pair) may be
    /// violated inside the admissible part of the box.
    ///
    /// Interval bounds over-approximate, so a flagged box is bisected along its
    /// widest side; sub-boxes that provably violate a chart constraint are
    /// discarded. A guard still tripped at the finest level is reported.
    pub fn check_guards(&self, e: &Expr) -> Result<(), SampleError> {
        for s in e.free_symbols() {
            if !self.has(&s) {
                return Err(SampleError::Unbound(s.to_string()));
            }
        }
        let root: BTreeMap<Symbol, Interval> = self
            .ranges
            .iter()
            .map(|(s, lo, hi)| (s.clone(), Interval::new(*lo, *hi)))
            .collect();
        let relevant: Vec<Symbol> = e.free_symbols().into_iter().collect();
        self.refine(e, root, &relevant, 0)
            .map_err(|s| SampleError::Singular(s.to_string()))
    }

    fn excluded(&self, b: &BTreeMap<Symbol, Interval>) -> bool {
        self.constraints.iter().any(|(c, lo, hi)| match bound(c, b) {
            Ok(i) => !i.intersects(*lo, *hi),
            Err(_) => false,
        })
    }

    fn refine(
        &self,
        e: &Expr,
        b: BTreeMap<Symbol, Interval>,
        relevant: &[Symbol],
        depth: usize,
    ) -> Result<(), Singularity> {
        if self.excluded(&b) {
            return Ok(());
        }
        let err = match bound(e, &b) {
            Ok(_) => return Ok(()),
            Err(s) => s,
        };
        if depth >= GUARD_DEPTH {
            return Err(err);
        }
        // Split the widest side among the symbols of the offending subexpression.
        let culprit = err.symbols();
        let widest = relevant
            .iter()
            .filter(|s| culprit.contains(*s) && b[*s].width() > 0.0)
            .max_by(|a, c| b[*a].width().total_cmp(&b[*c].width()))
            .cloned();
        let Some(s) = widest else { return Err(err) };
        let i = b[&s];
        if i.width() == 0.0 {
            return Err(err);
        }
        let mid = 0.5 * (i.lo + i.hi);
        let mut left = b.clone();
        left.insert(s.clone(), Interval::new(i.lo, mid));
        let mut right = b;
        right.insert(s, Interval::new(mid, i.hi));
        self.refine(e, left, relevant, depth + 1)?;
        self.refine(e, right, relevant, depth + 1)
    }
}

/// Point count, tolerance and seed of a sampled check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sampling {
    pub points: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Sampling {
    pub fn new(points: usize, tol: f64, seed: u64) -> Self {
        Sampling { points, tol, seed }
    }
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling { points: 100, tol: 1e-9, seed: 0 }
    }
}

/// Outcome of a sampled comparison.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub equal: bool,
    /// Largest `|a - b| / (1 + |a|)` seen.
    pub max_residual: f64,
    /// Point where the largest residual occurred.
    pub worst: Option<Point>,
    pub points: usize,
}

fn describe(p: &Point) -> String {
    let parts: Vec<String> = p.iter().map(|(k, v)| format!("{k}={v:.6}")).collect();
    format!("({})", parts.join(", "))
}

/// Compares `a` and `b` at `n` seeded chart points: equal iff
/// `|a - b| <= tol * (1 + |a|)` everywhere.
pub fn numeric_compare(
    a: &Expr,
    b: &Expr,
    chart: &Chart,
    n: usize,
    tol: f64,
    seed: u64,
) -> Result<Comparison, SampleError> {
    chart.check_guards(a)?;
    chart.check_guards(b)?;
    let slots = chart.symbols();
    let ca = a.compile::<f64>(&slots).map_err(|e| SampleError::Unbound(e.to_string()))?;
    let cb = b.compile::<f64>(&slots).map_err(|e| SampleError::Unbound(e.to_string()))?;
    let points = chart.sample_seeded(seed, n)?;
    let mut cmp = Comparison { equal: true, max_residual: 0.0, worst: None, points: n };
    for p in points {
        let vals: Vec<f64> = slots.iter().map(|s| p[s]).collect();
        let va = ca.eval(&vals).map_err(|e| SampleError::Eval { point: describe(&p), source: e })?;
        let vb = cb.eval(&vals).map_err(|e| SampleError::Eval { point: describe(&p), source: e })?;
        let r = (va - vb).abs() / (1.0 + va.abs());
        if !(r <= tol) {
            cmp.equal = false;
        }
        if !(r <= cmp.max_residual) {
            cmp.max_residual = r;
            cmp.worst = Some(p);
        }
    }
    Ok(cmp)
}

/// Boolean form of [`numeric_compare`].
pub fn numeric_equal(
    a: &Expr,
    b: &Expr,
    chart: &Chart,
    n: usize,
    tol: f64,
    seed: u64,
) -> Result<bool, SampleError> {
    Ok(numeric_compare(a, b, chart, n, tol, seed)?.equal)
}

/// [`numeric_compare`] driven by a [`Sampling`].
pub fn compare_with(a: &Expr, b: &Expr, chart: &Chart, s: Sampling) -> Result<Comparison, SampleError> {
    numeric_compare(a, b, chart, s.points, s.tol, s.seed)
}

/// Sampled check that `e` vanishes on the chart.
pub fn vanishes(e: &Expr, chart: &Chart, s: Sampling) -> Result<Comparison, SampleError> {
    if e.is_zero() {
        return Ok(Comparison { equal: true, max_residual: 0.0, worst: None, points: 0 });
    }
    compare_with(e, &Expr::zero(), chart, s)
}
