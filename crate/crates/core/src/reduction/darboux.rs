use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::{velocity, ConstraintSpec, Elimination, PresymplecticForm, ReductionError};
use crate::expr::{compare_with, vanishes, Chart, Expr, Sampling, Symbol};
use crate::numeric::fd_jacobian;
use crate::symplectic::{poisson_bracket, PhaseSpace};

/// Canonical change of variables `(p, q) → (p_ζ, p_z, ζ, z)` with its inverse.
///
/// The target phase space lists the reduced pairs first and `(z, p_z)` last.
#[derive(Debug, Clone)]
pub struct CanonicalMap {
    pub name: String,
    pub source: PhaseSpace,
    pub target: PhaseSpace,
    /// Target symbol → expression in source symbols (and parameters).
    pub forward: BTreeMap<Symbol, Expr>,
    /// Source symbol → expression in target symbols (and parameters).
    pub inverse: BTreeMap<Symbol, Expr>,
    pub source_chart: Chart,
    pub target_chart: Chart,
}

#[derive(Debug, Clone)]
pub struct BracketCheck {
    pub left: Symbol,
    pub right: Symbol,
    pub expected: i64,
    pub max_residual: f64,
    pub passed: bool,
}

impl BracketCheck {
    pub fn label(&self) -> String {
        format!("{{{}, {}}}", self.left, self.right)
    }
}

#[derive(Debug, Clone)]
pub struct CanonicityReport {
    pub brackets: Vec<BracketCheck>,
}

impl CanonicityReport {
    pub fn passed(&self) -> bool {
        self.brackets.iter().all(|b| b.passed)
    }

    pub fn first_failure(&self) -> Option<&BracketCheck> {
        self.brackets.iter().find(|b| !b.passed)
    }
}

impl CanonicalMap {
    pub fn z(&self) -> &Symbol {
        self.target.coordinates().last().expect("target has a z coordinate")
    }

    pub fn p_z(&self) -> &Symbol {
        self.target.momenta().last().expect("target has a p_z momentum")
    }

    /// Target coordinates with `p_z` dropped, in the order `(p_ζ…, ζ…, z)`.
    pub fn reduced_coords(&self) -> Vec<Symbol> {
        let n = self.target.dof() - 1;
        let mut out: Vec<Symbol> = self.target.momenta()[..n].to_vec();
        out.extend_from_slice(&self.target.coordinates()[..n]);
        out.push(self.z().clone());
        out
    }

    /// Every pairwise Poisson bracket of the forward functions, computed in the
    /// source variables and compared with the canonical value.
    pub fn check_canonicity(&self, s: Sampling) -> Result<CanonicityReport, ReductionError> {
        let qs = self.target.coordinates();
        let ps = self.target.momenta();
        let mut funcs: Vec<(&Symbol, bool, usize)> = qs.iter().enumerate().map(|(i, q)| (q, true, i)).collect();
        funcs.extend(ps.iter().enumerate().map(|(i, p)| (p, false, i)));
        let mut brackets = Vec::new();
        for a in 0..funcs.len() {
            for b in (a + 1)..funcs.len() {
                let (l, lq, li) = funcs[a];
                let (r, rq, ri) = funcs[b];
                let fl = self.forward_of(l)?;
                let fr = self.forward_of(r)?;
                let expected = if lq && !rq && li == ri { 1 } else { 0 };
                let br = poisson_bracket(fl, fr, &self.source);
                let cmp = compare_with(&br, &Expr::int(expected), &self.source_chart, s)?;
                brackets.push(BracketCheck {
                    left: l.clone(),
                    right: r.clone(),
                    expected,
                    max_residual: cmp.max_residual,
                    passed: cmp.equal,
                });
            }
        }
        Ok(CanonicityReport { brackets })
    }

    fn forward_of(&self, s: &Symbol) -> Result<&Expr, ReductionError> {
        self.forward
            .get(s)
            .ok_or_else(|| ReductionError::Precondition(format!("map has no forward formula for {s}")))
    }

    fn inverse_of(&self, s: &Symbol) -> Result<&Expr, ReductionError> {
        self.inverse.get(s).ok_or_else(|| ReductionError::MissingInverse(s.to_string()))
    }

    /// `forward ∘ inverse = id` on the target chart and `inverse ∘ forward = id`
    /// on the source chart.
    pub fn check_inverse(&self, s: Sampling) -> Result<(), ReductionError> {
        for x in self.source.xi() {
            self.inverse_of(&x)?;
        }
        for (y, f) in &self.forward {
            let back = f.substitute(&self.inverse);
            let cmp = compare_with(&back, &Expr::symbol(y), &self.target_chart, s)?;
            if !cmp.equal {
                return Err(ReductionError::InverseMismatch { symbol: y.to_string(), residual: cmp.max_residual });
            }
        }
        for (x, g) in &self.inverse {
            let back = g.substitute(&self.forward);
            let cmp = compare_with(&back, &Expr::symbol(x), &self.source_chart, s)?;
            if !cmp.equal {
                return Err(ReductionError::InverseMismatch { symbol: x.to_string(), residual: cmp.max_residual });
            }
        }
        Ok(())
    }

    /// Canonicity first, then inverse consistency. The first failing bracket is reported.
    pub fn verify(&self, s: Sampling) -> Result<CanonicityReport, ReductionError> {
        let report = self.check_canonicity(s)?;
        if let Some(b) = report.first_failure() {
            return Err(ReductionError::NotCanonical {
                bracket: b.label(),
                expected: b.expected,
                residual: b.max_residual,
            });
        }
        self.check_inverse(s)?;
        Ok(report)
    }

    /// Inverse formulas on the surface `p_z = 0`.
    pub fn restricted_inverse(&self) -> BTreeMap<Symbol, Expr> {
        let pz = self.p_z().clone();
        self.inverse
            .iter()
            .map(|(k, v)| (k.clone(), v.subs(&pz, &Expr::zero())))
            .collect()
    }

    /// Rescales one target variable, `y → factor·y`, keeping forward and inverse consistent.
    pub fn scaled(&self, target: &Symbol, factor: Expr) -> CanonicalMap {
        let mut out = self.clone();
        if let Some(f) = out.forward.get_mut(target) {
            *f = &factor * &*f;
        }
        let back = Expr::symbol(target) / &factor;
        for v in out.inverse.values_mut() {
            *v = v.subs(target, &back);
        }
        out.name = format!("{} with {target} scaled", self.name);
        out
    }
}

/// Reduced Lagrangian expressed in the Darboux variables `(p_ζ, ζ, z)`.
#[derive(Debug, Clone)]
pub struct DarbouxResult {
    pub coords: Vec<Symbol>,
    pub one_form: Vec<Expr>,
    pub form: PresymplecticForm,
    pub hamiltonian: Expr,
    /// Largest entrywise deviation of the transformed form from the canonical one.
    pub canonical_residual: f64,
}

impl DarbouxResult {
    pub fn lagrangian(&self) -> Expr {
        let kinetic: Expr = self
            .coords
            .iter()
            .zip(&self.one_form)
            .map(|(c, a)| a * Expr::symbol(&velocity(c)))
            .sum();
        kinetic - &self.hamiltonian
    }
}

/// Canonical form on `(p_ζ…, ζ…, z)`: the symplectic block plus a null `z` row.
fn canonical_target(n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * n + 1, 2 * n + 1);
    for i in 0..n {
        m[(i, n + i)] = 1.0;
        m[(n + i, i)] = -1.0;
    }
    m
}

/// Pulls `L_R` back through the restricted inverse map and checks that the
/// kinetic term becomes `p_ζ ζ̇` with no `ż` term (up to a total derivative).
pub fn apply_darboux(
    elim: &Elimination,
    map: &CanonicalMap,
    s: Sampling,
) -> Result<DarbouxResult, ReductionError> {
    map.verify(s)?;
    let inv = map.restricted_inverse();
    for c in &elim.coords {
        if !inv.contains_key(c) {
            return Err(ReductionError::MissingInverse(c.to_string()));
        }
    }
    let coords = map.reduced_coords();
    let pulled: Vec<Expr> = elim.one_form.iter().map(|a| a.substitute(&inv)).collect();
    let one_form: Vec<Expr> = coords
        .iter()
        .map(|y| {
            elim.coords
                .iter()
                .zip(&pulled)
                .map(|(x, a)| a * inv[x].diff(y))
                .sum()
        })
        .collect();
    let form = PresymplecticForm::from_one_form(&coords, &one_form);
    let hamiltonian = elim.hamiltonian.substitute(&inv);
    for row in &form.entries {
        for e in row {
            map.target_chart.check_guards(e)?;
        }
    }
    let target = canonical_target(map.target.dof() - 1);
    let canonical_residual = form.deviation_from(&target, &map.target_chart, s)?;
    if !(canonical_residual <= s.tol) {
        return Err(ReductionError::NotDarboux(canonical_residual));
    }
    Ok(DarbouxResult { coords, one_form, form, hamiltonian, canonical_residual })
}

#[derive(Debug, Clone)]
pub struct LiouvilleReport {
    pub points: usize,
    pub skipped: usize,
    pub max_residual: f64,
    pub passed: bool,
}

/// Compares `|det ∂ξ̂/∂(p_ζ, ζ, z)|` on `p_z = 0` (finite differences of the
/// inverse map) with `|∂φ/∂ξ¹|` evaluated at `ξ¹ = g`.
pub fn jacobi_liouville_check(
    map: &CanonicalMap,
    c: &ConstraintSpec,
    s: Sampling,
) -> Result<LiouvilleReport, ReductionError> {
    let chart = &map.target_chart;
    let slots = chart.symbols();
    let inv = map.restricted_inverse();
    let reduced: Vec<Symbol> = map.source.xi().into_iter().filter(|x| *x != c.eliminated).collect();
    let mut compiled = Vec::with_capacity(reduced.len());
    for x in &reduced {
        let e = inv.get(x).ok_or_else(|| ReductionError::MissingInverse(x.to_string()))?;
        compiled.push(e.compile::<f64>(&slots)?);
    }
    let dphi = c
        .phi
        .diff(&c.eliminated)
        .subs(&c.eliminated, &c.solution)
        .substitute(&inv);
    let dphi = dphi.compile::<f64>(&slots)?;
    let vars: Vec<usize> = map
        .reduced_coords()
        .iter()
        .map(|y| {
            slots
                .iter()
                .position(|s| s == y)
                .ok_or_else(|| ReductionError::Chart(crate::expr::SampleError::Unbound(y.to_string())))
        })
        .collect::<Result<_, _>>()?;
    let pz = slots.iter().position(|t| t == map.p_z());
    let f = |v: &[f64]| compiled.iter().map(|c| c.eval(v)).collect::<Result<Vec<f64>, _>>();

    let mut report = LiouvilleReport { points: 0, skipped: 0, max_residual: 0.0, passed: true };
    for p in chart.sample_seeded(s.seed, s.points)? {
        let mut v: Vec<f64> = slots.iter().map(|t| p[t]).collect();
        if let Some(i) = pz {
            v[i] = 0.0;
        }
        let det = fd_jacobian(f, &v, &vars, 1e-6)?.determinant().abs();
        let expected = dphi.eval(&v)?.abs();
        if expected < 1e-10 && det < 1e-10 {
            report.skipped += 1;
            continue;
        }
        report.points += 1;
        let r = (det - expected).abs() / (1.0 + expected);
        if !(r <= report.max_residual) {
            report.max_residual = r;
        }
        if !(r <= s.tol) {
            report.passed = false;
        }
    }
    if report.points == 0 {
        return Err(ReductionError::Chart(crate::expr::SampleError::Singular(
            "Jacobian singular at every sampled point".into(),
        )));
    }
    Ok(report)
}

/// Structural helper: `true` if the reduced Hamiltonian no longer depends on `p_z`.
pub(super) fn free_of(e: &Expr, s: &Symbol, chart: &Chart, smp: Sampling) -> Result<bool, ReductionError> {
    let d = e.diff(s);
    Ok(d.is_zero() || vanishes(&d, chart, smp)?.equal)
}
