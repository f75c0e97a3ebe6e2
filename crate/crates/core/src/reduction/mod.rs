//! Constraint elimination, Darboux maps and z-elimination.
//!
//! The pipeline is: impose `φ = 0` by solving for one phase-space coordinate
//! ([`eliminate_primary`]), pull the resulting first-order Lagrangian back
//! through a verified canonical map ([`apply_darboux`]), then remove the
//! non-dynamical `z` ([`eliminate_z`]).

pub mod builtin;
mod darboux;
mod gauge;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::expr::{vanishes, Chart, EvalError, Expr, Point, SampleError, Sampling, Symbol};
use crate::symplectic::{HooftSystem, PhaseSpace};

pub use darboux::{
    apply_darboux, jacobi_liouville_check, BracketCheck, CanonicalMap, CanonicityReport, DarbouxResult,
    LiouvilleReport,
};
pub use gauge::{eliminate_z, ReducedSystem, ZBranch, ZElimination};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReductionError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("constraint solution does not satisfy phi = 0 (residual {0:e})")]
    ConstraintNotSolved(f64),
    #[error("chart error: {0}")]
    Chart(SampleError),
    #[error("map rejected: bracket {bracket} should be {expected}, residual {residual:e}")]
    NotCanonical { bracket: String, expected: i64, residual: f64 },
    #[error("map rejected: inverse of `{symbol}` inconsistent with the forward map (residual {residual:e})")]
    InverseMismatch { symbol: String, residual: f64 },
    #[error("map is missing an inverse for `{0}`")]
    MissingInverse(String),
    #[error("transformed kinetic term is not canonical (residual {0:e})")]
    NotDarboux(f64),
    #[error("unsupported elimination pattern: {0}")]
    Unsupported(String),
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
}

impl From<SampleError> for ReductionError {
    fn from(e: SampleError) -> Self {
        ReductionError::Chart(e)
    }
}

/// Velocity symbol paired with a coordinate in printed Lagrangians (`x` → `x_dot`).
pub fn velocity(s: &Symbol) -> Symbol {
    Symbol::new(&format!("{s}_dot"))
}

/// The information-loss constraint and the coordinate it is solved for.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSpec {
    pub phi: Expr,
    pub eliminated: Symbol,
    pub solution: Expr,
    pub chi: Option<Expr>,
}

impl ConstraintSpec {
    pub fn new(phi: Expr, eliminated: Symbol, solution: Expr) -> Self {
        ConstraintSpec { phi, eliminated, solution, chi: None }
    }

    pub fn with_gauge(mut self, chi: Expr) -> Self {
        self.chi = Some(chi);
        self
    }

    /// Solves `φ = 0` for `eliminated` when `φ` is linear in it.
    pub fn solve_linear(phi: Expr, eliminated: Symbol) -> Result<Self, ReductionError> {
        let d = phi.diff(&eliminated);
        if d.is_zero() {
            return Err(ReductionError::Precondition(format!("d phi / d {eliminated} is identically zero")));
        }
        if d.contains(&eliminated) {
            return Err(ReductionError::Unsupported(format!("phi is not linear in {eliminated}")));
        }
        let rest = phi.subs(&eliminated, &Expr::zero());
        let solution = -rest / d;
        Ok(ConstraintSpec::new(phi, eliminated, solution))
    }

    fn substitution(&self) -> BTreeMap<Symbol, Expr> {
        [(self.eliminated.clone(), self.solution.clone())].into_iter().collect()
    }

    /// `φ(g) ≡ 0` on the chart and `∂φ/∂ξ¹ ≢ 0`.
    pub fn validate(&self, chart: &Chart, s: Sampling) -> Result<(), ReductionError> {
        if self.solution.contains(&self.eliminated) {
            return Err(ReductionError::Precondition(format!(
                "solution for {} refers to itself",
                self.eliminated
            )));
        }
        let d = self.phi.diff(&self.eliminated);
        if d.is_zero() || vanishes(&d, chart, s)?.equal {
            return Err(ReductionError::Precondition(format!(
                "d phi / d {} vanishes on the chart",
                self.eliminated
            )));
        }
        chart.check_guards(&self.solution)?;
        let on_surface = self.phi.substitute(&self.substitution());
        let cmp = vanishes(&on_surface, chart, s)?;
        if !cmp.equal {
            return Err(ReductionError::ConstraintNotSolved(cmp.max_residual));
        }
        Ok(())
    }
}

/// Antisymmetric matrix `f_ij(ξ̂)` of the reduced kinetic term.
#[derive(Debug, Clone, PartialEq)]
pub struct PresymplecticForm {
    pub coords: Vec<Symbol>,
    pub entries: Vec<Vec<Expr>>,
}

impl PresymplecticForm {
    /// `f_ij = ∂_i A_j − ∂_j A_i` for the kinetic term `A_i ξ̇ⁱ`.
    pub fn from_one_form(coords: &[Symbol], a: &[Expr]) -> Self {
        let n = coords.len();
        let mut entries = vec![vec![Expr::zero(); n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let f = a[j].diff(&coords[i]) - a[i].diff(&coords[j]);
                entries[j][i] = -&f;
                entries[i][j] = f;
            }
        }
        PresymplecticForm { coords: coords.to_vec(), entries }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn is_antisymmetric(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|j| (&self.entries[i][j] + &self.entries[j][i]).is_zero()))
    }

    pub fn at(&self, p: &Point) -> Result<DMatrix<f64>, EvalError> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = self.entries[i][j].evaluate(p)?;
            }
        }
        Ok(m)
    }

    /// Smallest rank deficiency seen over the sampled points (the generic value).
    pub fn rank_deficiency(&self, chart: &Chart, s: Sampling) -> Result<usize, ReductionError> {
        let mut deficiency = self.dim();
        for p in chart.sample_seeded(s.seed, s.points)? {
            let m = self.at(&p)?;
            let scale = m.amax().max(1.0);
            let rank = m.rank(1e-9 * scale);
            deficiency = deficiency.min(self.dim() - rank);
        }
        Ok(deficiency)
    }

    /// Largest entrywise deviation from a constant target matrix over sampled points.
    pub fn deviation_from(&self, target: &DMatrix<f64>, chart: &Chart, s: Sampling) -> Result<f64, ReductionError> {
        let mut worst = 0.0f64;
        for p in chart.sample_seeded(s.seed, s.points)? {
            let m = self.at(&p)?;
            let r = (m - target).amax();
            if !(r <= worst) {
                worst = r;
            }
        }
        Ok(worst)
    }
}

/// Result of imposing the constraint: `L_R = A_i ξ̂̇ⁱ − H_R`.
#[derive(Debug, Clone)]
pub struct Elimination {
    pub coords: Vec<Symbol>,
    pub one_form: Vec<Expr>,
    pub hamiltonian: Expr,
    pub form: PresymplecticForm,
}

impl Elimination {
    /// `L_R` with velocities as `<name>_dot` symbols.
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

/// Substitutes `ξ¹ = g(ξ̂)` into `pₐ q̇ᵃ − H`.
///
/// The kinetic term is taken in the `p dq` gauge, which differs from the
/// symmetric `½ ξ ω ξ̇` by a total derivative; `f_ij` is the same either way.
pub fn eliminate_primary(
    sys: &HooftSystem,
    c: &ConstraintSpec,
    chart: &Chart,
    s: Sampling,
) -> Result<Elimination, ReductionError> {
    let ps = &sys.phase_space;
    if !ps.xi().contains(&c.eliminated) {
        return Err(ReductionError::Precondition(format!(
            "{} is not a phase-space coordinate",
            c.eliminated
        )));
    }
    c.validate(chart, s)?;
    let subs = c.substitution();
    let coords: Vec<Symbol> = ps.xi().into_iter().filter(|x| *x != c.eliminated).collect();
    let mut one_form = vec![Expr::zero(); coords.len()];
    for (q, p) in ps.coordinates().iter().zip(ps.momenta()) {
        let pe = Expr::symbol(p).substitute(&subs);
        let qe = Expr::symbol(q).substitute(&subs);
        for (a, x) in one_form.iter_mut().zip(&coords) {
            let dq = qe.diff(x);
            if !dq.is_zero() {
                *a = &*a + &pe * dq;
            }
        }
    }
    let hamiltonian = sys.hamiltonian().substitute(&subs);
    let form = PresymplecticForm::from_one_form(&coords, &one_form);
    Ok(Elimination { coords, one_form, hamiltonian, form })
}

/// `f_ij = ω_ij − [ω_{ei} ∂g/∂ξʲ − ω_{ej} ∂g/∂ξⁱ]` for the eliminated index `e`,
/// built directly from the constant symplectic matrix.
pub fn presymplectic_from_omega(ps: &PhaseSpace, c: &ConstraintSpec) -> PresymplecticForm {
    let xi = ps.xi();
    let omega = ps.omega();
    let e = xi.iter().position(|x| *x == c.eliminated).expect("eliminated symbol in phase space");
    let idx: Vec<usize> = (0..xi.len()).filter(|&k| k != e).collect();
    let coords: Vec<Symbol> = idx.iter().map(|&k| xi[k].clone()).collect();
    let w = |a: usize, b: usize| Expr::int(omega[(a, b)] as i64);
    let n = idx.len();
    let mut entries = vec![vec![Expr::zero(); n]; n];
    for (i, &a) in idx.iter().enumerate() {
        for (j, &b) in idx.iter().enumerate() {
            let dj = c.solution.diff(&xi[b]);
            let di = c.solution.diff(&xi[a]);
            entries[i][j] = w(a, b) - (w(e, a) * dj - w(e, b) * di);
        }
    }
    PresymplecticForm { coords, entries }
}

/// Every intermediate result of a full reduction.
#[derive(Debug, Clone)]
pub struct Reduction {
    pub elimination: Elimination,
    pub darboux: DarbouxResult,
    pub z_elimination: ZElimination,
    pub reduced: ReducedSystem,
}

/// Constraint elimination, Darboux pull-back and z-elimination in sequence.
pub fn reduce(
    sys: &HooftSystem,
    c: &ConstraintSpec,
    map: &CanonicalMap,
    chart: &Chart,
    s: Sampling,
) -> Result<Reduction, ReductionError> {
    let mut provenance = Vec::new();
    let elimination = eliminate_primary(sys, c, chart, s)?;
    provenance.push(format!("imposed phi = {} by {} = {}", c.phi, c.eliminated, c.solution));
    provenance.push(format!("H_R = {}", elimination.hamiltonian));
    let darboux = apply_darboux(&elimination, map, s)?;
    provenance.push(format!(
        "Darboux map `{}`: canonical kinetic term, residual {:.1e}",
        map.name, darboux.canonical_residual
    ));
    provenance.push(format!("H_R' = {}", darboux.hamiltonian));
    let z_elimination = eliminate_z(&darboux.hamiltonian, &[map.z().clone()], &map.target_chart, s)?;
    match &z_elimination.branch {
        ZBranch::PureGauge => provenance.push(format!("{} is pure gauge, chi = {}", z_elimination.z, z_elimination.chi)),
        ZBranch::Solved(v) => provenance.push(format!("chi = {} = 0 gives {} = {}", z_elimination.chi, z_elimination.z, v)),
    }
    provenance.push(format!("H* = {}", z_elimination.h_star));
    let n = map.target.dof() - 1;
    let phase_space = PhaseSpace::new(map.target.coordinates()[..n].to_vec(), map.target.momenta()[..n].to_vec())
        .map_err(|e| ReductionError::Precondition(e.to_string()))?;
    let reduced = ReducedSystem {
        phase_space,
        h_star: z_elimination.h_star.clone(),
        parameters: sys.parameters.clone(),
        provenance,
    };
    Ok(Reduction { elimination, darboux, z_elimination, reduced })
}

impl builtin::Model {
    pub fn reduce(&self, s: Sampling) -> Result<Reduction, ReductionError> {
        reduce(&self.system, &self.constraint, &self.map, &self.chart, s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_linear_constraint() {
        let phi: Expr = "x*p_y - y*p_x - a1*(x^2 + y^2)".parse().unwrap();
        let c = ConstraintSpec::solve_linear(phi, Symbol::new("p_x")).unwrap();
        let expected: Expr = "(x*p_y - a1*(x^2 + y^2))/y".parse().unwrap();
        assert_eq!(c.solution, expected);
    }

    #[test]
    fn momentum_free_constraint_is_rejected() {
        let phi: Expr = "a1".parse().unwrap();
        let r = ConstraintSpec::solve_linear(phi, Symbol::new("p"));
        assert!(matches!(r, Err(ReductionError::Precondition(_))));
    }

    #[test]
    fn curl_of_canonical_one_form_is_omega() {
        let ps = PhaseSpace::from_pairs(&[("q", "p")]).unwrap();
        let f = PresymplecticForm::from_one_form(&ps.xi(), &[Expr::zero(), Expr::sym("p")]);
        assert_eq!(f.entries[0][1], Expr::one());
        assert_eq!(f.entries[1][0], Expr::int(-1));
        assert!(f.is_antisymmetric());
    }
}
