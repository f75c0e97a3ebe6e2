//! Phase space, Poisson brackets, Hamilton's equations and the H₊/H₋ splitting.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::expr::{compare_with, vanishes, Chart, Comparison, Expr, SampleError, Sampling, Symbol};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SymplecticError {
    #[error("{coordinates} coordinates but {momenta} momenta")]
    Unbalanced { coordinates: usize, momenta: usize },
    #[error("symbol `{0}` is both a coordinate and a momentum")]
    Overlap(String),
    #[error("velocity for `{coordinate}` depends on momentum `{momentum}`")]
    VelocityDependsOnMomentum { coordinate: String, momentum: String },
    #[error("expected {expected} velocity functions, found {found}")]
    VelocityCount { expected: usize, found: usize },
    #[error("potential term depends on momentum `{0}`")]
    PotentialDependsOnMomentum(String),
    #[error("rho not conserved: {{rho, H}} = {bracket} (residual {residual:e})")]
    RhoNotConserved { bracket: String, residual: f64 },
    #[error("rho is identically zero")]
    ZeroRho,
    #[error(transparent)]
    Sample(#[from] SampleError),
}

/// `N` canonical pairs. The combined coordinate `ξ` lists momenta first, then coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseSpace {
    coordinates: Vec<Symbol>,
    momenta: Vec<Symbol>,
}

impl PhaseSpace {
    pub fn new(coordinates: Vec<Symbol>, momenta: Vec<Symbol>) -> Result<Self, SymplecticError> {
        if coordinates.len() != momenta.len() {
            return Err(SymplecticError::Unbalanced {
                coordinates: coordinates.len(),
                momenta: momenta.len(),
            });
        }
        if let Some(s) = coordinates.iter().find(|c| momenta.contains(c)) {
            return Err(SymplecticError::Overlap(s.to_string()));
        }
        Ok(PhaseSpace { coordinates, momenta })
    }

    /// Builds from `(coordinate, momentum)` name pairs.
    pub fn from_pairs(pairs: &[(&str, &str)]) -> Result<Self, SymplecticError> {
        Self::new(
            pairs.iter().map(|(q, _)| Symbol::new(q)).collect(),
            pairs.iter().map(|(_, p)| Symbol::new(p)).collect(),
        )
    }

    pub fn dof(&self) -> usize {
        self.coordinates.len()
    }

    pub fn coordinates(&self) -> &[Symbol] {
        &self.coordinates
    }

    pub fn momenta(&self) -> &[Symbol] {
        &self.momenta
    }

    /// `ξ = (p₁..p_N, q¹..q^N)`.
    pub fn xi(&self) -> Vec<Symbol> {
        self.momenta.iter().chain(&self.coordinates).cloned().collect()
    }

    /// `ω = [[0, I], [-I, 0]]` in `ξ` order.
    pub fn omega(&self) -> DMatrix<f64> {
        let n = self.dof();
        DMatrix::from_fn(2 * n, 2 * n, |i, j| {
            if j == i + n {
                1.0
            } else if i == j + n {
                -1.0
            } else {
                0.0
            }
        })
    }
}

/// `{f, g} = Σₐ (∂f/∂qᵃ ∂g/∂pₐ − ∂f/∂pₐ ∂g/∂qᵃ)`.
pub fn poisson_bracket(f: &Expr, g: &Expr, ps: &PhaseSpace) -> Expr {
    ps.coordinates
        .iter()
        .zip(&ps.momenta)
        .map(|(q, p)| f.diff(q) * g.diff(p) - f.diff(p) * g.diff(q))
        .sum()
}

/// Hamilton's equations `ξ̇ = ω⁻¹ ∇H`, returned in `ξ` order: `(ṗ₁..ṗ_N, q̇¹..q̇^N)`.
pub fn hamilton_vector_field(h: &Expr, ps: &PhaseSpace) -> Vec<Expr> {
    let p_dot = ps.coordinates.iter().map(|q| -h.diff(q));
    let q_dot = ps.momenta.iter().map(|p| h.diff(p));
    p_dot.chain(q_dot).collect()
}

/// A named conserved quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct Charge {
    pub name: String,
    pub expr: Expr,
}

impl Charge {
    pub fn new(name: &str, expr: Expr) -> Self {
        Charge { name: name.to_string(), expr }
    }
}

/// `H = fᵃ(q) pₐ + V(q)` with declared charges and `ρ = Σ aᵢ Cⁱ`.
///
/// `V` is zero for a pure 't Hooft Hamiltonian; a p-independent term such as
/// `λ(x² + y²)` leaves the be-able dynamics unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct HooftSystem {
    pub phase_space: PhaseSpace,
    pub velocities: Vec<Expr>,
    pub potential: Expr,
    pub charges: Vec<Charge>,
    pub rho: Expr,
    pub parameters: Vec<Symbol>,
}

impl HooftSystem {
    pub fn new(
        phase_space: PhaseSpace,
        velocities: Vec<Expr>,
        charges: Vec<Charge>,
        rho: Expr,
        parameters: Vec<Symbol>,
    ) -> Result<Self, SymplecticError> {
        if velocities.len() != phase_space.dof() {
            return Err(SymplecticError::VelocityCount {
                expected: phase_space.dof(),
                found: velocities.len(),
            });
        }
        for (f, q) in velocities.iter().zip(phase_space.coordinates()) {
            if let Some(p) = phase_space.momenta().iter().find(|p| f.contains(p)) {
                return Err(SymplecticError::VelocityDependsOnMomentum {
                    coordinate: q.to_string(),
                    momentum: p.to_string(),
                });
            }
        }
        Ok(HooftSystem {
            phase_space,
            velocities,
            potential: Expr::zero(),
            charges,
            rho,
            parameters,
        })
    }

    pub fn with_potential(mut self, v: Expr) -> Result<Self, SymplecticError> {
        if let Some(p) = self.phase_space.momenta().iter().find(|p| v.contains(p)) {
            return Err(SymplecticError::PotentialDependsOnMomentum(p.to_string()));
        }
        self.potential = v;
        Ok(self)
    }

    pub fn hamiltonian(&self) -> Expr {
        let kinetic: Expr = self
            .velocities
            .iter()
            .zip(self.phase_space.momenta())
            .map(|(f, p)| f * Expr::symbol(p))
            .sum();
        kinetic + &self.potential
    }

    /// Structural check that every `∂²H/∂pₐ∂p_b` normalizes to zero.
    pub fn is_linear_in_momenta(&self) -> bool {
        let h = self.hamiltonian();
        let ps = self.phase_space.momenta();
        ps.iter()
            .all(|a| ps.iter().all(|b| h.diff(a).diff(b).is_zero()))
    }

    pub fn vector_field(&self) -> Vec<Expr> {
        hamilton_vector_field(&self.hamiltonian(), &self.phase_space)
    }
}

/// `H₊ = (H + ρ)²/(4ρ)`, `H₋ = (H − ρ)²/(4ρ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSplit {
    pub h_plus: Expr,
    pub h_minus: Expr,
    pub rho: Expr,
}

fn quarter_square_over(num: Expr, rho: &Expr) -> Expr {
    num.pow(2) / (rho * 4)
}

/// Splits `H = H₊ − H₋`. Requires `{ρ, H} ≡ 0`, checked structurally and then by sampling.
pub fn split_hamiltonian(
    sys: &HooftSystem,
    chart: &Chart,
    sampling: Sampling,
) -> Result<HamiltonianSplit, SymplecticError> {
    if sys.rho.is_zero() {
        return Err(SymplecticError::ZeroRho);
    }
    let h = sys.hamiltonian();
    let bracket = poisson_bracket(&sys.rho, &h, &sys.phase_space);
    let cmp = vanishes(&bracket, chart, sampling)?;
    if !cmp.equal {
        return Err(SymplecticError::RhoNotConserved {
            bracket: bracket.to_string(),
            residual: cmp.max_residual,
        });
    }
    Ok(HamiltonianSplit {
        h_plus: quarter_square_over(&h + &sys.rho, &sys.rho),
        h_minus: quarter_square_over(&h - &sys.rho, &sys.rho),
        rho: sys.rho.clone(),
    })
}

impl HamiltonianSplit {
    /// `H₊ − H₋` against `H`.
    pub fn difference_check(&self, h: &Expr, chart: &Chart, s: Sampling) -> Result<Comparison, SampleError> {
        compare_with(&(&self.h_plus - &self.h_minus), h, chart, s)
    }

    /// `{H₊, H₋}` against zero.
    pub fn commute_check(&self, ps: &PhaseSpace, chart: &Chart, s: Sampling) -> Result<Comparison, SampleError> {
        vanishes(&poisson_bracket(&self.h_plus, &self.h_minus, ps), chart, s)
    }

    /// Both halves nonnegative at every sampled point with `ρ > 0`. Returns the
    /// most negative value seen (0 when none is negative).
    pub fn positivity_check(&self, chart: &Chart, s: Sampling) -> Result<f64, SampleError> {
        let chart = chart.clone().require(self.rho.clone(), f64::MIN_POSITIVE, f64::INFINITY);
        let mut worst = 0.0f64;
        for p in chart.sample_seeded(s.seed, s.points)? {
            for e in [&self.h_plus, &self.h_minus] {
                let v: f64 = e.evaluate(&p).map_err(|source| SampleError::Eval {
                    point: format!("{p:?}"),
                    source,
                })?;
                worst = worst.min(v);
            }
        }
        Ok(worst)
    }
}

/// Outcome of one charge check.
#[derive(Debug, Clone)]
pub struct ChargeCheck {
    pub name: String,
    pub bracket: Expr,
    pub passed: bool,
    pub max_residual: f64,
    pub momentum_independent: bool,
}

/// `{Cⁱ, H} ≡ 0` per declared charge; failures are entries, not errors.
pub fn verify_charges(
    sys: &HooftSystem,
    chart: &Chart,
    sampling: Sampling,
) -> Result<Vec<ChargeCheck>, SampleError> {
    let h = sys.hamiltonian();
    sys.charges
        .iter()
        .map(|c| {
            let bracket = poisson_bracket(&c.expr, &h, &sys.phase_space);
            let cmp = vanishes(&bracket, chart, sampling)?;
            Ok(ChargeCheck {
                name: c.name.clone(),
                passed: cmp.equal,
                max_residual: cmp.max_residual,
                momentum_independent: !sys.phase_space.momenta().iter().any(|p| c.expr.contains(p)),
                bracket,
            })
        })
        .collect()
}

/// `{φ, χ}`; the caller decides whether it is nonvanishing on the constraint surface.
pub fn gauge_pair_check(phi: &Expr, chi: &Expr, ps: &PhaseSpace) -> Expr {
    poisson_bracket(phi, chi, ps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane() -> PhaseSpace {
        PhaseSpace::from_pairs(&[("x", "p_x"), ("y", "p_y")]).unwrap()
    }

    #[test]
    fn omega_blocks() {
        let w = plane().omega();
        assert_eq!(&w * &w, -DMatrix::<f64>::identity(4, 4));
        assert_eq!(w.transpose(), -w.clone());
        assert_eq!(w[(0, 2)], 1.0);
    }

    #[test]
    fn canonical_pair_bracket() {
        let ps = plane();
        assert_eq!(poisson_bracket(&Expr::sym("x"), &Expr::sym("p_x"), &ps), Expr::one());
        assert!(poisson_bracket(&Expr::sym("x"), &Expr::sym("p_y"), &ps).is_zero());
    }

    #[test]
    fn rotation_field() {
        let ps = plane();
        let h: Expr = "x*p_y - y*p_x".parse().unwrap();
        let v = hamilton_vector_field(&h, &ps);
        // (ṗ_x, ṗ_y, ẋ, ẏ)
        assert_eq!(v[0], -Expr::sym("p_y"));
        assert_eq!(v[1], Expr::sym("p_x"));
        assert_eq!(v[2], -Expr::sym("y"));
        assert_eq!(v[3], Expr::sym("x"));
    }

    #[test]
    fn rejects_bad_phase_space() {
        assert!(PhaseSpace::from_pairs(&[("x", "x")]).is_err());
        assert!(PhaseSpace::new(vec![Symbol::new("x")], vec![]).is_err());
    }

    #[test]
    fn hooft_velocity_must_be_momentum_free() {
        let r = HooftSystem::new(plane(), vec![Expr::sym("p_x"), Expr::zero()], vec![], Expr::one(), vec![]);
        assert!(matches!(r, Err(SymplecticError::VelocityDependsOnMomentum { .. })));
    }

    #[test]
    fn zero_hamiltonian_splits_into_quarters() {
        let sys = HooftSystem::new(
            plane(),
            vec![Expr::zero(), Expr::zero()],
            vec![],
            "x^2 + y^2".parse().unwrap(),
            vec![],
        )
        .unwrap();
        let chart = Chart::new().range("x", 0.5, 1.0).range("y", 0.5, 1.0);
        let s = split_hamiltonian(&sys, &chart, Sampling::default()).unwrap();
        let quarter = &sys.rho / 4;
        assert!(compare_with(&s.h_plus, &quarter, &chart, Sampling::default()).unwrap().equal);
        assert!(compare_with(&s.h_minus, &quarter, &chart, Sampling::default()).unwrap().equal);
    }
}
