//! The two worked examples (and the `λ(x² + y²)` variant) with their charts and maps.

use std::collections::BTreeMap;

use super::{CanonicalMap, ConstraintSpec};
use crate::expr::{Chart, Expr, Symbol};
use crate::symplectic::{Charge, HooftSystem, PhaseSpace};

/// A system together with everything needed to reduce it.
#[derive(Debug, Clone)]
pub struct Model {
    pub name: String,
    pub system: HooftSystem,
    pub constraint: ConstraintSpec,
    pub map: CanonicalMap,
    /// Source variables and parameters.
    pub chart: Chart,
}

fn e(src: &str) -> Expr {
    src.parse().expect("built-in formula parses")
}

fn bindings(pairs: &[(&str, Expr)]) -> BTreeMap<Symbol, Expr> {
    pairs.iter().map(|(k, v)| (Symbol::new(k), v.clone())).collect()
}

fn planar() -> PhaseSpace {
    PhaseSpace::from_pairs(&[("x", "p_x"), ("y", "p_y")]).expect("valid phase space")
}

fn target() -> PhaseSpace {
    PhaseSpace::from_pairs(&[("zeta", "p_zeta"), ("z", "p_z")]).expect("valid phase space")
}

/// `H = x p_y − y p_x` with `C₁ = x² + y²`, `C₂ = x p_x + y p_y` and `ρ = a₁ C₁`.
fn rotation(params: &[&str]) -> HooftSystem {
    HooftSystem::new(
        planar(),
        vec![e("-y"), e("x")],
        vec![Charge::new("C1", e("x^2 + y^2")), Charge::new("C2", e("x*p_x + y*p_y"))],
        e("a1*(x^2 + y^2)"),
        params.iter().map(|p| Symbol::new(p)).collect(),
    )
    .expect("valid system")
}

fn free_particle_chart() -> Chart {
    Chart::new()
        .range("x", -3.0, 3.0)
        .range("y", 0.1, 3.0)
        .range("p_x", -2.0, 2.0)
        .range("p_y", -2.0, 2.0)
        .range("a1", 0.2, 1.5)
        .require(e("x^2 + y^2"), 0.25, 9.0)
}

fn free_particle_target_chart() -> Chart {
    Chart::new()
        .range("zeta", -3.0, 3.0)
        .range("p_zeta", 0.5, 3.0)
        .range("z", -1.3, 1.3)
        .range("p_z", -2.0, 2.0)
        .range("a1", 0.2, 1.5)
}

/// `p_ζ = r`, `ζ = −2a₁ r atan2(x, y) − (x p_x + y p_y)/r`, `z = −atan2(x, y)`, `p_z = φ`.
pub fn free_particle_map() -> CanonicalMap {
    let forward = bindings(&[
        ("p_zeta", e("sqrt(x^2 + y^2)")),
        ("zeta", e("-2*a1*sqrt(x^2 + y^2)*atan2(x, y) - (x*p_x + y*p_y)/sqrt(x^2 + y^2)")),
        ("z", e("-atan2(x, y)")),
        ("p_z", e("x*p_y - y*p_x - a1*(x^2 + y^2)")),
    ]);
    // u = x p_x + y p_y and v = x p_y − y p_x, each divided by r.
    let u = e("2*a1*p_zeta*z - zeta");
    let v = e("(p_z + a1*p_zeta^2)/p_zeta");
    let (s, c) = (e("sin(z)"), e("cos(z)"));
    let inverse = bindings(&[
        ("x", e("-p_zeta*sin(z)")),
        ("y", e("p_zeta*cos(z)")),
        ("p_x", -(&s * &u + &c * &v)),
        ("p_y", &c * &u - &s * &v),
    ]);
    CanonicalMap {
        name: "free particle".into(),
        source: planar(),
        target: target(),
        forward,
        inverse,
        source_chart: free_particle_chart(),
        target_chart: free_particle_target_chart(),
    }
}

fn free_constraint() -> ConstraintSpec {
    ConstraintSpec::solve_linear(e("x*p_y - y*p_x - a1*(x^2 + y^2)"), Symbol::new("p_x"))
        .expect("linear in p_x")
        .with_gauge(e("-atan2(x, y)"))
}

/// `H = x p_y − y p_x`, `φ = H − ρ`, eliminating `p_x`.
pub fn free_particle() -> Model {
    Model {
        name: "free particle".into(),
        system: rotation(&["a1"]),
        constraint: free_constraint(),
        map: free_particle_map(),
        chart: free_particle_chart(),
    }
}

/// `H = x p_y − y p_x + λ(x² + y²)` with the same `ρ` and `φ`.
pub fn lambda_variant() -> Model {
    let system = rotation(&["a1", "lambda"]).with_potential(e("lambda*(x^2 + y^2)")).expect("momentum-free potential");
    let mut map = free_particle_map();
    map.name = "free particle (lambda variant)".into();
    map.source_chart.set_range(Symbol::new("lambda"), 0.0, 1.0);
    map.target_chart.set_range(Symbol::new("lambda"), 0.0, 1.0);
    Model {
        name: "lambda variant".into(),
        system,
        constraint: free_constraint(),
        chart: map.source_chart.clone(),
        map,
    }
}

// a₁α ≥ 1.2 keeps clear of a₁α = ±1; the origin (ρ = 0) is excluded.
fn harmonic_chart() -> Chart {
    Chart::new()
        .range("x", -2.0, 2.0)
        .range("y", -2.0, 2.0)
        .range("p_x", -2.0, 2.0)
        .range("p_y", -2.0, 2.0)
        .range("a1", 0.8, 1.5)
        .range("alpha", 1.5, 3.0)
        .require(e("x^2 + y^2"), 0.25, 8.0)
}

fn harmonic_target_chart() -> Chart {
    Chart::new()
        .range("zeta", -2.0, 2.0)
        .range("p_zeta", -2.0, 2.0)
        .range("z", -1.0, 1.0)
        .range("p_z", -2.0, 2.0)
        .range("a1", 0.8, 1.5)
        .range("alpha", 1.5, 3.0)
}

/// `φ₁ = p_x − x/α + a₁y`.
pub fn harmonic_phi1() -> Expr {
    e("p_x - x/alpha + a1*y")
}

/// `φ₂ = p_y − y/α − a₁x`.
pub fn harmonic_phi2() -> Expr {
    e("p_y - y/alpha - a1*x")
}

pub fn harmonic_map() -> CanonicalMap {
    let forward = bindings(&[
        ("p_zeta", e("(p_y + a1*x - y/alpha)/sqrt(2)")),
        ("zeta", e("-(p_x - x/alpha - a1*y)/(sqrt(2)*a1)")),
        ("z", harmonic_phi2() / e("2*a1")),
        ("p_z", -harmonic_phi1()),
    ]);
    let x = e("(sqrt(2)*p_zeta - 2*a1*z)/(2*a1)");
    let y = e("(sqrt(2)*a1*zeta - p_z)/(2*a1)");
    let alpha = Expr::sym("alpha");
    let a1 = Expr::sym("a1");
    let p_x = e("-sqrt(2)*a1*zeta") + &x / &alpha + &a1 * &y;
    let p_y = e("(sqrt(2)*p_zeta + 2*a1*z)/2") + &y / &alpha;
    let inverse = bindings(&[("x", x), ("y", y), ("p_x", p_x), ("p_y", p_y)]);
    CanonicalMap {
        name: "harmonic oscillator".into(),
        source: planar(),
        target: target(),
        forward,
        inverse,
        source_chart: harmonic_chart(),
        target_chart: harmonic_target_chart(),
    }
}

/// `H = x p_y − y p_x` reduced with `φ₁` as the constraint and `φ₂` as the gauge.
pub fn harmonic() -> Model {
    let constraint = ConstraintSpec::solve_linear(harmonic_phi1(), Symbol::new("p_x"))
        .expect("linear in p_x")
        .with_gauge(harmonic_phi2());
    Model {
        name: "harmonic oscillator".into(),
        system: rotation(&["a1", "alpha"]),
        constraint,
        map: harmonic_map(),
        chart: harmonic_chart(),
    }
}
