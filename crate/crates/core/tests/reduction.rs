use emergent::expr::{compare_with, numeric_equal, Sampling};
use emergent::reduction::builtin::{free_particle, harmonic, harmonic_map, harmonic_phi2, lambda_variant};
use emergent::reduction::{
    apply_darboux, eliminate_primary, jacobi_liouville_check, presymplectic_from_omega, ConstraintSpec,
    PresymplecticForm, ReductionError, ZBranch,
};
use emergent::{Chart, Expr, Symbol};

fn e(s: &str) -> Expr {
    s.parse().unwrap()
}

fn strict() -> Sampling {
    Sampling::new(200, 1e-9, 7)
}

#[test]
fn free_particle_reduced_hamiltonian() {
    let m = free_particle();
    let r = m.reduce(strict()).unwrap();
    let cmp = compare_with(&r.elimination.hamiltonian, &e("a1*(x^2 + y^2)"), &m.chart, strict()).unwrap();
    assert!(cmp.equal, "H_R residual {}", cmp.max_residual);
    assert_eq!(r.z_elimination.branch, ZBranch::PureGauge);
    assert!(numeric_equal(&r.reduced.h_star, &e("a1*p_zeta^2"), &m.map.target_chart, 200, 1e-10, 1).unwrap());
    assert_eq!(r.reduced.phase_space.dof(), 1);
    assert!(r.reduced.is_nonnegative(&m.map.target_chart, strict()).unwrap());
}

#[test]
fn lambda_variant_shifts_the_coupling() {
    let m = lambda_variant();
    let r = m.reduce(strict()).unwrap();
    let expected = e("(a1 + lambda)*p_zeta^2");
    assert!(numeric_equal(&r.reduced.h_star, &expected, &m.map.target_chart, 200, 1e-10, 2).unwrap());
}

#[test]
fn harmonic_reduced_hamiltonian() {
    let m = harmonic();
    let r = m.reduce(strict()).unwrap();
    let h_r = e("x*p_y - y*(x/alpha - a1*y)");
    assert!(compare_with(&r.elimination.hamiltonian, &h_r, &m.chart, strict()).unwrap().equal);
    let h_prime = e("p_zeta^2/(2*a1) + a1/2*(zeta^2 - 2*z^2)");
    assert!(numeric_equal(&r.darboux.hamiltonian, &h_prime, &m.map.target_chart, 200, 1e-10, 3).unwrap());
    assert_eq!(r.z_elimination.branch, ZBranch::Solved(Expr::zero()));
    let h_star = e("p_zeta^2/(2*a1) + a1/2*zeta^2");
    assert!(numeric_equal(&r.reduced.h_star, &h_star, &m.map.target_chart, 200, 1e-10, 4).unwrap());
    assert!(r.reduced.is_nonnegative(&m.map.target_chart, strict()).unwrap());
    let (cp, cq) = r
        .reduced
        .quadratic_coefficients(&[(Symbol::new("a1"), 0.5), (Symbol::new("alpha"), 3.0)])
        .unwrap();
    assert!((cp - 1.0).abs() < 1e-12 && (cq - 0.25).abs() < 1e-12);
}

#[test]
fn presymplectic_form_matches_constant_omega_formula() {
    for m in [free_particle(), harmonic()] {
        let el = eliminate_primary(&m.system, &m.constraint, &m.chart, strict()).unwrap();
        assert!(el.form.is_antisymmetric());
        let oracle = presymplectic_from_omega(&m.system.phase_space, &m.constraint);
        assert_eq!(oracle.coords, el.form.coords);
        for i in 0..el.form.dim() {
            for j in 0..el.form.dim() {
                let cmp = compare_with(&el.form.entries[i][j], &oracle.entries[i][j], &m.chart, strict()).unwrap();
                assert!(cmp.equal, "{} f[{i}][{j}]", m.name);
            }
        }
        // Odd dimension: one null direction, the gauge orbit.
        assert_eq!(el.form.rank_deficiency(&m.chart, Sampling::new(20, 1e-9, 0)).unwrap(), 1);
    }
}

#[test]
fn harmonic_reduced_lagrangian_kinetic_term() {
    let m = harmonic();
    let el = eliminate_primary(&m.system, &m.constraint, &m.chart, strict()).unwrap();
    // Kinetic term −(1/2a₁)(p_y + a₁x − y/α) d/dt(p_x − x/α − a₁y) at p_x = g,
    // which differs from the p dq gauge by a total derivative.
    let b = e("-(p_y + a1*x - y/alpha)/(2*a1)");
    let g = &m.constraint.solution;
    let c = e("p_x - x/alpha - a1*y").subs(&Symbol::new("p_x"), g);
    // With the opposite sign on a₁y the factor vanishes on the constraint.
    assert!(e("p_x + a1*y - x/alpha").subs(&Symbol::new("p_x"), g).is_zero());
    let one_form: Vec<Expr> = el.coords.iter().map(|s| &b * c.diff(s)).collect();
    let oracle = PresymplecticForm::from_one_form(&el.coords, &one_form);
    for i in 0..3 {
        for j in 0..3 {
            assert!(compare_with(&el.form.entries[i][j], &oracle.entries[i][j], &m.chart, strict()).unwrap().equal);
        }
    }
}

#[test]
fn builtin_maps_are_canonical_and_liouville() {
    for m in [free_particle(), harmonic(), lambda_variant()] {
        let report = m.map.check_canonicity(strict()).unwrap();
        assert_eq!(report.brackets.len(), 6);
        assert!(report.passed(), "{}: {:?}", m.name, report.first_failure());
        m.map.check_inverse(strict()).unwrap();
        let jl = jacobi_liouville_check(&m.map, &m.constraint, Sampling::new(200, 1e-7, 5)).unwrap();
        assert!(jl.passed, "{}: residual {}", m.name, jl.max_residual);
    }
}

#[test]
fn rescaled_map_breaks_liouville_identity() {
    let m = harmonic();
    let scaled = m.map.scaled(&Symbol::new("zeta"), Expr::int(2));
    scaled.check_inverse(strict()).unwrap();
    assert!(!scaled.check_canonicity(strict()).unwrap().passed());
    let jl = jacobi_liouville_check(&scaled, &m.constraint, Sampling::new(50, 1e-7, 5)).unwrap();
    assert!(!jl.passed);
}

#[test]
fn flipped_gauge_sign_is_rejected_with_named_bracket() {
    let m = harmonic();
    let mut map = harmonic_map();
    map.forward.insert(Symbol::new("z"), -harmonic_phi2() / e("2*a1"));
    let el = eliminate_primary(&m.system, &m.constraint, &m.chart, strict()).unwrap();
    match apply_darboux(&el, &map, strict()) {
        Err(ReductionError::NotCanonical { bracket, expected, .. }) => {
            assert_eq!(bracket, "{z, p_z}");
            assert_eq!(expected, 1);
        }
        other => panic!("expected canonicity failure, got {other:?}"),
    }
}

#[test]
fn chart_through_singularity_is_a_chart_error() {
    let m = free_particle();
    let bad = m.chart.merged(&Chart::new().range("y", -1.0, 1.0));
    let r = eliminate_primary(&m.system, &m.constraint, &bad, strict());
    assert!(matches!(r, Err(ReductionError::Chart(_))), "{r:?}");
}

#[test]
fn wrong_solution_is_rejected() {
    let m = free_particle();
    let c = ConstraintSpec::new(m.constraint.phi.clone(), Symbol::new("p_x"), e("x*p_y/y"));
    let r = eliminate_primary(&m.system, &c, &m.chart, strict());
    assert!(matches!(r, Err(ReductionError::ConstraintNotSolved(_))));
}

/// Eliminating then mapping agrees with pulling `½ ξ ω dξ` straight back
/// through the full inverse at `p_z = 0`: the curls coincide.
#[test]
fn elimination_commutes_with_direct_pullback() {
    for m in [free_particle(), harmonic()] {
        let r = m.reduce(strict()).unwrap();
        let inv = m.map.restricted_inverse();
        let ps = &m.system.phase_space;
        let half = Expr::ratio(1, 2);
        let coords = m.map.reduced_coords();
        let mut direct = vec![Expr::zero(); coords.len()];
        for (q, p) in ps.coordinates().iter().zip(ps.momenta()) {
            let (qe, pe) = (inv[q].clone(), inv[p].clone());
            for (a, y) in direct.iter_mut().zip(&coords) {
                *a = &*a + &half * (&pe * qe.diff(y) - &qe * pe.diff(y));
            }
        }
        let direct = PresymplecticForm::from_one_form(&coords, &direct);
        for i in 0..coords.len() {
            for j in 0..coords.len() {
                let cmp = compare_with(&r.darboux.form.entries[i][j], &direct.entries[i][j], &m.map.target_chart, strict())
                    .unwrap();
                assert!(cmp.equal, "{} [{i}][{j}] residual {}", m.name, cmp.max_residual);
            }
        }
        let h_direct = m.system.hamiltonian().substitute(&inv);
        assert!(compare_with(&r.darboux.hamiltonian, &h_direct, &m.map.target_chart, strict()).unwrap().equal);
    }
}
