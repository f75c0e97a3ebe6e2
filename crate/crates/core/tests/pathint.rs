use std::f64::consts::{FRAC_PI_4, PI};

use nalgebra::DMatrix;

use emergent::expr::Sampling;
use emergent::pathint::{
    bridge_variance_study, classical_amplitude, classical_flow, deterministic_increment_study, hbar_scaling_report,
    propagate_quantum, propagate_standard, trotter_convergence, AmplitudeSource, LatticeConfig, Mode, PathError,
    PropagatorResult, Quadratic, StandardForm,
};
use emergent::reduction::builtin::{free_particle, harmonic};
use emergent::reduction::ReducedSystem;
use emergent::Symbol;

fn reduced_free() -> ReducedSystem {
    free_particle().reduce(Sampling::new(50, 1e-9, 1)).unwrap().reduced
}

fn reduced_harmonic() -> ReducedSystem {
    harmonic().reduce(Sampling::new(50, 1e-9, 1)).unwrap().reduced
}

fn bind(a1: f64) -> Vec<(Symbol, f64)> {
    vec![(Symbol::new("a1"), a1), (Symbol::new("alpha"), 3.0)]
}

/// `det tridiag(2 − ε²ω², −1)` of size `n − 1`, times `ε`.
fn dense_second_variation(omega: f64, t: f64, n: usize) -> f64 {
    let eps = t / n as f64;
    let m = DMatrix::from_fn(n - 1, n - 1, |i, j| match i.abs_diff(j) {
        0 => 2.0 - eps * eps * omega * omega,
        1 => -1.0,
        _ => 0.0,
    });
    m.determinant() * eps
}

#[test]
fn jacobi_field_matches_sine_and_dense_oracle() {
    let ho = Quadratic { cp: 0.5, cq: 0.5 };
    assert!((ho.fluctuation_det(1.0, 2000) - 1f64.sin()).abs() < 1e-8);
    assert!((Quadratic { cp: 0.5, cq: 0.0 }.fluctuation_det(2.0, 50) - 2.0).abs() < 1e-12);
    for t in [0.5, 1.0, 2.5] {
        let d = ho.fluctuation_det(t, 2000);
        let dense = dense_second_variation(1.0, t, 64);
        assert!((d - dense).abs() / d.abs() < 0.01, "T = {t}: {d} vs {dense}");
    }
}

#[test]
fn oscillator_focal_point() {
    let r = classical_amplitude(AmplitudeSource::Quadratic(Quadratic { cp: 0.5, cq: 0.5 }), &[0.0], &[0.0], PI, 2000);
    assert!(matches!(r, Err(PathError::Focal { .. })), "{r:?}");
}

#[test]
fn hooft_amplitude_support() {
    let m = free_particle();
    let params = [(Symbol::new("a1"), 0.5)];
    let src = AmplitudeSource::Hooft { sys: &m.system, params: &params };
    let q1 = [0.8, 0.3];
    let flow = classical_flow(&m.system, &params, &[0.0, 0.0, q1[0], q1[1]], 1.1, 200).unwrap();
    let q2 = flow.final_coordinates();
    let w = classical_amplitude(src, &q1, &q2, 1.1, 200).unwrap();
    // A rotation preserves area: det M = 1.
    assert!(w > 0.0 && (w - 1.0).abs() < 1e-6, "{w}");
    let off = [q2[0] + 0.5, q2[1]];
    assert_eq!(classical_amplitude(src, &q1, &off, 1.1, 200).unwrap(), 0.0);
}

#[test]
fn free_particle_kernel() {
    let cfg = LatticeConfig { points: 1024, length: 64.0, slices: 256, mode: Mode::RealTime { t: 1.0 }, ..Default::default() };
    let res = propagate_quantum::<f64>(&reduced_free(), &bind(0.5), &cfg).unwrap();
    let PropagatorResult::Kernel(k) = res else { panic!("expected a kernel") };
    // |x| <= L/4 inclusive: the whole central half.
    assert_eq!(k.metrics.resolved_points, 513);
    assert!(k.metrics.max_rel_error < 1e-4, "{:?}", k.metrics);
    assert!(k.metrics.norm_drift < 1e-10, "{:?}", k.metrics);
    // Independent closed form.
    for j in [400, 512, 600] {
        let x: f64 = k.grid[j];
        let re = (2.0 * PI).powf(-0.5) * (0.5 * x * x - FRAC_PI_4).cos();
        assert!((k.amplitudes[j].re - re).abs() < 1e-4);
    }
}

#[test]
fn free_kernel_error_does_not_depend_on_slices() {
    let form = StandardForm::from_coefficients(0.5, 0.0, 1.0, 1.0).unwrap();
    let errs: Vec<f64> = [4, 64, 256]
        .iter()
        .map(|&s| {
            let cfg = LatticeConfig { slices: s, ..Default::default() };
            propagate_standard::<f64>(&form, &cfg).unwrap().error()
        })
        .collect();
    assert!(errs.iter().all(|e| *e < 1e-9), "{errs:?}");
}

#[test]
fn oscillator_partition_function() {
    let cfg = LatticeConfig {
        points: 256,
        length: 20.0,
        slices: 512,
        mode: Mode::ImaginaryTime { beta: 1.0 },
        ..Default::default()
    };
    let res = propagate_quantum::<f64>(&reduced_harmonic(), &bind(1.0), &cfg).unwrap();
    let PropagatorResult::Partition(p) = res else { panic!("expected Z") };
    let closed = 1.0 / (2.0 * 0.5f64.sinh());
    assert!((closed - 0.959517).abs() < 1e-6);
    assert!((p.z - closed).abs() / closed < 1e-3, "{p:?}");
}

#[test]
fn oscillator_kernel_and_trotter_order() {
    let form = StandardForm::from_reduced(&reduced_harmonic(), &bind(1.0), 1.0, 1.0).unwrap();
    assert!((form.omega - 1.0).abs() < 1e-12);
    let t = FRAC_PI_4;
    let cfg = LatticeConfig { slices: 512, mode: Mode::RealTime { t }, ..Default::default() };
    let PropagatorResult::Kernel(k) = propagate_standard::<f64>(&form, &cfg).unwrap() else { panic!() };
    let j = 512;
    let mehler = (2.0 * PI * t.sin()).powf(-0.5);
    let got = k.amplitudes[j];
    // K(0,0;T) = (2πi sin T)^{-1/2}.
    let rel = ((got.re - mehler * FRAC_PI_4.cos()).powi(2) + (got.im + mehler * FRAC_PI_4.sin()).powi(2)).sqrt() / mehler;
    assert!(rel < 1e-3, "{rel}");
    assert!(k.metrics.norm_drift < 1e-10);

    let report = trotter_convergence(&form, &cfg, &[32, 64, 128, 256, 512]).unwrap();
    assert!((report.slope + 2.0).abs() < 0.2, "{report:?}");
}

#[test]
fn oscillator_caustic_is_rejected() {
    let form = StandardForm::from_coefficients(0.5, 0.5, 1.0, 1.0).unwrap();
    let cfg = LatticeConfig { mode: Mode::RealTime { t: PI }, ..Default::default() };
    assert!(matches!(propagate_standard::<f64>(&form, &cfg), Err(PathError::Coverage(_))));
}

#[test]
fn tolerance_is_enforced() {
    let form = StandardForm::from_coefficients(0.5, 0.5, 1.0, 1.0).unwrap();
    let cfg = LatticeConfig { slices: 4, mode: Mode::RealTime { t: FRAC_PI_4 }, tolerance: Some(1e-8), ..Default::default() };
    assert!(matches!(propagate_standard::<f64>(&form, &cfg), Err(PathError::Trotter { slices: 4, .. })));
}

#[test]
fn hbar_rescaling_ratio() {
    for (model, a1_of) in [
        (reduced_free(), (|m: f64, h: f64| 1.0 / (2.0 * m * h)) as fn(f64, f64) -> f64),
        (reduced_harmonic(), |m, h| 1.0 / (m * h)),
    ] {
        for (m, h) in [(1.0, 1.0), (1.0, 0.5), (3.0, 2.0)] {
            let cfg = LatticeConfig { mass: m, hbar: h, slices: 40, ..Default::default() };
            let r = hbar_scaling_report(&model, &bind(a1_of(m, h)), &cfg, 11).unwrap();
            assert!((r.ratio - 1.0 / h).abs() < 1e-12, "{r:?}");
        }
    }
}

#[test]
fn free_particle_binding_matches_the_direct_rescaling() {
    // a₁ = 1/(2mħ): p_ζ unchanged and ζ = X/ħ.
    let (m, h) = (3.0, 2.0);
    let f = StandardForm::from_reduced(&reduced_free(), &bind(1.0 / (2.0 * m * h)), m, h).unwrap();
    assert!((f.scale_p - 1.0).abs() < 1e-12 && (f.scale_q - 1.0 / h).abs() < 1e-12);
}

#[test]
fn holder_indices() {
    let form = StandardForm::from_coefficients(0.5, 0.5, 1.0, 1.0).unwrap();
    let bridge = bridge_variance_study(&form, &[1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0], 512, 100_000, 5).unwrap();
    assert!(bridge.max_rel_error < 0.05, "{bridge:?}");
    assert!((bridge.holder_slope - 0.5).abs() < 0.05, "{bridge:?}");
    let det = deterministic_increment_study(&reduced_free(), &bind(0.5), (0.7, 0.2), 1.0, &[16, 32, 64, 128]).unwrap();
    assert!((det.holder_slope - 1.0).abs() < 1e-6, "{det:?}");
}
