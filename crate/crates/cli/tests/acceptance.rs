//! Acceptance run: one line per criterion, non-zero exit if any fails.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_4, PI};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use emergent::anomaly::{
    anomaly_coefficients, free_particle_generating_function, free_particle_reference,
    harmonic_generating_function, sliced_expansion_check, GeneratingFunction,
};
use emergent::expr::{numeric_equal, vanishes, Sampling};
use emergent::pathint::{
    bridge_variance_study, classical_amplitude, deterministic_increment_study, propagate_quantum, propagate_standard,
    trotter_convergence, AmplitudeSource, LatticeConfig, Mode, PathError, PropagatorResult, Quadratic, StandardForm,
};
use emergent::reduction::builtin::{free_particle, harmonic, lambda_variant};
use emergent::reduction::jacobi_liouville_check;
use emergent::symplectic::{split_hamiltonian, verify_charges};
use emergent::{Chart, Expr, Symbol};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn e(s: &str) -> Expr {
    s.parse().unwrap()
}

fn err<E: std::fmt::Debug>(x: E) -> String {
    format!("{x:?}")
}

fn bind(a1: f64) -> Vec<(Symbol, f64)> {
    vec![(Symbol::new("a1"), a1), (Symbol::new("alpha"), 3.0)]
}

fn charges() -> Outcome {
    let m = free_particle();
    let checks = verify_charges(&m.system, &m.chart, Sampling::new(100, 1e-12, 1)).map_err(err)?;
    ensure!(checks.len() == 2, "expected two charges, got {}", checks.len());
    let worst = checks.iter().map(|c| c.max_residual).fold(0.0, f64::max);
    ensure!(checks.iter().all(|c| c.passed), "residual {worst:.1e}");
    Ok(format!("{{C1,H}} = {{C2,H}} = 0, max residual {worst:.1e}"))
}

fn splitting() -> Outcome {
    let s = Sampling::new(100, 1e-9, 2);
    for m in [free_particle(), harmonic()] {
        let split = split_hamiltonian(&m.system, &m.chart, s).map_err(err)?;
        ensure!(split.difference_check(&m.system.hamiltonian(), &m.chart, s).map_err(err)?.equal, "{}: H+ - H- != H", m.name);
        ensure!(split.commute_check(&m.system.phase_space, &m.chart, s).map_err(err)?.equal, "{}: {{H+,H-}} != 0", m.name);
    }
    let m = free_particle();
    let split = split_hamiltonian(&m.system, &m.chart, s).map_err(err)?;
    let on = split.h_minus.subs(&m.constraint.eliminated, &m.constraint.solution);
    ensure!(vanishes(&on, &m.chart, s).map_err(err)?.equal, "free particle: H- != 0 on surface");
    let m = harmonic();
    let split = split_hamiltonian(&m.system, &m.chart, s).map_err(err)?;
    let surface: BTreeMap<Symbol, Expr> =
        [(Symbol::new("p_x"), e("x/alpha - a1*y")), (Symbol::new("p_y"), e("y/alpha + a1*x"))].into();
    ensure!(vanishes(&split.h_minus.substitute(&surface), &m.chart, s).map_err(err)?.equal, "oscillator: H- != 0 on surface");
    Ok("H+ - H- = H, {H+,H-} = 0, H- = 0 on surface (both systems)".into())
}

fn canonicity() -> Outcome {
    let mut worst = 0.0f64;
    for m in [free_particle(), harmonic()] {
        let r = m.map.check_canonicity(Sampling::new(200, 1e-9, 3)).map_err(err)?;
        ensure!(r.brackets.len() == 6, "{}: {} brackets checked", m.name, r.brackets.len());
        if let Some(f) = r.first_failure() {
            return Err(format!("{}: {} failed", m.name, f.label()));
        }
        let jl = jacobi_liouville_check(&m.map, &m.constraint, Sampling::new(200, 1e-7, 3)).map_err(err)?;
        ensure!(jl.passed, "{}: Jacobi-Liouville residual {:.1e}", m.name, jl.max_residual);
        worst = worst.max(jl.max_residual);
    }
    Ok(format!("6 brackets x 2 maps at 200 points; Jacobi-Liouville residual {worst:.1e}"))
}

fn reduction_outputs() -> Outcome {
    let s = Sampling::new(200, 1e-9, 4);
    let cases = [
        (free_particle(), "a1*p_zeta^2"),
        (harmonic(), "p_zeta^2/(2*a1) + a1/2*zeta^2"),
        (lambda_variant(), "(a1 + lambda)*p_zeta^2"),
    ];
    for (m, want) in cases {
        let r = m.reduce(s).map_err(err)?;
        let ok = numeric_equal(&r.reduced.h_star, &e(want), &m.map.target_chart, 200, 1e-10, 4).map_err(err)?;
        ensure!(ok, "{}: H* = {} expected {want}", m.name, r.reduced.h_star);
    }
    Ok("H* = a1 p^2, p^2/2a1 + a1 zeta^2/2, (a1 + lambda) p^2".into())
}

fn free_kernel() -> Outcome {
    let r = free_particle().reduce(Sampling::new(50, 1e-9, 5)).map_err(err)?.reduced;
    let cfg = LatticeConfig { points: 1024, length: 64.0, slices: 256, mode: Mode::RealTime { t: 1.0 }, ..Default::default() };
    let PropagatorResult::Kernel(k) = propagate_quantum::<f64>(&r, &bind(0.5), &cfg).map_err(err)? else {
        return Err("expected a kernel".into());
    };
    // Independent Gaussian closed form, m = hbar = T = 1.
    let mut worst = 0.0f64;
    for (x, a) in k.grid.iter().zip(&k.amplitudes) {
        if x.abs() <= 16.0 {
            let mag = (2.0 * PI).powf(-0.5);
            let ph = 0.5 * x * x - FRAC_PI_4;
            let d = ((a.re - mag * ph.cos()).powi(2) + (a.im - mag * ph.sin()).powi(2)).sqrt() / mag;
            worst = worst.max(d);
        }
    }
    ensure!(worst < 1e-4, "max rel err {worst:.2e}");
    Ok(format!("max rel err {worst:.2e} on the central half-grid"))
}

fn oscillator() -> Outcome {
    let r = harmonic().reduce(Sampling::new(50, 1e-9, 6)).map_err(err)?.reduced;
    let cfg = LatticeConfig { points: 256, length: 20.0, slices: 512, mode: Mode::ImaginaryTime { beta: 1.0 }, ..Default::default() };
    let PropagatorResult::Partition(p) = propagate_quantum::<f64>(&r, &bind(1.0), &cfg).map_err(err)? else {
        return Err("expected Z".into());
    };
    let closed = 1.0 / (2.0 * 0.5f64.sinh());
    ensure!((p.z - closed).abs() < 1e-3, "Z = {} vs {closed}", p.z);
    ensure!((p.z - 0.95923).abs() < 1e-3, "Z = {} vs quoted 0.95923", p.z);

    let form = StandardForm::from_reduced(&r, &bind(1.0), 1.0, 1.0).map_err(err)?;
    let cfg = LatticeConfig { slices: 512, mode: Mode::RealTime { t: FRAC_PI_4 }, ..Default::default() };
    let PropagatorResult::Kernel(k) = propagate_standard::<f64>(&form, &cfg).map_err(err)? else {
        return Err("expected a kernel".into());
    };
    let j = k.grid.iter().position(|x| *x == 0.0).ok_or("no x = 0 grid point")?;
    let mehler = (2.0 * PI * FRAC_PI_4.sin()).powf(-0.5);
    let got = k.amplitudes[j];
    let rel = ((got.re - mehler * FRAC_PI_4.cos()).powi(2) + (got.im + mehler * FRAC_PI_4.sin()).powi(2)).sqrt() / mehler;
    ensure!(rel < 1e-3, "K(0,0;pi/4) rel err {rel:.1e}");
    let t = trotter_convergence(&form, &cfg, &[32, 64, 128, 256, 512]).map_err(err)?;
    ensure!((t.slope + 2.0).abs() < 0.2, "Trotter slope {:.3}", t.slope);
    Ok(format!("Z = {:.6}, K(0,0;pi/4) rel err {rel:.1e}, Trotter slope {:.3}", p.z, t.slope))
}

/// `ε · det tridiag(2 − ε²ω², −1)` of size `n − 1`.
fn dense_second_variation(omega: f64, t: f64, n: usize) -> f64 {
    let eps = t / n as f64;
    let m = DMatrix::from_fn(n - 1, n - 1, |i, j| match i.abs_diff(j) {
        0 => 2.0 - eps * eps * omega * omega,
        1 => -1.0,
        _ => 0.0,
    });
    m.determinant() * eps
}

fn fluctuation() -> Outcome {
    let ho = Quadratic { cp: 0.5, cq: 0.5 };
    let mut worst_sin = 0.0f64;
    let mut worst_dense = 0.0f64;
    for t in [0.5, 1.0, 2.0, 2.5] {
        let d = ho.fluctuation_det(t, 2000);
        worst_sin = worst_sin.max((d - t.sin()).abs());
        worst_dense = worst_dense.max((d - dense_second_variation(1.0, t, 64)).abs() / d.abs());
    }
    ensure!(worst_sin < 1e-8, "|D - sin T| = {worst_sin:.1e}");
    ensure!(worst_dense < 0.01, "dense oracle rel diff {worst_dense:.1e}");
    let focal = classical_amplitude(AmplitudeSource::Quadratic(ho), &[0.0], &[0.0], PI, 2000);
    ensure!(matches!(focal, Err(PathError::Focal { .. })), "no focal error at T = pi: {focal:?}");
    Ok(format!("|D - sin T| {worst_sin:.1e}, dense 64-slice rel diff {worst_dense:.1e}, focal error at pi"))
}

fn anomaly_suite() -> Outcome {
    let s = |n, tol| Sampling::new(n, tol, 8);
    let ho = harmonic().map;
    let c = anomaly_coefficients(&harmonic_generating_function(), &ho, s(30, 1e-9)).map_err(err)?;
    ensure!(c.all_vanish(&ho.target_chart, s(50, 1e-10)).map_err(err)?, "oscillator coefficients nonzero");

    let vars = ["p_x", "p_y", "zeta", "z"];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for trial in 0..20 {
        let mut f = Expr::zero();
        for i in 0..4 {
            f = f + Expr::float(rng.random_range(-2.0..2.0)) * Expr::sym(vars[i]);
            for j in i..4 {
                f = f + Expr::float(rng.random_range(-2.0..2.0)) * Expr::sym(vars[i]) * Expr::sym(vars[j]);
            }
        }
        let gf = GeneratingFunction { name: format!("quadratic #{trial}"), f, chart: ho.source_chart.clone() };
        let c = anomaly_coefficients(&gf, &ho, s(10, 1e-9)).map_err(err)?;
        ensure!(c.all_vanish(&ho.target_chart, s(20, 1e-10)).map_err(err)?, "quadratic F #{trial} has an anomaly");
    }

    // Printed free-particle A_z against a hand-written closure.
    let az = free_particle_reference().a_z;
    let (z, p_zeta, p_z, a1) = (0.3, 1.0, 0.0, 0.5);
    let closure = -((1.0 + 2.0 * a1 * z * p_zeta) * f64::cos(z) + (p_z / p_zeta - a1 * p_zeta) * f64::sin(z)) * f64::sin(z) / 2.0;
    let at: BTreeMap<Symbol, f64> =
        [("z", z), ("p_zeta", p_zeta), ("p_z", p_z), ("a1", a1), ("zeta", 0.2)].iter().map(|(k, v)| (Symbol::new(k), *v)).collect();
    let got: f64 = az.evaluate(&at).map_err(err)?;
    ensure!((got - closure).abs() < 1e-14 && closure.abs() > 0.1, "A_z = {got} vs {closure}");
    let chart = Chart::new().range("p_zeta", 0.5, 3.0).range("p_z", -2.0, 2.0).range("a1", 0.2, 1.5);
    ensure!(vanishes(&az.subs(&Symbol::new("z"), &Expr::zero()), &chart, s(50, 1e-14)).map_err(err)?.equal, "A_z != 0 at z = 0");

    let sliced = sliced_expansion_check(&ho, None, s(100, 1e-8)).map_err(err)?;
    ensure!(sliced.passed, "sliced coefficients residual {:.1e}", sliced.d_p_zeta_residual.max(sliced.d_zeta_residual));
    ensure!((sliced.scaling.slope - 1.5).abs() < 0.05, "correction slope {:.3}", sliced.scaling.slope);

    // Informational: the coefficients derived from the reconstructed free-particle F.
    let fp = free_particle().map;
    let derived = anomaly_coefficients(&free_particle_generating_function(), &fp, s(20, 1e-9)).map_err(err)?;
    // F carries a 1/z pole, so compare away from z = 0.
    let off = fp.target_chart.merged(&Chart::new().range("z", 0.2, 1.3));
    let same = numeric_equal(&derived.a_z, &az, &off, 50, 1e-8, 8).map_err(err)?;
    Ok(format!(
        "HO + 20 quadratic F vanish, printed A_z checked, sliced slope {:.3}; A_z derived from the reconstructed free-particle F {} the printed form",
        sliced.scaling.slope,
        if same { "matches" } else { "does not match" },
    ))
}

fn holder() -> Outcome {
    let form = StandardForm::from_coefficients(0.5, 0.5, 1.0, 1.0).map_err(err)?;
    let b = bridge_variance_study(&form, &[1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0], 512, 100_000, 9).map_err(err)?;
    ensure!(b.max_rel_error < 0.05, "Var rel err {:.3}", b.max_rel_error);
    ensure!((b.holder_slope - 0.5).abs() < 0.05, "quantum slope {:.3}", b.holder_slope);
    let r = free_particle().reduce(Sampling::new(50, 1e-9, 9)).map_err(err)?.reduced;
    let d = deterministic_increment_study(&r, &bind(0.5), (0.7, 0.2), 1.0, &[16, 32, 64, 128]).map_err(err)?;
    ensure!((d.holder_slope - 1.0).abs() < 0.05, "deterministic slope {:.3}", d.holder_slope);
    Ok(format!("Var rel err {:.3}, slopes {:.3} and {:.3}", b.max_rel_error, b.holder_slope, d.holder_slope))
}

fn cli_contract() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let systems = Path::new(env!("CARGO_MANIFEST_DIR")).join("systems");
    let run = |args: &[&str], file: &Path| {
        Command::new(env!("CARGO_BIN_EXE_emergent")).current_dir(dir.path()).args(args).arg(file).output()
    };
    for f in ["free_particle.sys", "harmonic.sys"] {
        for cmd in ["verify", "reduce", "propagate", "anomaly"] {
            let out = run(&[cmd, "--seed", "1"], &systems.join(f)).map_err(err)?;
            ensure!(out.status.code() == Some(0), "{cmd} {f} exited {:?}", out.status.code());
        }
    }
    let text = std::fs::read_to_string(systems.join("harmonic.sys")).map_err(err)?;
    let broken = text.replace("z = (p_y - y/alpha - a1*x)/(2*a1)", "z = -(p_y - y/alpha - a1*x)/(2*a1)");
    ensure!(broken != text, "could not corrupt the map");
    let path = dir.path().join("corrupt.sys");
    std::fs::write(&path, broken).map_err(err)?;
    let out = run(&["verify", "--seed", "1"], &path).map_err(err)?;
    let stdout = String::from_utf8_lossy(&out.stdout);
    let named = stdout.lines().find(|l| l.starts_with("FAIL bracket")).unwrap_or_default().to_string();
    ensure!(out.status.code() == Some(1) && !named.is_empty(), "corrupted map exited {:?}", out.status.code());
    Ok(format!("8 runs exit 0; corrupted map exits 1 ({named})"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("charge conservation", charges),
        ("splitting identities", splitting),
        ("canonicity", canonicity),
        ("reduction outputs", reduction_outputs),
        ("free-particle kernel", free_kernel),
        ("emergent oscillator", oscillator),
        ("fluctuation determinant", fluctuation),
        ("anomaly suite", anomaly_suite),
        ("scaling indices", holder),
        ("CLI contract", cli_contract),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or("panic".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS {name} ({secs:.1} s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name} ({secs:.1} s): {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
