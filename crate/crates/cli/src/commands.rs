use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use emergent::anomaly::{
    anomaly_coefficients, constraint_surface_vanishing, sliced_expansion_check, AnomalyCoeffs, GeneratingFunction,
    Origin,
};
use emergent::expr::{vanishes, Sampling};
use emergent::pathint::{
    classical_amplitude, propagate_quantum, AmplitudeSource, Mode, PathError, PropagatorResult, Quadratic,
};
use emergent::reduction::{jacobi_liouville_check, Reduction};
use emergent::symplectic::{gauge_pair_check, split_hamiltonian, verify_charges};
use emergent::Expr;

use crate::report::RunReport;
use crate::sysfile::{Amplitude, SystemFile, UsageError};

pub struct Options {
    pub seed: u64,
    pub out: Option<PathBuf>,
}

fn sampling(f: &SystemFile, o: &Options) -> Sampling {
    Sampling::new(f.checks.points, f.checks.tol, o.seed)
}

fn new_report(cmd: &str, f: &SystemFile, o: &Options) -> RunReport {
    let mut r = RunReport::new(cmd, &f.path.display().to_string(), &f.name, o.seed);
    r.set("sampling", serde_json::json!({"points": f.checks.points, "tol": f.checks.tol, "liouville_tol": f.checks.liouville_tol}));
    r
}

pub fn verify(f: &SystemFile, o: &Options) -> Result<RunReport> {
    let s = sampling(f, o);
    let mut r = new_report("verify", f, o);
    let sys = &f.system;

    for c in verify_charges(sys, &f.chart, s)? {
        r.check(format!("charge {}", c.name), c.passed, format!("{{{}, H}} = {}", c.name, c.bracket), Some(c.max_residual));
    }

    match split_hamiltonian(sys, &f.chart, s) {
        Ok(split) => {
            let d = split.difference_check(&sys.hamiltonian(), &f.chart, s)?;
            r.check("split H+ - H- = H", d.equal, "H+ - H- against H", Some(d.max_residual));
            let c = split.commute_check(&sys.phase_space, &f.chart, s)?;
            r.check("split {H+, H-} = 0", c.equal, "bracket of the halves", Some(c.max_residual));
            let on = split
                .h_minus
                .subs(&f.constraint.eliminated, &f.constraint.solution)
                .substitute(&f.surface);
            let v = vanishes(&on, &f.chart, s)?;
            r.check("H- on the constraint surface", v.equal, "H- with phi = 0 imposed", Some(v.max_residual));
        }
        Err(e) => r.check("split", false, e.to_string(), None),
    }

    let phi_res = vanishes(&f.constraint.phi.subs(&f.constraint.eliminated, &f.constraint.solution), &f.chart, s)?;
    r.check(
        "constraint solution",
        phi_res.equal,
        format!("phi vanishes at {} = {}", f.constraint.eliminated, f.constraint.solution),
        Some(phi_res.max_residual),
    );

    if let Some(chi) = &f.constraint.chi {
        let b = gauge_pair_check(&f.constraint.phi, chi, &sys.phase_space);
        let mut min = f64::INFINITY;
        for p in f.chart.sample_seeded(o.seed, f.checks.points)? {
            let v: f64 = b.evaluate(&p)?;
            min = min.min(v.abs());
        }
        r.check("gauge pair {phi, chi} != 0", min > 1e-9, format!("{{phi, chi}} = {b}; min |.| = {min:.3e}"), None);
    }

    if let Some(map) = &f.map {
        let report = map.check_canonicity(s)?;
        for b in &report.brackets {
            r.check(
                format!("bracket {}", b.label()),
                b.passed,
                format!("expected {}", b.expected),
                Some(b.max_residual),
            );
        }
        match map.check_inverse(s) {
            Ok(()) => r.check("inverse map", true, "forward and inverse compose to the identity", None),
            Err(e) => r.check("inverse map", false, e.to_string(), None),
        }
        let jl = jacobi_liouville_check(map, &f.constraint, Sampling::new(f.checks.points, f.checks.liouville_tol, o.seed))?;
        r.check(
            "Jacobi-Liouville identity",
            jl.passed,
            format!("{} points, {} skipped", jl.points, jl.skipped),
            Some(jl.max_residual),
        );
    } else {
        r.provenance.push("no [darboux] section: map checks skipped".into());
    }
    Ok(r)
}

fn run_reduction(f: &SystemFile, o: &Options) -> Result<Reduction> {
    let model = f.model()?;
    Ok(model.reduce(sampling(f, o))?)
}

pub fn reduce(f: &SystemFile, o: &Options) -> Result<RunReport> {
    let mut r = new_report("reduce", f, o);
    let red = run_reduction(f, o)?;
    r.set("L_R", red.elimination.lagrangian().to_string());
    r.set("L_R_darboux", red.darboux.lagrangian().to_string());
    r.set("gauge", red.z_elimination.chi.to_string());
    r.set("H_star", red.reduced.h_star.to_string());
    r.provenance = red.reduced.provenance.clone();
    if !f.params.is_empty() {
        let (cp, cq) = red.reduced.quadratic_coefficients(&f.params)?;
        r.set("quadratic_coefficients", serde_json::json!({"p^2": cp, "q^2": cq}));
    }
    r.check("reduction", true, "constraint, Darboux map and z-elimination succeeded", None);
    Ok(r)
}

fn default_out(f: &SystemFile) -> PathBuf {
    let stem = f.path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    PathBuf::from(format!("{stem}.csv"))
}

pub fn propagate(f: &SystemFile, o: &Options) -> Result<RunReport> {
    let spec = f.lattice.as_ref().ok_or_else(|| f.missing("lattice"))?;
    let mut r = new_report("propagate", f, o);
    let red = run_reduction(f, o)?;
    r.set("H_star", red.reduced.h_star.to_string());
    r.set("lattice", &spec.config);
    r.set("mass", f.mass);
    r.set("hbar", f.hbar);
    match spec.amplitude {
        Amplitude::Classical { q1, q2, steps } => {
            let Mode::RealTime { t } = spec.config.mode else {
                return Err(UsageError("classical amplitude needs `mode = real`".into()).into());
            };
            let (cp, cq) = red.reduced.quadratic_coefficients(&f.params)?;
            let quad = Quadratic { cp, cq };
            match classical_amplitude(AmplitudeSource::Quadratic(quad), &[q1], &[q2], t, steps) {
                Ok(w) => {
                    r.set("classical_amplitude", w);
                    r.check("fluctuation determinant", true, format!("det M = {:.6e}", quad.fluctuation_det(t, steps)), None);
                }
                Err(PathError::Focal { t, det }) => {
                    r.check("fluctuation determinant", false, format!("focal point at T = {t}: det M = {det:.3e}"), None);
                }
                Err(e) => return Err(e.into()),
            }
        }
        Amplitude::Quantum => {
            let res = match propagate_quantum::<f64>(&red.reduced, &f.params, &spec.config) {
                Ok(res) => res,
                Err(PathError::Trotter { error, tol, slices }) => {
                    r.check("propagator error", false, format!("{error:.3e} exceeds {tol:.1e} at {slices} slices"), Some(error));
                    return Ok(r);
                }
                Err(e @ (PathError::Coverage(_) | PathError::Config(_))) => {
                    return Err(UsageError(format!("lattice: {e}")).into());
                }
                Err(e) => return Err(e.into()),
            };
            let out = o.out.clone().unwrap_or_else(|| default_out(f));
            write_csv(&res, &out)?;
            r.set("csv", out.display().to_string());
            match &res {
                PropagatorResult::Kernel(k) => r.set("metrics", &k.metrics),
                PropagatorResult::Partition(p) => r.set("partition", p),
            }
            let tol = spec.config.tolerance;
            let err = res.error();
            let passed = tol.is_none_or(|t| err <= t);
            let bound = tol.map(|t| format!(" (tolerance {t:.1e})")).unwrap_or_default();
            r.check("propagator error", passed, format!("relative error {err:.3e}{bound}"), Some(err));
        }
    }
    Ok(r)
}

fn write_csv(res: &PropagatorResult<f64>, out: &Path) -> Result<()> {
    let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    res.write_csv(BufWriter::new(file)).with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}

fn reference_coeffs(refs: &std::collections::BTreeMap<String, Expr>) -> AnomalyCoeffs {
    let get = |k: &str| refs.get(k).cloned().unwrap_or_else(Expr::zero);
    AnomalyCoeffs {
        a_zeta: get("A_zeta"),
        a_z: get("A_z"),
        b_zeta: get("B_zeta"),
        b_z: get("B_z"),
        origin: Origin::Reference("file".into()),
    }
}

pub fn anomaly(f: &SystemFile, o: &Options) -> Result<RunReport> {
    let map = f.map.as_ref().ok_or_else(|| f.missing("darboux"))?;
    let spec = f.anomaly.as_ref().ok_or_else(|| f.missing("anomaly"))?;
    if spec.generating_function.is_none() && spec.reference.is_empty() && !spec.sliced {
        return Err(UsageError("[anomaly] names no generating function, reference or sliced check".into()).into());
    }
    let s = sampling(f, o);
    let mut r = new_report("anomaly", f, o);

    let derived = match &spec.generating_function {
        Some(fx) => {
            let mut chart = f.chart.clone();
            for (sym, lo, hi) in &spec.generating_chart {
                chart.set_range(sym.clone(), *lo, *hi);
            }
            let gf = GeneratingFunction { name: f.name.clone(), f: fx.clone(), chart };
            let c = gf.consistency(map, Sampling::new(f.checks.points, 1e-8, o.seed))?;
            r.check(
                "generating function relations",
                c.passed,
                format!("{} points; worst {}", c.points, c.worst.as_deref().unwrap_or("-")),
                Some(c.max_residual),
            );
            let coeffs = anomaly_coefficients(&gf, map, s)?;
            Some((gf, coeffs))
        }
        None => None,
    };

    let (coeffs, label) = if !spec.reference.is_empty() {
        (reference_coeffs(&spec.reference), "reference")
    } else if let Some((_, c)) = &derived {
        (c.clone(), "derived")
    } else {
        (reference_coeffs(&spec.reference), "none")
    };

    if label != "none" {
        let mut table = serde_json::Map::new();
        for (name, e) in coeffs.entries() {
            table.insert(name.into(), e.to_string().into());
        }
        r.set("coefficients", table);
        r.set("coefficient_origin", label);
        let surf = constraint_surface_vanishing(&coeffs, map, s)?;
        for e in &surf.entries {
            r.check(
                format!("{} on z = p_z = 0", e.name),
                e.vanishes_on_surface,
                format!("off-surface max |{}| = {:.3e}", e.name, e.off_surface),
                Some(e.on_surface),
            );
        }
        let nonzero: Vec<&str> = surf.entries.iter().filter(|e| e.off_surface > f.checks.tol).map(|e| e.name.as_str()).collect();
        r.set(
            "summary",
            if nonzero.is_empty() {
                "all coefficients vanish".to_string()
            } else {
                format!("{} nonzero off-surface, zero on-surface", nonzero.join(", "))
            },
        );
        r.set("surface", &surf);
    }

    if let (Some((gf, c)), "reference") = (&derived, label) {
        // Compare at source points mapped forward, where the generating function is regular.
        let mut diffs = serde_json::Map::new();
        let points = gf.chart.sample_seeded(o.seed, f.checks.points.min(50))?;
        for ((name, d), (_, refc)) in c.entries().into_iter().zip(coeffs.entries()) {
            let mut worst = 0.0f64;
            for p in &points {
                let mut at = p.clone();
                for (k, fw) in &map.forward {
                    at.insert(k.clone(), fw.evaluate(p)?);
                }
                let (a, b): (f64, f64) = (d.evaluate(&at)?, refc.evaluate(&at)?);
                worst = worst.max((a - b).abs());
            }
            diffs.insert(name.into(), worst.into());
        }
        r.provenance.push("max |derived - reference| per coefficient is informational; it does not affect the verdict".into());
        r.set("derived_vs_reference_max_abs_diff", diffs);
    }

    if spec.sliced {
        let rep = sliced_expansion_check(map, None, Sampling::new(100, 1e-8, o.seed))?;
        r.check(
            "sliced expansion coefficients",
            rep.passed,
            "constant, d_p_zeta and d_zeta terms",
            Some(rep.constant_residual.max(rep.d_p_zeta_residual).max(rep.d_zeta_residual)),
        );
        let slope = rep.scaling.slope;
        r.check("correction scaling", (slope - 1.5).abs() < 0.05, format!("log-log slope {slope:.4} (one-sided {:.4})", rep.scaling.one_sided_slope), None);
        r.set("sliced", &rep);
    }
    Ok(r)
}
