use serde::Serialize;

use super::AnomalyError;
use crate::expr::{vanishes, Chart, Expr, Point, Sampling, Symbol};
use crate::reduction::builtin::{free_particle_map, harmonic_map};
use crate::reduction::CanonicalMap;

fn e(src: &str) -> Expr {
    src.parse().expect("built-in formula parses")
}

/// Third-kind generating function `F(p_old, q_new)`:
/// `q_old = −∂F/∂p_old`, `p_new = −∂F/∂q_new`.
#[derive(Debug, Clone)]
pub struct GeneratingFunction {
    pub name: String,
    pub f: Expr,
    /// Source-variable chart on which `F` is regular.
    pub chart: Chart,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyReport {
    pub points: usize,
    pub max_residual: f64,
    pub worst: Option<String>,
    pub passed: bool,
}

impl GeneratingFunction {
    /// The four defining relations, as `(symbol, expression)`.
    pub fn relations(&self, map: &CanonicalMap) -> Vec<(Symbol, Expr)> {
        let old = map.source.coordinates().iter().zip(map.source.momenta());
        let new = map.target.momenta().iter().zip(map.target.coordinates());
        old.chain(new).map(|(lhs, v)| (lhs.clone(), -self.f.diff(v))).collect()
    }

    /// At sampled source points, maps forward and checks that every relation
    /// reproduces the value it defines.
    pub fn consistency(&self, map: &CanonicalMap, s: Sampling) -> Result<ConsistencyReport, AnomalyError> {
        let rels = self.relations(map);
        let mut report = ConsistencyReport { points: 0, max_residual: 0.0, worst: None, passed: true };
        for mut p in self.chart.sample_seeded(s.seed, s.points)? {
            let mut targets = Vec::new();
            for (y, f) in &map.forward {
                targets.push((y.clone(), f.evaluate(&p)?));
            }
            p.extend(targets);
            for (sym, rel) in &rels {
                let want = p[sym];
                let got = rel.evaluate(&p)?;
                let r = (got - want).abs() / (1.0 + want.abs());
                if !(r <= report.max_residual) {
                    report.max_residual = r;
                    report.worst = Some(sym.to_string());
                }
            }
            report.points += 1;
        }
        report.passed = report.max_residual <= s.tol;
        Ok(report)
    }
}

/// Closed-form `F` of the linear oscillator map.
pub fn harmonic_generating_function() -> GeneratingFunction {
    let f = e("(p_x^2*alpha + p_y^2*alpha + 2*a1*p_x*alpha*(2*a1*z*alpha - p_y*alpha + sqrt(2)*zeta) \
               - 2*a1*p_y*alpha*(2*z + sqrt(2)*a1*alpha*zeta) \
               + 2*a1*(sqrt(2)*z*zeta + sqrt(2)*a1^2*z*alpha^2*zeta + a1*alpha*(2*z^2 + zeta^2))) \
               / (2*(a1^2*alpha^2 - 1))");
    GeneratingFunction { name: "harmonic oscillator".into(), f, chart: harmonic_map().source_chart }
}

/// `F = −(ζ − p_x sin z + p_y cos z)²/(4a₁z)`, derived for the free-particle map.
///
/// Regular only away from `z = 0`, i.e. `x ≠ 0`.
pub fn free_particle_generating_function() -> GeneratingFunction {
    let chart = free_particle_map().source_chart.merged(&Chart::new().range("x", 0.2, 3.0));
    GeneratingFunction {
        name: "free particle (derived)".into(),
        f: e("-((zeta - p_x*sin(z) + p_y*cos(z))^2)/(4*a1*z)"),
        chart,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Origin {
    /// Assembled from a generating function.
    Derived(String),
    /// Shipped closed form.
    Reference(String),
}

/// Coefficients of `Δζ, Δz, Δp_ζ, Δp_z` in one factor of the inverse Jacobian,
/// as expressions in the new variables.
#[derive(Debug, Clone)]
pub struct AnomalyCoeffs {
    pub a_zeta: Expr,
    pub a_z: Expr,
    pub b_zeta: Expr,
    pub b_z: Expr,
    pub origin: Origin,
}

impl AnomalyCoeffs {
    pub fn entries(&self) -> [(&'static str, &Expr); 4] {
        [("A_zeta", &self.a_zeta), ("A_z", &self.a_z), ("B_zeta", &self.b_zeta), ("B_z", &self.b_z)]
    }

    pub fn all_vanish(&self, chart: &Chart, s: Sampling) -> Result<bool, AnomalyError> {
        for (_, c) in self.entries() {
            if !vanishes(c, chart, s)?.equal {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// The printed free-particle result: only `A_z` survives.
pub fn free_particle_reference() -> AnomalyCoeffs {
    AnomalyCoeffs {
        a_zeta: Expr::zero(),
        a_z: e("-((1 + 2*a1*z*p_zeta)*cos(z) + (p_z/p_zeta - a1*p_zeta)*sin(z))*sin(z)/2"),
        b_zeta: Expr::zero(),
        b_z: Expr::zero(),
        origin: Origin::Reference("free particle, printed closed form".into()),
    }
}

/// Leading-order inverse-Jacobian coefficients.
///
/// With old momenta `p_b`, old coordinates `q_c`, new coordinates `Y = (ζ, z)`
/// and `v` the variable the coefficient multiplies:
///
/// `A_v = ½ F_{p_b p_c Y} ∂p_b/∂v ∂Y/∂p_c + ½ F_{p_b Y_c v} ∂Y_b/∂q_c`,
/// `B_v = ½ F_{p_b p_c Y} ∂p_b/∂v ∂Y/∂q_c`.
///
/// `∂p_b/∂v` comes from the inverse map, `∂Y/∂p_c` and `∂Y/∂q_c` from the
/// forward map; everything is then expressed in the new variables.
pub fn anomaly_coefficients(
    gf: &GeneratingFunction,
    map: &CanonicalMap,
    s: Sampling,
) -> Result<AnomalyCoeffs, AnomalyError> {
    map.check_inverse(s)?;
    let pb = map.source.momenta();
    let qc = map.source.coordinates();
    let ys = map.target.coordinates();
    let new_p = map.target.momenta();
    if pb.len() != ys.len() {
        return Err(AnomalyError::Generator("old momenta and new coordinates differ in number".into()));
    }
    let inv = &map.inverse;
    let f3 = |a: &Symbol, b: &Symbol, c: &Symbol| gf.f.diff(a).diff(b).diff(c).substitute(inv);
    let fwd = |y: &Symbol, v: &Symbol| map.forward[y].diff(v).substitute(inv);
    let dinv = |p: &Symbol, v: &Symbol| inv[p].diff(v);
    let half = Expr::ratio(1, 2);

    let a_coeff = |v: &Symbol| -> Expr {
        let mut acc = Expr::zero();
        for b in pb {
            let dp = dinv(b, v);
            if dp.is_zero() {
                continue;
            }
            for c in pb {
                for y in ys {
                    acc = acc + &half * f3(b, c, y) * &dp * fwd(y, c);
                }
            }
        }
        for (bi, b) in pb.iter().enumerate() {
            for (ci, q) in qc.iter().enumerate() {
                acc = acc + &half * f3(b, &ys[ci], v) * fwd(&ys[bi], q);
            }
        }
        acc
    };
    let b_coeff = |v: &Symbol| -> Expr {
        let mut acc = Expr::zero();
        for b in pb {
            let dp = dinv(b, v);
            if dp.is_zero() {
                continue;
            }
            for (c, q) in pb.iter().zip(qc) {
                for y in ys {
                    acc = acc + &half * f3(b, c, y) * &dp * fwd(y, q);
                }
            }
        }
        acc
    };
    Ok(AnomalyCoeffs {
        a_zeta: a_coeff(&ys[0]),
        a_z: a_coeff(&ys[1]),
        b_zeta: b_coeff(&new_p[0]),
        b_z: b_coeff(&new_p[1]),
        origin: Origin::Derived(gf.name.clone()),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SurfaceEntry {
    pub name: String,
    /// Largest `|coeff|` with `z = p_z = 0`.
    pub on_surface: f64,
    pub vanishes_on_surface: bool,
    /// Largest `|coeff|` over the full chart.
    pub off_surface: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SurfaceReport {
    pub entries: Vec<SurfaceEntry>,
    pub all_vanish: bool,
}

/// Evaluates each coefficient on `z = p_z = 0` and off it, over the map's target chart.
pub fn constraint_surface_vanishing(
    coeffs: &AnomalyCoeffs,
    map: &CanonicalMap,
    s: Sampling,
) -> Result<SurfaceReport, AnomalyError> {
    let chart = &map.target_chart;
    let (z, pz) = (map.z(), map.p_z());
    let mut entries = Vec::new();
    for (name, c) in coeffs.entries() {
        let on = c.subs(z, &Expr::zero()).subs(pz, &Expr::zero());
        let cmp = vanishes(&on, chart, s)?;
        let mut off = 0.0f64;
        if !c.is_zero() {
            chart.check_guards(c)?;
            for p in chart.sample_seeded(s.seed, s.points)? {
                off = off.max(c.evaluate(&p)?.abs());
            }
        }
        entries.push(SurfaceEntry {
            name: name.into(),
            on_surface: cmp.max_residual,
            vanishes_on_surface: cmp.equal,
            off_surface: off,
        });
    }
    let all_vanish = entries.iter().all(|e| e.vanishes_on_surface);
    Ok(SurfaceReport { entries, all_vanish })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExponentiationReport {
    pub slices: usize,
    pub product: f64,
    pub exponential: f64,
    /// `|∏(1 + t_j) / exp(Σ t_j) − 1|`.
    pub deviation: f64,
    pub max_term: f64,
}

/// `(∏(1 + t_j), exp(Σ t_j), relative deviation)`.
pub fn exponentiation_deviation(terms: &[f64]) -> (f64, f64, f64) {
    let log_prod: f64 = terms.iter().map(|t| t.ln_1p()).sum();
    let sum: f64 = terms.iter().sum();
    (log_prod.exp(), sum.exp(), (log_prod - sum).exp_m1().abs())
}

/// Per-slice terms `A_ζ Δζ + A_z Δz + B_ζ Δp_ζ + B_z Δp_z` along a discrete path
/// (points carry the new variables and parameters), then both forms of `J⁻¹`.
pub fn jacobian_exponentiation_check(
    coeffs: &AnomalyCoeffs,
    map: &CanonicalMap,
    path: &[Point],
) -> Result<ExponentiationReport, AnomalyError> {
    let ys = map.target.coordinates();
    let ps = map.target.momenta();
    let vars = [&ys[0], &ys[1], &ps[0], &ps[1]];
    let cs = [&coeffs.a_zeta, &coeffs.a_z, &coeffs.b_zeta, &coeffs.b_z];
    let mut terms = Vec::with_capacity(path.len().saturating_sub(1));
    for w in path.windows(2) {
        let mut t = 0.0;
        for (c, v) in cs.iter().zip(vars) {
            if c.is_zero() {
                continue;
            }
            t += c.evaluate(&w[0])? * (w[1][v] - w[0][v]);
        }
        terms.push(t);
    }
    let (product, exponential, deviation) = exponentiation_deviation(&terms);
    Ok(ExponentiationReport {
        slices: terms.len(),
        product,
        exponential,
        deviation,
        max_term: terms.iter().fold(0.0f64, |m, t| m.max(t.abs())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponentiation_of_zero_terms() {
        assert_eq!(exponentiation_deviation(&[0.0; 10]), (1.0, 1.0, 0.0));
    }

    #[test]
    fn deviation_is_second_order() {
        let d = |h: f64| exponentiation_deviation(&[h; 50]).2;
        let ratio = d(1e-3) / d(5e-4);
        assert!((ratio - 4.0).abs() < 0.01, "{ratio}");
    }

    #[test]
    fn harmonic_relations_are_linear() {
        let gf = harmonic_generating_function();
        for (_, r) in gf.relations(&harmonic_map()) {
            for v in ["p_x", "p_y", "zeta", "z"] {
                let s = Symbol::new(v);
                assert!(r.diff(&s).diff(&s).is_zero());
            }
        }
    }
}
