use std::collections::BTreeMap;

use serde::Serialize;

use super::AnomalyError;
use crate::expr::{compare_with, Chart, Expr, Sampling, Symbol};
use crate::numeric::log_log_slope;
use crate::reduction::CanonicalMap;

fn e(src: &str) -> Expr {
    src.parse().expect("built-in formula parses")
}

/// Symbol standing for the slice increment of `s`.
pub fn increment(s: &Symbol) -> Symbol {
    Symbol::new(&format!("d_{s}"))
}

/// Leading-order increments of the old momenta, `Δp_b = Σ_v ∂p_b/∂v Δv`,
/// taken from the inverse map at the slice point.
pub fn taylor_increments(map: &CanonicalMap) -> BTreeMap<Symbol, Expr> {
    let vars = map.target.xi();
    map.source
        .momenta()
        .iter()
        .map(|p| {
            let g = &map.inverse[p];
            let d = vars
                .iter()
                .fold(Expr::zero(), |acc, v| acc + g.diff(v) * Expr::symbol(&increment(v)));
            (increment(p), d)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    pub eps: Vec<f64>,
    /// `ε·|odd part of H in δ = √ε|`.
    pub correction: Vec<f64>,
    pub slope: f64,
    /// Same fit with `ε·|H(δ) − H(0)|`.
    pub one_sided_slope: f64,
    /// Parameter point of the fit.
    pub at: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SlicedReport {
    pub points: usize,
    pub constant_residual: f64,
    pub d_p_zeta_residual: f64,
    pub d_zeta_residual: f64,
    pub passed: bool,
    pub scaling: ScalingReport,
}

/// Sliced `x p_y − y p_x` of the oscillator map on `z = Δz = p_z = Δp_z = 0`,
/// with `p_x, p_y` eliminated through the symmetrised `p^z, p^ζ` relations.
///
/// Returns `H` as a function of `(a1, alpha, zeta, p_zeta, Δζ, Δp_ζ)`.
fn sliced_rotation(map: &CanonicalMap) -> Result<Expr, AnomalyError> {
    let want = ["p_x", "p_y", "x", "y"];
    let xi = map.source.xi();
    let names: Vec<&str> = xi.iter().map(|s| s.as_str()).collect();
    if !want.iter().all(|w| names.contains(w)) {
        return Err(AnomalyError::Generator(format!("sliced expansion needs planar (x, y) variables, got {names:?}")));
    }
    let inc = taylor_increments(map);
    let dpx = inc[&increment(&Symbol::new("p_x"))].clone();
    let dpy = inc[&increment(&Symbol::new("p_y"))].clone();

    let d = e("1 - a1^2*alpha^2");
    // Linear in (p_x, p_y): rows of p^z and p^ζ.
    let eq_pz = e("a1*(2*a1*alpha^2*p_x - 2*alpha*p_y + 4*a1*alpha*z + (1 + a1^2*alpha^2)*sqrt(2)*zeta)") / &d
        - e("a1*(4*a1*alpha*d_z + sqrt(2)*(1 + a1^2*alpha^2)*d_zeta)") / (2 * &d);
    let eq_pzeta = e("sqrt(2)*a1*(alpha*p_x - a1*alpha^2*p_y + (1 + a1^2*alpha^2)*z + sqrt(2)*a1*alpha*zeta)") / &d
        - e("a1*((1 + a1^2*alpha^2)*d_z + sqrt(2)*a1*alpha*d_zeta)") / (e("sqrt(2)") * &d);
    let (px, py) = (Symbol::new("p_x"), Symbol::new("p_y"));
    let zero = Expr::zero();
    let row = |eq: &Expr, lhs: &str| {
        let at0 = eq.subs(&px, &zero).subs(&py, &zero);
        (eq.diff(&px), eq.diff(&py), Expr::sym(lhs) - at0)
    };
    let (a11, a12, b1) = row(&eq_pz, "p_z");
    let (a21, a22, b2) = row(&eq_pzeta, "p_zeta");
    let det = &a11 * &a22 - &a12 * &a21;
    let sol_px = (&b1 * &a22 - &a12 * &b2) / &det;
    let sol_py = (&a11 * &b2 - &b1 * &a21) / &det;

    let x = e("alpha*(p_x + a1*(2*a1*alpha*z - alpha*p_y + sqrt(2)*zeta))") / &d
        + e("alpha*(a1*alpha*d_p_y - d_p_x)") / (2 * &d);
    let y = e("alpha*(p_y - a1*alpha*p_x - a1*(2*z + sqrt(2)*a1*alpha*zeta))") / &d
        + e("alpha*(a1*alpha*d_p_x - d_p_y)") / (2 * &d);
    let mut h = x * Expr::symbol(&py) - y * Expr::symbol(&px);
    h = h.subs(&increment(&px), &dpx).subs(&increment(&py), &dpy);
    h = h.subs(&px, &sol_px).subs(&py, &sol_py);
    for s in ["z", "d_z", "p_z", "d_p_z"] {
        h = h.subs(&Symbol::new(s), &zero);
    }
    Ok(h)
}

fn expansion_chart(map: &CanonicalMap) -> Chart {
    let mut chart = Chart::new();
    for (s, lo, hi) in map.target_chart.ranges() {
        if ["a1", "alpha", "zeta", "p_zeta"].contains(&s.as_str()) {
            chart.set_range(s.clone(), *lo, *hi);
        }
    }
    chart
}

/// Checks the first-order expansion of the sliced rotation generator against
/// its closed forms and measures how the correction scales with `ε`.
///
/// Increments are set to `√ε` so that the correction's share of the action,
/// `ε × correction`, should go like `ε^{3/2}`. The odd part in `δ = √ε` isolates
/// the first-order term.
pub fn sliced_expansion_check(map: &CanonicalMap, chart: Option<&Chart>, s: Sampling) -> Result<SlicedReport, AnomalyError> {
    let chart = chart.cloned().unwrap_or_else(|| expansion_chart(map));
    chart.check_guards(&e("1/(1 - a1^2*alpha^2)"))?;
    let h = sliced_rotation(map)?;
    let (dzeta, dpzeta) = (Symbol::new("d_zeta"), Symbol::new("d_p_zeta"));
    let zero = Expr::zero();
    let at0 = |x: &Expr| x.subs(&dzeta, &zero).subs(&dpzeta, &zero);
    let constant = at0(&h);
    let c_dp = at0(&h.diff(&dpzeta));
    let c_dz = at0(&h.diff(&dzeta));

    let want_const = e("p_zeta^2/(2*a1) + a1*zeta^2/2");
    let want_dp = e("-(alpha*p_zeta + zeta)/(4*a1*alpha)");
    let want_dz = e("a1*zeta/4 - (1 + 7*a1^2*alpha^2)/(4*a1*alpha*(a1^2*alpha^2 - 1))*p_zeta");
    let r0 = compare_with(&constant, &want_const, &chart, s)?;
    let r1 = compare_with(&c_dp, &want_dp, &chart, s)?;
    let r2 = compare_with(&c_dz, &want_dz, &chart, s)?;

    let at = chart
        .sample_seeded(s.seed, 1)?
        .pop()
        .ok_or_else(|| AnomalyError::Generator("empty chart sample".into()))?;
    let slots = [Symbol::new("a1"), Symbol::new("alpha"), Symbol::new("zeta"), Symbol::new("p_zeta"), dzeta, dpzeta];
    let hc = h.compile::<f64>(&slots)?;
    let base: Vec<f64> = slots[..4].iter().map(|k| at[k]).collect();
    let h_at = |d: f64| -> Result<f64, AnomalyError> {
        let mut v = base.clone();
        v.extend([d, d]);
        Ok(hc.eval(&v)?)
    };
    let h0 = h_at(0.0)?;
    let eps: Vec<f64> = (4..=10).map(|k| 2f64.powi(-k)).collect();
    let mut correction = Vec::new();
    let mut one_sided = Vec::new();
    for &ep in &eps {
        let d = ep.sqrt();
        let (hp, hm) = (h_at(d)?, h_at(-d)?);
        correction.push(ep * ((hp - hm) / 2.0).abs());
        one_sided.push(ep * (hp - h0).abs());
    }
    let scaling = ScalingReport {
        slope: log_log_slope(&eps, &correction),
        one_sided_slope: log_log_slope(&eps, &one_sided),
        eps,
        correction,
        at: at.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
    };
    Ok(SlicedReport {
        points: s.points,
        constant_residual: r0.max_residual,
        d_p_zeta_residual: r1.max_residual,
        d_zeta_residual: r2.max_residual,
        passed: r0.equal && r1.equal && r2.equal,
        scaling,
    })
}
