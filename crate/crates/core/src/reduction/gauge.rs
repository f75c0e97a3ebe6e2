use super::darboux::free_of;
use super::ReductionError;
use crate::expr::{vanishes, Chart, Expr, Sampling, Symbol};
use crate::symplectic::PhaseSpace;

#[derive(Debug, Clone, PartialEq)]
pub enum ZBranch {
    /// `H` does not depend on `z`; it is pure gauge and fixed by `χ = z`.
    PureGauge,
    /// `H` is quadratic in `z`; `∂H/∂z = 0` is solved for `z`.
    Solved(Expr),
}

#[derive(Debug, Clone)]
pub struct ZElimination {
    pub z: Symbol,
    pub branch: ZBranch,
    /// Gauge condition that removes `z`.
    pub chi: Expr,
    pub h_star: Expr,
}

/// Removes the non-dynamical `z` from `h`.
///
/// Only the pure-gauge case and `H` quadratic in `z` (with a nonvanishing
/// second derivative) are handled; anything else is `Unsupported`.
pub fn eliminate_z(h: &Expr, zs: &[Symbol], chart: &Chart, s: Sampling) -> Result<ZElimination, ReductionError> {
    let z = match zs {
        [z] => z.clone(),
        [] => return Err(ReductionError::Unsupported("no z variable to eliminate".into())),
        _ => return Err(ReductionError::Unsupported(format!("{} z variables", zs.len()))),
    };
    if free_of(h, &z, chart, s)? {
        return Ok(ZElimination {
            chi: Expr::symbol(&z),
            h_star: h.subs(&z, &Expr::zero()),
            branch: ZBranch::PureGauge,
            z,
        });
    }
    let hz = h.diff(&z);
    let hzz = hz.diff(&z);
    let hzzz = hzz.diff(&z);
    if !(hzzz.is_zero() || vanishes(&hzzz, chart, s)?.equal) {
        return Err(ReductionError::Unsupported(format!("H is not quadratic in {z}")));
    }
    let hzz = hzz.subs(&z, &Expr::zero());
    chart.check_guards(&hzz.recip())?;
    let solution = -hz.subs(&z, &Expr::zero()) / &hzz;
    let h_star = h.subs(&z, &solution);
    Ok(ZElimination { z, chi: hz, h_star, branch: ZBranch::Solved(solution) })
}

/// The physical quantum system: `H₊*(ζ, p_ζ)` on the reduced phase space.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub phase_space: PhaseSpace,
    pub h_star: Expr,
    pub parameters: Vec<Symbol>,
    /// One line per step of the reduction, in order.
    pub provenance: Vec<String>,
}

impl ReducedSystem {
    /// Most negative sampled value of `H₊*` (0 if none is negative).
    pub fn min_sampled(&self, chart: &Chart, s: Sampling) -> Result<f64, ReductionError> {
        let mut lowest = 0.0f64;
        for p in chart.sample_seeded(s.seed, s.points)? {
            lowest = lowest.min(self.h_star.evaluate(&p)?);
        }
        Ok(lowest)
    }

    pub fn is_nonnegative(&self, chart: &Chart, s: Sampling) -> Result<bool, ReductionError> {
        Ok(self.min_sampled(chart, s)? >= -s.tol)
    }

    /// `(c_p, c_q)` for `H₊* = c_p p² + c_q q²` in one degree of freedom, read
    /// off at a parameter binding. Cross and linear terms must vanish.
    pub fn quadratic_coefficients(&self, params: &[(Symbol, f64)]) -> Result<(f64, f64), ReductionError> {
        if self.phase_space.dof() != 1 {
            return Err(ReductionError::Unsupported("quadratic form needs one degree of freedom".into()));
        }
        let q = &self.phase_space.coordinates()[0];
        let p = &self.phase_space.momenta()[0];
        let mut env: Vec<(Symbol, f64)> = params.to_vec();
        env.push((q.clone(), 0.0));
        env.push((p.clone(), 0.0));
        let at = |e: &Expr| e.evaluate::<f64, _>(env.as_slice());
        let cp = 0.5 * at(&self.h_star.diff(p).diff(p))?;
        let cq = 0.5 * at(&self.h_star.diff(q).diff(q))?;
        let rest = [
            self.h_star.diff(p).diff(q),
            self.h_star.diff(p),
            self.h_star.diff(q),
            self.h_star.diff(p).diff(p).diff(p),
            self.h_star.diff(q).diff(q).diff(q),
        ];
        for e in &rest {
            if at(e)?.abs() > 1e-12 {
                return Err(ReductionError::Unsupported(format!("H* is not of the form c_p p^2 + c_q q^2: {e}")));
            }
        }
        Ok((cp, cq))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chart() -> Chart {
        Chart::new()
            .range("zeta", -2.0, 2.0)
            .range("p_zeta", -2.0, 2.0)
            .range("z", -1.0, 1.0)
            .range("a1", 0.5, 1.5)
    }

    #[test]
    fn pure_gauge_z_is_dropped() {
        let h: Expr = "a1*p_zeta^2*(sin(z)^2 + cos(z)^2)".parse().unwrap();
        let r = eliminate_z(&h, &[Symbol::new("z")], &chart(), Sampling::default()).unwrap();
        assert_eq!(r.branch, ZBranch::PureGauge);
        assert_eq!(r.h_star, "a1*p_zeta^2".parse().unwrap());
    }

    #[test]
    fn quadratic_z_is_solved() {
        let h: Expr = "p_zeta^2/(2*a1) + a1/2*(zeta^2 - 2*z^2)".parse().unwrap();
        let r = eliminate_z(&h, &[Symbol::new("z")], &chart(), Sampling::default()).unwrap();
        assert_eq!(r.branch, ZBranch::Solved(Expr::zero()));
        assert_eq!(r.h_star, "p_zeta^2/(2*a1) + a1/2*zeta^2".parse().unwrap());
    }

    #[test]
    fn quartic_z_is_unsupported() {
        let h: Expr = "p_zeta^2 + z^4".parse().unwrap();
        let r = eliminate_z(&h, &[Symbol::new("z")], &chart(), Sampling::default());
        assert!(matches!(r, Err(ReductionError::Unsupported(_))));
    }

    #[test]
    fn several_z_are_unsupported() {
        let h: Expr = "p_zeta^2".parse().unwrap();
        let r = eliminate_z(&h, &[Symbol::new("z"), Symbol::new("w")], &chart(), Sampling::default());
        assert!(matches!(r, Err(ReductionError::Unsupported(_))));
    }
}
