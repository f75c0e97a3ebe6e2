use super::PathError;
use crate::expr::{Compiled, Expr, Symbol};
use crate::symplectic::{hamilton_vector_field, HooftSystem, PhaseSpace};
use crate::Scalar;

/// Sampled trajectory in `ξ` order (momenta, then coordinates).
#[derive(Debug, Clone)]
pub struct FlowResult<T> {
    pub symbols: Vec<Symbol>,
    pub times: Vec<T>,
    pub states: Vec<Vec<T>>,
    /// `max |H(t) − H(0)|`.
    pub energy_drift: T,
    /// `max |Cⁱ(t) − Cⁱ(0)|` per named charge.
    pub charge_drift: Vec<(String, T)>,
}

impl<T: Scalar> FlowResult<T> {
    pub fn final_state(&self) -> &[T] {
        self.states.last().expect("trajectory has at least the initial point")
    }

    /// The coordinate block (second half of `ξ`) at every sample.
    pub fn coordinates(&self) -> Vec<Vec<T>> {
        let n = self.symbols.len() / 2;
        self.states.iter().map(|s| s[n..].to_vec()).collect()
    }

    pub fn final_coordinates(&self) -> Vec<T> {
        let n = self.symbols.len() / 2;
        self.final_state()[n..].to_vec()
    }
}

struct Field<T> {
    rhs: Vec<Compiled<T>>,
    params: Vec<T>,
    buf_len: usize,
}

impl<T: Scalar> Field<T> {
    fn new(exprs: &[Expr], xi: &[Symbol], params: &[(Symbol, f64)]) -> Result<Self, PathError> {
        let mut slots = xi.to_vec();
        slots.extend(params.iter().map(|(s, _)| s.clone()));
        let rhs = exprs.iter().map(|e| e.compile(&slots)).collect::<Result<Vec<_>, _>>()?;
        Ok(Field {
            rhs,
            params: params.iter().map(|(_, v)| T::lit(*v)).collect(),
            buf_len: slots.len(),
        })
    }

    fn full(&self, y: &[T]) -> Vec<T> {
        let mut v = Vec::with_capacity(self.buf_len);
        v.extend_from_slice(y);
        v.extend_from_slice(&self.params);
        v
    }

    fn eval(&self, y: &[T], t: T) -> Result<Vec<T>, PathError> {
        let v = self.full(y);
        self.rhs
            .iter()
            .map(|c| c.eval(&v).map_err(|source| PathError::Singular { t: t.as_f64(), source }))
            .collect()
    }
}

fn axpy<T: Scalar>(y: &[T], h: T, k: &[T]) -> Vec<T> {
    y.iter().zip(k).map(|(a, b)| *a + h * *b).collect()
}

fn rk4_step<T: Scalar>(f: &Field<T>, y: &[T], t: T, h: T) -> Result<Vec<T>, PathError> {
    let half = T::lit(0.5) * h;
    let k1 = f.eval(y, t)?;
    let k2 = f.eval(&axpy(y, half, &k1), t + half)?;
    let k3 = f.eval(&axpy(y, half, &k2), t + half)?;
    let k4 = f.eval(&axpy(y, h, &k3), t + h)?;
    let sixth = h / T::lit(6.0);
    Ok((0..y.len())
        .map(|i| y[i] + sixth * (k1[i] + T::lit(2.0) * (k2[i] + k3[i]) + k4[i]))
        .collect())
}

/// Integrates Hamilton's equations for `h` with classical RK4.
///
/// `state0` is in `ξ` order; `params` binds every non-phase-space symbol.
pub fn hamiltonian_flow<T: Scalar>(
    h: &Expr,
    ps: &PhaseSpace,
    params: &[(Symbol, f64)],
    state0: &[T],
    t_final: T,
    steps: usize,
) -> Result<FlowResult<T>, PathError> {
    let xi = ps.xi();
    if state0.len() != xi.len() {
        return Err(PathError::Config(format!("state has {} entries, phase space {}", state0.len(), xi.len())));
    }
    if steps == 0 {
        return Err(PathError::Config("zero integration steps".into()));
    }
    let field = Field::new(&hamilton_vector_field(h, ps), &xi, params)?;
    let energy = Field::<T>::new(std::slice::from_ref(h), &xi, params)?;
    let dt = t_final / T::lit(steps as f64);
    let mut times = vec![T::zero()];
    let mut states = vec![state0.to_vec()];
    let e0 = energy.eval(state0, T::zero())?[0];
    let mut energy_drift = T::zero();
    let mut y = state0.to_vec();
    for k in 0..steps {
        let t = dt * T::lit(k as f64);
        y = rk4_step(&field, &y, t, dt)?;
        let e = energy.eval(&y, t + dt)?[0];
        energy_drift = energy_drift.max((e - e0).abs());
        times.push(t + dt);
        states.push(y.clone());
    }
    Ok(FlowResult { symbols: xi, times, states, energy_drift, charge_drift: Vec::new() })
}

/// Flow of the full `2N`-dimensional Hamilton field of a 't Hooft system,
/// with drift of every declared charge.
pub fn classical_flow<T: Scalar>(
    sys: &HooftSystem,
    params: &[(Symbol, f64)],
    state0: &[T],
    t_final: T,
    steps: usize,
) -> Result<FlowResult<T>, PathError> {
    let mut out = hamiltonian_flow(&sys.hamiltonian(), &sys.phase_space, params, state0, t_final, steps)?;
    for c in &sys.charges {
        let f = Field::<T>::new(std::slice::from_ref(&c.expr), &out.symbols, params)?;
        let c0 = f.eval(&out.states[0], T::zero())?[0];
        let mut drift = T::zero();
        for (s, t) in out.states.iter().zip(&out.times) {
            drift = drift.max((f.eval(s, *t)?[0] - c0).abs());
        }
        out.charge_drift.push((c.name.clone(), drift));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduction::builtin::free_particle;

    fn a1() -> Vec<(Symbol, f64)> {
        vec![(Symbol::new("a1"), 0.7)]
    }

    #[test]
    fn quarter_turn() {
        let sys = free_particle().system;
        // ξ = (p_x, p_y, x, y)
        let r = classical_flow(&sys, &a1(), &[0.0, 0.0, 1.0, 0.0], std::f64::consts::FRAC_PI_2, 200).unwrap();
        let q = r.final_coordinates();
        assert!(q[0].abs() < 1e-8 && (q[1] - 1.0).abs() < 1e-8, "{q:?}");
    }

    #[test]
    fn full_turn_and_drift() {
        let sys = free_particle().system;
        let r = classical_flow(&sys, &a1(), &[0.3, -0.2, 1.0, 0.0], std::f64::consts::TAU, 400).unwrap();
        let q = r.final_coordinates();
        assert!((q[0] - 1.0).abs() < 1e-7 && q[1].abs() < 1e-7);
        assert!(r.energy_drift < 1e-9);
        assert!(r.charge_drift.iter().all(|(_, d)| *d < 1e-8), "{:?}", r.charge_drift);
    }

    #[test]
    fn coordinates_ignore_momenta() {
        let sys = free_particle().system;
        let a = classical_flow(&sys, &a1(), &[0.0, 0.0, 1.0, 0.5], 1.3, 100).unwrap();
        let b = classical_flow(&sys, &a1(), &[0.5, 0.5, 1.0, 0.5], 1.3, 100).unwrap();
        for (qa, qb) in a.coordinates().iter().zip(b.coordinates()) {
            assert!(qa.iter().zip(&qb).all(|(u, v): (&f64, &f64)| (u - v).abs() < 1e-14));
        }
    }

    #[test]
    fn energy_drift_is_fourth_order() {
        // Non-linear field so that RK4 actually drifts.
        let ps = PhaseSpace::from_pairs(&[("q", "p")]).unwrap();
        let h: Expr = "p^2/2 + q^4/4".parse().unwrap();
        let drift = |n| hamiltonian_flow(&h, &ps, &[], &[0.0, 1.0], 4.0, n).unwrap().energy_drift;
        let ratio = drift(50) / drift(100);
        assert!(ratio > 12.0 && ratio < 40.0, "ratio {ratio}");
    }

    #[test]
    fn single_precision_runs() {
        let sys = free_particle().system;
        let r = classical_flow(&sys, &a1(), &[0.0f32, 0.0, 1.0, 0.0], std::f32::consts::PI, 100).unwrap();
        assert!((r.final_coordinates()[0] + 1.0).abs() < 1e-5);
    }
}
