use serde::Serialize;

use super::{classical_flow, PathError};
use crate::expr::Symbol;
use crate::numeric::fd_jacobian;
use crate::symplectic::HooftSystem;
use crate::Scalar;

/// `|det M|` below this is treated as a focal point.
pub const FOCAL_THRESHOLD: f64 = 1e-6;

/// `H = c_p p² + c_q q²` in one degree of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quadratic {
    pub cp: f64,
    pub cq: f64,
}

impl Quadratic {
    /// `L = m q̇²/2 − k q²/2` with `m = 1/(2c_p)`, `k = 2c_q`.
    pub fn mass(&self) -> f64 {
        0.5 / self.cp
    }

    pub fn stiffness(&self) -> f64 {
        2.0 * self.cq
    }

    pub fn omega(&self) -> f64 {
        2.0 * (self.cp * self.cq).max(0.0).sqrt()
    }

    pub fn fluctuation_det(&self, t: f64, steps: usize) -> f64 {
        let k = self.stiffness();
        fluctuation_det(self.mass(), |_| k, t, steps)
    }
}

/// `D(T)` for `m D̈ = −V''(t) D`, `D(0) = 0`, `Ḋ(0) = 1`, by RK4.
///
/// Proportional to `det M` with the unit-initial-slope normalization.
pub fn fluctuation_det<T: Scalar>(mass: T, curvature: impl Fn(T) -> T, t: T, steps: usize) -> T {
    let h = t / T::lit(steps as f64);
    let half = T::lit(0.5) * h;
    let acc = |s: T, d: T| -curvature(s) * d / mass;
    let (mut d, mut v) = (T::zero(), T::one());
    for k in 0..steps {
        let s = h * T::lit(k as f64);
        let (k1d, k1v) = (v, acc(s, d));
        let (k2d, k2v) = (v + half * k1v, acc(s + half, d + half * k1d));
        let (k3d, k3v) = (v + half * k2v, acc(s + half, d + half * k2d));
        let (k4d, k4v) = (v + h * k3v, acc(s + h, d + h * k3d));
        let sixth = h / T::lit(6.0);
        d = d + sixth * (k1d + T::lit(2.0) * (k2d + k3d) + k4d);
        v = v + sixth * (k1v + T::lit(2.0) * (k2v + k3v) + k4v);
    }
    d
}

/// Where the classical amplitude comes from.
#[derive(Debug, Clone, Copy)]
pub enum AmplitudeSource<'a> {
    /// Be-able flow of a 't Hooft system; `det M` is the tangent-map determinant.
    Hooft { sys: &'a HooftSystem, params: &'a [(Symbol, f64)] },
    /// Reduced quadratic system; `det M` is the Jacobi field `D(T)`.
    Quadratic(Quadratic),
}

/// Weight of the delta-squeezed amplitude from `q1` to `q2` in time `T`:
/// zero off the classical trajectory, otherwise `1/|det M|`.
pub fn classical_amplitude(
    src: AmplitudeSource<'_>,
    q1: &[f64],
    q2: &[f64],
    t: f64,
    steps: usize,
) -> Result<f64, PathError> {
    match src {
        AmplitudeSource::Quadratic(h) => {
            let det = h.fluctuation_det(t, steps);
            if det < FOCAL_THRESHOLD {
                return Err(PathError::Focal { t, det });
            }
            Ok(1.0 / det)
        }
        AmplitudeSource::Hooft { sys, params } => {
            let n = sys.phase_space.dof();
            if q1.len() != n || q2.len() != n {
                return Err(PathError::Config(format!("endpoints need {n} coordinates")));
            }
            let end = |q0: &[f64]| -> Result<Vec<f64>, PathError> {
                let mut state = vec![0.0; n];
                state.extend_from_slice(q0);
                Ok(classical_flow(sys, params, &state, t, steps)?.final_coordinates())
            };
            let hit = end(q1)?;
            let off = hit.iter().zip(q2).any(|(a, b)| (a - b).abs() > 1e-6 * (1.0 + b.abs()));
            if off {
                return Ok(0.0);
            }
            let vars: Vec<usize> = (0..n).collect();
            let det = fd_jacobian(end, q1, &vars, 1e-6)?.determinant().abs();
            if det < FOCAL_THRESHOLD {
                return Err(PathError::Focal { t, det });
            }
            Ok(1.0 / det)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_oscillator_gives_sine() {
        let h = Quadratic { cp: 0.5, cq: 0.5 };
        assert!((h.fluctuation_det(1.0, 1000) - 1f64.sin()).abs() < 1e-8);
        assert!((h.omega() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn free_gives_time() {
        let h = Quadratic { cp: 0.5, cq: 0.0 };
        assert!((h.fluctuation_det(2.0, 10) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn time_dependent_curvature() {
        let coarse = fluctuation_det(1.0, |s: f64| 2.0 / (1.0 + s).powi(2), 1.5, 200);
        let fine = fluctuation_det(1.0, |s: f64| 2.0 / (1.0 + s).powi(2), 1.5, 400);
        assert!((coarse - fine).abs() < 1e-9);
    }

    #[test]
    fn focal_point_is_an_error() {
        let h = Quadratic { cp: 0.5, cq: 0.5 };
        let r = classical_amplitude(AmplitudeSource::Quadratic(h), &[0.0], &[0.0], std::f64::consts::PI, 1000);
        assert!(matches!(r, Err(PathError::Focal { .. })));
    }
}
