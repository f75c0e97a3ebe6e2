use std::f64::consts::PI;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use super::{hamiltonian_flow, LatticeConfig, Mode, PathError, StandardForm};
use crate::expr::Symbol;
use crate::numeric::log_log_slope;
use crate::reduction::ReducedSystem;

#[derive(Debug, Clone, Serialize)]
pub struct HbarReport {
    pub hbar: f64,
    pub mass: f64,
    pub scale_q: f64,
    pub scale_p: f64,
    pub standard_action: f64,
    pub reduced_action: f64,
    pub ratio: f64,
    /// `|ratio·ħ − 1|`.
    pub deviation: f64,
}

/// Samples a random discrete path `(X_k, P_k)`, maps it to the reduced
/// variables and compares the sliced actions `Σ [p_k Δq_k − ε H(p_k, q_k)]`.
pub fn hbar_scaling_report(
    rs: &ReducedSystem,
    params: &[(Symbol, f64)],
    cfg: &LatticeConfig,
    seed: u64,
) -> Result<HbarReport, PathError> {
    let form = StandardForm::from_reduced(rs, params, cfg.mass, cfg.hbar)?;
    let q = rs.phase_space.coordinates()[0].clone();
    let p = rs.phase_space.momenta()[0].clone();
    let mut slots = vec![p, q];
    slots.extend(params.iter().map(|(s, _)| s.clone()));
    let h_red = rs.h_star.compile::<f64>(&slots)?;
    let bound: Vec<f64> = params.iter().map(|(_, v)| *v).collect();
    let h_at = |pp: f64, qq: f64| {
        let mut v = vec![pp, qq];
        v.extend_from_slice(&bound);
        h_red.eval(&v)
    };

    let total = match cfg.mode {
        Mode::RealTime { t } => t,
        Mode::ImaginaryTime { beta } => beta,
    };
    let eps = total / cfg.slices as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..=cfg.slices).map(|_| rng.random_range(-1.0..1.0)).collect();
    let ps: Vec<f64> = (0..cfg.slices).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut standard = 0.0;
    let mut reduced = 0.0;
    for k in 0..cfg.slices {
        let h_std = ps[k] * ps[k] / (2.0 * form.mass) + form.potential(xs[k]);
        standard += ps[k] * (xs[k + 1] - xs[k]) - eps * h_std;
        let (pr, q0, q1) = (form.scale_p * ps[k], form.scale_q * xs[k], form.scale_q * xs[k + 1]);
        reduced += pr * (q1 - q0) - eps * h_at(pr, q0)?;
    }
    let ratio = reduced / standard;
    Ok(HbarReport {
        hbar: form.hbar,
        mass: form.mass,
        scale_q: form.scale_q,
        scale_p: form.scale_p,
        standard_action: standard,
        reduced_action: reduced,
        ratio,
        deviation: (ratio * form.hbar - 1.0).abs(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BridgeStudy {
    pub eps: Vec<f64>,
    /// Empirical `Var(Δx)` per slice.
    pub variance: Vec<f64>,
    /// `ħε/m`.
    pub expected: Vec<f64>,
    /// `Var(Δx)` of the lattice measure itself, including the potential and the finite period.
    pub exact: Vec<f64>,
    pub max_rel_error: f64,
    /// Slope of `log √Var` against `log ε`.
    pub holder_slope: f64,
    pub slices: usize,
    pub samples: usize,
}

/// Periodic imaginary-time paths of `slices` steps drawn exactly from the
/// lattice Gaussian `exp(−S_E/ħ)`, one run per `ε` (so `β = slices·ε`).
///
/// The precision matrix is circulant, so paths are white noise filtered by
/// `λ_k^{-1/2}` in its Fourier basis.
pub fn bridge_variance_study(
    form: &StandardForm,
    eps_list: &[f64],
    slices: usize,
    samples: usize,
    seed: u64,
) -> Result<BridgeStudy, PathError> {
    if slices < 3 {
        return Err(PathError::Config(format!("{slices} slices; a periodic chain needs at least 3")));
    }
    let n = slices;
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut out = BridgeStudy {
        eps: Vec::new(),
        variance: Vec::new(),
        expected: Vec::new(),
        exact: Vec::new(),
        max_rel_error: 0.0,
        holder_slope: f64::NAN,
        slices,
        samples,
    };
    for (run, &eps) in eps_list.iter().enumerate() {
        let (m, h) = (form.mass, form.hbar);
        let kin = m / (eps * h);
        let pot = eps * m * form.omega * form.omega / h;
        let lap: Vec<f64> = (0..n).map(|k| 2.0 - 2.0 * (2.0 * PI * k as f64 / n as f64).cos()).collect();
        let lambda: Vec<f64> = lap.iter().map(|l| kin * l + pot).collect();
        // The k = 0 mode carries no increment; it is dropped when ω = 0.
        let filter: Vec<f64> = lambda.iter().map(|l| if *l > 0.0 { l.recip().sqrt() } else { 0.0 }).collect();
        let exact = (1..n).map(|k| lap[k] / lambda[k]).sum::<f64>() / n as f64;
        let chunk = 1000;
        let chunks = samples.div_ceil(chunk);
        let sum: f64 = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((run as u64) << 32) ^ c as u64);
                let count = chunk.min(samples - c * chunk);
                let mut buf = vec![Complex::new(0.0, 0.0); n];
                let mut scratch =
                    vec![Complex::new(0.0, 0.0); fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len())];
                let mut acc = 0.0;
                for _ in 0..count {
                    for b in buf.iter_mut() {
                        *b = Complex::new(rng.sample::<f64, _>(StandardNormal), 0.0);
                    }
                    fwd.process_with_scratch(&mut buf, &mut scratch);
                    for (b, f) in buf.iter_mut().zip(&filter) {
                        *b *= *f / n as f64;
                    }
                    inv.process_with_scratch(&mut buf, &mut scratch);
                    acc += (0..n).map(|i| (buf[(i + 1) % n].re - buf[i].re).powi(2)).sum::<f64>() / n as f64;
                }
                acc
            })
            .sum();
        let variance = sum / samples as f64;
        let expected = h * eps / m;
        out.max_rel_error = out.max_rel_error.max((variance - expected).abs() / expected);
        out.eps.push(eps);
        out.variance.push(variance);
        out.expected.push(expected);
        out.exact.push(exact);
    }
    if out.eps.len() >= 2 {
        let rms: Vec<f64> = out.variance.iter().map(|v| v.sqrt()).collect();
        out.holder_slope = log_log_slope(&out.eps, &rms);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct IncrementStudy {
    pub eps: Vec<f64>,
    pub mean_abs_increment: Vec<f64>,
    pub holder_slope: f64,
}

/// Per-slice `|Δq|` of the deterministic reduced flow started at `(p₀, q₀)`.
pub fn deterministic_increment_study(
    rs: &ReducedSystem,
    params: &[(Symbol, f64)],
    start: (f64, f64),
    t: f64,
    slice_counts: &[usize],
) -> Result<IncrementStudy, PathError> {
    let mut eps = Vec::new();
    let mut incs = Vec::new();
    for &n in slice_counts {
        let flow = hamiltonian_flow(&rs.h_star, &rs.phase_space, params, &[start.0, start.1], t, n)?;
        let q: Vec<f64> = flow.states.iter().map(|s| s[1]).collect();
        let mean = q.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / n as f64;
        eps.push(t / n as f64);
        incs.push(mean);
    }
    let holder_slope = log_log_slope(&eps, &incs);
    Ok(IncrementStudy { eps, mean_abs_increment: incs, holder_slope })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variance_close_to_free_value() {
        let form = StandardForm { mass: 2.0, omega: 1.0, hbar: 0.5, scale_q: 1.0, scale_p: 1.0 };
        let s = bridge_variance_study(&form, &[1.0 / 64.0], 256, 2000, 3).unwrap();
        assert!((s.exact[0] - s.expected[0]).abs() / s.expected[0] < 0.02, "{s:?}");
        assert!(s.max_rel_error < 0.05);
    }
}
