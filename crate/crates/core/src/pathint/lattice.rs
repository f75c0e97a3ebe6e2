use std::f64::consts::PI;
use std::io::{self, Write};
use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use super::PathError;
use crate::expr::Symbol;
use crate::numeric::log_log_slope;
use crate::reduction::ReducedSystem;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Mode {
    /// Kernel column `K(·, x₀; T)`.
    RealTime { t: f64 },
    /// `Z(β) = Tr e^{−βH}`.
    ImaginaryTime { beta: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct LatticeConfig {
    /// Grid points; a power of two.
    pub points: usize,
    /// Period `L`; the grid is `x_j = (j − n/2) L/n`.
    pub length: f64,
    pub slices: usize,
    pub mode: Mode,
    pub mass: f64,
    pub hbar: f64,
    /// Source point `x₀` of the kernel column.
    pub source: f64,
    /// Pass band of the initial delta, as fractions of the Nyquist wavenumber.
    pub cutoff: f64,
    pub rolloff: f64,
    /// Maximum accepted error (relative error on the resolved grid, or of `Z`).
    pub tolerance: Option<f64>,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        LatticeConfig {
            points: 1024,
            length: 64.0,
            slices: 256,
            mode: Mode::RealTime { t: 1.0 },
            mass: 1.0,
            hbar: 1.0,
            source: 0.0,
            cutoff: 0.62,
            rolloff: 0.045,
            tolerance: None,
        }
    }
}

impl LatticeConfig {
    pub fn spacing(&self) -> f64 {
        self.length / self.points as f64
    }

    pub fn grid(&self) -> Vec<f64> {
        let dx = self.spacing();
        let half = (self.points / 2) as f64;
        (0..self.points).map(|j| (j as f64 - half) * dx).collect()
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.points;
        let dk = 2.0 * PI / self.length;
        (0..n)
            .map(|j| if j < n.div_ceil(2) { j as f64 * dk } else { (j as f64 - n as f64) * dk })
            .collect()
    }

    pub fn nyquist(&self) -> f64 {
        PI * self.points as f64 / self.length
    }

    fn validate(&self) -> Result<(), PathError> {
        if !self.points.is_power_of_two() || self.points < 8 {
            return Err(PathError::Config(format!("grid size {} is not a power of two >= 8", self.points)));
        }
        if self.slices < 2 {
            return Err(PathError::Config(format!("{} slices; at least 2 are needed", self.slices)));
        }
        for (name, v) in [("length", self.length), ("mass", self.mass), ("hbar", self.hbar)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(PathError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        match self.mode {
            Mode::RealTime { t } if !(t > 0.0) => Err(PathError::Config(format!("time {t} must be positive"))),
            Mode::ImaginaryTime { beta } if !(beta > 0.0) => {
                Err(PathError::Config(format!("beta {beta} must be positive")))
            }
            _ => Ok(()),
        }
    }
}

/// `H = P²/2m + mω²X²/2` together with the rescaling from the reduced variables:
/// `ζ = scale_q X`, `p_ζ = scale_p P`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StandardForm {
    pub mass: f64,
    pub omega: f64,
    pub hbar: f64,
    pub scale_q: f64,
    pub scale_p: f64,
}

impl StandardForm {
    /// Rescaling of `H* = c_p p² + c_q ζ²` for which the reduced action equals
    /// the standard action divided by `ħ`.
    pub fn from_coefficients(cp: f64, cq: f64, mass: f64, hbar: f64) -> Result<Self, PathError> {
        if !(cp > 0.0) || !(cq >= 0.0) {
            return Err(PathError::Config(format!("need c_p > 0 and c_q >= 0, got ({cp}, {cq})")));
        }
        let scale_p = (1.0 / (2.0 * mass * hbar * cp)).sqrt();
        Ok(StandardForm {
            mass,
            omega: 2.0 * (cp * cq).sqrt(),
            hbar,
            scale_q: 1.0 / (hbar * scale_p),
            scale_p,
        })
    }

    pub fn from_reduced(
        rs: &ReducedSystem,
        params: &[(Symbol, f64)],
        mass: f64,
        hbar: f64,
    ) -> Result<Self, PathError> {
        let (cp, cq) = rs.quadratic_coefficients(params)?;
        Self::from_coefficients(cp, cq, mass, hbar)
    }

    pub fn potential(&self, x: f64) -> f64 {
        0.5 * self.mass * self.omega * self.omega * x * x
    }

    /// Closed-form kernel: free Gaussian for `ω = 0`, Mehler otherwise.
    pub fn kernel(&self, x: f64, x0: f64, t: f64) -> Complex<f64> {
        let (m, h, w) = (self.mass, self.hbar, self.omega);
        if w == 0.0 {
            let pref = Complex::new(0.0, 2.0 * PI * h * t / m).sqrt().inv();
            pref * Complex::new(0.0, m * (x - x0).powi(2) / (2.0 * h * t)).exp()
        } else {
            let s = (w * t).sin();
            let pref = Complex::new(0.0, 2.0 * PI * h * s / (m * w)).sqrt().inv();
            let phase = m * w * ((x * x + x0 * x0) * (w * t).cos() - 2.0 * x * x0) / (2.0 * h * s);
            pref * Complex::new(0.0, phase).exp()
        }
    }

    /// Initial wavenumber of the classical path that reaches `x` from `x0` in time `t`.
    fn launch_wavenumber(&self, x: f64, x0: f64, t: f64) -> f64 {
        let (m, h, w) = (self.mass, self.hbar, self.omega);
        if w == 0.0 {
            m * (x - x0) / (h * t)
        } else {
            m * w * (x - x0 * (w * t).cos()) / (h * (w * t).sin())
        }
    }

    /// Farthest a wavenumber `k` travels from the source in time `t`.
    fn reach(&self, k: f64, t: f64) -> f64 {
        let v = self.hbar * k / self.mass;
        if self.omega == 0.0 {
            v * t
        } else if self.omega * t <= PI / 2.0 {
            v * (self.omega * t).sin() / self.omega
        } else {
            v / self.omega
        }
    }
}

/// `1/(2 sinh(βħω/2))`.
pub fn partition_reference(form: &StandardForm, beta: f64) -> f64 {
    0.5 / (0.5 * beta * form.hbar * form.omega).sinh()
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelMetrics {
    /// Over the resolved part of the central half-grid.
    pub max_rel_error: f64,
    pub l2_rel_error: f64,
    pub source_rel_error: f64,
    /// Largest relative change of `Σ|ψ|²` in one slice.
    pub norm_drift: f64,
    pub resolved_points: usize,
}

#[derive(Debug, Clone)]
pub struct KernelResult<T> {
    pub grid: Vec<T>,
    pub amplitudes: Vec<Complex<T>>,
    pub reference: Vec<Complex<T>>,
    /// Grid indices the metrics were computed on.
    pub resolved: Vec<usize>,
    pub metrics: KernelMetrics,
}

#[derive(Debug, Clone, Serialize)]
pub struct PartitionResult {
    pub beta: f64,
    pub z: f64,
    pub reference: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone)]
pub enum PropagatorResult<T> {
    Kernel(KernelResult<T>),
    Partition(PartitionResult),
}

impl<T: Scalar> PropagatorResult<T> {
    /// The headline error: max relative kernel error, or relative error of `Z`.
    pub fn error(&self) -> f64 {
        match self {
            PropagatorResult::Kernel(k) => k.metrics.max_rel_error,
            PropagatorResult::Partition(p) => p.rel_error,
        }
    }

    /// `zeta, re_K, im_K, re_ref, im_ref, abs_err`, or `beta, Z, Z_ref, rel_err`.
    pub fn write_csv(&self, mut w: impl Write) -> io::Result<()> {
        match self {
            PropagatorResult::Kernel(k) => {
                writeln!(w, "zeta,re_K,im_K,re_ref,im_ref,abs_err")?;
                for ((x, a), r) in k.grid.iter().zip(&k.amplitudes).zip(&k.reference) {
                    let err = (*a - *r).norm();
                    let cols = [a.re, a.im, r.re, r.im, err].map(|v| v.as_f64());
                    writeln!(w, "{},{:e},{:e},{:e},{:e},{:e}", x, cols[0], cols[1], cols[2], cols[3], cols[4])?;
                }
            }
            PropagatorResult::Partition(p) => {
                writeln!(w, "beta,Z,Z_ref,rel_err")?;
                writeln!(w, "{},{:e},{:e},{:e}", p.beta, p.z, p.reference, p.rel_error)?;
            }
        }
        Ok(())
    }
}

/// Binds the reduced system to `(m, ħ)` and runs the lattice.
pub fn propagate_quantum<T: Scalar>(
    rs: &ReducedSystem,
    params: &[(Symbol, f64)],
    cfg: &LatticeConfig,
) -> Result<PropagatorResult<T>, PathError> {
    let form = StandardForm::from_reduced(rs, params, cfg.mass, cfg.hbar)?;
    propagate_standard(&form, cfg)
}

pub fn propagate_standard<T: Scalar>(form: &StandardForm, cfg: &LatticeConfig) -> Result<PropagatorResult<T>, PathError> {
    cfg.validate()?;
    let out = match cfg.mode {
        Mode::RealTime { t } => PropagatorResult::Kernel(real_time::<T>(form, cfg, t)?),
        Mode::ImaginaryTime { beta } => PropagatorResult::Partition(imaginary_time::<T>(form, cfg, beta)?),
    };
    if let Some(tol) = cfg.tolerance {
        if !(out.error() <= tol) {
            return Err(PathError::Trotter { error: out.error(), tol, slices: cfg.slices });
        }
    }
    Ok(out)
}

struct Spectral<T: Scalar> {
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    scratch: Vec<Complex<T>>,
    norm: T,
}

impl<T: Scalar> Spectral<T> {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        Spectral {
            forward,
            inverse,
            scratch: vec![Complex::new(T::zero(), T::zero()); len],
            norm: T::one() / T::lit(n as f64),
        }
    }

    /// `ψ ← ifft(g · fft(ψ))`.
    fn apply(&mut self, psi: &mut [Complex<T>], g: &[Complex<T>]) {
        self.forward.process_with_scratch(psi, &mut self.scratch);
        let norm = self.norm;
        psi.par_iter_mut().zip(g).for_each(|(a, b)| *a = *a * *b * norm);
        self.inverse.process_with_scratch(psi, &mut self.scratch);
    }

    fn inverse_of(&mut self, mut spec: Vec<Complex<T>>) -> Vec<Complex<T>> {
        self.inverse.process_with_scratch(&mut spec, &mut self.scratch);
        let norm = self.norm;
        spec.iter_mut().for_each(|a| *a = *a * norm);
        spec
    }
}

fn c<T: Scalar>(z: Complex<f64>) -> Complex<T> {
    Complex::new(T::lit(z.re), T::lit(z.im))
}

fn norm2<T: Scalar>(psi: &[Complex<T>]) -> f64 {
    psi.par_iter().map(|a| a.norm_sqr().as_f64()).sum()
}

fn real_time<T: Scalar>(form: &StandardForm, cfg: &LatticeConfig, t: f64) -> Result<KernelResult<T>, PathError> {
    let n = cfg.points;
    let dx = cfg.spacing();
    let x = cfg.grid();
    let k = cfg.wavenumbers();
    let k_n = cfg.nyquist();
    let kc = cfg.cutoff * k_n;
    let w = cfg.rolloff * k_n;
    let x0 = cfg.source;
    if form.omega > 0.0 && (form.omega * t / PI - (form.omega * t / PI).round()).abs() < 1e-9 {
        return Err(PathError::Coverage(format!("T = {t} is a caustic of the oscillator (ωT a multiple of π)")));
    }
    if kc + 6.0 * w > k_n {
        return Err(PathError::Coverage(format!(
            "pass band {:.3} + 6 x {:.3} exceeds the Nyquist wavenumber {k_n:.3}",
            kc, w
        )));
    }
    let reach = form.reach(kc + 6.0 * w, t);
    if x0.abs() + reach > 0.75 * cfg.length {
        return Err(PathError::Coverage(format!(
            "packet spreads {reach:.3} from x0 = {x0}; wrap-around reaches the central half of L = {}",
            cfg.length
        )));
    }
    let usable = kc - 6.0 * w;
    let resolved: Vec<usize> = (0..n)
        .filter(|&j| x[j].abs() <= 0.25 * cfg.length && form.launch_wavenumber(x[j], x0, t).abs() <= usable)
        .collect();
    let at_source = ((x0 / dx).round() as i64 + (n / 2) as i64) as usize;
    if at_source >= n || !resolved.contains(&at_source) {
        return Err(PathError::Coverage(format!("source point {x0} is not resolved on this grid")));
    }

    // Band-limited delta at x0 on the shifted grid.
    let mut spectral = Spectral::<T>::new(n);
    let spec: Vec<Complex<T>> = k
        .iter()
        .map(|&kk| {
            let window = 0.5 * libm::erfc((kk.abs() - kc) / w);
            c(Complex::from_polar(window / dx, -kk * (x0 - x[0])))
        })
        .collect();
    let mut psi = spectral.inverse_of(spec);

    let eps = t / cfg.slices as f64;
    let (m, h) = (form.mass, form.hbar);
    let half_v: Vec<Complex<T>> =
        x.iter().map(|&xx| c(Complex::from_polar(1.0, -0.5 * eps * form.potential(xx) / h))).collect();
    let kinetic: Vec<Complex<T>> =
        k.iter().map(|&kk| c(Complex::from_polar(1.0, -eps * h * kk * kk / (2.0 * m)))).collect();
    let mut norm_drift = 0.0f64;
    let mut before = norm2(&psi);
    for _ in 0..cfg.slices {
        psi.par_iter_mut().zip(&half_v).for_each(|(a, b)| *a = *a * *b);
        spectral.apply(&mut psi, &kinetic);
        psi.par_iter_mut().zip(&half_v).for_each(|(a, b)| *a = *a * *b);
        let after = norm2(&psi);
        norm_drift = norm_drift.max((after - before).abs() / before);
        before = after;
    }

    let reference: Vec<Complex<f64>> = x.iter().map(|&xx| form.kernel(xx, x0, t)).collect();
    let mut max_rel = 0.0f64;
    let (mut num, mut den) = (0.0, 0.0);
    for &j in &resolved {
        let got = Complex::new(psi[j].re.as_f64(), psi[j].im.as_f64());
        let d = (got - reference[j]).norm();
        max_rel = max_rel.max(d / reference[j].norm());
        num += d * d;
        den += reference[j].norm_sqr();
    }
    let got = Complex::new(psi[at_source].re.as_f64(), psi[at_source].im.as_f64());
    let source_rel_error = (got - reference[at_source]).norm() / reference[at_source].norm();
    Ok(KernelResult {
        grid: x.iter().map(|&v| T::lit(v)).collect(),
        amplitudes: psi,
        reference: reference.into_iter().map(c).collect(),
        metrics: KernelMetrics {
            max_rel_error: max_rel,
            l2_rel_error: (num / den).sqrt(),
            source_rel_error,
            norm_drift,
            resolved_points: resolved.len(),
        },
        resolved,
    })
}

fn matmul<T: Scalar>(a: &[T], b: &[T], n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); n * n];
    out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == T::zero() {
                continue;
            }
            let bk = &b[k * n..(k + 1) * n];
            for (r, bv) in row.iter_mut().zip(bk) {
                *r = *r + aik * *bv;
            }
        }
    });
    out
}

fn imaginary_time<T: Scalar>(form: &StandardForm, cfg: &LatticeConfig, beta: f64) -> Result<PartitionResult, PathError> {
    if !(form.omega > 0.0) {
        return Err(PathError::Coverage("Z(beta) diverges without a confining potential (omega = 0)".into()));
    }
    let n = cfg.points;
    let (m, h, w) = (form.mass, form.hbar, form.omega);
    let th = (0.5 * beta * h * w).tanh();
    let sigma_x = (h / (2.0 * m * w * th)).sqrt();
    let sigma_k = (m * w / (2.0 * h * th)).sqrt();
    if cfg.length < 16.0 * sigma_x {
        return Err(PathError::Coverage(format!(
            "L = {} covers fewer than 8 standard deviations ({sigma_x:.3}) either side",
            cfg.length
        )));
    }
    if cfg.nyquist() < 8.0 * sigma_k {
        return Err(PathError::Coverage(format!(
            "Nyquist wavenumber {:.3} below 8 momentum standard deviations ({sigma_k:.3})",
            cfg.nyquist()
        )));
    }
    let eps = beta / cfg.slices as f64;
    let x = cfg.grid();
    let k = cfg.wavenumbers();
    let mut spectral = Spectral::<T>::new(n);
    let g: Vec<Complex<T>> = k
        .iter()
        .map(|&kk| c(Complex::new((-eps * h * h * kk * kk / (2.0 * m)).exp(), 0.0)))
        .collect();
    let column: Vec<T> = spectral.inverse_of(g).into_iter().map(|z| z.re).collect();
    let weight: Vec<T> = x.iter().map(|&xx| T::lit((-0.5 * eps * form.potential(xx)).exp())).collect();
    let mut transfer = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            transfer[i * n + j] = weight[i] * column[(i + n - j) % n] * weight[j];
        }
    }
    // Tr T^N by binary powering.
    let mut power: Option<Vec<T>> = None;
    let mut base = transfer;
    let mut e = cfg.slices;
    while e > 0 {
        if e & 1 == 1 {
            power = Some(match power {
                None => base.clone(),
                Some(p) => matmul(&p, &base, n),
            });
        }
        e >>= 1;
        if e > 0 {
            base = matmul(&base, &base, n);
        }
    }
    let power = power.expect("at least two slices");
    let z: f64 = (0..n).map(|i| power[i * n + i].as_f64()).sum();
    let reference = partition_reference(form, beta);
    Ok(PartitionResult { beta, z, reference, rel_error: (z - reference).abs() / reference })
}

#[derive(Debug, Clone, Serialize)]
pub struct TrotterReport {
    pub slices: Vec<usize>,
    /// Relative kernel error at the source point.
    pub errors: Vec<f64>,
    pub slope: f64,
}

/// Kernel error at the source point against slice count; configurations run concurrently.
pub fn trotter_convergence(form: &StandardForm, cfg: &LatticeConfig, slices: &[usize]) -> Result<TrotterReport, PathError> {
    let errors = slices
        .par_iter()
        .map(|&s| {
            let run = LatticeConfig { slices: s, tolerance: None, ..cfg.clone() };
            match propagate_standard::<f64>(form, &run)? {
                PropagatorResult::Kernel(k) => Ok(k.metrics.source_rel_error),
                PropagatorResult::Partition(p) => Ok(p.rel_error),
            }
        })
        .collect::<Result<Vec<f64>, PathError>>()?;
    let xs: Vec<f64> = slices.iter().map(|&s| s as f64).collect();
    Ok(TrotterReport { slices: slices.to_vec(), slope: log_log_slope(&xs, &errors), errors })
}
