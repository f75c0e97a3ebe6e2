//! Small numerical helpers shared by the verification routines.

use nalgebra::DMatrix;

/// Central-difference Jacobian of `f` at `x`, with respect to the coordinates
/// listed in `vars`. Row `i` is output `i`; column `j` is `vars[j]`.
pub fn fd_jacobian<E>(
    f: impl Fn(&[f64]) -> Result<Vec<f64>, E>,
    x: &[f64],
    vars: &[usize],
    h: f64,
) -> Result<DMatrix<f64>, E> {
    let m = f(x)?.len();
    let mut jac = DMatrix::zeros(m, vars.len());
    let mut probe = x.to_vec();
    for (j, &v) in vars.iter().enumerate() {
        let step = h * (1.0 + x[v].abs());
        probe[v] = x[v] + step;
        let plus = f(&probe)?;
        probe[v] = x[v] - step;
        let minus = f(&probe)?;
        probe[v] = x[v];
        for i in 0..m {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * step);
        }
    }
    Ok(jac)
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Slope of `log y` against `log x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    fit_slope(&lx, &ly)
}
