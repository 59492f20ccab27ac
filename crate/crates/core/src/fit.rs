//! Ordinary least-squares fits used by the decay and leading-order checks.

use serde::Serialize;

use crate::error::{invalid, Result};

/// `y ≈ intercept + slope · x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
    /// Largest absolute residual.
    pub max_residual: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() {
        return invalid("linear fit: x and y lengths differ");
    }
    if xs.len() < 2 {
        return invalid("linear fit needs at least two samples");
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return invalid("linear fit: non-finite sample");
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if !(sxx > 1e-300 * n) || sxx <= f64::EPSILON * xs.iter().map(|x| x * x).sum::<f64>() {
        return invalid("linear fit: degenerate abscissae");
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).abs()).fold(0.0, f64::max);
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(LinearFit { intercept, slope, r_squared, max_residual })
}

/// `y ≈ c · x^p`, fitted in log-log coordinates. Returns `(c, p, fit)`.
pub fn power_law_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, LinearFit)> {
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return invalid("power-law fit needs positive data");
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let f = linear_fit(&lx, &ly)?;
    Ok((f.intercept.exp(), f.slope, f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let xs = [0.0, 1.0, 2.0, 5.0];
        let ys: Vec<f64> = xs.iter().map(|x| 1.5 - 0.25 * x).collect();
        let f = linear_fit(&xs, &ys).unwrap();
        assert!((f.intercept - 1.5).abs() < 1e-14 && (f.slope + 0.25).abs() < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-14 && f.max_residual < 1e-14);
    }

    #[test]
    fn noisy_line_has_lower_r2() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let ys = [0.0, 1.3, 1.8, 3.4, 3.9];
        let f = linear_fit(&xs, &ys).unwrap();
        assert!(f.r_squared < 1.0 && f.r_squared > 0.9);
    }

    #[test]
    fn power_law() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-1.25)).collect();
        let (c, p, _) = power_law_fit(&xs, &ys).unwrap();
        assert!((c - 3.0).abs() < 1e-12 && (p + 1.25).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(linear_fit(&[1.0, 1.0, 1.0], &[0.0, 1.0, 2.0]).is_err());
        assert!(linear_fit(&[1.0], &[0.0]).is_err());
        assert!(linear_fit(&[1.0, 2.0], &[0.0]).is_err());
        assert!(power_law_fit(&[1.0, -2.0], &[1.0, 1.0]).is_err());
    }
}
