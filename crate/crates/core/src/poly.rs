//! Dense univariate polynomials.
//!
//! The generic helpers work over any `num_traits::Num` scalar so the same
//! expansion code runs on `Complex<f64>` and on exact `Complex<BigRational>`.

use num_complex::Complex64;
use num_traits::Num;
use serde::{Deserialize, Serialize};

/// Coordinate chart on the Riemann sphere: `z`, or `w = 1/z` near infinity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Chart {
    Z,
    W,
}

/// Polynomial with complex coefficients in ascending degree, tagged with the
/// chart its variable lives in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexPolynomial {
    pub coefficients: Vec<Complex64>,
    pub chart: Chart,
}

impl ComplexPolynomial {
    pub fn new(coefficients: Vec<Complex64>, chart: Chart) -> Self {
        let mut p = Self { coefficients, chart };
        p.trim();
        p
    }

    pub fn from_real(coefficients: &[f64], chart: Chart) -> Self {
        Self::new(coefficients.iter().map(|&c| Complex64::new(c, 0.0)).collect(), chart)
    }

    /// `lead · ∏ (z − r)`.
    pub fn from_roots(lead: Complex64, roots: &[Complex64], chart: Chart) -> Self {
        let mut c = vec![lead];
        for &r in roots {
            c = mul(&c, &[-r, Complex64::new(1.0, 0.0)]);
        }
        Self::new(c, chart)
    }

    /// Drops exactly-zero leading coefficients (keeps at least one entry).
    pub fn trim(&mut self) {
        while self.coefficients.len() > 1 && *self.coefficients.last().unwrap() == Complex64::new(0.0, 0.0) {
            self.coefficients.pop();
        }
        if self.coefficients.is_empty() {
            self.coefficients.push(Complex64::new(0.0, 0.0));
        }
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.iter().all(|c| *c == Complex64::new(0.0, 0.0))
    }

    pub fn leading(&self) -> Complex64 {
        *self.coefficients.last().unwrap()
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coefficients.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// `Σ |c_k| |z|^k`, the natural magnitude against which `|p(z)|` is judged.
    pub fn eval_scale(&self, z: Complex64) -> f64 {
        let r = z.norm();
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
    }

    pub fn derivative(&self) -> Self {
        if self.coefficients.len() <= 1 {
            return Self::new(vec![Complex64::new(0.0, 0.0)], self.chart);
        }
        let c = self.coefficients.iter().enumerate().skip(1).map(|(k, &c)| c * k as f64).collect();
        Self::new(c, self.chart)
    }

    /// `w^d p(1/w)` re-tagged to the other chart; `d` must be at least the degree.
    pub fn reversed(&self, d: usize) -> Self {
        assert!(d >= self.degree(), "reversal degree below polynomial degree");
        let mut c = vec![Complex64::new(0.0, 0.0); d + 1];
        for (k, &a) in self.coefficients.iter().enumerate() {
            c[d - k] = a;
        }
        let chart = match self.chart {
            Chart::Z => Chart::W,
            Chart::W => Chart::Z,
        };
        Self::new(c, chart)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::new(self.coefficients.iter().map(|&c| c * s).collect(), self.chart)
    }
}

/// Product of two coefficient vectors (ascending degree).
pub fn mul<T: Clone + Num>(a: &[T], b: &[T]) -> Vec<T> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![T::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] = out[i + j].clone() + x.clone() * y.clone();
        }
    }
    out
}

/// Sum of two coefficient vectors.
pub fn add<T: Clone + Num>(a: &[T], b: &[T]) -> Vec<T> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|k| {
            let x = a.get(k).cloned().unwrap_or_else(T::zero);
            let y = b.get(k).cloned().unwrap_or_else(T::zero);
            x + y
        })
        .collect()
}

pub fn scale<T: Clone + Num>(a: &[T], s: &T) -> Vec<T> {
    a.iter().map(|x| x.clone() * s.clone()).collect()
}

/// `(z − r)^k`.
pub fn linear_power<T: Clone + Num>(r: &T, k: usize) -> Vec<T> {
    let mut out = vec![T::one()];
    let lin = vec![T::zero() - r.clone(), T::one()];
    for _ in 0..k {
        out = mul(&out, &lin);
    }
    out
}

pub fn eval<T: Clone + Num>(a: &[T], z: &T) -> T {
    a.iter().rev().fold(T::zero(), |acc, c| acc * z.clone() + c.clone())
}

/// Taylor coefficients of `p` about `x`: `p(z) = Σ_k b_k (z − x)^k`.
pub fn taylor_shift<T: Clone + Num>(a: &[T], x: &T) -> Vec<T> {
    // Repeated synthetic division.
    let mut work: Vec<T> = a.to_vec();
    let n = work.len();
    for i in 0..n {
        for j in (i..n - 1).rev() {
            let v = work[j].clone() + x.clone() * work[j + 1].clone();
            work[j] = v;
        }
    }
    work
}

/// First `n` coefficients of the power series `1/q` (requires `q[0] ≠ 0`).
pub fn series_inverse<T: Clone + Num>(q: &[T], n: usize) -> Vec<T> {
    let mut out: Vec<T> = Vec::with_capacity(n);
    let q0 = q[0].clone();
    for k in 0..n {
        let mut acc = if k == 0 { T::one() } else { T::zero() };
        for j in 1..=k {
            if let Some(qj) = q.get(j) {
                acc = acc - qj.clone() * out[k - j].clone();
            }
        }
        out.push(acc / q0.clone());
    }
    out
}
