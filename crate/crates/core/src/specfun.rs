//! Special functions: modified Bessel `K₀`, `K₁`; the complete elliptic
//! integral `K` for complex modulus; theta null values; the modular lambda
//! function and its inverse on `Γ(2)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, numerical, Result};
use crate::quad;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

// ---------------------------------------------------------------- Bessel

/// Power series for `K₀` and `K₁`, used for `0 < x ≤ 2`.
fn bessel_k_series(x: f64) -> (f64, f64) {
    let y = 0.25 * x * x;
    let l = (0.5 * x).ln();
    // term_k = y^k / (k!)^2, harmonic H_k
    let mut term = 1.0;
    let mut h = 0.0;
    let mut i0 = 0.0;
    let mut s0 = 0.0;
    // K1 pieces: y^k/(k!(k+1)!) and ψ(k+1)+ψ(k+2) = 2H_k + 1/(k+1) − 2γ
    let mut i1s = 0.0;
    let mut s1 = 0.0;
    for k in 0..60 {
        let kf = k as f64;
        if k > 0 {
            term *= y / (kf * kf);
            h += 1.0 / kf;
        }
        let t1 = term / (kf + 1.0);
        i0 += term;
        s0 += h * term;
        i1s += t1;
        s1 += (2.0 * h + 1.0 / (kf + 1.0) - 2.0 * EULER_GAMMA) * t1;
        if term < 1e-18 * i0 {
            break;
        }
    }
    let k0 = -(l + EULER_GAMMA) * i0 + s0;
    let i1 = 0.5 * x * i1s;
    let k1 = 1.0 / x + l * i1 - 0.25 * x * s1;
    (k0, k1)
}

/// `e^x K_ν(x) = ∫₀^∞ e^{−x(cosh u − 1)} cosh(νu) du` for `ν ∈ {0, 1}` by
/// the trapezoid rule, which converges geometrically for this integrand.
fn bessel_k_scaled_integral(x: f64) -> (f64, f64) {
    let h = (0.5 / x.sqrt()).min(0.1);
    let mut s0 = 0.5;
    let mut s1 = 0.5;
    let mut k = 1;
    loop {
        let u = k as f64 * h;
        let e = x * (u.cosh() - 1.0);
        if e > 40.0 {
            break;
        }
        let v = (-e).exp();
        s0 += v;
        s1 += v * u.cosh();
        k += 1;
    }
    (h * s0, h * s1)
}

fn check_positive(x: f64) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return invalid(format!("Bessel K needs a finite x > 0, got {x}"));
    }
    Ok(())
}

/// `e^x K₀(x)`.
pub fn bessel_k0_scaled(x: f64) -> Result<f64> {
    check_positive(x)?;
    Ok(if x <= 2.0 { bessel_k_series(x).0 * x.exp() } else { bessel_k_scaled_integral(x).0 })
}

/// `e^x K₁(x)`.
pub fn bessel_k1_scaled(x: f64) -> Result<f64> {
    check_positive(x)?;
    Ok(if x <= 2.0 { bessel_k_series(x).1 * x.exp() } else { bessel_k_scaled_integral(x).1 })
}

/// Modified Bessel function of the second kind, order zero.
pub fn bessel_k0(x: f64) -> Result<f64> {
    check_positive(x)?;
    Ok(if x <= 2.0 { bessel_k_series(x).0 } else { bessel_k_scaled_integral(x).0 * (-x).exp() })
}

/// `K₁ = −K₀'`.
pub fn bessel_k1(x: f64) -> Result<f64> {
    check_positive(x)?;
    Ok(if x <= 2.0 { bessel_k_series(x).1 } else { bessel_k_scaled_integral(x).1 * (-x).exp() })
}

// ------------------------------------------------------------- elliptic K

fn agm(a0: Complex64, b0: Complex64) -> Complex64 {
    let (mut a, mut b) = (a0, b0);
    for _ in 0..100 {
        let an = 0.5 * (a + b);
        let mut bn = (a * b).sqrt();
        // "Right" choice of square root keeps the iteration on the optimal
        // branch.
        if (an - bn).norm() > (an + bn).norm() {
            bn = -bn;
        }
        a = an;
        b = bn;
        if (a - b).norm() <= 1e-16 * a.norm() {
            break;
        }
    }
    0.5 * (a + b)
}

/// `K(k)` as a function of the parameter `m = k²`.
pub fn elliptic_k_param(m: Complex64) -> Result<Complex64> {
    if m.im == 0.0 && m.re >= 1.0 {
        return invalid(format!("elliptic K: parameter {m} on the branch cut [1, ∞)"));
    }
    if !(m.re.is_finite() && m.im.is_finite()) {
        return invalid("elliptic K: non-finite parameter");
    }
    let kp = (Complex64::new(1.0, 0.0) - m).sqrt();
    Ok(PI / (2.0 * agm(Complex64::new(1.0, 0.0), kp)))
}

/// Complete elliptic integral of the first kind
/// `K(k) = ∫₀^{π/2} (1 − k² sin²θ)^{−1/2} dθ` (principal branch), by the
/// arithmetic–geometric mean.
pub fn elliptic_k(k: Complex64) -> Result<Complex64> {
    elliptic_k_param(k * k)
}

/// `K(k)` by adaptive quadrature of the defining integral; a second route
/// used to cross-check the AGM.
pub fn elliptic_k_quadrature(k: Complex64) -> Result<Complex64> {
    let m = k * k;
    if m.im == 0.0 && m.re >= 1.0 {
        return invalid(format!("elliptic K: k² = {m} on the branch cut [1, ∞)"));
    }
    let est = quad::integrate_complex(
        |th| (Complex64::new(1.0, 0.0) - m * th.sin().powi(2)).sqrt().inv(),
        0.0,
        0.5 * PI,
        1e-15,
        1e-14,
        20_000,
    )?;
    Ok(est.value)
}

// ------------------------------------------------------ theta and lambda

/// A point of the upper half plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfPlanePoint(Complex64);

impl HalfPlanePoint {
    pub fn new(tau: Complex64) -> Result<Self> {
        if !(tau.im > 0.0) || !tau.re.is_finite() || !tau.im.is_finite() {
            return invalid(format!("τ = {tau} is not in the upper half plane"));
        }
        Ok(Self(tau))
    }

    pub fn tau(&self) -> Complex64 {
        self.0
    }
}

/// Theta nulls `(θ₂, θ₃, θ₄)(0|τ)` with nome `q = e^{iπτ}`.
pub fn theta_nulls(tau: HalfPlanePoint) -> (Complex64, Complex64, Complex64) {
    let tau = tau.tau();
    let q14 = (I * PI * tau / 4.0).exp();
    let mut t2 = Complex64::new(0.0, 0.0);
    let mut t3 = Complex64::new(1.0, 0.0);
    let mut t4 = Complex64::new(1.0, 0.0);
    for n in 0..200 {
        let nf = n as f64;
        let a = (I * PI * tau * nf * (nf + 1.0)).exp();
        t2 += a;
        if n >= 1 {
            let b = (I * PI * tau * nf * nf).exp();
            t3 += 2.0 * b;
            t4 += if n % 2 == 1 { -2.0 * b } else { 2.0 * b };
            if b.norm() < 1e-17 && a.norm() < 1e-17 {
                break;
            }
        }
    }
    (2.0 * q14 * t2, t3, t4)
}

/// `λ(τ)` from the series `16q (Σ q^{n(n+1)})⁴ / θ₃⁴`, valid when `Im τ` is
/// not small.
fn lambda_series(tau: Complex64) -> Complex64 {
    let q = (I * PI * tau).exp();
    let mut s = Complex64::new(0.0, 0.0);
    let mut t3 = Complex64::new(1.0, 0.0);
    for n in 0..200 {
        let nf = n as f64;
        let a = (I * PI * tau * nf * (nf + 1.0)).exp();
        s += a;
        if n >= 1 {
            let b = (I * PI * tau * nf * nf).exp();
            t3 += 2.0 * b;
            if a.norm() < 1e-18 && b.norm() < 1e-18 {
                break;
            }
        }
    }
    16.0 * q * s.powi(4) / t3.powi(4)
}

#[derive(Clone, Copy)]
enum LambdaOp {
    /// `λ(τ + 1) = λ/(λ − 1)`.
    Shift,
    /// `λ(−1/τ) = 1 − λ`.
    Invert,
}

/// Modular lambda function `λ(τ) = θ₂⁴/θ₃⁴`.
///
/// `τ` is first moved into the `SL₂(ℤ)` fundamental domain, where the nome
/// is small, and the transformation laws are applied on the way back.
pub fn modular_lambda(tau: HalfPlanePoint) -> Complex64 {
    let mut t = tau.tau();
    let mut ops: Vec<LambdaOp> = Vec::new();
    for _ in 0..1000 {
        let n = t.re.round();
        if n != 0.0 {
            t -= n;
            if (n as i64).rem_euclid(2) == 1 {
                ops.push(LambdaOp::Shift);
            }
        }
        if t.norm_sqr() < 1.0 - 1e-15 {
            t = -1.0 / t;
            ops.push(LambdaOp::Invert);
        } else {
            break;
        }
    }
    let mut l = lambda_series(t);
    for op in ops.iter().rev() {
        l = match op {
            LambdaOp::Shift => l / (l - 1.0),
            LambdaOp::Invert => 1.0 - l,
        };
    }
    l
}

/// Integer Möbius transformation `τ ↦ (aτ + b)/(cτ + d)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mobius {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

impl Mobius {
    pub const IDENTITY: Mobius = Mobius { a: 1, b: 0, c: 0, d: 1 };

    pub fn apply(&self, z: Complex64) -> Complex64 {
        (self.a as f64 * z + self.b as f64) / (self.c as f64 * z + self.d as f64)
    }

    pub fn compose(&self, o: &Mobius) -> Mobius {
        Mobius {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }

    /// Inverse of a determinant-one matrix.
    pub fn inverse(&self) -> Mobius {
        Mobius { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }
}

/// Moves `τ` into `F = {|Re τ| ≤ 1, |τ ± 1/2| ≥ 1/2}`, the fundamental
/// domain of `Γ(2)`. Returns the reduced point and the element `M` with
/// `reduced = M·τ`.
pub fn reduce_gamma2(tau: Complex64) -> (Complex64, Mobius) {
    let mut t = tau;
    let mut m = Mobius::IDENTITY;
    for _ in 0..10_000 {
        let step = if t.re > 1.0 {
            let k = ((t.re + 1.0) / 2.0).floor() as i64;
            Mobius { a: 1, b: -2 * k.max(1), c: 0, d: 1 }
        } else if t.re < -1.0 {
            let k = ((1.0 - t.re) / 2.0).floor() as i64;
            Mobius { a: 1, b: 2 * k.max(1), c: 0, d: 1 }
        } else if (t + 0.5).norm() < 0.5 {
            Mobius { a: 1, b: 0, c: 2, d: 1 }
        } else if (t - 0.5).norm() < 0.5 {
            Mobius { a: 1, b: 0, c: -2, d: 1 }
        } else {
            break;
        };
        t = step.apply(t);
        m = step.compose(&m);
    }
    (t, m)
}

/// Argument of `cosh` in the hyperbolic distance, monotone in the distance.
pub fn hyperbolic_cosh_distance(a: Complex64, b: Complex64) -> f64 {
    1.0 + (a - b).norm_sqr() / (2.0 * a.im * b.im)
}

/// The `Γ(2)` image of `tau` closest (hyperbolically) to `reference`.
pub fn nearest_gamma2_image(tau: Complex64, reference: Complex64) -> Complex64 {
    let (tf, _) = reduce_gamma2(tau);
    let (_, mref) = reduce_gamma2(reference);
    let back = mref.inverse();
    let gens = [
        Mobius { a: 1, b: 2, c: 0, d: 1 },
        Mobius { a: 1, b: -2, c: 0, d: 1 },
        Mobius { a: 1, b: 0, c: 2, d: 1 },
        Mobius { a: 1, b: 0, c: -2, d: 1 },
    ];
    let mut words = vec![Mobius::IDENTITY];
    let mut frontier = vec![Mobius::IDENTITY];
    for _ in 0..3 {
        let mut next = Vec::new();
        for w in &frontier {
            for g in &gens {
                next.push(g.compose(w));
            }
        }
        words.extend(next.iter().copied());
        frontier = next;
    }
    let mut best = tf;
    let mut best_d = f64::INFINITY;
    for w in &words {
        let cand = back.compose(w).apply(tf);
        if !(cand.im > 0.0) {
            continue;
        }
        let d = hyperbolic_cosh_distance(cand, reference);
        if d < best_d - 1e-14 {
            best_d = d;
            best = cand;
        }
    }
    best
}

/// Inverse of the modular lambda function.
///
/// Starts from `τ₀ = i K(√(1−l)) / K(√l)`, polishes with Newton's method on
/// `λ(τ) − l`, and returns the representative in the `Γ(2)` fundamental
/// domain `{|Re τ| ≤ 1, |τ ± 1/2| ≥ 1/2}`. Callers tracking a continuous
/// branch use [`nearest_gamma2_image`].
pub fn inverse_modular_lambda(l: Complex64) -> Result<HalfPlanePoint> {
    if !(l.re.is_finite() && l.im.is_finite()) {
        return invalid("inverse lambda: non-finite input");
    }
    if l.norm() < 1e-300 || (l - 1.0).norm() < 1e-300 {
        return invalid(format!("inverse lambda: l = {l} is a cusp value"));
    }
    // Nudge inputs on a branch cut of either K so the starting point is
    // defined; Newton removes the bias.
    let nudge = |m: Complex64| if m.im == 0.0 { Complex64::new(m.re, 1e-300_f64.max(1e-15 * m.re.abs())) } else { m };
    let k1 = elliptic_k_param(nudge(1.0 - l))?;
    let k2 = elliptic_k_param(nudge(l))?;
    let mut tau = I * k1 / k2;
    if !(tau.im > 0.0) {
        tau = Complex64::new(tau.re, tau.im.abs().max(1e-3));
    }
    let scale = l.norm().min((1.0 - l).norm()).min(1.0);
    let resid = |t: Complex64| (modular_lambda(HalfPlanePoint(t)) - l).norm() / scale;
    let mut r = resid(tau);
    for _ in 0..100 {
        if r <= 1e-14 {
            break;
        }
        let h = 1e-6 * tau.im.min(1.0);
        let f = |t: Complex64| modular_lambda(HalfPlanePoint(t));
        let d = (f(tau + h) - f(tau - h)) / (2.0 * h);
        let step = (f(tau) - l) / d;
        let mut damp = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = tau - damp * step;
            if cand.im > 0.0 {
                let rc = resid(cand);
                if rc < r {
                    tau = cand;
                    r = rc;
                    accepted = true;
                    break;
                }
            }
            damp *= 0.5;
        }
        if !accepted || (damp * step).norm() <= 1e-16 * tau.norm() {
            break;
        }
    }
    if !(r <= 1e-10) {
        return numerical(format!("inverse lambda: Newton stalled at residual {r:e} for l = {l}"));
    }
    let (reduced, _) = reduce_gamma2(tau);
    HalfPlanePoint::new(reduced)
}

/// `Γ(x)` for real positive `x`.
pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// `K₀(x) = ∫₀^∞ e^{−x cosh u} du` by adaptive quadrature.
    fn k0_oracle(x: f64) -> f64 {
        let upper = (50.0 / x + 1.0).acosh() + 1.0;
        quad::integrate(|u| (-x * u.cosh()).exp(), 0.0, upper, 0.0, 1e-14, 10_000).unwrap().value
    }

    fn k1_oracle(x: f64) -> f64 {
        let upper = (50.0 / x + 1.0).acosh() + 1.0;
        quad::integrate(|u| (-x * u.cosh()).exp() * u.cosh(), 0.0, upper, 0.0, 1e-14, 10_000).unwrap().value
    }

    #[test]
    fn bessel_against_integral_oracle() {
        for &x in &[0.01, 0.3, 1.0, 1.99, 2.0, 2.01, 3.7, 10.0, 25.0, 60.0] {
            let (k0, k1) = (bessel_k0(x).unwrap(), bessel_k1(x).unwrap());
            let (o0, o1) = (k0_oracle(x), k1_oracle(x));
            assert!(((k0 - o0) / o0).abs() < 1e-12, "K0({x}) = {k0} vs {o0}");
            assert!(((k1 - o1) / o1).abs() < 1e-12, "K1({x}) = {k1} vs {o1}");
        }
        assert!((bessel_k0(1.0).unwrap() - 0.421_024_438_240_708_3).abs() < 1e-15);
        assert!((bessel_k0(10.0).unwrap() / 1.778_006_231_616_917e-5 - 1.0).abs() < 1e-12);
        let x = 50.0;
        let lead = bessel_k0(x).unwrap() * x.exp() * (2.0 * x / PI).sqrt();
        assert!((lead - 1.0).abs() < 0.01);
        assert!(bessel_k0(0.0).is_err());
        assert!(bessel_k0(-1.0).is_err());
    }

    #[test]
    fn elliptic_k_values() {
        assert_eq!(elliptic_k(c(0.0, 0.0)).unwrap(), c(PI / 2.0, 0.0));
        let k = elliptic_k(c(0.5f64.sqrt(), 0.0)).unwrap();
        assert!((k.re - 1.854_074_677_301_372).abs() < 1e-14 && k.im.abs() < 1e-15);
        let z = Complex64::from_polar(1.0, -PI / 6.0);
        let (a, b) = (elliptic_k(z).unwrap(), elliptic_k_quadrature(z).unwrap());
        assert!((a - b).norm() < 1e-10 * a.norm());
        assert!(elliptic_k(c(1.0, 0.0)).is_err());
        assert!(elliptic_k(c(2.0, 0.0)).is_err());
    }

    #[test]
    fn lambda_values() {
        let l = modular_lambda(HalfPlanePoint::new(I).unwrap());
        assert!((l - 0.5).norm() < 1e-12);
        assert!(modular_lambda(HalfPlanePoint::new(c(0.0, 5.0)).unwrap()).norm() < 1e-5);
        let rho = Complex64::from_polar(1.0, 2.0 * PI / 3.0);
        let l = modular_lambda(HalfPlanePoint::new(rho).unwrap());
        assert!((l - Complex64::from_polar(1.0, -PI / 3.0)).norm() < 1e-10);
    }

    #[test]
    fn inverse_lambda_special_points() {
        let t = inverse_modular_lambda(c(0.5, 0.0)).unwrap().tau();
        assert!((t - I).norm() < 1e-10, "{t}");
        let t = inverse_modular_lambda(Complex64::from_polar(1.0, -PI / 3.0)).unwrap().tau();
        let rho = Complex64::from_polar(1.0, 2.0 * PI / 3.0);
        assert!((nearest_gamma2_image(t, rho) - rho).norm() < 1e-9, "{t}");
        assert!(inverse_modular_lambda(c(0.0, 0.0)).is_err());
        assert!(inverse_modular_lambda(c(1.0, 0.0)).is_err());
    }

    #[test]
    fn reduction_lands_in_domain() {
        for tau in [c(3.3, 0.01), c(-0.49, 0.002), c(0.7, 0.1), c(-7.0, 2.0)] {
            let (r, m) = reduce_gamma2(tau);
            assert!(r.re.abs() <= 1.0 + 1e-12 && (r + 0.5).norm() >= 0.5 - 1e-12 && (r - 0.5).norm() >= 0.5 - 1e-12);
            assert!((m.apply(tau) - r).norm() < 1e-9 * r.norm().max(1.0));
            assert_eq!((m.a - 1).rem_euclid(2), 0);
            assert_eq!(m.c.rem_euclid(2), 0);
            let la = modular_lambda(HalfPlanePoint::new(tau).unwrap());
            let lb = modular_lambda(HalfPlanePoint::new(r).unwrap());
            assert!((la - lb).norm() < 1e-8 * la.norm().max(1.0), "{tau}: {la} vs {lb}");
        }
    }
}
