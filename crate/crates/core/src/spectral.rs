//! Ramification points of the spectral cover.
//!
//! The zeros of `ν̃` are the branch points of `λ² + ν = 0`. This module finds
//! them (Aberth iteration), checks the regular locus, predicts their
//! large-`t` positions and computes the local masses that set the decay
//! rate of the fiducial corrections.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::base::{tilde_nu, BasePoint, PoleKind, SpherePoint};
use crate::error::{invalid, numerical, Result};
use crate::poly::ComplexPolynomial;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const MAX_ITER: usize = 500;

/// Newton correction `p(z)/p'(z)`, evaluated through the reversed polynomial
/// when `|z| > 1` so that large roots do not overflow or lose precision.
fn newton_ratio(c: &[Complex64], z: Complex64) -> (Complex64, f64, f64) {
    let n = c.len() - 1;
    if z.norm() <= 1.0 {
        let mut p = c[n];
        let mut dp = ZERO;
        for k in (0..n).rev() {
            dp = dp * z + p;
            p = p * z + c[k];
        }
        let scale = c.iter().rev().fold(0.0, |acc, a| acc * z.norm() + a.norm());
        (p / dp, p.norm(), scale)
    } else {
        let w = 1.0 / z;
        // q(w) = Σ c_k w^{n−k}
        let mut q = c[0];
        let mut dq = ZERO;
        for k in 1..=n {
            dq = dq * w + q;
            q = q * w + c[k];
        }
        let scale = c.iter().fold(0.0, |acc, a| acc * w.norm() + a.norm());
        // p'/p = w (n − w q'/q)
        let inv = w * (n as f64 - w * dq / q);
        (1.0 / inv, q.norm(), scale)
    }
}

/// Initial guesses on circles read off the Newton polygon of `log|c_k|`.
fn initial_guesses(c: &[Complex64]) -> Vec<Complex64> {
    let n = c.len() - 1;
    let pts: Vec<(usize, f64)> =
        c.iter().enumerate().filter(|(_, a)| a.norm() > 0.0).map(|(k, a)| (k, a.norm().ln())).collect();
    // Upper convex hull.
    let mut hull: Vec<(usize, f64)> = Vec::new();
    for &p in &pts {
        while hull.len() >= 2 {
            let (k1, y1) = hull[hull.len() - 2];
            let (k2, y2) = hull[hull.len() - 1];
            let cross = (k2 as f64 - k1 as f64) * (p.1 - y1) - (y2 - y1) * (p.0 as f64 - k1 as f64);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let sigma = 0.7;
    let mut out = Vec::with_capacity(n);
    for seg in hull.windows(2) {
        let (k1, y1) = seg[0];
        let (k2, y2) = seg[1];
        let cnt = k2 - k1;
        let u = ((y1 - y2) / cnt as f64).exp();
        for j in 0..cnt {
            let ang = 2.0 * PI * j as f64 / cnt as f64 + 2.0 * PI * k1 as f64 / n as f64 + sigma;
            out.push(Complex64::from_polar(u, ang));
        }
    }
    out
}

/// All complex roots of `p` with multiplicity, in a reproducible order.
///
/// Exact zero roots (vanishing low coefficients) are split off first. Every
/// returned root satisfies `|p(z)| ≤ 1e−10 Σ|c_k||z|^k`.
pub fn find_roots(p: &ComplexPolynomial) -> Result<Vec<Complex64>> {
    if p.is_zero() {
        return invalid("find_roots: zero polynomial");
    }
    if p.degree() == 0 {
        return invalid("find_roots: constant polynomial has no roots");
    }
    let coeffs = &p.coefficients;
    if coeffs.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
        return invalid("find_roots: non-finite coefficient");
    }
    let nz = coeffs.iter().take_while(|c| **c == ZERO).count();
    let mut roots = vec![ZERO; nz];
    let c: Vec<Complex64> = coeffs[nz..].to_vec();
    let n = c.len() - 1;
    if n == 0 {
        return Ok(roots);
    }
    if n == 1 {
        roots.push(-c[0] / c[1]);
        return Ok(roots);
    }

    let mut z = initial_guesses(&c);
    let mut done = vec![false; n];
    let tol = 4.0 * f64::EPSILON * n as f64;
    for _ in 0..MAX_ITER {
        if done.iter().all(|&d| d) {
            break;
        }
        for i in 0..n {
            if done[i] {
                continue;
            }
            let (ratio, pv, scale) = newton_ratio(&c, z[i]);
            if pv <= tol * scale {
                done[i] = true;
                continue;
            }
            let mut s = ZERO;
            for j in 0..n {
                if j != i {
                    s += 1.0 / (z[i] - z[j]);
                }
            }
            let step = ratio / (1.0 - ratio * s);
            if step.re.is_finite() && step.im.is_finite() {
                z[i] -= step;
            }
            if step.norm() <= f64::EPSILON * z[i].norm() {
                done[i] = true;
            }
        }
    }
    // Newton polish, accepting only improvements.
    for zi in z.iter_mut() {
        for _ in 0..3 {
            let (ratio, pv, _) = newton_ratio(&c, *zi);
            let cand = *zi - ratio;
            if !(cand.re.is_finite() && cand.im.is_finite()) {
                break;
            }
            let (_, pc, _) = newton_ratio(&c, cand);
            if pc < pv {
                *zi = cand;
            } else {
                break;
            }
        }
    }
    for zi in &z {
        let (_, pv, scale) = newton_ratio(&c, *zi);
        if !(pv <= 1e-10 * scale) {
            return numerical(format!("find_roots: no convergence after {MAX_ITER} iterations (|p| = {pv:e} at {zi})"));
        }
    }
    roots.extend(z);
    Ok(roots)
}

/// Zeros of `ν̃` on the sphere: the finite roots plus the degree deficit as
/// roots at infinity.
pub fn spectral_roots(base: &BasePoint) -> Result<Vec<SpherePoint>> {
    let p = tilde_nu(base);
    let mut out: Vec<SpherePoint> =
        if p.degree() == 0 { Vec::new() } else { find_roots(&p)?.into_iter().map(SpherePoint::Finite).collect() };
    let deficit = base.roots_at_infinity(&p);
    out.extend(std::iter::repeat_n(SpherePoint::Infinity, deficit));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RootClass {
    MovingZero,
    TameCenter,
    TwistedCenter,
}

impl RootClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            RootClass::MovingZero => "moving-zero",
            RootClass::TameCenter => "tame-center",
            RootClass::TwistedCenter => "twisted-center",
        }
    }
}

/// Outcome of the regular-locus test.
#[derive(Debug, Clone, Serialize)]
pub struct RegularityReport {
    pub regular: bool,
    pub min_separation: f64,
    pub tolerance: f64,
    pub violations: Vec<String>,
}

/// Separation tolerance `1e−8 · max(1, |ν_{N−4}|^{1/4})`.
pub fn separation_tolerance(base: &BasePoint) -> f64 {
    1e-8 * base.top_coefficient().norm().powf(0.25).max(1.0)
}

/// Checks that `ν̃` has only simple zeros and that zeros sit on poles only
/// where the divisor forces them.
pub fn classify_regular(base: &BasePoint, roots: &[SpherePoint]) -> RegularityReport {
    let tol = separation_tolerance(base);
    let mut violations = Vec::new();
    let n = base.n();
    if roots.len() != 2 * n - 4 {
        violations.push(format!("expected {} roots, got {}", 2 * n - 4, roots.len()));
    }
    let finite: Vec<Complex64> = roots.iter().filter_map(|r| r.finite()).collect();
    let n_inf = roots.len() - finite.len();
    let p = tilde_nu(base);
    if p.degree() == 0 {
        violations.push("ν̃ is constant (degree collapse)".to_string());
    }
    let mut min_sep = f64::INFINITY;
    for i in 0..finite.len() {
        for j in (i + 1)..finite.len() {
            let d = (finite[i] - finite[j]).norm();
            min_sep = min_sep.min(d);
            if d <= tol {
                violations.push(format!("roots {} and {} coincide (distance {d:e})", finite[i], finite[j]));
            }
        }
    }
    let div = &base.divisor;
    let inf_pole = div.infinity_index().map(|i| &div.poles[i]);
    let forced_inf = inf_pole.map(|p| p.has_forced_root()).unwrap_or(false) as usize;
    if n_inf > forced_inf {
        violations.push(format!("{n_inf} roots at infinity, at most {forced_inf} allowed"));
    } else if n_inf < forced_inf {
        violations.push("missing forced root at infinity".to_string());
    }
    for (i, pole) in div.poles.iter().enumerate() {
        let Some(x) = pole.location.finite() else { continue };
        let hits = finite.iter().filter(|r| (**r - x).norm() <= tol.max(1e-10 * (1.0 + x.norm()))).count();
        if pole.has_forced_root() {
            if hits != 1 {
                violations.push(format!("pole {i} at {x}: {hits} roots at a forced center, expected 1"));
            }
        } else if hits > 0 {
            violations.push(format!("root on pole {i} at {x}"));
        }
    }
    RegularityReport { regular: violations.is_empty(), min_separation: min_sep, tolerance: tol, violations }
}

/// One predicted zero of `ν̃` at large `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootPrediction {
    /// Pole whose cluster the zero belongs to.
    pub pole: usize,
    pub value: SpherePoint,
    /// Cluster size `j` (the zero scales like `t^{∓1/j}`); 0 for forced zeros.
    pub cluster: u32,
    pub forced: bool,
}

/// Leading-order positions of all `2N − 4` zeros of `ν̃` as the top free
/// coefficient grows.
///
/// Each pole `x` carries a cluster of zeros solving
/// `(z − x)^j = −μ / ν_{N−4} · x^{4−N} ∏_{y ≠ x} (x − y)^{m_y}` (or
/// `w^j = −μ/ν_{N−4}` at infinity), with `μ` the leading coefficient and `j`
/// its cluster size. Twisted and parabolic centers contribute the fixed zero
/// `z = x`. All `j`-th roots are enumerated from the principal one.
pub fn root_asymptotics(base: &BasePoint) -> Result<Vec<RootPrediction>> {
    let top = base.top_coefficient();
    if top == ZERO {
        return invalid("root asymptotics need ν_{N-4} ≠ 0");
    }
    let div = &base.divisor;
    let n = base.n() as i32;
    let designated = div.designated_pole();
    if n > 4 {
        if let Some(d) = designated {
            if div.poles[d].location != SpherePoint::Finite(ZERO) {
                return invalid("for N > 4 the designated irregular pole must sit at z = 0");
            }
        }
    }
    let mut out = Vec::new();
    for (i, p) in div.poles.iter().enumerate() {
        let m = p.order;
        let (mu, j) = match p.kind {
            PoleKind::Untwisted => (p.mu_at(2 * m), m),
            PoleKind::Twisted => (p.mu_at(2 * m - 1), m - 1),
            PoleKind::Tame => (p.mu_at(2), 1),
        };
        let j = if Some(i) == designated { j + n as u32 - 4 } else { j };
        if p.has_forced_root() {
            out.push(RootPrediction { pole: i, value: p.location, cluster: 0, forced: true });
        }
        if mu == ZERO {
            continue;
        }
        match p.location {
            SpherePoint::Finite(x) => {
                let mut rhs = -mu / top;
                if x != ZERO {
                    rhs *= x.powi(4 - n);
                }
                for (k, q) in div.poles.iter().enumerate() {
                    if k == i {
                        continue;
                    }
                    if let Some(y) = q.location.finite() {
                        rhs *= (x - y).powu(q.order);
                    }
                }
                for r in nth_roots(rhs, j) {
                    out.push(RootPrediction { pole: i, value: SpherePoint::Finite(x + r), cluster: j, forced: false });
                }
            }
            SpherePoint::Infinity => {
                for w in nth_roots(-mu / top, j) {
                    out.push(RootPrediction {
                        pole: i,
                        value: SpherePoint::Finite(1.0 / w),
                        cluster: j,
                        forced: false,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// The `j` values of `a^{1/j}`, principal branch first.
pub fn nth_roots(a: Complex64, j: u32) -> Vec<Complex64> {
    let principal = a.powf(1.0 / j as f64);
    (0..j).map(|k| principal * Complex64::from_polar(1.0, 2.0 * PI * k as f64 / j as f64)).collect()
}

/// Assigns each prediction to a distinct root by increasing chordal
/// distance. Returns `assignment[p] = root index`.
///
/// Fails when two candidate pairs for the same prediction are equidistant
/// (to 1e−12 relative) or when fewer roots than predictions exist.
pub fn match_roots(roots: &[SpherePoint], predictions: &[SpherePoint]) -> Result<Vec<usize>> {
    if roots.len() < predictions.len() {
        return invalid(format!("{} predictions for {} roots", predictions.len(), roots.len()));
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (p, pv) in predictions.iter().enumerate() {
        for (r, rv) in roots.iter().enumerate() {
            pairs.push((pv.chordal_distance(rv), p, r));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut assigned = vec![usize::MAX; predictions.len()];
    let mut used = vec![false; roots.len()];
    for (d, p, r) in &pairs {
        if assigned[*p] != usize::MAX || used[*r] {
            continue;
        }
        // A competing free root at the same distance makes the choice ambiguous.
        let tie = pairs.iter().any(|(d2, p2, r2)| {
            p2 == p && r2 != r && !used[*r2] && (d2 - d).abs() <= 1e-12 * d.max(1e-300) && roots[*r2] != roots[*r]
        });
        if tie {
            return invalid(format!("ambiguous root matching for prediction {p}"));
        }
        assigned[*p] = *r;
        used[*r] = true;
    }
    Ok(assigned)
}

/// One zero of `ν̃` with its classification and local mass.
#[derive(Debug, Clone, Serialize)]
pub struct RootRecord {
    pub value: SpherePoint,
    pub class: RootClass,
    pub local_mass: f64,
    pub predicted: Option<SpherePoint>,
    /// Pole the zero is attached to (the center, or the cluster it belongs to).
    pub pole: Option<usize>,
    /// Size `j` of the zero's cluster (it moves like `t^{∓1/j}`).
    pub cluster: Option<u32>,
}

impl RootRecord {
    /// Chordal distance to the prediction, when one exists.
    pub fn prediction_error(&self) -> Option<f64> {
        self.predicted.map(|p| p.chordal_distance(&self.value))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RamificationData {
    pub roots: Vec<RootRecord>,
}

/// `|∏ a_k|` in log space.
fn log_abs_product(it: impl Iterator<Item = Complex64>) -> f64 {
    it.map(|a| a.norm().ln()).sum()
}

/// Local masses at every zero.
///
/// With `ν̃ = c ∏(z − z_k)`, the mass at a zero `z₀` of multiplicity one in
/// `(z − z₀)^e ν` (`e = −1` moving, `e = 2m − 1` at a twisted center,
/// `e = 1` at a parabolic one) is the square root of
/// `|c ∏_{k≠0}(z₀ − z_k)| / ∏_x |z₀ − x|^{2m_x}` with the factor at `z₀`
/// itself removed. Points with `|z₀| > 1` are measured in `w = 1/z`, which
/// multiplies the mass by `|z₀|^{2−e}`; a center at infinity has mass
/// `|c|^{1/2}`.
pub fn local_masses(base: &BasePoint, roots: &[SpherePoint]) -> Result<RamificationData> {
    let report = classify_regular(base, roots);
    if !report.regular {
        return invalid(format!("not in the regular locus: {}", report.violations.join("; ")));
    }
    let div = &base.divisor;
    let p = tilde_nu(base);
    let lead = p.leading();
    let mut values: Vec<SpherePoint> = roots.to_vec();
    let mut center_of: Vec<Option<usize>> = vec![None; values.len()];
    // Snap forced zeros onto their poles.
    for (i, pole) in div.poles.iter().enumerate() {
        if !pole.has_forced_root() {
            continue;
        }
        let k = (0..values.len())
            .filter(|&k| center_of[k].is_none())
            .min_by(|&a, &b| {
                values[a].chordal_distance(&pole.location).total_cmp(&values[b].chordal_distance(&pole.location))
            })
            .ok_or_else(|| crate::Error::InvalidInput("no root for a forced center".into()))?;
        values[k] = pole.location;
        center_of[k] = Some(i);
    }
    let finite: Vec<(usize, Complex64)> =
        values.iter().enumerate().filter_map(|(k, v)| v.finite().map(|z| (k, z))).collect();

    let predictions = root_asymptotics(base).ok();
    let moving_preds: Vec<SpherePoint> =
        predictions.as_ref().map(|ps| ps.iter().filter(|p| !p.forced).map(|p| p.value).collect()).unwrap_or_default();
    let moving_pole: Vec<(usize, u32)> = predictions
        .as_ref()
        .map(|ps| ps.iter().filter(|p| !p.forced).map(|p| (p.pole, p.cluster)).collect())
        .unwrap_or_default();
    let moving_idx: Vec<usize> = (0..values.len()).filter(|&k| center_of[k].is_none()).collect();
    let moving_vals: Vec<SpherePoint> = moving_idx.iter().map(|&k| values[k]).collect();
    let assignment = if moving_preds.len() == moving_vals.len() && !moving_preds.is_empty() {
        match_roots(&moving_vals, &moving_preds).ok()
    } else {
        None
    };

    let mut records = Vec::with_capacity(values.len());
    for k in 0..values.len() {
        let v = values[k];
        let (class, e) = match center_of[k] {
            None => (RootClass::MovingZero, -1i32),
            Some(i) => match div.poles[i].kind {
                PoleKind::Twisted => (RootClass::TwistedCenter, 2 * div.poles[i].order as i32 - 1),
                _ => (RootClass::TameCenter, 1),
            },
        };
        let mass = match v {
            SpherePoint::Infinity => lead.norm().sqrt(),
            SpherePoint::Finite(z0) => {
                let num =
                    lead.norm().ln() + log_abs_product(finite.iter().filter(|(j, _)| *j != k).map(|(_, zj)| z0 - zj));
                let den = log_abs_product(div.poles.iter().enumerate().filter_map(|(i, q)| {
                    if center_of[k] == Some(i) {
                        return None;
                    }
                    q.location.finite().map(|x| (z0 - x).powu(2 * q.order))
                }));
                let mut log_l2 = num - den;
                if z0.norm() > 1.0 {
                    log_l2 += (4 - 2 * e) as f64 * z0.norm().ln();
                }
                (0.5 * log_l2).exp()
            }
        };
        if !(mass > 0.0 && mass.is_finite()) {
            return numerical(format!("local mass at {v:?} is {mass}"));
        }
        let (predicted, pole, cluster) = match center_of[k] {
            Some(i) => (Some(div.poles[i].location), Some(i), None),
            None => match &assignment {
                Some(a) => {
                    let slot = moving_idx.iter().position(|&m| m == k).unwrap();
                    match a.iter().position(|&r| r == slot) {
                        Some(pidx) => {
                            let (pole, j) = moving_pole[pidx];
                            (Some(moving_preds[pidx]), Some(pole), Some(j))
                        }
                        None => (None, None, None),
                    }
                }
                None => (None, None, None),
            },
        };
        records.push(RootRecord { value: v, class, local_mass: mass, predicted, pole, cluster });
    }
    Ok(RamificationData { roots: records })
}

impl RamificationData {
    /// CSV rows `(t, root re, root im, class, λ, prediction error)`; a zero at
    /// infinity is written as `inf, 0`.
    pub fn write_csv<W: Write>(&self, t: f64, writer: W, header: bool) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        let io = |e: csv::Error| crate::Error::Io(std::io::Error::other(e.to_string()));
        if header {
            w.write_record(["t", "root_re", "root_im", "class", "local_mass", "prediction_error_chordal"])
                .map_err(io)?;
        }
        let f = |x: f64| format!("{x:.16e}");
        for r in &self.roots {
            let (re, im) = match r.value {
                SpherePoint::Finite(z) => (f(z.re), f(z.im)),
                SpherePoint::Infinity => ("inf".to_string(), f(0.0)),
            };
            let err = r.prediction_error().map(f).unwrap_or_default();
            w.write_record([f(t), re, im, r.class.as_str().to_string(), f(r.local_mass), err]).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::{family_point, IrregularDivisor, PoleDatum};
    use crate::poly::Chart;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn contains(roots: &[Complex64], z: Complex64, tol: f64) -> bool {
        roots.iter().any(|r| (r - z).norm() <= tol)
    }

    #[test]
    fn quartic_roots() {
        let p = ComplexPolynomial::from_real(&[-1.0, 0.0, 0.0, 0.0, 16.0], Chart::Z);
        let r = find_roots(&p).unwrap();
        assert_eq!(r.len(), 4);
        for z in [c(0.5, 0.0), c(0.0, 0.5), c(-0.5, 0.0), c(0.0, -0.5)] {
            assert!(contains(&r, z, 1e-14), "{z} not in {r:?}");
        }
    }

    #[test]
    fn quadratic_and_zero_roots() {
        let p = ComplexPolynomial::from_real(&[2.0, -3.0, 1.0], Chart::Z);
        let r = find_roots(&p).unwrap();
        assert!(contains(&r, c(1.0, 0.0), 1e-14) && contains(&r, c(2.0, 0.0), 1e-14));
        let p = ComplexPolynomial::from_real(&[0.0, 0.0, 1.0, 1.0], Chart::Z);
        let r = find_roots(&p).unwrap();
        assert_eq!(&r[..2], &[ZERO, ZERO]);
        assert!(contains(&r, c(-1.0, 0.0), 1e-15));
        assert!(find_roots(&ComplexPolynomial::from_real(&[0.0], Chart::Z)).is_err());
    }

    #[test]
    fn widely_scaled_roots() {
        let roots = [c(1e-6, 0.0), c(-1e-6, 0.0), c(3.0, 1.0), c(1e6, 2.0), c(0.0, -1e5)];
        let p = ComplexPolynomial::from_roots(c(1.0, 0.0), &roots, Chart::Z);
        let r = find_roots(&p).unwrap();
        for z in roots {
            assert!(contains(&r, z, 1e-9 * z.norm()), "{z} missing from {r:?}");
        }
    }

    fn u4(mu7: f64) -> IrregularDivisor {
        IrregularDivisor::new(vec![PoleDatum::untwisted(
            SpherePoint::Finite(ZERO),
            vec![c(0.0, 0.0), c(0.0, 0.0), c(mu7, 0.0), c(-1.0, 0.0)],
        )])
        .unwrap()
    }

    #[test]
    fn u4_regular_and_masses() {
        let t = 1e4;
        let b = family_point(&u4(0.0), &[c(1.0, 0.0)], c(t, 0.0)).unwrap();
        let roots = spectral_roots(&b).unwrap();
        assert!(classify_regular(&b, &roots).regular);
        let data = local_masses(&b, &roots).unwrap();
        for r in &data.roots {
            assert_eq!(r.class, RootClass::MovingZero);
            let rel = (r.local_mass - 2.0 * t.powf(9.0 / 8.0)).abs() / (2.0 * t.powf(9.0 / 8.0));
            assert!(rel < 1e-12, "mass {}", r.local_mass);
            assert!(r.prediction_error().unwrap() < 1e-14);
        }
        let b0 = family_point(&u4(0.0), &[c(1.0, 0.0)], ZERO).unwrap();
        assert!(!classify_regular(&b0, &spectral_roots(&b0).unwrap()).regular);
    }

    #[test]
    fn mass_homogeneity() {
        // ν → s²ν multiplies every mass by |s|.
        let s2 = 9.0;
        let mk = |scale: f64| {
            let d = IrregularDivisor::new(vec![PoleDatum::untwisted(
                SpherePoint::Finite(ZERO),
                vec![c(0.0, 0.0), c(0.0, 0.0), c(scale, 0.0), c(-scale, 0.0)],
            )])
            .unwrap();
            let b = family_point(&d, &[c(scale, 0.0)], c(300.0, 0.0)).unwrap();
            local_masses(&b, &spectral_roots(&b).unwrap()).unwrap()
        };
        let a = mk(1.0);
        let b = mk(s2);
        for (x, y) in a.roots.iter().zip(&b.roots) {
            assert!((y.local_mass / x.local_mass - 3.0).abs() < 1e-10);
        }
    }

    #[test]
    fn matching_rejects_ties() {
        let roots = [SpherePoint::Finite(c(1.0, 0.0)), SpherePoint::Finite(c(-1.0, 0.0))];
        assert!(match_roots(&roots, &[SpherePoint::Finite(ZERO)]).is_err());
        let a = match_roots(&roots, &[SpherePoint::Finite(c(-0.9, 0.0)), SpherePoint::Finite(c(0.8, 0.0))]).unwrap();
        assert_eq!(a, vec![1, 0]);
    }
}
