//! Irregular divisors on the Riemann sphere and the affine Hitchin base.
//!
//! A base point is a meromorphic quadratic differential `ν(z) dz²` with
//! prescribed principal parts at the poles plus `N − 3` free coefficients.
//! Everything downstream consumes the cleared polynomial
//! `ν̃(z) = ∏_{finite x} (z − x)^{2m_x} ν(z)`, which is assembled here in
//! exact rational arithmetic (every finite `f64` is a dyadic rational) and
//! rounded once at the end.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_complex::{Complex, Complex64};
use num_rational::{BigRational, Ratio};
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Result};
use crate::poly::{self, Chart, ComplexPolynomial};

/// Exact complex rational scalar.
pub type ExactComplex = Complex<BigRational>;

/// A point of the Riemann sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpherePoint {
    Finite(Complex64),
    Infinity,
}

impl SpherePoint {
    pub fn finite(&self) -> Option<Complex64> {
        match self {
            SpherePoint::Finite(z) => Some(*z),
            SpherePoint::Infinity => None,
        }
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self, SpherePoint::Infinity)
    }

    /// Chordal distance on the unit-diameter sphere, in `[0, 1]`.
    pub fn chordal_distance(&self, other: &SpherePoint) -> f64 {
        match (self, other) {
            (SpherePoint::Infinity, SpherePoint::Infinity) => 0.0,
            (SpherePoint::Finite(a), SpherePoint::Infinity) | (SpherePoint::Infinity, SpherePoint::Finite(a)) => {
                1.0 / (1.0 + a.norm_sqr()).sqrt()
            }
            (SpherePoint::Finite(a), SpherePoint::Finite(b)) => {
                (a - b).norm() / ((1.0 + a.norm_sqr()).sqrt() * (1.0 + b.norm_sqr()).sqrt())
            }
        }
    }

    /// Lexicographic order: finite points by (re, im), infinity last.
    pub fn lex_cmp(&self, other: &SpherePoint) -> Ordering {
        match (self, other) {
            (SpherePoint::Infinity, SpherePoint::Infinity) => Ordering::Equal,
            (SpherePoint::Infinity, _) => Ordering::Greater,
            (_, SpherePoint::Infinity) => Ordering::Less,
            (SpherePoint::Finite(a), SpherePoint::Finite(b)) => a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)),
        }
    }
}

impl Serialize for SpherePoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SpherePoint::Finite(z) => [z.re, z.im].serialize(s),
            SpherePoint::Infinity => s.serialize_str("infinity"),
        }
    }
}

impl<'de> Deserialize<'de> for SpherePoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Pair([f64; 2]),
            Tag(String),
        }
        match Repr::deserialize(d)? {
            Repr::Pair([re, im]) => Ok(SpherePoint::Finite(Complex64::new(re, im))),
            Repr::Tag(t) if t == "infinity" || t == "inf" => Ok(SpherePoint::Infinity),
            Repr::Tag(t) => Err(serde::de::Error::custom(format!("expected [re, im] or \"infinity\", got {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoleKind {
    Untwisted,
    Twisted,
    Tame,
}

/// One pole of the divisor.
///
/// `mu[i]` is the coefficient `μ_{x, m+1+i}`, so `mu` has `m` entries for an
/// irregular pole. A tame pole normally carries no `μ`; a single entry is
/// accepted as the (weakly parabolic) double-pole coefficient `μ_{x,2}`,
/// which some four-dimensional families keep as a free parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoleDatum {
    pub location: SpherePoint,
    pub order: u32,
    pub kind: PoleKind,
    #[serde(default)]
    pub mu: Vec<Complex64>,
    pub weights: (f64, f64),
}

impl PoleDatum {
    pub fn untwisted(location: SpherePoint, mu: Vec<Complex64>) -> Self {
        let order = mu.len() as u32;
        Self { location, order, kind: PoleKind::Untwisted, mu, weights: (0.25, 0.75) }
    }

    pub fn twisted(location: SpherePoint, mu: Vec<Complex64>) -> Self {
        let order = mu.len() as u32;
        Self { location, order, kind: PoleKind::Twisted, mu, weights: (0.25, 0.75) }
    }

    pub fn tame(location: SpherePoint, mu2: Option<Complex64>, weights: (f64, f64)) -> Self {
        Self { location, order: 1, kind: PoleKind::Tame, mu: mu2.into_iter().collect(), weights }
    }

    /// `μ_{x,a}`, zero when not stored.
    pub fn mu_at(&self, a: u32) -> Complex64 {
        let m = self.order;
        if a <= m || a > 2 * m {
            return Complex64::new(0.0, 0.0);
        }
        self.mu.get((a - m - 1) as usize).copied().unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn is_irregular(&self) -> bool {
        self.kind != PoleKind::Tame
    }

    /// Tame pole with a non-zero double-pole coefficient.
    pub fn is_weakly_parabolic(&self) -> bool {
        self.kind == PoleKind::Tame && self.mu.iter().any(|m| *m != Complex64::new(0.0, 0.0))
    }

    /// Whether `ν̃` is forced to vanish at this pole for every base point.
    pub fn has_forced_root(&self) -> bool {
        match self.kind {
            PoleKind::Twisted => true,
            PoleKind::Tame => !self.is_weakly_parabolic(),
            PoleKind::Untwisted => false,
        }
    }
}

/// Irregular divisor `D = Σ m_x x` with its local data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IrregularDivisor {
    pub poles: Vec<PoleDatum>,
}

impl IrregularDivisor {
    pub fn new(poles: Vec<PoleDatum>) -> Result<Self> {
        let d = Self { poles };
        d.validate()?;
        Ok(d)
    }

    /// `N = Σ m_x`.
    pub fn degree(&self) -> u32 {
        self.poles.iter().map(|p| p.order).sum()
    }

    pub fn infinity_index(&self) -> Option<usize> {
        self.poles.iter().position(|p| p.location.is_infinity())
    }

    pub fn finite_indices(&self) -> Vec<usize> {
        (0..self.poles.len()).filter(|&i| !self.poles[i].location.is_infinity()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.degree();
        if n < 4 {
            return invalid(format!("degenerate divisor: N = {n} < 4"));
        }
        if !self.poles.iter().any(|p| p.order > 1) {
            return invalid("divisor has no irregular pole (I is empty)");
        }
        for (i, p) in self.poles.iter().enumerate() {
            if let SpherePoint::Finite(z) = p.location {
                if !(z.re.is_finite() && z.im.is_finite()) {
                    return invalid(format!("pole {i}: non-finite location"));
                }
            }
            for (j, q) in self.poles.iter().enumerate().skip(i + 1) {
                if p.location.chordal_distance(&q.location) == 0.0 {
                    return invalid(format!("poles {i} and {j} share a location"));
                }
            }
            let (a1, a2) = p.weights;
            if (a1 + a2 - 1.0).abs() > 1e-12 || !(a2 > 0.5 && a2 < 1.0) {
                return invalid(format!("pole {i}: weights must satisfy α1+α2=1, 1/2<α2<1"));
            }
            let m = p.order;
            match p.kind {
                PoleKind::Untwisted => {
                    if m < 2 || p.mu.len() != m as usize {
                        return invalid(format!("pole {i}: untwisted pole needs order ≥ 2 and {m} μ entries"));
                    }
                    if p.mu_at(2 * m) == Complex64::new(0.0, 0.0) {
                        return invalid(format!("pole {i}: untwisted pole needs μ_{{2m}} ≠ 0"));
                    }
                }
                PoleKind::Twisted => {
                    if m < 2 || p.mu.len() != m as usize {
                        return invalid(format!("pole {i}: twisted pole needs order ≥ 2 and {m} μ entries"));
                    }
                    if p.mu_at(2 * m) != Complex64::new(0.0, 0.0) {
                        return invalid(format!("pole {i}: twisted pole needs μ_{{2m}} = 0"));
                    }
                    if p.mu_at(2 * m - 1) == Complex64::new(0.0, 0.0) {
                        return invalid(format!("pole {i}: twisted pole with μ_{{2m-1}} = 0"));
                    }
                    if p.weights != (0.25, 0.75) {
                        return invalid(format!("pole {i}: twisted pole weights must be (1/4, 3/4)"));
                    }
                }
                PoleKind::Tame => {
                    if m != 1 || p.mu.len() > 1 {
                        return invalid(format!("pole {i}: tame pole must be simple with at most one μ"));
                    }
                }
            }
        }
        // A weakly parabolic finite tame pole contributes w^{-2} dw^2 at
        // infinity, which is only harmless below the principal part of an
        // irregular pole of order ≥ 2 there.
        let inf_order = self.infinity_index().map(|i| self.poles[i].order).unwrap_or(0);
        for (i, p) in self.poles.iter().enumerate() {
            if p.is_weakly_parabolic() && !p.location.is_infinity() && inf_order < 2 {
                return invalid(format!(
                    "pole {i}: a double-pole coefficient at a finite tame pole needs an irregular pole at infinity"
                ));
            }
        }
        Ok(())
    }

    /// Pole playing the role of "the pole at 0": untwisted if any, else
    /// twisted; the one located at 0 when possible, else the
    /// lexicographically smallest.
    pub fn designated_pole(&self) -> Option<usize> {
        let pick = |kind: PoleKind| -> Option<usize> {
            let cands: Vec<usize> = (0..self.poles.len()).filter(|&i| self.poles[i].kind == kind).collect();
            if let Some(&i) =
                cands.iter().find(|&&i| self.poles[i].location == SpherePoint::Finite(Complex64::new(0.0, 0.0)))
            {
                return Some(i);
            }
            cands.into_iter().min_by(|&a, &b| self.poles[a].location.lex_cmp(&self.poles[b].location))
        };
        pick(PoleKind::Untwisted).or_else(|| pick(PoleKind::Twisted))
    }

    /// Poles that need an auxiliary point `y_x` in the expansion: order-2
    /// poles, and a weakly parabolic pole at infinity.
    fn needs_auxiliary(&self, i: usize) -> bool {
        let p = &self.poles[i];
        p.order == 2 || (p.location.is_infinity() && p.is_weakly_parabolic())
    }

    /// Default `y_x`: the lexicographically smallest admissible other pole.
    pub fn default_y_choices(&self) -> BTreeMap<usize, usize> {
        let mut order: Vec<usize> = (0..self.poles.len()).collect();
        order.sort_by(|&a, &b| self.poles[a].location.lex_cmp(&self.poles[b].location));
        let mut out = BTreeMap::new();
        for i in 0..self.poles.len() {
            if !self.needs_auxiliary(i) {
                continue;
            }
            let x_inf = self.poles[i].location.is_infinity();
            let y = order.iter().copied().find(|&j| {
                j != i
                    && (!x_inf || !self.poles[j].location.is_infinity())
                    && (!(x_inf && self.poles[i].order == 1) || self.poles[j].order >= 2)
            });
            if let Some(y) = y {
                out.insert(i, y);
            }
        }
        out
    }
}

/// A point `ν` of the Hitchin base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasePoint {
    pub divisor: IrregularDivisor,
    /// `ν_0, …, ν_{N−4}` (already multiplied by their scalings).
    pub free_coeffs: Vec<Complex64>,
    /// Auxiliary point for each pole that needs one (pole index → pole index).
    pub y_choices: BTreeMap<usize, usize>,
}

/// Builds a base point; `scalings[b]` multiplies `free_coeffs[b]`.
pub fn build_base_point(divisor: IrregularDivisor, free_coeffs: &[Complex64], scalings: &[f64]) -> Result<BasePoint> {
    divisor.validate()?;
    let n = divisor.degree() as usize;
    if free_coeffs.len() != n - 3 {
        return invalid(format!("expected {} free coefficients, got {}", n - 3, free_coeffs.len()));
    }
    if scalings.len() != free_coeffs.len() {
        return invalid(format!("expected {} scalings, got {}", free_coeffs.len(), scalings.len()));
    }
    if scalings.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return invalid("scalings must be positive and finite");
    }
    let free = free_coeffs.iter().zip(scalings).map(|(c, s)| c * s).collect();
    let y_choices = divisor.default_y_choices();
    let bp = BasePoint { divisor, free_coeffs: free, y_choices };
    bp.validate()?;
    Ok(bp)
}

/// The curve `ν_t`: `template` with its top coefficient `ν_{N−4}` multiplied
/// by `t` (the default scaling `f_{N−4}(t) = t`, all others identity).
pub fn family_point(divisor: &IrregularDivisor, template: &[Complex64], t: Complex64) -> Result<BasePoint> {
    let mut free = template.to_vec();
    if let Some(last) = free.last_mut() {
        *last *= t;
    }
    let ones = vec![1.0; free.len()];
    build_base_point(divisor.clone(), &free, &ones)
}

impl BasePoint {
    pub fn validate(&self) -> Result<()> {
        self.divisor.validate()?;
        let n = self.divisor.degree() as usize;
        if self.free_coeffs.len() != n - 3 {
            return invalid(format!("expected {} free coefficients, got {}", n - 3, self.free_coeffs.len()));
        }
        for i in 0..self.divisor.poles.len() {
            if self.divisor.needs_auxiliary(i) {
                let Some(&y) = self.y_choices.get(&i) else {
                    return invalid(format!("pole {i} needs an auxiliary point y_x"));
                };
                if y == i || y >= self.divisor.poles.len() {
                    return invalid(format!("pole {i}: bad auxiliary point {y}"));
                }
                let px = &self.divisor.poles[i];
                let py = &self.divisor.poles[y];
                if px.location.is_infinity() && py.location.is_infinity() {
                    return invalid(format!("pole {i}: auxiliary point must differ from it"));
                }
                if px.location.is_infinity() && px.order == 1 && py.order < 2 {
                    return invalid(format!("pole {i}: auxiliary point must be an irregular pole"));
                }
            }
        }
        Ok(())
    }

    /// `N`.
    pub fn n(&self) -> usize {
        self.divisor.degree() as usize
    }

    /// Top free coefficient `ν_{N−4}` (the one carrying `t`).
    pub fn top_coefficient(&self) -> Complex64 {
        *self.free_coeffs.last().unwrap()
    }

    /// `∏_{finite x} (z − x)^{2m_x}`.
    pub fn pole_factor(&self, z: Complex64) -> Complex64 {
        self.divisor.poles.iter().filter_map(|p| p.location.finite().map(|x| (z - x).powu(2 * p.order))).product()
    }

    /// `ν(z)` at a finite non-pole point.
    pub fn nu(&self, z: Complex64) -> Complex64 {
        tilde_nu(self).eval(z) / self.pole_factor(z)
    }

    /// Number of zeros of `ν̃` at infinity (degree deficit in the z-chart).
    pub fn roots_at_infinity(&self, p: &ComplexPolynomial) -> usize {
        (2 * self.n() - 4).saturating_sub(p.degree())
    }
}

fn exact(z: Complex64) -> ExactComplex {
    let conv = |x: f64| BigRational::from_float(x).expect("finite float");
    Complex::new(conv(z.re), conv(z.im))
}

fn rat_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // Fall back to a scaled division for huge numerators/denominators.
        let n = r.numer();
        let d = r.denom();
        let shift = (n.bits() as i64).max(d.bits() as i64) - 900;
        if shift > 0 {
            let s = shift as u32;
            let nn: BigInt = n >> s;
            let dd: BigInt = d >> s;
            nn.to_f64().unwrap_or(0.0) / dd.to_f64().unwrap_or(f64::INFINITY)
        } else {
            n.to_f64().unwrap_or(0.0) / d.to_f64().unwrap_or(f64::INFINITY)
        }
    })
}

fn to_f64c(z: &ExactComplex) -> Complex64 {
    Complex64::new(rat_to_f64(&z.re), rat_to_f64(&z.im))
}

/// `ν̃` with exact coefficients, ascending, in the z-chart.
pub fn tilde_nu_exact(base: &BasePoint) -> Vec<ExactComplex> {
    let div = &base.divisor;
    let fin = div.finite_indices();
    let loc = |i: usize| exact(div.poles[i].location.finite().unwrap());
    let zero = || vec![ExactComplex::zero()];
    // ∏_{finite j} (z − x_j)^{e_j} with per-pole exponents supplied by `e`.
    let product = |e: &dyn Fn(usize) -> usize| -> Vec<ExactComplex> {
        let mut acc = vec![ExactComplex::new(Ratio::from_integer(1.into()), Ratio::zero())];
        for &j in &fin {
            let k = e(j);
            if k > 0 {
                acc = poly::mul(&acc, &poly::linear_power(&loc(j), k));
            }
        }
        acc
    };
    let full = |j: usize| 2 * div.poles[j].order as usize;
    let mut total = zero();

    for (i, p) in div.poles.iter().enumerate() {
        let m = p.order;
        for a in (m + 1)..=(2 * m) {
            let mu = p.mu_at(a);
            if mu == Complex64::new(0.0, 0.0) {
                continue;
            }
            let mu = exact(mu);
            let term = match p.location {
                SpherePoint::Finite(_) => {
                    if m == 2 && a == 3 {
                        let y = base.y_choices[&i];
                        match div.poles[y].location {
                            SpherePoint::Infinity => {
                                // μ3 / (z − x)^3
                                poly::scale(&product(&|j| if j == i { 1 } else { full(j) }), &mu)
                            }
                            SpherePoint::Finite(yv) => {
                                // μ3 (x − y) / ((z − x)^3 (z − y))
                                let c = mu.clone() * (loc(i) - exact(yv));
                                let e = |j: usize| {
                                    if j == i {
                                        1
                                    } else if j == y {
                                        full(j) - 1
                                    } else {
                                        full(j)
                                    }
                                };
                                poly::scale(&product(&e), &c)
                            }
                        }
                    } else {
                        let k = (2 * m - a) as usize;
                        poly::scale(&product(&|j| if j == i { k } else { full(j) }), &mu)
                    }
                }
                SpherePoint::Infinity => {
                    if a >= 4 {
                        // μ_a w^{-a} dw² = μ_a z^{a−4} dz²
                        let mut zpow = vec![ExactComplex::zero(); (a - 4) as usize];
                        zpow.push(mu.clone());
                        poly::mul(&zpow, &product(&full))
                    } else {
                        // a ∈ {2, 3}: μ_a / (z − y)^{4−a}
                        let y = base.y_choices[&i];
                        let drop = (4 - a) as usize;
                        poly::scale(&product(&|j| if j == y { full(j) - drop } else { full(j) }), &mu)
                    }
                }
            };
            total = poly::add(&total, &term);
        }
    }

    let half = product(&|j| div.poles[j].order as usize);
    for (b, nu) in base.free_coeffs.iter().enumerate() {
        if *nu == Complex64::new(0.0, 0.0) {
            continue;
        }
        let mut zpow = vec![ExactComplex::zero(); b];
        zpow.push(exact(*nu));
        total = poly::add(&total, &poly::mul(&zpow, &half));
    }
    while total.len() > 1 && total.last().unwrap().is_zero() {
        total.pop();
    }
    total
}

/// `ν̃(z) = ∏_{finite x}(z − x)^{2m_x} ν(z)` in the z-chart.
///
/// When infinity is a pole the degree may fall short of `2N − 4`; the
/// deficit counts the zeros of `ν̃` at infinity (see
/// [`BasePoint::roots_at_infinity`]).
pub fn tilde_nu(base: &BasePoint) -> ComplexPolynomial {
    let c = tilde_nu_exact(base).iter().map(to_f64c).collect();
    ComplexPolynomial::new(c, Chart::Z)
}

/// Exact Laurent coefficients `(c_{m+1}, …, c_{2m})` of `ν` at pole `x`,
/// where `ν = Σ_a c_a (z − x)^{−a} + …` (or `w^{−a}` at infinity). Computed
/// by series division of `ν̃`, independently of how `ν̃` was assembled.
pub fn laurent_principal_part(base: &BasePoint, x: usize) -> Vec<ExactComplex> {
    let div = &base.divisor;
    let p = &div.poles[x];
    let m = p.order as usize;
    let nt = tilde_nu_exact(base);
    let len = 2 * m + 1;
    let one = ExactComplex::new(Ratio::from_integer(1.into()), Ratio::zero());
    let (num, den) = match p.location {
        SpherePoint::Finite(xv) => {
            let xe = exact(xv);
            let num = poly::taylor_shift(&nt, &xe);
            let mut den = vec![one.clone()];
            for (j, q) in div.poles.iter().enumerate() {
                if j == x {
                    continue;
                }
                if let Some(y) = q.location.finite() {
                    // (z − y) = (z − x) + (x − y)
                    let lin = vec![xe.clone() - exact(y), one.clone()];
                    for _ in 0..2 * q.order {
                        den = poly::mul(&den, &lin);
                    }
                }
            }
            (num, den)
        }
        SpherePoint::Infinity => {
            let d = 2 * base.n() - 4;
            let mut rev = vec![ExactComplex::zero(); d + 1];
            for (k, c) in nt.iter().enumerate() {
                rev[d - k] = c.clone();
            }
            let mut den = vec![one.clone()];
            for q in &div.poles {
                if let Some(y) = q.location.finite() {
                    let lin = vec![one.clone(), ExactComplex::zero() - exact(y)];
                    for _ in 0..2 * q.order {
                        den = poly::mul(&den, &lin);
                    }
                }
            }
            (rev, den)
        }
    };
    let inv = poly::series_inverse(&den, len);
    let mut series = poly::mul(&num, &inv);
    series.resize(len.max(series.len()), ExactComplex::zero());
    // coefficient of (z − x)^{−a} is series[2m − a]
    ((m + 1)..=(2 * m)).map(|a| series[2 * m - a].clone()).collect()
}

/// Decay exponent `σ` of the gluing error for this divisor.
pub fn compute_sigma(divisor: &IrregularDivisor) -> Result<Ratio<i64>> {
    divisor.validate()?;
    let n = divisor.degree() as i64;
    let d = divisor.designated_pole().ok_or_else(|| crate::Error::InvalidInput("I is empty".into()))?;
    let mut best: Option<Ratio<i64>> = None;
    let mut push = |r: Ratio<i64>| {
        best = Some(match best {
            Some(b) if b <= r => b,
            _ => r,
        });
    };
    let mut has_tame = false;
    for (i, p) in divisor.poles.iter().enumerate() {
        let m = p.order as i64;
        match p.kind {
            PoleKind::Untwisted if i == d => push(Ratio::new(m - 1, m + n - 4)),
            PoleKind::Untwisted => push(Ratio::new(m - 1, m)),
            // A designated twisted pole only occurs when I_u is empty; its
            // root cluster has size m + N − 5 instead of m − 1.
            PoleKind::Twisted if i == d => push(Ratio::new(2 * m - 3, 2 * (m + n - 5))),
            PoleKind::Twisted => push(Ratio::new(2 * m - 3, 2 * (m - 1))),
            PoleKind::Tame => has_tame = true,
        }
    }
    let delta = if has_tame { 1 } else { 2 };
    push(Ratio::new(delta, 2));
    Ok(best.unwrap())
}

/// Diagonal-model coefficients `(ρ_m, ρ_{m−1}, …, ρ_1)` from
/// `(μ_{m+1}, …, μ_{2m})` and a chosen `ρ_m` with `ρ_m² = −μ_{2m}`.
pub fn diagonal_recursion<T: Clone + num_traits::Num>(mu: &[T], rho_m: T) -> Vec<T> {
    let m = mu.len();
    // rho[j] holds ρ_j for j = 1..=m (index 0 unused).
    let mut rho = vec![T::zero(); m + 1];
    rho[m] = rho_m.clone();
    let two = T::one() + T::one();
    let denom = T::zero() - two * rho_m;
    for j in (1..m).rev() {
        let mut acc = mu[j - 1].clone(); // μ_{j+m}
        for k in 1..(m - j) {
            acc = acc + rho[j + k].clone() * rho[m - k].clone();
        }
        rho[j] = acc / denom.clone();
    }
    (1..=m).rev().map(|j| rho[j].clone()).collect()
}

/// Principal part `(μ_{m+1}, …, μ_{2m})` of `−(Σ_j ρ_j z^{−j})²` for
/// `rho = (ρ_m, …, ρ_1)`.
pub fn diagonal_principal_part<T: Clone + num_traits::Num>(rho_desc: &[T]) -> Vec<T> {
    let m = rho_desc.len();
    let rho = |j: usize| rho_desc[m - j].clone();
    ((m + 1)..=(2 * m))
        .map(|a| {
            let mut s = T::zero();
            for i in 1..=m {
                if a > i && a - i <= m {
                    s = s + rho(i) * rho(a - i);
                }
            }
            T::zero() - s
        })
        .collect()
}

/// Diagonal normal form at an untwisted pole, with `ρ_m = (−μ_{2m})^{1/2}`
/// on the principal branch so that `−(Σρ_j z^{−j})²` reproduces the
/// principal part of `ν`.
pub fn local_diagonal_data(divisor: &IrregularDivisor, x: usize) -> Result<Vec<Complex64>> {
    let Some(p) = divisor.poles.get(x) else {
        return invalid(format!("no pole with index {x}"));
    };
    if p.kind != PoleKind::Untwisted {
        return invalid(format!("pole {x} is not untwisted"));
    }
    let top = p.mu_at(2 * p.order);
    if top == Complex64::new(0.0, 0.0) {
        return invalid(format!("pole {x}: μ_{{2m}} = 0"));
    }
    Ok(diagonal_recursion(&p.mu, (-top).sqrt()))
}

/// Dimension of the stratum `M_m` of the moduli space.
pub fn stratum_dimension(divisor: &IrregularDivisor, m: i64) -> Result<i64> {
    let s = divisor.poles.len() as i64;
    let n = divisor.degree() as i64;
    let lo = (-s).div_euclid(2) + if (-s).rem_euclid(2) != 0 { 1 } else { 0 };
    let hi = (-s + n - 2).div_euclid(2);
    if m < lo || m > hi {
        return invalid(format!("m = {m} outside the stratification range [{lo}, {hi}]"));
    }
    Ok(if 2 * m == -s { n - 3 } else { -2 * m - s + n - 2 })
}

/// Degree of the spectral line bundle: `deg E + N − 2`.
pub fn spectral_line_degree(divisor: &IrregularDivisor, deg_e: i64) -> i64 {
    deg_e + divisor.degree() as i64 - 2
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn zero() -> SpherePoint {
        SpherePoint::Finite(c(0.0, 0.0))
    }

    fn u4() -> IrregularDivisor {
        IrregularDivisor::new(vec![PoleDatum::untwisted(
            zero(),
            vec![c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)],
        )])
        .unwrap()
    }

    #[test]
    fn u4_tilde_nu_is_t_z4_minus_one() {
        let b = family_point(&u4(), &[c(1.0, 0.0)], c(7.0, 0.0)).unwrap();
        let p = tilde_nu(&b);
        assert_eq!(p.coefficients, vec![c(-1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(7.0, 0.0)]);
    }

    #[test]
    fn zero_t_collapses_degree() {
        let b = family_point(&u4(), &[c(1.0, 0.0)], c(0.0, 0.0)).unwrap();
        let p = tilde_nu(&b);
        assert_eq!(p.degree(), 0);
        assert_eq!(p.coefficients[0], c(-1.0, 0.0));
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(compute_sigma(&u4()).unwrap(), Ratio::new(3, 4));
        let u2u2 = IrregularDivisor::new(vec![
            PoleDatum::untwisted(zero(), vec![c(0.0, 0.0), c(-1.0, 0.0)]),
            PoleDatum::untwisted(SpherePoint::Infinity, vec![c(0.0, 0.0), c(-1.0, 0.0)]),
        ])
        .unwrap();
        assert_eq!(compute_sigma(&u2u2).unwrap(), Ratio::new(1, 2));
        let u2ss = IrregularDivisor::new(vec![
            PoleDatum::tame(zero(), None, (0.3, 0.7)),
            PoleDatum::tame(SpherePoint::Finite(c(1.0, 0.0)), None, (0.3, 0.7)),
            PoleDatum::untwisted(SpherePoint::Infinity, vec![c(0.0, 0.0), c(-1.0, 0.0)]),
        ])
        .unwrap();
        assert_eq!(compute_sigma(&u2ss).unwrap(), Ratio::new(1, 2));
    }

    #[test]
    fn rho_examples() {
        let d = IrregularDivisor::new(vec![
            PoleDatum::untwisted(zero(), vec![c(4.0, 0.0), c(-1.0, 0.0)]),
            PoleDatum::untwisted(SpherePoint::Infinity, vec![c(0.0, 0.0), c(-1.0, 0.0)]),
        ])
        .unwrap();
        let r = local_diagonal_data(&d, 0).unwrap();
        assert_eq!(r, vec![c(1.0, 0.0), c(-2.0, 0.0)]);
        assert_eq!(diagonal_principal_part(&r), vec![c(4.0, 0.0), c(-1.0, 0.0)]);
        let flipped: Vec<Complex64> = r.iter().map(|x| -x).collect();
        assert_eq!(diagonal_recursion(&[c(4.0, 0.0), c(-1.0, 0.0)], c(-1.0, 0.0)), flipped);
        let r0 = local_diagonal_data(
            &IrregularDivisor::new(vec![
                PoleDatum::untwisted(zero(), vec![c(0.0, 0.0), c(-1.0, 0.0)]),
                PoleDatum::untwisted(SpherePoint::Infinity, vec![c(0.0, 0.0), c(-1.0, 0.0)]),
            ])
            .unwrap(),
            0,
        )
        .unwrap();
        assert_eq!(r0, vec![c(1.0, 0.0), c(0.0, 0.0)]);
    }

    #[test]
    fn strata_and_line_degree() {
        assert_eq!(stratum_dimension(&u4(), 0).unwrap(), 1);
        assert!(stratum_dimension(&u4(), 1).is_err());
        assert!(stratum_dimension(&u4(), -1).is_err());
        let two = IrregularDivisor::new(vec![
            PoleDatum::untwisted(zero(), vec![c(0.0, 0.0), c(-1.0, 0.0)]),
            PoleDatum::untwisted(SpherePoint::Infinity, vec![c(0.0, 0.0), c(-1.0, 0.0)]),
        ])
        .unwrap();
        assert_eq!(stratum_dimension(&two, -1).unwrap(), 1);
        assert_eq!(spectral_line_degree(&u4(), -1), 1);
        assert_eq!(spectral_line_degree(&u4(), 0), 2);
    }

    #[test]
    fn validation_rejects_bad_divisors() {
        assert!(IrregularDivisor::new(vec![PoleDatum::untwisted(zero(), vec![c(0.0, 0.0), c(-1.0, 0.0)])]).is_err());
        let tw = PoleDatum::twisted(zero(), vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(IrregularDivisor::new(vec![tw]).is_err());
        assert!(build_base_point(u4(), &[c(1.0, 0.0), c(2.0, 0.0)], &[1.0, 1.0]).is_err());
    }

    fn assert_principal_parts(b: &BasePoint) {
        for (i, p) in b.divisor.poles.iter().enumerate() {
            let got = laurent_principal_part(b, i);
            let want: Vec<ExactComplex> = ((p.order + 1)..=(2 * p.order)).map(|a| exact(p.mu_at(a))).collect();
            assert_eq!(got, want, "pole {i}");
        }
    }

    #[test]
    fn principal_parts_are_reproduced() {
        let inf = SpherePoint::Infinity;
        let one = SpherePoint::Finite(c(1.0, 0.0));
        let cases = vec![
            vec![
                PoleDatum::untwisted(zero(), vec![c(0.5, -1.0), c(-1.0, 0.0)]),
                PoleDatum::untwisted(inf, vec![c(0.25, 0.0), c(-3.0, 0.0)]),
            ],
            vec![
                PoleDatum::tame(zero(), None, (0.3, 0.7)),
                PoleDatum::tame(one, None, (0.3, 0.7)),
                PoleDatum::untwisted(inf, vec![c(2.0, 0.5), c(-1.0, 0.0)]),
            ],
            vec![
                PoleDatum::untwisted(zero(), vec![c(0.5, 0.0), c(0.75, 0.0), c(-1.0, 0.0)]),
                PoleDatum::tame(inf, Some(c(1.5, -2.0)), (0.3, 0.7)),
            ],
            vec![
                PoleDatum::twisted(zero(), vec![c(-1.0, 0.0), c(0.0, 0.0)]),
                PoleDatum::twisted(inf, vec![c(1.0, 0.0), c(0.0, 0.0)]),
            ],
            vec![
                PoleDatum::untwisted(zero(), vec![c(1.0, 1.0), c(-2.0, 0.0)]),
                PoleDatum::untwisted(SpherePoint::Finite(c(1.0, 1.0)), vec![c(0.5, 0.0), c(3.0, 0.0)]),
                PoleDatum::tame(SpherePoint::Finite(c(-2.0, 0.5)), None, (0.4, 0.6)),
            ],
            vec![
                PoleDatum::twisted(SpherePoint::Finite(c(0.5, 0.0)), vec![c(2.0, 0.0), c(0.0, 0.0)]),
                PoleDatum::untwisted(zero(), vec![c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0)]),
                PoleDatum::tame(inf, None, (0.3, 0.7)),
            ],
        ];
        for poles in cases {
            let d = IrregularDivisor::new(poles).unwrap();
            let n = d.degree() as usize;
            let free: Vec<Complex64> = (0..n - 3).map(|k| c(1.0 + k as f64, 0.5)).collect();
            let b = build_base_point(d, &free, &vec![1.0; n - 3]).unwrap();
            assert_principal_parts(&b);
        }
    }

    #[test]
    fn json_round_trip() {
        let b = family_point(&u4(), &[c(1.0, 0.0)], c(3.0, 0.5)).unwrap();
        let s = serde_json::to_string(&b).unwrap();
        assert!(s.contains("\"location\":[0.0,0.0]"));
        let back: BasePoint = serde_json::from_str(&s).unwrap();
        assert_eq!(back, b);
        let inf: SpherePoint = serde_json::from_str("\"infinity\"").unwrap();
        assert!(inf.is_infinity());
    }
}
