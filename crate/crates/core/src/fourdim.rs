//! The nine four-dimensional families (`N = 4`).
//!
//! Each family is a one-parameter curve `t ↦ ν_t` in a one-dimensional
//! Hitchin base. For each of them this module computes the special Kähler
//! metric `∫|ν̇|²/|ν|` numerically, the fibre modulus `τ(t)` through the
//! cross-ratio of the ramification points, the flat torus metric, and the
//! ALG / ALG* model data the metric approaches.
//!
//! Families are named by their pole layout: `U`/`T` for an untwisted or
//! twisted irregular pole with its order, `S` for a simple (tame) pole.
//! Polynomials, roots and cross-ratios are written in the chart where the
//! family is usually presented (`w = 1/z` for the order-three families),
//! and roots are labelled by matching them to their large-`t` expansions.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::base::{family_point, tilde_nu, BasePoint, IrregularDivisor, PoleDatum, SpherePoint};
use crate::error::{invalid, numerical, Result};
use crate::fit::{linear_fit, power_law_fit, LinearFit};
use crate::gluing::cutoff_chi;
use crate::poly::{Chart, ComplexPolynomial};
use crate::quad;
use crate::specfun::{elliptic_k, inverse_modular_lambda, modular_lambda, nearest_gamma2_image, HalfPlanePoint};
use crate::spectral::{find_roots, match_roots};
use crate::Complex64;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Parameter values by name (`"mu7"`, …).
pub type MuMap = BTreeMap<String, Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CaseId {
    U4,
    T4,
    U3S,
    T3S,
    U2U2,
    U2T2,
    T2T2,
    U2SS,
    T2SS,
}

impl CaseId {
    pub const ALL: [CaseId; 9] = [
        CaseId::U4,
        CaseId::T4,
        CaseId::U3S,
        CaseId::T3S,
        CaseId::U2U2,
        CaseId::U2T2,
        CaseId::T2T2,
        CaseId::U2SS,
        CaseId::T2SS,
    ];

    pub fn parse(s: &str) -> Result<CaseId> {
        CaseId::ALL
            .iter()
            .copied()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| crate::Error::InvalidInput(format!("unknown case `{s}`")))
    }

    pub fn name(&self) -> &'static str {
        match self {
            CaseId::U4 => "U4",
            CaseId::T4 => "T4",
            CaseId::U3S => "U3S",
            CaseId::T3S => "T3S",
            CaseId::U2U2 => "U2U2",
            CaseId::U2T2 => "U2T2",
            CaseId::T2T2 => "T2T2",
            CaseId::U2SS => "U2SS",
            CaseId::T2SS => "T2SS",
        }
    }
}

/// Leading behaviour of `g_sK` in `r = |t|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SkForm {
    /// `C (dr² + r²dθ²)/r^e`.
    Conic { exponent_num: i64, exponent_den: i64 },
    /// `(L log r + O(1))(dr² + r²dθ²)/r` with `L = coefficient_over_pi · π`.
    Log { coefficient_over_pi: u32 },
}

impl SkForm {
    pub fn exponent(&self) -> Option<f64> {
        match self {
            SkForm::Conic { exponent_num, exponent_den } => Some(*exponent_num as f64 / *exponent_den as f64),
            SkForm::Log { .. } => None,
        }
    }

    pub fn log_coefficient(&self) -> Option<f64> {
        match self {
            SkForm::Log { coefficient_over_pi } => Some(*coefficient_over_pi as f64 * PI),
            SkForm::Conic { .. } => None,
        }
    }
}

/// Total angle `2π(1 − e/2)` of the cone `(dr² + r²dθ²)/r^e`.
pub fn cone_angle(exponent: f64) -> f64 {
    2.0 * PI * (1.0 - 0.5 * exponent)
}

/// Entry of the cross-ratio `(a−b)(c−d)/((c−b)(a−d))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Slot {
    /// Root number `k` (1-based, in the family's labelling).
    Root(usize),
    Zero,
    Infinity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ModelMetric {
    Alg { kodaira: &'static str, beta_num: i64, beta_den: i64, tau_re: f64, tau_im: f64 },
    AlgStar { kodaira: &'static str, dynkin: &'static str, log_coefficient_over_pi: u32 },
}

/// Equation of the compactified fibre in the `(a₀, c₀)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FiberRelation {
    /// `a₀² = −ν̃(−c₀)`.
    Plain,
    /// `a₀² = c₀ ν̃(−c₀)`.
    ForcedZero,
    /// `(a₀ + c₀²)² = −ν̃(−c₀)`.
    ShiftedUnit,
    /// `(a₀ + (−μ₀)^{1/2} c₀²)² = −ν̃(−c₀)`.
    ShiftedRoot,
}

#[derive(Debug, Clone, Serialize)]
pub struct FourDimCase {
    pub id: CaseId,
    pub description: &'static str,
    /// Fixed normalisation of the leading coefficient.
    pub normalization: &'static str,
    /// Free parameters with their default values.
    pub free_mu: Vec<(&'static str, Complex64)>,
    pub sk_form: SkForm,
    pub cross_ratio_slots: [Slot; 4],
    pub chart: Chart,
    pub relation: FiberRelation,
    pub model: ModelMetric,
}

fn alg(kodaira: &'static str, beta: (i64, i64), tau: Complex64) -> ModelMetric {
    ModelMetric::Alg { kodaira, beta_num: beta.0, beta_den: beta.1, tau_re: tau.re, tau_im: tau.im }
}

fn alg_star(kodaira: &'static str, dynkin: &'static str, l: u32) -> ModelMetric {
    ModelMetric::AlgStar { kodaira, dynkin, log_coefficient_over_pi: l }
}

fn omega() -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI / 3.0)
}

/// All nine families.
pub fn case_catalog() -> Vec<FourDimCase> {
    use Slot::*;
    let conic = |n, d| SkForm::Conic { exponent_num: n, exponent_den: d };
    let log = |l| SkForm::Log { coefficient_over_pi: l };
    vec![
        FourDimCase {
            id: CaseId::U4,
            description: "untwisted order-four pole at 0",
            normalization: "mu8 = -1",
            free_mu: vec![("mu5", c(0.0)), ("mu6", c(0.0)), ("mu7", c(0.0))],
            sk_form: conic(1, 2),
            cross_ratio_slots: [Root(4), Root(1), Root(3), Root(2)],
            chart: Chart::Z,
            relation: FiberRelation::Plain,
            model: alg("III*", (3, 4), I),
        },
        FourDimCase {
            id: CaseId::T4,
            description: "twisted order-four pole at 0",
            normalization: "mu7 = -1",
            free_mu: vec![("mu5", c(0.0)), ("mu6", c(0.0))],
            sk_form: conic(1, 3),
            cross_ratio_slots: [Root(2), Zero, Root(3), Root(1)],
            chart: Chart::Z,
            relation: FiberRelation::ForcedZero,
            model: alg("II*", (5, 6), omega()),
        },
        FourDimCase {
            id: CaseId::U3S,
            description: "untwisted order-three pole at 0, simple pole at infinity",
            normalization: "mu6 = -1",
            free_mu: vec![("mu2", c(0.0)), ("mu4", c(0.0)), ("mu5", c(0.0))],
            sk_form: conic(2, 3),
            cross_ratio_slots: [Root(1), Root(2), Root(3), Root(4)],
            chart: Chart::W,
            relation: FiberRelation::ShiftedUnit,
            model: alg("IV*", (2, 3), omega()),
        },
        FourDimCase {
            id: CaseId::T3S,
            description: "twisted order-three pole at 0, simple pole at infinity",
            normalization: "mu5 = -1",
            free_mu: vec![("mu2", c(0.0)), ("mu4", c(0.0))],
            sk_form: conic(1, 2),
            cross_ratio_slots: [Root(3), Root(2), Root(1), Infinity],
            chart: Chart::W,
            relation: FiberRelation::Plain,
            model: alg("III*", (3, 4), I),
        },
        FourDimCase {
            id: CaseId::U2U2,
            description: "untwisted order-two poles at 0 and infinity",
            normalization: "mu4 = -1",
            free_mu: vec![("mu0", c(-1.0)), ("mu1", c(0.0)), ("mu3", c(0.0))],
            sk_form: log(4),
            cross_ratio_slots: [Root(1), Root(2), Root(3), Root(4)],
            chart: Chart::Z,
            relation: FiberRelation::ShiftedRoot,
            model: alg_star("I2*", "D2", 4),
        },
        FourDimCase {
            id: CaseId::U2T2,
            description: "untwisted order-two pole at 0, twisted order-two pole at infinity",
            normalization: "mu4 = -1",
            free_mu: vec![("mu1", c(1.0)), ("mu3", c(0.0))],
            sk_form: log(6),
            cross_ratio_slots: [Root(1), Root(2), Infinity, Root(3)],
            chart: Chart::Z,
            relation: FiberRelation::Plain,
            model: alg_star("I3*", "D1", 6),
        },
        FourDimCase {
            id: CaseId::T2T2,
            description: "twisted order-two poles at 0 and infinity",
            normalization: "mu3 = -1",
            free_mu: vec![("mu1", c(1.0))],
            sk_form: log(8),
            cross_ratio_slots: [Root(1), Zero, Infinity, Root(2)],
            chart: Chart::Z,
            relation: FiberRelation::ForcedZero,
            model: alg_star("I4*", "D0", 8),
        },
        FourDimCase {
            id: CaseId::U2SS,
            description: "untwisted order-two pole at infinity, simple poles at 0 and 1",
            normalization: "none (mu4 != 0)",
            free_mu: vec![("mu0", c(0.0)), ("mu1", c(0.0)), ("mu3", c(0.0)), ("mu4", c(-1.0))],
            sk_form: log(2),
            cross_ratio_slots: [Root(1), Root(2), Root(3), Root(4)],
            chart: Chart::Z,
            relation: FiberRelation::Plain,
            model: alg_star("I1*", "D3", 2),
        },
        FourDimCase {
            id: CaseId::T2SS,
            description: "twisted order-two pole at infinity, simple poles at 0 and 1",
            normalization: "none (mu3 != 0)",
            free_mu: vec![("mu0", c(0.0)), ("mu1", c(0.0)), ("mu3", c(-1.0))],
            sk_form: log(4),
            cross_ratio_slots: [Root(1), Root(2), Infinity, Root(3)],
            chart: Chart::Z,
            relation: FiberRelation::Plain,
            model: alg_star("I2*", "D2", 4),
        },
    ]
}

/// Weights given to the simple poles of the families.
pub const TAME_WEIGHTS: (f64, f64) = (0.3, 0.7);

/// Resolved parameters of one family.
#[derive(Debug, Clone, PartialEq)]
pub struct Params(MuMap);

impl Params {
    fn get(&self, k: &str) -> Complex64 {
        self.0[k]
    }

    pub fn map(&self) -> &MuMap {
        &self.0
    }
}

impl FourDimCase {
    pub fn get(id: CaseId) -> FourDimCase {
        case_catalog().into_iter().find(|c| c.id == id).unwrap()
    }

    /// Fills defaults; unknown names are an error.
    pub fn params(&self, overrides: &MuMap) -> Result<Params> {
        let mut out: MuMap = self.free_mu.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        for (k, v) in overrides {
            if !out.contains_key(k) {
                let names: Vec<&str> = self.free_mu.iter().map(|p| p.0).collect();
                return invalid(format!("{}: unknown parameter `{k}` (free: {})", self.id.name(), names.join(", ")));
            }
            if !(v.re.is_finite() && v.im.is_finite()) {
                return invalid(format!("{}: parameter `{k}` is not finite", self.id.name()));
            }
            out.insert(k.clone(), *v);
        }
        Ok(Params(out))
    }

    /// The pole data of the family.
    pub fn divisor(&self, p: &Params) -> Result<IrregularDivisor> {
        let zero = SpherePoint::Finite(c(0.0));
        let one = SpherePoint::Finite(c(1.0));
        let inf = SpherePoint::Infinity;
        let opt = |v: Complex64| if v == c(0.0) { None } else { Some(v) };
        let poles = match self.id {
            CaseId::U4 => vec![PoleDatum::untwisted(zero, vec![p.get("mu5"), p.get("mu6"), p.get("mu7"), c(-1.0)])],
            CaseId::T4 => vec![PoleDatum::twisted(zero, vec![p.get("mu5"), p.get("mu6"), c(-1.0), c(0.0)])],
            CaseId::U3S => vec![
                PoleDatum::untwisted(zero, vec![p.get("mu4"), p.get("mu5"), c(-1.0)]),
                PoleDatum::tame(inf, opt(p.get("mu2")), TAME_WEIGHTS),
            ],
            CaseId::T3S => vec![
                PoleDatum::twisted(zero, vec![p.get("mu4"), c(-1.0), c(0.0)]),
                PoleDatum::tame(inf, opt(p.get("mu2")), TAME_WEIGHTS),
            ],
            CaseId::U2U2 => vec![
                PoleDatum::untwisted(zero, vec![p.get("mu3"), c(-1.0)]),
                PoleDatum::untwisted(inf, vec![p.get("mu1"), p.get("mu0")]),
            ],
            CaseId::U2T2 => vec![
                PoleDatum::untwisted(zero, vec![p.get("mu3"), c(-1.0)]),
                PoleDatum::twisted(inf, vec![p.get("mu1"), c(0.0)]),
            ],
            CaseId::T2T2 => {
                vec![
                    PoleDatum::twisted(zero, vec![c(-1.0), c(0.0)]),
                    PoleDatum::twisted(inf, vec![p.get("mu1"), c(0.0)]),
                ]
            }
            CaseId::U2SS => vec![
                PoleDatum::tame(zero, opt(p.get("mu0")), TAME_WEIGHTS),
                PoleDatum::tame(one, opt(p.get("mu1")), TAME_WEIGHTS),
                PoleDatum::untwisted(inf, vec![p.get("mu3"), p.get("mu4")]),
            ],
            CaseId::T2SS => vec![
                PoleDatum::tame(zero, opt(p.get("mu0")), TAME_WEIGHTS),
                PoleDatum::tame(one, opt(p.get("mu1")), TAME_WEIGHTS),
                PoleDatum::twisted(inf, vec![p.get("mu3"), c(0.0)]),
            ],
        };
        IrregularDivisor::new(poles)
    }

    pub fn base_point(&self, t: Complex64, p: &Params) -> Result<BasePoint> {
        family_point(&self.divisor(p)?, &[c(1.0)], t)
    }

    /// The family's `ν̃` in its own chart, ascending coefficients.
    pub fn chart_polynomial(&self, t: Complex64, p: &Params) -> ComplexPolynomial {
        let m = |k: &str| p.get(k);
        let coeffs = match self.id {
            CaseId::U4 => vec![c(-1.0), m("mu7"), m("mu6"), m("mu5"), t],
            CaseId::T4 => vec![c(-1.0), m("mu6"), m("mu5"), t],
            CaseId::U3S => vec![m("mu2"), t, m("mu4"), m("mu5"), c(-1.0)],
            CaseId::T3S => vec![m("mu2"), t, m("mu4"), c(-1.0)],
            CaseId::U2U2 => vec![c(-1.0), m("mu3"), t, m("mu1"), m("mu0")],
            CaseId::U2T2 => vec![c(-1.0), m("mu3"), t, m("mu1")],
            CaseId::T2T2 => vec![c(-1.0), t, m("mu1")],
            CaseId::U2SS | CaseId::T2SS => {
                let (m0, m1, m3) = (m("mu0"), m("mu1"), m("mu3"));
                let m4 = if self.id == CaseId::U2SS { m("mu4") } else { c(0.0) };
                // μ0(z−1)² + μ1z² + μ3z(z−1)² + μ4z²(z−1)² + t z(z−1)
                let mut v = vec![m0, -2.0 * m0 + m3 - t, m0 + m1 - 2.0 * m3 + m4 + t, m3 - 2.0 * m4, m4];
                if self.id == CaseId::T2SS {
                    v.pop();
                }
                v
            }
        };
        let mut poly = ComplexPolynomial::new(coeffs, self.chart);
        poly.trim();
        poly
    }

    /// Large-`t` expansions of the labelled roots (chart coordinates).
    pub fn root_predictions(&self, t: Complex64, p: &Params) -> Vec<Complex64> {
        let m = |k: &str| p.get(k);
        let tp = |e: f64| t.powf(e);
        match self.id {
            CaseId::U4 => (0..4)
                .map(|k| {
                    let ik = I.powu(k as u32);
                    let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
                    tp(-0.25) * ik
                        + tp(-0.5) * sign * m("mu7") / 4.0
                        + tp(-0.75) * ik.inv() * (-m("mu6") / 4.0 - m("mu7") * m("mu7") / 32.0)
                })
                .collect(),
            CaseId::T4 => (0..3)
                .map(|k| {
                    let w = omega().powu(k as u32);
                    tp(-1.0 / 3.0) * w - m("mu6") * w.inv() * tp(-2.0 / 3.0) / 3.0 - m("mu5") / t / 3.0
                })
                .collect(),
            CaseId::U3S => {
                let mut v: Vec<Complex64> =
                    (0..3).map(|k| tp(1.0 / 3.0) * omega().powu(k as u32) + m("mu5") / 3.0).collect();
                let mu2 = m("mu2");
                v.push(mu2 * (-1.0 / t - mu2 * m("mu4") / (t * t * t)));
                v
            }
            CaseId::T3S => {
                let mu4 = m("mu4");
                let s = tp(0.5) + mu4 * mu4 * tp(-0.5) / 8.0;
                let mu2 = m("mu2");
                vec![s + mu4 / 2.0, -s + mu4 / 2.0, mu2 * (-1.0 / t - mu2 * mu4 / (t * t * t))]
            }
            CaseId::U2U2 => {
                let (m0, m1, m3) = (m("mu0"), m("mu1"), m("mu3"));
                let r = (-m0).powf(-0.5) * tp(0.5);
                vec![tp(-0.5) - m3 / (2.0 * t), -tp(-0.5) - m3 / (2.0 * t), r - m1 / (2.0 * m0), -r - m1 / (2.0 * m0)]
            }
            CaseId::U2T2 => {
                let (m1, m3) = (m("mu1"), m("mu3"));
                vec![tp(-0.5) - m3 / (2.0 * t), -tp(-0.5) - m3 / (2.0 * t), -t / m1 + m3 / t]
            }
            CaseId::T2T2 => {
                let m1 = m("mu1");
                vec![1.0 / t - m1 / (t * t * t), -t / m1 - 1.0 / t]
            }
            CaseId::U2SS | CaseId::T2SS => {
                let (m0, m1, m3) = (m("mu0"), m("mu1"), m("mu3"));
                let z1 = m0 / t + m0 * (m3 - m0) / (t * t);
                let z2 = 1.0 - m1 / t + m1 * m1 / (t * t);
                if self.id == CaseId::U2SS {
                    let m4 = m("mu4");
                    let r = (-m4).powf(-0.5) * tp(0.5);
                    let s = (1.0 - m3 / m4) / 2.0;
                    vec![z1, z2, r + s, -r + s]
                } else {
                    vec![z1, z2, -t / m3 + (1.0 - (m0 + m1) / m3)]
                }
            }
        }
    }

    /// Limiting modulus of the fibre (for ALG families) used to seed
    /// branch tracking.
    pub fn tau_model(&self) -> Option<Complex64> {
        match self.model {
            ModelMetric::Alg { tau_re, tau_im, .. } => Some(Complex64::new(tau_re, tau_im)),
            ModelMetric::AlgStar { .. } => None,
        }
    }
}

/// Roots of the chart polynomial, labelled `1..=n` by their expansions.
pub fn labelled_roots(case: &FourDimCase, t: Complex64, p: &Params) -> Result<Vec<Complex64>> {
    let poly = case.chart_polynomial(t, p);
    let mut roots = Vec::new();
    // Exact zeros at the origin are peeled off before the iterative solve.
    let mut lo = 0;
    while lo < poly.coefficients.len() && poly.coefficients[lo] == c(0.0) {
        roots.push(c(0.0));
        lo += 1;
    }
    let rest = ComplexPolynomial::new(poly.coefficients[lo..].to_vec(), poly.chart);
    if rest.degree() > 0 {
        roots.extend(find_roots(&rest)?);
    }
    let preds = case.root_predictions(t, p);
    if roots.len() != preds.len() {
        return numerical(format!("{}: {} roots for {} expansions", case.id.name(), roots.len(), preds.len()));
    }
    let sp = |v: &[Complex64]| v.iter().map(|z| SpherePoint::Finite(*z)).collect::<Vec<_>>();
    let assign = match_roots(&sp(&roots), &sp(&preds))?;
    Ok(assign.into_iter().map(|i| roots[i]).collect())
}

/// `(a−b)(c−d)/((c−b)(a−d))` with the case's slots filled from `roots`
/// (labelled, 1-based). Factors involving `∞` are dropped.
pub fn fiber_cross_ratio(case: &FourDimCase, roots: &[Complex64]) -> Result<Complex64> {
    let val = |s: Slot| -> Result<Option<Complex64>> {
        Ok(match s {
            Slot::Root(k) => Some(
                *roots
                    .get(k.wrapping_sub(1))
                    .ok_or_else(|| crate::Error::InvalidInput(format!("slot needs root {k}, have {}", roots.len())))?,
            ),
            Slot::Zero => Some(c(0.0)),
            Slot::Infinity => None,
        })
    };
    let [a, b, cc, d] = case.cross_ratio_slots;
    cross_ratio([val(a)?, val(b)?, val(cc)?, val(d)?])
}

/// Cross-ratio `(a−b)(c−d)/((c−b)(a−d))` on the Riemann sphere (`None` is ∞).
pub fn cross_ratio(p: [Option<Complex64>; 4]) -> Result<Complex64> {
    let diff = |x: Option<Complex64>, y: Option<Complex64>| match (x, y) {
        (Some(x), Some(y)) => Some(x - y),
        _ => None,
    };
    let factor = |x: Option<Complex64>| x.unwrap_or(c(1.0));
    let [a, b, cc, d] = p;
    let num = factor(diff(a, b)) * factor(diff(cc, d));
    let den = factor(diff(cc, b)) * factor(diff(a, d));
    if den.norm() == 0.0 || num.norm() == 0.0 {
        return invalid("degenerate cross-ratio (coincident points)");
    }
    Ok(num / den)
}

/// Fibre modulus `τ(t) = λ⁻¹(l(t))`, returned as the `Γ(2)` image nearest
/// to `anchor` (default: the model modulus for ALG families, the reference
/// expansion otherwise). Sweeps pass the previous value as anchor.
pub fn fiber_tau(case: &FourDimCase, t: Complex64, p: &Params, anchor: Option<Complex64>) -> Result<Complex64> {
    let roots = labelled_roots(case, t, p)?;
    let l = fiber_cross_ratio(case, &roots)?;
    let tau = inverse_modular_lambda(l)?.tau();
    let anchor = match anchor.or(case.tau_model()) {
        Some(a) => a,
        None => tau_expansion_reference(case, t, p)?,
    };
    Ok(nearest_gamma2_image(tau, anchor))
}

/// Which version of a closed-form `τ` expansion to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceVariant {
    /// The closed forms in their commonly quoted shape (U3S and T2SS differ).
    Printed,
    /// With the coefficients re-derived from the root expansions.
    Rederived,
}

/// Large-`t` expansion of `τ(t)`, `Printed` variant.
pub fn tau_expansion_reference(case: &FourDimCase, t: Complex64, p: &Params) -> Result<Complex64> {
    tau_reference(case, t, p, ReferenceVariant::Printed)
}

pub fn tau_reference(case: &FourDimCase, t: Complex64, p: &Params, v: ReferenceVariant) -> Result<Complex64> {
    let m = |k: &str| p.get(k);
    let tp = |e: f64| t.powf(e);
    let k_half = elliptic_k(c(0.5f64.sqrt()))?;
    let i_pi = I / PI;
    Ok(match case.id {
        CaseId::U4 => I + 3.0 * PI * m("mu7") * m("mu7") / (32.0 * k_half * k_half) * tp(-0.5),
        CaseId::T4 => {
            let k = elliptic_k(Complex64::from_polar(1.0, -PI / 6.0))?;
            omega()
                + Complex64::from_polar(1.0, -PI / 3.0) * PI * (3.0 * m("mu5") + m("mu6") * m("mu6"))
                    / (12.0 * 3f64.sqrt() * k * k)
                    * tp(-2.0 / 3.0)
        }
        CaseId::U3S => match v {
            ReferenceVariant::Printed => {
                let k = elliptic_k(c((-PI / 6.0).exp()))?;
                omega() + 3f64.sqrt() * PI / (4.0 * k * k) * tp(-1.0 / 3.0)
            }
            ReferenceVariant::Rederived => {
                let k = elliptic_k(Complex64::from_polar(1.0, -PI / 6.0))?;
                omega() + m("mu5") / 3.0 * 3f64.sqrt() * PI / (4.0 * k * k) * tp(-1.0 / 3.0)
            }
        },
        CaseId::T3S => I + m("mu4") * PI * I / (4.0 * k_half * k_half) * tp(-0.5),
        CaseId::U2U2 => {
            let (m0, m1, m3) = (m("mu0"), m("mu1"), m("mu3"));
            i_pi * (4.0 * (-m0).powf(-0.5) * t).ln() + i_pi * ((m1 * m1 - m0 * m3 * m3) / (8.0 * m0)) / t
        }
        CaseId::U2T2 => {
            let (m1, m3) = (m("mu1"), m("mu3"));
            i_pi * ((8.0 / m1 * tp(1.5)).ln() - m3 * m3 / (8.0 * t) - m1 * tp(-1.5))
        }
        CaseId::T2T2 => {
            let m1 = m("mu1");
            i_pi * ((16.0 / m1 * t * t).ln() + 5.0 * m1 / (2.0 * t * t))
        }
        CaseId::U2SS => i_pi * (-8.0 * (-m("mu4")).powf(-0.5) * tp(0.5)).ln(),
        CaseId::T2SS => {
            let (m0, m1, m3) = (m("mu0"), m("mu1"), m("mu3"));
            let sub = match v {
                ReferenceVariant::Printed => m3 / 2.0 - 1.0,
                ReferenceVariant::Rederived => 2.0 * m0 + 2.0 * m1 - m3 / 2.0,
            };
            i_pi * ((-16.0 / m3 * t).ln() + sub / t)
        }
    })
}

/// `(c_t²/ĉ²)[(dx + a dy)² + b² dy²]` on the reference torus
/// `ℂ/ĉ(ℤ ⊕ τ̂ℤ)`, with `a = Re(τ − τ̂)/Im τ̂`, `b = Im τ/Im τ̂` and
/// `c = 2π/√Im`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TorusMetric {
    pub g: [[f64; 2]; 2],
    pub tau_hat: (f64, f64),
}

pub fn torus_pullback_metric(tau: Complex64, tau_hat: Complex64) -> Result<TorusMetric> {
    if !(tau.im > 0.0 && tau_hat.im > 0.0) {
        return invalid("torus metric needs Im τ > 0 and Im τ̂ > 0");
    }
    let scale = tau_hat.im / tau.im;
    let a = (tau.re - tau_hat.re) / tau_hat.im;
    let b = tau.im / tau_hat.im;
    Ok(TorusMetric { g: [[scale, scale * a], [scale * a, scale * (a * a + b * b)]], tau_hat: (tau_hat.re, tau_hat.im) })
}

impl TorusMetric {
    pub fn determinant(&self) -> f64 {
        self.g[0][0] * self.g[1][1] - self.g[0][1] * self.g[1][0]
    }

    pub fn is_positive_definite(&self) -> bool {
        self.g[0][0] > 0.0 && self.determinant() > 0.0
    }

    /// Area of the reference torus, integrating `√det g` over its
    /// fundamental parallelogram `{ĉ(u + vτ̂) : 0 ≤ u, v ≤ 1}`.
    pub fn area(&self) -> Result<f64> {
        let th = Complex64::new(self.tau_hat.0, self.tau_hat.1);
        let chat = 2.0 * PI / th.im.sqrt();
        // dx dy = ĉ² Im τ̂ du dv
        let jac = chat * chat * th.im;
        let density = self.determinant().sqrt();
        let r = quad::Rect { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 };
        Ok(quad::integrate_2d(|_, _| density * jac, r, 1e-14, 1e-14, 16)?.value)
    }
}

/// Whether `(a₀, c₀)` lies on the case's fibre curve (1e−9 relative).
pub fn fiber_curve_check(case: &FourDimCase, t: Complex64, p: &Params, a0: Complex64, c0: Complex64) -> bool {
    let poly = case.chart_polynomial(t, p);
    let nu = poly.eval(-c0);
    let scale = poly.eval_scale(-c0);
    let (lhs, rhs, rscale) = match case.relation {
        FiberRelation::Plain => (a0 * a0, -nu, scale),
        FiberRelation::ForcedZero => (a0 * a0, c0 * nu, c0.norm() * scale),
        FiberRelation::ShiftedUnit => {
            let u = a0 + c0 * c0;
            (u * u, -nu, scale)
        }
        FiberRelation::ShiftedRoot => {
            let u = a0 + (-p.get("mu0")).sqrt() * c0 * c0;
            (u * u, -nu, scale)
        }
    };
    (lhs - rhs).norm() <= 1e-9 * (lhs.norm() + rscale).max(1e-300)
}

/// The points `(a₀, c₀)` of the fibre curve over the ramification points.
pub fn ramification_points(case: &FourDimCase, t: Complex64, p: &Params) -> Result<Vec<(Complex64, Complex64)>> {
    let roots = labelled_roots(case, t, p)?;
    Ok(roots
        .iter()
        .map(|z| {
            let c0 = -z;
            let a0 = match case.relation {
                FiberRelation::Plain | FiberRelation::ForcedZero => c(0.0),
                FiberRelation::ShiftedUnit => -c0 * c0,
                FiberRelation::ShiftedRoot => -(-p.get("mu0")).sqrt() * c0 * c0,
            };
            (a0, c0)
        })
        .collect())
}

// ---------------------------------------------------------- special Kähler

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SkEstimate {
    pub value: f64,
    pub error: f64,
}

/// Tolerances for [`sk_integral`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkQuadrature {
    pub rel_tol: f64,
    /// Cylinder length beyond the outermost roots, in units of `ln |z|`.
    pub tail: f64,
}

impl Default for SkQuadrature {
    fn default() -> Self {
        Self { rel_tol: 1e-7, tail: 40.0 }
    }
}

/// Sum of adaptive integrals over consecutive break intervals. `abs_tol`
/// is shared among the intervals in proportion to their length.
fn integrate_segments<F: Fn(f64) -> f64>(f: F, breaks: &[f64], abs_tol: f64, rel_tol: f64) -> Result<SkEstimate> {
    let mut value = 0.0;
    let mut error = 0.0;
    let span = breaks.last().unwrap_or(&0.0) - breaks.first().unwrap_or(&0.0);
    for w in breaks.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let abs = (abs_tol * (w[1] - w[0]) / span).max(1e-300);
        let e = quad::integrate(&f, w[0], w[1], abs, rel_tol, 4000)?;
        value += e.value;
        error += e.error;
    }
    Ok(SkEstimate { value, error })
}

/// Crude `∫₀^{2π} g`, from 32 samples of the unweighted integrand; it sets
/// the absolute tolerance of the angular integrals so that rings where the
/// partition weight cancels the integrand do not chase rounding noise.
fn ring_scale<G: Fn(f64) -> f64>(g: G) -> f64 {
    let n = 32;
    (0..n).map(|k| g(2.0 * PI * (k as f64 + 0.5) / n as f64)).filter(|v| v.is_finite()).sum::<f64>() * 2.0 * PI
        / n as f64
}

fn angle_breaks(extra: &[f64]) -> Vec<f64> {
    let mut b: Vec<f64> = (0..=16).map(|k| 2.0 * PI * k as f64 / 16.0).collect();
    b.extend(extra.iter().map(|a| a.rem_euclid(2.0 * PI)));
    b.sort_by(f64::total_cmp);
    b.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
    b
}

/// `g_sK(ν̇, ν̇) = ∫ |ν̇|²/|ν| · i dz dz̄` at `base`, with `ν̇` the unit
/// variation of the top free coefficient.
///
/// For `ν = ν̃/∏(z − x)^{2m_x}` and `ν̇ = z^{N−4}∏(z − x)^{m_x}/∏(z − x)^{2m_x}`
/// the integrand reduces to `|z|^{2(N−4)}/|ν̃(z)|`, with `|ν̃|` evaluated
/// from its roots. The plane is split with a smooth partition of unity:
/// a polar patch around each non-zero root (where the `1/|z − z_k|`
/// singularity is absorbed by the Jacobian) and the log-polar cylinder
/// `z = e^{s+iθ}` for the rest, which resolves root clusters at very
/// different scales.
pub fn sk_integral(base: &BasePoint, q: SkQuadrature) -> Result<SkEstimate> {
    let poly = tilde_nu(base);
    let mut zeros_at_origin = 0;
    while zeros_at_origin < poly.coefficients.len() && poly.coefficients[zeros_at_origin] == c(0.0) {
        zeros_at_origin += 1;
    }
    let rest = ComplexPolynomial::new(poly.coefficients[zeros_at_origin..].to_vec(), poly.chart);
    let roots = if rest.degree() > 0 { find_roots(&rest)? } else { vec![] };
    let lead = poly.leading().norm();
    let power = 2 * (base.n() as i32 - 4) - zeros_at_origin as i32;
    if poly.degree() as i32 - 2 * (base.n() as i32 - 4) <= 2 {
        return invalid("special Kähler integral diverges at infinity (too many zeros there)");
    }
    let f = move |z: Complex64, skip: Option<usize>| -> f64 {
        let mut den = lead;
        for (k, r) in roots.iter().enumerate() {
            if Some(k) != skip {
                den *= (z - r).norm();
            }
        }
        z.norm().powi(power) / den
    };
    let roots = if rest.degree() > 0 { find_roots(&rest)? } else { vec![] };
    let radii: Vec<f64> = roots
        .iter()
        .enumerate()
        .map(|(k, zk)| {
            let near = roots
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .map(|(_, zj)| (zk - zj).norm())
                .fold(zk.norm(), f64::min);
            0.5 * near
        })
        .collect();
    if radii.iter().any(|r| !(*r > 0.0)) {
        return numerical("special Kähler integral: repeated roots (base point not regular)");
    }
    let weight = |z: Complex64| -> f64 {
        let mut w = 0.0;
        for (zk, rk) in roots.iter().zip(&radii) {
            let u = (z - zk).norm() / rk;
            if u < 1.0 {
                w += cutoff_chi(u).0;
            }
        }
        w
    };

    // Polar patches: 2 ∫∫ f · χ(r/ρ) r dr dφ, with f·r regular at r = 0.
    let mut total = SkEstimate { value: 0.0, error: 0.0 };
    for (k, (zk, rk)) in roots.iter().zip(&radii).enumerate() {
        let inner = |r: f64| -> f64 {
            let e = integrate_segments(
                |phi| {
                    let z = zk + Complex64::from_polar(r, phi);
                    f(z, Some(k)) * cutoff_chi(r / rk).0
                },
                &angle_breaks(&[]),
                0.1 * q.rel_tol * ring_scale(|phi| f(zk + Complex64::from_polar(r, phi), Some(k))),
                0.1 * q.rel_tol,
            );
            e.map(|e| e.value).unwrap_or(f64::NAN)
        };
        let e = integrate_segments(inner, &[0.0, 0.5 * rk, *rk], 0.0, q.rel_tol)?;
        if !e.value.is_finite() {
            return numerical("special Kähler patch integral failed");
        }
        total.value += 2.0 * e.value;
        total.error += 2.0 * e.error;
    }

    // Cylinder: 2 ∫∫ f (1 − Σ w_k) e^{2s} ds dθ.
    let logs: Vec<f64> = roots.iter().map(|z| z.norm().ln()).collect();
    let (lo, hi) = if logs.is_empty() {
        (0.0, 0.0)
    } else {
        (logs.iter().cloned().fold(f64::INFINITY, f64::min), logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
    };
    let mut sb = vec![lo - q.tail, hi + q.tail];
    for (zk, rk) in roots.iter().zip(&radii) {
        let m = zk.norm();
        for d in [-1.0, -0.5, 0.0, 0.5, 1.0] {
            sb.push((m + d * rk).ln());
        }
    }
    // Extra breaks keep the outer rule from stepping over the long plateau
    // between root clusters.
    let n_extra = ((hi - lo + 2.0 * q.tail) / 4.0).ceil() as usize;
    for i in 0..n_extra {
        sb.push(lo - q.tail + 4.0 * i as f64);
    }
    sb.retain(|s| s.is_finite() && *s >= lo - q.tail && *s <= hi + q.tail);
    sb.sort_by(f64::total_cmp);
    sb.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
    let ring = |s: f64| -> f64 {
        let rad = s.exp();
        // Angles of roots whose patch meets this ring.
        let near: Vec<f64> = roots
            .iter()
            .zip(&radii)
            .filter(|(zk, rk)| (zk.norm() - rad).abs() < **rk)
            .flat_map(|(zk, rk)| {
                let a = zk.arg();
                let h = (*rk / zk.norm()).min(1.0).asin();
                [a - h, a - 0.5 * h, a, a + 0.5 * h, a + h]
            })
            .collect();
        let e = integrate_segments(
            |th| {
                let z = Complex64::from_polar(rad, th);
                let w = weight(z);
                if w >= 1.0 {
                    0.0
                } else {
                    f(z, None) * (1.0 - w) * rad * rad
                }
            },
            &angle_breaks(&near),
            0.1 * q.rel_tol * ring_scale(|th| f(Complex64::from_polar(rad, th), None) * rad * rad),
            0.1 * q.rel_tol,
        );
        e.map(|e| e.value).unwrap_or(f64::NAN)
    };
    let e = integrate_segments(ring, &sb, 0.0, q.rel_tol)?;
    if !e.value.is_finite() {
        return numerical("special Kähler cylinder integral failed");
    }
    total.value += 2.0 * e.value;
    total.error += 2.0 * e.error;
    Ok(total)
}

/// `g_sK` for a family at parameter `t` (ṫ = 1).
pub fn sk_metric_numeric(case: &FourDimCase, t: Complex64, p: &Params, q: SkQuadrature) -> Result<SkEstimate> {
    if t.norm() < 10.0 {
        return invalid(format!("special Kähler integral needs |t| ≥ 10, got {}", t.norm()));
    }
    sk_integral(&case.base_point(t, p)?, q)
}

fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..64 {
        if (a - b).abs() <= 4.0 * f64::EPSILON * a {
            break;
        }
        (a, b) = (0.5 * (a + b), (a * b).sqrt());
    }
    a
}

/// The U4 constant `C₀ = ∫ i dξ dξ̄ / |ξ⁴ − 1|`, by the angular reduction
/// `∫₀^{2π} dθ/|r⁴e^{4iθ} − 1| = 4K(2r²/(1 + r⁴))/(1 + r⁴)`.
/// The integrand is invariant under `ξ ↦ 1/ξ`, so only the unit disk is
/// integrated; `r = 1 − u²` smooths the logarithmic singularity at `r = 1`.
pub fn u4_constant_oracle() -> Result<f64> {
    let g = |u: f64| -> f64 {
        if u == 0.0 {
            return 0.0;
        }
        let r = 1.0 - u * u;
        // K from the complementary modulus k' = (1 − r⁴)/(1 + r⁴), which
        // stays accurate as r → 1.
        let kp = u * u * (2.0 - u * u) * (1.0 + r * r) / (1.0 + r.powi(4));
        let kk = PI / (2.0 * agm(1.0, kp));
        2.0 * r * 4.0 * kk / (1.0 + r.powi(4)) * 2.0 * u
    };
    let half = quad::integrate(g, 0.0, 1.0, 1e-15, 1e-13, 10_000)?;
    Ok(2.0 * half.value)
}

#[derive(Debug, Clone, Serialize)]
pub struct SkFit {
    pub case: CaseId,
    pub form: SkForm,
    /// Fitted exponent of `|t|` (conic families), expected `−e`.
    pub fitted_exponent: Option<f64>,
    pub fitted_constant: Option<f64>,
    /// Fitted slope of `g·|t|` against `ln |t|` (log families).
    pub fitted_log_slope: Option<f64>,
    pub expected: f64,
    pub deviation: f64,
    /// `2π(1 − e/2)` from the fitted exponent.
    pub fitted_cone_angle: Option<f64>,
    pub line: LinearFit,
}

/// Leading-order fit of `(|t|, g_sK)` samples against the family's form.
pub fn sk_leading_fit(case: &FourDimCase, samples: &[(f64, f64)]) -> Result<SkFit> {
    if samples.len() < 5 {
        return invalid(format!("special Kähler fit needs ≥ 5 samples, got {}", samples.len()));
    }
    let (tmin, tmax) = samples.iter().fold((f64::INFINITY, 0.0f64), |(a, b), (t, _)| (a.min(*t), b.max(*t)));
    if !(tmax / tmin >= 99.999) {
        return invalid(format!("special Kähler fit needs two decades of |t|, got [{tmin}, {tmax}]"));
    }
    let ts: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let gs: Vec<f64> = samples.iter().map(|s| s.1).collect();
    match case.sk_form {
        SkForm::Conic { .. } => {
            let e = case.sk_form.exponent().unwrap();
            let (cst, p, line) = power_law_fit(&ts, &gs)?;
            Ok(SkFit {
                case: case.id,
                form: case.sk_form,
                fitted_exponent: Some(p),
                fitted_constant: Some(cst),
                fitted_log_slope: None,
                expected: -e,
                deviation: (p + e).abs(),
                fitted_cone_angle: Some(cone_angle(-p)),
                line,
            })
        }
        SkForm::Log { .. } => {
            let l = case.sk_form.log_coefficient().unwrap();
            let xs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
            let ys: Vec<f64> = ts.iter().zip(&gs).map(|(t, g)| t * g).collect();
            let line = linear_fit(&xs, &ys)?;
            Ok(SkFit {
                case: case.id,
                form: case.sk_form,
                fitted_exponent: None,
                fitted_constant: Some(line.intercept),
                fitted_log_slope: Some(line.slope),
                expected: l,
                deviation: (line.slope - l).abs() / l,
                fitted_cone_angle: None,
                line,
            })
        }
    }
}

// ------------------------------------------------------------ model data

/// Gibbons–Hawking potential `V = κ₀ + (ν/π) ln r` and the coefficients
/// `(V, V, V, V⁻¹)` of the model metric `V(dr² + r²dθ² + dz²) + V⁻¹η²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GibbonsHawking {
    pub v: f64,
    pub coefficients: [f64; 4],
}

pub fn gibbons_hawking_potential(kappa0: f64, nu: f64, r: f64) -> Result<GibbonsHawking> {
    if !(nu > 0.0 && r > 0.0) {
        return invalid("Gibbons–Hawking potential needs ν > 0 and r > 0");
    }
    let v = kappa0 + nu / PI * r.ln();
    if !(v > 0.0) {
        return invalid(format!("V = {v} ≤ 0 at r = {r} (below e^{{−κ₀π/ν}})"));
    }
    Ok(GibbonsHawking { v, coefficients: [v, v, v, 1.0 / v] })
}

/// Check that the model data is self-consistent: the cone angle `2πβ` of an
/// ALG family matches the conic exponent, and an ALG* family's log
/// coefficient matches its `I*_k` label (`L = 2πk`).
pub fn model_consistent(case: &FourDimCase) -> bool {
    match (case.model, case.sk_form) {
        (ModelMetric::Alg { beta_num, beta_den, .. }, SkForm::Conic { exponent_num, exponent_den }) => {
            Ratio::new(2 * beta_num, beta_den) == Ratio::new(2i64, 1) - Ratio::new(exponent_num, exponent_den)
        }
        (ModelMetric::AlgStar { kodaira, log_coefficient_over_pi, .. }, SkForm::Log { coefficient_over_pi }) => {
            let k: u32 = kodaira.trim_start_matches('I').trim_end_matches('*').parse().unwrap_or(0);
            log_coefficient_over_pi == coefficient_over_pi && coefficient_over_pi == 2 * k
        }
        _ => false,
    }
}

// ---------------------------------------------------------------- reports

#[derive(Debug, Clone, Serialize)]
pub struct CaseRow {
    pub t: f64,
    pub g_sk: f64,
    pub g_sk_error: f64,
    pub tau: (f64, f64),
    pub tau_reference: (f64, f64),
    pub abs_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseReport {
    pub case: CaseId,
    pub params: MuMap,
    pub rows: Vec<CaseRow>,
    pub sk_fit: Option<SkFit>,
    pub reference_variant: ReferenceVariant,
    pub model: ModelMetric,
    /// Fitted log slope divided by `(2π)²`, shown next to the Gibbons–Hawking
    /// `ν/π` of the model (ALG* families). The two normalisations are not
    /// identified.
    pub gh_nu_over_pi: Option<f64>,
}

/// Sweep over `ts` (positive, increasing): `g_sK`, tracked `τ`, reference
/// `τ`. `τ` is tracked from the first point along the sweep.
pub fn case_report(
    case: &FourDimCase,
    ts: &[f64],
    p: &Params,
    variant: ReferenceVariant,
    q: SkQuadrature,
) -> Result<CaseReport> {
    use rayon::prelude::*;
    // The quadratures are independent; τ is tracked sequentially below.
    let gs: Vec<SkEstimate> = ts.par_iter().map(|&t| sk_metric_numeric(case, c(t), p, q)).collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(ts.len());
    let mut anchor = None;
    for (&t, g) in ts.iter().zip(gs) {
        let tc = c(t);
        let tau = fiber_tau(case, tc, p, anchor)?;
        anchor = Some(tau);
        let r = tau_reference(case, tc, p, variant)?;
        rows.push(CaseRow {
            t,
            g_sk: g.value,
            g_sk_error: g.error,
            tau: (tau.re, tau.im),
            tau_reference: (r.re, r.im),
            abs_error: (tau - r).norm(),
        });
    }
    let samples: Vec<(f64, f64)> = rows.iter().map(|r| (r.t, r.g_sk)).collect();
    let sk_fit = sk_leading_fit(case, &samples).ok();
    let gh_nu_over_pi = sk_fit.as_ref().and_then(|f| f.fitted_log_slope).map(|l| l / (4.0 * PI * PI));
    Ok(CaseReport {
        case: case.id,
        params: p.map().clone(),
        rows,
        sk_fit,
        reference_variant: variant,
        model: case.model,
        gh_nu_over_pi,
    })
}

impl CaseReport {
    /// `|t|, g_sK, Re τ, Im τ, Re τ_ref, Im τ_ref, |τ − τ_ref|`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| crate::Error::Io(std::io::Error::other(e));
        wr.write_record(["abs_t", "g_sk", "tau_re", "tau_im", "tau_ref_re", "tau_ref_im", "abs_error"]).map_err(io)?;
        for r in &self.rows {
            let f = |x: f64| format!("{x:.16e}");
            wr.write_record([
                f(r.t),
                f(r.g_sk),
                f(r.tau.0),
                f(r.tau.1),
                f(r.tau_reference.0),
                f(r.tau_reference.1),
                f(r.abs_error),
            ])
            .map_err(io)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// `λ(τ)` at the tracked modulus, for the inverse-consistency check.
pub fn lambda_at(tau: Complex64) -> Result<Complex64> {
    Ok(modular_lambda(HalfPlanePoint::new(tau)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn case(id: CaseId) -> (FourDimCase, Params) {
        let cs = FourDimCase::get(id);
        let p = cs.params(&MuMap::new()).unwrap();
        (cs, p)
    }

    #[test]
    fn catalog_is_complete_and_consistent() {
        let cat = case_catalog();
        assert_eq!(cat.len(), 9);
        for cs in &cat {
            assert!(model_consistent(cs), "{:?}", cs.id);
        }
        let u4 = FourDimCase::get(CaseId::U4);
        assert_eq!(u4.model, alg("III*", (3, 4), I));
        assert_eq!(FourDimCase::get(CaseId::T2T2).model, alg_star("I4*", "D0", 8));
        assert!((cone_angle(0.5) - 1.5 * PI).abs() < 1e-15);
        assert!((cone_angle(1.0 / 3.0) - 5.0 * PI / 3.0).abs() < 1e-15);
    }

    #[test]
    fn chart_polynomials_match_base() {
        let t = Complex64::new(37.0, 5.0);
        for cs in case_catalog() {
            let mut over = MuMap::new();
            for (k, v) in &cs.free_mu {
                // generic non-zero values
                let val = if *v == c(0.0) { Complex64::new(0.3, -0.2) } else { *v };
                over.insert(k.to_string(), val);
            }
            let p = cs.params(&over).unwrap();
            let base = tilde_nu(&cs.base_point(t, &p).unwrap()).coefficients;
            let mut chart = cs.chart_polynomial(t, &p).coefficients;
            chart.resize(5, c(0.0));
            let expect: Vec<Complex64> = match cs.id {
                CaseId::T4 | CaseId::T2T2 => {
                    let mut v = vec![c(0.0)];
                    v.extend_from_slice(&chart[..4]);
                    v
                }
                CaseId::U3S | CaseId::T3S => chart.iter().rev().copied().collect(),
                _ => chart.clone(),
            };
            let mut base = base.clone();
            base.resize(5, c(0.0));
            for (a, b) in base.iter().zip(&expect) {
                assert!((a - b).norm() < 1e-12, "{:?}: {base:?} vs {expect:?}", cs.id);
            }
        }
    }

    #[test]
    fn root_expansions_converge() {
        for cs in case_catalog() {
            let mut over = MuMap::new();
            for (k, v) in &cs.free_mu {
                if *v == c(0.0) {
                    over.insert(k.to_string(), Complex64::new(0.5, 0.25));
                }
            }
            let p = cs.params(&over).unwrap();
            let err = |t: f64| {
                let r = labelled_roots(&cs, c(t), &p).unwrap();
                let pr = cs.root_predictions(c(t), &p);
                r.iter().zip(&pr).map(|(a, b)| (a - b).norm() / a.norm().max(1e-300)).fold(0.0, f64::max)
            };
            let (e1, e2) = (err(1e3), err(1e5));
            assert!(e2 < e1 || e2 < 1e-12, "{:?}: {e1:e} {e2:e}", cs.id);
            assert!(e2 < 1e-2, "{:?}: {e2:e}", cs.id);
        }
    }

    #[test]
    fn cross_ratio_examples() {
        let (u4, _) = case(CaseId::U4);
        let l = fiber_cross_ratio(&u4, &[c(1.0), I, c(-1.0), -I]).unwrap();
        assert!((l - 0.5).norm() < 1e-15);
        let (t4, _) = case(CaseId::T4);
        let w = omega();
        let l = fiber_cross_ratio(&t4, &[c(1.0), w, w * w]).unwrap();
        assert!((l - Complex64::from_polar(1.0, -PI / 3.0)).norm() < 1e-14);
        let m = |z: Complex64| (2.0 * z + 1.0) / (z + 3.0);
        let pts = [Some(Complex64::new(0.3, 1.0)), Some(c(-2.0)), Some(Complex64::new(1.0, -1.0)), Some(c(5.0))];
        let l1 = cross_ratio(pts).unwrap();
        let l2 = cross_ratio(pts.map(|z| z.map(m))).unwrap();
        assert!((l1 - l2).norm() < 1e-12);
    }

    #[test]
    fn u4_tau_expansion() {
        let (u4, _) = case(CaseId::U4);
        let p = u4.params(&[("mu7".to_string(), c(1.0))].into()).unwrap();
        let tau = fiber_tau(&u4, c(1e4), &p, None).unwrap();
        let r = tau_expansion_reference(&u4, c(1e4), &p).unwrap();
        assert!((tau - r).norm() < 3.0 * 1e4f64.powf(-0.75), "{tau} vs {r}");
        let p0 = u4.params(&MuMap::new()).unwrap();
        assert!((fiber_tau(&u4, c(1e6), &p0, None).unwrap() - I).norm() < 1e-9);
        let l = fiber_cross_ratio(&u4, &labelled_roots(&u4, c(1e4), &p).unwrap()).unwrap();
        assert!((lambda_at(tau).unwrap() - l).norm() < 1e-9);
    }

    #[test]
    fn rederived_references_converge() {
        // U3S with μ5 ≠ 0 and T2SS with μ0, μ1 ≠ 0 exercise the re-derived terms.
        let u3s = FourDimCase::get(CaseId::U3S);
        let p = u3s.params(&[("mu5".to_string(), c(1.5))].into()).unwrap();
        let e = |t: f64| {
            let tau = fiber_tau(&u3s, c(t), &p, None).unwrap();
            (tau - tau_reference(&u3s, c(t), &p, ReferenceVariant::Rederived).unwrap()).norm()
        };
        let slope = (e(1e4) / e(1e6)).log10() / 2.0;
        assert!(slope > 0.6, "U3S error order {slope}");
        let t2ss = FourDimCase::get(CaseId::T2SS);
        let p = t2ss.params(&[("mu0".to_string(), c(0.4)), ("mu1".to_string(), c(0.7))].into()).unwrap();
        let e = |t: f64, v| {
            let tau = fiber_tau(&t2ss, c(t), &p, None).unwrap();
            (tau - tau_reference(&t2ss, c(t), &p, v).unwrap()).norm()
        };
        let slope = (e(1e3, ReferenceVariant::Rederived) / e(1e5, ReferenceVariant::Rederived)).log10() / 2.0;
        assert!(slope > 1.8, "T2SS error order {slope}");
        assert!(e(1e5, ReferenceVariant::Printed) > 10.0 * e(1e5, ReferenceVariant::Rederived));
    }

    #[test]
    fn torus_metric() {
        let g = torus_pullback_metric(I, I).unwrap();
        assert_eq!(g.g, [[1.0, 0.0], [0.0, 1.0]]);
        let eps = Complex64::new(1e-6, 2e-6);
        let g = torus_pullback_metric(I + eps, I).unwrap();
        // dx² + dy² + Im ε (−dx² + dy²) + 2 Re ε dx dy + O(ε²)
        assert!((g.g[0][0] - (1.0 - eps.im)).abs() < 1e-11);
        assert!((g.g[1][1] - (1.0 + eps.im)).abs() < 1e-11);
        assert!((g.g[0][1] - eps.re).abs() < 1e-11);
        let g = torus_pullback_metric(Complex64::new(0.3, 2.0), omega()).unwrap();
        assert!(g.is_positive_definite());
        assert!((g.area().unwrap() - 4.0 * PI * PI).abs() < 1e-9);
        assert!(torus_pullback_metric(c(1.0), I).is_err());
    }

    #[test]
    fn fiber_curve() {
        for cs in case_catalog() {
            let mut over = MuMap::new();
            for (k, v) in &cs.free_mu {
                if *v == c(0.0) {
                    over.insert(k.to_string(), Complex64::new(0.2, 0.1));
                }
            }
            let p = cs.params(&over).unwrap();
            let t = Complex64::new(300.0, 40.0);
            for (a0, c0) in ramification_points(&cs, t, &p).unwrap() {
                assert!(fiber_curve_check(&cs, t, &p, a0, c0), "{:?}", cs.id);
            }
            assert!(!fiber_curve_check(&cs, t, &p, Complex64::new(1.3, 0.4), Complex64::new(-0.7, 2.0)));
        }
        let (t4, p) = case(CaseId::T4);
        assert!(fiber_curve_check(&t4, c(100.0), &p, c(0.0), c(0.0)));
    }

    #[test]
    fn gibbons_hawking() {
        let g = gibbons_hawking_potential(0.0, PI, std::f64::consts::E).unwrap();
        assert!((g.v - 1.0).abs() < 1e-15);
        assert_eq!(g.coefficients[3], 1.0 / g.v);
        assert!(gibbons_hawking_potential(1.0, PI, (-1.0f64).exp() * 0.9).is_err());
    }

    #[test]
    fn u4_scaling_and_constant() {
        let (u4, p) = case(CaseId::U4);
        let q = SkQuadrature::default();
        let g1 = sk_metric_numeric(&u4, c(1e2), &p, q).unwrap();
        let g2 = sk_metric_numeric(&u4, c(1e4), &p, q).unwrap();
        let (a, b) = (g1.value * 10.0, g2.value * 100.0);
        assert!((a - b).abs() <= (g1.error * 10.0 + g2.error * 100.0).max(1e-12 * a), "{a} {b}");
        let c0 = u4_constant_oracle().unwrap();
        assert!((a - c0).abs() < 1e-6 * c0, "{a} vs oracle {c0}");
    }

    #[test]
    fn sk_fit_synthetic() {
        let (u4, _) = case(CaseId::U4);
        let s: Vec<(f64, f64)> = [1e2, 1e3, 1e4, 1e5, 1e6].iter().map(|&t: &f64| (t, 7.0 * t.powf(-0.5))).collect();
        let f = sk_leading_fit(&u4, &s).unwrap();
        assert!((f.fitted_exponent.unwrap() + 0.5).abs() < 1e-12);
        assert!(sk_leading_fit(&u4, &s[..4]).is_err());
        let narrow: Vec<(f64, f64)> = (0..5).map(|k| (100.0 + k as f64, 1.0)).collect();
        assert!(sk_leading_fit(&u4, &narrow).is_err());
    }

    #[test]
    fn unknown_parameter_rejected() {
        let (u4, _) = case(CaseId::U4);
        assert!(u4.params(&[("mu9".to_string(), c(1.0))].into()).is_err());
        assert!(CaseId::parse("u2ss").is_ok() && CaseId::parse("X").is_err());
    }

    #[test]
    fn conic_scaling_is_exact() {
        let q = SkQuadrature::default();
        for id in [CaseId::T4, CaseId::U3S, CaseId::T3S] {
            let (cs, p) = case(id);
            let e = cs.sk_form.exponent().unwrap();
            let v: Vec<SkEstimate> = [1e2, 1e4].iter().map(|&t| sk_metric_numeric(&cs, c(t), &p, q).unwrap()).collect();
            let (a, b) = (v[0].value * 1e2f64.powf(e), v[1].value * 1e4f64.powf(e));
            let tol = v[0].error * 1e2f64.powf(e) + v[1].error * 1e4f64.powf(e);
            assert!((a - b).abs() <= tol.max(1e-12 * a), "{id:?}: {a} {b} ± {tol}");
        }
    }

    #[test]
    fn tolerance_halving_within_error_estimate() {
        let (cs, p) = case(CaseId::U2T2);
        let t = c(3e3);
        let q = SkQuadrature { rel_tol: 1e-6, ..Default::default() };
        let a = sk_metric_numeric(&cs, t, &p, q).unwrap();
        let b = sk_metric_numeric(&cs, t, &p, SkQuadrature { rel_tol: 5e-7, ..q }).unwrap();
        assert!((a.value - b.value).abs() < 3.0 * a.error, "{a:?} {b:?}");
    }

    #[test]
    fn first_order_insensitive_to_mu7() {
        // z ↦ iz maps μ7 to iμ7, so g has no term linear in μ7; doubling μ7
        // must scale the change by at least 4.
        let u4 = FourDimCase::get(CaseId::U4);
        let q = SkQuadrature::default();
        let g = |m: Complex64| {
            let p = u4.params(&[("mu7".to_string(), m)].into()).unwrap();
            sk_metric_numeric(&u4, c(1e2), &p, q).unwrap().value
        };
        let (g0, g1, g2) = (g(c(0.0)), g(c(0.25)), g(c(0.5)));
        let (d1, d2) = (g1 - g0, g2 - g0);
        assert!((g(c(-0.25)) - g1).abs() < 1e-8 * g0 && (g(I * 0.25) - g1).abs() < 1e-8 * g0);
        assert!(d2 / d1 > 3.5, "{d1} {d2}");
    }

    #[test]
    fn u2u2_log_growth() {
        let (cs, p) = case(CaseId::U2U2);
        let q = SkQuadrature::default();
        let ts: Vec<f64> = (0..5).map(|k| 1e2 * 10f64.powi(k)).collect();
        let samples: Vec<(f64, f64)> =
            ts.iter().map(|&t| (t, sk_metric_numeric(&cs, c(t), &p, q).unwrap().value)).collect();
        let fit = sk_leading_fit(&cs, &samples).unwrap();
        assert!(fit.deviation < 0.01, "{fit:?}");
    }
}
