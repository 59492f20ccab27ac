//! Residual of the glued approximate metric.
//!
//! Near each zero of `ν̃` the approximate metric is the limiting metric
//! corrected by a fiducial profile `L(r)`, switched off by a cutoff
//! `χ(a r)` across the annulus `1/2 ≤ a r ≤ 1`. There the Hitchin equation
//! fails by `E σ₃` with
//!
//! `E = −¼ Δ_r(χL) + C(r) sinh(2χL)`, `Δ_r f = f'' + f'/r`,
//!
//! where `C = 2λ² r` at a moving zero and `C = 2λ²/r` at a parabolic
//! center. Since `L` itself solves `−¼ Δ_r L + C sinh 2L = 0`, this is
//! evaluated as
//!
//! `E = −¼ (2a L'χ' + a² L χ'' + a L χ'/r) + C (sinh(2χL) − χ sinh 2L)`,
//!
//! which is free of cancellation and vanishes exactly wherever `χ ∈ {0, 1}`.
//! Norms are computed in log space: at large `t` the profile is deep in its
//! `A K₀` tail and `|E|` is far below the smallest double.

use std::f64::consts::PI;

use num_rational::Ratio;
use serde::Serialize;

use crate::base::{compute_sigma, BasePoint, PoleKind};
use crate::error::{invalid, Result};
use crate::painleve::{FiducialProfile, ProfileExponent};
use crate::quad::gauss_legendre;
use crate::spectral::{local_masses, spectral_roots, RootClass};

fn bump(u: f64) -> (f64, f64, f64) {
    if u <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let f = (-1.0 / u).exp();
    let u2 = u * u;
    (f, f / u2, f * (1.0 / (u2 * u2) - 2.0 / (u2 * u)))
}

/// Canonical cutoff `χ(s) = f(2−2s)/(f(2−2s) + f(2s−1))`, `f(u) = e^{−1/u}`,
/// with its first two derivatives. `χ = 1` for `s ≤ 1/2`, `0` for `s ≥ 1`.
pub fn cutoff_chi(s: f64) -> (f64, f64, f64) {
    if s <= 0.5 {
        return (1.0, 0.0, 0.0);
    }
    if s >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let (fa, fa1, fa2) = bump(2.0 - 2.0 * s);
    let (fb, fb1, fb2) = bump(2.0 * s - 1.0);
    let (a, a1, a2) = (fa, -2.0 * fa1, 4.0 * fa2);
    let (b, b1, b2) = (fb, 2.0 * fb1, 4.0 * fb2);
    let sum = a + b;
    let ds = a1 + b1;
    let num = a1 * b - a * b1;
    let dnum = a2 * b - a * b2;
    (a / sum, num / (sum * sum), dnum / (sum * sum) - 2.0 * num * ds / (sum * sum * sum))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiskKind {
    MovingZero,
    Tame,
}

impl DiskKind {
    fn exponent(&self) -> ProfileExponent {
        match self {
            DiskKind::MovingZero => ProfileExponent::ThreeHalves,
            DiskKind::Tame => ProfileExponent::Half,
        }
    }

    fn coupling(&self, lambda: f64, r: f64) -> f64 {
        match self {
            DiskKind::MovingZero => 2.0 * lambda * lambda * r,
            DiskKind::Tame => 2.0 * lambda * lambda / r,
        }
    }
}

/// Diagonal entries of the approximate metric in the normal-form frame,
/// with the cutoff evaluated at `r / cutoff_scale`.
pub fn approx_metric_entries(
    profile: &FiducialProfile,
    lambda: f64,
    r: f64,
    kind: DiskKind,
    cutoff_scale: f64,
) -> Result<(f64, f64)> {
    if !(r > 0.0 && lambda > 0.0 && cutoff_scale > 0.0) {
        return invalid("approx_metric_entries needs r, λ, cutoff scale > 0");
    }
    let (chi, _, _) = cutoff_chi(r / cutoff_scale);
    let l = if chi == 0.0 {
        0.0
    } else {
        let (rho, _, _) = kind.exponent().argument(lambda, r);
        profile.eval(rho)?.0
    };
    Ok(match kind {
        DiskKind::MovingZero => (r.sqrt() * (chi * l).exp(), (-chi * l).exp() / r.sqrt()),
        DiskKind::Tame => (r.sqrt() * (chi * l).exp(), r.powf(1.5) * (-chi * l).exp()),
    })
}

/// `sinh(2χL) − χ sinh(2L)` without cancellation for small `L`.
fn sinh_defect(l: f64, chi: f64) -> f64 {
    let x = 2.0 * l;
    if x.abs() > 0.1 {
        return (chi * x).sinh() - chi * x.sinh();
    }
    // Σ_{k≥1} x^{2k+1}(χ^{2k+1} − χ)/(2k+1)!
    let mut s = 0.0;
    let mut xp = x;
    let mut cp = chi;
    let mut fact = 1.0;
    for k in 1..10 {
        xp *= x * x;
        cp *= chi * chi;
        fact *= (2 * k) as f64 * (2 * k + 1) as f64;
        s += xp * (cp - chi) / fact;
    }
    s
}

/// `E(r)` as `(sign, ln|E|)`; `None` where `E` vanishes identically.
pub fn residual_log(
    profile: &FiducialProfile,
    lambda: f64,
    a: f64,
    kind: DiskKind,
    r: f64,
) -> Result<Option<(f64, f64)>> {
    if !(r > 0.0) {
        return invalid(format!("residual at negative radius {r}"));
    }
    let (chi, dchi, d2chi) = cutoff_chi(a * r);
    if dchi == 0.0 && d2chi == 0.0 {
        return Ok(None);
    }
    let (rho, rho_r, _) = kind.exponent().argument(lambda, r);
    if rho < profile.rho_min {
        return invalid(format!("profile coverage gap: ρ = {rho:e} below rho_min = {:e}", profile.rho_min));
    }
    let c = kind.coupling(lambda, r);
    let (l, lp, nonlinear, log_scale) = if rho <= profile.rho_max {
        let (psi, dpsi, _) = profile.eval(rho)?;
        (psi, dpsi * rho_r, c * sinh_defect(psi, chi), 0.0)
    } else {
        // Scaled by e^{ρ}; the nonlinear defect is O(L³), i.e. e^{−2ρ}
        // relative to the rest, and is dropped.
        let (psi, dpsi, _) = profile.eval_tail_scaled(rho)?;
        (psi, dpsi * rho_r, 0.0, -rho)
    };
    let e = -0.25 * (2.0 * a * lp * dchi + a * a * l * d2chi + a * l * dchi / r) + nonlinear;
    if e == 0.0 {
        return Ok(None);
    }
    Ok(Some((e.signum(), e.abs().ln() + log_scale)))
}

/// `E(r)` for a disk of cluster size `jx` at parameter `t` with cutoff
/// constant `κ` (the annulus is `κt^{−1/jx}/2 ≤ r ≤ κt^{−1/jx}` for moving
/// zeros, `κ/2 ≤ r ≤ κ` at parabolic centers). Underflows to 0 deep in the
/// tail; use [`residual_log`] there.
pub fn residual_profile(
    profile: &FiducialProfile,
    lambda: f64,
    t: f64,
    jx: u32,
    kappa: f64,
    kind: DiskKind,
    r: f64,
) -> Result<f64> {
    let a = annulus_scale(t, jx, kappa, kind);
    Ok(match residual_log(profile, lambda, a, kind, r)? {
        None => 0.0,
        Some((s, l)) => s * l.exp(),
    })
}

/// Inverse outer radius `a` of the cutoff annulus.
pub fn annulus_scale(t: f64, jx: u32, kappa: f64, kind: DiskKind) -> f64 {
    match kind {
        DiskKind::MovingZero => t.powf(1.0 / jx as f64) / kappa,
        DiskKind::Tame => 1.0 / kappa,
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Quadrature resolution for the annulus integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnnulusQuadrature {
    /// Gauss–Legendre nodes per panel.
    pub nodes: usize,
    /// Ratio between consecutive panel widths.
    pub growth: f64,
}

impl Default for AnnulusQuadrature {
    fn default() -> Self {
        Self { nodes: 16, growth: 1.1 }
    }
}

/// Norms of `E` over one annulus, in log space.
#[derive(Debug, Clone, Serialize)]
pub struct DiskNorm {
    pub log_l2: f64,
    pub log_sup: f64,
}

/// `‖E‖²_{L²} = 2π ∫ E(r)² r dr` and `sup |E|` over the annulus
/// `1/2 ≤ a r ≤ 1`.
///
/// In `x = 2ar − 1 ∈ (0, 1)` the integrand peaks near the inner edge, where
/// the cutoff derivatives (`~e^{−1/x}`) meet the exponential decay of the
/// profile; panels are therefore graded geometrically away from `x = 0`.
pub fn disk_norm(
    profile: &FiducialProfile,
    lambda: f64,
    a: f64,
    kind: DiskKind,
    q: AnnulusQuadrature,
) -> Result<DiskNorm> {
    let (gx, gw) = gauss_legendre(q.nodes);
    let x_min = 1e-6;
    let mut breaks = vec![0.0, x_min];
    let mut w = x_min * (q.growth - 1.0).max(1e-3);
    while *breaks.last().unwrap() < 1.0 {
        let next = (breaks.last().unwrap() + w).min(1.0);
        breaks.push(next);
        w *= q.growth;
    }
    let mut terms = Vec::with_capacity(breaks.len() * q.nodes);
    let mut log_sup = f64::NEG_INFINITY;
    for pair in breaks.windows(2) {
        let (x0, x1) = (pair[0], pair[1]);
        let h = 0.5 * (x1 - x0);
        for (xi, wi) in gx.iter().zip(&gw) {
            let x = 0.5 * (x0 + x1) + h * xi;
            let r = (1.0 + x) / (2.0 * a);
            if let Some((_, le)) = residual_log(profile, lambda, a, kind, r)? {
                log_sup = log_sup.max(le);
                // dr = dx / (2a)
                terms.push((wi * h / (2.0 * a) * r).ln() + 2.0 * le);
            }
        }
    }
    let log_int = log_sum_exp(&terms);
    Ok(DiskNorm { log_l2: 0.5 * ((2.0 * PI).ln() + log_int), log_sup })
}

/// The solved profiles available to the residual computation.
#[derive(Debug, Clone)]
pub struct ProfileSet {
    pub psi1: FiducialProfile,
    /// Parabolic profiles, looked up by `α₁`.
    pub psi2: Vec<FiducialProfile>,
}

impl ProfileSet {
    pub fn psi2_for(&self, alpha1: f64) -> Result<&FiducialProfile> {
        self.psi2
            .iter()
            .find(|p| p.alpha1.map(|a| (a - alpha1).abs() < 1e-12).unwrap_or(false))
            .ok_or_else(|| crate::Error::InvalidInput(format!("no ψ2 profile for α₁ = {alpha1}")))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DiskResidual {
    pub root_id: usize,
    pub kind: DiskKind,
    pub local_mass: f64,
    /// Inverse outer radius of the cutoff annulus.
    pub annulus_scale: f64,
    pub log_l2: f64,
    pub log_sup: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub t: f64,
    pub disks: Vec<DiskResidual>,
    /// `ln ‖E‖_{L²}` over all annuli; `total² = Σ disk²`.
    pub log_total_l2: f64,
    /// `‖E‖_{L²}`, or 0 when it is below the smallest positive double (see
    /// `log_total_l2`).
    pub total_l2: f64,
    pub sigma: String,
    pub sigma_value: f64,
}

/// Residual norms over every cutoff annulus of the base point.
///
/// `t` is taken as `|ν_{N−4}|`. Moving zeros use `ψ1` with annulus scale
/// `κ⁻¹t^{1/j}`, parabolic centers use `ψ2` (for their weight) with scale
/// `κ⁻¹`. Twisted centers carry no fiducial correction.
pub fn residual_l2_norm(
    base: &BasePoint,
    profiles: &ProfileSet,
    kappa: f64,
    q: AnnulusQuadrature,
) -> Result<ResidualReport> {
    if !(kappa > 0.0) {
        return invalid("κ must be positive");
    }
    let t = base.top_coefficient().norm();
    let roots = spectral_roots(base)?;
    let data = local_masses(base, &roots)?;
    let mut disks = Vec::new();
    for (id, rec) in data.roots.iter().enumerate() {
        let (kind, profile, a) = match rec.class {
            RootClass::MovingZero => {
                let j = rec
                    .cluster
                    .ok_or_else(|| crate::Error::InvalidInput(format!("zero {id} not matched to a cluster")))?;
                (DiskKind::MovingZero, &profiles.psi1, annulus_scale(t, j, kappa, DiskKind::MovingZero))
            }
            RootClass::TameCenter => {
                let pole = &base.divisor.poles[rec.pole.unwrap()];
                debug_assert_eq!(pole.kind, PoleKind::Tame);
                (DiskKind::Tame, profiles.psi2_for(pole.weights.0)?, 1.0 / kappa)
            }
            RootClass::TwistedCenter => continue,
        };
        let n = disk_norm(profile, rec.local_mass, a, kind, q)?;
        disks.push(DiskResidual {
            root_id: id,
            kind,
            local_mass: rec.local_mass,
            annulus_scale: a,
            log_l2: n.log_l2,
            log_sup: n.log_sup,
        });
    }
    let sq: Vec<f64> = disks.iter().map(|d| 2.0 * d.log_l2).collect();
    let log_total = 0.5 * log_sum_exp(&sq);
    let sigma: Ratio<i64> = compute_sigma(&base.divisor)?;
    Ok(ResidualReport {
        t,
        disks,
        log_total_l2: log_total,
        total_l2: log_total.exp(),
        sigma: format!("{}/{}", sigma.numer(), sigma.denom()),
        sigma_value: *sigma.numer() as f64 / *sigma.denom() as f64,
    })
}

/// Least-squares fit `ln‖E‖ ≈ ln c − c′ t^σ`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecayFit {
    pub sigma: f64,
    pub log_c: f64,
    pub c: f64,
    pub cprime: f64,
    pub r_squared: f64,
}

pub fn decay_fit(samples: &[(f64, f64)], sigma: f64) -> Result<DecayFit> {
    if samples.len() < 4 {
        return invalid(format!("decay fit needs at least 4 samples, got {}", samples.len()));
    }
    if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return invalid("decay fit needs strictly increasing t");
    }
    let xs: Vec<f64> = samples.iter().map(|(t, _)| t.powf(sigma)).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let line = crate::fit::linear_fit(&xs, &ys)?;
    Ok(DecayFit {
        sigma,
        log_c: line.intercept,
        c: line.intercept.exp(),
        cprime: -line.slope,
        r_squared: line.r_squared,
    })
}

/// Fit with `σ` free: the `σ ∈ [0.05, 2]` maximising `R²`.
pub fn decay_fit_free_sigma(samples: &[(f64, f64)]) -> Result<DecayFit> {
    let score = |s: f64| decay_fit(samples, s).map(|f| f.r_squared).unwrap_or(f64::NEG_INFINITY);
    let grid: Vec<f64> = (0..=390).map(|k| 0.05 + 0.005 * k as f64).collect();
    let mut best = grid[0];
    for &s in &grid {
        if score(s) > score(best) {
            best = s;
        }
    }
    let (mut lo, mut hi) = ((best - 0.005).max(0.05), (best + 0.005).min(2.0));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let (m1, m2) = (hi - g * (hi - lo), lo + g * (hi - lo));
        if score(m1) >= score(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    decay_fit(samples, 0.5 * (lo + hi))
}

/// Decay table: one `t, ln ‖E‖_{L²}` row per report.
pub fn write_decay_csv<W: std::io::Write>(reports: &[ResidualReport], w: W) -> Result<()> {
    let io = |e: csv::Error| crate::Error::Io(std::io::Error::other(e));
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["t", "log_total_l2_norm"]).map_err(io)?;
    for r in reports {
        wr.write_record([format!("{:.16e}", r.t), format!("{:.16e}", r.log_total_l2)]).map_err(io)?;
    }
    wr.flush()?;
    Ok(())
}
