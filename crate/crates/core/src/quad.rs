//! Quadrature rules: Gauss–Legendre nodes, adaptive Gauss–Kronrod on an
//! interval, and an adaptive tensor-product Gauss–Kronrod cubature on
//! rectangles.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

use crate::error::{numerical, Result};

/// Kronrod abscissae on `[0, 1]` (the rule is symmetric); odd indices are
/// the 7-point Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

/// The 15 Kronrod nodes on `[−1, 1]` with Kronrod and embedded Gauss
/// weights (Gauss weight 0 at non-Gauss nodes).
fn kronrod_rule() -> [(f64, f64, f64); 15] {
    let mut out = [(0.0, 0.0, 0.0); 15];
    let mut k = 0;
    for i in 0..7 {
        let wg = if i % 2 == 1 { WG[i / 2] } else { 0.0 };
        out[k] = (-XGK[i], WGK[i], wg);
        out[k + 1] = (XGK[i], WGK[i], wg);
        k += 2;
    }
    out[14] = (0.0, WGK[7], WG[3]);
    out
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * p - pm) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            dp = 1.0;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n == 1 {
        x[0] = 0.0;
        w[0] = 2.0;
    }
    (x, w)
}

struct Interval {
    a: f64,
    b: f64,
    val: Complex64,
    err: f64,
}

impl PartialEq for Interval {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Interval {}
impl PartialOrd for Interval {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Interval {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.total_cmp(&o.err).then(o.a.total_cmp(&self.a))
    }
}

fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = Complex64::new(0.0, 0.0);
    let mut g = Complex64::new(0.0, 0.0);
    for (x, wk, wg) in kronrod_rule() {
        let v = f(c + h * x);
        k += v * wk;
        g += v * wg;
    }
    (k * h, ((k - g) * h).norm())
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Estimate<T> {
    pub value: T,
    pub error: f64,
}

/// Globally adaptive G7/K15 integration of a complex integrand.
pub fn integrate_complex<F: Fn(f64) -> Complex64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Result<Estimate<Complex64>> {
    let (v, e) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Interval { a, b, val: v, err: e });
    let mut total = v;
    let mut err = e;
    let mut count = 1;
    while err > abs_tol.max(rel_tol * total.norm()) {
        if count >= max_intervals {
            return numerical(format!("adaptive quadrature: error {err:e} after {count} intervals"));
        }
        let iv = heap.pop().unwrap();
        let m = 0.5 * (iv.a + iv.b);
        let (v1, e1) = gk15(&f, iv.a, m);
        let (v2, e2) = gk15(&f, m, iv.b);
        total += v1 + v2 - iv.val;
        err += e1 + e2 - iv.err;
        heap.push(Interval { a: iv.a, b: m, val: v1, err: e1 });
        heap.push(Interval { a: m, b: iv.b, val: v2, err: e2 });
        count += 1;
    }
    // Re-sum from the leaves in a fixed order for reproducibility.
    let mut leaves: Vec<Interval> = heap.into_vec();
    leaves.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value = leaves.iter().fold(Complex64::new(0.0, 0.0), |acc, l| acc + l.val);
    let error = leaves.iter().map(|l| l.err).sum();
    Ok(Estimate { value, error })
}

/// Real-valued wrapper around [`integrate_complex`].
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Result<Estimate<f64>> {
    let e = integrate_complex(|x| Complex64::new(f(x), 0.0), a, b, abs_tol, rel_tol, max_intervals)?;
    Ok(Estimate { value: e.value.re, error: e.error })
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

struct Cell {
    r: Rect,
    val: f64,
    err: f64,
}

impl PartialEq for Cell {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Cell {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.total_cmp(&o.err).then(o.r.x0.total_cmp(&self.r.x0)).then(o.r.y0.total_cmp(&self.r.y0))
    }
}

fn gk15_2d<F: Fn(f64, f64) -> f64>(f: &F, r: Rect) -> (f64, f64) {
    let rule = kronrod_rule();
    let (cx, hx) = (0.5 * (r.x0 + r.x1), 0.5 * (r.x1 - r.x0));
    let (cy, hy) = (0.5 * (r.y0 + r.y1), 0.5 * (r.y1 - r.y0));
    let mut k = 0.0;
    let mut g = 0.0;
    for &(x, wkx, wgx) in &rule {
        let px = cx + hx * x;
        let mut kk = 0.0;
        let mut gg = 0.0;
        for &(y, wky, wgy) in &rule {
            let v = f(px, cy + hy * y);
            kk += wky * v;
            gg += wgy * v;
        }
        k += wkx * kk;
        g += wgx * gg;
    }
    let area = hx * hy;
    (k * area, ((k - g) * area).abs())
}

/// Adaptive tensor G7/K15 cubature over a rectangle. Cells are bisected
/// along their longer side (in units of the initial rectangle) in order of
/// decreasing error estimate.
pub fn integrate_2d<F: Fn(f64, f64) -> f64>(
    f: F,
    rect: Rect,
    abs_tol: f64,
    rel_tol: f64,
    max_cells: usize,
) -> Result<Estimate<f64>> {
    let (sx, sy) = (rect.x1 - rect.x0, rect.y1 - rect.y0);
    let (v, e) = gk15_2d(&f, rect);
    let mut heap = BinaryHeap::new();
    heap.push(Cell { r: rect, val: v, err: e });
    let mut total = v;
    let mut err = e;
    let mut count = 1;
    while err > abs_tol.max(rel_tol * total.abs()) {
        if count >= max_cells {
            return numerical(format!("adaptive cubature: error {err:e} after {count} cells"));
        }
        let c = heap.pop().unwrap();
        let r = c.r;
        let (a, b) = if (r.x1 - r.x0) / sx >= (r.y1 - r.y0) / sy {
            let m = 0.5 * (r.x0 + r.x1);
            (Rect { x1: m, ..r }, Rect { x0: m, ..r })
        } else {
            let m = 0.5 * (r.y0 + r.y1);
            (Rect { y1: m, ..r }, Rect { y0: m, ..r })
        };
        let (v1, e1) = gk15_2d(&f, a);
        let (v2, e2) = gk15_2d(&f, b);
        total += v1 + v2 - c.val;
        err += e1 + e2 - c.err;
        heap.push(Cell { r: a, val: v1, err: e1 });
        heap.push(Cell { r: b, val: v2, err: e2 });
        count += 1;
    }
    let mut leaves = heap.into_vec();
    leaves.sort_by(|p, q| p.r.x0.total_cmp(&q.r.x0).then(p.r.y0.total_cmp(&q.r.y0)));
    Ok(Estimate { value: leaves.iter().map(|l| l.val).sum(), error: leaves.iter().map(|l| l.err).sum() })
}
