//! Adaptive composite Gauss-Legendre quadrature.
//!
//! Each panel is integrated with the 16-node rule and again on its two halves;
//! the panel is accepted when the two agree, and the difference is reported as
//! its error. The reported error is therefore conservative.

use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

use crate::error::{Error, Result};

pub const NODES: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadOptions {
    pub max_panel: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_depth: u32,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions { max_panel: 0.25, abs_tol: 1e-13, rel_tol: 1e-13, max_depth: 30 }
    }
}

impl std::ops::Add for Integral {
    type Output = Integral;
    fn add(self, o: Integral) -> Integral {
        Integral { value: self.value + o.value, error: self.error + o.error }
    }
}

impl Integral {
    pub const ZERO: Integral = Integral { value: 0.0, error: 0.0 };

    pub fn scale(self, s: f64) -> Integral {
        Integral { value: self.value * s, error: self.error * s.abs() }
    }
}

/// Nodes and weights on [-1, 1], found by Newton iteration on the Legendre polynomial.
pub fn gauss_legendre() -> &'static ([f64; NODES], [f64; NODES]) {
    static RULE: OnceLock<([f64; NODES], [f64; NODES])> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = NODES;
        let mut x = [0.0; NODES];
        let mut w = [0.0; NODES];
        for i in 0..n {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, z);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
                let dz = p1 / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            x[i] = z;
            w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        }
        (x, w)
    })
}

/// Fixed 16-node rule on `[a, b]`; also returns the sum of `|f| * weight` for the round-off floor.
fn gl_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let (x, w) = gauss_legendre();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut s = 0.0;
    let mut sa = 0.0;
    for i in 0..NODES {
        let v = f(mid + half * x[i]);
        s += w[i] * v;
        sa += w[i] * v.abs();
    }
    (s * half, sa * half.abs())
}

/// Integrates `f` over `[a, b]` (orientation respected).
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<Integral> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Quadrature(format!("non-finite interval [{a}, {b}]")));
    }
    if a == b {
        return Ok(Integral::ZERO);
    }
    if b < a {
        return integrate(f, b, a, opts).map(|i| i.scale(-1.0));
    }
    let total = b - a;
    let panels = (total / opts.max_panel).ceil().max(1.0) as usize;
    let h = total / panels as f64;
    let mut out = Integral::ZERO;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let hi = if p + 1 == panels { b } else { lo + h };
        let tol = opts.abs_tol * (hi - lo) / total;
        out = out + adapt(&f, lo, hi, tol, opts, 0)?;
    }
    if !out.value.is_finite() {
        return Err(Error::Quadrature("non-finite integrand".into()));
    }
    Ok(out)
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, opts: &QuadOptions, depth: u32) -> Result<Integral> {
    let mid = 0.5 * (a + b);
    let (whole, _) = gl_panel(f, a, b);
    let (left, la) = gl_panel(f, a, mid);
    let (right, ra) = gl_panel(f, mid, b);
    let fine = left + right;
    let diff = (fine - whole).abs();
    // integrands built from long matrix products carry relative noise well above epsilon
    let floor = 1e-12 * (la + ra);
    if diff <= tol.max(opts.rel_tol * fine.abs()).max(floor) {
        return Ok(Integral { value: fine, error: diff });
    }
    if !diff.is_finite() {
        return Err(Error::Quadrature(format!("non-finite integrand on [{a}, {b}]")));
    }
    if depth >= opts.max_depth {
        // at this width the disagreement is round-off in the integrand itself
        if diff < 1e-12 || diff <= 1e-9 * (la + ra) {
            return Ok(Integral { value: fine, error: diff });
        }
        return Err(Error::Quadrature(format!("no convergence on [{a}, {b}] (difference {diff:e})")));
    }
    Ok(adapt(f, a, mid, tol / 2.0, opts, depth + 1)? + adapt(f, mid, b, tol / 2.0, opts, depth + 1)?)
}

/// Integrates over consecutive segments between `points`, useful when `f` has kinks there.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: F, points: &[f64], opts: &QuadOptions) -> Result<Integral> {
    let mut out = Integral::ZERO;
    for w in points.windows(2) {
        out = out + integrate(&f, w[0], w[1], opts)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two_and_polynomials_exact() {
        let (x, w) = gauss_legendre();
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        // degree 31 polynomials are integrated exactly
        let s: f64 = (0..NODES).map(|i| w[i] * x[i].powi(30)).sum();
        assert!((s - 2.0 / 31.0).abs() < 1e-14);
    }

    #[test]
    fn exponential_and_oscillatory() {
        let o = QuadOptions::default();
        let i = integrate(|t: f64| (-t).exp(), 0.0, 30.0, &o).unwrap();
        assert!((i.value - (1.0 - (-30.0f64).exp())).abs() < 1e-13);
        let j = integrate(|t: f64| (5.0 * t).sin(), 0.0, 10.0, &o).unwrap();
        assert!((j.value - (1.0 - 50.0f64.cos()) / 5.0).abs() < 1e-13);
    }

    #[test]
    fn orientation_and_empty() {
        let o = QuadOptions::default();
        let i = integrate(|t: f64| t, 2.0, 0.0, &o).unwrap();
        assert!((i.value + 2.0).abs() < 1e-14);
        assert_eq!(integrate(|t: f64| t, 1.0, 1.0, &o).unwrap().value, 0.0);
    }

    #[test]
    fn kink_handled_by_pieces() {
        let o = QuadOptions::default();
        let f = |t: f64| (t - 0.3).abs();
        let i = integrate_pieces(f, &[0.0, 0.3, 1.0], &o).unwrap();
        assert!((i.value - (0.045 + 0.245)).abs() < 1e-14);
    }
}
