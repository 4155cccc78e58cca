//! SL(2,R) elements, the three flows and Lie derivatives along right translations.
//!
//! Conventions: the Lie algebra basis is
//! `U = [[0,1],[0,0]]`, `X = diag(1/2,-1/2)`, `V = [[0,0],[1,0]]`, with
//! `Y = [[0,-1/2],[-1/2,0]]` and `Theta = [[0,1/2],[-1/2,0]]`.
//! All flows act by right multiplication, `x.flow(F, t) = x * exp(t W_F)`.

use serde::{Deserialize, Serialize};
use std::ops::Mul;

use crate::error::{Error, Result};

/// Frobenius norm above which an element is considered ill-conditioned.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Flow {
    Horocycle,
    Geodesic,
    Unstable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LieDirection {
    U,
    X,
    V,
    Y,
    Theta,
}

/// `u U + x X + v V`, a general element of sl(2,R).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LieAlgebraElement {
    pub u: f64,
    pub x: f64,
    pub v: f64,
}

/// `g = n(x) a(y) k(theta)` with `n(x) = [[1,x],[0,1]]`, `a(y) = diag(sqrt y, 1/sqrt y)`
/// and `k(theta) = [[cos, -sin],[sin, cos]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IwasawaCoords {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Derivative {
    pub value: f64,
    pub error: f64,
}

impl GroupElement {
    pub const IDENTITY: GroupElement = GroupElement { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };

    /// Builds an element from its entries, rescaling so that the determinant is one.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let det = a * d - b * c;
        if !(det.is_finite() && det > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "matrix [[{a}, {b}], [{c}, {d}]] has non-positive determinant {det}"
            )));
        }
        let g = GroupElement { a, b, c, d }.scaled(1.0 / det.sqrt());
        g.check_conditioning()?;
        Ok(g)
    }

    pub fn from_array(m: [f64; 4]) -> Result<Self> {
        Self::new(m[0], m[1], m[2], m[3])
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    fn scaled(&self, s: f64) -> Self {
        GroupElement { a: self.a * s, b: self.b * s, c: self.c * s, d: self.d * s }
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn inverse(&self) -> Self {
        GroupElement { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    fn check_conditioning(&self) -> Result<()> {
        let n = self.frobenius_sq().sqrt();
        if !n.is_finite() || n > CONDITION_LIMIT {
            return Err(Error::IllConditioned(n));
        }
        Ok(())
    }

    // Only corrects rounding drift; for large entries the computed determinant is
    // dominated by cancellation and rescaling by it would add noise.
    fn renormalized(self) -> Self {
        let det = self.det();
        let scale = (self.a * self.d).abs() + (self.b * self.c).abs();
        if (det - 1.0).abs() > 1e-13 && det > 0.0 && scale < 1e6 {
            self.scaled(1.0 / det.sqrt())
        } else {
            self
        }
    }

    /// Checked product `self * other`.
    pub fn compose(&self, other: &GroupElement) -> Result<Self> {
        let g = *self * *other;
        g.check_conditioning()?;
        Ok(g)
    }

    pub fn flow(&self, which: Flow, t: f64) -> Self {
        *self * flow_matrix(which, t)
    }

    pub fn horocycle(&self, t: f64) -> Self {
        self.flow(Flow::Horocycle, t)
    }

    pub fn geodesic(&self, t: f64) -> Self {
        self.flow(Flow::Geodesic, t)
    }

    pub fn translate(&self, w: LieAlgebraElement, tau: f64) -> Self {
        *self * w.exp(tau)
    }

    /// `y = 1/(c^2+d^2)` is the imaginary part of `g.i`, so it only depends on the bottom row.
    pub fn iwasawa(&self) -> IwasawaCoords {
        let n = self.c * self.c + self.d * self.d;
        let x = (self.a * self.c + self.b * self.d) / n;
        let mut theta = self.c.atan2(self.d);
        if theta < 0.0 {
            theta += std::f64::consts::TAU;
        }
        if theta >= std::f64::consts::TAU {
            theta = 0.0;
        }
        IwasawaCoords { x, y: 1.0 / n, theta }
    }

    /// Max entrywise distance.
    pub fn distance_sup(&self, other: &GroupElement) -> f64 {
        (self.a - other.a)
            .abs()
            .max((self.b - other.b).abs())
            .max((self.c - other.c).abs())
            .max((self.d - other.d).abs())
    }
}

impl Mul for GroupElement {
    type Output = GroupElement;

    fn mul(self, o: GroupElement) -> GroupElement {
        GroupElement {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
        .renormalized()
    }
}

impl IwasawaCoords {
    pub fn to_group(&self) -> GroupElement {
        let sy = self.y.sqrt();
        let (s, c) = self.theta.sin_cos();
        GroupElement {
            a: sy * c + self.x * s / sy,
            b: -sy * s + self.x * c / sy,
            c: s / sy,
            d: c / sy,
        }
    }
}

pub fn flow_matrix(which: Flow, t: f64) -> GroupElement {
    match which {
        Flow::Horocycle => GroupElement { a: 1.0, b: t, c: 0.0, d: 1.0 },
        Flow::Geodesic => GroupElement { a: (t / 2.0).exp(), b: 0.0, c: 0.0, d: (-t / 2.0).exp() },
        Flow::Unstable => GroupElement { a: 1.0, b: 0.0, c: t, d: 1.0 },
    }
}

impl LieDirection {
    pub const ALL: [LieDirection; 5] =
        [LieDirection::U, LieDirection::X, LieDirection::V, LieDirection::Y, LieDirection::Theta];

    pub fn element(self) -> LieAlgebraElement {
        match self {
            LieDirection::U => LieAlgebraElement { u: 1.0, x: 0.0, v: 0.0 },
            LieDirection::X => LieAlgebraElement { u: 0.0, x: 1.0, v: 0.0 },
            LieDirection::V => LieAlgebraElement { u: 0.0, x: 0.0, v: 1.0 },
            LieDirection::Y => LieAlgebraElement { u: -0.5, x: 0.0, v: -0.5 },
            LieDirection::Theta => LieAlgebraElement { u: 0.5, x: 0.0, v: -0.5 },
        }
    }

    pub fn matrix(self) -> [[f64; 2]; 2] {
        self.element().matrix()
    }

    pub fn exp(self, tau: f64) -> GroupElement {
        self.element().exp(tau)
    }
}

impl From<LieDirection> for LieAlgebraElement {
    fn from(d: LieDirection) -> Self {
        d.element()
    }
}

impl LieAlgebraElement {
    pub fn new(u: f64, x: f64, v: f64) -> Self {
        LieAlgebraElement { u, x, v }
    }

    pub fn matrix(&self) -> [[f64; 2]; 2] {
        [[self.x / 2.0, self.u], [self.v, -self.x / 2.0]]
    }

    pub fn from_matrix(m: [[f64; 2]; 2]) -> Self {
        LieAlgebraElement { u: m[0][1], x: m[0][0] - m[1][1], v: m[1][0] }
    }

    pub fn norm(&self) -> f64 {
        (self.u * self.u + self.x * self.x + self.v * self.v).sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        LieAlgebraElement { u: self.u * s, x: self.x * s, v: self.v * s }
    }

    /// `[self, other]` as a matrix commutator.
    pub fn bracket(&self, other: &LieAlgebraElement) -> LieAlgebraElement {
        let p = self.matrix();
        let q = other.matrix();
        let pq = mat_mul(p, q);
        let qp = mat_mul(q, p);
        LieAlgebraElement::from_matrix([
            [pq[0][0] - qp[0][0], pq[0][1] - qp[0][1]],
            [pq[1][0] - qp[1][0], pq[1][1] - qp[1][1]],
        ])
    }

    /// `exp(tau M)` using `M^2 = delta I` for traceless `M`.
    pub fn exp(&self, tau: f64) -> GroupElement {
        let m = self.scale(tau).matrix();
        let delta = m[0][0] * m[0][0] + m[0][1] * m[1][0];
        let (ch, sh) = if delta > 1e-300 {
            let r = delta.sqrt();
            (r.cosh(), r.sinh() / r)
        } else if delta < -1e-300 {
            let r = (-delta).sqrt();
            (r.cos(), r.sin() / r)
        } else {
            (1.0, 1.0)
        };
        GroupElement {
            a: ch + sh * m[0][0],
            b: sh * m[0][1],
            c: sh * m[1][0],
            d: ch + sh * m[1][1],
        }
    }
}

fn mat_mul(p: [[f64; 2]; 2], q: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [
        [p[0][0] * q[0][0] + p[0][1] * q[1][0], p[0][0] * q[0][1] + p[0][1] * q[1][1]],
        [p[1][0] * q[0][0] + p[1][1] * q[1][0], p[1][0] * q[0][1] + p[1][1] * q[1][1]],
    ]
}

// Two Richardson levels on top of a symmetric difference quotient whose error
// expands in even powers of the step.
fn richardson(d: [f64; 3]) -> Derivative {
    let r1a = (4.0 * d[1] - d[0]) / 3.0;
    let r1b = (4.0 * d[2] - d[1]) / 3.0;
    let r2 = (16.0 * r1b - r1a) / 15.0;
    Derivative { value: r2, error: (r2 - r1b).abs() }
}

/// Finite-difference derivative of `f` along the right-invariant direction `w` at `g`.
///
/// `order` 1 gives `Wf(g)`, `order` 2 gives `W^2 f(g)`.
pub fn lie_derivative<F>(f: F, w: impl Into<LieAlgebraElement>, g: &GroupElement, order: u8) -> Result<Derivative>
where
    F: Fn(&GroupElement) -> f64,
{
    let w = w.into();
    let h0 = match order {
        1 => 1e-2,
        2 => 2e-2,
        _ => return Err(Error::InvalidParameter(format!("derivative order {order} not in {{1,2}}"))),
    };
    let f0 = if order == 2 { f(g) } else { 0.0 };
    let mut d = [0.0; 3];
    for (i, di) in d.iter_mut().enumerate() {
        let h = h0 / f64::from(1u32 << i);
        let fp = f(&g.translate(w, h));
        let fm = f(&g.translate(w, -h));
        *di = if order == 1 { (fp - fm) / (2.0 * h) } else { (fp - 2.0 * f0 + fm) / (h * h) };
    }
    let out = richardson(d);
    if !out.value.is_finite() {
        return Err(Error::InvalidParameter("non-finite derivative".into()));
    }
    Ok(out)
}

/// `W1 W2 f(g)`, i.e. the mixed derivative of `f(g exp(s W1) exp(t W2))` at the origin.
pub fn lie_derivative_mixed<F>(
    f: F,
    w1: impl Into<LieAlgebraElement>,
    w2: impl Into<LieAlgebraElement>,
    g: &GroupElement,
) -> Result<Derivative>
where
    F: Fn(&GroupElement) -> f64,
{
    let (w1, w2) = (w1.into(), w2.into());
    let mut d = [0.0; 3];
    for (i, di) in d.iter_mut().enumerate() {
        let h = 2e-2 / f64::from(1u32 << i);
        let at = |s: f64, t: f64| f(&(g.translate(w1, s) * w2.exp(t)));
        *di = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h);
    }
    let out = richardson(d);
    if !out.value.is_finite() {
        return Err(Error::InvalidParameter("non-finite derivative".into()));
    }
    Ok(out)
}

/// Casimir `□f = -X^2 f + X f - U V f` by finite differences.
pub fn casimir_apply<F>(f: F, g: &GroupElement) -> Result<Derivative>
where
    F: Fn(&GroupElement) -> f64,
{
    let xx = lie_derivative(&f, LieDirection::X, g, 2)?;
    let x = lie_derivative(&f, LieDirection::X, g, 1)?;
    let uv = lie_derivative_mixed(&f, LieDirection::U, LieDirection::V, g)?;
    Ok(Derivative { value: -xx.value + x.value - uv.value, error: xx.error + x.error + uv.error })
}
