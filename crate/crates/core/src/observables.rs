//! Closed-form Casimir eigenfunctions on SL(2,R) and their window norms.
//!
//! Every observable is the real part of a finite sum of terms
//! `coeff * N^sigma * e^{i k theta}` where `N = c^2 + d^2` and `theta = arg(d + i c)`
//! are read off the bottom row `(c, d)` of the group element. Right-invariant
//! vector fields map such a sum to another one with the same exponents `sigma`,
//! so all derivatives are available exactly.
//!
//! On functions of the bottom row, `U = c d/dd`, `V = d d/dc` and
//! `X = (c d/dc - d d/dd)/2`, and the Casimir `-X^2 + X - UV` acts on a function
//! homogeneous of degree `m` by the scalar `-m(m+2)/4`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sl2::{GroupElement, LieDirection};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseTag {
    Principal,
    QuarterPoint,
    Complementary,
    ZeroMu,
    DiscreteSeries,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralParameter {
    pub mu: f64,
    pub nu: Complex64,
    pub case: CaseTag,
}

impl SpectralParameter {
    /// Classifies a Casimir eigenvalue. Negative values must be of the form `n(2-n)/4`, `n >= 3`.
    pub fn from_mu(mu: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::InvalidParameter(format!("Casimir parameter {mu} is not finite")));
        }
        let tol = 1e-12;
        let (nu, case) = if mu.abs() < tol {
            (Complex64::new(1.0, 0.0), CaseTag::ZeroMu)
        } else if (mu - 0.25).abs() < tol {
            (Complex64::new(0.0, 0.0), CaseTag::QuarterPoint)
        } else if mu > 0.25 {
            (Complex64::new(0.0, (4.0 * mu - 1.0).sqrt()), CaseTag::Principal)
        } else if mu > 0.0 {
            (Complex64::new((1.0 - 4.0 * mu).sqrt(), 0.0), CaseTag::Complementary)
        } else {
            let n = 1.0 + (1.0 - 4.0 * mu).sqrt();
            if (n - n.round()).abs() > 1e-9 || n.round() < 3.0 {
                return Err(Error::InvalidParameter(format!(
                    "Casimir parameter {mu} is negative but not of the form n(2-n)/4 with n >= 3"
                )));
            }
            (Complex64::new(n.round() - 1.0, 0.0), CaseTag::DiscreteSeries)
        };
        Ok(SpectralParameter { mu, nu, case })
    }

    /// Roots `z = -(1 +- nu)/2` of `z^2 + z + mu = 0`.
    pub fn characteristic_roots(&self) -> (Complex64, Complex64) {
        (-(1.0 + self.nu) / 2.0, -(1.0 - self.nu) / 2.0)
    }

    /// `Im nu` for the principal series, `nu` otherwise.
    pub fn nu_real(&self) -> f64 {
        match self.case {
            CaseTag::Principal => self.nu.im,
            _ => self.nu.re,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Real,
    Imag,
    Complex,
}

impl Part {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "real" | "re" => Ok(Part::Real),
            "imag" | "im" => Ok(Part::Imag),
            "complex" => Ok(Part::Complex),
            _ => Err(Error::InvalidParameter(format!("unknown part '{s}'"))),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Part::Real => "real",
            Part::Imag => "imag",
            Part::Complex => "complex",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: Complex64,
    pub sigma: Complex64,
    pub k: i32,
}

/// A finite sum of terms; the observable is its real part.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Expr {
    pub terms: Vec<Term>,
}

/// Per-point data shared by all terms.
#[derive(Clone, Copy, Debug)]
pub struct PointData {
    pub n: f64,
    ln_n: f64,
    unit: Complex64,
}

impl PointData {
    pub fn new(g: &GroupElement) -> Self {
        let n = g.c * g.c + g.d * g.d;
        let r = n.sqrt();
        PointData { n, ln_n: n.ln(), unit: Complex64::new(g.d / r, g.c / r) }
    }
}

impl Expr {
    pub fn monomial(coeff: Complex64, sigma: Complex64, k: i32) -> Self {
        Expr { terms: vec![Term { coeff, sigma, k }] }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval_at(&self, p: &PointData) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for t in &self.terms {
            s += t.coeff * (t.sigma * p.ln_n).exp() * p.unit.powi(t.k);
        }
        s
    }

    pub fn eval(&self, g: &GroupElement) -> Complex64 {
        self.eval_at(&PointData::new(g))
    }

    pub fn scale(&self, c: Complex64) -> Expr {
        let mut e = self.clone();
        for t in &mut e.terms {
            t.coeff *= c;
        }
        e.simplified()
    }

    pub fn add(&self, other: &Expr) -> Expr {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        Expr { terms }.simplified()
    }

    /// Merges terms with equal exponents and drops exact cancellations.
    pub fn simplified(mut self) -> Expr {
        let mut out: Vec<Term> = Vec::with_capacity(self.terms.len());
        for t in self.terms.drain(..) {
            if let Some(o) = out.iter_mut().find(|o| o.k == t.k && (o.sigma - t.sigma).norm() < 1e-14) {
                o.coeff += t.coeff;
            } else {
                out.push(t);
            }
        }
        let scale = out.iter().map(|t| t.coeff.norm()).fold(0.0, f64::max);
        out.retain(|t| t.coeff.norm() > 1e-15 * scale && t.coeff.norm() > 0.0);
        Expr { terms: out }
    }

    /// Exact action of `U`, `X` or `V` (and their combinations `Y`, `Theta`).
    pub fn derivative(&self, dir: LieDirection) -> Expr {
        match dir {
            LieDirection::Y => self.derivative(LieDirection::U).add(&self.derivative(LieDirection::V)).scale((-0.5).into()),
            LieDirection::Theta => self
                .derivative(LieDirection::U)
                .add(&self.derivative(LieDirection::V).scale((-1.0).into()))
                .scale(0.5.into()),
            _ => {
                let mut terms = Vec::with_capacity(3 * self.terms.len());
                for t in &self.terms {
                    let k = f64::from(t.k);
                    let m = 2.0 * t.sigma;
                    let up = (k - m) / 4.0;
                    let down = (k + m) / 4.0;
                    let (same, plus, minus) = match dir {
                        LieDirection::U => (-I * k / 2.0, I * up, I * down),
                        LieDirection::V => (I * k / 2.0, I * up, I * down),
                        _ => (Complex64::new(0.0, 0.0), up, -down),
                    };
                    for (c, dk) in [(same, 0), (plus, 2), (minus, -2)] {
                        if c.norm() > 0.0 {
                            terms.push(Term { coeff: t.coeff * c, sigma: t.sigma, k: t.k + dk });
                        }
                    }
                }
                Expr { terms }.simplified()
            }
        }
    }

    /// Applies a word right-to-left, so `[U, V]` gives `U(V f)`.
    pub fn word(&self, w: &[LieDirection]) -> Expr {
        w.iter().rev().fold(self.clone(), |e, d| e.derivative(*d))
    }

    pub fn casimir(&self) -> Expr {
        let x = self.derivative(LieDirection::X);
        let xx = x.derivative(LieDirection::X);
        let uv = self.word(&[LieDirection::U, LieDirection::V]);
        xx.scale((-1.0).into()).add(&x).add(&uv.scale((-1.0).into()))
    }
}

const BASIS: [LieDirection; 3] = [LieDirection::U, LieDirection::X, LieDirection::V];

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Derived {
    u: Expr,
    x: Expr,
    v: Expr,
    /// `second[i][j] = W_i W_j f` with `W = (U, X, V)`.
    second: Vec<Vec<Expr>>,
}

impl Derived {
    fn of(e: &Expr) -> Self {
        let first: Vec<Expr> = BASIS.iter().map(|d| e.derivative(*d)).collect();
        let second = BASIS
            .iter()
            .map(|di| first.iter().map(|fj| fj.derivative(*di)).collect())
            .collect();
        Derived { u: first[0].clone(), x: first[1].clone(), v: first[2].clone(), second }
    }
}

/// Region where sup norms are estimated. Each anchor `p` contributes the arc
/// `{p h_s : s in [0,1]}` and the two rays `{p g_{-xi}}`, `{p h_1 g_{-xi}}`, `xi >= 0`,
/// which is every point visited when computing `J(p, 0)`, `J'(p, 0)` and `G(p, .)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Window {
    pub anchors: Vec<GroupElement>,
    pub samples_per_anchor: usize,
    pub ray_extent: f64,
}

impl Window {
    pub fn new(anchors: Vec<GroupElement>) -> Self {
        let m = anchors.len().max(1);
        Window { anchors, samples_per_anchor: (10_000usize.div_ceil(m)).max(1500), ray_extent: 60.0 }
    }

    /// Random anchors `n(x) a(y) k(theta)` with `x in [-1,1]`, `y in [1/2, 2]`.
    pub fn random(count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let anchors = (0..count)
            .map(|_| {
                crate::sl2::IwasawaCoords {
                    x: rng.gen_range(-1.0..1.0),
                    y: rng.gen_range(0.5..2.0),
                    theta: rng.gen_range(0.0..std::f64::consts::TAU),
                }
                .to_group()
            })
            .collect();
        Window::new(anchors)
    }

    pub fn with_anchors(&self, extra: &[GroupElement]) -> Self {
        let mut anchors = self.anchors.clone();
        anchors.extend_from_slice(extra);
        Window::new(anchors)
    }

    pub fn covers(&self, p: &GroupElement) -> bool {
        self.anchors.iter().any(|a| a.distance_sup(p) <= 1e-9 * (1.0 + p.frobenius_sq().sqrt()))
    }

    fn points_for(&self, p: &GroupElement) -> Vec<GroupElement> {
        let n_arc = (self.samples_per_anchor / 5).max(16);
        let n_ray = ((self.samples_per_anchor - n_arc) / 2).max(16);
        let mut pts = Vec::with_capacity(n_arc + 2 * n_ray + 4);
        for i in 0..n_arc {
            pts.push(p.horocycle(i as f64 / (n_arc - 1) as f64));
        }
        if p.c != 0.0 {
            let s = -p.d / p.c;
            if (0.0..=1.0).contains(&s) {
                pts.push(p.horocycle(s));
            }
        }
        for start in [*p, p.horocycle(1.0)] {
            // N(xi) = c^2 e^{-xi} + d^2 e^{xi} is smallest at e^{xi} = |c/d|.
            let crit = if start.d != 0.0 && start.c != 0.0 {
                (start.c.abs().ln() - start.d.abs().ln()).max(0.0)
            } else {
                0.0
            };
            let extent = self.ray_extent + crit;
            for i in 0..n_ray {
                let r = i as f64 / (n_ray - 1) as f64;
                pts.push(start.geodesic(-extent * r * r));
            }
            if crit > 0.0 {
                pts.push(start.geodesic(-crit));
            }
        }
        pts
    }

    /// All sample points of the window.
    pub fn sample_points(&self) -> Vec<GroupElement> {
        self.anchors.iter().flat_map(|p| self.points_for(p)).collect()
    }
}

/// Sampled sup norms over a window, inflated by a 10% safety factor.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WindowNorm {
    pub window: Window,
    /// Sup of `|f|` and all derivatives of order at most two.
    pub c2_norm: f64,
    /// Sup of `|Vf|`, used for tail truncation.
    pub v_sup: f64,
    pub samples: usize,
}

pub const WINDOW_SAFETY: f64 = 1.1;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub observable: Observable,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Observable {
    label: String,
    expr: Expr,
    complex: bool,
    spectral: Option<SpectralParameter>,
    components: Vec<Component>,
    derived: Derived,
    window: Option<WindowNorm>,
}

impl Observable {
    fn from_expr(label: String, expr: Expr, complex: bool, spectral: Option<SpectralParameter>) -> Self {
        let derived = Derived::of(&expr);
        Observable { label, expr, complex, spectral, components: Vec::new(), derived, window: None }
    }

    /// `y^s` (or its imaginary part); `s(1-s)` must be real and allowed on a compact quotient.
    pub fn power(s: Complex64, part: Part) -> Result<Self> {
        if !(s.re > 0.0) {
            return Err(Error::InvalidParameter(format!("power observable needs Re s > 0, got {s}")));
        }
        let mu = s * (1.0 - s);
        if mu.im.abs() > 1e-12 * mu.norm().max(1.0) {
            return Err(Error::InvalidParameter(format!("s(1-s) = {mu} is not real")));
        }
        let spectral = SpectralParameter::from_mu(mu.re)?;
        let coeff = if part == Part::Imag { -I } else { Complex64::new(1.0, 0.0) };
        let label = format!("power:s={}{:+}i:{}", s.re, s.im, part.name());
        Ok(Self::from_expr(label, Expr::monomial(coeff, -s, 0), part == Part::Complex, Some(spectral)))
    }

    /// `(c i + d)^{-n}`, a lowest-weight vector of the discrete series, `n >= 3`.
    pub fn discrete(n: u32, part: Part) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidParameter(format!("discrete observable needs n >= 3, got {n}")));
        }
        let nf = f64::from(n);
        let spectral = SpectralParameter::from_mu(nf * (2.0 - nf) / 4.0)?;
        let coeff = if part == Part::Imag { -I } else { Complex64::new(1.0, 0.0) };
        let label = format!("discrete:n={n}:{}", part.name());
        Ok(Self::from_expr(
            label,
            Expr::monomial(coeff, Complex64::new(-nf / 2.0, 0.0), -(n as i32)),
            part == Part::Complex,
            Some(spectral),
        ))
    }

    /// Parses `power:s=<re>+<im>i:<part>` or `discrete:n=<n>:<part>`.
    pub fn from_key(key: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("unrecognised observable key '{key}'"));
        let fields: Vec<&str> = key.trim().split(':').collect();
        if fields.len() != 3 {
            return Err(bad());
        }
        let part = Part::parse(fields[2])?;
        match fields[0] {
            "power" => {
                let s = fields[1].strip_prefix("s=").ok_or_else(bad)?;
                Self::power(parse_complex(s).ok_or_else(bad)?, part)
            }
            "discrete" => {
                let n = fields[1].strip_prefix("n=").ok_or_else(bad)?;
                Self::discrete(n.parse().map_err(|_| bad())?, part)
            }
            _ => Err(bad()),
        }
    }

    /// Linear combination of observables, keeping each component for per-component analysis.
    pub fn combination(parts: &[(f64, Observable)]) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidParameter("empty combination".into()));
        }
        let mut expr = Expr::default();
        let mut labels = Vec::new();
        let mut components = Vec::new();
        for (w, o) in parts {
            expr = expr.add(&o.expr.scale((*w).into()));
            labels.push(format!("{w}*{}", o.label));
            if o.components.is_empty() {
                components.push(Component { weight: *w, observable: o.without_window() });
            } else {
                for c in &o.components {
                    components.push(Component { weight: w * c.weight, observable: c.observable.clone() });
                }
            }
        }
        let mu0 = components[0].observable.spectral.map(|s| s.mu);
        let same = components.iter().all(|c| match (c.observable.spectral, mu0) {
            (Some(s), Some(m)) => (s.mu - m).abs() < 1e-12,
            _ => false,
        });
        let spectral = if same { components[0].observable.spectral } else { None };
        let complex = components.iter().any(|c| c.observable.complex);
        let mut o = Self::from_expr(labels.join(" + "), expr, complex, spectral);
        o.components = components;
        Ok(o)
    }

    fn without_window(&self) -> Self {
        let mut o = self.clone();
        o.window = None;
        o
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn is_complex(&self) -> bool {
        self.complex
    }

    pub fn spectral(&self) -> Option<SpectralParameter> {
        self.spectral
    }

    pub fn require_spectral(&self) -> Result<SpectralParameter> {
        self.spectral.ok_or(Error::NotEigenfunction)
    }

    /// Components of a combination; a single eigenfunction is its own only component.
    pub fn components(&self) -> Vec<Component> {
        if self.components.is_empty() {
            vec![Component { weight: 1.0, observable: self.clone() }]
        } else {
            self.components.clone()
        }
    }

    pub fn window(&self) -> Option<&WindowNorm> {
        self.window.as_ref()
    }

    pub fn window_norm(&self) -> Result<&WindowNorm> {
        self.window.as_ref().ok_or(Error::NoWindow)
    }

    /// Errors unless `p` is one of the window anchors (when a window is attached).
    pub fn require_anchor(&self, p: &GroupElement) -> Result<()> {
        match &self.window {
            Some(w) if !w.window.covers(p) => Err(Error::WindowExceeded(format!(
                "anchor [{:.6}, {:.6}, {:.6}, {:.6}] not in window",
                p.a, p.b, p.c, p.d
            ))),
            _ => Ok(()),
        }
    }

    /// Returns `self` with a window covering `anchors`: the attached window if it
    /// already covers them, otherwise a fresh one built from `anchors`.
    pub fn ensure_window(&self, anchors: &[GroupElement]) -> Result<Observable> {
        match &self.window {
            Some(_) => {
                for p in anchors {
                    self.require_anchor(p)?;
                }
                Ok(self.clone())
            }
            None => self.with_window(&Window::new(anchors.to_vec())),
        }
    }

    /// The exact derivative `W f` as a new observable with the same spectral data.
    pub fn derivative(&self, dir: LieDirection) -> Observable {
        let mut o = Self::from_expr(format!("{dir:?}({})", self.label), self.expr.derivative(dir), self.complex, self.spectral);
        o.components = self
            .components
            .iter()
            .map(|c| Component { weight: c.weight, observable: c.observable.derivative(dir) })
            .collect();
        o
    }

    pub fn value(&self, g: &GroupElement) -> f64 {
        self.expr.eval(g).re
    }

    /// Full complex value; for real and imaginary parts this is the underlying complex function.
    pub fn value_complex(&self, g: &GroupElement) -> Complex64 {
        self.expr.eval(g)
    }

    pub fn u(&self, g: &GroupElement) -> f64 {
        self.derived.u.eval(g).re
    }

    pub fn x(&self, g: &GroupElement) -> f64 {
        self.derived.x.eval(g).re
    }

    pub fn v(&self, g: &GroupElement) -> f64 {
        self.derived.v.eval(g).re
    }

    pub fn xx(&self, g: &GroupElement) -> f64 {
        self.derived.second[1][1].eval(g).re
    }

    pub fn uv(&self, g: &GroupElement) -> f64 {
        self.derived.second[0][2].eval(g).re
    }

    /// Any word in `U, X, V, Y, Theta`, applied right-to-left.
    pub fn word(&self, g: &GroupElement, w: &[LieDirection]) -> f64 {
        self.expr.word(w).eval(g).re
    }

    /// Exact Casimir, as an expression.
    pub fn casimir_expr(&self) -> Expr {
        self.expr.casimir()
    }

    /// `G(x, xi) = Vf(x g_{-xi}) - Vf(x h_1 g_{-xi})`.
    pub fn g_term(&self, x: &GroupElement, xi: f64) -> Result<f64> {
        self.require_anchor(x)?;
        Ok(self.g_term_unchecked(x, xi))
    }

    pub(crate) fn g_term_unchecked(&self, x: &GroupElement, xi: f64) -> f64 {
        let v = &self.derived.v;
        v.eval(&x.geodesic(-xi)).re - v.eval(&x.horocycle(1.0).geodesic(-xi)).re
    }

    /// Attaches a window, computing the sampled sup of `f` and its derivatives up to order two.
    pub fn with_window(&self, window: &Window) -> Result<Observable> {
        let exprs: Vec<&Expr> = std::iter::once(&self.expr)
            .chain([&self.derived.u, &self.derived.x, &self.derived.v])
            .chain(self.derived.second.iter().flatten())
            .collect();
        let per_anchor: Vec<(f64, f64, f64, usize)> = window
            .anchors
            .par_iter()
            .map(|p| {
                let pts = window.points_for(p);
                let mut min_n = f64::INFINITY;
                let mut c2 = 0.0f64;
                let mut vs = 0.0f64;
                for g in &pts {
                    let pd = PointData::new(g);
                    min_n = min_n.min(pd.n);
                    for (i, e) in exprs.iter().enumerate() {
                        let val = e.eval_at(&pd).re.abs();
                        c2 = c2.max(val);
                        if i == 3 {
                            vs = vs.max(val);
                        }
                    }
                }
                (min_n, c2, vs, pts.len())
            })
            .collect();
        let min_n = per_anchor.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
        if min_n < 1e-6 {
            return Err(Error::NearSingularWindow(min_n));
        }
        let c2 = per_anchor.iter().map(|r| r.1).fold(0.0, f64::max);
        let vs = per_anchor.iter().map(|r| r.2).fold(0.0, f64::max);
        if !c2.is_finite() {
            return Err(Error::NearSingularWindow(min_n));
        }
        let mut o = self.clone();
        o.window = Some(WindowNorm {
            window: window.clone(),
            c2_norm: WINDOW_SAFETY * c2,
            v_sup: WINDOW_SAFETY * vs,
            samples: per_anchor.iter().map(|r| r.3).sum(),
        });
        Ok(o)
    }
}

fn parse_complex(s: &str) -> Option<Complex64> {
    let s = s.trim();
    let Some(body) = s.strip_suffix('i') else {
        return s.parse::<f64>().ok().map(|r| Complex64::new(r, 0.0));
    };
    // split at the last sign that is not a leading sign or part of an exponent
    let bytes = body.as_bytes();
    let pos = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'))?;
    let re: f64 = body[..pos].parse().ok()?;
    let im_str = &body[pos..];
    let im: f64 = match im_str {
        "+" => 1.0,
        "-" => -1.0,
        _ => im_str.parse().ok()?,
    };
    Some(Complex64::new(re, im))
}
