//! Invariant functionals `D+` and `D-`, the expansion of ergodic averages and the
//! quantitative bounds attached to them.
//!
//! With `J0 = J(x, 0)`, `J0' = J'(x, 0)`, `G = G(x, .)` and integrals over `[0, inf)`:
//!
//! * principal series, `b = Im nu`:
//!   `D+ = -(2/b) int e^{-xi/2} sin(b xi/2) G + J0`,
//!   `D- = (2/b) int e^{-xi/2} cos(b xi/2) G + J0/b + 2 J0'/b`
//! * quarter point:
//!   `D+ = -int xi e^{-xi/2} G + J0`, `D- = int e^{-xi/2} G + J0/2 + J0'`
//! * complementary series:
//!   `D+- = -+(1/nu) int e^{-(1-+nu) xi/2} G -+ ((1-+nu)/(2 nu)) J0 -+ J0'/nu`
//!
//! Integrals are truncated at a horizon `Xi` chosen so that the discarded tail,
//! bounded through `|G| <= 2 sup|Vf|`, stays below a few `1e-9`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables::{CaseTag, Observable, SpectralParameter};
use crate::ode::{ergodic_average, j_function, rescaled_base, zero_mu_constant};
use crate::quadrature::{integrate, integrate_pieces, QuadOptions};
use crate::report::{slack, CheckReport};
use crate::sl2::{GroupElement, LieAlgebraElement, LieDirection};

const TAIL_TARGET: f64 = 5e-9;

/// Envelope of a weight, used for tail bounds.
#[derive(Clone, Copy, Debug)]
enum Envelope {
    /// `|w| <= e^{-a xi}`
    Exp(f64),
    /// `|w| <= xi e^{-xi/2}`
    XiHalf,
}

impl Envelope {
    fn tail(self, from: f64) -> f64 {
        match self {
            Envelope::Exp(a) => (-a * from).exp() / a,
            Envelope::XiHalf => 2.0 * (from + 2.0) * (-from / 2.0).exp(),
        }
    }

    /// Smallest `Xi` with `scale * tail(Xi) <= TAIL_TARGET`.
    fn horizon(self, scale: f64) -> f64 {
        if scale <= 0.0 {
            return 0.0;
        }
        match self {
            Envelope::Exp(a) => ((scale / (a * TAIL_TARGET)).ln() / a).max(0.0),
            Envelope::XiHalf => {
                let mut xi: f64 = 10.0;
                for _ in 0..60 {
                    xi = (2.0 * (2.0 * scale * (xi + 2.0) / TAIL_TARGET).ln()).max(0.0);
                }
                xi
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct WeightedIntegral {
    pub value: f64,
    pub quad_error: f64,
    pub tail_bound: f64,
    pub xi_max: f64,
}

/// `int_from^inf w(xi) G(x, xi) dxi`; the tail bound already includes the factor `coef`.
fn weighted_g<W: Fn(f64) -> f64>(
    fw: &Observable,
    x: &GroupElement,
    w: W,
    env: Envelope,
    coef: f64,
    from: f64,
) -> Result<WeightedIntegral> {
    let v_sup = fw.window_norm()?.v_sup;
    let scale = coef.abs() * 2.0 * v_sup;
    let xi_max = env.horizon(scale).max(from + 1.0);
    let i = integrate(|xi| w(xi) * fw.g_term_unchecked(x, xi), from, xi_max, &QuadOptions::default())?;
    Ok(WeightedIntegral { value: i.value, quad_error: i.error, tail_bound: scale * env.tail(xi_max), xi_max })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FunctionalRecord {
    pub case: CaseTag,
    pub x: GroupElement,
    pub d_plus: f64,
    pub d_minus: f64,
    pub quad_error: f64,
    pub tail_bound: f64,
    pub xi_max: f64,
    pub j0: f64,
    pub dj0: f64,
}

/// The weights `l` entering `D+` and `D-`, as `(weight, derivative)` pairs.
fn weights(sp: &SpectralParameter) -> Vec<(Box<dyn Fn(f64) -> f64>, Box<dyn Fn(f64) -> f64>, Envelope)> {
    match sp.case {
        CaseTag::Principal => {
            let b = sp.nu.im;
            vec![
                (
                    Box::new(move |t: f64| (-t / 2.0).exp() * (b * t / 2.0).sin()),
                    Box::new(move |t: f64| (-t / 2.0).exp() * (-0.5 * (b * t / 2.0).sin() + b / 2.0 * (b * t / 2.0).cos())),
                    Envelope::Exp(0.5),
                ),
                (
                    Box::new(move |t: f64| (-t / 2.0).exp() * (b * t / 2.0).cos()),
                    Box::new(move |t: f64| (-t / 2.0).exp() * (-0.5 * (b * t / 2.0).cos() - b / 2.0 * (b * t / 2.0).sin())),
                    Envelope::Exp(0.5),
                ),
            ]
        }
        CaseTag::QuarterPoint => vec![
            (
                Box::new(|t: f64| t * (-t / 2.0).exp()),
                Box::new(|t: f64| (1.0 - t / 2.0) * (-t / 2.0).exp()),
                Envelope::XiHalf,
            ),
            (Box::new(|t: f64| (-t / 2.0).exp()), Box::new(|t: f64| -0.5 * (-t / 2.0).exp()), Envelope::Exp(0.5)),
        ],
        _ => {
            let nu = sp.nu.re;
            let (ap, am) = ((1.0 - nu) / 2.0, (1.0 + nu) / 2.0);
            vec![
                (Box::new(move |t: f64| (-ap * t).exp()), Box::new(move |t: f64| -ap * (-ap * t).exp()), Envelope::Exp(ap)),
                (Box::new(move |t: f64| (-am * t).exp()), Box::new(move |t: f64| -am * (-am * t).exp()), Envelope::Exp(am)),
            ]
        }
    }
}

fn positive_case(f: &Observable) -> Result<SpectralParameter> {
    let sp = f.require_spectral()?;
    match sp.case {
        CaseTag::Principal | CaseTag::QuarterPoint | CaseTag::Complementary => Ok(sp),
        c => Err(Error::InvalidParameter(format!("no invariant functionals D+- for case {c:?}"))),
    }
}

/// `D+(x)` and `D-(x)` for an eigenfunction with `mu > 0`.
pub fn functionals(f: &Observable, x: &GroupElement) -> Result<FunctionalRecord> {
    let sp = positive_case(f)?;
    let fw = f.ensure_window(&[*x])?;
    let j = j_function(&fw, x, 0.0)?;
    let (j0, dj0) = (j.j, j.dj);
    let w = weights(&sp);
    let (cp, cm, dp_const, dm_const) = match sp.case {
        CaseTag::Principal => {
            let b = sp.nu.im;
            (-2.0 / b, 2.0 / b, j0, j0 / b + 2.0 * dj0 / b)
        }
        CaseTag::QuarterPoint => (-1.0, 1.0, j0, 0.5 * j0 + dj0),
        _ => {
            let nu = sp.nu.re;
            (
                -1.0 / nu,
                1.0 / nu,
                -(1.0 - nu) / (2.0 * nu) * j0 - dj0 / nu,
                (1.0 + nu) / (2.0 * nu) * j0 + dj0 / nu,
            )
        }
    };
    let ip = weighted_g(&fw, x, &w[0].0, w[0].2, cp, 0.0)?;
    let im = weighted_g(&fw, x, &w[1].0, w[1].2, cm, 0.0)?;
    Ok(FunctionalRecord {
        case: sp.case,
        x: *x,
        d_plus: cp * ip.value + dp_const,
        d_minus: cm * im.value + dm_const,
        quad_error: cp.abs() * ip.quad_error + cm.abs() * im.quad_error + j.quad_error * (1.0 + cp.abs() + cm.abs()),
        tail_bound: ip.tail_bound.max(im.tail_bound),
        xi_max: ip.xi_max.max(im.xi_max),
        j0,
        dj0,
    })
}

fn require_case(f: &Observable, case: CaseTag) -> Result<()> {
    let sp = f.require_spectral()?;
    if sp.case != case {
        return Err(Error::InvalidParameter(format!("expected {case:?}, observable is {:?}", sp.case)));
    }
    Ok(())
}

pub fn functionals_principal(f: &Observable, x: &GroupElement) -> Result<FunctionalRecord> {
    require_case(f, CaseTag::Principal)?;
    functionals(f, x)
}

pub fn functionals_quarter(f: &Observable, x: &GroupElement) -> Result<FunctionalRecord> {
    require_case(f, CaseTag::QuarterPoint)?;
    functionals(f, x)
}

pub fn functionals_complementary(f: &Observable, x: &GroupElement) -> Result<FunctionalRecord> {
    require_case(f, CaseTag::Complementary)?;
    functionals(f, x)
}

/// Main term of `J(p, t)` given `D+-(p)`.
pub fn main_terms(sp: &SpectralParameter, d_plus: f64, d_minus: f64, t: f64) -> f64 {
    match sp.case {
        CaseTag::Principal => {
            let b = sp.nu.im;
            (-t / 2.0).exp() * ((b * t / 2.0).cos() * d_plus + (b * t / 2.0).sin() * d_minus)
        }
        CaseTag::QuarterPoint => (-t / 2.0).exp() * (d_plus + t * d_minus),
        CaseTag::Complementary => {
            let nu = sp.nu.re;
            (-(1.0 + nu) * t / 2.0).exp() * d_plus + (-(1.0 - nu) * t / 2.0).exp() * d_minus
        }
        _ => 0.0,
    }
}

/// Bound on `|<f>_T - main terms|` in units of the window norm of `f`.
pub fn remainder_bound(sp: &SpectralParameter, norm: f64, t_end: f64) -> f64 {
    let c = match sp.case {
        CaseTag::Principal => 16.0 / sp.nu.im,
        CaseTag::QuarterPoint => 8.0 * (t_end.ln() + 2.0),
        CaseTag::Complementary => {
            let nu = sp.nu.re;
            8.0 / ((1.0 - nu * nu) * nu)
        }
        CaseTag::ZeroMu => 3.0,
        CaseTag::DiscreteSeries => 5.0,
    };
    c * norm / t_end
}

/// Bound on `sup |D+-|` in units of the norm of `f`.
pub fn functional_norm_constant(sp: &SpectralParameter) -> f64 {
    match sp.case {
        CaseTag::Principal => 11.0 / sp.nu.im + 1.0,
        CaseTag::QuarterPoint => 9.0,
        CaseTag::Complementary => {
            let nu = sp.nu.re;
            6.0 / (nu * (1.0 - nu))
        }
        _ => 0.0,
    }
}

/// The remainder `R(p, t)` written through tail integrals of `G(p, .)` over `[t, inf)`.
fn remainder_from_tails(fw: &Observable, sp: &SpectralParameter, p: &GroupElement, t: f64) -> Result<WeightedIntegral> {
    let w = weights(sp);
    let combine = |a: WeightedIntegral, ca: f64, b: WeightedIntegral, cb: f64| WeightedIntegral {
        value: ca * a.value + cb * b.value,
        quad_error: ca.abs() * a.quad_error + cb.abs() * b.quad_error,
        tail_bound: ca.abs() * a.tail_bound + cb.abs() * b.tail_bound,
        xi_max: a.xi_max.max(b.xi_max),
    };
    match sp.case {
        CaseTag::Principal => {
            let b = sp.nu.im;
            let pre = 2.0 / b * (-t / 2.0).exp();
            let is = weighted_g(fw, p, &w[0].0, w[0].2, 1.0, t)?;
            let ic = weighted_g(fw, p, &w[1].0, w[1].2, 1.0, t)?;
            Ok(combine(is, pre * (b * t / 2.0).cos(), ic, -pre * (b * t / 2.0).sin()))
        }
        CaseTag::QuarterPoint => {
            let ixi = weighted_g(fw, p, &w[0].0, w[0].2, 1.0, t)?;
            let ie = weighted_g(fw, p, &w[1].0, w[1].2, 1.0, t)?;
            Ok(combine(ie, -t * (-t / 2.0).exp(), ixi, (-t / 2.0).exp()))
        }
        _ => {
            let nu = sp.nu.re;
            let slow = weighted_g(fw, p, &w[0].0, w[0].2, 1.0, t)?;
            let fast = weighted_g(fw, p, &w[1].0, w[1].2, 1.0, t)?;
            Ok(combine(
                slow,
                (-(1.0 + nu) * t / 2.0).exp() / nu,
                fast,
                -(-(1.0 - nu) * t / 2.0).exp() / nu,
            ))
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExpansionRecord {
    pub x: GroupElement,
    pub t_end: f64,
    pub case: CaseTag,
    pub direct: f64,
    pub main_terms: f64,
    /// Remainder computed independently from tail integrals.
    pub remainder: f64,
    pub remainder_bound: f64,
    /// `|direct - main terms|`.
    pub reconstruction_gap: f64,
    pub d_plus: f64,
    pub d_minus: f64,
    pub norm: f64,
    pub quad_error: f64,
    pub tail_bound: f64,
}

/// Expansion of `<f>_T(x)` through `D+-(x g_{log T})`.
pub fn expansion(f: &Observable, x: &GroupElement, t_end: f64) -> Result<ExpansionRecord> {
    let sp = positive_case(f)?;
    let p = rescaled_base(x, t_end);
    let fw = f.ensure_window(&[p])?;
    let norm = fw.window_norm()?.c2_norm;
    let direct = ergodic_average(&fw, x, t_end)?;
    let d = functionals(&fw, &p)?;
    let t = t_end.ln();
    let main = main_terms(&sp, d.d_plus, d.d_minus, t);
    let r = remainder_from_tails(&fw, &sp, &p, t)?;
    let weight = match sp.case {
        CaseTag::QuarterPoint => (1.0 + t) / t_end.sqrt(),
        _ => 1.0 / t_end.sqrt(),
    };
    Ok(ExpansionRecord {
        x: *x,
        t_end,
        case: sp.case,
        direct: direct.value,
        main_terms: main,
        remainder: r.value,
        remainder_bound: remainder_bound(&sp, norm, t_end),
        reconstruction_gap: (direct.value - main).abs(),
        d_plus: d.d_plus,
        d_minus: d.d_minus,
        norm,
        quad_error: direct.quad_error + weight * d.quad_error + r.quad_error,
        tail_bound: weight * d.tail_bound + r.tail_bound,
    })
}

/// `|<f>_T - main| <= remainder bound` over a grid, plus agreement with the tail-integral remainder.
pub fn expansion_check(f: &Observable, x: &GroupElement, t_grid: &[f64]) -> Result<CheckReport> {
    let anchors: Vec<GroupElement> = t_grid.iter().map(|&t| rescaled_base(x, t)).collect();
    let fw = f.ensure_window(&anchors)?;
    let mut r = CheckReport::new(format!("expansion {}", f.label()));
    for &t_end in t_grid {
        let e = expansion(&fw, x, t_end)?;
        let s = slack(e.quad_error, e.tail_bound);
        r.push(format!("|<f>_T - main| <= remainder bound, T={t_end}"), e.reconstruction_gap, e.remainder_bound, s);
        r.push(
            format!("remainder from tails, T={t_end}"),
            (e.direct - e.main_terms - e.remainder).abs(),
            0.0,
            s,
        );
    }
    Ok(r)
}

/// `|D+-(p)| <= C |f|` at every point, with the window spanning all points.
pub fn functional_norm_check(f: &Observable, points: &[GroupElement]) -> Result<CheckReport> {
    let sp = positive_case(f)?;
    let fw = f.ensure_window(points)?;
    let norm = fw.window_norm()?.c2_norm;
    let bound = functional_norm_constant(&sp) * norm;
    let mut r = CheckReport::new(format!("functional norms {}", f.label()));
    let (mut max_p, mut max_m) = (0.0f64, 0.0f64);
    for (i, p) in points.iter().enumerate() {
        let d = functionals(&fw, p)?;
        let s = slack(d.quad_error, d.tail_bound);
        r.push(format!("|D+| point {i}"), d.d_plus.abs(), bound, s);
        r.push(format!("|D-| point {i}"), d.d_minus.abs(), bound, s);
        max_p = max_p.max(d.d_plus.abs());
        max_m = max_m.max(d.d_minus.abs());
    }
    r.value("sup |D+|", max_p);
    r.value("sup |D-|", max_m);
    r.value("window_c2_norm", norm);
    Ok(r)
}

/// Coarse decay bounds on `|<f>_T|` for the principal and complementary series.
pub fn coarse_bounds_check(f: &Observable, x: &GroupElement, t_grid: &[f64]) -> Result<CheckReport> {
    let sp = f.require_spectral()?;
    let anchors: Vec<GroupElement> = t_grid.iter().map(|&t| rescaled_base(x, t)).collect();
    let fw = f.ensure_window(&anchors)?;
    let norm = fw.window_norm()?.c2_norm;
    let mut r = CheckReport::new(format!("coarse bounds {}", f.label()));
    for &t_end in t_grid {
        let lt = t_end.ln();
        let bound = match sp.case {
            CaseTag::Principal => 15.0 * (lt + 1.0) / t_end.sqrt() * norm,
            CaseTag::Complementary => {
                let nu = sp.nu.re;
                15.0 / (1.0 - nu).powi(2) * norm * (lt + 1.0) * t_end.powf(-(1.0 - nu) / 2.0)
            }
            c => return Err(Error::InvalidParameter(format!("coarse bound not defined for {c:?}"))),
        };
        let avg = ergodic_average(&fw, x, t_end)?;
        r.push(format!("T={t_end}"), avg.value.abs(), bound, slack(avg.quad_error, 0.0));
    }
    Ok(r)
}

/// How the geodesic generator acts on `(D+, D-)`: returns `(D+(Xf), D-(Xf))`.
pub fn geodesic_action_matrix(sp: &SpectralParameter, d_plus: f64, d_minus: f64) -> (f64, f64) {
    match sp.case {
        CaseTag::Principal => {
            let b = sp.nu.im;
            (0.5 * d_plus - b / 2.0 * d_minus, 0.5 * d_minus + b / 2.0 * d_plus)
        }
        CaseTag::QuarterPoint => (0.5 * d_plus - d_minus, 0.5 * d_minus),
        _ => {
            let nu = sp.nu.re;
            ((1.0 + nu) / 2.0 * d_plus, (1.0 - nu) / 2.0 * d_minus)
        }
    }
}

/// `D+-(Xf)` against the matrix action, and the integration-by-parts identity
/// `int l G_{Xf} = int (l + l') G_f + l(0)(mu J0 + J0' + J0'')`.
pub fn geodesic_action_check(f: &Observable, x: &GroupElement) -> Result<CheckReport> {
    let sp = positive_case(f)?;
    let fw = f.ensure_window(&[*x])?;
    let xf = f.derivative(LieDirection::X).with_window(&fw.window_norm()?.window)?;
    let df = functionals(&fw, x)?;
    let dxf = functionals(&xf, x)?;
    let (ep, em) = geodesic_action_matrix(&sp, df.d_plus, df.d_minus);
    let b = sp.nu_real().abs().max(1.0);
    let s = slack(df.quad_error * b + dxf.quad_error, df.tail_bound * b + dxf.tail_bound);
    let mut r = CheckReport::new(format!("geodesic action {}", f.label()));
    r.push("D+(Xf)", (dxf.d_plus - ep).abs(), 1e-5, s);
    r.push("D-(Xf)", (dxf.d_minus - em).abs(), 1e-5, s);
    r.value("D+(f)", df.d_plus);
    r.value("D-(f)", df.d_minus);
    r.value("D+(Xf)", dxf.d_plus);
    r.value("D-(Xf)", dxf.d_minus);

    let j = j_function(&fw, x, 0.0)?;
    let boundary = sp.mu * j.j + j.dj + j.d2j;
    for (i, (l, dl, env)) in weights(&sp).iter().enumerate() {
        let lhs = weighted_g(&xf, x, l, *env, 1.0, 0.0)?;
        let rhs = weighted_g(&fw, x, |t| l(t) + dl(t), *env, 2.0, 0.0)?;
        let gap = (lhs.value - rhs.value - l(0.0) * boundary).abs();
        let scale = 1.0 + lhs.value.abs() + rhs.value.abs();
        r.push(
            format!("integration by parts, weight {i}"),
            gap,
            1e-7 * scale,
            slack(lhs.quad_error + rhs.quad_error + j.quad_error, lhs.tail_bound + rhs.tail_bound),
        );
    }
    Ok(r)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HolderFit {
    pub direction: LieAlgebraElement,
    pub exponent: f64,
    pub constant: f64,
    pub r_squared: f64,
    pub radii: Vec<f64>,
    pub diffs: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HolderReport {
    /// The fit with the largest constant.
    pub worst: HolderFit,
    pub fits: Vec<HolderFit>,
}

/// Least-squares line `y = intercept + slope x`, with the coefficient of determination.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 && sxx > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (intercept, slope, r2)
}

/// Fits `|D(x exp(r W)) - D(x)| ~ C r^alpha` along each direction.
pub fn holder_estimate<D>(d: D, x: &GroupElement, directions: &[LieAlgebraElement], radii: &[f64]) -> Result<HolderReport>
where
    D: Fn(&GroupElement) -> Result<f64>,
{
    if radii.len() < 8 || radii.iter().any(|&r| !(r > 1e-4 && r < 1e-1)) {
        return Err(Error::InvalidParameter("need at least 8 radii inside (1e-4, 1e-1)".into()));
    }
    if directions.is_empty() {
        return Err(Error::InvalidParameter("no directions".into()));
    }
    let d0 = d(x)?;
    let mut fits = Vec::new();
    for w in directions {
        let w = w.scale(1.0 / w.norm());
        let mut diffs = Vec::with_capacity(radii.len());
        for &r in radii {
            diffs.push((d(&x.translate(w, r))? - d0).abs());
        }
        if diffs.iter().all(|&v| v < 1e-12) {
            return Err(Error::Degenerate("functional is locally constant along a direction".into()));
        }
        let (lx, ly): (Vec<f64>, Vec<f64>) =
            radii.iter().zip(&diffs).filter(|(_, &v)| v > 1e-14).map(|(r, v)| (r.ln(), v.ln())).unzip();
        let (ic, slope, r2) = linear_fit(&lx, &ly);
        fits.push(HolderFit { direction: w, exponent: slope, constant: ic.exp(), r_squared: r2, radii: radii.to_vec(), diffs });
    }
    let worst = fits
        .iter()
        .max_by(|a, b| a.constant.total_cmp(&b.constant))
        .cloned()
        .expect("non-empty directions");
    Ok(HolderReport { worst, fits })
}

/// `|G(y, xi) - G(x, xi)| <= 6 |f| min{1, r e^xi}` for `y = x exp(r W)`, `|W| = 1`.
pub fn g_difference_bound_check(f: &Observable, x: &GroupElement, w: LieAlgebraElement, r: f64) -> Result<CheckReport> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidParameter(format!("radius {r} outside (0, 1)")));
    }
    let w = w.scale(1.0 / w.norm());
    let y = x.translate(w, r);
    let fw = f.ensure_window(&[*x, y])?;
    let norm = fw.window_norm()?.c2_norm;
    let mut rep = CheckReport::new(format!("G difference {}", f.label()));
    let xi_top = 3.0 * (1.0 / r).ln();
    let n = 200;
    for i in 0..=n {
        let xi = xi_top * i as f64 / n as f64;
        let lhs = (fw.g_term(&y, xi)? - fw.g_term(x, xi)?).abs();
        rep.push(format!("xi={xi:.4}"), lhs, 6.0 * norm * (r * xi.exp()).min(1.0), 1e-12);
    }
    rep.value("window_c2_norm", norm);
    Ok(rep)
}

/// Tail lemmas for `0 <= F <= C0 min{1, r e^xi}`:
/// `int e^{-a xi} F <= C0 max{1/(1-a), 1/a} r^a` and `int xi e^{-xi/2} F <= -8 C0 sqrt(r) log r`.
///
/// Also reports (unasserted) the sum-form constant `1/(1-a) + 1/a`, which is what the
/// piecewise integral of the extremal `F` actually needs.
pub fn tail_lemma_check<F>(f: F, c0: f64, r: f64, a: f64) -> Result<CheckReport>
where
    F: Fn(f64) -> f64,
{
    if !(r > 0.0 && r < 1.0 && a > 0.0 && a < 1.0 && c0 > 0.0) {
        return Err(Error::InvalidParameter(format!("need 0<r<1, 0<a<1, C0>0; got r={r}, a={a}, C0={c0}")));
    }
    let kink = -r.ln();
    let env = |xi: f64| c0 * (r * xi.exp()).min(1.0);
    for i in 0..=1000 {
        let xi = 4.0 * kink * i as f64 / 1000.0;
        let v = f(xi);
        if v < -1e-15 || v > env(xi) * (1.0 + 1e-12) + 1e-15 {
            return Err(Error::InvalidParameter(format!("F({xi}) = {v} violates 0 <= F <= C0 min{{1, r e^xi}}")));
        }
    }
    let o = QuadOptions::default();
    let xi_exp = kink + (c0 / (a * TAIL_TARGET)).ln().max(0.0) / a;
    let i_exp = integrate_pieces(|xi| (-a * xi).exp() * f(xi), &[0.0, kink, xi_exp], &o)?;
    let tail_exp = c0 * (-a * xi_exp).exp() / a;
    let xi_half = kink + Envelope::XiHalf.horizon(c0);
    let i_half = integrate_pieces(|xi| xi * (-xi / 2.0).exp() * f(xi), &[0.0, kink, xi_half], &o)?;
    let tail_half = c0 * Envelope::XiHalf.tail(xi_half);

    let mut rep = CheckReport::new("tail lemmas");
    let max_form = c0 * (1.0 / (1.0 - a)).max(1.0 / a) * r.powf(a);
    rep.push(
        format!("int e^(-a xi) F <= C0 max(1/(1-a), 1/a) r^a, a={a}, r={r}"),
        i_exp.value,
        max_form,
        slack(i_exp.error, tail_exp),
    );
    rep.push(
        format!("int xi e^(-xi/2) F <= -8 C0 sqrt(r) log r, r={r}"),
        i_half.value,
        -8.0 * c0 * r.sqrt() * r.ln(),
        slack(i_half.error, tail_half),
    );
    rep.value("exp-weight integral", i_exp.value);
    rep.value("sum-form bound C0 (1/(1-a) + 1/a) r^a", c0 * (1.0 / (1.0 - a) + 1.0 / a) * r.powf(a));
    rep.value("xi-weight integral", i_half.value);
    Ok(rep)
}

/// For a finite combination: `|<f>_T - sum_j main_j| <= sum_j remainder bound_j`.
///
/// Components with `mu = 0` contribute `C + (1/T) int_0^{log T} (...)` as their main term,
/// discrete components contribute no main term.
pub fn finite_sum_expansion_check(f: &Observable, x: &GroupElement, t_grid: &[f64]) -> Result<CheckReport> {
    let anchors: Vec<GroupElement> = t_grid.iter().map(|&t| rescaled_base(x, t)).collect();
    let comps = f.components();
    let mut windowed = Vec::with_capacity(comps.len());
    for c in &comps {
        let o = c.observable.ensure_window(&anchors)?;
        windowed.push((c.weight, o));
    }
    let mut rep = CheckReport::new(format!("finite sum expansion {}", f.label()));
    for &t_end in t_grid {
        let p = rescaled_base(x, t_end);
        let t = t_end.ln();
        let direct = ergodic_average(f, x, t_end)?;
        let (mut main, mut bound, mut err, mut tail) = (0.0, 0.0, direct.quad_error, 0.0);
        for (w, o) in &windowed {
            let sp = o.require_spectral()?;
            let norm = o.window_norm()?.c2_norm;
            bound += w.abs() * remainder_bound(&sp, norm, t_end);
            match sp.case {
                CaseTag::Principal | CaseTag::QuarterPoint | CaseTag::Complementary => {
                    let d = functionals(o, &p)?;
                    main += w * main_terms(&sp, d.d_plus, d.d_minus, t);
                    err += w.abs() * d.quad_error;
                    tail += w.abs() * d.tail_bound;
                }
                CaseTag::ZeroMu => {
                    let c = zero_mu_constant(o, &p)?;
                    let xt = x.horocycle(t_end);
                    let formula = integrate(|xi| o.v(&xt.geodesic(xi)) - o.v(&x.geodesic(xi)), 0.0, t, &QuadOptions::default())?;
                    main += w * (c.value + formula.value / t_end);
                    err += w.abs() * (c.quad_error + formula.error / t_end);
                    tail += w.abs() * c.tail_bound;
                }
                CaseTag::DiscreteSeries => {}
            }
        }
        rep.push(format!("T={t_end}"), (direct.value - main).abs(), bound, slack(err, tail));
    }
    Ok(rep)
}
