//! Horocycle averages and the second-order ODE they satisfy in geodesic time.
//!
//! For a Casimir eigenfunction `f` with parameter `mu`, the function
//! `J(x, t) = int_0^1 f(x h_s g_{-t}) ds` solves
//! `J'' + J' + mu J = e^{-t} G(x, t)` and the ergodic average is
//! `<f>_T(x) = J(x g_{log T}, log T)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables::{CaseTag, Observable, SpectralParameter};
use crate::quadrature::{integrate, Integral, QuadOptions};
use crate::report::{slack, CheckReport};
use crate::sl2::GroupElement;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ErgodicAverageRecord {
    pub x: GroupElement,
    pub t_end: f64,
    pub value: f64,
    pub quad_error: f64,
    pub window_norm: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JRecord {
    pub x: GroupElement,
    pub t: f64,
    pub j: f64,
    pub dj: f64,
    pub d2j: f64,
    pub quad_error: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OdeResidualRecord {
    pub j: JRecord,
    pub g: f64,
    pub mu: f64,
    pub residual: f64,
}

/// `x g_{log T}`, the base point at which `<f>_T(x)` becomes a unit-length horocycle average.
pub fn rescaled_base(x: &GroupElement, t_end: f64) -> GroupElement {
    x.geodesic(t_end.ln())
}

/// `(1/T) int_0^T f(x h_t) dt` by adaptive quadrature.
pub fn ergodic_average(f: &Observable, x: &GroupElement, t_end: f64) -> Result<ErgodicAverageRecord> {
    if !(t_end >= 1.0 && t_end.is_finite()) {
        return Err(Error::InvalidParameter(format!("ergodic average needs T >= 1, got {t_end}")));
    }
    f.require_anchor(&rescaled_base(x, t_end))?;
    let i = integrate(|t| f.value(&x.horocycle(t)), 0.0, t_end, &QuadOptions::default())?;
    Ok(ErgodicAverageRecord {
        x: *x,
        t_end,
        value: i.value / t_end,
        quad_error: i.error / t_end,
        window_norm: f.window().map(|w| w.c2_norm),
    })
}

/// `int_a^b f(x h_t) dt` without normalisation.
pub fn horocycle_integral(f: &Observable, x: &GroupElement, a: f64, b: f64) -> Result<Integral> {
    integrate(|t| f.value(&x.horocycle(t)), a, b, &QuadOptions::default())
}

/// `J`, `J'`, `J''` at `(x, t)`; derivatives use `J' = int -Xf` and `J'' = int X^2 f`.
pub fn j_function(f: &Observable, x: &GroupElement, t: f64) -> Result<JRecord> {
    let o = QuadOptions::default();
    let at = |s: f64| x.horocycle(s).geodesic(-t);
    let j = integrate(|s| f.value(&at(s)), 0.0, 1.0, &o)?;
    let dj = integrate(|s| -f.x(&at(s)), 0.0, 1.0, &o)?;
    let d2j = integrate(|s| f.xx(&at(s)), 0.0, 1.0, &o)?;
    Ok(JRecord { x: *x, t, j: j.value, dj: dj.value, d2j: d2j.value, quad_error: j.error + dj.error + d2j.error })
}

/// `|J'' + J' + mu J - e^{-t} G(x, t)|`.
pub fn ode_residual(f: &Observable, x: &GroupElement, t: f64) -> Result<OdeResidualRecord> {
    let sp = f.require_spectral()?;
    let j = j_function(f, x, t)?;
    let g = f.g_term_unchecked(x, t);
    let residual = (j.d2j + j.dj + sp.mu * j.j - (-t).exp() * g).abs();
    Ok(OdeResidualRecord { j, g, mu: sp.mu, residual })
}

pub fn characteristic_roots(mu: f64) -> Result<(num_complex::Complex64, num_complex::Complex64)> {
    Ok(SpectralParameter::from_mu(mu)?.characteristic_roots())
}

/// For `mu < 0`: `|T <f>_T| <= 5 |f|` and `|J(x, log T)| <= 5 |f| / T` over the grid.
pub fn discrete_boundedness_check(f: &Observable, x: &GroupElement, t_grid: &[f64]) -> Result<CheckReport> {
    let sp = f.require_spectral()?;
    if sp.case != CaseTag::DiscreteSeries {
        return Err(Error::InvalidParameter("boundedness check applies to the discrete series".into()));
    }
    let mut anchors: Vec<GroupElement> = t_grid.iter().map(|&t| rescaled_base(x, t)).collect();
    anchors.push(*x);
    let fw = f.ensure_window(&anchors)?;
    let norm = fw.window_norm()?.c2_norm;
    let mut r = CheckReport::new("discrete boundedness");
    for &t_end in t_grid {
        let avg = ergodic_average(&fw, x, t_end)?;
        r.push(format!("|T <f>_T| <= 5|f|, T={t_end}"), (t_end * avg.value).abs(), 5.0 * norm, slack(t_end * avg.quad_error, 0.0));
        let j = j_function(&fw, x, t_end.ln())?;
        r.push(format!("|J(x,t)| <= 5 e^-t |f|, t={}", t_end.ln()), j.j.abs(), 5.0 * norm / t_end, slack(j.quad_error, 0.0));
    }
    r.value("window_c2_norm", norm);
    Ok(r)
}

/// `C(p) = J(p,0) + J'(p,0) + int_0^inf e^{-xi} G(p, xi) dxi`, the limit of `J(p, t)` when `mu = 0`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ZeroMuConstant {
    pub value: f64,
    pub quad_error: f64,
    pub tail_bound: f64,
}

pub fn zero_mu_constant(f: &Observable, p: &GroupElement) -> Result<ZeroMuConstant> {
    let fw = f.ensure_window(&[*p])?;
    let v_sup = fw.window_norm()?.v_sup;
    let j = j_function(&fw, p, 0.0)?;
    let target = 5e-9;
    let xi_max = if v_sup > 0.0 { (2.0 * v_sup / target).ln().max(0.0) } else { 0.0 };
    let tail = integrate(|xi| (-xi).exp() * fw.g_term_unchecked(p, xi), 0.0, xi_max, &QuadOptions::default())?;
    Ok(ZeroMuConstant {
        value: j.j + j.dj + tail.value,
        quad_error: j.quad_error + tail.error,
        tail_bound: 2.0 * v_sup * (-xi_max).exp(),
    })
}

/// For `mu = 0`: `<f>_T = C + (1/T) int_0^{log T} (Vf(x h_T g_xi) - Vf(x g_xi)) dxi + O(|f|/T)`,
/// asserted with the constant `C(x g_{log T})` computed and subtracted.
pub fn mu_zero_formula_check(f: &Observable, x: &GroupElement, t_grid: &[f64]) -> Result<CheckReport> {
    let sp = f.require_spectral()?;
    if sp.case != CaseTag::ZeroMu {
        return Err(Error::InvalidParameter("formula check applies to mu = 0".into()));
    }
    let anchors: Vec<GroupElement> = t_grid.iter().map(|&t| rescaled_base(x, t)).collect();
    let fw = f.ensure_window(&anchors)?;
    let norm = fw.window_norm()?.c2_norm;
    let mut r = CheckReport::new("mu = 0 formula");
    for &t_end in t_grid {
        let avg = ergodic_average(&fw, x, t_end)?;
        let xt = x.horocycle(t_end);
        let formula = integrate(
            |xi| fw.v(&xt.geodesic(xi)) - fw.v(&x.geodesic(xi)),
            0.0,
            t_end.ln(),
            &QuadOptions::default(),
        )?;
        let c = zero_mu_constant(&fw, &rescaled_base(x, t_end))?;
        let gap = (avg.value - c.value - formula.value / t_end).abs();
        let err = avg.quad_error + formula.error / t_end + c.quad_error;
        r.push(format!("T={t_end}"), gap, 3.0 * norm / t_end, slack(err, c.tail_bound));
        r.value(format!("constant T={t_end}"), c.value);
    }
    r.value("window_c2_norm", norm);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::Part;
    use num_complex::Complex64;

    fn y() -> Observable {
        Observable::power(Complex64::new(1.0, 0.0), Part::Real).unwrap()
    }

    #[test]
    fn y_along_horocycle_through_rotation() {
        // bottom row (1, 0): y(x h_s) = 1/(1 + s^2), average over [0, 1] is pi/4
        let x = GroupElement::new(0.0, -1.0, 1.0, 0.0).unwrap();
        let r = ergodic_average(&y(), &x, 1.0).unwrap();
        assert!((r.value - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        // at the identity the orbit stays at height one
        let r = ergodic_average(&y(), &GroupElement::IDENTITY, 1.0).unwrap();
        assert!((r.value - 1.0).abs() < 1e-14);
    }

    #[test]
    fn average_matches_closed_form_antiderivative() {
        // y(x h_t) = 1/(c^2 + (ct + d)^2)
        let x = GroupElement::new(1.3, -0.2, 0.7, 0.66).unwrap();
        let t_end = 50.0;
        let (c, d) = (x.c, x.d);
        let exact = (((c * t_end + d) / c).atan() - (d / c).atan()) / (c * c) / t_end;
        let r = ergodic_average(&y(), &x, t_end).unwrap();
        assert!((r.value - exact).abs() < 1e-13);
    }

    #[test]
    fn average_equals_rescaled_j() {
        let f = Observable::from_key("power:s=0.5+1.5i:real").unwrap();
        let x = GroupElement::new(0.4, 0.9, -0.8, 0.7).unwrap();
        let t_end = 30.0;
        let a = ergodic_average(&f, &x, t_end).unwrap();
        let j = j_function(&f, &rescaled_base(&x, t_end), t_end.ln()).unwrap();
        assert!((a.value - j.j).abs() < 1e-12);
    }

    #[test]
    fn t_below_one_rejected() {
        assert!(ergodic_average(&y(), &GroupElement::IDENTITY, 0.5).is_err());
    }

    #[test]
    fn derivative_identity_matches_finite_difference() {
        let f = Observable::from_key("power:s=0.75+0i:real").unwrap();
        let x = GroupElement::new(0.4, 0.9, -0.8, 0.7).unwrap();
        let t = 1.3;
        let h = 1e-3;
        let jp = j_function(&f, &x, t + h).unwrap().j;
        let jm = j_function(&f, &x, t - h).unwrap().j;
        let j = j_function(&f, &x, t).unwrap();
        assert!(((jp - jm) / (2.0 * h) - j.dj).abs() < 1e-6);
    }

    #[test]
    fn residual_small_for_every_case() {
        let x = GroupElement::new(1.3, -0.2, 0.7, 0.66).unwrap();
        for key in [
            "power:s=0.5+1.5i:real",
            "power:s=0.5+0i:real",
            "power:s=0.75+0i:imag",
            "power:s=1+0i:real",
            "discrete:n=3:real",
        ] {
            let f = Observable::from_key(key).unwrap();
            for t in [0.0, 0.5, 2.0, 5.0] {
                let r = ode_residual(&f, &x, t).unwrap();
                assert!(r.residual < 1e-10, "{key} t={t} residual {}", r.residual);
            }
        }
    }

    #[test]
    fn roots() {
        let (zp, zm) = characteristic_roots(0.1875).unwrap();
        assert!((zp.re + 0.75).abs() < 1e-15 && (zm.re + 0.25).abs() < 1e-15);
        let (zp, zm) = characteristic_roots(2.5).unwrap();
        assert!((zp - Complex64::new(-0.5, -1.5)).norm() < 1e-15);
        assert!((zm - Complex64::new(-0.5, 1.5)).norm() < 1e-15);
        for mu in [0.1875, 0.25, 2.5, 0.0, -0.75] {
            let (zp, zm) = characteristic_roots(mu).unwrap();
            for z in [zp, zm] {
                assert!((z * z + z + mu).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn discrete_bounded() {
        let f = Observable::discrete(3, Part::Real).unwrap();
        let x = GroupElement::new(1.3, -0.2, 0.7, 0.66).unwrap();
        let r = discrete_boundedness_check(&f, &x, &[10.0, 100.0, 1000.0]).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn mu_zero_formula() {
        let x = GroupElement::new(1.3, -0.2, 0.7, 0.66).unwrap();
        let r = mu_zero_formula_check(&y(), &x, &[10.0, 100.0]).unwrap();
        assert!(r.passed(), "{r:?}");
    }
}
