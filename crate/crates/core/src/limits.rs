//! Distances between empirical distributions and the two limit-theorem experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::functionals::{functionals, linear_fit, main_terms, remainder_bound};
use crate::observables::{CaseTag, Observable, SpectralParameter, Window};
use crate::ode::{ergodic_average, horocycle_integral, rescaled_base};
use crate::quadrature::{integrate, integrate_pieces, QuadOptions};
use crate::report::{slack, CheckReport};
use crate::sl2::GroupElement;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    sorted: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParameter("empty sample".into()));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite sample".into()));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(EmpiricalDistribution { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.sorted.len() as f64
    }

    /// Population variance.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.sorted.iter().map(|v| (v - m).powi(2)).sum::<f64>() / self.sorted.len() as f64
    }
}

/// `sup_x (G(x) - F(x + eps))`; for step CDFs the sup is attained at a jump of `G`.
fn excess(f: &EmpiricalDistribution, g: &EmpiricalDistribution, eps: f64) -> f64 {
    g.sorted.iter().map(|&x| g.cdf(x) - f.cdf(x + eps)).fold(0.0, f64::max)
}

/// Lévy distance by bisection on `eps` with exact feasibility checks; precision `1e-7`.
pub fn levy_distance(f: &EmpiricalDistribution, g: &EmpiricalDistribution) -> f64 {
    let feasible = |eps: f64| excess(f, g, eps) <= eps + 1e-15 && excess(g, f, eps) <= eps + 1e-15;
    let (mut lo, mut hi) = (0.0, 1.0);
    if feasible(0.0) {
        return 0.0;
    }
    while hi - lo > 1e-7 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Kolmogorov-Smirnov distance `sup |F - G|`.
pub fn ks_distance(f: &EmpiricalDistribution, g: &EmpiricalDistribution) -> f64 {
    f.sorted
        .iter()
        .chain(&g.sorted)
        .map(|&x| (f.cdf(x) - g.cdf(x)).abs())
        .fold(0.0, f64::max)
}

/// KS distance from a continuous CDF.
pub fn ks_to_cdf<C: Fn(f64) -> f64>(f: &EmpiricalDistribution, cdf: C) -> f64 {
    let n = f.len() as f64;
    f.sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = cdf(x);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max)
}

/// If `|X_i - Y_i| <= eps` for a coupling then the Lévy distance is at most `eps`.
pub fn levy_lemma_check(xs: &[f64], ys: &[f64], eps: f64) -> Result<CheckReport> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidParameter("coupled samples differ in length".into()));
    }
    let gap = xs.iter().zip(ys).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if gap > eps {
        return Err(Error::InvalidParameter(format!("coupling gap {gap} exceeds eps {eps}")));
    }
    let d = levy_distance(&EmpiricalDistribution::new(xs)?, &EmpiricalDistribution::new(ys)?);
    let mut r = CheckReport::new("levy lemma");
    r.push("levy <= eps", d, eps, 1e-6);
    Ok(r)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpatialLtRow {
    pub t_end: f64,
    pub levy: f64,
    pub ks: f64,
    pub max_gap: f64,
    /// Largest ratio of the per-point gap to the first-line chain bound.
    pub chain_ratio: f64,
    pub final_bound: f64,
    pub normalized: Vec<f64>,
    pub target: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpatialLtReport {
    pub case: CaseTag,
    pub mu_f: f64,
    pub eta: f64,
    pub c_window: f64,
    pub rows: Vec<SpatialLtRow>,
    pub check: CheckReport,
}

struct ComponentData {
    weight: f64,
    sp: SpectralParameter,
    norm: f64,
    /// `D+-` indexed by `[t index][point]`; empty for the discrete series.
    d: Vec<Vec<(f64, f64, f64, f64)>>,
    sup_plus: f64,
    sup_minus: f64,
}

/// Per-case remainder constant `k` with `|R| <= k |f| (1 + log T) / T`.
fn remainder_constant(sp: &SpectralParameter) -> f64 {
    match sp.case {
        CaseTag::Principal => 16.0 / sp.nu.im,
        CaseTag::QuarterPoint => 16.0,
        CaseTag::Complementary => 8.0 / ((1.0 - sp.nu.re * sp.nu.re) * sp.nu.re),
        _ => 5.0,
    }
}

/// Spatial limit theorem for a finite combination of eigenfunctions over an ensemble of base
/// points: the normalised average `A(x)` is compared with the limiting functional evaluated at
/// `x g_{log T}` (the coupling is the identity on the ensemble).
pub fn spatial_lt_experiment(f: &Observable, ensemble: &[GroupElement], t_grid: &[f64]) -> Result<SpatialLtReport> {
    if ensemble.is_empty() || t_grid.is_empty() {
        return Err(Error::InvalidParameter("empty ensemble or T grid".into()));
    }
    if t_grid.iter().any(|&t| t < std::f64::consts::E) {
        return Err(Error::InvalidParameter("spatial limit theorem grid needs T >= e".into()));
    }
    let anchors: Vec<GroupElement> =
        t_grid.iter().flat_map(|&t| ensemble.iter().map(move |x| rescaled_base(x, t))).collect();
    let window = Window::new(anchors);
    let mut comps = Vec::new();
    for c in f.components() {
        let sp = c.observable.require_spectral()?;
        if sp.case == CaseTag::ZeroMu {
            return Err(Error::InvalidParameter("spatial limit theorem excludes mu = 0 components".into()));
        }
        let o = c.observable.with_window(&window)?;
        let norm = o.window_norm()?.c2_norm;
        let mut d = Vec::new();
        if sp.case != CaseTag::DiscreteSeries {
            for &t_end in t_grid {
                let row: Result<Vec<(f64, f64, f64, f64)>> = ensemble
                    .par_iter()
                    .map(|x| {
                        let r = functionals(&o, &rescaled_base(x, t_end))?;
                        Ok((r.d_plus, r.d_minus, r.quad_error, r.tail_bound))
                    })
                    .collect();
                d.push(row?);
            }
        }
        let sup = |sel: fn(&(f64, f64, f64, f64)) -> f64| d.iter().flatten().map(|v| sel(v).abs()).fold(0.0, f64::max);
        let (sup_plus, sup_minus) = (sup(|v| v.0), sup(|v| v.1));
        comps.push(ComponentData { weight: c.weight, sp, norm, d, sup_plus, sup_minus });
    }

    let active: Vec<&ComponentData> =
        comps.iter().filter(|c| c.sp.case != CaseTag::DiscreteSeries && c.weight != 0.0 && c.sup_minus > 1e-12).collect();
    let mu_f = active
        .iter()
        .map(|c| c.sp.mu)
        .fold(f64::INFINITY, f64::min);
    if !mu_f.is_finite() {
        return Err(Error::Degenerate("no component with mu > 0 has a non-vanishing D-".into()));
    }
    let sp_f = SpectralParameter::from_mu(mu_f)?;
    let same = |c: &ComponentData| (c.sp.mu - mu_f).abs() < 1e-12;
    let nu_f = sp_f.nu.re;
    let eta0 = comps
        .iter()
        .filter(|c| c.sp.case == CaseTag::Complementary && c.sp.mu > mu_f + 1e-12)
        .map(|c| nu_f - c.sp.nu.re)
        .fold(f64::INFINITY, f64::min);
    let eta = match sp_f.case {
        CaseTag::Complementary => 0.5 * eta0.min(1.0 - nu_f).min(nu_f),
        _ => 0.5,
    };
    let sum_abs = |sel: &dyn Fn(&ComponentData) -> bool| -> f64 {
        comps.iter().filter(|c| sel(c)).map(|c| c.weight.abs() * (c.sup_plus + c.sup_minus)).sum()
    };
    let k_rem: f64 = comps.iter().map(|c| c.weight.abs() * remainder_constant(&c.sp) * c.norm).sum();
    let c_window = sum_abs(&|c| c.sp.case != CaseTag::DiscreteSeries).max(k_rem);

    let mut check = CheckReport::new(format!("spatial limit theorem {}", f.label()));
    let mut rows = Vec::new();
    for (ti, &t_end) in t_grid.iter().enumerate() {
        let lt = t_end.ln();
        let r_bound: f64 = comps.iter().map(|c| c.weight.abs() * remainder_bound(&c.sp, c.norm, t_end)).sum();
        let (scale, first_line, final_bound) = match sp_f.case {
            CaseTag::Complementary => {
                let own: f64 = comps.iter().filter(|c| same(c)).map(|c| c.weight.abs() * c.sup_plus).sum();
                let mut other = 0.0;
                for c in comps.iter().filter(|c| !same(c)) {
                    let w = c.weight.abs();
                    other += match c.sp.case {
                        CaseTag::Complementary if c.sp.mu > mu_f => t_end.powf(-eta0 / 2.0) * w * (c.sup_plus + c.sup_minus),
                        CaseTag::Complementary => {
                            let nc = c.sp.nu.re;
                            w * (t_end.powf(-(nu_f + nc) / 2.0) * c.sup_plus + t_end.powf((nc - nu_f) / 2.0) * c.sup_minus)
                        }
                        CaseTag::DiscreteSeries => 0.0,
                        _ => t_end.powf(-nu_f / 2.0) * lt * w * (c.sup_plus + c.sup_minus),
                    };
                }
                (
                    t_end.powf((1.0 - nu_f) / 2.0),
                    t_end.powf(-nu_f) * own + other + t_end.powf((1.0 + nu_f) / 2.0) * r_bound,
                    2.0 * c_window * t_end.powf(-eta) * (1.0 + lt),
                )
            }
            CaseTag::QuarterPoint => {
                let own: f64 = comps.iter().filter(|c| same(c)).map(|c| c.weight.abs() * c.sup_plus).sum();
                let other = sum_abs(&|c| !same(c) && c.sp.case != CaseTag::DiscreteSeries);
                (t_end.sqrt() / lt, (own + other) / lt + t_end.sqrt() / lt * r_bound, 2.0 * c_window / lt)
            }
            _ => {
                let other: f64 = comps
                    .iter()
                    .filter(|c| c.sp.case != CaseTag::Principal && c.sp.case != CaseTag::DiscreteSeries)
                    .map(|c| c.weight.abs() * (c.sup_plus + c.sup_minus))
                    .sum();
                (t_end.sqrt(), other + t_end.sqrt() * r_bound, c_window * (1.0 + lt) / t_end.sqrt())
            }
        };
        let evaluated: Result<Vec<(f64, f64, f64, f64)>> = ensemble
            .par_iter()
            .enumerate()
            .map(|(i, x)| {
                let avg = ergodic_average(f, x, t_end)?;
                let mut target = 0.0;
                let (mut err, mut tail) = (scale * avg.quad_error, 0.0);
                for c in &comps {
                    if c.sp.case == CaseTag::DiscreteSeries {
                        continue;
                    }
                    let (dp, dm, qe, tb) = c.d[ti][i];
                    let contributes = match sp_f.case {
                        CaseTag::Principal => c.sp.case == CaseTag::Principal,
                        _ => same(c),
                    };
                    if contributes {
                        target += c.weight
                            * match sp_f.case {
                                CaseTag::Principal => main_terms(&c.sp, dp, dm, lt) * t_end.sqrt(),
                                _ => dm,
                            };
                    }
                    err += c.weight.abs() * qe;
                    tail += c.weight.abs() * tb;
                }
                Ok((scale * avg.value, target, err, tail))
            })
            .collect();
        let evaluated = evaluated?;
        let mut max_gap: f64 = 0.0;
        let mut chain_ratio: f64 = 0.0;
        for (i, &(a, target, err, tail)) in evaluated.iter().enumerate() {
            let gap = (a - target).abs();
            let s = slack(err, tail);
            check.push(format!("chain bound T={t_end:.4} point {i}"), gap, first_line, s);
            check.push(format!("final bound T={t_end:.4} point {i}"), gap, final_bound, s);
            max_gap = max_gap.max(gap);
            chain_ratio = chain_ratio.max(gap / first_line);
        }
        let normalized: Vec<f64> = evaluated.iter().map(|v| v.0).collect();
        let target: Vec<f64> = evaluated.iter().map(|v| v.1).collect();
        let fa = EmpiricalDistribution::new(&normalized)?;
        let fb = EmpiricalDistribution::new(&target)?;
        let levy = levy_distance(&fa, &fb);
        let ks = ks_distance(&fa, &fb);
        check.push(format!("levy <= max gap, T={t_end:.4}"), levy, max_gap, 1e-6);
        rows.push(SpatialLtRow { t_end, levy, ks, max_gap, chain_ratio, final_bound, normalized, target });
    }
    check.value("mu_f", mu_f);
    check.value("eta", eta);
    check.value("C_window", c_window);
    Ok(SpatialLtReport { case: sp_f.case, mu_f, eta, c_window, rows, check })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TemporalRow {
    pub t_end: f64,
    pub mean: f64,
    /// Variance of `(I_f(x, t) + int_0^{log T} Vf0(x g_s) ds) / sqrt(log T)`.
    pub variance: f64,
    /// The same without the `1/sqrt(log T)` normalisation.
    pub raw_variance: f64,
    /// KS distance of the normalised sample from the fitted normal law.
    pub ks_normal: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TemporalCltReport {
    pub rows: Vec<TemporalRow>,
    /// Least squares `raw variance = a + b log T`: `(a, b, R^2)`.
    pub raw_fit: (f64, f64, f64),
    /// Least squares `variance = a + b log T`: `(a, b, R^2)`.
    pub normalized_fit: (f64, f64, f64),
    pub reduction: CheckReport,
}

/// Temporal distributional limit along one orbit: `t` uniform in `[0, T]`.
pub fn temporal_clt_experiment(
    f: &Observable,
    x: &GroupElement,
    t_grid: &[f64],
    samples: usize,
    seed: u64,
) -> Result<TemporalCltReport> {
    if samples < 2 || t_grid.len() < 2 {
        return Err(Error::InvalidParameter("need at least 2 samples and 2 grid values".into()));
    }
    if t_grid.iter().any(|&t| t <= std::f64::consts::E) {
        return Err(Error::InvalidParameter("temporal grid needs T > e".into()));
    }
    let zero_parts: Vec<(f64, Observable)> = f
        .components()
        .into_iter()
        .filter(|c| c.observable.spectral().map(|s| s.case) == Some(CaseTag::ZeroMu))
        .map(|c| (c.weight, c.observable))
        .collect();
    if zero_parts.is_empty() {
        return Err(Error::InvalidParameter("observable has no mu = 0 component".into()));
    }
    let f0 = Observable::combination(&zero_parts)?;
    let opts = QuadOptions::default();
    let mut rows = Vec::new();
    let mut reduction = CheckReport::new("temporal reduction");
    for (ti, &t_end) in t_grid.iter().enumerate() {
        let lt = t_end.ln();
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(ti as u64));
        let mut ts: Vec<f64> = (0..samples).map(|_| rng.gen_range(0.0..t_end)).collect();
        ts.sort_by(f64::total_cmp);
        // cumulative I_f(x, t) over the sorted times
        let mut bounds = vec![0.0];
        bounds.extend_from_slice(&ts);
        let pieces: Result<Vec<f64>> =
            bounds.par_windows(2).map(|w| horocycle_integral(f, x, w[0], w[1]).map(|i| i.value)).collect();
        let mut acc = 0.0;
        let ints: Vec<f64> = pieces?
            .into_iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        let centre = integrate(|s| f0.v(&x.geodesic(s)), 0.0, lt, &opts)?.value;
        let raw: Vec<f64> = ints.iter().map(|i| i + centre).collect();
        let raw_dist = EmpiricalDistribution::new(&raw)?;
        let raw_variance = raw_dist.variance();
        if raw_variance < 1e-12 {
            return Err(Error::Degenerate(
                "variance vanishes; f appears to be a coboundary along this orbit".into(),
            ));
        }
        let normed: Vec<f64> = raw.iter().map(|v| v / lt.sqrt()).collect();
        let nd = EmpiricalDistribution::new(&normed)?;
        let normal = Normal::new(nd.mean(), nd.variance().sqrt()).map_err(|e| Error::Degenerate(e.to_string()))?;
        let ks_normal = ks_to_cdf(&nd, |v| normal.cdf(v));
        rows.push(TemporalRow { t_end, mean: nd.mean(), variance: nd.variance(), raw_variance, ks_normal });

        // |int_{log t}^{log T} (Vf0(x h_t g_s) - Vf0(x g_s)) ds| <= |f0| for every sample
        let mut anchors: Vec<GroupElement> =
            (0..=64).map(|k| rescaled_base(x, t_end).horocycle(k as f64 / 64.0)).collect();
        anchors.push(*x);
        let fw = f0.with_window(&Window::new(anchors))?;
        let norm = fw.window_norm()?.c2_norm;
        let gaps: Result<Vec<(f64, f64)>> = ts
            .par_iter()
            .filter(|&&t| t >= 1.0)
            .map(|&t| {
                let xt = x.horocycle(t);
                let i = integrate(|s| fw.v(&xt.geodesic(s)) - fw.v(&x.geodesic(s)), t.ln(), lt, &opts)?;
                Ok((i.value.abs(), i.error))
            })
            .collect();
        let gaps = gaps?;
        let (worst, err) = gaps.iter().fold((0.0f64, 0.0f64), |a, g| if g.0 > a.0 { *g } else { a });
        reduction.push(format!("max over samples, T={t_end:.4}"), worst, norm, slack(err, 0.0));
    }
    let lts: Vec<f64> = rows.iter().map(|r| r.t_end.ln()).collect();
    let raw_fit = linear_fit(&lts, &rows.iter().map(|r| r.raw_variance).collect::<Vec<_>>());
    let normalized_fit = linear_fit(&lts, &rows.iter().map(|r| r.variance).collect::<Vec<_>>());
    Ok(TemporalCltReport { rows, raw_fit, normalized_fit, reduction })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeodesicBaselineRow {
    pub s: f64,
    pub mean: f64,
    pub variance: f64,
}

/// Distribution over the ensemble of `S^{-1/2} int_{-S}^0 Vf0(y g_s) ds`; its variance
/// estimates the geodesic-flow variance entering the temporal limit.
pub fn geodesic_clt_baseline(f0: &Observable, ensemble: &[GroupElement], s_grid: &[f64]) -> Result<Vec<GeodesicBaselineRow>> {
    if ensemble.len() < 2 {
        return Err(Error::InvalidParameter("need at least 2 ensemble points".into()));
    }
    let fine = QuadOptions::default();
    let coarse = QuadOptions { max_panel: f64::INFINITY, ..QuadOptions::default() };
    let mut rows = Vec::new();
    for &s in s_grid {
        if !(s > 0.0) {
            return Err(Error::InvalidParameter(format!("geodesic time {s} must be positive")));
        }
        let vals: Result<Vec<f64>> = ensemble
            .par_iter()
            .map(|y| {
                let near = (-s).max(-64.0);
                let mut v = integrate(|u| f0.v(&y.geodesic(u)), near, 0.0, &fine)?.value;
                if near > -s {
                    v += integrate_pieces(|u| f0.v(&y.geodesic(u)), &[-s, near], &coarse)?.value;
                }
                Ok(v / s.sqrt())
            })
            .collect();
        let d = EmpiricalDistribution::new(&vals?)?;
        rows.push(GeodesicBaselineRow { s, mean: d.mean(), variance: d.variance() });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dist(v: &[f64]) -> EmpiricalDistribution {
        EmpiricalDistribution::new(v).unwrap()
    }

    #[test]
    fn levy_of_point_masses() {
        assert!((levy_distance(&dist(&[0.0]), &dist(&[0.3])) - 0.3).abs() < 1e-6);
        assert!((levy_distance(&dist(&[0.0]), &dist(&[5.0])) - 1.0).abs() < 1e-6);
        assert_eq!(levy_distance(&dist(&[1.0, 2.0]), &dist(&[2.0, 1.0])), 0.0);
    }

    #[test]
    fn ks_of_point_masses() {
        assert_eq!(ks_distance(&dist(&[0.0]), &dist(&[0.3])), 1.0);
        assert!((ks_distance(&dist(&[0.0, 1.0]), &dist(&[0.0, 2.0])) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn levy_lemma() {
        let xs = [0.1, 0.5, -0.2, 0.9];
        let ys = [0.12, 0.47, -0.21, 0.95];
        assert!(levy_lemma_check(&xs, &ys, 0.05).unwrap().passed());
        assert!(levy_lemma_check(&xs, &ys, 0.01).is_err());
    }

    #[test]
    fn ks_to_normal_of_quantiles_is_small() {
        let n = Normal::new(0.0, 1.0).unwrap();
        let qs: Vec<f64> = (0..999).map(|i| n.inverse_cdf((i as f64 + 0.5) / 999.0)).collect();
        assert!(ks_to_cdf(&dist(&qs), |v| n.cdf(v)) < 1e-3);
    }

    proptest! {
        #[test]
        fn levy_is_a_metric_and_below_ks(
            a in proptest::collection::vec(-2.0f64..2.0, 1..20),
            b in proptest::collection::vec(-2.0f64..2.0, 1..20),
            c in proptest::collection::vec(-2.0f64..2.0, 1..20),
        ) {
            let (fa, fb, fc) = (dist(&a), dist(&b), dist(&c));
            let ab = levy_distance(&fa, &fb);
            prop_assert!((ab - levy_distance(&fb, &fa)).abs() < 2e-7);
            prop_assert!(ab <= levy_distance(&fa, &fc) + levy_distance(&fc, &fb) + 3e-7);
            prop_assert!(ab <= ks_distance(&fa, &fb) + 1e-7);
            prop_assert!(levy_distance(&fa, &fa) == 0.0);
        }
    }
}
