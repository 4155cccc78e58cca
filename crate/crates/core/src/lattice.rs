//! A cocompact lattice: the genus-2 surface group generated by the side pairings
//! of the regular hyperbolic octagon centred at `i`.
//!
//! Points are reduced into the Dirichlet domain by greedily applying the generator
//! that most decreases `cosh d(g.i, i) = |g|_F^2 / 2`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::report::CheckReport;
use crate::sl2::{GroupElement, IwasawaCoords};

pub const REDUCTION_CAP: usize = 100_000;
const REDUCTION_TOL: f64 = 1e-10;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FuchsianGroup {
    /// Symmetric generating set: indices `0..4` are the side pairings, `4..8` their inverses.
    pub generators: Vec<GroupElement>,
    /// Word in generator indices whose product is `+-I`.
    pub relator: Vec<usize>,
    /// Hyperbolic circumradius of the fundamental domain.
    pub circumradius: f64,
    /// Hyperbolic area of the fundamental domain.
    pub area: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReducedPoint {
    pub point: GroupElement,
    /// Generators applied on the left, in order: `point = s_{w_k} ... s_{w_1} g`.
    pub word: Vec<usize>,
}

fn rotation(t: f64) -> GroupElement {
    let (s, c) = t.sin_cos();
    GroupElement { a: c, b: s, c: -s, d: c }
}

impl FuchsianGroup {
    /// The regular-octagon genus-2 group. Each side pairing is a conjugate of a
    /// hyperbolic element of translation length `2 acosh(1 + sqrt 2)`.
    pub fn genus2_octagon() -> Result<Self> {
        let half = (1.0 + 2f64.sqrt()).acosh();
        let axis = GroupElement { a: half.exp(), b: 0.0, c: 0.0, d: (-half).exp() };
        let mut generators = Vec::with_capacity(8);
        for k in 0..4 {
            let t = k as f64 * std::f64::consts::PI / 8.0;
            generators.push(rotation(t) * axis * rotation(-t));
        }
        for k in 0..4 {
            generators.push(generators[k].inverse());
        }
        let cosh_r = (1.0 + 2f64.sqrt()).powi(2);
        let group = FuchsianGroup {
            generators,
            relator: vec![0, 3, 6, 1, 4, 7, 2, 5],
            circumradius: cosh_r.acosh(),
            area: 4.0 * std::f64::consts::PI,
        };
        group.verify_relator()?;
        Ok(group)
    }

    /// Checks that the relator multiplies out to `+-I` within `1e-10`.
    pub fn verify_relator(&self) -> Result<f64> {
        let p = self.word_element(&self.relator)?;
        let plus = p.distance_sup(&GroupElement::IDENTITY);
        let minus = p.distance_sup(&GroupElement { a: -1.0, b: 0.0, c: 0.0, d: -1.0 });
        let res = plus.min(minus);
        if res > 1e-10 {
            return Err(Error::Relator(res));
        }
        Ok(res)
    }

    /// Product `s_{w_1} s_{w_2} ... s_{w_k}`.
    pub fn word_product(&self, word: &[usize]) -> Result<GroupElement> {
        let mut p = GroupElement::IDENTITY;
        for &i in word {
            let s = self
                .generators
                .get(i)
                .ok_or_else(|| Error::InvalidParameter(format!("generator index {i} out of range")))?;
            p = p * *s;
        }
        Ok(p)
    }

    /// The element `s_{w_k} ... s_{w_1}` applied by a reduction word.
    pub fn word_element(&self, word: &[usize]) -> Result<GroupElement> {
        let rev: Vec<usize> = word.iter().rev().copied().collect();
        self.word_product(&rev)
    }

    pub fn reduce(&self, g: &GroupElement) -> Result<ReducedPoint> {
        let mut cur = *g;
        let mut norm = cur.frobenius_sq();
        let mut word = Vec::new();
        for _ in 0..REDUCTION_CAP {
            let mut best: Option<(usize, GroupElement, f64)> = None;
            for (i, s) in self.generators.iter().enumerate() {
                let h = *s * cur;
                let n = h.frobenius_sq();
                if best.as_ref().is_none_or(|b| n < b.2) {
                    best = Some((i, h, n));
                }
            }
            let (i, h, n) = best.expect("non-empty generating set");
            if n < norm - REDUCTION_TOL * norm {
                cur = h;
                norm = n;
                word.push(i);
            } else {
                return Ok(ReducedPoint { point: cur, word });
            }
        }
        Err(Error::ReductionCap(REDUCTION_CAP))
    }

    pub fn in_fundamental_domain(&self, g: &GroupElement) -> Result<bool> {
        Ok(self.reduce(g)?.word.is_empty())
    }

    /// `(x, 1/y)` bounding box of the fundamental domain (the disc of radius `R` around `i`).
    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        let r = self.circumradius * 1.001;
        ([-r.sinh(), r.sinh()], [(-r).exp(), r.exp()])
    }

    /// Haar-distributed points of the fundamental domain by rejection: Haar measure is
    /// Lebesgue in `(x, 1/y, theta)`.
    pub fn sample_haar(&self, n: usize, seed: u64) -> Result<Vec<GroupElement>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (bx, bu) = self.bounding_box();
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let x = rng.gen_range(bx[0]..bx[1]);
            let u = rng.gen_range(bu[0]..bu[1]);
            let theta = rng.gen_range(0.0..std::f64::consts::TAU);
            let g = IwasawaCoords { x, y: 1.0 / u, theta }.to_group();
            if self.in_fundamental_domain(&g)? {
                out.push(g);
            }
        }
        Ok(out)
    }

    /// Heights `[y_lo, y_hi]` of the fundamental domain above `x`, from the Dirichlet
    /// conditions `d(z, i) <= d(z, s i)`. Each reads `(v - 1) y^2 <= (x - p)^2 + v^2 - v - v x^2`
    /// for `s i = p + i v`, so every generator bounds `y` from one side.
    pub fn y_interval(&self, x: f64) -> Option<(f64, f64)> {
        let (mut lo2, mut hi2) = (0.0f64, f64::INFINITY);
        for s in &self.generators {
            // s i = (a i + b) / (c i + d)
            let den = s.c * s.c + s.d * s.d;
            let (p, v) = ((s.a * s.c + s.b * s.d) / den, 1.0 / den);
            let k = (x - p).powi(2) + v * v - v - v * x * x;
            if (v - 1.0).abs() < 1e-15 {
                if k < 0.0 {
                    return None;
                }
            } else if v > 1.0 {
                hi2 = hi2.min(k / (v - 1.0));
            } else {
                lo2 = lo2.max(k / (v - 1.0));
            }
        }
        (hi2 > lo2 && hi2 > 0.0).then(|| (lo2.max(0.0).sqrt(), hi2.sqrt()))
    }

    /// Lebesgue `(x, 1/y)` area of the fundamental domain inside each cell of a `cells x cells`
    /// partition of the bounding box; `columns` midpoint samples in `x` per cell, exact in `1/y`.
    pub fn cell_masses(&self, cells: usize, columns: usize) -> Result<Vec<Vec<f64>>> {
        if cells == 0 || columns == 0 {
            return Err(Error::InvalidParameter("cells and columns must be positive".into()));
        }
        let (bx, bu) = self.bounding_box();
        let (hx, hu) = ((bx[1] - bx[0]) / cells as f64, (bu[1] - bu[0]) / cells as f64);
        let dx = hx / columns as f64;
        let mut out = vec![vec![0.0; cells]; cells];
        for (i, row) in out.iter_mut().enumerate() {
            for a in 0..columns {
                let x = bx[0] + hx * i as f64 + dx * (a as f64 + 0.5);
                let Some((ylo, yhi)) = self.y_interval(x) else { continue };
                let (ulo, uhi) = (1.0 / yhi, if ylo > 0.0 { 1.0 / ylo } else { f64::INFINITY });
                for (j, m) in row.iter_mut().enumerate() {
                    let (c0, c1) = (bu[0] + hu * j as f64, bu[0] + hu * (j + 1) as f64);
                    *m += (uhi.min(c1) - ulo.max(c0)).max(0.0) * dx;
                }
            }
        }
        Ok(out)
    }

    /// Mean of `y` under normalised Haar measure on the fundamental domain:
    /// `int ln(y_hi / y_lo) dx / area`, midpoint rule in `x`.
    pub fn mean_y(&self, columns: usize) -> Result<f64> {
        if columns == 0 {
            return Err(Error::InvalidParameter("columns must be positive".into()));
        }
        let (bx, _) = self.bounding_box();
        let dx = (bx[1] - bx[0]) / columns as f64;
        let (mut num, mut den) = (0.0, 0.0);
        for a in 0..columns {
            let x = bx[0] + dx * (a as f64 + 0.5);
            if let Some((ylo, yhi)) = self.y_interval(x) {
                if ylo <= 0.0 {
                    return Err(Error::Degenerate("fundamental domain reaches the boundary".into()));
                }
                num += (yhi / ylo).ln() * dx;
                den += (1.0 / ylo - 1.0 / yhi) * dx;
            }
        }
        Ok(num / den)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and re-verifies the relator.
    pub fn from_json(s: &str) -> Result<Self> {
        let g: FuchsianGroup = serde_json::from_str(s)?;
        g.verify_relator()?;
        Ok(g)
    }
}

/// Chi-square goodness of fit of Haar samples against the cell masses on a
/// `cells x cells x cells` grid in `(x, 1/y, theta)`; cells with expected count below 5
/// are pooled.
pub fn haar_chi_square(group: &FuchsianGroup, samples: &[GroupElement], cells: usize, columns: usize) -> Result<(f64, f64, usize)> {
    let masses = group.cell_masses(cells, columns)?;
    let total: f64 = masses.iter().flatten().sum();
    let (bx, bu) = group.bounding_box();
    let mut counts = vec![0usize; cells * cells * cells];
    for g in samples {
        let c = g.iwasawa();
        let i = (((c.x - bx[0]) / (bx[1] - bx[0])) * cells as f64).floor().clamp(0.0, cells as f64 - 1.0) as usize;
        let j = (((1.0 / c.y - bu[0]) / (bu[1] - bu[0])) * cells as f64).floor().clamp(0.0, cells as f64 - 1.0) as usize;
        let k = ((c.theta / std::f64::consts::TAU) * cells as f64).floor().clamp(0.0, cells as f64 - 1.0) as usize;
        counts[(i * cells + j) * cells + k] += 1;
    }
    let n = samples.len() as f64;
    let mut regular: Vec<(f64, f64)> = Vec::new();
    let (mut pool_obs, mut pool_exp) = (0.0, 0.0);
    for i in 0..cells {
        for j in 0..cells {
            for k in 0..cells {
                let e = n * masses[i][j] / total / cells as f64;
                let o = counts[(i * cells + j) * cells + k] as f64;
                if e < 5.0 {
                    pool_obs += o;
                    pool_exp += e;
                } else {
                    regular.push((o, e));
                }
            }
        }
    }
    if pool_exp >= 5.0 {
        regular.push((pool_obs, pool_exp));
    } else if pool_obs > 0.0 || pool_exp > 0.0 {
        // too thin to stand alone: fold into the smallest regular bin
        let smallest = regular
            .iter_mut()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .ok_or_else(|| Error::Degenerate("no cell has expected count >= 5".into()))?;
        smallest.0 += pool_obs;
        smallest.1 += pool_exp;
    }
    let bins = regular.len();
    if bins < 2 {
        return Err(Error::Degenerate("too few populated cells for a chi-square test".into()));
    }
    let stat: f64 = regular.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dist = ChiSquared::new((bins - 1) as f64).map_err(|e| Error::Degenerate(e.to_string()))?;
    Ok((stat, dist.sf(stat), bins))
}

/// Checks that the horocycle orbit of `x` reduces into the fundamental domain at every grid time.
pub fn recurrent_orbit_check(group: &FuchsianGroup, x: &GroupElement, t_end: f64, steps: usize) -> Result<CheckReport> {
    let mut r = CheckReport::new("recurrent orbit");
    let cosh_r = group.circumradius.cosh();
    let mut worst: f64 = 0.0;
    for i in 0..=steps {
        let t = t_end * i as f64 / steps as f64;
        let red = group.reduce(&x.horocycle(t))?;
        worst = worst.max(red.point.frobenius_sq() / 2.0);
    }
    r.push("max cosh d(reduced point . i, i) <= cosh R", worst, cosh_r, 1e-9 * cosh_r);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_have_octagon_trace() {
        let g = FuchsianGroup::genus2_octagon().unwrap();
        for s in &g.generators {
            assert!((s.trace().abs() - 2.0 * (1.0 + 2f64.sqrt())).abs() < 1e-12);
            assert!((s.det() - 1.0).abs() < 1e-13);
        }
        assert!(g.verify_relator().unwrap() < 1e-10);
    }

    #[test]
    fn broken_relator_rejected() {
        let mut g = FuchsianGroup::genus2_octagon().unwrap();
        g.relator.swap(0, 1);
        assert!(g.verify_relator().is_err());
    }

    #[test]
    fn reduce_roundtrip() {
        let g = FuchsianGroup::genus2_octagon().unwrap();
        let x = GroupElement::new(3.0, 7.0, 1.0, 2.7).unwrap();
        let r = g.reduce(&x).unwrap();
        assert!(!r.word.is_empty());
        assert!(g.in_fundamental_domain(&r.point).unwrap());
        let back = g.word_element(&r.word).unwrap().inverse() * r.point;
        assert!(back.distance_sup(&x) < 1e-9 * x.frobenius_sq());
        assert!(r.point.frobenius_sq() / 2.0 <= g.circumradius.cosh() * (1.0 + 1e-9));
    }

    #[test]
    fn identity_is_reduced() {
        let g = FuchsianGroup::genus2_octagon().unwrap();
        assert!(g.reduce(&GroupElement::IDENTITY).unwrap().word.is_empty());
    }

    #[test]
    fn json_roundtrip() {
        let g = FuchsianGroup::genus2_octagon().unwrap();
        let s = g.to_json().unwrap();
        let h = FuchsianGroup::from_json(&s).unwrap();
        assert_eq!(g.generators, h.generators);
    }

    #[test]
    fn haar_samples_in_domain_and_deterministic() {
        let g = FuchsianGroup::genus2_octagon().unwrap();
        let a = g.sample_haar(50, 9).unwrap();
        let b = g.sample_haar(50, 9).unwrap();
        assert_eq!(a, b);
        for p in &a {
            assert!(g.in_fundamental_domain(p).unwrap());
        }
    }

    #[test]
    fn y_interval_agrees_with_reduction() {
        let g = FuchsianGroup::genus2_octagon().unwrap();
        for k in 0..40 {
            let x = -1.5 + 3.0 * k as f64 / 39.0;
            let (lo, hi) = g.y_interval(x).unwrap();
            for (y, inside) in [(lo * 1.001, true), (hi * 0.999, true), (lo * 0.99, false), (hi * 1.01, false)] {
                let p = IwasawaCoords { x, y, theta: 0.0 }.to_group();
                assert_eq!(g.in_fundamental_domain(&p).unwrap(), inside, "x={x} y={y}");
            }
        }
    }

    #[test]
    fn domain_area_is_four_pi() {
        let g = FuchsianGroup::genus2_octagon().unwrap();
        let m: f64 = g.cell_masses(4, 20_000).unwrap().iter().flatten().sum();
        assert!((m - 4.0 * std::f64::consts::PI).abs() < 1e-4 * 4.0 * std::f64::consts::PI);
    }
}
