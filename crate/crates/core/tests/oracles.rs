use approx::assert_abs_diff_eq;
use horolab::experiments::{run, ExperimentConfig};
use horolab::functionals::{expansion, functionals};
use horolab::lattice::FuchsianGroup;
use horolab::ode::ergodic_average;
use horolab::{GroupElement, Observable, Part};
use num_complex::Complex64;

fn s_matrix() -> GroupElement {
    GroupElement::new(0.0, -1.0, 1.0, 0.0).unwrap()
}

#[test]
fn height_average_is_arctan() {
    // y(x h_t) = 1 / (1 + t^2) for x = [[0,-1],[1,0]]
    let y = Observable::from_key("power:s=1+0i:real").unwrap();
    for t in [1.0, 3.0, 40.0, 500.0] {
        let a = ergodic_average(&y, &s_matrix(), t).unwrap();
        assert_abs_diff_eq!(a.value, f64::atan(t) / t, epsilon = 1e-12);
    }
}

#[test]
fn square_root_height_average_is_asinh() {
    let f = Observable::from_key("power:s=0.5+0i:real").unwrap();
    for t in [1.0, 10.0, 1000.0] {
        let a = ergodic_average(&f, &s_matrix(), t).unwrap();
        assert_abs_diff_eq!(a.value, t.asinh() / t, epsilon = 1e-12);
    }
}

#[test]
fn discrete_observable_is_automorphy_factor_power() {
    let g = GroupElement::new(1.3, -0.2, 0.7, 0.66).unwrap();
    for n in [3u32, 4, 7] {
        let f = Observable::discrete(n, Part::Complex).unwrap();
        let want = Complex64::new(g.d, g.c).powi(-(n as i32));
        let got = f.value_complex(&g);
        assert!((got - want).norm() < 1e-12, "n={n}: {got} vs {want}");
    }
}

#[test]
fn principal_average_matches_simpson() {
    // int_0^T (1 + t^2)^{-s} dt has no elementary form for complex s
    let s = Complex64::new(0.5, 1.5);
    let f = Observable::power(s, Part::Real).unwrap();
    let x = s_matrix();
    let t_end = 4f64.exp();
    let n = 200_000;
    let h = t_end / n as f64;
    let g = |t: f64| Complex64::new(1.0 + t * t, 0.0).powc(-s).re;
    let mut simpson = g(0.0) + g(t_end);
    for i in 1..n {
        simpson += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * h);
    }
    simpson *= h / 3.0 / t_end;
    let direct = ergodic_average(&f, &x, t_end).unwrap();
    assert_abs_diff_eq!(direct.value, simpson, epsilon = 1e-9);
}

#[test]
fn expansion_gap_within_remainder_bound() {
    let x = GroupElement::new(1.3, -0.2, 0.7, 0.66).unwrap();
    for key in ["power:s=0.5+1.5i:real", "power:s=0.5+0i:real", "power:s=0.75+0i:real"] {
        let f = Observable::from_key(key).unwrap();
        for t in [3.0, 50.0, 400.0] {
            let e = expansion(&f, &x, t).unwrap();
            assert!(e.reconstruction_gap <= e.remainder_bound, "{key} T={t}: {e:?}");
            assert!((e.direct - e.main_terms - e.remainder).abs() < 1e-7, "{key} T={t}: {e:?}");
        }
    }
}

#[test]
fn functionals_are_finite_and_deterministic() {
    let x = GroupElement::new(1.3, -0.2, 0.7, 0.66).unwrap();
    for key in ["power:s=0.5+1.5i:real", "power:s=0.5+0i:real", "power:s=0.75+0i:real"] {
        let f = Observable::from_key(key).unwrap();
        let a = functionals(&f, &x).unwrap();
        let b = functionals(&f, &x).unwrap();
        assert!(a.d_plus.is_finite() && a.d_minus.is_finite());
        assert_eq!(a.d_plus, b.d_plus);
        assert_eq!(a.d_minus, b.d_minus);
    }
}

#[test]
fn haar_mean_height_matches_domain_integral() {
    let g = FuchsianGroup::genus2_octagon().unwrap();
    let ys: Vec<f64> = g.sample_haar(100_000, 7).unwrap().iter().map(|p| p.iwasawa().y).collect();
    let n = ys.len() as f64;
    let m = ys.iter().sum::<f64>() / n;
    let var = ys.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (n - 1.0);
    let exact = g.mean_y(200_000).unwrap();
    assert!((m - exact).abs() < 3.0 * (var / n).sqrt(), "{m} vs {exact}");
}

#[test]
fn experiment_csv_is_reproducible() {
    let cfg = ExperimentConfig::from_json(
        r#"{"schema_version":1,"experiment":"expansion","observables":["power:s=0.75+0i:real"],
            "base_points":{"kind":"haar","count":3,"seed":4},"t_grid":[3.0,30.0]}"#,
    )
    .unwrap();
    let a = run(&cfg).unwrap();
    let b = run(&cfg).unwrap();
    assert!(a.passed);
    assert_eq!(a.table.to_csv(), b.table.to_csv());
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
}
