//! Acceptance suite: one PASS/FAIL line per criterion, runtime included in the verdict.
//!
//! Criteria listed in `KNOWN_FAILURES` are computed and printed like the others but do not fail
//! the test run; every other criterion must pass.

use std::f64::consts::E;
use std::time::{Duration, Instant};

use horolab::experiments::{run, ExperimentConfig};
use horolab::functionals::{coarse_bounds_check, functional_norm_check};
use horolab::lattice::FuchsianGroup;
use horolab::limits::{levy_distance, levy_lemma_check, EmpiricalDistribution};
use horolab::ode::{discrete_boundedness_check, ergodic_average, j_function, mu_zero_formula_check, rescaled_base};
use horolab::report::{slack, CheckReport};
use horolab::{GroupElement, Observable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const KNOWN_FAILURES: [usize; 3] = [7, 8, 12];

const PRINCIPAL: &str = "power:s=0.5+1.5i:real";
const QUARTER: &str = "power:s=0.5+0i:real";
const COMPLEMENTARY: &str = "power:s=0.75+0i:real";
const ZERO: &str = "power:s=1+0i:real";
const POSITIVE: [&str; 3] = [PRINCIPAL, QUARTER, COMPLEMENTARY];

struct Verdict {
    id: usize,
    name: &'static str,
    passed: bool,
    detail: String,
    elapsed: Duration,
    limit: Duration,
}

fn obs(key: &str) -> Observable {
    Observable::from_key(key).unwrap()
}

fn haar(n: usize, seed: u64) -> Vec<GroupElement> {
    FuchsianGroup::genus2_octagon().unwrap().sample_haar(n, seed).unwrap()
}

fn config(json: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(json).unwrap()
}

fn summarise(reports: &[CheckReport]) -> (bool, String) {
    let lines: usize = reports.iter().map(|r| r.lines.len()).sum();
    let worst = reports
        .iter()
        .flat_map(|r| r.lines.iter())
        .filter(|l| l.rhs > 0.0)
        .map(|l| l.lhs / l.rhs)
        .fold(0.0, f64::max);
    match reports.iter().find_map(|r| r.first_violation().map(|l| (r.name.clone(), l.clone()))) {
        None => (true, format!("{lines} bounds hold, worst lhs/rhs {worst:.3}")),
        Some((n, l)) => (false, format!("{lines} bounds, first violation {n}: {} ({:.4e} > {:.4e})", l.label, l.lhs, l.rhs)),
    }
}

fn criterion_1() -> (bool, String) {
    let cfg = config(&format!(
        r#"{{"schema_version":1,"experiment":"ode-residual",
            "observables":["{PRINCIPAL}","{QUARTER}","{COMPLEMENTARY}","{ZERO}","discrete:n=3:real"],
            "base_points":{{"kind":"haar","count":5,"seed":101}},
            "t_grid":[1.2,2.0,5.0,20.0,100.0]}}"#
    ));
    let out = run(&cfg).unwrap();
    let residual_lines: Vec<_> =
        out.reports.iter().flat_map(|r| r.lines.iter()).filter(|l| l.label.starts_with("residual")).collect();
    let max = residual_lines.iter().map(|l| l.lhs).fold(0.0, f64::max);
    let ok = residual_lines.len() == 5 * 25 && residual_lines.iter().all(|l| l.passed);
    (ok, format!("{} (x,t) pairs over 5 cases, max residual {max:.3e} (< 1e-6)", residual_lines.len()))
}

fn criterion_2() -> (bool, String) {
    let f = obs(PRINCIPAL);
    let pts = haar(20, 102);
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let ts: Vec<f64> = (0..20).map(|_| rng.gen_range(1.0f64..6.0).exp()).collect();
    let anchors: Vec<GroupElement> = pts.iter().zip(&ts).map(|(x, &t)| rescaled_base(x, t)).collect();
    let fw = f.ensure_window(&anchors).unwrap();
    let rows: Vec<(f64, f64)> = pts
        .par_iter()
        .zip(ts.par_iter())
        .map(|(x, &t)| {
            let a = ergodic_average(&fw, x, t).unwrap();
            let j = j_function(&fw, &rescaled_base(x, t), t.ln()).unwrap();
            ((a.value - j.j).abs(), slack(a.quad_error, j.quad_error))
        })
        .collect();
    let ok = rows.iter().all(|(g, s)| g <= s);
    let worst = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    (ok, format!("20 random (x,T), max |<f>_T - J| = {worst:.3e} within quadrature slack"))
}

fn criterion_3() -> (bool, String) {
    let cfg = config(&format!(
        r#"{{"schema_version":1,"experiment":"expansion",
            "observables":["{PRINCIPAL}","{QUARTER}","{COMPLEMENTARY}"],
            "base_points":{{"kind":"haar","count":10,"seed":103}},
            "t_grid":[{E},{},{},{}]}}"#,
        2f64.exp(),
        4f64.exp(),
        6f64.exp()
    ));
    summarise(&run(&cfg).unwrap().reports)
}

fn criterion_4() -> (bool, String) {
    let pts = haar(100, 104);
    let reports: Vec<CheckReport> = POSITIVE.iter().map(|k| functional_norm_check(&obs(k), &pts).unwrap()).collect();
    summarise(&reports)
}

fn criterion_5() -> (bool, String) {
    let pts = haar(10, 105);
    let grid: Vec<f64> = [1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0].iter().map(|v| v.exp()).collect();
    let reports: Vec<CheckReport> = [PRINCIPAL, COMPLEMENTARY, "power:s=0.6+0i:real", "power:s=0.9+0i:real"]
        .par_iter()
        .flat_map(|k| pts.par_iter().map(|x| coarse_bounds_check(&obs(k), x, &grid).unwrap()).collect::<Vec<_>>())
        .collect();
    summarise(&reports)
}

fn criterion_6() -> (bool, String) {
    let cfg = config(&format!(
        r#"{{"schema_version":1,"experiment":"geodesic-action",
            "observables":["{PRINCIPAL}","{QUARTER}","{COMPLEMENTARY}"],
            "base_points":{{"kind":"haar","count":5,"seed":106}}}}"#
    ));
    summarise(&run(&cfg).unwrap().reports)
}

fn criterion_7() -> (bool, String) {
    let cfg = config(&format!(
        r#"{{"schema_version":1,"experiment":"holder",
            "observables":["{PRINCIPAL}","{QUARTER}","{COMPLEMENTARY}"],
            "base_points":{{"kind":"haar","count":3,"seed":107}}}}"#
    ));
    let out = run(&cfg).unwrap();
    let slopes: Vec<String> = out
        .reports
        .iter()
        .flat_map(|r| r.lines.iter())
        .map(|l| format!("{:.2}", l.label.rsplit("slope ").next().unwrap_or("?").parse::<f64>().unwrap_or(f64::NAN)))
        .collect();
    let (ok, detail) = summarise(&out.reports);
    (ok, format!("{detail}; worst-fit slopes [{}]", slopes.join(" ")))
}

fn criterion_8() -> (bool, String) {
    let cfg = config(&format!(
        r#"{{"schema_version":1,"experiment":"tail-lemmas",
            "observables":["{PRINCIPAL}","{COMPLEMENTARY}","discrete:n=3:real"],
            "base_points":{{"kind":"haar","count":2,"seed":108}}}}"#
    ));
    let out = run(&cfg).unwrap();
    let lines: Vec<_> = out.reports.iter().flat_map(|r| r.lines.iter()).collect();
    let count = |pat: &str| {
        let sel: Vec<_> = lines.iter().filter(|l| l.label.contains(pat)).collect();
        (sel.iter().filter(|l| !l.passed).count(), sel.len())
    };
    let (max_bad, max_all) = count("max(1/(1-a), 1/a)");
    let (xi_bad, xi_all) = count("-8 C0 sqrt(r) log r");
    let (g_bad, g_all) = count("xi=");
    let (ok, detail) = summarise(&out.reports);
    (
        ok,
        format!("{detail}; violations: max-form {max_bad}/{max_all}, xi-form {xi_bad}/{xi_all}, G-difference {g_bad}/{g_all}"),
    )
}

fn criterion_9() -> (bool, String) {
    let pts = haar(5, 109);
    let grid = [1.0, 10.0, 100.0, 1000.0];
    let mut reports: Vec<CheckReport> = ["discrete:n=3:real", "discrete:n=4:real", "discrete:n=3:imag"]
        .par_iter()
        .flat_map(|k| pts.par_iter().map(|x| discrete_boundedness_check(&obs(k), x, &grid).unwrap()).collect::<Vec<_>>())
        .collect();
    let zgrid: Vec<f64> = [1.0f64, 2.0, 4.0, 6.0].iter().map(|v| v.exp()).collect();
    reports.extend(pts.par_iter().map(|x| mu_zero_formula_check(&obs(ZERO), x, &zgrid).unwrap()).collect::<Vec<_>>());
    summarise(&reports)
}

fn criterion_10() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(110);
    let mut ok = true;
    let mut worst_tri: f64 = f64::NEG_INFINITY;
    for _ in 0..50 {
        let mk = |rng: &mut ChaCha8Rng, shift: f64| {
            let v: Vec<f64> = (0..rng.gen_range(5..60)).map(|_| rng.gen_range(-1.0..1.0) + shift).collect();
            EmpiricalDistribution::new(&v).unwrap()
        };
        let (s1, s2) = (rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
        let (a, b, c) = (mk(&mut rng, 0.0), mk(&mut rng, s1), mk(&mut rng, s2));
        let (ab, ba, bc, ac) = (levy_distance(&a, &b), levy_distance(&b, &a), levy_distance(&b, &c), levy_distance(&a, &c));
        ok &= (ab - ba).abs() < 1e-6 && levy_distance(&a, &a) < 1e-6 && (0.0..=1.0).contains(&ab);
        worst_tri = worst_tri.max(ac - ab - bc);
    }
    ok &= worst_tri <= 2e-6;
    // couplings with |X - Y| <= eps
    for k in 0..20 {
        let eps = 0.01 + 0.02 * k as f64;
        let xs: Vec<f64> = (0..200).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x + rng.gen_range(-eps..eps)).collect();
        ok &= levy_lemma_check(&xs, &ys, eps).unwrap().passed();
    }
    let d = levy_distance(&EmpiricalDistribution::new(&[0.0]).unwrap(), &EmpiricalDistribution::new(&[0.3]).unwrap());
    ok &= (d - 0.3).abs() < 1e-6;
    (ok, format!("symmetry/identity/triangle on 50 triples (triangle excess {worst_tri:.2e}), 20 couplings, delta masses {d:.7}"))
}

fn criterion_11() -> (bool, String) {
    let cfg = config(&format!(
        r#"{{"schema_version":1,"experiment":"spatial-lt",
            "observables":[
                {{"combination":[[1.0,"{COMPLEMENTARY}"],[1.0,"{PRINCIPAL}"]]}},
                {{"combination":[[1.0,"{QUARTER}"],[1.0,"{PRINCIPAL}"]]}},
                {{"combination":[[1.0,"{PRINCIPAL}"],[0.5,"power:s=0.5+2.5i:imag"]]}}],
            "base_points":{{"kind":"haar","count":200,"seed":111}}}}"#
    ));
    let out = run(&cfg).unwrap();
    let cases: Vec<String> = out.reports.iter().map(|r| r.name.rsplit('(').next().unwrap_or("").trim_end_matches(')').to_string()).collect();
    let all_three = ["Complementary", "QuarterPoint", "Principal"].iter().all(|c| cases.iter().any(|x| x == c));
    let (ok, detail) = summarise(&out.reports);
    (ok && all_three, format!("{detail}; cases {}", cases.join("/")))
}

fn criterion_12() -> (bool, String) {
    let grid: Vec<String> = [4.0f64, 6.0, 8.0, 10.0].iter().map(|v| format!("{}", v.exp())).collect();
    let cfg = config(&format!(
        r#"{{"schema_version":1,"experiment":"temporal-clt","observables":["{ZERO}"],
            "base_points":{{"kind":"explicit","matrices":[[1.0,0.0,0.3,1.0]]}},
            "samples":10000,"seed":112,"t_grid":[{}]}}"#,
        grid.join(",")
    ));
    let out = run(&cfg).unwrap();
    let ks: Vec<String> = out
        .table
        .rows
        .iter()
        .map(|r| match r[6] {
            horolab::experiments::Cell::Num(v) => format!("{v:.3}"),
            _ => "?".into(),
        })
        .collect();
    let (ok, detail) = summarise(&out.reports);
    let r2 = out.summary.get("observable 0: R^2").copied().unwrap_or(f64::NAN);
    let slope = out.summary.get("observable 0: sigma^2 estimate").copied().unwrap_or(f64::NAN);
    (ok, format!("R^2 {r2:.3}, slope {slope:.3e}; {detail}; KS to fitted normal [{}] (reported only)", ks.join(" ")))
}

fn criterion_13() -> (bool, String) {
    let cfg = config(r#"{"schema_version":1,"experiment":"lattice-sanity","samples":100,"seed":113}"#);
    let out = run(&cfg).unwrap();
    let p = out.summary["chi_square_p"];
    let (ok, detail) = summarise(&out.reports);
    (ok, format!("{detail}; chi-square p = {p:.3}"))
}

// runs without the libtest harness so the verdict lines always reach the output
fn main() {
    type Criterion = (usize, &'static str, fn() -> (bool, String), u64);
    let criteria: [Criterion; 13] = [
        (1, "ODE reduction residual", criterion_1, 60),
        (2, "change of variable", criterion_2, 60),
        (3, "expansion reconstruction", criterion_3, 180),
        (4, "functional norm bounds", criterion_4, 60),
        (5, "coarse decay bounds", criterion_5, 60),
        (6, "geodesic-action identities", criterion_6, 60),
        (7, "Hoelder exponents", criterion_7, 120),
        (8, "G-difference and tail lemmas", criterion_8, 30),
        (9, "discrete series and mu = 0", criterion_9, 60),
        (10, "Levy machinery", criterion_10, 30),
        (11, "spatial limit theorem chains", criterion_11, 300),
        (12, "temporal CLT", criterion_12, 300),
        (13, "lattice sanity", criterion_13, 120),
    ];
    let mut verdicts = Vec::new();
    for (id, name, f, limit) in criteria {
        let start = Instant::now();
        let (passed, detail) = f();
        let elapsed = start.elapsed();
        let limit = Duration::from_secs(limit);
        let v = Verdict { id, name, passed: passed && elapsed < limit, detail, elapsed, limit };
        println!(
            "criterion {:>2} {:<30} {} [{:.1}s / {}s] {}",
            v.id,
            v.name,
            if v.passed { "PASS" } else { "FAIL" },
            v.elapsed.as_secs_f64(),
            v.limit.as_secs(),
            v.detail
        );
        verdicts.push(v);
    }
    let unexpected: Vec<usize> = verdicts.iter().filter(|v| !v.passed && !KNOWN_FAILURES.contains(&v.id)).map(|v| v.id).collect();
    let now_passing: Vec<usize> = verdicts.iter().filter(|v| v.passed && KNOWN_FAILURES.contains(&v.id)).map(|v| v.id).collect();
    println!(
        "acceptance: {}/13 pass; known failures {:?}; unexpected failures {:?}; known failures now passing {:?}",
        verdicts.iter().filter(|v| v.passed).count(),
        KNOWN_FAILURES,
        unexpected,
        now_passing
    );
    if !unexpected.is_empty() {
        eprintln!("criteria failed unexpectedly: {unexpected:?}");
        std::process::exit(1);
    }
}
