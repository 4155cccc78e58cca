//! Config-driven experiment runners. Each run produces check reports, a CSV table and a JSON
//! report; nothing here depends on wall-clock time, so equal configs give identical artifacts.

use std::collections::BTreeMap;
use std::path::{Component as PathComponent, Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{
    coarse_bounds_check, expansion, finite_sum_expansion_check, functional_norm_check, functionals,
    g_difference_bound_check, geodesic_action_check, holder_estimate, tail_lemma_check,
};
use crate::lattice::{haar_chi_square, recurrent_orbit_check, FuchsianGroup};
use crate::limits::{spatial_lt_experiment, temporal_clt_experiment};
use crate::observables::{CaseTag, Observable, Part, Window};
use crate::ode::{discrete_boundedness_check, ergodic_average, j_function, mu_zero_formula_check, ode_residual, rescaled_base};
use crate::report::{slack, CheckLine, CheckReport};
use crate::sl2::{GroupElement, LieAlgebraElement, LieDirection};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ExperimentInfo {
    pub id: &'static str,
    pub required_keys: &'static [&'static str],
    pub reproduces: &'static str,
}

pub const EXPERIMENTS: [ExperimentInfo; 9] = [
    ExperimentInfo {
        id: "ode-residual",
        required_keys: &["observables"],
        reproduces: "second-order ODE satisfied by rescaled horocycle integrals; change of variable to unit-length arcs",
    },
    ExperimentInfo {
        id: "expansion",
        required_keys: &["observables"],
        reproduces: "asymptotic expansion of horocycle averages with explicit remainder, all five spectral cases",
    },
    ExperimentInfo {
        id: "bounds",
        required_keys: &["observables"],
        reproduces: "sup bounds on the invariant functionals, coarse decay bounds, discrete-series boundedness",
    },
    ExperimentInfo {
        id: "geodesic-action",
        required_keys: &["observables"],
        reproduces: "action of the geodesic generator on the functionals and the integration-by-parts identity",
    },
    ExperimentInfo {
        id: "holder",
        required_keys: &["observables"],
        reproduces: "Hoelder exponents of the invariant functionals",
    },
    ExperimentInfo {
        id: "spatial-lt",
        required_keys: &["observables", "base_points"],
        reproduces: "spatial limit theorem inequality chains for random base points",
    },
    ExperimentInfo {
        id: "temporal-clt",
        required_keys: &["observables", "samples"],
        reproduces: "temporal central limit theorem for mu = 0 observables and its reduction inequality",
    },
    ExperimentInfo {
        id: "lattice-sanity",
        required_keys: &[],
        reproduces: "compact quotient: word reduction, Haar sampling, recurrence of horocycle orbits",
    },
    ExperimentInfo {
        id: "tail-lemmas",
        required_keys: &[],
        reproduces: "G-term difference bound and the two tail lemmas behind Hoelder regularity",
    },
];

/// Human-readable catalog, one experiment per line.
pub fn list_experiments() -> String {
    let mut s = String::new();
    for e in &EXPERIMENTS {
        let keys = if e.required_keys.is_empty() { "-".to_string() } else { e.required_keys.join(", ") };
        s.push_str(&format!("{:<16} required: {:<24} reproduces: {}\n", e.id, keys, e.reproduces));
    }
    s
}

pub fn list_experiments_json() -> Result<String> {
    Ok(serde_json::to_string_pretty(&EXPERIMENTS)?)
}

/// An observable key, or a weighted combination of keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObservableSpec {
    Key(String),
    Combination { combination: Vec<(f64, String)> },
}

impl ObservableSpec {
    pub fn build(&self) -> Result<Observable> {
        match self {
            ObservableSpec::Key(k) => Observable::from_key(k),
            ObservableSpec::Combination { combination } => {
                let parts: Result<Vec<(f64, Observable)>> =
                    combination.iter().map(|(w, k)| Ok((*w, Observable::from_key(k)?))).collect();
                Observable::combination(&parts?)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BasePoints {
    /// Matrices `[a, b, c, d]`.
    Explicit { matrices: Vec<[f64; 4]> },
    /// Haar-distributed points of the fundamental domain; `seed` defaults to the master seed.
    Haar { count: usize, seed: Option<u64> },
    /// Random points of a fixed box in Iwasawa coordinates.
    Window { count: usize, seed: Option<u64> },
}

impl Default for BasePoints {
    fn default() -> Self {
        BasePoints::Haar { count: 10, seed: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub residual: f64,
    pub holder: f64,
    pub holder_quarter_plus: f64,
    pub r_squared: f64,
    pub p_value: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { residual: 1e-6, holder: 0.1, holder_quarter_plus: 0.15, r_squared: 0.9, p_value: 0.01 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    pub dir: Option<String>,
    /// File names inside the output directory.
    pub csv: Option<String>,
    pub json: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: String,
    #[serde(default)]
    pub observables: Vec<ObservableSpec>,
    /// Casimir eigenvalues; each adds the catalog observable with that eigenvalue.
    #[serde(default)]
    pub spectral_parameters: Vec<f64>,
    #[serde(default)]
    pub base_points: BasePoints,
    #[serde(default)]
    pub t_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputPaths,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub samples: Option<usize>,
    /// JSON group data replacing the default octagon group.
    #[serde(default)]
    pub group_file: Option<String>,
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&s)
    }

    pub fn info(&self) -> Result<&'static ExperimentInfo> {
        EXPERIMENTS
            .iter()
            .find(|e| e.id == self.experiment)
            .ok_or_else(|| Error::Config(format!("unknown experiment '{}'", self.experiment)))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let info = self.info()?;
        if info.required_keys.contains(&"observables") && self.observables.is_empty() && self.spectral_parameters.is_empty() {
            return Err(Error::Config("no observables selected".into()));
        }
        if let Some(g) = &self.t_grid {
            if g.is_empty() || g.iter().any(|t| !(t.is_finite() && *t >= 1.0)) {
                return Err(Error::Config("t_grid must be a non-empty list of finite values >= 1".into()));
            }
        }
        match &self.base_points {
            BasePoints::Explicit { matrices } if matrices.is_empty() => {
                return Err(Error::Config("explicit base point list is empty".into()))
            }
            BasePoints::Haar { count: 0, .. } | BasePoints::Window { count: 0, .. } => {
                return Err(Error::Config("base point count must be positive".into()))
            }
            _ => {}
        }
        if self.samples == Some(0) {
            return Err(Error::Config("samples must be positive".into()));
        }
        let t = &self.tolerances;
        if [t.residual, t.holder, t.holder_quarter_plus, t.r_squared, t.p_value].iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config("tolerances must be finite and non-negative".into()));
        }
        for name in [&self.output.csv, &self.output.json].into_iter().flatten() {
            let p = Path::new(name);
            if p.components().count() != 1 || !matches!(p.components().next(), Some(PathComponent::Normal(_))) {
                return Err(Error::Config(format!("output file '{name}' must be a plain file name")));
            }
        }
        Ok(())
    }

    /// Replaces the master seed and every base-point seed.
    pub fn override_seed(&mut self, seed: u64) {
        self.seed = seed;
        match &mut self.base_points {
            BasePoints::Haar { seed: s, .. } | BasePoints::Window { seed: s, .. } => *s = Some(seed),
            BasePoints::Explicit { .. } => {}
        }
    }

    pub fn observables(&self) -> Result<Vec<Observable>> {
        let mut out = Vec::new();
        for spec in &self.observables {
            out.push(spec.build().map_err(|e| Error::Config(e.to_string()))?);
        }
        for &mu in &self.spectral_parameters {
            out.push(observable_for_mu(mu).map_err(|e| Error::Config(e.to_string()))?);
        }
        Ok(out)
    }

    pub fn group(&self) -> Result<FuchsianGroup> {
        match &self.group_file {
            None => FuchsianGroup::genus2_octagon(),
            Some(p) => {
                let s = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{p}: {e}")))?;
                FuchsianGroup::from_json(&s).map_err(|e| Error::Config(format!("{p}: {e}")))
            }
        }
    }

    pub fn base_points(&self) -> Result<Vec<GroupElement>> {
        match &self.base_points {
            BasePoints::Explicit { matrices } => matrices
                .iter()
                .map(|m| GroupElement::from_array(*m).map_err(|e| Error::Config(e.to_string())))
                .collect(),
            BasePoints::Haar { count, seed } => self.group()?.sample_haar(*count, seed.unwrap_or(self.seed)),
            BasePoints::Window { count, seed } => Ok(Window::random(*count, seed.unwrap_or(self.seed)).anchors),
        }
    }

    fn grid(&self, default: &[f64]) -> Vec<f64> {
        self.t_grid.clone().unwrap_or_else(|| default.to_vec())
    }

    /// Output file names, defaulting to `<experiment>.csv` and `<experiment>.json`.
    pub fn artifact_names(&self) -> (String, String) {
        (
            self.output.csv.clone().unwrap_or_else(|| format!("{}.csv", self.experiment)),
            self.output.json.clone().unwrap_or_else(|| format!("{}.json", self.experiment)),
        )
    }
}

/// The catalog observable (real part) with Casimir eigenvalue `mu`.
pub fn observable_for_mu(mu: f64) -> Result<Observable> {
    if !mu.is_finite() {
        return Err(Error::InvalidParameter(format!("mu = {mu}")));
    }
    if mu < 0.0 {
        let n = 1.0 + (1.0 - 4.0 * mu).sqrt();
        if (n - n.round()).abs() > 1e-9 || n.round() < 2.0 {
            return Err(Error::InvalidParameter(format!("negative mu = {mu} is not of the form n(2-n)/4")));
        }
        return Observable::discrete(n.round() as u32, Part::Real);
    }
    let s = if mu > 0.25 {
        Complex64::new(0.5, (mu - 0.25).sqrt())
    } else {
        Complex64::new(0.5 * (1.0 + (1.0 - 4.0 * mu).sqrt()), 0.0)
    };
    Observable::power(s, Part::Real)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => format!("{v:.16e}"),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    /// Comma-separated, numbers with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.iter().map(Cell::csv).collect::<Vec<_>>().join(","));
            s.push('\n');
        }
        s
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Outcome {
    pub experiment: String,
    pub passed: bool,
    /// `"<report>: <line>"` of the first violated bound.
    pub first_violation: Option<String>,
    pub reports: Vec<CheckReport>,
    pub summary: BTreeMap<String, f64>,
    pub config: ExperimentConfig,
    #[serde(skip)]
    pub table: Table,
}

impl Outcome {
    fn new(cfg: &ExperimentConfig, reports: Vec<CheckReport>, summary: BTreeMap<String, f64>, table: Table) -> Self {
        let first = reports
            .iter()
            .find_map(|r| r.first_violation().map(|l| describe(&r.name, l)));
        Outcome {
            experiment: cfg.experiment.clone(),
            passed: first.is_none(),
            first_violation: first,
            reports,
            summary,
            config: cfg.clone(),
            table,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes the CSV table and JSON report into `dir`, returning their paths.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let (csv, json) = self.config.artifact_names();
        let (csv, json) = (dir.join(csv), dir.join(json));
        std::fs::write(&csv, self.table.to_csv())?;
        std::fs::write(&json, self.to_json()?)?;
        Ok((csv, json))
    }
}

fn describe(report: &str, l: &CheckLine) -> String {
    format!("{report}: {} ({:e} > {:e} + slack {:e})", l.label, l.lhs, l.rhs, l.slack)
}

/// Runs the configured experiment. Config problems (bad keys, bad group file) come back as
/// `Error::Config`; numerical failures keep their own variants.
pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    match cfg.experiment.as_str() {
        "ode-residual" => run_ode_residual(cfg),
        "expansion" => run_expansion(cfg),
        "bounds" => run_bounds(cfg),
        "geodesic-action" => run_geodesic_action(cfg),
        "holder" => run_holder(cfg),
        "spatial-lt" => run_spatial_lt(cfg),
        "temporal-clt" => run_temporal_clt(cfg),
        "lattice-sanity" => run_lattice_sanity(cfg),
        "tail-lemmas" => run_tail_lemmas(cfg),
        other => Err(Error::Config(format!("unknown experiment '{other}'"))),
    }
}

fn exp_grid(exponents: &[f64]) -> Vec<f64> {
    exponents.iter().map(|e| e.exp()).collect()
}

fn case_name(o: &Observable) -> String {
    o.spectral().map(|s| format!("{:?}", s.case)).unwrap_or_else(|| "mixed".into())
}

fn point_cells(x: &GroupElement) -> [Cell; 4] {
    [x.a.into(), x.b.into(), x.c.into(), x.d.into()]
}

fn single_positive(o: &Observable) -> bool {
    o.components().len() == 1
        && matches!(
            o.spectral().map(|s| s.case),
            Some(CaseTag::Principal | CaseTag::QuarterPoint | CaseTag::Complementary)
        )
}

/// Rows `observable, check, label, lhs, rhs, slack, passed` for every line of every report.
fn lines_table(entries: &[(String, CheckReport)]) -> Table {
    let mut t = Table::new(&["observable", "check", "label", "lhs", "rhs", "slack", "passed"]);
    for (obs, r) in entries {
        for l in &r.lines {
            t.rows.push(vec![
                obs.clone().into(),
                r.name.clone().into(),
                l.label.clone().into(),
                l.lhs.into(),
                l.rhs.into(),
                l.slack.into(),
                l.passed.into(),
            ]);
        }
    }
    t
}

fn run_ode_residual(cfg: &ExperimentConfig) -> Result<Outcome> {
    let obs = cfg.observables()?;
    let points = cfg.base_points()?;
    let grid = cfg.grid(&exp_grid(&[0.5, 1.0, 2.0, 3.0, 4.0]));
    let mut table = Table::new(&[
        "observable", "case", "mu", "a", "b", "c", "d", "T", "t", "residual", "average", "j", "gap", "passed",
    ]);
    let mut reports = Vec::new();
    let mut summary = BTreeMap::new();
    let mut max_res = 0.0f64;
    for o in &obs {
        let anchors: Vec<GroupElement> =
            points.iter().flat_map(|x| grid.iter().map(move |&t| rescaled_base(x, t))).collect();
        let ow = o.ensure_window(&anchors)?;
        let pairs: Vec<(GroupElement, f64)> = points.iter().flat_map(|x| grid.iter().map(move |&t| (*x, t))).collect();
        let recs: Result<Vec<_>> = pairs
            .par_iter()
            .map(|(x, t_end)| {
                let t = t_end.ln();
                let res = ode_residual(&ow, x, t)?;
                let avg = ergodic_average(&ow, x, *t_end)?;
                let j = j_function(&ow, &rescaled_base(x, *t_end), t)?;
                Ok((*x, *t_end, res, avg, j))
            })
            .collect();
        let mut r = CheckReport::new(format!("ode residual {}", o.label()));
        for (x, t_end, res, avg, j) in recs? {
            let gap = (avg.value - j.j).abs();
            let ok1 = r.push(format!("residual at T={t_end:.6}"), res.residual, cfg.tolerances.residual, 0.0);
            let ok2 = r.push(format!("change of variable at T={t_end:.6}"), gap, 0.0, slack(avg.quad_error, j.quad_error));
            max_res = max_res.max(res.residual);
            let [a, b, c, d] = point_cells(&x);
            table.rows.push(vec![
                o.label().into(),
                case_name(o).into(),
                res.mu.into(),
                a,
                b,
                c,
                d,
                t_end.into(),
                t_end.ln().into(),
                res.residual.into(),
                avg.value.into(),
                j.j.into(),
                gap.into(),
                (ok1 && ok2).into(),
            ]);
        }
        reports.push(r);
    }
    summary.insert("max_residual".into(), max_res);
    Ok(Outcome::new(cfg, reports, summary, table))
}

fn run_expansion(cfg: &ExperimentConfig) -> Result<Outcome> {
    let obs = cfg.observables()?;
    let points = cfg.base_points()?;
    let grid = cfg.grid(&exp_grid(&[1.0, 2.0, 4.0, 6.0]));
    let mut table = Table::new(&[
        "observable", "case", "nu_re", "nu_im", "a", "b", "c", "d", "T", "direct", "expansion", "gap", "bound", "slack",
        "passed",
    ]);
    let mut reports = Vec::new();
    for o in &obs {
        let (nu_re, nu_im): (Cell, Cell) = match o.spectral() {
            Some(s) => (s.nu.re.into(), s.nu.im.into()),
            None => (Cell::Empty, Cell::Empty),
        };
        let case = case_name(o);
        if single_positive(o) {
            let anchors: Vec<GroupElement> =
                points.iter().flat_map(|x| grid.iter().map(move |&t| rescaled_base(x, t))).collect();
            let ow = o.ensure_window(&anchors)?;
            let pairs: Vec<(GroupElement, f64)> =
                points.iter().flat_map(|x| grid.iter().map(move |&t| (*x, t))).collect();
            let recs: Result<Vec<_>> = pairs.par_iter().map(|(x, t)| expansion(&ow, x, *t)).collect();
            let mut r = CheckReport::new(format!("expansion {}", o.label()));
            for (i, e) in recs?.into_iter().enumerate() {
                let s = slack(e.quad_error, e.tail_bound);
                let ok1 = r.push(
                    format!("point {} T={:.6}: |<f>_T - main| <= remainder bound", i / grid.len(), e.t_end),
                    e.reconstruction_gap,
                    e.remainder_bound,
                    s,
                );
                let ok2 = r.push(
                    format!("point {} T={:.6}: remainder from tails", i / grid.len(), e.t_end),
                    (e.direct - e.main_terms - e.remainder).abs(),
                    0.0,
                    s,
                );
                let [a, b, c, d] = point_cells(&e.x);
                table.rows.push(vec![
                    o.label().into(),
                    case.clone().into(),
                    nu_re.clone(),
                    nu_im.clone(),
                    a,
                    b,
                    c,
                    d,
                    e.t_end.into(),
                    e.direct.into(),
                    e.main_terms.into(),
                    e.reconstruction_gap.into(),
                    e.remainder_bound.into(),
                    s.into(),
                    (ok1 && ok2).into(),
                ]);
            }
            reports.push(r);
            continue;
        }
        let checks: Result<Vec<CheckReport>> = points
            .par_iter()
            .map(|x| {
                if o.components().len() > 1 {
                    return finite_sum_expansion_check(o, x, &grid);
                }
                match o.require_spectral()?.case {
                    CaseTag::ZeroMu => mu_zero_formula_check(o, x, &grid),
                    _ => discrete_boundedness_check(o, x, &grid),
                }
            })
            .collect();
        let mut r = CheckReport::new(format!("expansion {}", o.label()));
        for (i, (x, c)) in points.iter().zip(checks?).enumerate() {
            for l in &c.lines {
                let [a, b, cc, d] = point_cells(x);
                table.rows.push(vec![
                    o.label().into(),
                    case.clone().into(),
                    nu_re.clone(),
                    nu_im.clone(),
                    a,
                    b,
                    cc,
                    d,
                    Cell::Text(l.label.clone()),
                    Cell::Empty,
                    Cell::Empty,
                    l.lhs.into(),
                    l.rhs.into(),
                    l.slack.into(),
                    l.passed.into(),
                ]);
            }
            let mut c = c;
            c.name = format!("point {i}");
            r.merge(c);
        }
        reports.push(r);
    }
    Ok(Outcome::new(cfg, reports, BTreeMap::new(), table))
}

fn run_bounds(cfg: &ExperimentConfig) -> Result<Outcome> {
    let obs = cfg.observables()?;
    let points = cfg.base_points()?;
    let grid = cfg.grid(&[1.0f64.exp(), 2.0f64.exp(), 4.0f64.exp(), 6.0f64.exp(), 1000.0]);
    let mut entries = Vec::new();
    for o in &obs {
        let sp = o.require_spectral().map_err(|e| Error::Config(format!("{}: {e}", o.label())))?;
        if o.components().len() > 1 {
            return Err(Error::Config(format!("{}: bounds need a single eigenfunction", o.label())));
        }
        if single_positive(o) {
            entries.push((o.label().to_string(), functional_norm_check(o, &points)?));
        }
        let per_point: Result<Vec<CheckReport>> = points
            .par_iter()
            .map(|x| match sp.case {
                CaseTag::Principal | CaseTag::Complementary => coarse_bounds_check(o, x, &grid),
                CaseTag::DiscreteSeries => discrete_boundedness_check(o, x, &grid),
                CaseTag::ZeroMu => mu_zero_formula_check(o, x, &grid),
                CaseTag::QuarterPoint => Ok(CheckReport::new("no coarse bound at mu = 1/4")),
            })
            .collect();
        for (i, mut c) in per_point?.into_iter().enumerate() {
            if c.lines.is_empty() {
                continue;
            }
            c.name = format!("{} point {i}", c.name);
            entries.push((o.label().to_string(), c));
        }
    }
    let table = lines_table(&entries);
    Ok(Outcome::new(cfg, entries.into_iter().map(|e| e.1).collect(), BTreeMap::new(), table))
}

fn run_geodesic_action(cfg: &ExperimentConfig) -> Result<Outcome> {
    let obs = cfg.observables()?;
    let points = cfg.base_points()?;
    let mut entries = Vec::new();
    for o in &obs {
        if !single_positive(o) {
            return Err(Error::Config(format!("{}: geodesic action needs a single eigenfunction with mu > 0", o.label())));
        }
        let checks: Result<Vec<CheckReport>> = points.par_iter().map(|x| geodesic_action_check(o, x)).collect();
        for (i, mut c) in checks?.into_iter().enumerate() {
            c.name = format!("{} point {i}", c.name);
            entries.push((o.label().to_string(), c));
        }
    }
    let table = lines_table(&entries);
    Ok(Outcome::new(cfg, entries.into_iter().map(|e| e.1).collect(), BTreeMap::new(), table))
}

/// Radii for Hoelder fits: eight log-spaced values in `(1e-4, 1e-1)`.
pub fn holder_radii() -> Vec<f64> {
    (0..8).map(|i| 1.1e-4 * (800.0f64).powf(i as f64 / 7.0)).collect()
}

/// Pure `U`, `X`, `V` and one mixed unit direction.
pub fn holder_directions() -> Vec<LieAlgebraElement> {
    let mixed = LieAlgebraElement::new(1.0, 1.0, 1.0);
    vec![LieDirection::U.element(), LieDirection::X.element(), LieDirection::V.element(), mixed.scale(1.0 / mixed.norm())]
}

/// Predicted exponents `(D+, D-)` and the tolerance for each.
pub fn holder_prediction(case: CaseTag, nu: f64, tol: &Tolerances) -> Result<[(f64, f64); 2]> {
    Ok(match case {
        CaseTag::Principal => [(0.5, tol.holder), (0.5, tol.holder)],
        CaseTag::QuarterPoint => [(0.5, tol.holder_quarter_plus), (0.5, tol.holder)],
        CaseTag::Complementary => [((1.0 - nu) / 2.0, tol.holder), ((1.0 + nu) / 2.0, tol.holder)],
        c => return Err(Error::InvalidParameter(format!("no Hoelder functionals for {c:?}"))),
    })
}

fn run_holder(cfg: &ExperimentConfig) -> Result<Outcome> {
    let obs = cfg.observables()?;
    let points = cfg.base_points()?;
    let radii = holder_radii();
    let dirs = holder_directions();
    let mut table = Table::new(&[
        "observable", "point", "functional", "w_u", "w_x", "w_v", "exponent", "predicted", "constant", "r_squared",
        "worst",
    ]);
    let mut reports = Vec::new();
    for o in &obs {
        if !single_positive(o) {
            return Err(Error::Config(format!("{}: Hoelder fits need a single eigenfunction with mu > 0", o.label())));
        }
        let sp = o.require_spectral()?;
        let pred = holder_prediction(sp.case, sp.nu.re, &cfg.tolerances)?;
        let mut r = CheckReport::new(format!("holder {}", o.label()));
        let fits: Result<Vec<_>> = points
            .par_iter()
            .map(|x| {
                let mut anchors = vec![*x];
                for w in &dirs {
                    for &rad in &radii {
                        anchors.push(x.translate(w.scale(1.0 / w.norm()), rad));
                    }
                }
                let ow = o.with_window(&Window::new(anchors))?;
                // a functional vanishing identically near x has no measurable exponent there
                let fit = |sel: fn(&crate::functionals::FunctionalRecord) -> f64| {
                    match holder_estimate(|g| Ok(sel(&functionals(&ow, g)?)), x, &dirs, &radii) {
                        Ok(r) => Ok(Some(r)),
                        Err(Error::Degenerate(_)) => Ok(None),
                        Err(e) => Err(e),
                    }
                };
                Ok([fit(|d| d.d_plus)?, fit(|d| d.d_minus)?])
            })
            .collect();
        for (i, pair) in fits?.into_iter().enumerate() {
            for (k, rep) in pair.iter().enumerate() {
                let name = if k == 0 { "D+" } else { "D-" };
                let (p, tol) = pred[k];
                let Some(rep) = rep else {
                    r.note(format!("point {i} {name}: functional locally constant, no fit"));
                    continue;
                };
                for f in &rep.fits {
                    let worst = f.direction == rep.worst.direction;
                    table.rows.push(vec![
                        o.label().into(),
                        (i as f64).into(),
                        name.into(),
                        f.direction.u.into(),
                        f.direction.x.into(),
                        f.direction.v.into(),
                        f.exponent.into(),
                        p.into(),
                        f.constant.into(),
                        f.r_squared.into(),
                        worst.into(),
                    ]);
                }
                r.push(
                    format!("point {i} {name}: |slope - {p:.4}| <= {tol}, slope {:.4}", rep.worst.exponent),
                    (rep.worst.exponent - p).abs(),
                    tol,
                    0.0,
                );
            }
        }
        reports.push(r);
    }
    Ok(Outcome::new(cfg, reports, BTreeMap::new(), table))
}

fn run_spatial_lt(cfg: &ExperimentConfig) -> Result<Outcome> {
    let obs = cfg.observables()?;
    let points = cfg.base_points()?;
    let grid = cfg.grid(&exp_grid(&[2.0, 4.0, 6.0]));
    let mut table = Table::new(&["observable", "case", "eta", "T", "levy", "ks", "max_gap", "chain_ratio", "final_bound"]);
    let mut reports = Vec::new();
    let mut summary = BTreeMap::new();
    for (k, o) in obs.iter().enumerate() {
        let rep = spatial_lt_experiment(o, &points, &grid)?;
        for row in &rep.rows {
            table.rows.push(vec![
                o.label().into(),
                format!("{:?}", rep.case).into(),
                rep.eta.into(),
                row.t_end.into(),
                row.levy.into(),
                row.ks.into(),
                row.max_gap.into(),
                row.chain_ratio.into(),
                row.final_bound.into(),
            ]);
        }
        if let Some(last) = rep.rows.last() {
            summary.insert(format!("observable {k}: levy at largest T"), last.levy);
        }
        let mut c = rep.check;
        c.name = format!("spatial {} ({:?})", o.label(), rep.case);
        reports.push(c);
    }
    Ok(Outcome::new(cfg, reports, summary, table))
}

fn run_temporal_clt(cfg: &ExperimentConfig) -> Result<Outcome> {
    let obs = cfg.observables()?;
    let x = *cfg
        .base_points()?
        .first()
        .ok_or_else(|| Error::Config("temporal experiment needs a base point".into()))?;
    let grid = cfg.grid(&exp_grid(&[4.0, 6.0, 8.0, 10.0]));
    let samples = cfg.samples.unwrap_or(10_000);
    let mut table = Table::new(&["observable", "T", "log_T", "mean", "variance", "raw_variance", "ks_normal"]);
    let mut reports = Vec::new();
    let mut summary = BTreeMap::new();
    for (k, o) in obs.iter().enumerate() {
        let rep = temporal_clt_experiment(o, &x, &grid, samples, cfg.seed.wrapping_add(k as u64))?;
        for row in &rep.rows {
            table.rows.push(vec![
                o.label().into(),
                row.t_end.into(),
                row.t_end.ln().into(),
                row.mean.into(),
                row.variance.into(),
                row.raw_variance.into(),
                row.ks_normal.into(),
            ]);
        }
        let (_, slope, r2) = rep.raw_fit;
        let mut c = CheckReport::new(format!("temporal clt {}", o.label()));
        c.push(format!("R^2 of raw variance vs log T >= {}", cfg.tolerances.r_squared), cfg.tolerances.r_squared, r2, 0.0);
        c.push("variance growth slope > 0", 0.0, slope, -f64::MIN_POSITIVE);
        c.value("raw fit slope (sigma^2 estimate)", slope);
        c.value("raw fit R^2", r2);
        c.value("normalised fit slope", rep.normalized_fit.1);
        c.merge(rep.reduction);
        summary.insert(format!("observable {k}: sigma^2 estimate"), slope);
        summary.insert(format!("observable {k}: R^2"), r2);
        reports.push(c);
    }
    Ok(Outcome::new(cfg, reports, summary, table))
}

/// Every element of the word ball of the given radius (without immediate cancellations).
pub fn word_ball(group: &FuchsianGroup, radius: usize) -> Vec<GroupElement> {
    let n = group.generators.len();
    let half = n / 2;
    let inverse = |i: usize| if i < half { i + half } else { i - half };
    let mut out = vec![GroupElement::IDENTITY];
    let mut frontier: Vec<(GroupElement, usize)> = vec![(GroupElement::IDENTITY, usize::MAX)];
    for _ in 0..radius {
        let mut next = Vec::new();
        for (g, last) in &frontier {
            for i in 0..n {
                if *last != usize::MAX && i == inverse(*last) {
                    continue;
                }
                let h = group.generators[i] * *g;
                out.push(h);
                next.push((h, i));
            }
        }
        frontier = next;
    }
    out
}

fn run_lattice_sanity(cfg: &ExperimentConfig) -> Result<Outcome> {
    let group = cfg.group()?;
    let count = cfg.samples.unwrap_or(100);
    let mut r = CheckReport::new("lattice sanity");
    let mut summary = BTreeMap::new();
    let mut table = Table::new(&["point", "reduced_norm", "oracle_norm", "word_length", "passed"]);

    let relator = group.verify_relator()?;
    r.push("relator residual", relator, 1e-10, 0.0);

    // points pushed out of the domain by random words, then brought back
    let base = group.sample_haar(count, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let ball = word_ball(&group, 3);
    for (i, g) in base.iter().enumerate() {
        let len = rng.gen_range(1..=4);
        let word: Vec<usize> = (0..len).map(|_| rng.gen_range(0..group.generators.len())).collect();
        let h = group.word_product(&word)? * *g;
        let red = group.reduce(&h)?;
        let again = group.reduce(&red.point)?;
        let oracle = ball.iter().map(|s| (*s * red.point).frobenius_sq()).fold(f64::INFINITY, f64::min);
        let n = red.point.frobenius_sq();
        let ok1 = r.push(format!("point {i}: reduced norm <= word-ball minimum"), n, oracle, 1e-8 * n);
        let ok2 = r.push(format!("point {i}: reduction idempotent"), again.word.len() as f64, 0.0, 0.0);
        table.rows.push(vec![(i as f64).into(), n.into(), oracle.into(), (red.word.len() as f64).into(), (ok1 && ok2).into()]);
    }

    let haar_n = 20_000;
    let samples = group.sample_haar(haar_n, cfg.seed.wrapping_add(1))?;
    let (stat, p, bins) = haar_chi_square(&group, &samples, 4, 20_000)?;
    r.push(format!("chi-square p-value >= {}", cfg.tolerances.p_value), cfg.tolerances.p_value, p, 0.0);
    summary.insert("chi_square".into(), stat);
    summary.insert("chi_square_p".into(), p);
    summary.insert("chi_square_bins".into(), bins as f64);

    let ys: Vec<f64> = group.sample_haar(100_000, cfg.seed.wrapping_add(2))?.iter().map(|g| g.iwasawa().y).collect();
    let m = ys.iter().sum::<f64>() / ys.len() as f64;
    let var = ys.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (ys.len() - 1) as f64;
    let se = (var / ys.len() as f64).sqrt();
    let exact = group.mean_y(200_000)?;
    r.push("mean height within 3 standard errors", (m - exact).abs(), 3.0 * se, 0.0);
    summary.insert("mean_y_sample".into(), m);
    summary.insert("mean_y_exact".into(), exact);

    for (i, x) in base.iter().take(3).enumerate() {
        let mut c = recurrent_orbit_check(&group, x, 1000.0, 2000)?;
        c.name = format!("recurrence point {i}");
        r.merge(c);
    }
    Ok(Outcome::new(cfg, vec![r], summary, table))
}

fn run_tail_lemmas(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut entries = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for &a in &[0.1, 0.25, 0.5, 0.75, 0.9] {
        for &rad in &[1e-1, 1e-2, 1e-3] {
            let mut c = tail_lemma_check(|xi: f64| (rad * xi.exp()).min(1.0), 1.0, rad, a)?;
            c.name = format!("tail lemmas, extremal F, a={a}, r={rad}");
            entries.push(("extremal".to_string(), c));
            let (c0, om, ph): (f64, f64, f64) = (rng.gen_range(0.5..3.0), rng.gen_range(0.5..5.0), rng.gen_range(0.0..6.3));
            let f = move |xi: f64| c0 * (rad * xi.exp()).min(1.0) * 0.5 * (1.0 + (om * xi + ph).sin());
            let mut c = tail_lemma_check(f, c0, rad, a)?;
            c.name = format!("tail lemmas, random F, a={a}, r={rad}");
            entries.push(("random".to_string(), c));
        }
    }
    let obs = cfg.observables()?;
    if !obs.is_empty() {
        let points = cfg.base_points()?;
        for o in &obs {
            let jobs: Vec<(GroupElement, LieAlgebraElement, f64)> = points
                .iter()
                .flat_map(|x| {
                    holder_directions()
                        .into_iter()
                        .flat_map(move |w| [1e-3, 1e-2, 1e-1].into_iter().map(move |r| (*x, w, r)))
                })
                .collect();
            let checks: Result<Vec<CheckReport>> =
                jobs.par_iter().map(|(x, w, r)| g_difference_bound_check(o, x, *w, *r)).collect();
            let mut merged = CheckReport::new(format!("G difference {}", o.label()));
            let mut worst = 0.0f64;
            for (k, c) in checks?.into_iter().enumerate() {
                let (x, w, r) = jobs[k];
                worst = worst.max(c.worst_ratio());
                let mut c = c;
                c.name = format!("[{:.4},{:.4},{:.4},{:.4}] W=({:.3},{:.3},{:.3}) r={r}", x.a, x.b, x.c, x.d, w.u, w.x, w.v);
                merged.merge(c);
            }
            merged.value("worst ratio", worst);
            entries.push((o.label().to_string(), merged));
        }
    }
    let table = lines_table(&entries);
    Ok(Outcome::new(cfg, entries.into_iter().map(|e| e.1).collect(), BTreeMap::new(), table))
}
