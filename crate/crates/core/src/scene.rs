//! Scene files, the built-in fixture registry, and deterministic reports.
//!
//! A scene is either geometric (model, field, metric), an abstract complex fed straight to the
//! algebra stage, or a chain of three geometric scenes for continuation checks.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::algebra::{
    genus_complex, heart_complex, homology, morse_inequality_check, punctured_heart_complex, spectral_report, verify_boundary_squared,
    BoundaryReport, ChainComplexGF2, ComplexDocument, HomologyResult, MorseInequality, SpectralReport,
};
use crate::continuation::{
    continue_scenes, energy_bound_check, spectral_lipschitz_check, ContinuationOptions, Homotopy, Scene, R_GLUE, T_DEFAULT,
};
use crate::critical::{find_critical_points, CriticalPoint, SearchOptions};
use crate::error::{MorseError, Result};
use crate::fields::{FieldExpr, ScalarField, SylvesterTriple};
use crate::flow::FlowStatus;
use crate::geometry::{ExplicitMetric, ManifoldModel, Metric, Surface};
use crate::moduli::{moduli_scan, ModuliCount, ModuliOptions, ModuliScan};
use crate::pipeline::{analyze, analyze_points, SceneAnalysis};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    Sphere {
        #[serde(default = "unit")]
        radius: f64,
    },
    Peanut,
    UprightTorus { major: f64, minor: f64 },
    Torus {
        #[serde(default = "two")]
        dim: usize,
    },
    /// Antipodal quotient of the round sphere.
    Rp2,
    RealLine { lo: f64, hi: f64 },
}

fn unit() -> f64 {
    1.0
}
fn two() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub coefficient: f64,
    pub exponents: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldSpec {
    Coordinate { index: usize },
    Linear { coefficients: Vec<f64> },
    Quadratic { coefficients: Vec<f64> },
    TorusCosine { coefficients: Vec<f64> },
    MonkeySaddle,
    Polynomial { terms: Vec<TermSpec> },
    Chebyshev { degree: usize, slope: f64 },
    Constant { value: f64 },
    Sum { terms: Vec<FieldSpec> },
    Scale { factor: f64, field: Box<FieldSpec> },
    Translate { shift: Vec<f64>, field: Box<FieldSpec> },
}

impl FieldSpec {
    /// Rejects fields whose arity disagrees with the ambient dimension `n`.
    pub fn check_dim(&self, n: usize) -> std::result::Result<(), String> {
        let len = |what: &str, k: usize| if k == n { Ok(()) } else { Err(format!("{what} has length {k}, model needs {n}")) };
        match self {
            FieldSpec::Coordinate { index } if *index < n => Ok(()),
            FieldSpec::Coordinate { index } => Err(format!("coordinate {index} out of range for dimension {n}")),
            FieldSpec::Linear { coefficients } | FieldSpec::Quadratic { coefficients } | FieldSpec::TorusCosine { coefficients } => {
                len("coefficients", coefficients.len())
            }
            FieldSpec::MonkeySaddle => len("monkey saddle input", 2),
            FieldSpec::Chebyshev { .. } => len("chebyshev input", 1),
            FieldSpec::Polynomial { terms } => terms.iter().try_for_each(|t| len("exponents", t.exponents.len())),
            FieldSpec::Constant { .. } => Ok(()),
            FieldSpec::Sum { terms } => terms.iter().try_for_each(|t| t.check_dim(n)),
            FieldSpec::Scale { field, .. } => field.check_dim(n),
            FieldSpec::Translate { shift, field } => len("shift", shift.len()).and_then(|_| field.check_dim(n)),
        }
    }

    pub fn to_expr(&self) -> FieldExpr {
        match self {
            FieldSpec::Coordinate { index } => FieldExpr::Coordinate(*index),
            FieldSpec::Linear { coefficients } => FieldExpr::Linear(coefficients.clone()),
            FieldSpec::Quadratic { coefficients } => FieldExpr::Quadratic(coefficients.clone()),
            FieldSpec::TorusCosine { coefficients } => FieldExpr::TorusCosine(coefficients.clone()),
            FieldSpec::MonkeySaddle => FieldExpr::MonkeySaddle,
            FieldSpec::Polynomial { terms } => {
                FieldExpr::Polynomial(terms.iter().map(|t| (t.coefficient, t.exponents.clone())).collect())
            }
            FieldSpec::Chebyshev { degree, slope } => FieldExpr::Chebyshev { degree: *degree, slope: *slope },
            FieldSpec::Constant { value } => FieldExpr::Constant(*value),
            FieldSpec::Sum { terms } => FieldExpr::Sum(terms.iter().map(|t| t.to_expr()).collect()),
            FieldSpec::Scale { factor, field } => FieldExpr::Scale(*factor, Box::new(field.to_expr())),
            FieldSpec::Translate { shift, field } => FieldExpr::Translate(Box::new(field.to_expr()), shift.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MetricSpec {
    #[default]
    Default,
    /// Constant SPD matrix in coordinates (flat models only).
    Explicit { matrix: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineFlags {
    pub count_moduli: bool,
    pub homology: bool,
    pub spectral: bool,
    pub scans: bool,
}

impl Default for PipelineFlags {
    fn default() -> Self {
        Self { count_moduli: true, homology: true, spectral: true, scans: false }
    }
}

/// Overrides of the pinned defaults; absent keys keep them.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceOverrides {
    pub seed_count: Option<usize>,
    pub newton_tol: Option<f64>,
    pub dedup_radius: Option<f64>,
    pub zero_tol: Option<f64>,
    pub delta: Option<f64>,
    pub n_scan: Option<usize>,
    pub bisect_depth: Option<usize>,
}

/// On-disk scene: either `fixture = "<name>"` or an explicit model and field.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub name: Option<String>,
    pub fixture: Option<String>,
    pub model: Option<ModelSpec>,
    pub field: Option<FieldSpec>,
    pub metric: Option<MetricSpec>,
    #[serde(default)]
    pub pipeline: PipelineFlags,
    #[serde(default)]
    pub tolerances: ToleranceOverrides,
}

#[derive(Debug, Clone)]
pub enum SceneKind {
    Geometric(Scene),
    Abstract(ChainComplexGF2),
    /// α, β, γ for Φ^{γβ}Φ^{βα} = Φ^{γα}.
    Chain([Scene; 3]),
}

#[derive(Debug, Clone)]
pub struct SceneConfig {
    pub name: String,
    pub kind: SceneKind,
    pub flags: PipelineFlags,
    pub search: SearchOptions,
    pub moduli: ModuliOptions,
}

impl SceneConfig {
    fn new(name: impl Into<String>, kind: SceneKind) -> Self {
        Self { name: name.into(), kind, flags: PipelineFlags::default(), search: SearchOptions::default(), moduli: ModuliOptions::default() }
    }

    fn geometric(name: &str, model: ManifoldModel, expr: FieldExpr) -> Self {
        Self::new(name, SceneKind::Geometric(Scene::new(model, ScalarField::new(name, expr))))
    }

    pub fn scene(&self) -> Result<&Scene> {
        match &self.kind {
            SceneKind::Geometric(s) => Ok(s),
            _ => Err(MorseError::InvalidInput(format!("scene `{}` is not geometric", self.name))),
        }
    }

    fn apply(&mut self, t: &ToleranceOverrides) {
        if let Some(v) = t.seed_count {
            self.search.seed_count = v;
        }
        if let Some(v) = t.newton_tol {
            self.search.newton_tol = v;
        }
        if let Some(v) = t.dedup_radius {
            self.search.dedup_radius = v;
        }
        if t.zero_tol.is_some() {
            self.search.zero_tol = t.zero_tol;
        }
        if let Some(v) = t.delta {
            self.moduli.delta = v;
        }
        if let Some(v) = t.n_scan {
            self.moduli.n_scan = v;
        }
        if let Some(v) = t.bisect_depth {
            self.moduli.depth = v;
        }
    }
}

fn model_from(spec: &ModelSpec) -> Result<ManifoldModel> {
    Ok(match spec {
        ModelSpec::Sphere { radius } if *radius > 0.0 => ManifoldModel::surface(Surface::Sphere { radius: *radius }),
        ModelSpec::Sphere { .. } => return Err(MorseError::InvalidInput("sphere radius must be positive".into())),
        ModelSpec::Peanut => ManifoldModel::surface(Surface::Peanut),
        ModelSpec::UprightTorus { major, minor } if major > minor && *minor > 0.0 => {
            ManifoldModel::surface(Surface::UprightTorus { major: *major, minor: *minor })
        }
        ModelSpec::UprightTorus { .. } => return Err(MorseError::InvalidInput("torus needs major > minor > 0".into())),
        ModelSpec::Torus { dim } if *dim >= 1 => ManifoldModel::torus(*dim),
        ModelSpec::Torus { .. } => return Err(MorseError::InvalidInput("torus dimension must be positive".into())),
        ModelSpec::Rp2 => ManifoldModel::quotient(Surface::Sphere { radius: 1.0 }),
        ModelSpec::RealLine { lo, hi } if lo < hi => ManifoldModel::real_line(*lo, *hi),
        ModelSpec::RealLine { .. } => return Err(MorseError::InvalidInput("real line needs lo < hi".into())),
    })
}

fn metric_from(spec: &MetricSpec, model: ManifoldModel) -> Result<ManifoldModel> {
    match spec {
        MetricSpec::Default => Ok(model),
        MetricSpec::Explicit { matrix } => {
            if model.constraint().is_some() {
                return Err(MorseError::InvalidInput("explicit metrics need a flat model".into()));
            }
            let n = model.tangent_dim();
            if matrix.len() != n || matrix.iter().any(|r| r.len() != n) {
                return Err(MorseError::InvalidInput(format!("metric matrix must be {n}x{n}")));
            }
            let g = DMatrix::from_fn(n, n, |i, j| matrix[i][j]);
            Ok(model.with_metric(Metric::Explicit(ExplicitMetric::new(g)?)))
        }
    }
}

fn parse_err(context: &str, message: impl Into<String>) -> MorseError {
    MorseError::Parse { context: context.into(), message: message.into() }
}

/// Scene from TOML text; `context` names the source in diagnostics.
pub fn parse_scene(text: &str, context: &str) -> Result<SceneConfig> {
    let file: SceneFile = toml::from_str(text).map_err(|e| parse_err(context, e.to_string()))?;
    let mut cfg = match (&file.fixture, &file.model, &file.field) {
        (Some(name), None, None) => {
            if file.metric.is_some() {
                return Err(parse_err(context, "`metric` cannot be combined with `fixture`"));
            }
            fixture(name)?
        }
        (None, Some(m), Some(f)) => {
            let model = metric_from(file.metric.as_ref().unwrap_or(&MetricSpec::Default), model_from(m)?)?;
            let name = file.name.clone().unwrap_or_else(|| "scene".into());
            let field = ScalarField::new(name.clone(), f.to_expr());
            f.check_dim(model.ambient_dim()).map_err(|m| parse_err(context, m))?;
            SceneConfig::new(name, SceneKind::Geometric(Scene::new(model, field)))
        }
        (Some(_), _, _) => return Err(parse_err(context, "`fixture` cannot be combined with `model` or `field`")),
        _ => return Err(parse_err(context, "need either `fixture` or both `model` and `field`")),
    };
    if let Some(n) = &file.name {
        cfg.name = n.clone();
    }
    cfg.flags = file.pipeline;
    cfg.apply(&file.tolerances);
    Ok(cfg)
}

/// A path to a TOML scene, or a fixture name.
pub fn load_scene(arg: &str) -> Result<SceneConfig> {
    let p = Path::new(arg);
    if p.is_file() {
        let text = fs::read_to_string(p)?;
        return parse_scene(&text, arg);
    }
    if arg.ends_with(".toml") {
        return Err(MorseError::Io(format!("{arg}: no such file")));
    }
    fixture(arg)
}

/// Names accepted by `fixture`, with a one-line description.
pub const FIXTURES: &[(&str, &str)] = &[
    ("round-sphere", "f = z on the unit sphere"),
    ("peanut-sphere", "tilted height z + 0.1x on the peanut surface"),
    ("ellipsoid(a1,a2,a3)", "a1 x^2 + a2 y^2 + a3 z^2 on the unit sphere, default (1,2,3)"),
    ("torus-cosine", "cos 2πx + 2 cos 2πy on the flat torus"),
    ("torus-cosine-skew", "torus-cosine with metric diag(1,2)"),
    ("rp2-ellipsoid", "ellipsoid(1,2,3) on the antipodal quotient"),
    ("upright-torus", "height on the upright torus (not Morse-Smale)"),
    ("real-line-parabola", "x^2 on the line"),
    ("real-line-many-minima(n)", "n maxima between n+1 minima on the line"),
    ("real-line-slope", "f = x on the line, no critical points"),
    ("monkey-saddle", "sin πx sin πy sin π(x+y) on the torus (degenerate)"),
    ("heart-complex", "abstract complex: two maxima, a saddle, a minimum"),
    ("punctured-heart", "abstract heart with ∂y = z"),
    ("genus-g-complex(g)", "abstract perfect complex of a genus-g surface"),
    ("torus-translate-chain", "three translates of torus-cosine for functoriality"),
];

fn args_of<'a>(name: &'a str, base: &str) -> Option<Option<&'a str>> {
    let rest = name.strip_prefix(base)?;
    if rest.is_empty() {
        return Some(None);
    }
    if let Some(inner) = rest.strip_prefix('(').and_then(|r| r.strip_suffix(')')) {
        return Some(Some(inner));
    }
    // "ellipsoid a=1,2,3" form
    rest.trim_start().split_once('=').map(|(_, v)| Some(v.trim()))
}

fn numbers(s: &str, name: &str) -> Result<Vec<f64>> {
    s.split(',').map(|t| t.trim().parse::<f64>().map_err(|_| MorseError::UnknownFixture(name.into()))).collect()
}

fn count_arg(s: Option<&str>, name: &str) -> Result<usize> {
    s.ok_or_else(|| MorseError::UnknownFixture(name.into()))?.trim().parse().map_err(|_| MorseError::UnknownFixture(name.into()))
}

fn translate(dx: f64, dy: f64) -> Scene {
    Scene::new(
        ManifoldModel::torus(2),
        ScalarField::new(
            format!("cos+({dx},{dy})"),
            FieldExpr::Translate(Box::new(FieldExpr::TorusCosine(vec![1.0, 2.0])), vec![dx, dy]),
        ),
    )
}

/// Slope that splits the equal extremal values of the Chebyshev polynomial.
pub const MANY_MINIMA_SLOPE: f64 = 0.01;

pub fn fixture(name: &str) -> Result<SceneConfig> {
    let name = name.trim();
    let sphere = ManifoldModel::sphere;
    Ok(match name {
        "round-sphere" => SceneConfig::geometric(name, sphere(), FieldExpr::Coordinate(2)),
        "peanut-sphere" => SceneConfig::geometric(name, ManifoldModel::surface(Surface::Peanut), FieldExpr::Linear(vec![0.1, 0.0, 1.0])),
        "torus-cosine" => SceneConfig::geometric(name, ManifoldModel::torus(2), FieldExpr::TorusCosine(vec![1.0, 2.0])),
        "torus-cosine-skew" => {
            let g = ExplicitMetric::new(DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&[1.0, 2.0])))?;
            SceneConfig::geometric(name, ManifoldModel::torus(2).with_metric(Metric::Explicit(g)), FieldExpr::TorusCosine(vec![1.0, 2.0]))
        }
        "rp2-ellipsoid" => SceneConfig::geometric(
            name,
            ManifoldModel::quotient(Surface::Sphere { radius: 1.0 }),
            FieldExpr::Quadratic(vec![1.0, 2.0, 3.0]),
        ),
        "upright-torus" => {
            SceneConfig::geometric(name, ManifoldModel::surface(Surface::UprightTorus { major: 2.0, minor: 1.0 }), FieldExpr::Coordinate(2))
        }
        "real-line-parabola" => SceneConfig::geometric(name, ManifoldModel::real_line(-4.0, 4.0), FieldExpr::Quadratic(vec![1.0])),
        "real-line-slope" => SceneConfig::geometric(name, ManifoldModel::real_line(-4.0, 4.0), FieldExpr::Linear(vec![1.0])),
        "monkey-saddle" => SceneConfig::geometric(name, ManifoldModel::torus(2), FieldExpr::MonkeySaddle),
        "heart-complex" => SceneConfig::new(name, SceneKind::Abstract(heart_complex())),
        "punctured-heart" => SceneConfig::new(name, SceneKind::Abstract(punctured_heart_complex())),
        "torus-translate-chain" => {
            SceneConfig::new(name, SceneKind::Chain([translate(0.0, 0.0), translate(0.2, 0.15), translate(0.4, 0.3)]))
        }
        _ => {
            if let Some(a) = args_of(name, "ellipsoid") {
                let a = match a {
                    Some(s) => numbers(s, name)?,
                    None => vec![1.0, 2.0, 3.0],
                };
                if a.len() != 3 {
                    return Err(MorseError::UnknownFixture(name.into()));
                }
                return Ok(SceneConfig::geometric(name, sphere(), FieldExpr::Quadratic(a)));
            }
            if let Some(a) = args_of(name, "real-line-many-minima") {
                let n = count_arg(a, name)?;
                if n == 0 {
                    return Err(MorseError::UnknownFixture(name.into()));
                }
                return Ok(SceneConfig::geometric(
                    name,
                    ManifoldModel::real_line(-1.5, 1.5),
                    FieldExpr::Chebyshev { degree: 2 * n + 2, slope: MANY_MINIMA_SLOPE },
                ));
            }
            if let Some(a) = args_of(name, "genus-g-complex") {
                let g = count_arg(a, name)?;
                return Ok(SceneConfig::new(name, SceneKind::Abstract(genus_complex(g))));
            }
            return Err(MorseError::UnknownFixture(name.into()));
        }
    })
}

/// All registry entries with their default parameters.
pub fn builtin_fixtures() -> Vec<SceneConfig> {
    [
        "round-sphere",
        "peanut-sphere",
        "ellipsoid(1,2,3)",
        "torus-cosine",
        "torus-cosine-skew",
        "rp2-ellipsoid",
        "upright-torus",
        "real-line-parabola",
        "real-line-many-minima(3)",
        "real-line-slope",
        "monkey-saddle",
        "heart-complex",
        "punctured-heart",
        "genus-g-complex(2)",
        "torus-translate-chain",
    ]
    .iter()
    .map(|n| fixture(n).expect("registry names resolve"))
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    MorseViolation,
    NonGeneric,
    NotAComplex,
}

impl Status {
    /// 0 on success, 2 on Morse or genericity violations.
    pub fn exit_code(&self) -> i32 {
        match self {
            Status::Ok => 0,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalRow {
    pub label: String,
    pub location: Vec<f64>,
    pub value: f64,
    pub morse_index: usize,
    pub sylvester: SylvesterTriple,
    pub eigenvalues: Vec<f64>,
    pub gradient_norm: f64,
    pub degenerate: bool,
}

impl From<&CriticalPoint> for CriticalRow {
    fn from(c: &CriticalPoint) -> Self {
        Self {
            label: c.label.clone(),
            location: c.location.iter().copied().collect(),
            value: c.value,
            morse_index: c.morse_index,
            sylvester: c.sylvester,
            eigenvalues: c.hessian_eigenvalues.clone(),
            gradient_norm: c.gradient_norm,
            degenerate: c.degenerate,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessRow {
    pub energy: f64,
    /// f(source) - f(target).
    pub drop: f64,
    pub decay_rate: Option<f64>,
    pub captured: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CountRow {
    pub source: String,
    pub target: String,
    pub count: usize,
    pub count_mod2: u8,
    pub method: String,
    pub unverified: usize,
    pub witnesses: Vec<WitnessRow>,
}

fn count_rows(counts: &[ModuliCount], value: impl Fn(&str) -> Option<f64>) -> Vec<CountRow> {
    counts
        .iter()
        .map(|c| {
            let drop = match (value(&c.source), value(&c.target)) {
                (Some(a), Some(b)) => a - b,
                _ => f64::NAN,
            };
            CountRow {
                source: c.source.clone(),
                target: c.target.clone(),
                count: c.count,
                count_mod2: c.count_mod2,
                method: format!("{:?}", c.method),
                unverified: c.unverified,
                witnesses: c
                    .witnesses
                    .iter()
                    .map(|w| WitnessRow {
                        energy: w.energy,
                        drop,
                        decay_rate: w.decay_fit.as_ref().map(|d| d.rate),
                        captured: w.status == FlowStatus::Captured,
                    })
                    .collect(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainReport {
    pub scenes: Vec<String>,
    pub chain_identity: Vec<Vec<Vec<Vec<u8>>>>,
    pub iso: Vec<bool>,
    pub functorial: bool,
    pub glued_equals_direct: bool,
    pub roundtrip_identity: bool,
    pub lipschitz_ok: bool,
    pub energy_bounds_ok: bool,
}

/// Deterministic report; wall-clock timing is kept out so repeated runs compare equal.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub scene: String,
    pub status: Status,
    pub critical: Vec<CriticalRow>,
    pub moduli: Vec<CountRow>,
    pub complex: Option<ComplexDocument>,
    pub boundary_check: Option<BoundaryReport>,
    pub homology: Option<HomologyResult>,
    pub morse_inequality: Option<MorseInequality>,
    pub spectral: Option<SpectralReport>,
    pub scans: Vec<ModuliScan>,
    pub chain: Option<ChainReport>,
    pub warnings: Vec<String>,
}

impl Report {
    fn empty(scene: &str) -> Self {
        Self {
            scene: scene.into(),
            status: Status::Ok,
            critical: Vec::new(),
            moduli: Vec::new(),
            complex: None,
            boundary_check: None,
            homology: None,
            morse_inequality: None,
            spectral: None,
            scans: Vec::new(),
            chain: None,
            warnings: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn betti(&self) -> Option<&[usize]> {
        self.homology.as_ref().map(|h| h.betti.as_slice())
    }
}

fn algebra_into(r: &mut Report, c: &ChainComplexGF2, flags: &PipelineFlags) -> Result<()> {
    r.complex = Some(c.to_document());
    let check = verify_boundary_squared(c);
    r.boundary_check = Some(check);
    if !check.ok {
        r.status = Status::NotAComplex;
        r.warnings.push(format!("boundary squared is nonzero in degree {}", check.offending_degree.unwrap_or(0)));
        return Ok(());
    }
    if flags.homology {
        let h = homology(c)?;
        r.morse_inequality = Some(morse_inequality_check(c.generator_count(), &h));
        if flags.spectral {
            r.spectral = Some(spectral_report(c, &h)?);
        }
        r.homology = Some(h);
    }
    Ok(())
}

fn geometric_report(name: &str, s: &Scene, cfg: &SceneConfig) -> Result<(Report, Option<SceneAnalysis>)> {
    let mut r = Report::empty(name);
    let found = find_critical_points(&s.field, &s.model, &cfg.search)?;
    r.critical = found.points.iter().map(CriticalRow::from).collect();
    r.warnings.extend(found.warnings.iter().cloned());
    if let Some(d) = found.points.iter().find(|c| c.degenerate) {
        r.status = Status::MorseViolation;
        r.warnings.push(format!("MorseViolation: critical point {} is degenerate", d.label));
        return Ok((r, None));
    }
    if !cfg.flags.count_moduli {
        return Ok((r, None));
    }
    let crits = found.points.clone();
    let a = match analyze_points(&s.model, &s.field, crits, found.warnings, &cfg.moduli) {
        Ok(a) => a,
        Err(MorseError::NonGeneric(m)) => {
            r.status = Status::NonGeneric;
            r.warnings.push(format!("NonGeneric: {m}"));
            return Ok((r, None));
        }
        Err(e) => return Err(e),
    };
    let value = |l: &str| a.crits.iter().find(|c| c.label == l).map(|c| c.value).or_else(|| a.classes.iter().find(|c| c.label == l).map(|c| c.value));
    r.moduli = count_rows(&a.counts, value);
    algebra_into(&mut r, &a.complex, &cfg.flags)?;
    if cfg.flags.scans && s.model.tangent_dim() == 2 && !s.model.is_quotient() {
        for (i, _) in a.crits.iter().enumerate().filter(|(_, c)| c.morse_index == 2) {
            for (j, _) in a.crits.iter().enumerate().filter(|(_, c)| c.morse_index == 0) {
                r.scans.push(moduli_scan(&s.model, &s.field, &a.crits, i, j, &cfg.moduli)?);
            }
        }
    }
    Ok((r, Some(a)))
}

fn analyze_scene(s: &Scene, cfg: &SceneConfig) -> Result<SceneAnalysis> {
    analyze(&s.model, &s.field, &cfg.search, &cfg.moduli)
}

fn chain_report(name: &str, sc: &[Scene; 3], cfg: &SceneConfig) -> Result<Report> {
    let mut r = Report::empty(name);
    let an: Vec<SceneAnalysis> = sc.iter().map(|s| analyze_scene(s, cfg)).collect::<Result<_>>()?;
    let o = ContinuationOptions::default();
    let ab = continue_scenes(&Homotopy::convex(sc[0].clone(), sc[1].clone(), T_DEFAULT)?, &an[0], &an[1], &o)?;
    let bc = continue_scenes(&Homotopy::convex(sc[1].clone(), sc[2].clone(), T_DEFAULT)?, &an[1], &an[2], &o)?;
    let ac = continue_scenes(&Homotopy::glued(sc[0].clone(), sc[1].clone(), sc[2].clone(), T_DEFAULT, R_GLUE)?, &an[0], &an[2], &o)?;
    let direct = continue_scenes(&Homotopy::convex(sc[0].clone(), sc[2].clone(), T_DEFAULT)?, &an[0], &an[2], &o)?;
    let hba = Homotopy::convex(sc[1].clone(), sc[0].clone(), T_DEFAULT)?;
    let ba = continue_scenes(&hba, &an[1], &an[0], &o)?;
    let energy_ok = energy_bound_check(&Homotopy::convex(sc[0].clone(), sc[1].clone(), T_DEFAULT)?, &ab.counts.witnesses).is_ok()
        && energy_bound_check(&hba, &ba.counts.witnesses).is_ok();
    let lip = spectral_lipschitz_check(&sc[0].model, &sc[0].field, &sc[1].field, &ab.induced, &an[0].spectral, &an[1].spectral)?;
    r.chain = Some(ChainReport {
        scenes: sc.iter().map(|s| s.field.name.clone()).collect(),
        chain_identity: [&ab, &bc, &ac].iter().map(|c| c.chain.to_rows()).collect(),
        iso: [&ab, &bc, &ac, &ba].iter().map(|c| c.induced.iso).collect(),
        functorial: bc.induced.compose(&ab.induced) == ac.induced,
        glued_equals_direct: direct.induced == ac.induced,
        roundtrip_identity: ba.induced.compose(&ab.induced).is_identity(),
        lipschitz_ok: lip.ok,
        energy_bounds_ok: energy_ok,
    });
    r.homology = Some(an[0].homology.clone());
    Ok(r)
}

/// critical → moduli → algebra (→ spectral), or the chain checks for a chain fixture.
pub fn run_pipeline(cfg: &SceneConfig) -> Result<Report> {
    match &cfg.kind {
        SceneKind::Geometric(s) => Ok(geometric_report(&cfg.name, s, cfg)?.0),
        SceneKind::Abstract(c) => {
            let mut r = Report::empty(&cfg.name);
            algebra_into(&mut r, c, &cfg.flags)?;
            Ok(r)
        }
        SceneKind::Chain(sc) => chain_report(&cfg.name, sc, cfg),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuationReport {
    pub minus: String,
    pub plus: String,
    pub chain_map: Vec<Vec<Vec<u8>>>,
    pub induced: Vec<Vec<Vec<u8>>>,
    pub iso: bool,
    pub counts: Vec<CountRow>,
    pub energy_bounds_ok: bool,
    pub lipschitz_ok: bool,
    pub lipschitz_min_slack: f64,
}

/// Convex homotopy from scene A to scene B.
pub fn run_continuation(a: &SceneConfig, b: &SceneConfig) -> Result<ContinuationReport> {
    let (sa, sb) = (a.scene()?, b.scene()?);
    let (xa, xb) = (analyze_scene(sa, a)?, analyze_scene(sb, b)?);
    let h = Homotopy::convex(sa.clone(), sb.clone(), T_DEFAULT)?;
    let c = continue_scenes(&h, &xa, &xb, &ContinuationOptions::default())?;
    let energy_bounds_ok = energy_bound_check(&h, &c.counts.witnesses).is_ok();
    let (lipschitz_ok, lipschitz_min_slack) = if c.induced.iso {
        let l = spectral_lipschitz_check(&sa.model, &sa.field, &sb.field, &c.induced, &xa.spectral, &xb.spectral)?;
        (l.ok, l.entries.iter().map(|e| e.slack).fold(f64::INFINITY, f64::min))
    } else {
        (false, f64::NAN)
    };
    let value = |l: &str| {
        xa.crits.iter().find(|c| c.label == l).map(|c| c.value).or_else(|| xb.crits.iter().find(|c| c.label == l).map(|c| c.value))
    };
    Ok(ContinuationReport {
        minus: a.name.clone(),
        plus: b.name.clone(),
        chain_map: c.chain.to_rows(),
        induced: c.induced.matrices.iter().map(|m| m.to_rows()).collect(),
        iso: c.induced.iso,
        counts: count_rows(&c.counts.counts, |l| value(l).or(None)),
        energy_bounds_ok,
        lipschitz_ok,
        lipschitz_min_slack,
    })
}

/// Writes `critical.csv` and one `<source>_<target>_<k>.csv` per resolved flow line;
/// returns the file names in write order.
pub fn export_flows(cfg: &SceneConfig, dir: &Path) -> Result<Vec<String>> {
    let s = cfg.scene()?;
    let a = analyze_scene(s, cfg)?;
    fs::create_dir_all(dir)?;
    let mut names = Vec::new();
    let dim = s.model.ambient_dim();
    let coords: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
    let mut crit = format!("label,index,value,{}\n", coords.join(","));
    for c in &a.crits {
        let loc: Vec<String> = c.location.iter().map(|v| format!("{v:.12e}")).collect();
        crit.push_str(&format!("{},{},{:.12e},{}\n", c.label, c.morse_index, c.value, loc.join(",")));
    }
    fs::write(dir.join("critical.csv"), crit)?;
    names.push("critical.csv".to_string());
    let counts = if s.model.is_quotient() { &a.cover_counts } else { &a.counts };
    for m in counts {
        for (k, w) in m.witnesses.iter().enumerate() {
            let mut out = format!("s,{},value,energy,arclength\n", coords.join(","));
            for p in &w.samples {
                let loc: Vec<String> = p.p.iter().map(|v| format!("{v:.12e}")).collect();
                out.push_str(&format!("{:.12e},{},{:.12e},{:.12e},{:.12e}\n", p.s, loc.join(","), p.value, p.energy, p.arclength));
            }
            let name = format!("{}_{}_{k}.csv", m.source, m.target);
            fs::write(dir.join(&name), out)?;
            names.push(name);
        }
    }
    Ok(names)
}
