//! Critical point search, classification, spectrum and antipodal orbits.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{MorseError, Result};
use crate::fields::{
    default_zero_tol, gradient_norm, metric_hessian, sorted_eigen, sylvester_invariants, ScalarField,
    SylvesterTriple, TAU_CRIT,
};
use crate::geometry::{from_v3, to_v3, ManifoldModel, ModelKind, Point};

pub const TAU_VAL: f64 = 1e-9;
pub const DEDUP_RADIUS: f64 = 1e-4;
pub const DEFAULT_SEEDS: usize = 512;
const NEWTON_MAX_ITER: usize = 200;
const NEWTON_MAX_STEP: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct CriticalPoint {
    pub label: String,
    pub location: Point,
    pub value: f64,
    pub hessian_eigenvalues: Vec<f64>,
    /// Eigenvectors of the metric Hessian as coordinate vectors, g-orthonormal, matching the eigenvalue order.
    pub eigenvectors: Vec<DVector<f64>>,
    pub sylvester: SylvesterTriple,
    pub morse_index: usize,
    pub degenerate: bool,
    pub gradient_norm: f64,
}

impl CriticalPoint {
    /// Unstable (negative) eigen-directions.
    pub fn unstable_directions(&self) -> &[DVector<f64>] {
        &self.eigenvectors[..self.sylvester.n_minus]
    }

    /// Smallest positive eigenvalue.
    pub fn smallest_positive_eigenvalue(&self) -> Option<f64> {
        self.hessian_eigenvalues.iter().copied().filter(|&v| v > 0.0).reduce(f64::min)
    }

    /// Smallest |eigenvalue|.
    pub fn spectral_gap(&self) -> f64 {
        self.hessian_eigenvalues.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    pub seed_count: usize,
    pub newton_tol: f64,
    pub dedup_radius: f64,
    /// Sylvester zero tolerance; `None` means 1e-6 times the field-level Hessian scale.
    pub zero_tol: Option<f64>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { seed_count: DEFAULT_SEEDS, newton_tol: TAU_CRIT, dedup_radius: DEDUP_RADIUS, zero_tol: None }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SeedStats {
    pub seeds: usize,
    pub converged: usize,
    /// Number of converged seeds landing on each returned point, in label order.
    pub hits: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct CriticalSearch {
    pub points: Vec<CriticalPoint>,
    pub stats: SeedStats,
    pub zero_tol: f64,
    pub warnings: Vec<String>,
}

fn pinv_solve(j: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    let svd = j.clone().svd(true, true);
    let smax = svd.singular_values.max();
    svd.solve(rhs, 1e-14 * smax.max(1e-300)).unwrap_or_else(|_| DVector::zeros(rhs.len()))
}

/// Damped Newton on ∇f = 0 in flat coordinates.
fn newton_flat(field: &ScalarField, model: &ManifoldModel, x0: &Point) -> Option<Point> {
    let mut x = x0.clone();
    let mut g = field.ambient_gradient(&x);
    for _ in 0..NEWTON_MAX_ITER {
        let gn = g.norm();
        if gn == 0.0 {
            break;
        }
        let mut step = pinv_solve(&field.ambient_hessian(&x), &(-&g));
        let len = step.norm();
        if len > NEWTON_MAX_STEP {
            step *= NEWTON_MAX_STEP / len;
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let y = model.project(&(&x + &step * t)).ok()?;
            let gy = field.ambient_gradient(&y);
            if gy.norm() < gn * (1.0 - 1e-4 * t) {
                accepted = Some((y, gy));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((y, gy)) => {
                let moved = (step.norm() * t) < 1e-15;
                x = y;
                g = gy;
                if moved {
                    break;
                }
            }
            None => break,
        }
        if !model.contains(&x) {
            return None;
        }
    }
    Some(x)
}

/// Damped Newton on the Lagrange system ∇f = λ∇G, G = 0.
fn newton_lagrange(field: &ScalarField, model: &ManifoldModel, x0: &Point) -> Option<Point> {
    let s = model.constraint()?;
    let residual = |x: &Point, lam: f64| -> DVector<f64> {
        let df = field.ambient_gradient(x);
        let dg = s.gradient(&to_v3(x));
        let mut r = DVector::zeros(4);
        for i in 0..3 {
            r[i] = df[i] - lam * dg[i];
        }
        r[3] = s.value(&to_v3(x));
        r
    };
    let mut x = x0.clone();
    let dg = s.gradient(&to_v3(&x));
    let mut lam = field.ambient_gradient(&x).dot(&from_v3(&dg)) / dg.norm_squared();
    let mut r = residual(&x, lam);
    for _ in 0..NEWTON_MAX_ITER {
        let rn = r.norm();
        if rn == 0.0 {
            break;
        }
        let hf = field.ambient_hessian(&x);
        let hg = s.hessian(&to_v3(&x));
        let dg = s.gradient(&to_v3(&x));
        let mut j = DMatrix::zeros(4, 4);
        for a in 0..3 {
            for b in 0..3 {
                j[(a, b)] = hf[(a, b)] - lam * hg[(a, b)];
            }
            j[(a, 3)] = -dg[a];
            j[(3, a)] = dg[a];
        }
        let mut step = pinv_solve(&j, &(-&r));
        let len = step.rows(0, 3).norm();
        if len > NEWTON_MAX_STEP {
            step *= NEWTON_MAX_STEP / len;
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let y = &x + step.rows(0, 3) * t;
            let ly = lam + step[3] * t;
            let ry = residual(&y, ly);
            if ry.norm() < rn * (1.0 - 1e-4 * t) {
                accepted = Some((y, ly, ry));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((y, ly, ry)) => {
                let tiny = step.norm() * t < 1e-15;
                x = y;
                lam = ly;
                r = ry;
                if tiny {
                    break;
                }
            }
            None => break,
        }
        if !x.iter().all(|c| c.is_finite()) {
            return None;
        }
    }
    model.project(&x).ok()
}

fn quantize(x: f64) -> i64 {
    (x / 1e-8).round() as i64
}

fn label_order(a: &CriticalPoint, b: &CriticalPoint) -> Ordering {
    if (a.value - b.value).abs() > TAU_VAL {
        return b.value.partial_cmp(&a.value).unwrap();
    }
    for (x, y) in a.location.iter().zip(b.location.iter()) {
        match quantize(*x).cmp(&quantize(*y)) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// Distance on the covering space (antipodal points stay distinct).
fn cover_distance(model: &ManifoldModel, p: &Point, q: &Point) -> f64 {
    model.displacement(p, q).norm()
}

/// Locate, deduplicate, classify and label all critical points reachable from the seeds.
pub fn find_critical_points(
    field: &ScalarField,
    model: &ManifoldModel,
    search: &SearchOptions,
) -> Result<CriticalSearch> {
    let seeds = model.seeds(search.seed_count);
    let zero_tol = search.zero_tol.unwrap_or_else(|| default_zero_tol(field, model));
    let mut stats = SeedStats { seeds: seeds.len(), ..Default::default() };

    let mut candidates: Vec<(Point, f64)> = Vec::new();
    for seed in &seeds {
        let found = match model.kind {
            ModelKind::ImplicitSurface(_) | ModelKind::AntipodalQuotient(_) => {
                newton_lagrange(field, model, seed)
            }
            _ => newton_flat(field, model, seed),
        };
        let Some(p) = found else { continue };
        if !model.contains(&p) {
            continue;
        }
        let p = match model.kind {
            ModelKind::FlatTorus(_) => model.canonical(&p),
            _ => p,
        };
        let Ok(gn) = gradient_norm(field, model, &p) else { continue };
        if gn <= search.newton_tol {
            candidates.push((p, gn));
        }
    }
    stats.converged = candidates.len();

    // clusters: representative with the smallest gradient norm, ties by location
    let mut clusters: Vec<(Point, f64, usize)> = Vec::new();
    for (p, gn) in candidates {
        match clusters.iter_mut().find(|(q, _, _)| cover_distance(model, q, &p) < search.dedup_radius) {
            Some(c) => {
                c.2 += 1;
                let better = gn < c.1
                    || (gn == c.1
                        && p.iter().zip(c.0.iter()).map(|(a, b)| a.partial_cmp(b).unwrap()).find(|o| *o != Ordering::Equal)
                            == Some(Ordering::Less));
                if better {
                    c.0 = p;
                    c.1 = gn;
                }
            }
            None => clusters.push((p, gn, 1)),
        }
    }

    let mut points = Vec::new();
    let mut hits = Vec::new();
    for (p, _, h) in clusters {
        points.push(classify_with_tol(field, model, &p, zero_tol)?);
        hits.push(h);
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| label_order(&points[a], &points[b]));
    let points: Vec<CriticalPoint> = order
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            let mut c = points[i].clone();
            c.label = format!("c{k}");
            c
        })
        .collect();
    stats.hits = order.iter().map(|&i| hits[i]).collect();

    let mut warnings = Vec::new();
    if points.is_empty() {
        warnings.push("EmptyResult: no critical points located".to_string());
    }
    Ok(CriticalSearch { points, stats, zero_tol, warnings })
}

pub fn classify(field: &ScalarField, model: &ManifoldModel, p: &Point) -> Result<CriticalPoint> {
    classify_with_tol(field, model, p, default_zero_tol(field, model))
}

pub fn classify_with_tol(
    field: &ScalarField,
    model: &ManifoldModel,
    p: &Point,
    zero_tol: f64,
) -> Result<CriticalPoint> {
    let h = metric_hessian(field, model, p)?;
    let (vals, vecs) = sorted_eigen(&h.matrix);
    let sylvester = sylvester_invariants(&h.matrix, zero_tol);
    let eigenvectors = vecs.iter().map(|v| &h.frame * v).collect();
    Ok(CriticalPoint {
        label: String::new(),
        location: p.clone(),
        value: field.value(p),
        hessian_eigenvalues: vals,
        eigenvectors,
        morse_index: sylvester.n_minus,
        degenerate: sylvester.n_zero > 0,
        sylvester,
        gradient_norm: gradient_norm(field, model, p)?,
    })
}

/// Distinct critical values, ascending, merged within `TAU_VAL`.
pub fn spectrum(crits: &[CriticalPoint]) -> Vec<f64> {
    let mut v: Vec<f64> = crits.iter().map(|c| c.value).collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out: Vec<f64> = Vec::new();
    for x in v {
        if out.last().map_or(true, |&l| x - l > TAU_VAL) {
            out.push(x);
        }
    }
    out
}

/// An antipodal pair of critical points on the covering sphere.
#[derive(Debug, Clone)]
pub struct CriticalClass {
    pub label: String,
    pub representatives: [String; 2],
    pub value: f64,
    pub morse_index: usize,
    pub location: Point,
}

pub fn quotient_identify(crits: &[CriticalPoint], model: &ManifoldModel, field: &ScalarField) -> Result<Vec<CriticalClass>> {
    if !model.is_quotient() {
        return Err(MorseError::InvalidInput("quotient_identify needs an antipodal quotient model".into()));
    }
    let mut used = vec![false; crits.len()];
    let mut classes = Vec::new();
    for (i, c) in crits.iter().enumerate() {
        let defect = (field.value(&c.location) - field.value(&(-&c.location))).abs();
        if defect > 1e-10 {
            return Err(MorseError::NotInvariant { defect });
        }
        if used[i] {
            continue;
        }
        let partner = crits
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i && !used[*j])
            .map(|(j, d)| (j, (&d.location + &c.location).norm()))
            .filter(|(_, d)| *d < DEDUP_RADIUS)
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let Some((j, _)) = partner else {
            return Err(MorseError::InvalidInput(format!("no antipodal partner for {}", c.label)));
        };
        used[i] = true;
        used[j] = true;
        classes.push(CriticalClass {
            label: format!("q{}", classes.len()),
            representatives: [c.label.clone(), crits[j].label.clone()],
            value: c.value,
            morse_index: c.morse_index,
            location: model.canonical(&c.location),
        });
    }
    Ok(classes)
}
