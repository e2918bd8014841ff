//! Manifold models, tangent frames, metrics and retraction.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{MorseError, Result};

pub type Point = DVector<f64>;

pub const TAU_SURF: f64 = 1e-10;
pub const EPS_REG: f64 = 1e-6;
pub const N_PROJ: usize = 50;
pub const H_MAX: f64 = 0.1;
pub const TAU_TAN: f64 = 1e-9;

/// One term `coefficient * x^i y^j z^k` of a constraint polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coefficient: f64,
    pub exponents: [u32; 3],
}

/// Constraint function G of an implicit surface {G = 0}.
#[derive(Debug, Clone, PartialEq)]
pub enum Surface {
    Sphere { radius: f64 },
    /// (x^2 - 1)^2 + y^2 + z^2 - 1.2
    Peanut,
    /// (|p|^2 + R^2 - r^2)^2 - 4 R^2 (x^2 + z^2): rotation axis along y, standing upright in z.
    UprightTorus { major: f64, minor: f64 },
    Polynomial { terms: Vec<Monomial>, half_width: f64 },
}

fn powi(x: f64, k: u32) -> f64 {
    if k == 0 {
        1.0
    } else {
        x.powi(k as i32)
    }
}

impl Surface {
    pub fn value(&self, p: &Vector3<f64>) -> f64 {
        let (x, y, z) = (p[0], p[1], p[2]);
        match self {
            Surface::Sphere { radius } => x * x + y * y + z * z - radius * radius,
            Surface::Peanut => (x * x - 1.0).powi(2) + y * y + z * z - 1.2,
            Surface::UprightTorus { major, minor } => {
                let q = x * x + y * y + z * z + major * major - minor * minor;
                q * q - 4.0 * major * major * (x * x + z * z)
            }
            Surface::Polynomial { terms, .. } => terms
                .iter()
                .map(|t| {
                    t.coefficient
                        * powi(x, t.exponents[0])
                        * powi(y, t.exponents[1])
                        * powi(z, t.exponents[2])
                })
                .sum(),
        }
    }

    pub fn gradient(&self, p: &Vector3<f64>) -> Vector3<f64> {
        let (x, y, z) = (p[0], p[1], p[2]);
        match self {
            Surface::Sphere { .. } => Vector3::new(2.0 * x, 2.0 * y, 2.0 * z),
            Surface::Peanut => Vector3::new(4.0 * x * (x * x - 1.0), 2.0 * y, 2.0 * z),
            Surface::UprightTorus { major, minor } => {
                let q = x * x + y * y + z * z + major * major - minor * minor;
                let r2 = major * major;
                Vector3::new(
                    4.0 * q * x - 8.0 * r2 * x,
                    4.0 * q * y,
                    4.0 * q * z - 8.0 * r2 * z,
                )
            }
            Surface::Polynomial { terms, .. } => {
                let mut g = Vector3::zeros();
                for t in terms {
                    let e = t.exponents;
                    for axis in 0..3 {
                        if e[axis] == 0 {
                            continue;
                        }
                        let mut prod = t.coefficient * e[axis] as f64;
                        for (j, &c) in [x, y, z].iter().enumerate() {
                            let k = if j == axis { e[j] - 1 } else { e[j] };
                            prod *= powi(c, k);
                        }
                        g[axis] += prod;
                    }
                }
                g
            }
        }
    }

    pub fn hessian(&self, p: &Vector3<f64>) -> Matrix3<f64> {
        let (x, y, z) = (p[0], p[1], p[2]);
        match self {
            Surface::Sphere { .. } => Matrix3::identity() * 2.0,
            Surface::Peanut => Matrix3::from_diagonal(&Vector3::new(12.0 * x * x - 4.0, 2.0, 2.0)),
            Surface::UprightTorus { major, minor } => {
                let q = x * x + y * y + z * z + major * major - minor * minor;
                let r2 = major * major;
                let v = Vector3::new(x, y, z);
                let mut h = v * v.transpose() * 8.0 + Matrix3::identity() * (4.0 * q);
                h[(0, 0)] -= 8.0 * r2;
                h[(2, 2)] -= 8.0 * r2;
                h
            }
            Surface::Polynomial { terms, .. } => {
                let c = [x, y, z];
                let mut h = Matrix3::zeros();
                for t in terms {
                    let e = t.exponents;
                    for a in 0..3 {
                        for b in 0..3 {
                            let mut k = e;
                            let mut factor = t.coefficient;
                            if k[a] == 0 {
                                continue;
                            }
                            factor *= k[a] as f64;
                            k[a] -= 1;
                            if k[b] == 0 {
                                continue;
                            }
                            factor *= k[b] as f64;
                            k[b] -= 1;
                            for j in 0..3 {
                                factor *= powi(c[j], k[j]);
                            }
                            h[(a, b)] += factor;
                        }
                    }
                }
                h
            }
        }
    }

    /// Axis-aligned box containing the zero set.
    pub fn bounding_box(&self) -> ([f64; 3], [f64; 3]) {
        match self {
            Surface::Sphere { radius } => {
                let r = 1.2 * radius;
                ([-r; 3], [r; 3])
            }
            Surface::Peanut => ([-1.6, -1.2, -1.2], [1.6, 1.2, 1.2]),
            Surface::UprightTorus { major, minor } => {
                let a = 1.1 * (major + minor);
                let b = 1.2 * minor;
                ([-a, -b, -a], [a, b, a])
            }
            Surface::Polynomial { half_width, .. } => ([-half_width; 3], [*half_width; 3]),
        }
    }
}

/// Positive-definite metric given by a constant matrix in coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitMetric {
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    /// Cholesky factor, g = L L^T.
    pub l: DMatrix<f64>,
    pub l_inv: DMatrix<f64>,
}

impl ExplicitMetric {
    pub fn new(g: DMatrix<f64>) -> Result<Self> {
        if !g.is_square() {
            return Err(MorseError::InvalidInput("metric matrix must be square".into()));
        }
        let asym = (&g - g.transpose()).amax();
        if asym > 1e-12 * (1.0 + g.amax()) {
            return Err(MorseError::InvalidInput("metric matrix must be symmetric".into()));
        }
        let chol = nalgebra::Cholesky::new(g.clone()).ok_or_else(|| {
            MorseError::InvalidInput("metric matrix must be positive definite".into())
        })?;
        let l = chol.l();
        let l_inv = l
            .clone()
            .try_inverse()
            .ok_or_else(|| MorseError::InvalidInput("singular metric".into()))?;
        let g_inv = chol.inverse();
        Ok(Self { g, g_inv, l, l_inv })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Metric {
    /// Restriction of the ambient Euclidean product (implicit surfaces).
    Induced,
    /// Coordinate metric of a flat chart (torus, real line).
    FlatPeriodic,
    Explicit(ExplicitMetric),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    ImplicitSurface(Surface),
    FlatTorus(usize),
    /// Quotient of an antipodally symmetric surface; points are carried on the cover.
    AntipodalQuotient(Surface),
    RealLine { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldModel {
    pub kind: ModelKind,
    pub metric: Metric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub base: Point,
    pub components: DVector<f64>,
}

pub fn to_v3(p: &Point) -> Vector3<f64> {
    Vector3::new(p[0], p[1], p[2])
}

pub fn from_v3(v: &Vector3<f64>) -> Point {
    DVector::from_column_slice(v.as_slice())
}

/// Wrap a coordinate into [0, 1).
pub fn wrap_unit(x: f64) -> f64 {
    let w = x.rem_euclid(1.0);
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// Wrap a coordinate difference into [-1/2, 1/2).
pub fn wrap_delta(d: f64) -> f64 {
    d - (d + 0.5).floor()
}

impl ManifoldModel {
    pub fn sphere() -> Self {
        Self::surface(Surface::Sphere { radius: 1.0 })
    }

    pub fn surface(s: Surface) -> Self {
        Self { kind: ModelKind::ImplicitSurface(s), metric: Metric::Induced }
    }

    pub fn torus(n: usize) -> Self {
        Self { kind: ModelKind::FlatTorus(n), metric: Metric::FlatPeriodic }
    }

    pub fn real_line(lo: f64, hi: f64) -> Self {
        Self { kind: ModelKind::RealLine { lo, hi }, metric: Metric::FlatPeriodic }
    }

    pub fn quotient(s: Surface) -> Self {
        Self { kind: ModelKind::AntipodalQuotient(s), metric: Metric::Induced }
    }

    pub fn with_metric(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self
    }

    pub fn constraint(&self) -> Option<&Surface> {
        match &self.kind {
            ModelKind::ImplicitSurface(s) | ModelKind::AntipodalQuotient(s) => Some(s),
            _ => None,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match &self.kind {
            ModelKind::ImplicitSurface(_) | ModelKind::AntipodalQuotient(_) => 3,
            ModelKind::FlatTorus(n) => *n,
            ModelKind::RealLine { .. } => 1,
        }
    }

    pub fn tangent_dim(&self) -> usize {
        match &self.kind {
            ModelKind::ImplicitSurface(_) | ModelKind::AntipodalQuotient(_) => 2,
            ModelKind::FlatTorus(n) => *n,
            ModelKind::RealLine { .. } => 1,
        }
    }

    pub fn is_torus(&self) -> bool {
        matches!(self.kind, ModelKind::FlatTorus(_))
    }

    pub fn is_quotient(&self) -> bool {
        matches!(self.kind, ModelKind::AntipodalQuotient(_))
    }

    /// Euler characteristic of the closed models.
    pub fn euler_characteristic(&self) -> Option<i64> {
        match &self.kind {
            ModelKind::ImplicitSurface(Surface::Sphere { .. })
            | ModelKind::ImplicitSurface(Surface::Peanut) => Some(2),
            ModelKind::ImplicitSurface(Surface::UprightTorus { .. }) => Some(0),
            ModelKind::AntipodalQuotient(_) => Some(1),
            ModelKind::FlatTorus(_) => Some(0),
            _ => None,
        }
    }

    /// Unit normal and |∇G| at p.
    pub fn normal(&self, p: &Point) -> Result<Option<(Vector3<f64>, f64)>> {
        match self.constraint() {
            None => Ok(None),
            Some(s) => {
                let g = s.gradient(&to_v3(p));
                let n = g.norm();
                if n < EPS_REG {
                    return Err(MorseError::Regularity { norm: n });
                }
                Ok(Some((g / n, n)))
            }
        }
    }

    pub fn tangent_project(&self, p: &Point, v: &DVector<f64>) -> Result<TangentVector> {
        let components = match self.normal(p)? {
            None => v.clone(),
            Some((n, _)) => {
                let w = to_v3(v);
                from_v3(&(w - n * n.dot(&w)))
            }
        };
        Ok(TangentVector { base: p.clone(), components })
    }

    /// Orthonormal (Euclidean) tangent frame as columns; identity on flat models.
    pub fn tangent_frame(&self, p: &Point) -> Result<DMatrix<f64>> {
        match self.normal(p)? {
            None => Ok(DMatrix::identity(self.ambient_dim(), self.tangent_dim())),
            Some((n, _)) => {
                let mut order = [0usize, 1, 2];
                order.sort_by(|&a, &b| n[a].abs().partial_cmp(&n[b].abs()).unwrap().then(a.cmp(&b)));
                let mut e = Vector3::zeros();
                e[order[0]] = 1.0;
                let t1 = (e - n * n.dot(&e)).normalize();
                let t2 = n.cross(&t1);
                let mut m = DMatrix::zeros(3, 2);
                m.set_column(0, &from_v3(&t1));
                m.set_column(1, &from_v3(&t2));
                Ok(m)
            }
        }
    }

    /// Newton projection onto {G = 0} along ∇G; wrap on the torus.
    pub fn project(&self, p: &Point) -> Result<Point> {
        match &self.kind {
            ModelKind::FlatTorus(_) => Ok(p.map(wrap_unit)),
            ModelKind::RealLine { .. } => Ok(p.clone()),
            ModelKind::ImplicitSurface(s) | ModelKind::AntipodalQuotient(s) => {
                let mut x = to_v3(p);
                let mut last = f64::INFINITY;
                for _ in 0..N_PROJ {
                    let g = s.value(&x);
                    if g.abs() <= 1e-15 {
                        return Ok(from_v3(&x));
                    }
                    if g.abs() >= last && g.abs() <= TAU_SURF {
                        return Ok(from_v3(&x));
                    }
                    last = g.abs();
                    let grad = s.gradient(&x);
                    let n2 = grad.norm_squared();
                    if n2.sqrt() < EPS_REG {
                        return Err(MorseError::Regularity { norm: n2.sqrt() });
                    }
                    x -= grad * (g / n2);
                }
                let g = s.value(&x);
                if g.abs() <= TAU_SURF {
                    Ok(from_v3(&x))
                } else {
                    Err(MorseError::ProjectionDivergence { residual: g.abs() })
                }
            }
        }
    }

    pub fn retract(&self, p: &Point, step: &TangentVector) -> Result<Point> {
        let len = step.components.norm();
        if self.constraint().is_some() && len > H_MAX * (1.0 + 1e-12) {
            return Err(MorseError::InvalidInput(format!(
                "retraction step {len:.3e} exceeds h_max {H_MAX}"
            )));
        }
        self.project(&(p + &step.components))
    }

    /// Metric matrix in the tangent coordinates used by the engine.
    pub fn metric_at(&self, p: &Point) -> Result<DMatrix<f64>> {
        self.normal(p)?;
        Ok(match &self.metric {
            Metric::Explicit(m) => m.g.clone(),
            _ => DMatrix::identity(self.tangent_dim(), self.tangent_dim()),
        })
    }

    /// Metric inner product of two coordinate (or ambient tangent) vectors.
    pub fn inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        match &self.metric {
            Metric::Explicit(m) => (u.transpose() * &m.g * v)[(0, 0)],
            _ => u.dot(v),
        }
    }

    pub fn norm(&self, v: &DVector<f64>) -> f64 {
        self.inner(v, v).max(0.0).sqrt()
    }

    /// Displacement q - p, with minimal-image wrapping on the torus.
    pub fn displacement(&self, p: &Point, q: &Point) -> DVector<f64> {
        match &self.kind {
            ModelKind::FlatTorus(_) => (q - p).map(wrap_delta),
            _ => q - p,
        }
    }

    pub fn distance(&self, p: &Point, q: &Point) -> f64 {
        match &self.kind {
            ModelKind::AntipodalQuotient(_) => (p - q).norm().min((p + q).norm()),
            _ => self.displacement(p, q).norm(),
        }
    }

    /// Canonical coordinates for reporting.
    pub fn canonical(&self, p: &Point) -> Point {
        match &self.kind {
            ModelKind::FlatTorus(_) => p.map(wrap_unit),
            ModelKind::AntipodalQuotient(_) => {
                for &c in p.iter() {
                    if c.abs() > 1e-9 {
                        return if c < 0.0 { -p } else { p.clone() };
                    }
                }
                p.clone()
            }
            _ => p.clone(),
        }
    }

    /// True when the point lies inside the model's chart domain.
    pub fn contains(&self, p: &Point) -> bool {
        match &self.kind {
            ModelKind::RealLine { lo, hi } => p[0] > *lo && p[0] < *hi,
            _ => p.iter().all(|c| c.is_finite()),
        }
    }

    /// Deterministic quasi-random seeds on the model; unprojectable seeds are dropped.
    pub fn seeds(&self, count: usize) -> Vec<Point> {
        let mut out = Vec::with_capacity(count);
        for i in 1..=count {
            match &self.kind {
                ModelKind::FlatTorus(n) => {
                    out.push(DVector::from_fn(*n, |k, _| halton(i, PRIMES[k % PRIMES.len()])));
                }
                ModelKind::RealLine { lo, hi } => {
                    out.push(DVector::from_element(1, lo + (hi - lo) * halton(i, 2)));
                }
                ModelKind::ImplicitSurface(s) | ModelKind::AntipodalQuotient(s) => {
                    let (lo, hi) = s.bounding_box();
                    let p = DVector::from_fn(3, |k, _| lo[k] + (hi[k] - lo[k]) * halton(i, PRIMES[k]));
                    if let Ok(q) = self.project(&p) {
                        if s.value(&to_v3(&q)).abs() <= TAU_SURF {
                            out.push(q);
                        }
                    }
                }
            }
        }
        out
    }
}

pub const PRIMES: [u32; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Radical-inverse (van der Corput) value of `index` in `base`.
pub fn halton(mut index: usize, base: u32) -> f64 {
    let b = base as usize;
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % b) as f64;
        index /= b;
    }
    r
}
