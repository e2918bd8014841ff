//! Scalar fields, metric gradients, metric Hessians and Sylvester counts.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{MorseError, Result};
use crate::geometry::{to_v3, ManifoldModel, Metric, Point, TangentVector};

pub const H_FD: f64 = 1e-5;
pub const TAU_CRIT: f64 = 1e-9;
pub const ZERO_TOL_FACTOR: f64 = 1e-6;

pub type CustomFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;

/// Expression tree for the built-in fields; derivatives are analytic except for `Custom`.
#[derive(Clone)]
pub enum FieldExpr {
    /// f = x_k
    Coordinate(usize),
    /// f = sum c_i x_i
    Linear(Vec<f64>),
    /// f = sum a_i x_i^2
    Quadratic(Vec<f64>),
    /// f = sum c_i cos(2 pi x_i)
    TorusCosine(Vec<f64>),
    /// f = sin(pi x) sin(pi y) sin(pi (x + y))
    MonkeySaddle,
    /// sum of coefficient * prod x_i^{e_i}
    Polynomial(Vec<(f64, Vec<u32>)>),
    /// T_degree(x) + slope * x
    Chebyshev { degree: usize, slope: f64 },
    Constant(f64),
    Sum(Vec<FieldExpr>),
    Scale(f64, Box<FieldExpr>),
    /// f(x - shift)
    Translate(Box<FieldExpr>, Vec<f64>),
    /// Opaque closure, differentiated by central differences.
    Custom(CustomFn),
}

impl fmt::Debug for FieldExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldExpr::Coordinate(k) => write!(f, "Coordinate({k})"),
            FieldExpr::Linear(c) => write!(f, "Linear({c:?})"),
            FieldExpr::Quadratic(a) => write!(f, "Quadratic({a:?})"),
            FieldExpr::TorusCosine(c) => write!(f, "TorusCosine({c:?})"),
            FieldExpr::MonkeySaddle => write!(f, "MonkeySaddle"),
            FieldExpr::Polynomial(t) => write!(f, "Polynomial({t:?})"),
            FieldExpr::Chebyshev { degree, slope } => write!(f, "Chebyshev({degree}, {slope})"),
            FieldExpr::Constant(c) => write!(f, "Constant({c})"),
            FieldExpr::Sum(v) => write!(f, "Sum({v:?})"),
            FieldExpr::Scale(c, e) => write!(f, "Scale({c}, {e:?})"),
            FieldExpr::Translate(e, s) => write!(f, "Translate({e:?}, {s:?})"),
            FieldExpr::Custom(_) => write!(f, "Custom"),
        }
    }
}

fn chebyshev(m: usize, x: f64) -> (f64, f64, f64) {
    let (mut t0, mut d0, mut s0) = (1.0, 0.0, 0.0);
    if m == 0 {
        return (t0, d0, s0);
    }
    let (mut t1, mut d1, mut s1) = (x, 1.0, 0.0);
    for _ in 1..m {
        let t2 = 2.0 * x * t1 - t0;
        let d2 = 2.0 * t1 + 2.0 * x * d1 - d0;
        let s2 = 4.0 * d1 + 2.0 * x * s1 - s0;
        t0 = t1;
        d0 = d1;
        s0 = s1;
        t1 = t2;
        d1 = d2;
        s1 = s2;
    }
    (t1, d1, s1)
}

fn ipow(x: f64, k: u32) -> f64 {
    if k == 0 {
        1.0
    } else {
        x.powi(k as i32)
    }
}

impl FieldExpr {
    pub fn is_analytic(&self) -> bool {
        match self {
            FieldExpr::Custom(_) => false,
            FieldExpr::Sum(v) => v.iter().all(|e| e.is_analytic()),
            FieldExpr::Scale(_, e) | FieldExpr::Translate(e, _) => e.is_analytic(),
            _ => true,
        }
    }

    pub fn value(&self, p: &Point) -> f64 {
        match self {
            FieldExpr::Coordinate(k) => p[*k],
            FieldExpr::Linear(c) => c.iter().zip(p.iter()).map(|(a, x)| a * x).sum(),
            FieldExpr::Quadratic(a) => a.iter().zip(p.iter()).map(|(a, x)| a * x * x).sum(),
            FieldExpr::TorusCosine(c) => {
                c.iter().zip(p.iter()).map(|(a, x)| a * (2.0 * PI * x).cos()).sum()
            }
            FieldExpr::MonkeySaddle => {
                let (x, y) = (p[0], p[1]);
                (PI * x).sin() * (PI * y).sin() * (PI * (x + y)).sin()
            }
            FieldExpr::Polynomial(terms) => terms
                .iter()
                .map(|(c, e)| c * e.iter().zip(p.iter()).map(|(&k, &x)| ipow(x, k)).product::<f64>())
                .sum(),
            FieldExpr::Chebyshev { degree, slope } => chebyshev(*degree, p[0]).0 + slope * p[0],
            FieldExpr::Constant(c) => *c,
            FieldExpr::Sum(v) => v.iter().map(|e| e.value(p)).sum(),
            FieldExpr::Scale(c, e) => c * e.value(p),
            FieldExpr::Translate(e, s) => e.value(&shifted(p, s)),
            FieldExpr::Custom(f) => f(p),
        }
    }

    pub fn gradient(&self, p: &Point) -> DVector<f64> {
        let n = p.len();
        match self {
            FieldExpr::Coordinate(k) => {
                let mut g = DVector::zeros(n);
                g[*k] = 1.0;
                g
            }
            FieldExpr::Linear(c) => DVector::from_fn(n, |i, _| c.get(i).copied().unwrap_or(0.0)),
            FieldExpr::Quadratic(a) => {
                DVector::from_fn(n, |i, _| 2.0 * a.get(i).copied().unwrap_or(0.0) * p[i])
            }
            FieldExpr::TorusCosine(c) => DVector::from_fn(n, |i, _| {
                -2.0 * PI * c.get(i).copied().unwrap_or(0.0) * (2.0 * PI * p[i]).sin()
            }),
            FieldExpr::MonkeySaddle => {
                let (a, b, c) = (PI * p[0], PI * p[1], PI * (p[0] + p[1]));
                let (sa, ca, sb, cb, sc, cc) = (a.sin(), a.cos(), b.sin(), b.cos(), c.sin(), c.cos());
                DVector::from_vec(vec![
                    PI * (ca * sb * sc + sa * sb * cc),
                    PI * (sa * cb * sc + sa * sb * cc),
                ])
            }
            FieldExpr::Polynomial(terms) => {
                let mut g = DVector::zeros(n);
                for (c, e) in terms {
                    for i in 0..n {
                        let ei = e.get(i).copied().unwrap_or(0);
                        if ei == 0 {
                            continue;
                        }
                        let mut prod = c * ei as f64;
                        for j in 0..n {
                            let ej = e.get(j).copied().unwrap_or(0);
                            prod *= ipow(p[j], if j == i { ej - 1 } else { ej });
                        }
                        g[i] += prod;
                    }
                }
                g
            }
            FieldExpr::Chebyshev { degree, slope } => {
                DVector::from_element(1, chebyshev(*degree, p[0]).1 + slope)
            }
            FieldExpr::Constant(_) => DVector::zeros(n),
            FieldExpr::Sum(v) => v.iter().fold(DVector::zeros(n), |acc, e| acc + e.gradient(p)),
            FieldExpr::Scale(c, e) => e.gradient(p) * *c,
            FieldExpr::Translate(e, s) => e.gradient(&shifted(p, s)),
            FieldExpr::Custom(_) => fd_gradient(|q| self.value(q), p),
        }
    }

    pub fn hessian(&self, p: &Point) -> DMatrix<f64> {
        let n = p.len();
        match self {
            FieldExpr::Coordinate(_) | FieldExpr::Linear(_) | FieldExpr::Constant(_) => {
                DMatrix::zeros(n, n)
            }
            FieldExpr::Quadratic(a) => DMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    2.0 * a.get(i).copied().unwrap_or(0.0)
                } else {
                    0.0
                }
            }),
            FieldExpr::TorusCosine(c) => DMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    -4.0 * PI * PI * c.get(i).copied().unwrap_or(0.0) * (2.0 * PI * p[i]).cos()
                } else {
                    0.0
                }
            }),
            FieldExpr::MonkeySaddle => {
                let (a, b, c) = (PI * p[0], PI * p[1], PI * (p[0] + p[1]));
                let (sa, ca, sb, cb, sc, cc) = (a.sin(), a.cos(), b.sin(), b.cos(), c.sin(), c.cos());
                let p2 = PI * PI;
                let fxx = p2 * (-2.0 * sa * sb * sc + 2.0 * ca * sb * cc);
                let fyy = p2 * (-2.0 * sa * sb * sc + 2.0 * sa * cb * cc);
                let fxy = p2 * (ca * cb * sc + ca * sb * cc + sa * cb * cc - sa * sb * sc);
                DMatrix::from_row_slice(2, 2, &[fxx, fxy, fxy, fyy])
            }
            FieldExpr::Polynomial(terms) => {
                let mut h = DMatrix::zeros(n, n);
                for (c, e) in terms {
                    for a in 0..n {
                        for b in 0..n {
                            let mut k: Vec<u32> = (0..n).map(|j| e.get(j).copied().unwrap_or(0)).collect();
                            if k[a] == 0 {
                                continue;
                            }
                            let mut factor = c * k[a] as f64;
                            k[a] -= 1;
                            if k[b] == 0 {
                                continue;
                            }
                            factor *= k[b] as f64;
                            k[b] -= 1;
                            for j in 0..n {
                                factor *= ipow(p[j], k[j]);
                            }
                            h[(a, b)] += factor;
                        }
                    }
                }
                h
            }
            FieldExpr::Chebyshev { degree, .. } => {
                DMatrix::from_element(1, 1, chebyshev(*degree, p[0]).2)
            }
            FieldExpr::Sum(v) => v.iter().fold(DMatrix::zeros(n, n), |acc, e| acc + e.hessian(p)),
            FieldExpr::Scale(c, e) => e.hessian(p) * *c,
            FieldExpr::Translate(e, s) => e.hessian(&shifted(p, s)),
            FieldExpr::Custom(_) => fd_hessian(|q| self.value(q), p),
        }
    }
}

fn shifted(p: &Point, s: &[f64]) -> Point {
    DVector::from_fn(p.len(), |i, _| p[i] - s.get(i).copied().unwrap_or(0.0))
}

/// Central-difference gradient with step `H_FD`.
pub fn fd_gradient(f: impl Fn(&Point) -> f64, p: &Point) -> DVector<f64> {
    let n = p.len();
    DVector::from_fn(n, |i, _| {
        let mut a = p.clone();
        let mut b = p.clone();
        a[i] += H_FD;
        b[i] -= H_FD;
        (f(&a) - f(&b)) / (2.0 * H_FD)
    })
}

/// Central-difference Hessian with step `H_FD`, symmetrized.
pub fn fd_hessian(f: impl Fn(&Point) -> f64, p: &Point) -> DMatrix<f64> {
    let n = p.len();
    let h = H_FD;
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let eval = |si: f64, sj: f64| {
                let mut q = p.clone();
                q[i] += si * h;
                q[j] += sj * h;
                f(&q)
            };
            m[(i, j)] = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0)) / (4.0 * h * h);
        }
    }
    (&m + m.transpose()) * 0.5
}

#[derive(Debug, Clone)]
pub struct ScalarField {
    pub name: String,
    pub expr: FieldExpr,
}

impl ScalarField {
    pub fn new(name: impl Into<String>, expr: FieldExpr) -> Self {
        Self { name: name.into(), expr }
    }

    pub fn value(&self, p: &Point) -> f64 {
        self.expr.value(p)
    }

    pub fn ambient_gradient(&self, p: &Point) -> DVector<f64> {
        self.expr.gradient(p)
    }

    pub fn ambient_hessian(&self, p: &Point) -> DMatrix<f64> {
        self.expr.hessian(p)
    }

    pub fn fd_gradient(&self, p: &Point) -> DVector<f64> {
        fd_gradient(|q| self.value(q), p)
    }

    pub fn has_analytic_derivatives(&self) -> bool {
        self.expr.is_analytic()
    }

    /// f + c
    pub fn shifted_by(&self, c: f64) -> Self {
        Self::new(
            format!("{}+{c}", self.name),
            FieldExpr::Sum(vec![self.expr.clone(), FieldExpr::Constant(c)]),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SylvesterTriple {
    pub n_minus: usize,
    pub n_zero: usize,
    pub n_plus: usize,
}

impl SylvesterTriple {
    pub fn dimension(&self) -> usize {
        self.n_minus + self.n_zero + self.n_plus
    }
}

/// Metric gradient ∇_g f at p.
pub fn gradient(field: &ScalarField, model: &ManifoldModel, p: &Point) -> Result<TangentVector> {
    let df = field.ambient_gradient(p);
    match &model.metric {
        Metric::Explicit(m) => Ok(TangentVector { base: p.clone(), components: &m.g_inv * df }),
        _ => model.tangent_project(p, &df),
    }
}

/// Metric norm of the gradient.
pub fn gradient_norm(field: &ScalarField, model: &ManifoldModel, p: &Point) -> Result<f64> {
    Ok(model.norm(&gradient(field, model, p)?.components))
}

/// Metric Hessian in a g-orthonormal tangent frame.
#[derive(Debug, Clone)]
pub struct MetricHessian {
    pub matrix: DMatrix<f64>,
    /// Columns are the frame vectors in coordinates (g-orthonormal).
    pub frame: DMatrix<f64>,
}

/// Tangent Hessian without the criticality check (frame dependent away from critical points).
pub fn tangent_hessian(field: &ScalarField, model: &ManifoldModel, p: &Point) -> Result<MetricHessian> {
    let hf = field.ambient_hessian(p);
    match (&model.metric, model.constraint()) {
        (Metric::Explicit(m), _) => {
            let frame = m.l_inv.transpose();
            let matrix = &m.l_inv * hf * &frame;
            Ok(MetricHessian { matrix: symmetrize(&matrix), frame })
        }
        (_, Some(s)) => {
            let x = to_v3(p);
            let gg = s.gradient(&x);
            let n2 = gg.norm_squared();
            if n2.sqrt() < crate::geometry::EPS_REG {
                return Err(MorseError::Regularity { norm: n2.sqrt() });
            }
            let df = field.ambient_gradient(p);
            let lambda = (df[0] * gg[0] + df[1] * gg[1] + df[2] * gg[2]) / n2;
            let hg = s.hessian(&x);
            let hg = DMatrix::from_fn(3, 3, |i, j| hg[(i, j)]);
            let e = model.tangent_frame(p)?;
            let matrix = e.transpose() * (hf - hg * lambda) * &e;
            Ok(MetricHessian { matrix: symmetrize(&matrix), frame: e })
        }
        _ => {
            let n = model.tangent_dim();
            Ok(MetricHessian { matrix: symmetrize(&hf), frame: DMatrix::identity(n, n) })
        }
    }
}

pub fn metric_hessian(field: &ScalarField, model: &ManifoldModel, p: &Point) -> Result<MetricHessian> {
    let gn = gradient_norm(field, model, p)?;
    if gn > TAU_CRIT {
        return Err(MorseError::NotCritical { grad_norm: gn });
    }
    tangent_hessian(field, model, p)
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues in ascending order with matching unit eigenvectors.
pub fn sorted_eigen(h: &DMatrix<f64>) -> (Vec<f64>, Vec<DVector<f64>>) {
    let eig = SymmetricEigen::new(h.clone());
    let mut idx: Vec<usize> = (0..h.nrows()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = idx
        .iter()
        .map(|&i| {
            let mut v = eig.eigenvectors.column(i).into_owned();
            // deterministic sign: largest component positive
            let k = v.iamax();
            if v[k] < 0.0 {
                v = -v;
            }
            v
        })
        .collect();
    (vals, vecs)
}

pub fn sylvester_invariants(h: &DMatrix<f64>, zero_tol: f64) -> SylvesterTriple {
    let (vals, _) = sorted_eigen(h);
    let mut t = SylvesterTriple { n_minus: 0, n_zero: 0, n_plus: 0 };
    for v in vals {
        if v < -zero_tol {
            t.n_minus += 1;
        } else if v > zero_tol {
            t.n_plus += 1;
        } else {
            t.n_zero += 1;
        }
    }
    t
}

/// Field-level Hessian scale: max tangent-Hessian norm over 64 quasi-random model points.
pub fn hessian_scale(field: &ScalarField, model: &ManifoldModel) -> f64 {
    model
        .seeds(64)
        .iter()
        .filter_map(|p| tangent_hessian(field, model, p).ok())
        .map(|h| h.matrix.norm())
        .fold(0.0, f64::max)
}

/// Default zero tolerance for Sylvester counts.
pub fn default_zero_tol(field: &ScalarField, model: &ManifoldModel) -> f64 {
    ZERO_TOL_FACTOR * hessian_scale(field, model).max(1e-300)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn height() -> ScalarField {
        ScalarField::new("height", FieldExpr::Coordinate(2))
    }

    #[test]
    fn sphere_gradient_examples() {
        let m = ManifoldModel::sphere();
        let g = gradient(&height(), &m, &dvector![0.0, 0.0, 1.0]).unwrap();
        assert!(g.components.norm() < 1e-15);
        let g = gradient(&height(), &m, &dvector![1.0, 0.0, 0.0]).unwrap();
        assert!((g.components - dvector![0.0, 0.0, 1.0]).norm() < 1e-15);
    }

    #[test]
    fn torus_gradient_example() {
        let m = ManifoldModel::torus(2);
        let f = ScalarField::new("cos", FieldExpr::TorusCosine(vec![1.0, 2.0]));
        let g = gradient(&f, &m, &dvector![0.25, 0.0]).unwrap();
        assert!((g.components - dvector![-2.0 * PI, 0.0]).norm() < 1e-12);
    }

    #[test]
    fn metric_hessian_examples() {
        let m = ManifoldModel::sphere();
        let h = metric_hessian(&height(), &m, &dvector![0.0, 0.0, 1.0]).unwrap();
        assert!((h.matrix + DMatrix::identity(2, 2)).amax() < 1e-14);

        let t = ManifoldModel::torus(2);
        let f = ScalarField::new("cos", FieldExpr::TorusCosine(vec![1.0, 2.0]));
        let h = metric_hessian(&f, &t, &dvector![0.0, 0.0]).unwrap();
        let want = DMatrix::from_diagonal(&dvector![-4.0 * PI * PI, -8.0 * PI * PI]);
        assert!((h.matrix - want).amax() < 1e-10);

        let e = ScalarField::new("ell", FieldExpr::Quadratic(vec![1.0, 2.0, 3.0]));
        let h = metric_hessian(&e, &m, &dvector![1.0, 0.0, 0.0]).unwrap();
        let (vals, _) = sorted_eigen(&h.matrix);
        assert!((vals[0] - 2.0).abs() < 1e-12 && (vals[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn not_critical_is_error() {
        let m = ManifoldModel::sphere();
        let r = metric_hessian(&height(), &m, &dvector![1.0, 0.0, 0.0]);
        assert!(matches!(r, Err(MorseError::NotCritical { .. })));
    }

    #[test]
    fn sylvester_examples() {
        let t = sylvester_invariants(&DMatrix::from_diagonal(&dvector![-1.0, 2.0]), 1e-9);
        assert_eq!((t.n_minus, t.n_zero, t.n_plus), (1, 0, 1));
        let t = sylvester_invariants(&DMatrix::zeros(2, 2), 1e-9);
        assert_eq!((t.n_minus, t.n_zero, t.n_plus), (0, 2, 0));
        let t = sylvester_invariants(
            &DMatrix::from_diagonal(&dvector![-4.0 * PI * PI, -8.0 * PI * PI]),
            1e-9,
        );
        assert_eq!((t.n_minus, t.n_zero, t.n_plus), (2, 0, 0));
    }

    #[test]
    fn chebyshev_recurrence() {
        // T_4 = 8x^4 - 8x^2 + 1
        let x: f64 = 0.37;
        let (t, d, s) = chebyshev(4, x);
        assert!((t - (8.0 * x.powi(4) - 8.0 * x * x + 1.0)).abs() < 1e-14);
        assert!((d - (32.0 * x.powi(3) - 16.0 * x)).abs() < 1e-13);
        assert!((s - (96.0 * x * x - 16.0)).abs() < 1e-12);
    }

    #[test]
    fn explicit_metric_gradient_definition() {
        use crate::geometry::ExplicitMetric;
        let g = DMatrix::from_diagonal(&dvector![1.0, 2.0]);
        let m = ManifoldModel::torus(2).with_metric(Metric::Explicit(ExplicitMetric::new(g).unwrap()));
        let f = ScalarField::new("cos", FieldExpr::TorusCosine(vec![1.0, 2.0]));
        let p = dvector![0.13, 0.61];
        let w = gradient(&f, &m, &p).unwrap().components;
        let df = f.ambient_gradient(&p);
        for v in [dvector![1.0, 0.0], dvector![0.0, 1.0]] {
            assert!((m.inner(&w, &v) - df.dot(&v)).abs() < 1e-12);
        }
    }
}
