//! Gradient flow integration, energy, decay fits, action-energy constant and pregluing.

use nalgebra::DVector;
use serde::Serialize;

use crate::critical::CriticalPoint;
use crate::error::{MorseError, Result};
use crate::fields::{gradient, gradient_norm, ScalarField};
use crate::geometry::{to_v3, ManifoldModel, Point};

pub const RTOL: f64 = 1e-10;
pub const ATOL: f64 = 1e-12;
pub const H_MIN: f64 = 1e-12;
pub const EPS_CAPTURE: f64 = 1e-6;
pub const GRAD_CAPTURE: f64 = 1e-6;
pub const S_MAX: f64 = 500.0;
pub const TAU_MONO: f64 = 1e-9;
pub const MIN_TAIL: usize = 20;

/// Energy tolerance τ_E = 1e-6 (1 + |E|).
pub fn tau_energy(e: f64) -> f64 {
    1e-6 * (1.0 + e.abs())
}

/// A possibly time-dependent tangent vector field with its metric.
pub trait FlowField: Sync {
    fn model(&self) -> &ManifoldModel;
    fn velocity(&self, s: f64, x: &Point) -> Result<DVector<f64>>;
    /// Metric inner product at time s.
    fn inner(&self, _s: f64, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        self.model().inner(u, v)
    }
}

/// -∇f (descending, `sign = 1`) or +∇f (ascending, `sign = -1`).
pub struct GradientField<'a> {
    pub model: &'a ManifoldModel,
    pub field: &'a ScalarField,
    pub sign: f64,
}

impl<'a> GradientField<'a> {
    pub fn descending(model: &'a ManifoldModel, field: &'a ScalarField) -> Self {
        Self { model, field, sign: 1.0 }
    }
    pub fn ascending(model: &'a ManifoldModel, field: &'a ScalarField) -> Self {
        Self { model, field, sign: -1.0 }
    }
}

impl FlowField for GradientField<'_> {
    fn model(&self) -> &ManifoldModel {
        self.model
    }
    fn velocity(&self, _s: f64, x: &Point) -> Result<DVector<f64>> {
        Ok(gradient(self.field, self.model, x)?.components * (-self.sign))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_min: f64,
    pub h_max: f64,
    /// First trial step.
    pub h_init: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self { rtol: RTOL, atol: ATOL, h_min: H_MIN, h_max: f64::INFINITY, h_init: 1e-3 }
    }
}

#[derive(Debug, Clone)]
pub struct FlowEnd {
    pub s: f64,
    pub x: Point,
    pub energy: f64,
    pub stopped: bool,
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Dormand–Prince 5(4) on (x, E) with E' = |v|²_g, retraction after each accepted step.
///
/// The observer sees every accepted state (including the initial one) and returns
/// `true` to stop. Integration also stops at `s_end`, landing on it exactly.
pub fn run_flow<F: FlowField + ?Sized>(
    field: &F,
    start: &Point,
    s0: f64,
    s_end: f64,
    opts: &IntegratorOptions,
    observer: &mut dyn FnMut(f64, &Point, f64) -> Result<bool>,
) -> Result<FlowEnd> {
    let model = field.model();
    let mut x = model.project(start)?;
    let mut s = s0;
    let mut e = 0.0;
    if observer(s, &x, e)? {
        return Ok(FlowEnd { s, x, energy: e, stopped: true });
    }
    let dim = x.len();
    let mut h = opts.h_init.min(opts.h_max).min((s_end - s0).max(0.0));
    while s < s_end {
        let mut last = false;
        if s + h >= s_end {
            h = s_end - s;
            last = true;
        }
        let mut k: Vec<DVector<f64>> = Vec::with_capacity(7);
        let mut ke = [0.0; 7];
        for i in 0..7 {
            let mut xi = x.clone();
            for (j, kj) in k.iter().enumerate().take(i) {
                if A[i][j] != 0.0 {
                    xi.axpy(h * A[i][j], kj, 1.0);
                }
            }
            let v = field.velocity(s + C[i] * h, &xi)?;
            ke[i] = field.inner(s + C[i] * h, &v, &v);
            k.push(v);
        }
        let mut x5 = x.clone();
        let mut err = DVector::zeros(dim);
        let mut e5 = e;
        let mut ee = 0.0;
        for i in 0..7 {
            if B[i] != 0.0 {
                x5.axpy(h * B[i], &k[i], 1.0);
            }
            err.axpy(h * (B[i] - B4[i]), &k[i], 1.0);
            e5 += h * B[i] * ke[i];
            ee += h * (B[i] - B4[i]) * ke[i];
        }
        let mut ratio: f64 = 0.0;
        for i in 0..dim {
            let sc = opts.atol + opts.rtol * x[i].abs().max(x5[i].abs());
            ratio = ratio.max(err[i].abs() / sc);
        }
        ratio = ratio.max(ee.abs() / (opts.atol + opts.rtol * e.abs().max(e5.abs())));
        if !ratio.is_finite() {
            return Err(MorseError::StepCollapse { s, h });
        }
        if ratio <= 1.0 {
            s = if last { s_end } else { s + h };
            x = model.project(&x5)?;
            if !model.contains(&x) {
                return Err(MorseError::EscapedDomain { s });
            }
            e = e5;
            if observer(s, &x, e)? {
                return Ok(FlowEnd { s, x, energy: e, stopped: true });
            }
            let fac = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
            h = (h * fac).min(opts.h_max);
        } else {
            h *= (0.9 * ratio.powf(-0.2)).clamp(0.2, 1.0);
            if h < opts.h_min {
                return Err(MorseError::StepCollapse { s, h });
            }
        }
    }
    Ok(FlowEnd { s, x, energy: e, stopped: false })
}

/// Flow for a signed duration under ∓∇f (negative duration runs the ascending flow).
pub fn flow_for(
    model: &ManifoldModel,
    field: &ScalarField,
    start: &Point,
    duration: f64,
    opts: &IntegratorOptions,
) -> Result<Point> {
    if duration == 0.0 {
        return Ok(start.clone());
    }
    let gf = if duration > 0.0 {
        GradientField::descending(model, field)
    } else {
        GradientField::ascending(model, field)
    };
    let end = run_flow(&gf, start, 0.0, duration.abs(), opts, &mut |_, _, _| Ok(false))?;
    Ok(end.x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FlowStatus {
    Captured,
    Unresolved,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    pub rate: f64,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct FlowSample {
    pub s: f64,
    pub p: Point,
    pub value: f64,
    /// Cumulative energy from the start.
    pub energy: f64,
    /// Cumulative chordal arclength.
    pub arclength: f64,
}

#[derive(Debug, Clone)]
pub struct FlowLine {
    pub samples: Vec<FlowSample>,
    pub source: Option<String>,
    pub target: Option<String>,
    pub energy: f64,
    pub monotone_violation: f64,
    pub decay_fit: Option<DecayFit>,
    pub status: FlowStatus,
    /// Time direction: false for -∇f, true for +∇f.
    pub backward: bool,
}

impl FlowLine {
    pub fn start(&self) -> &Point {
        &self.samples[0].p
    }
    pub fn end(&self) -> &Point {
        &self.samples.last().unwrap().p
    }
    /// The same path traversed in the opposite time direction; energies and arclengths are
    /// re-accumulated from the new start, endpoints swap.
    pub fn reversed(&self) -> FlowLine {
        let last = self.samples.last().map_or((0.0, 0.0, 0.0), |l| (l.s, l.energy, l.arclength));
        let samples = self
            .samples
            .iter()
            .rev()
            .map(|x| FlowSample { s: last.0 - x.s, p: x.p.clone(), value: x.value, energy: last.1 - x.energy, arclength: last.2 - x.arclength })
            .collect();
        FlowLine {
            samples,
            source: self.target.clone(),
            target: self.source.clone(),
            energy: self.energy,
            monotone_violation: self.monotone_violation,
            decay_fit: None,
            status: self.status,
            backward: !self.backward,
        }
    }

    /// Minimum distance from the samples to a point.
    pub fn min_distance_to(&self, model: &ManifoldModel, q: &Point) -> f64 {
        self.samples.iter().map(|x| model.displacement(q, &x.p).norm()).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FlowOptions {
    pub eps_capture: f64,
    pub grad_capture: f64,
    pub s_max: f64,
    pub backward: bool,
    pub integrator: IntegratorOptions,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            eps_capture: EPS_CAPTURE,
            grad_capture: GRAD_CAPTURE,
            s_max: S_MAX,
            backward: false,
            integrator: IntegratorOptions::default(),
        }
    }
}

/// Index of a critical point that captures x, if any.
pub fn capture_index(
    model: &ManifoldModel,
    field: &ScalarField,
    crits: &[CriticalPoint],
    x: &Point,
    eps: f64,
    grad_tol: f64,
) -> Option<usize> {
    let (i, d) = crits
        .iter()
        .enumerate()
        .map(|(i, c)| (i, model.displacement(&c.location, x).norm()))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())?;
    if d < eps && gradient_norm(field, model, x).map_or(false, |g| g < grad_tol) {
        Some(i)
    } else {
        None
    }
}

/// Integrate ∂_s x + ∇f(x) = 0 (or the ascending flow) until capture or `s_max`.
pub fn integrate(
    model: &ManifoldModel,
    field: &ScalarField,
    start: &Point,
    crits: &[CriticalPoint],
    opts: &FlowOptions,
) -> Result<FlowLine> {
    let gf = GradientField { model, field, sign: if opts.backward { -1.0 } else { 1.0 } };
    let mut samples: Vec<FlowSample> = Vec::new();
    let mut target = None;
    let mut observer = |s: f64, x: &Point, e: f64| -> Result<bool> {
        let arclength = samples.last().map_or(0.0, |l| l.arclength + model.displacement(&l.p, x).norm());
        samples.push(FlowSample { s, p: x.clone(), value: field.value(x), energy: e, arclength });
        if let Some(i) = capture_index(model, field, crits, x, opts.eps_capture, opts.grad_capture) {
            target = Some(crits[i].label.clone());
            return Ok(true);
        }
        Ok(false)
    };
    run_flow(&gf, start, 0.0, opts.s_max, &opts.integrator, &mut observer)?;
    let sign = if opts.backward { -1.0 } else { 1.0 };
    let monotone_violation = samples
        .windows(2)
        .map(|w| sign * (w[1].value - w[0].value))
        .fold(0.0, f64::max);
    let energy = samples.last().map_or(0.0, |l| l.energy);
    let status = if target.is_some() { FlowStatus::Captured } else { FlowStatus::Unresolved };
    Ok(FlowLine {
        samples,
        source: None,
        target,
        energy,
        monotone_violation,
        decay_fit: None,
        status,
        backward: opts.backward,
    })
}

/// Energy of a line: the integrator's accumulated ∫|∂_s x|²_g when available, else trapezoid.
pub fn energy(line: &FlowLine, model: &ManifoldModel, field: &ScalarField) -> f64 {
    if line.samples.len() < 2 {
        return 0.0;
    }
    let acc = line.samples.last().unwrap().energy;
    if acc > 0.0 {
        acc
    } else {
        trapezoid_energy(line, model, field)
    }
}

/// Trapezoidal ∫|∇f|²_g ds over the samples.
pub fn trapezoid_energy(line: &FlowLine, model: &ManifoldModel, field: &ScalarField) -> f64 {
    let dens: Vec<f64> = line
        .samples
        .iter()
        .map(|x| gradient_norm(field, model, &x.p).map_or(0.0, |g| g * g))
        .collect();
    line.samples
        .windows(2)
        .zip(dens.windows(2))
        .map(|(w, d)| 0.5 * (w[1].s - w[0].s).abs() * (d[0] + d[1]))
        .sum()
}

/// Least-squares slope of log distance to the target over the last `tail_fraction` of samples.
pub fn decay_rate(
    line: &FlowLine,
    model: &ManifoldModel,
    target: &CriticalPoint,
    tail_fraction: f64,
) -> Result<DecayFit> {
    let n = line.samples.len();
    let k = ((n as f64) * tail_fraction).ceil() as usize;
    let tail: Vec<(f64, f64)> = line.samples[n.saturating_sub(k)..]
        .iter()
        .map(|x| (x.s, model.displacement(&target.location, &x.p).norm()))
        .filter(|(_, d)| *d > 0.0)
        .map(|(s, d)| (s, d.ln()))
        .collect();
    if tail.len() < MIN_TAIL {
        return Err(MorseError::InsufficientTail { needed: MIN_TAIL, got: tail.len() });
    }
    let m = tail.len() as f64;
    let (sx, sy) = tail.iter().fold((0.0, 0.0), |a, (x, y)| (a.0 + x, a.1 + y));
    let (mx, my) = (sx / m, sy / m);
    let (sxx, sxy) = tail
        .iter()
        .fold((0.0, 0.0), |a, (x, y)| (a.0 + (x - mx) * (x - mx), a.1 + (x - mx) * (y - my)));
    let slope = sxy / sxx;
    let residual = (tail
        .iter()
        .map(|(x, y)| {
            let r = y - (my + slope * (x - mx));
            r * r
        })
        .sum::<f64>()
        / m)
        .sqrt();
    Ok(DecayFit { rate: -slope, residual })
}

pub const KAPPA_FLOOR: f64 = 1e-3;
const KAPPA_RADII_PER_OCTAVE: usize = 8;
const KAPPA_DIRECTIONS: usize = 64;

#[derive(Debug, Clone, Serialize)]
pub struct KappaEstimate {
    /// max |f - f(c)| / |∇f|²_g over the sampled neighborhood.
    pub kappa_hat: f64,
    /// 1 / (2 min|a_i|) with f - f(c) ≈ ½⟨x, A x⟩ and A the metric Hessian.
    pub kappa_formula: f64,
    pub samples: usize,
}

/// Brute-force action-energy constant on geometric shells r 2^{-k/8} down to `KAPPA_FLOOR`.
pub fn action_energy_kappa(
    field: &ScalarField,
    model: &ManifoldModel,
    crit: &CriticalPoint,
    radius: f64,
) -> Result<KappaEstimate> {
    if crit.degenerate {
        return Err(MorseError::DegenerateCritical { label: crit.label.clone() });
    }
    let d = crit.eigenvectors.len();
    let dirs: Vec<DVector<f64>> = match d {
        1 => vec![crit.eigenvectors[0].clone(), -crit.eigenvectors[0].clone()],
        _ => (0..KAPPA_DIRECTIONS)
            .map(|j| {
                let th = 2.0 * std::f64::consts::PI * j as f64 / KAPPA_DIRECTIONS as f64;
                &crit.eigenvectors[0] * th.cos() + &crit.eigenvectors[1] * th.sin()
            })
            .collect(),
    };
    let mut best: f64 = 0.0;
    let mut count = 0;
    let mut k = 0;
    loop {
        let r = radius * 2f64.powf(-(k as f64) / KAPPA_RADII_PER_OCTAVE as f64);
        if r < KAPPA_FLOOR {
            break;
        }
        for dir in &dirs {
            let p = model.project(&(&crit.location + dir * r))?;
            let g = gradient_norm(field, model, &p)?;
            if g > 0.0 {
                best = best.max((field.value(&p) - crit.value).abs() / (g * g));
                count += 1;
            }
        }
        k += 1;
    }
    Ok(KappaEstimate { kappa_hat: best, kappa_formula: 0.5 / crit.spectral_gap(), samples: count })
}

/// Degree-5 smoothstep: 0 for t ≤ 0, 1 for t ≥ 1.
pub fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
    }
}

pub fn smoothstep_derivative(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        30.0 * t * t * (1.0 - t) * (1.0 - t)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PreglueOptions {
    pub chart_radius: f64,
    pub grid: usize,
    pub ds: f64,
}

impl Default for PreglueOptions {
    fn default() -> Self {
        Self { chart_radius: 0.3, grid: 2001, ds: 1e-3 }
    }
}

#[derive(Debug, Clone)]
pub struct Preglued {
    pub samples: Vec<(f64, Point)>,
    pub residual: f64,
}

/// Normal chart at a critical point: tangent-plane coordinates with normal-line inverse.
pub struct NormalChart<'a> {
    model: &'a ManifoldModel,
    center: Point,
    frame: nalgebra::DMatrix<f64>,
}

impl<'a> NormalChart<'a> {
    pub fn new(model: &'a ManifoldModel, center: &Point) -> Result<Self> {
        Ok(Self { model, center: center.clone(), frame: model.tangent_frame(center)? })
    }

    pub fn coords(&self, p: &Point) -> DVector<f64> {
        self.frame.transpose() * self.model.displacement(&self.center, p)
    }

    pub fn point(&self, y: &DVector<f64>) -> Result<Point> {
        let q = &self.center + &self.frame * y;
        match self.model.constraint() {
            None => self.model.project(&q),
            Some(s) => {
                let (n, _) = self.model.normal(&self.center)?.unwrap();
                let mut t = 0.0;
                for _ in 0..50 {
                    let x = to_v3(&q) + n * t;
                    let g = s.value(&x);
                    if g.abs() < 1e-15 {
                        break;
                    }
                    let dg = s.gradient(&x).dot(&n);
                    if dg.abs() < 1e-12 {
                        return Err(MorseError::ChartOverflow { norm: y.norm() });
                    }
                    t -= g / dg;
                }
                let x = to_v3(&q) + n * t;
                if s.value(&x).abs() > crate::geometry::TAU_SURF {
                    return Err(MorseError::ChartOverflow { norm: y.norm() });
                }
                Ok(crate::geometry::from_v3(&x))
            }
        }
    }
}

/// Time-origin shifted evaluation of a flow line by re-integration from the nearest sample.
struct Retimed<'a> {
    line: &'a FlowLine,
    offset: f64,
    model: &'a ManifoldModel,
    field: &'a ScalarField,
}

impl Retimed<'_> {
    fn at(&self, t: f64) -> Result<Point> {
        let s = t + self.offset;
        let samples = &self.line.samples;
        let dir = if self.line.backward { -1.0 } else { 1.0 };
        let i = match samples.iter().rposition(|x| x.s <= s) {
            Some(i) => i,
            None => 0,
        };
        let opts = IntegratorOptions::default();
        flow_for(self.model, self.field, &samples[i].p, dir * (s - samples[i].s), &opts)
    }
}

/// Pregluing of a line into c with a line out of c, on the window [-T, T].
pub fn preglue(
    model: &ManifoldModel,
    field: &ScalarField,
    c: &CriticalPoint,
    up: &FlowLine,
    down: &FlowLine,
    t_glue: f64,
    opts: &PreglueOptions,
) -> Result<Preglued> {
    let chart = NormalChart::new(model, &c.location)?;
    let inside = |p: &Point| chart.coords(p).norm() <= opts.chart_radius;
    // up: first sample after which the line stays in the chart
    let entry = up
        .samples
        .iter()
        .rposition(|x| !inside(&x.p))
        .map_or(0, |i| i + 1);
    if entry >= up.samples.len() {
        return Err(MorseError::ChartOverflow { norm: chart.coords(up.end()).norm() });
    }
    // down: last sample before the line first leaves the chart
    if !inside(down.start()) {
        return Err(MorseError::ChartOverflow { norm: chart.coords(down.start()).norm() });
    }
    let exit = down
        .samples
        .iter()
        .position(|x| !inside(&x.p))
        .map_or(down.samples.len() - 1, |i| i - 1);
    let up_t = Retimed { line: up, offset: up.samples[entry].s, model, field };
    let down_t = Retimed { line: down, offset: down.samples[exit].s, model, field };

    let path = |s: f64| -> Result<Point> {
        let a = 1.0 - smoothstep(s + t_glue / 2.0 + 1.0);
        let b = smoothstep(s - t_glue / 2.0);
        let mut y = DVector::zeros(model.tangent_dim());
        if a > 0.0 {
            y += chart.coords(&up_t.at(s + t_glue)?) * a;
        }
        if b > 0.0 {
            y += chart.coords(&down_t.at(s - t_glue)?) * b;
        }
        if y.norm() > opts.chart_radius * 1.5 {
            return Err(MorseError::ChartOverflow { norm: y.norm() });
        }
        chart.point(&y)
    };

    let mut samples = Vec::with_capacity(opts.grid);
    let mut residual: f64 = 0.0;
    for i in 0..opts.grid {
        let s = -t_glue + 2.0 * t_glue * i as f64 / (opts.grid - 1) as f64;
        let p = path(s)?;
        let pp = path(s + opts.ds)?;
        let pm = path(s - opts.ds)?;
        let dp = model.displacement(&pm, &pp) / (2.0 * opts.ds);
        let g = gradient(field, model, &p)?.components;
        residual = residual.max(model.norm(&(dp + g)));
        samples.push((s, p));
    }
    Ok(Preglued { samples, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critical::{find_critical_points, SearchOptions};
    use crate::fields::FieldExpr;
    use nalgebra::dvector;

    #[test]
    fn equator_to_south_pole() {
        let m = ManifoldModel::sphere();
        let f = ScalarField::new("height", FieldExpr::Coordinate(2));
        let crits = find_critical_points(&f, &m, &SearchOptions::default()).unwrap().points;
        let line = integrate(&m, &f, &dvector![1.0, 0.0, 0.0], &crits, &FlowOptions::default()).unwrap();
        assert_eq!(line.target.as_deref(), Some("c1"));
        assert!((line.energy - 1.0).abs() < tau_energy(1.0));
        assert!(line.monotone_violation <= TAU_MONO);
    }

    #[test]
    fn start_at_critical_point_is_constant() {
        let m = ManifoldModel::sphere();
        let f = ScalarField::new("height", FieldExpr::Coordinate(2));
        let crits = find_critical_points(&f, &m, &SearchOptions::default()).unwrap().points;
        let line = integrate(&m, &f, &crits[0].location, &crits, &FlowOptions::default()).unwrap();
        assert_eq!(line.samples.len(), 1);
        assert_eq!(line.energy, 0.0);
        assert_eq!(line.target.as_deref(), Some("c0"));
    }

    #[test]
    fn smoothstep_is_monotone_c2() {
        let mut prev = 0.0;
        for i in 0..=1000 {
            let t = i as f64 / 1000.0;
            let v = smoothstep(t);
            assert!(v >= prev);
            prev = v;
        }
        assert_eq!(smoothstep(-1.0), 0.0);
        assert_eq!(smoothstep(2.0), 1.0);
        assert!((smoothstep_derivative(0.5) - 1.875).abs() < 1e-15);
    }

    #[test]
    fn short_tail_is_rejected() {
        let m = ManifoldModel::sphere();
        let f = ScalarField::new("height", FieldExpr::Coordinate(2));
        let crits = find_critical_points(&f, &m, &SearchOptions::default()).unwrap().points;
        let mut line = integrate(&m, &f, &dvector![1.0, 0.0, 0.0], &crits, &FlowOptions::default()).unwrap();
        line.samples.truncate(3);
        assert!(matches!(
            decay_rate(&line, &m, &crits[1], 1.0),
            Err(MorseError::InsufficientTail { .. })
        ));
    }
}
