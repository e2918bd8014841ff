//! Continuation maps: time-dependent gradient flow between two scenes.
//!
//! Counting for equal indices μ:
//! * μ = 0: the trajectory leaving c₁ itself; it must settle in an f₊-minimum.
//! * μ = dim: run backwards from c₂; it must come from an f₋-maximum.
//! * μ = 1 (surfaces): the unstable curve of c₁ is advected forward and the stable curve of c₂
//!   backward to the middle of the window, as polylines remeshed at every step; lines are
//!   crossings of the two curves. Shooting single trajectories through the window is hopeless:
//!   near a moving saddle the parameter sensitivity is e^{λ·2T}.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{solve_span, BitMatrix, BitVec, ChainComplexGF2, HomologyResult, SpectralReport};
use crate::critical::{find_critical_points, CriticalPoint, SearchOptions, TAU_VAL};
use crate::error::{MorseError, Result};
use crate::fields::ScalarField;
use crate::flow::{
    integrate, run_flow, smoothstep, tau_energy, FlowField, FlowOptions,
};
use crate::geometry::{ManifoldModel, Metric, Point};
use crate::moduli::{
    CountMethod, ModuliCount, ModuliOptions, BISECT_DEPTH, DELTA,
};
use crate::pipeline::{analyze, SceneAnalysis};

pub const T_DEFAULT: f64 = 2.0;
/// Longest f₋-flow time used to parametrize an unstable branch before the homotopy window.
pub const S_PAD: f64 = 10.0;
/// Half distance between the two windows of a glued homotopy.
pub const R_GLUE: f64 = 6.0;
/// Odd, so the grid contains p = 0.
pub const N_CONT: usize = 129;
/// Closest approach to c₁ on the branch parametrization.
pub const BRANCH_FLOOR: f64 = 1e-12;
pub const SUP_SAMPLES: usize = 100_000;
pub const SUP_MARGIN: f64 = 0.01;
/// Maximum slope of the degree-5 smoothstep on [0, 1].
pub const SMOOTHSTEP_MAX_SLOPE: f64 = 15.0 / 8.0;
/// Largest chord stretch factor over one advection step.
pub const STRETCH: f64 = 2.0;
pub const ADVECT_DT: f64 = 0.05;
/// Chord length bounds of an advected continuation curve.
pub const CHORD_MAX: f64 = 0.01;
pub const CHORD_MIN: f64 = 0.0025;
pub const FILL_DEPTH: usize = 30;
pub const MAX_NODES: usize = 200_000;
const VERTEX_EPS: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct Scene {
    pub model: ManifoldModel,
    pub field: ScalarField,
}

impl Scene {
    pub fn new(model: ManifoldModel, field: ScalarField) -> Self {
        Self { model, field }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HomotopyMode {
    ConvexCombination,
    Glued,
}

/// f_s = f₀ + Σ_i β((s - c_i + T)/2T)(f_i - f_{i-1}); metrics blended the same way.
#[derive(Debug, Clone)]
pub struct Homotopy {
    pub scenes: Vec<Scene>,
    pub centers: Vec<f64>,
    pub half_width: f64,
    pub mode: HomotopyMode,
}

impl Homotopy {
    pub fn convex(minus: Scene, plus: Scene, t: f64) -> Result<Self> {
        Self::build(vec![minus, plus], vec![0.0], t, HomotopyMode::ConvexCombination)
    }

    pub fn trivial(scene: Scene) -> Result<Self> {
        Self::convex(scene.clone(), scene, T_DEFAULT)
    }

    /// α → β around s = -r, then β → γ around s = +r.
    pub fn glued(a: Scene, b: Scene, c: Scene, t: f64, r: f64) -> Result<Self> {
        Self::build(vec![a, b, c], vec![-r, r], t, HomotopyMode::Glued)
    }

    fn build(scenes: Vec<Scene>, centers: Vec<f64>, t: f64, mode: HomotopyMode) -> Result<Self> {
        if t <= 0.0 {
            return Err(MorseError::InvalidInput("homotopy half-width must be positive".into()));
        }
        if centers.windows(2).any(|w| w[1] - w[0] < 2.0 * t) {
            return Err(MorseError::InvalidInput("homotopy windows overlap".into()));
        }
        let k = &scenes[0].model.kind;
        if scenes.iter().any(|s| &s.model.kind != k) {
            return Err(MorseError::InvalidInput("homotopy scenes live on different manifolds".into()));
        }
        let explicit = scenes.iter().any(|s| matches!(s.model.metric, Metric::Explicit(_)));
        if explicit && scenes[0].model.constraint().is_some() {
            return Err(MorseError::InvalidInput("metric blending needs a flat model".into()));
        }
        Ok(Self { scenes, centers, half_width: t, mode })
    }

    pub fn minus(&self) -> &Scene {
        &self.scenes[0]
    }

    pub fn plus(&self) -> &Scene {
        self.scenes.last().unwrap()
    }

    /// Start of the first window.
    pub fn s_lo(&self) -> f64 {
        self.centers[0] - self.half_width
    }

    /// End of the last window.
    pub fn s_hi(&self) -> f64 {
        self.centers.last().unwrap() + self.half_width
    }

    pub fn weights(&self, s: f64) -> Vec<f64> {
        let t = self.half_width;
        let b: Vec<f64> = self.centers.iter().map(|c| smoothstep((s - c + t) / (2.0 * t))).collect();
        let k = b.len();
        let mut w = Vec::with_capacity(k + 1);
        w.push(1.0 - b[0]);
        for i in 0..k {
            w.push(b[i] - b.get(i + 1).copied().unwrap_or(0.0));
        }
        w
    }

    pub fn value(&self, s: f64, x: &Point) -> f64 {
        self.weights(s).iter().zip(&self.scenes).filter(|(w, _)| **w != 0.0).map(|(w, sc)| w * sc.field.value(x)).sum()
    }

    fn blended_metric(&self, w: &[f64]) -> Option<DMatrix<f64>> {
        if !self.scenes.iter().any(|s| matches!(s.model.metric, Metric::Explicit(_))) {
            return None;
        }
        let n = self.scenes[0].model.tangent_dim();
        let mut g = DMatrix::zeros(n, n);
        for (wi, sc) in w.iter().zip(&self.scenes) {
            if *wi == 0.0 {
                continue;
            }
            match &sc.model.metric {
                Metric::Explicit(m) => g += &m.g * *wi,
                _ => g += DMatrix::<f64>::identity(n, n) * *wi,
            }
        }
        Some(g)
    }
}

/// -∇_{g_s} f_s.
pub struct HomotopyField<'a> {
    pub h: &'a Homotopy,
}

impl FlowField for HomotopyField<'_> {
    fn model(&self) -> &ManifoldModel {
        &self.h.scenes[0].model
    }

    fn velocity(&self, s: f64, x: &Point) -> Result<DVector<f64>> {
        let w = self.h.weights(s);
        let mut df = DVector::zeros(x.len());
        for (wi, sc) in w.iter().zip(&self.h.scenes) {
            if *wi != 0.0 {
                df += sc.field.ambient_gradient(x) * *wi;
            }
        }
        match self.h.blended_metric(&w) {
            Some(g) => {
                let chol = nalgebra::Cholesky::new(g).ok_or_else(|| MorseError::InvalidInput("blended metric not SPD".into()))?;
                Ok(-chol.solve(&df))
            }
            None => Ok(-self.model().tangent_project(x, &df)?.components),
        }
    }

    fn inner(&self, s: f64, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        match self.h.blended_metric(&self.h.weights(s)) {
            Some(g) => (u.transpose() * g * v)[(0, 0)],
            None => self.model().inner(u, v),
        }
    }
}

/// Time reversal u = -s of a field.
struct Reversed<'a, F: FlowField> {
    inner: &'a F,
}

impl<F: FlowField> FlowField for Reversed<'_, F> {
    fn model(&self) -> &ManifoldModel {
        self.inner.model()
    }
    fn velocity(&self, u: f64, x: &Point) -> Result<DVector<f64>> {
        Ok(-self.inner.velocity(-u, x)?)
    }
    fn inner(&self, u: f64, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        self.inner.inner(-u, a, b)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ContinuationOptions {
    pub n_scan: usize,
    pub delta: f64,
    pub depth: usize,
    pub flow: FlowOptions,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self { n_scan: N_CONT, delta: DELTA, depth: BISECT_DEPTH, flow: FlowOptions::default() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuationWitness {
    pub source: String,
    pub target: String,
    /// Branch parameter (μ = 1) or 0.
    pub param: f64,
    pub source_value: f64,
    pub target_value: f64,
    pub energy: f64,
    pub min_distance: f64,
}

#[derive(Debug, Clone)]
pub struct ContinuationCounts {
    pub counts: Vec<ModuliCount>,
    pub witnesses: Vec<ContinuationWitness>,
}

/// One half of a continuation line: the unstable curve of an index-1 point of f₋ carried
/// forward, or the stable curve of an index-1 point of f₊ carried backward (time t = -s),
/// both up to the matching time in the middle of the homotopy.
struct Half<'a> {
    h: &'a Homotopy,
    crit: &'a CriticalPoint,
    backward: bool,
    dir: DVector<f64>,
    lam: f64,
    dt: f64,
    opts: &'a ContinuationOptions,
}

#[derive(Debug, Clone)]
struct Node {
    x: Point,
    /// Energy of the piece from the critical point to x.
    energy: f64,
    /// The critical point itself, never thinned out.
    anchor: bool,
}

impl<'a> Half<'a> {
    fn new(h: &'a Homotopy, crit: &'a CriticalPoint, backward: bool, lam_max: f64, opts: &'a ContinuationOptions) -> Self {
        let k = usize::from(backward);
        Self {
            h,
            crit,
            backward,
            dir: crit.eigenvectors[k].clone(),
            lam: crit.hessian_eigenvalues[k].abs(),
            dt: (STRETCH.ln() / lam_max).min(ADVECT_DT),
            opts,
        }
    }

    fn model(&self) -> &ManifoldModel {
        &self.h.minus().model
    }

    /// Start of the homotopy window in own time.
    fn t_window(&self) -> f64 {
        if self.backward {
            -self.h.s_hi()
        } else {
            self.h.s_lo()
        }
    }

    fn t_match(&self) -> f64 {
        let s = 0.5 * (self.h.s_lo() + self.h.s_hi());
        if self.backward {
            -s
        } else {
            s
        }
    }

    /// Point of the autonomous invariant curve at the window start, p ∈ [-1, 1], p = 0 being the
    /// critical point; |p| is proportional to flow time from offset `BRANCH_FLOOR`.
    fn branch(&self, p: f64) -> Result<Node> {
        let c = self.crit;
        let tw = self.t_window();
        let model = self.model();
        if p == 0.0 {
            return Ok(Node { x: c.location.clone(), energy: 0.0, anchor: true });
        }
        let e = &self.dir * p.signum();
        let delta = self.opts.delta;
        let v_lo = (BRANCH_FLOOR / delta).ln() / self.lam;
        let v = v_lo + p.abs() * (S_PAD - v_lo);
        let (t0, x0) = if v >= 0.0 {
            (tw - v, model.project(&(&c.location + &e * delta))?)
        } else {
            (tw, model.project(&(&c.location + e * (delta * (self.lam * v).exp())))?)
        };
        let scene = if self.backward { self.h.plus() } else { self.h.minus() };
        let head = (c.value - scene.field.value(&x0)).abs();
        let (x, e) = self.advance(t0, &x0, tw)?;
        Ok(Node { x, energy: head + e, anchor: false })
    }

    /// Flow in own time from t0 to t1 (no-op when t1 ≤ t0), returning the state and energy spent.
    fn advance(&self, t0: f64, x0: &Point, t1: f64) -> Result<(Point, f64)> {
        if t1 <= t0 {
            return Ok((x0.clone(), 0.0));
        }
        let f = HomotopyField { h: self.h };
        let mut io = self.opts.flow.integrator;
        io.h_init = io.h_init.max(0.5 * self.dt);
        let end = if self.backward {
            run_flow(&Reversed { inner: &f }, x0, t0, t1, &io, &mut |_, _, _| Ok(false))?
        } else {
            run_flow(&f, x0, t0, t1, &io, &mut |_, _, _| Ok(false))?
        };
        Ok((end.x, end.energy))
    }

    /// Potential part of the energy at own time t: the value drop from the critical point.
    fn potential(&self, t: f64, x: &Point) -> f64 {
        if self.backward {
            self.h.value(-t, x) - self.crit.value
        } else {
            self.crit.value - self.h.value(t, x)
        }
    }

    fn step(&self, n: &Node, t0: f64, t1: f64) -> Result<Node> {
        let (x, e) = self.advance(t0, &n.x, t1)?;
        Ok(Node { x, energy: n.energy + e, anchor: n.anchor })
    }

    /// Pushes the nodes strictly after `a1` up to `b1`, bisecting chords longer than `CHORD_MAX`
    /// at the previous time so inserted nodes lie on the curve. Only the non-potential part of
    /// the energy is interpolated; the potential part is quadratic near a saddle.
    #[allow(clippy::too_many_arguments)]
    fn fill(&self, a0: &Node, b0: &Node, a1: &Node, b1: &Node, t0: f64, t1: f64, depth: usize, out: &mut Vec<Node>) -> Result<()> {
        let model = self.model();
        if depth < FILL_DEPTH && model.distance(&a1.x, &b1.x) > CHORD_MAX {
            let x = model.project(&(&a0.x + model.displacement(&a0.x, &b0.x) * 0.5))?;
            let rest = 0.5 * (a0.energy - self.potential(t0, &a0.x) + b0.energy - self.potential(t0, &b0.x));
            let m0 = Node { energy: self.potential(t0, &x) + rest, x, anchor: false };
            let m1 = self.step(&m0, t0, t1)?;
            self.fill(a0, &m0, a1, &m1, t0, t1, depth + 1, out)?;
            return self.fill(&m0, b0, &m1, b1, t0, t1, depth + 1, out);
        }
        out.push(b1.clone());
        Ok(())
    }

    /// The curve at the matching time as a polyline.
    fn curve(&self) -> Result<Vec<Node>> {
        let n = self.opts.n_scan | 1;
        let grid: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect();
        let mut first: Vec<(f64, Node)> =
            grid.par_iter().map(|&p| self.branch(p).map(|n| (p, n))).collect::<Result<_>>()?;
        let model = self.model();
        for _ in 0..FILL_DEPTH {
            let mids: Vec<f64> = first
                .windows(2)
                .filter(|w| model.distance(&w[0].1.x, &w[1].1.x) > CHORD_MAX && w[1].0 - w[0].0 > 1e-15)
                .map(|w| 0.5 * (w[0].0 + w[1].0))
                .collect();
            if mids.is_empty() {
                break;
            }
            let extra: Vec<(f64, Node)> = mids.par_iter().map(|&p| self.branch(p).map(|n| (p, n))).collect::<Result<_>>()?;
            first.extend(extra);
            first.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
        let first: Vec<Node> = first.into_iter().map(|(_, n)| n).collect();
        let mut nodes = self.thin(first);
        let tm = self.t_match();

        let mut t = self.t_window();
        while t < tm {
            let t1 = (t + self.dt).min(tm);
            let moved: Vec<Node> = nodes.par_iter().map(|n| self.step(n, t, t1)).collect::<Result<_>>()?;
            let mut out = vec![moved[0].clone()];
            for i in 0..nodes.len() - 1 {
                self.fill(&nodes[i], &nodes[i + 1], &moved[i], &moved[i + 1], t, t1, 0, &mut out)?;
            }
            if out.len() > MAX_NODES {
                return Err(MorseError::NonGeneric(format!("continuation curve of {} stretches beyond {MAX_NODES} nodes", self.crit.label)));
            }
            nodes = self.thin(out);
            t = t1;
        }
        Ok(nodes)
    }

    /// Drops interior nodes closer than `CHORD_MIN` to the last kept one.
    fn thin(&self, nodes: Vec<Node>) -> Vec<Node> {
        let model = self.model();
        let last = nodes.len() - 1;
        let mut out: Vec<Node> = Vec::with_capacity(nodes.len());
        for (i, n) in nodes.into_iter().enumerate() {
            let keep = i == 0 || i == last || n.anchor || model.distance(&out.last().unwrap().x, &n.x) >= CHORD_MIN;
            if keep {
                out.push(n);
            }
        }
        out
    }
}

/// Crossings of two polylines in the tangent chart at the first chord, half-open on both chords;
/// returns chord indices and chord parameters.
fn crossings(model: &ManifoldModel, u: &[Node], s: &[Node]) -> Result<Vec<(usize, f64, usize, f64)>> {
    let mut out = Vec::new();
    let chords: Vec<(DVector<f64>, f64)> = s
        .windows(2)
        .map(|w| {
            let d = model.displacement(&w[0].x, &w[1].x);
            let n = d.norm();
            (d, n)
        })
        .collect();
    for i in 0..u.len() - 1 {
        let du = model.displacement(&u[i].x, &u[i + 1].x);
        let nu = du.norm();
        let mut frame = None;
        for (j, (ds, ns)) in chords.iter().enumerate() {
            let c0 = model.displacement(&u[i].x, &s[j].x);
            if c0.norm() > nu + ns + 1e-12 {
                continue;
            }
            if frame.is_none() {
                frame = Some(model.tangent_frame(&u[i].x)?.transpose());
            }
            let ft = frame.as_ref().unwrap();
            let (a, c, e) = (ft * &du, ft * &c0, ft * ds);
            let cross = |p: &DVector<f64>, q: &DVector<f64>| p[0] * q[1] - p[1] * q[0];
            let den = cross(&a, &e);
            if den == 0.0 {
                continue;
            }
            let t = cross(&c, &e) / den;
            let w = cross(&c, &a) / den;
            // shifted half-open intervals: a crossing on a shared vertex belongs to one chord only
            let inside = |v: f64| (-VERTEX_EPS..1.0 - VERTEX_EPS).contains(&v);
            if inside(t) && inside(w) {
                out.push((i, t.max(0.0), j, w.max(0.0)));
            }
        }
    }
    Ok(out)
}

fn dim_of(h: &Homotopy) -> usize {
    h.minus().model.tangent_dim()
}

/// Counts of continuation lines for every equal-index pair.
pub fn continuation_counts<'a>(
    h: &'a Homotopy,
    crits_minus: &'a [CriticalPoint],
    crits_plus: &'a [CriticalPoint],
    opts: &'a ContinuationOptions,
) -> Result<ContinuationCounts> {
    for c in crits_minus.iter().chain(crits_plus) {
        if c.degenerate {
            return Err(MorseError::DegenerateCritical { label: c.label.clone() });
        }
    }
    let dim = dim_of(h);
    let mut counts = Vec::new();
    let mut witnesses = Vec::new();
    let push = |src: usize, tgt: usize, n: usize, counts: &mut Vec<ModuliCount>| {
        counts.push(ModuliCount::new(&crits_minus[src].label, &crits_plus[tgt].label, n, CountMethod::ShootingBisection));
    };
    let (minus, plus) = (h.minus(), h.plus());
    for mu in 0..=dim {
        let srcs: Vec<usize> = (0..crits_minus.len()).filter(|&i| crits_minus[i].morse_index == mu).collect();
        let tgts: Vec<usize> = (0..crits_plus.len()).filter(|&i| crits_plus[i].morse_index == mu).collect();
        if srcs.is_empty() || tgts.is_empty() {
            for &s in &srcs {
                for &t in &tgts {
                    push(s, t, 0, &mut counts);
                }
            }
            continue;
        }
        if mu == 0 {
            for &s in &srcs {
                let hf = HomotopyField { h };
                let moved = run_flow(&hf, &crits_minus[s].location, h.s_lo(), h.s_hi(), &opts.flow.integrator, &mut |_, _, _| Ok(false))?;
                let (x, e_hom) = (moved.x, moved.energy);
                let line = integrate(&plus.model, &plus.field, &x, crits_plus, &opts.flow)?;
                let end = line
                    .target
                    .as_ref()
                    .and_then(|l| crits_plus.iter().position(|c| &c.label == l))
                    .ok_or_else(|| MorseError::NonGeneric(format!("unresolved continuation from {}", crits_minus[s].label)))?;
                if crits_plus[end].morse_index != 0 {
                    return Err(MorseError::NonGeneric(format!(
                        "continuation from {} settles at {} of index {}",
                        crits_minus[s].label, crits_plus[end].label, crits_plus[end].morse_index
                    )));
                }
                for &t in &tgts {
                    push(s, t, usize::from(t == end), &mut counts);
                }
                witnesses.push(ContinuationWitness {
                    source: crits_minus[s].label.clone(),
                    target: crits_plus[end].label.clone(),
                    param: 0.0,
                    source_value: crits_minus[s].value,
                    target_value: crits_plus[end].value,
                    energy: e_hom + line.energy + (plus.field.value(line.end()) - crits_plus[end].value),
                    min_distance: line.min_distance_to(&plus.model, &crits_plus[end].location),
                });
            }
        } else if mu == dim {
            let mut hits = vec![vec![0usize; crits_plus.len()]; crits_minus.len()];
            for &t in &tgts {
                let f = HomotopyField { h };
                let rev = Reversed { inner: &f };
                let end =
                    run_flow(&rev, &crits_plus[t].location, -h.s_hi(), -h.s_lo(), &opts.flow.integrator, &mut |_, _, _| Ok(false))?;
                let mut fo = opts.flow;
                fo.backward = true;
                let line = integrate(&minus.model, &minus.field, &end.x, crits_minus, &fo)?;
                let src = line
                    .target
                    .as_ref()
                    .and_then(|l| crits_minus.iter().position(|c| &c.label == l))
                    .ok_or_else(|| MorseError::NonGeneric(format!("unresolved backward continuation from {}", crits_plus[t].label)))?;
                if crits_minus[src].morse_index != dim {
                    return Err(MorseError::NonGeneric(format!(
                        "backward continuation from {} settles at {} of index {}",
                        crits_plus[t].label, crits_minus[src].label, crits_minus[src].morse_index
                    )));
                }
                hits[src][t] += 1;
                witnesses.push(ContinuationWitness {
                    source: crits_minus[src].label.clone(),
                    target: crits_plus[t].label.clone(),
                    param: 0.0,
                    source_value: crits_minus[src].value,
                    target_value: crits_plus[t].value,
                    energy: end.energy + line.energy + (crits_minus[src].value - minus.field.value(line.end())),
                    min_distance: line.min_distance_to(&minus.model, &crits_minus[src].location),
                });
            }
            for &s in &srcs {
                for &t in &tgts {
                    push(s, t, hits[s][t], &mut counts);
                }
            }
        } else if mu == 1 && dim == 2 {
            let lam_max = crits_minus
                .iter()
                .chain(crits_plus)
                .flat_map(|c| c.hessian_eigenvalues.iter().map(|v| v.abs()))
                .fold(0.0, f64::max);
            let curves = |crits: &'a [CriticalPoint], idx: &[usize], backward: bool| -> Result<Vec<(Half<'a>, Vec<Node>)>> {
                idx.iter()
                    .map(|&c| {
                        let half = Half::new(h, &crits[c], backward, lam_max, opts);
                        half.curve().map(|cv| (half, cv))
                    })
                    .collect()
            };
            let ups = curves(crits_minus, &srcs, false)?;
            let downs = curves(crits_plus, &tgts, true)?;
            // E = f₋(c₁) - f₊(c₂) + the interpolated non-potential parts of both halves.
            let rest = |half: &Half, a: &Node, b: &Node, t: f64| {
                let tm = half.t_match();
                let (ra, rb) = (a.energy - half.potential(tm, &a.x), b.energy - half.potential(tm, &b.x));
                ra + (rb - ra) * t
            };
            for (a, &src) in srcs.iter().enumerate() {
                for (b, &tgt) in tgts.iter().enumerate() {
                    let u = &ups[a].1;
                    let sc = &downs[b].1;
                    let found = crossings(&minus.model, u, sc)?;
                    push(src, tgt, found.len(), &mut counts);
                    for &(i, t, j, w) in &found {
                        let chord = minus.model.distance(&u[i].x, &u[i + 1].x).max(minus.model.distance(&sc[j].x, &sc[j + 1].x));
                        witnesses.push(ContinuationWitness {
                            source: crits_minus[src].label.clone(),
                            target: crits_plus[tgt].label.clone(),
                            param: t,
                            source_value: crits_minus[src].value,
                            target_value: crits_plus[tgt].value,
                            energy: crits_minus[src].value - crits_plus[tgt].value
                                + rest(&ups[a].0, &u[i], &u[i + 1], t)
                                + rest(&downs[b].0, &sc[j], &sc[j + 1], w),
                            min_distance: chord,
                        });
                    }
                }
            }
        } else {
            return Err(MorseError::InvalidInput(format!("continuation in index {mu} of dimension {dim} is not supported")));
        }
    }
    Ok(ContinuationCounts { counts, witnesses })
}

/// Count for one pair of equal index.
pub fn count_continuation_lines(
    h: &Homotopy,
    crits_minus: &[CriticalPoint],
    crits_plus: &[CriticalPoint],
    c1: &str,
    c2: &str,
    opts: &ContinuationOptions,
) -> Result<ModuliCount> {
    let a = crits_minus.iter().find(|c| c.label == c1).ok_or_else(|| MorseError::InvalidInput(format!("unknown {c1}")))?;
    let b = crits_plus.iter().find(|c| c.label == c2).ok_or_else(|| MorseError::InvalidInput(format!("unknown {c2}")))?;
    if a.morse_index != b.morse_index {
        return Err(MorseError::InvalidInput("continuation lines need equal indices".into()));
    }
    continuation_counts(h, crits_minus, crits_plus, opts)?
        .counts
        .into_iter()
        .find(|m| m.source == c1 && m.target == c2)
        .ok_or_else(|| MorseError::MissingPair { source_label: c1.into(), target: c2.into() })
}

/// φ_k : CM_k(f₋) → CM_k(f₊); rows index f₊ generators, columns f₋ generators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainMapGF2 {
    pub matrices: Vec<BitMatrix>,
}

impl ChainMapGF2 {
    pub fn is_identity(&self) -> bool {
        self.matrices.iter().all(|m| {
            m.rows == m.cols() && (0..m.rows).all(|i| (0..m.cols()).all(|j| m.get(i, j) == (i == j)))
        })
    }

    pub fn to_rows(&self) -> Vec<Vec<Vec<u8>>> {
        self.matrices.iter().map(BitMatrix::to_rows).collect()
    }
}

pub fn chain_map(minus: &ChainComplexGF2, plus: &ChainComplexGF2, counts: &[ModuliCount]) -> Result<ChainMapGF2> {
    let top = minus.generators.len().max(plus.generators.len());
    let mut mats = Vec::with_capacity(top);
    for k in 0..top {
        let (gm, gp) = (minus.generators.get(k).cloned().unwrap_or_default(), plus.generators.get(k).cloned().unwrap_or_default());
        let mut m = BitMatrix::zeros(gp.len(), gm.len());
        for (j, a) in gm.iter().enumerate() {
            for (i, b) in gp.iter().enumerate() {
                let n = counts
                    .iter()
                    .find(|c| c.source == a.label && c.target == b.label)
                    .ok_or_else(|| MorseError::MissingPair { source_label: a.label.clone(), target: b.label.clone() })?
                    .count;
                if n % 2 == 1 {
                    m.columns[j].set(i, true);
                }
            }
        }
        mats.push(m);
    }
    let phi = ChainMapGF2 { matrices: mats };
    verify_chain_identity(minus, plus, &phi)?;
    Ok(phi)
}

/// ∂⁺ φ_k = φ_{k-1} ∂⁻_k in every degree.
pub fn verify_chain_identity(minus: &ChainComplexGF2, plus: &ChainComplexGF2, phi: &ChainMapGF2) -> Result<()> {
    for k in 1..phi.matrices.len() {
        let lhs = plus.boundary_map(k).mul(&phi.matrices[k]);
        let rhs = phi.matrices[k - 1].mul(&minus.boundary_map(k));
        if lhs != rhs {
            return Err(MorseError::ChainIdentityFailure { degree: k });
        }
    }
    Ok(())
}

/// Map on homology in the representative bases; rows index H(f₊) basis, columns H(f₋) basis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InducedMap {
    pub matrices: Vec<BitMatrix>,
    pub iso: bool,
}

impl InducedMap {
    /// `self ∘ first`.
    pub fn compose(&self, first: &InducedMap) -> InducedMap {
        let matrices: Vec<BitMatrix> = self.matrices.iter().zip(&first.matrices).map(|(a, b)| a.mul(b)).collect();
        let iso = matrices.iter().all(|m| m.rows == m.cols() && m.rank() == m.rows);
        InducedMap { matrices, iso }
    }

    pub fn is_identity(&self) -> bool {
        ChainMapGF2 { matrices: self.matrices.clone() }.is_identity()
    }

    pub fn apply(&self, k: usize, v: &BitVec) -> BitVec {
        self.matrices[k].apply(v)
    }
}

pub fn induced_map(
    phi: &ChainMapGF2,
    _minus: &ChainComplexGF2,
    plus: &ChainComplexGF2,
    h_minus: &HomologyResult,
    h_plus: &HomologyResult,
) -> Result<InducedMap> {
    let top = h_minus.betti.len().max(h_plus.betti.len());
    let mut mats = Vec::with_capacity(top);
    for k in 0..top {
        let reps_m = h_minus.generator_representatives.get(k).cloned().unwrap_or_default();
        let reps_p = h_plus.generator_representatives.get(k).cloned().unwrap_or_default();
        let mut basis = reps_p.clone();
        basis.extend(plus.boundary_map(k + 1).image_basis());
        let mut m = BitMatrix::zeros(reps_p.len(), reps_m.len());
        for (j, z) in reps_m.iter().enumerate() {
            let w = phi.matrices.get(k).map_or_else(|| BitVec::zeros(plus.rank_in(k)), |p| p.apply(z));
            let c = solve_span(&basis, &w).ok_or(MorseError::ChainIdentityFailure { degree: k })?;
            for i in 0..reps_p.len() {
                if c.get(i) {
                    m.columns[j].set(i, true);
                }
            }
        }
        mats.push(m);
    }
    let iso = mats.iter().all(|m| m.rows == m.cols() && m.rank() == m.rows);
    Ok(InducedMap { matrices: mats, iso })
}

/// Sampled sup-norm of f - g (`sampled`) and the same with the safety margin (`bound`).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SupEstimate {
    pub sampled: f64,
    pub bound: f64,
    /// max(f - g) over the samples, with margin.
    pub max_difference: f64,
}

pub fn sample_points(model: &ManifoldModel) -> Vec<Point> {
    model.seeds(SUP_SAMPLES)
}

pub fn sup_estimate_on(points: &[Point], f: &ScalarField, g: &ScalarField) -> SupEstimate {
    let (mut sup, mut mx) = (0.0f64, f64::NEG_INFINITY);
    for p in points {
        let d = f.value(p) - g.value(p);
        sup = sup.max(d.abs());
        mx = mx.max(d);
    }
    SupEstimate { sampled: sup, bound: sup * (1.0 + SUP_MARGIN), max_difference: mx + SUP_MARGIN * sup }
}

pub fn sup_estimate(model: &ManifoldModel, f: &ScalarField, g: &ScalarField) -> SupEstimate {
    sup_estimate_on(&sample_points(model), f, g)
}

fn sup_abs(points: &[Point], f: &ScalarField) -> f64 {
    points.iter().map(|p| f.value(p).abs()).fold(0.0, f64::max) * (1.0 + SUP_MARGIN)
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyBoundReport {
    pub checked: usize,
    pub sharp_checked: bool,
    pub min_sharp_slack: f64,
    pub min_energy_slack: f64,
}

/// Action estimate f₊(c₂) ≤ f₋(c₁) + max(f₊ - f₋) (convex mode) and the crude energy bound.
pub fn energy_bound_check(h: &Homotopy, witnesses: &[ContinuationWitness]) -> Result<EnergyBoundReport> {
    let pts = sample_points(&h.minus().model);
    let (fm, fp) = (&h.minus().field, &h.plus().field);
    let total = sup_estimate_on(&pts, fp, fm);
    let max_step = h
        .scenes
        .windows(2)
        .map(|w| sup_estimate_on(&pts, &w[1].field, &w[0].field).bound)
        .fold(0.0, f64::max);
    let window = h.s_hi() - h.s_lo();
    let ds_sup = SMOOTHSTEP_MAX_SLOPE / (2.0 * h.half_width) * max_step;
    let e_bound = sup_abs(&pts, fm) + sup_abs(&pts, fp) + window * ds_sup;
    let sharp = h.mode == HomotopyMode::ConvexCombination;
    let mut rep = EnergyBoundReport { checked: 0, sharp_checked: sharp, min_sharp_slack: f64::INFINITY, min_energy_slack: f64::INFINITY };
    for w in witnesses {
        let tau = tau_energy(w.energy);
        if sharp {
            let slack = w.source_value + total.max_difference + tau - w.target_value;
            if slack < 0.0 {
                return Err(MorseError::BoundViolation {
                    detail: format!("{} -> {}: f+(c2) = {} exceeds f-(c1) + max(f+ - f-) by {}", w.source, w.target, w.target_value, -slack),
                });
            }
            rep.min_sharp_slack = rep.min_sharp_slack.min(slack);
        }
        let slack = e_bound + tau - w.energy;
        if slack < 0.0 || w.energy < -tau {
            return Err(MorseError::BoundViolation {
                detail: format!("{} -> {}: energy {} outside [0, {}]", w.source, w.target, w.energy, e_bound),
            });
        }
        rep.min_energy_slack = rep.min_energy_slack.min(slack);
        rep.checked += 1;
    }
    Ok(rep)
}

#[derive(Debug, Clone, Serialize)]
pub struct LipschitzEntry {
    pub degree: usize,
    pub class: BitVec,
    pub image: BitVec,
    pub sigma_minus: f64,
    pub sigma_plus: f64,
    pub difference: f64,
    pub slack: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LipschitzReport {
    pub c0: SupEstimate,
    pub entries: Vec<LipschitzEntry>,
    pub ok: bool,
}

fn sigma_of(report: &SpectralReport, k: usize, coords: &BitVec) -> Option<f64> {
    report.classes.iter().find(|c| c.degree == k && &c.coordinates == coords).map(|c| c.spectral.sigma)
}

/// |σ₋(α) - σ₊(Φα)| ≤ ‖f₊ - f₋‖_{C⁰} for every class of the minus scene.
pub fn spectral_lipschitz_check(
    model: &ManifoldModel,
    f_minus: &ScalarField,
    f_plus: &ScalarField,
    phi: &InducedMap,
    rep_minus: &SpectralReport,
    rep_plus: &SpectralReport,
) -> Result<LipschitzReport> {
    if !phi.iso {
        return Err(MorseError::InvalidInput("continuation map is not an isomorphism".into()));
    }
    let c0 = sup_estimate(model, f_plus, f_minus);
    let mut entries = Vec::new();
    for c in &rep_minus.classes {
        let image = phi.apply(c.degree, &c.coordinates);
        let sp = sigma_of(rep_plus, c.degree, &image)
            .ok_or_else(|| MorseError::InvalidInput(format!("no class for the image in degree {}", c.degree)))?;
        let difference = (c.spectral.sigma - sp).abs();
        let slack = c0.bound + TAU_VAL - difference;
        entries.push(LipschitzEntry {
            degree: c.degree,
            class: c.coordinates.clone(),
            image,
            sigma_minus: c.spectral.sigma,
            sigma_plus: sp,
            difference,
            slack,
            ok: slack >= 0.0,
        });
    }
    let ok = entries.iter().all(|e| e.ok);
    Ok(LipschitzReport { c0, entries, ok })
}

/// Everything needed to transport classes along a homotopy.
#[derive(Debug, Clone)]
pub struct Continuation {
    pub counts: ContinuationCounts,
    pub chain: ChainMapGF2,
    pub induced: InducedMap,
}

pub fn continue_scenes(h: &Homotopy, minus: &SceneAnalysis, plus: &SceneAnalysis, opts: &ContinuationOptions) -> Result<Continuation> {
    let counts = continuation_counts(h, &minus.crits, &plus.crits, opts)?;
    let chain = chain_map(&minus.complex, &plus.complex, &counts.counts)?;
    let induced = induced_map(&chain, &minus.complex, &plus.complex, &minus.homology, &plus.homology)?;
    Ok(Continuation { counts, chain, induced })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ExtendOptions {
    pub search: SearchOptions,
    pub moduli: ModuliOptions,
    pub continuation: ContinuationOptions,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtendedClass {
    pub degree: usize,
    /// Coordinates on the first member's homology basis.
    pub coordinates: BitVec,
    pub values: Vec<f64>,
    pub increments: Vec<f64>,
    pub bounds: Vec<f64>,
    pub limit: f64,
    pub nearest_critical_value: f64,
    pub distance_to_spectrum: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtensionReport {
    /// Sampled ‖f_j - f‖_{C⁰}.
    pub distances: Vec<f64>,
    pub classes: Vec<ExtendedClass>,
    /// Critical values of the limit function, degenerate points included.
    pub limit_values: Vec<f64>,
}

/// ρ_α(f) for non-Morse f from a C⁰-convergent sequence of Morse members.
///
/// Classes are carried along by continuation maps between consecutive members.
/// The limit is extrapolated linearly in the C⁰ distance from the last two members.
pub fn spectral_extend(
    model: &ManifoldModel,
    limit: &ScalarField,
    members: &[ScalarField],
    opts: &ExtendOptions,
) -> Result<ExtensionReport> {
    if members.is_empty() {
        return Err(MorseError::InvalidInput("empty perturbation sequence".into()));
    }
    let pts = sample_points(model);
    let distances: Vec<f64> = members.iter().map(|m| sup_estimate_on(&pts, m, limit).sampled).collect();
    if distances.windows(2).any(|w| w[1] > w[0] + 1e-12) {
        return Err(MorseError::InvalidInput("perturbation sequence does not approach the limit".into()));
    }
    let analyses: Vec<SceneAnalysis> = members.iter().map(|m| analyze(model, m, &opts.search, &opts.moduli)).collect::<Result<_>>()?;
    let mut maps = Vec::new();
    for j in 0..members.len() - 1 {
        let h = Homotopy::convex(Scene::new(model.clone(), members[j].clone()), Scene::new(model.clone(), members[j + 1].clone()), T_DEFAULT)?;
        let c = continue_scenes(&h, &analyses[j], &analyses[j + 1], &opts.continuation)?;
        if !c.induced.iso {
            return Err(MorseError::InvalidInput(format!("continuation {j} -> {} is not an isomorphism", j + 1)));
        }
        maps.push(c.induced);
    }
    let steps: Vec<f64> = (0..members.len() - 1).map(|j| sup_estimate_on(&pts, &members[j + 1], &members[j]).bound).collect();
    let limit_crits = find_critical_points(limit, model, &opts.search)?.points;
    let limit_values = crate::critical::spectrum(&limit_crits);
    let mut classes = Vec::new();
    for c in &analyses[0].spectral.classes {
        let mut coords = c.coordinates.clone();
        let mut values = vec![c.spectral.sigma];
        for (j, m) in maps.iter().enumerate() {
            coords = m.apply(c.degree, &coords);
            let s = sigma_of(&analyses[j + 1].spectral, c.degree, &coords)
                .ok_or_else(|| MorseError::InvalidInput("transported class vanished".into()))?;
            values.push(s);
        }
        let increments: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        let bounds: Vec<f64> = steps.iter().map(|b| b + TAU_VAL).collect();
        for (j, (inc, b)) in increments.iter().zip(&bounds).enumerate() {
            if inc > b {
                return Err(MorseError::NotCauchy { member: j + 1, step: *inc, bound: *b });
            }
        }
        let n = values.len();
        let lim = if n >= 2 && distances[n - 2] > distances[n - 1] {
            let (d0, d1) = (distances[n - 2], distances[n - 1]);
            values[n - 1] + (values[n - 1] - values[n - 2]) * d1 / (d0 - d1)
        } else {
            values[n - 1]
        };
        let (nearest, dist) = limit_values
            .iter()
            .map(|v| (*v, (v - lim).abs()))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap_or((f64::NAN, f64::INFINITY));
        classes.push(ExtendedClass {
            degree: c.degree,
            coordinates: c.coordinates.clone(),
            values,
            increments,
            bounds,
            limit: lim,
            nearest_critical_value: nearest,
            distance_to_spectrum: dist,
        });
    }
    Ok(ExtensionReport { distances, classes, limit_values })
}
