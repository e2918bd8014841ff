//! Counting gradient flow lines by shooting from unstable spheres.
//!
//! Index-1 sources: the two seeds ±δ e_u are flowed and captures counted.
//! Index-2 sources: the unstable circle is scanned; for each index-1 point s
//! below the source every trajectory records where it first crosses the level
//! f(s). Between adjacent angles whose crossings sit near s on opposite sides
//! of its stable manifold there is an angle whose trajectory runs into s; each
//! such angle, localized by bisection, is one connecting line.

use std::f64::consts::PI;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::critical::{CriticalClass, CriticalPoint};
use crate::error::{MorseError, Result};
use crate::fields::{gradient, FieldExpr, ScalarField};
use crate::flow::{capture_index, integrate, run_flow, FlowField, FlowLine, FlowOptions, GradientField};
use crate::geometry::{wrap_delta, ManifoldModel, Metric, Point};

pub const DELTA: f64 = 1e-4;
pub const DELTA_MIN: f64 = 1e-6;
pub const DELTA_MAX: f64 = 1e-2;
pub const N_SCAN: usize = 2048;
pub const BISECT_DEPTH: usize = 50;
pub const UNRESOLVED_LIMIT: f64 = 0.01;
pub const WITNESS_RADIUS: f64 = 1e-4;
/// Fractional phase of the scan grid, (3 - √5)/2, keeps symmetric directions off the grid.
pub const SCAN_PHASE: f64 = 0.381_966_011_250_105_1;
/// Continuity threshold for level crossings, as a fraction of the minimal critical separation.
pub const ETA_FRACTION: f64 = 0.05;
/// Radius of the "near s" test, as a fraction of the distance from s to the nearest other critical point.
pub const SIDE_FRACTION: f64 = 0.25;
/// Angular distance (radians on the unstable circle) within which a forward breaking and a
/// reversed arrival are the same line; observed agreement is 1e-5 or better.
pub const ARRIVAL_MATCH: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CountMethod {
    ShootingBisection,
    DecoupledAnalytic,
    Declared,
}

#[derive(Debug, Clone)]
pub struct ModuliCount {
    pub source: String,
    pub target: String,
    pub count: usize,
    pub count_mod2: u8,
    pub witnesses: Vec<FlowLine>,
    pub method: CountMethod,
    /// Breakings confirmed neither by a close forward pass nor by reversed shooting.
    pub unverified: usize,
}

impl ModuliCount {
    pub fn new(source: &str, target: &str, count: usize, method: CountMethod) -> Self {
        Self {
            source: source.to_string(),
            target: target.to_string(),
            count,
            count_mod2: (count % 2) as u8,
            witnesses: Vec::new(),
            method,
            unverified: 0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ModuliOptions {
    pub delta: f64,
    pub n_scan: usize,
    pub depth: usize,
    pub flow: FlowOptions,
    pub keep_witnesses: bool,
}

impl Default for ModuliOptions {
    fn default() -> Self {
        Self { delta: DELTA, n_scan: N_SCAN, depth: BISECT_DEPTH, flow: FlowOptions::default(), keep_witnesses: true }
    }
}

/// Point at distance δ from a nondegenerate critical point along an unstable direction.
pub fn unstable_seed(model: &ManifoldModel, crit: &CriticalPoint, direction: &DVector<f64>, delta: f64) -> Result<Point> {
    if crit.degenerate {
        return Err(MorseError::DegenerateCritical { label: crit.label.clone() });
    }
    if !(DELTA_MIN..=DELTA_MAX).contains(&delta) {
        return Err(MorseError::InvalidInput(format!("seed offset {delta} outside [{DELTA_MIN}, {DELTA_MAX}]")));
    }
    let n = model.norm(direction);
    if n == 0.0 {
        return Err(MorseError::InvalidInput("zero seed direction".into()));
    }
    let mut proj = DVector::zeros(direction.len());
    for e in crit.unstable_directions() {
        proj += e * model.inner(direction, e);
    }
    if model.norm(&(direction - &proj)) > 1e-8 * n {
        return Err(MorseError::InvalidInput("seed direction leaves the unstable eigenspace".into()));
    }
    model.project(&(&crit.location + direction * (delta / n)))
}

/// Unit direction on the unstable circle of an index-2 point.
pub fn circle_direction(crit: &CriticalPoint, theta: f64) -> DVector<f64> {
    let u = crit.unstable_directions();
    &u[0] * theta.cos() + &u[1] * theta.sin()
}

/// Seed directions: the two points of S^0 for index 1, none for index 0.
pub fn seed_directions(crit: &CriticalPoint) -> Vec<DVector<f64>> {
    match crit.morse_index {
        0 => Vec::new(),
        1 => vec![crit.eigenvectors[0].clone(), -crit.eigenvectors[0].clone()],
        _ => Vec::new(),
    }
}

/// An index-1 point whose level crossings are tracked during a scan.
#[derive(Debug, Clone)]
pub struct Watch {
    pub crit: usize,
    pub location: Point,
    pub level: f64,
    pub e_u: DVector<f64>,
    pub r_side: f64,
}

impl Watch {
    pub fn new(model: &ManifoldModel, crits: &[CriticalPoint], i: usize) -> Self {
        let c = &crits[i];
        let sep = crits
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, d)| model.displacement(&c.location, &d.location).norm())
            .fold(f64::INFINITY, f64::min);
        Self {
            crit: i,
            location: c.location.clone(),
            level: c.value,
            e_u: c.eigenvectors[0].clone(),
            r_side: SIDE_FRACTION * sep.min(1.0),
        }
    }
}

#[derive(Debug, Clone)]
pub enum LevelState {
    /// Captured at the watched point.
    Hit,
    /// First point at or below the watched level.
    Cross(Point),
    /// Never reached the level.
    Above,
}

#[derive(Debug, Clone)]
pub struct Shot {
    pub end: Option<usize>,
    pub unresolved: bool,
    pub states: Vec<LevelState>,
    pub min_dist: Vec<f64>,
}

/// Tracks first level crossings for a set of watches along a descending autonomous flow.
pub struct Tracker<'a> {
    model: &'a ManifoldModel,
    field: &'a ScalarField,
    watches: &'a [Watch],
    crossed: Vec<Option<Point>>,
    min_dist: Vec<f64>,
    prev: Option<(f64, Point, f64)>,
}

impl<'a> Tracker<'a> {
    pub fn new(model: &'a ManifoldModel, field: &'a ScalarField, watches: &'a [Watch]) -> Self {
        Self {
            model,
            field,
            watches,
            crossed: vec![None; watches.len()],
            min_dist: vec![f64::INFINITY; watches.len()],
            prev: None,
        }
    }

    pub fn observe(&mut self, s: f64, x: &Point) {
        let v = self.field.value(x);
        for (j, w) in self.watches.iter().enumerate() {
            let d = self.model.displacement(&w.location, x).norm();
            self.min_dist[j] = self.min_dist[j].min(d);
            if self.crossed[j].is_none() && v <= w.level {
                let q = match &self.prev {
                    Some((s0, x0, v0)) if *v0 > w.level => self.refine(*s0, x0, s, x, w.level),
                    _ => x.clone(),
                };
                self.crossed[j] = Some(q);
            }
        }
        self.prev = Some((s, x.clone(), v));
    }

    /// Level crossing inside one step via cubic Hermite interpolation with flow velocities.
    fn refine(&self, s0: f64, x0: &Point, s1: f64, x1: &Point, level: f64) -> Point {
        let h = s1 - s0;
        let x1u = x0 + self.model.displacement(x0, x1);
        let vel = |p: &Point| gradient(self.field, self.model, p).map(|g| -g.components);
        let (Ok(v0), Ok(v1)) = (vel(x0), vel(x1)) else { return x1.clone() };
        let at = |t: f64| -> Point {
            let (t2, t3) = (t * t, t * t * t);
            let p = x0 * (2.0 * t3 - 3.0 * t2 + 1.0)
                + &v0 * (h * (t3 - 2.0 * t2 + t))
                + &x1u * (-2.0 * t3 + 3.0 * t2)
                + &v1 * (h * (t3 - t2));
            self.model.project(&p).unwrap_or(p)
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let m = 0.5 * (lo + hi);
            if self.field.value(&at(m)) > level {
                lo = m;
            } else {
                hi = m;
            }
        }
        at(hi)
    }

    pub fn finish(self, end: Option<usize>, unresolved: bool) -> Shot {
        let states = self
            .watches
            .iter()
            .zip(self.crossed)
            .map(|(w, c)| {
                if end == Some(w.crit) {
                    LevelState::Hit
                } else {
                    c.map_or(LevelState::Above, LevelState::Cross)
                }
            })
            .collect();
        Shot { end, unresolved, states, min_dist: self.min_dist }
    }
}

/// Flow a seed under -∇f, tracking level crossings, until capture or `s_max`.
pub fn shoot_autonomous(
    model: &ManifoldModel,
    field: &ScalarField,
    crits: &[CriticalPoint],
    seed: &Point,
    watches: &[Watch],
    opts: &FlowOptions,
) -> Result<Shot> {
    let gf = GradientField::descending(model, field);
    let mut tracker = Tracker::new(model, field, watches);
    let mut end = None;
    let mut observer = |s: f64, x: &Point, _e: f64| -> Result<bool> {
        tracker.observe(s, x);
        if let Some(i) = capture_index(model, field, crits, x, opts.eps_capture, opts.grad_capture) {
            end = Some(i);
            return Ok(true);
        }
        Ok(false)
    };
    let fin = run_flow(&gf, seed, 0.0, opts.s_max, &opts.integrator, &mut observer)?;
    Ok(tracker.finish(end, !fin.stopped))
}

#[derive(Debug, Clone)]
pub struct Breaking {
    pub param: f64,
    pub watch: usize,
    pub min_dist: f64,
    pub route: Route,
}

impl Breaking {
    /// Confirmed by a forward pass within `WITNESS_RADIUS` or by the reversed shooting.
    pub fn verified(&self) -> bool {
        self.route != Route::Scan || self.min_dist < WITNESS_RADIUS
    }
}

/// Which shooting directions found a breaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    /// Forward bisection only.
    Scan,
    /// Reversed index-1 shooting only; the forward bisection ran out of precision.
    Reversed,
    Both,
}

pub type ShootFn<'a> = dyn Fn(f64) -> Result<Shot> + Sync + 'a;

/// Bisection refinement of level-crossing sides between scan parameters.
pub struct Refiner<'a> {
    pub shoot: &'a ShootFn<'a>,
    pub model: &'a ManifoldModel,
    pub watches: &'a [Watch],
    pub eta: f64,
    pub depth: usize,
}

impl Refiner<'_> {
    fn side(&self, j: usize, q: &Point) -> i8 {
        let w = &self.watches[j];
        let d = self.model.inner(&self.model.displacement(&w.location, q), &w.e_u);
        if d > 0.0 {
            1
        } else if d < 0.0 {
            -1
        } else {
            0
        }
    }

    fn near(&self, j: usize, q: &Point) -> bool {
        let w = &self.watches[j];
        self.model.displacement(&w.location, q).norm() < w.r_side
    }

    fn opposite_near(&self, j: usize, qa: &Point, qb: &Point) -> bool {
        self.near(j, qa) && self.near(j, qb) && (self.side(j, qa) as i32) * (self.side(j, qb) as i32) < 0
    }

    /// All breaking parameters on a grid (periodic when `period` is given), sorted by watch then parameter.
    pub fn breakings(&self, grid: &[f64], shots: &[Shot], period: Option<f64>) -> Result<Vec<Breaking>> {
        let mut out = Vec::new();
        for (i, shot) in shots.iter().enumerate() {
            for j in 0..self.watches.len() {
                if matches!(shot.states[j], LevelState::Hit) {
                    out.push(Breaking { param: grid[i], watch: j, min_dist: shot.min_dist[j], route: Route::Scan });
                }
            }
        }
        let n = grid.len();
        let mut pairs: Vec<(f64, f64, usize, usize)> = (0..n.saturating_sub(1)).map(|i| (grid[i], grid[i + 1], i, i + 1)).collect();
        if let Some(p) = period {
            if n > 0 {
                pairs.push((grid[n - 1], grid[0] + p, n - 1, 0));
            }
        }
        for (a, b, ia, ib) in pairs {
            for j in 0..self.watches.len() {
                self.refine(j, a, b, &shots[ia], &shots[ib], 0, &mut out)?;
            }
        }
        if let Some(p) = period {
            for b in out.iter_mut() {
                b.param = b.param.rem_euclid(p);
            }
        }
        out.sort_by(|x, y| x.watch.cmp(&y.watch).then(x.param.partial_cmp(&y.param).unwrap()));
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn refine(&self, j: usize, a: f64, b: f64, sa: &Shot, sb: &Shot, depth: usize, out: &mut Vec<Breaking>) -> Result<()> {
        use LevelState::*;
        let m = 0.5 * (a + b);
        // parameters no longer separate in floating point: same as running out of depth
        let exhausted = depth >= self.depth || m <= a || m >= b;
        match (&sa.states[j], &sb.states[j]) {
            (Hit, _) | (_, Hit) => return Ok(()),
            (Cross(qa), Cross(qb)) => {
                let close = self.model.displacement(qa, qb).norm() <= self.eta;
                let crossing = self.opposite_near(j, qa, qb);
                if close {
                    if crossing {
                        return self.localize(j, a, b, sa.clone(), sb.clone(), depth, out);
                    }
                    return Ok(());
                }
                if exhausted {
                    if crossing {
                        out.push(self.closer(j, a, b, sa, sb));
                    }
                    return Ok(());
                }
            }
            (Above, Above) => {
                if sa.end == sb.end || exhausted {
                    return Ok(());
                }
            }
            _ => {
                if exhausted {
                    return Ok(());
                }
            }
        }
        let sm = (self.shoot)(m)?;
        if matches!(sm.states[j], Hit) {
            out.push(Breaking { param: m, watch: j, min_dist: sm.min_dist[j], route: Route::Scan });
            return Ok(());
        }
        self.refine(j, a, m, sa, &sm, depth + 1, out)?;
        self.refine(j, m, b, &sm, sb, depth + 1, out)
    }

    fn closer(&self, j: usize, a: f64, b: f64, sa: &Shot, sb: &Shot) -> Breaking {
        if sa.min_dist[j] <= sb.min_dist[j] {
            Breaking { param: a, watch: j, min_dist: sa.min_dist[j], route: Route::Scan }
        } else {
            Breaking { param: b, watch: j, min_dist: sb.min_dist[j], route: Route::Scan }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn localize(&self, j: usize, mut a: f64, mut b: f64, mut sa: Shot, mut sb: Shot, depth: usize, out: &mut Vec<Breaking>) -> Result<()> {
        let side_a = match &sa.states[j] {
            LevelState::Cross(q) => self.side(j, q),
            _ => return Ok(()),
        };
        let mut d = depth;
        while d < self.depth {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let sm = (self.shoot)(m)?;
            match &sm.states[j] {
                LevelState::Hit => {
                    out.push(Breaking { param: m, watch: j, min_dist: sm.min_dist[j], route: Route::Scan });
                    return Ok(());
                }
                LevelState::Cross(q) if self.near(j, q) && self.side(j, q) == side_a => {
                    a = m;
                    sa = sm;
                }
                LevelState::Cross(q) if self.near(j, q) && self.side(j, q) == -side_a => {
                    b = m;
                    sb = sm;
                }
                _ => {
                    self.refine(j, a, m, &sa, &sm, d + 1, out)?;
                    return self.refine(j, m, b, &sm, &sb, d + 1, out);
                }
            }
            d += 1;
        }
        out.push(self.closer(j, a, b, &sa, &sb));
        Ok(())
    }
}

pub fn min_separation(model: &ManifoldModel, crits: &[CriticalPoint]) -> f64 {
    let mut m = f64::INFINITY;
    for i in 0..crits.len() {
        for j in i + 1..crits.len() {
            m = m.min(model.displacement(&crits[i].location, &crits[j].location).norm());
        }
    }
    m.min(1.0)
}

/// Scan grid on the unstable circle.
pub fn scan_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| 2.0 * PI * (i as f64 + SCAN_PHASE) / n as f64).collect()
}

struct CircleScan {
    grid: Vec<f64>,
    shots: Vec<Shot>,
    breakings: Vec<Breaking>,
}

fn scan_circle(
    model: &ManifoldModel,
    field: &ScalarField,
    crits: &[CriticalPoint],
    src: usize,
    watches: &[Watch],
    opts: &ModuliOptions,
) -> Result<CircleScan> {
    let c = &crits[src];
    let shoot = |theta: f64| -> Result<Shot> {
        let seed = unstable_seed(model, c, &circle_direction(c, theta), opts.delta)?;
        shoot_autonomous(model, field, crits, &seed, watches, &opts.flow)
    };
    let grid = scan_grid(opts.n_scan);
    let shots: Vec<Shot> = grid.par_iter().map(|&t| shoot(t)).collect::<Result<_>>()?;
    let unresolved = shots.iter().filter(|s| s.unresolved).count();
    if unresolved as f64 > UNRESOLVED_LIMIT * shots.len() as f64 {
        return Err(MorseError::NonGeneric(format!(
            "{unresolved} of {} trajectories from {} unresolved",
            shots.len(),
            c.label
        )));
    }
    let refiner = Refiner {
        shoot: &shoot,
        model,
        watches,
        eta: ETA_FRACTION * min_separation(model, crits),
        depth: opts.depth,
    };
    let raw = refiner.breakings(&grid, &shots, Some(2.0 * PI))?;
    let breakings = if model.tangent_dim() == 2 { reconcile(model, field, crits, src, watches, raw, &shoot, opts)? } else { raw };
    Ok(CircleScan { grid, shots, breakings })
}

fn circular_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Merges forward breakings with reversed arrivals, watch by watch.
///
/// Forward breakings within `ARRIVAL_MATCH` of an arrival collapse onto it (`Both`). Arrivals
/// with no forward partner are kept (`Reversed`). Unmatched forward breakings survive only when
/// their closest approach is within `WITNESS_RADIUS`; the rest are side flips produced by
/// integration noise once the bisection has exhausted double precision.
#[allow(clippy::too_many_arguments)]
fn reconcile(
    model: &ManifoldModel,
    field: &ScalarField,
    crits: &[CriticalPoint],
    src: usize,
    watches: &[Watch],
    raw: Vec<Breaking>,
    shoot: &ShootFn,
    opts: &ModuliOptions,
) -> Result<Vec<Breaking>> {
    let mut out = Vec::new();
    for (j, w) in watches.iter().enumerate() {
        let arrivals = reversed_arrivals(model, field, crits, src, w.crit, opts)?;
        let mut fwd: Vec<&Breaking> = raw.iter().filter(|b| b.watch == j).collect();
        for a in arrivals {
            let (near, rest): (Vec<&Breaking>, Vec<&Breaking>) = fwd.into_iter().partition(|b| circular_gap(b.param, a) <= ARRIVAL_MATCH);
            fwd = rest;
            match near.into_iter().min_by(|x, y| x.min_dist.total_cmp(&y.min_dist)) {
                Some(b) => out.push(Breaking { route: Route::Both, ..b.clone() }),
                None => {
                    let shot = shoot(a)?;
                    out.push(Breaking { param: a, watch: j, min_dist: shot.min_dist[j], route: Route::Reversed });
                }
            }
        }
        let mut kept: Vec<Breaking> = Vec::new();
        for b in fwd.into_iter().filter(|b| b.min_dist < WITNESS_RADIUS) {
            if !kept.iter().any(|k| circular_gap(k.param, b.param) <= ARRIVAL_MATCH) {
                kept.push(b.clone());
            }
        }
        out.extend(kept);
    }
    out.sort_by(|x, y| x.watch.cmp(&y.watch).then(x.param.total_cmp(&y.param)));
    Ok(out)
}

/// Angles on the radius-δ unstable circle of `up` where the stable branches of the index-1
/// point `saddle` arrive under the reversed flow (surfaces only).
///
/// A line from `up` to `saddle` for f is a line from `saddle` to `up` for -f, so this is the
/// index-1 shooting of the reversed problem; it does not suffer the angular pinching that
/// limits the forward bisection.
pub fn reversed_arrivals(
    model: &ManifoldModel,
    field: &ScalarField,
    crits: &[CriticalPoint],
    up: usize,
    saddle: usize,
    opts: &ModuliOptions,
) -> Result<Vec<f64>> {
    Ok(reversed_lines(model, field, crits, up, saddle, opts)?.into_iter().map(|(a, _)| a).collect())
}

fn reversed_lines(
    model: &ManifoldModel,
    field: &ScalarField,
    crits: &[CriticalPoint],
    up: usize,
    saddle: usize,
    opts: &ModuliOptions,
) -> Result<Vec<(f64, FlowLine)>> {
    let (c, s) = (&crits[up], &crits[saddle]);
    if c.morse_index != 2 || s.morse_index != 1 || model.tangent_dim() != 2 {
        return Err(MorseError::InvalidInput("reversed arrivals need an index-2 and an index-1 point on a surface".into()));
    }
    let others: Vec<CriticalPoint> = crits.iter().enumerate().filter(|(i, _)| *i != saddle).map(|(_, x)| x.clone()).collect();
    let mut fo = opts.flow;
    fo.backward = true;
    let u = c.unstable_directions();
    let mut out = Vec::new();
    for sign in [1.0, -1.0] {
        let e = &s.eigenvectors[1] * sign;
        let seed = model.project(&(&s.location + &e * (opts.delta / model.norm(&e))))?;
        let mut line = integrate(model, field, &seed, &others, &fo)?;
        if line.target.as_deref() != Some(c.label.as_str()) {
            continue;
        }
        line.source = Some(s.label.clone());
        let r = |p: &Point| model.displacement(&c.location, p).norm();
        let Some(i) = line.samples.iter().position(|q| r(&q.p) <= opts.delta) else { continue };
        let q = if i == 0 {
            model.displacement(&c.location, &line.samples[0].p)
        } else {
            let (a, b) = (&line.samples[i - 1].p, &line.samples[i].p);
            let (ra, rb) = (r(a), r(b));
            let w = (ra - opts.delta) / (ra - rb);
            let da = model.displacement(&c.location, a);
            let db = model.displacement(&c.location, b);
            &da + (db - &da) * w
        };
        out.push((model.inner(&q, &u[1]).atan2(model.inner(&q, &u[0])).rem_euclid(2.0 * PI), line));
    }
    Ok(out)
}

/// Witness line from an index-2 source through the breaking angle, stopped at closest approach.
fn breaking_witness(
    model: &ManifoldModel,
    field: &ScalarField,
    crits: &[CriticalPoint],
    src: usize,
    target: usize,
    b: &Breaking,
    opts: &ModuliOptions,
) -> Result<FlowLine> {
    let c = &crits[src];
    if b.route != Route::Scan && b.min_dist >= WITNESS_RADIUS {
        // forward pass never got close: the reversed line is the witness
        let lines = reversed_lines(model, field, crits, src, target, opts)?;
        if let Some((_, l)) = lines.into_iter().min_by(|x, y| circular_gap(x.0, b.param).total_cmp(&circular_gap(y.0, b.param))) {
            return Ok(l.reversed());
        }
    }
    let seed = unstable_seed(model, c, &circle_direction(c, b.param), opts.delta)?;
    let mut fo = opts.flow;
    fo.eps_capture = (1.5 * b.min_dist).max(fo.eps_capture);
    fo.grad_capture = f64::INFINITY;
    let mut line = integrate(model, field, &seed, std::slice::from_ref(&crits[target]), &fo)?;
    line.source = Some(c.label.clone());
    Ok(line)
}

fn check_same_index(model: &ManifoldModel, crits: &[CriticalPoint], src: usize, line: &FlowLine) -> Result<()> {
    let mu = crits[src].morse_index;
    for (i, c) in crits.iter().enumerate() {
        if i == src || c.morse_index < mu {
            continue;
        }
        if line.target.as_deref() == Some(c.label.as_str()) || line.min_distance_to(model, &c.location) < WITNESS_RADIUS {
            return Err(MorseError::NonGeneric(format!(
                "flow line from {} reaches {} of index {} (not Morse–Smale)",
                crits[src].label, c.label, c.morse_index
            )));
        }
    }
    Ok(())
}

/// Counts from one source to every critical point of index one less.
pub fn count_from_source(
    model: &ManifoldModel,
    field: &ScalarField,
    crits: &[CriticalPoint],
    src: usize,
    opts: &ModuliOptions,
) -> Result<Vec<ModuliCount>> {
    let c = &crits[src];
    if c.degenerate {
        return Err(MorseError::DegenerateCritical { label: c.label.clone() });
    }
    let mu = c.morse_index;
    let targets: Vec<usize> = (0..crits.len()).filter(|&i| crits[i].morse_index + 1 == mu).collect();
    match mu {
        0 => Ok(Vec::new()),
        1 => {
            let mut lines = Vec::new();
            for dir in seed_directions(c) {
                let seed = unstable_seed(model, c, &dir, opts.delta)?;
                let mut line = integrate(model, field, &seed, crits, &opts.flow)?;
                if line.target.is_none() {
                    return Err(MorseError::NonGeneric(format!("unresolved trajectory from {}", c.label)));
                }
                check_same_index(model, crits, src, &line)?;
                line.source = Some(c.label.clone());
                lines.push(line);
            }
            Ok(targets
                .iter()
                .map(|&t| {
                    let lbl = &crits[t].label;
                    let w: Vec<FlowLine> = lines.iter().filter(|l| l.target.as_ref() == Some(lbl)).cloned().collect();
                    let mut mc = ModuliCount::new(&c.label, lbl, w.len(), CountMethod::ShootingBisection);
                    if opts.keep_witnesses {
                        mc.witnesses = w;
                    }
                    mc
                })
                .collect())
        }
        2 => {
            let watched: Vec<usize> = targets.iter().copied().filter(|&t| crits[t].value < c.value).collect();
            let watches: Vec<Watch> = watched.iter().map(|&t| Watch::new(model, crits, t)).collect();
            let scan = scan_circle(model, field, crits, src, &watches, opts)?;
            let mut out = Vec::new();
            for &t in &targets {
                let Some(j) = watched.iter().position(|&w| w == t) else {
                    out.push(ModuliCount::new(&c.label, &crits[t].label, 0, CountMethod::ShootingBisection));
                    continue;
                };
                let hits: Vec<&Breaking> = scan.breakings.iter().filter(|b| b.watch == j).collect();
                let mut mc = ModuliCount::new(&c.label, &crits[t].label, hits.len(), CountMethod::ShootingBisection);
                mc.unverified = hits.iter().filter(|b| !b.verified()).count();
                if opts.keep_witnesses {
                    for b in hits {
                        mc.witnesses.push(breaking_witness(model, field, crits, src, t, b, opts)?);
                    }
                }
                out.push(mc);
            }
            Ok(out)
        }
        _ => Err(MorseError::InvalidInput(format!("sources of index {mu} are not supported"))),
    }
}

/// Count for one pair with μ(c_up) = μ(c_down) + 1.
pub fn count_flow_lines(
    model: &ManifoldModel,
    field: &ScalarField,
    crits: &[CriticalPoint],
    up: usize,
    down: usize,
    opts: &ModuliOptions,
) -> Result<ModuliCount> {
    if crits[down].degenerate {
        return Err(MorseError::DegenerateCritical { label: crits[down].label.clone() });
    }
    if crits[up].morse_index != crits[down].morse_index + 1 {
        return Err(MorseError::InvalidInput("count_flow_lines needs an index difference of one".into()));
    }
    count_from_source(model, field, crits, up, opts)?
        .into_iter()
        .find(|m| m.target == crits[down].label)
        .ok_or_else(|| MorseError::MissingPair { source_label: crits[up].label.clone(), target: crits[down].label.clone() })
}

/// Closed-form count for separable torus fields Σ c_i cos 2π(x_i - t_i) with the flat metric.
pub fn count_decoupled(
    field: &ScalarField,
    model: &ManifoldModel,
    up: &CriticalPoint,
    down: &CriticalPoint,
) -> Result<ModuliCount> {
    let (coeffs, shift) = match &field.expr {
        FieldExpr::TorusCosine(c) => (c.clone(), vec![0.0; c.len()]),
        FieldExpr::Translate(e, s) => match e.as_ref() {
            FieldExpr::TorusCosine(c) => (c.clone(), s.clone()),
            _ => return Err(MorseError::InvalidInput("decoupled count needs a torus cosine field".into())),
        },
        _ => return Err(MorseError::InvalidInput("decoupled count needs a torus cosine field".into())),
    };
    if !model.is_torus() || !matches!(model.metric, Metric::FlatPeriodic) {
        return Err(MorseError::InvalidInput("decoupled count needs the flat torus metric".into()));
    }
    let differing: Vec<usize> = (0..coeffs.len())
        .filter(|&i| wrap_delta(up.location[i] - down.location[i]).abs() > 1e-6)
        .collect();
    let mut count = 0;
    if differing.len() == 1 && up.morse_index == down.morse_index + 1 {
        let i = differing[0];
        let one = |x: f64| coeffs[i] * (2.0 * PI * (x - shift.get(i).copied().unwrap_or(0.0))).cos();
        if one(up.location[i]) > one(down.location[i]) {
            count = 2;
        }
    }
    Ok(ModuliCount::new(&up.label, &down.label, count, CountMethod::DecoupledAnalytic))
}

#[derive(Debug, Clone, Serialize)]
pub struct Transition {
    pub angle: f64,
    pub saddle: String,
    pub min_distance: f64,
    /// First leg confirmed, see `Breaking::verified`.
    pub verified: bool,
    pub route: Route,
    /// Branches of the saddle ending at the bottom point (second legs).
    pub events: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModuliScan {
    pub source: String,
    pub target: String,
    pub angle_grid: Vec<f64>,
    pub endpoint_labels: Vec<String>,
    pub transitions: Vec<Transition>,
    pub boundary_events: usize,
}

/// One-parameter moduli from an index-2 source to an index-0 point: arcs and their broken ends.
pub fn moduli_scan(
    model: &ManifoldModel,
    field: &ScalarField,
    crits: &[CriticalPoint],
    up: usize,
    bottom: usize,
    opts: &ModuliOptions,
) -> Result<ModuliScan> {
    let (cu, cb) = (&crits[up], &crits[bottom]);
    if cu.morse_index != 2 || cb.morse_index != 0 {
        return Err(MorseError::InvalidInput("moduli_scan needs an index-2 source and an index-0 target".into()));
    }
    let saddles: Vec<usize> = (0..crits.len())
        .filter(|&i| crits[i].morse_index == 1 && crits[i].value < cu.value && crits[i].value > cb.value)
        .collect();
    let mut second_legs = Vec::new();
    let mut o = *opts;
    o.keep_witnesses = false;
    for &s in &saddles {
        let k = count_from_source(model, field, crits, s, &o)?
            .into_iter()
            .find(|m| m.target == cb.label)
            .map_or(0, |m| m.count);
        second_legs.push(k);
    }
    let watches: Vec<Watch> = saddles.iter().map(|&s| Watch::new(model, crits, s)).collect();
    let scan = scan_circle(model, field, crits, up, &watches, opts)?;
    let transitions: Vec<Transition> = scan
        .breakings
        .iter()
        .map(|b| Transition {
            angle: b.param,
            saddle: crits[saddles[b.watch]].label.clone(),
            min_distance: b.min_dist,
            verified: b.verified(),
            route: b.route,
            events: second_legs[b.watch],
        })
        .collect();
    let boundary_events = transitions.iter().map(|t| t.events).sum();
    Ok(ModuliScan {
        source: cu.label.clone(),
        target: cb.label.clone(),
        angle_grid: scan.grid,
        endpoint_labels: scan
            .shots
            .iter()
            .map(|s| s.end.map_or_else(|| "unresolved".to_string(), |i| crits[i].label.clone()))
            .collect(),
        transitions,
        boundary_events,
    })
}

/// Σ_s #(up → s) · #(s → bottom) over intermediate points, from pairwise counts.
pub fn double_count(counts: &[ModuliCount], crits: &[CriticalPoint], up: &str, bottom: &str) -> usize {
    let get = |a: &str, b: &str| counts.iter().find(|m| m.source == a && m.target == b).map_or(0, |m| m.count);
    crits.iter().map(|s| get(up, &s.label) * get(&s.label, bottom)).sum()
}

/// Orbit counts on the antipodal quotient from counts on the covering sphere.
pub fn quotient_count(cover: &[ModuliCount], classes: &[CriticalClass]) -> Result<Vec<ModuliCount>> {
    let mut out = Vec::new();
    for u in classes {
        for v in classes {
            if v.morse_index + 1 != u.morse_index {
                continue;
            }
            let mut sum = 0;
            let mut method = CountMethod::ShootingBisection;
            for m in cover {
                if u.representatives.contains(&m.source) && v.representatives.contains(&m.target) {
                    sum += m.count;
                    method = m.method;
                }
            }
            if sum % 2 != 0 {
                return Err(MorseError::OddOrbit { source_label: u.label.clone(), target: v.label.clone(), count: sum });
            }
            out.push(ModuliCount::new(&u.label, &v.label, sum / 2, method));
        }
    }
    Ok(out)
}

/// Velocity field wrapper used by tests that need the flow field trait object.
pub fn descending<'a>(model: &'a ManifoldModel, field: &'a ScalarField) -> impl FlowField + 'a {
    GradientField::descending(model, field)
}
