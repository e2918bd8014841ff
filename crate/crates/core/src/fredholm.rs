//! Index of D_A ξ = ∂_s ξ + A(s) ξ on the full line, half-lines and compact intervals, and
//! the infinitesimal gluing map at a critical point.
//!
//! Kernels are read off the box-scheme (Cayley) propagator. At an infinite end a solution
//! counts as decaying when it grows by more than e^{δL}, δ = ε_asym/2, between the end and the
//! reference point; growth exponents come from an orthonormalized (QR) propagation so that
//! strongly separated rates stay accurate. The kernel is the intersection of the admissible
//! subspaces from both ends, measured by principal angles. The cokernel is the kernel of
//! D_{-Aᵀ} with zero boundary values at finite ends. Compact intervals use a dense SVD of
//! the rectangular box matrix instead.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MorseError, Result};

pub const L_DEFAULT: f64 = 30.0;
pub const M_DEFAULT: usize = 3000;
pub const M_MIN: usize = 200;
/// L ≥ L_FACTOR / ε_asym on unbounded domains.
pub const L_FACTOR: f64 = 10.0;
/// Relative singular value (and principal-angle) tolerance.
pub const SIGMA_TOL: f64 = 1e-6;
/// A value within this factor of its threshold is ambiguous.
pub const AMBIGUITY_FACTOR: f64 = 10.0;
/// Allowed ‖A(±L) - A^±‖ entrywise.
pub const ASYMPTOTIC_TOL: f64 = 1e-8;
/// Grid points on compact intervals (dense SVD).
pub const M_COMPACT: usize = 200;
/// Eigenvalue magnitudes of random endpoints.
pub const EIG_RANGE: (f64, f64) = (0.3, 3.0);
pub const FAMILIES_PER_DOMAIN: usize = 20;
/// Bound on compactly supported perturbations.
pub const PERTURBATION_NORM: f64 = 0.1;
/// T·max|eigenvalue| above which the gluing system is refused.
pub const GLUE_EXPONENT_LIMIT: f64 = 300.0;
/// Intervals of the gluing boundary-value grid.
pub const GLUE_INTERVALS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Domain {
    FullLine,
    HalfLineMinus,
    HalfLinePlus,
    CompactInterval { t: f64 },
}

impl Domain {
    pub fn all(t: f64) -> [Domain; 4] {
        [Domain::FullLine, Domain::HalfLineMinus, Domain::HalfLinePlus, Domain::CompactInterval { t }]
    }

    fn needs_minus(&self) -> bool {
        matches!(self, Domain::FullLine | Domain::HalfLineMinus)
    }

    fn needs_plus(&self) -> bool {
        matches!(self, Domain::FullLine | Domain::HalfLinePlus)
    }

    fn bounded(&self) -> bool {
        matches!(self, Domain::CompactInterval { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Domain::FullLine => "full-line",
            Domain::HalfLineMinus => "half-line-minus",
            Domain::HalfLinePlus => "half-line-plus",
            Domain::CompactInterval { .. } => "compact-interval",
        }
    }
}

/// Row-major square matrix in plain form for serialization.
pub type Rows = Vec<Vec<f64>>;

fn to_matrix(rows: &Rows) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(MorseError::InvalidInput("matrix must be square and nonempty".into()));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn to_rows(m: &DMatrix<f64>) -> Rows {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

/// A(s) = A⁻ + (A⁺ - A⁻)(1 + tanh(s/w))/2 plus an optional bump-supported perturbation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperatorFamily {
    pub domain: Domain,
    pub minus: Rows,
    pub plus: Rows,
    #[serde(default = "one")]
    pub width: f64,
    /// B(s) = max(0, 1 - (s/r)²) · matrix.
    #[serde(default)]
    pub perturbation: Option<Perturbation>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Perturbation {
    pub radius: f64,
    pub matrix: Rows,
}

#[derive(Debug, Clone)]
struct Compiled {
    minus: DMatrix<f64>,
    plus: DMatrix<f64>,
    width: f64,
    bump: Option<(f64, DMatrix<f64>)>,
}

impl Compiled {
    fn a(&self, s: f64) -> DMatrix<f64> {
        let w = 0.5 * (1.0 + (s / self.width).tanh());
        let mut a = &self.minus + (&self.plus - &self.minus) * w;
        if let Some((r, b)) = &self.bump {
            let q = 1.0 - (s / r).powi(2);
            if q > 0.0 {
                a += b * q;
            }
        }
        a
    }
}

impl OperatorFamily {
    pub fn tanh(domain: Domain, minus: &DMatrix<f64>, plus: &DMatrix<f64>) -> Self {
        Self { domain, minus: to_rows(minus), plus: to_rows(plus), width: 1.0, perturbation: None }
    }

    pub fn constant(domain: Domain, a: &DMatrix<f64>) -> Self {
        Self::tanh(domain, a, a)
    }

    pub fn dim(&self) -> usize {
        self.minus.len()
    }

    fn compile(&self) -> Result<Compiled> {
        let minus = to_matrix(&self.minus)?;
        let plus = to_matrix(&self.plus)?;
        if minus.nrows() != plus.nrows() {
            return Err(MorseError::InvalidInput("endpoint matrices differ in size".into()));
        }
        if !(self.width > 0.0) {
            return Err(MorseError::InvalidInput("profile width must be positive".into()));
        }
        let bump = match &self.perturbation {
            Some(p) => {
                let m = to_matrix(&p.matrix)?;
                if m.nrows() != minus.nrows() || !(p.radius > 0.0) {
                    return Err(MorseError::InvalidInput("bad perturbation".into()));
                }
                Some((p.radius, m))
            }
            None => None,
        };
        Ok(Compiled { minus, plus, width: self.width, bump })
    }

    pub fn a(&self, s: f64) -> Result<DMatrix<f64>> {
        Ok(self.compile()?.a(s))
    }

    /// Smallest |eigenvalue| over the endpoints the domain needs (∞ on compact intervals).
    /// Fails when a required endpoint is not symmetric and nondegenerate.
    pub fn epsilon_asym(&self) -> Result<f64> {
        let c = self.compile()?;
        let mut eps = f64::INFINITY;
        for (need, m, name) in [(self.domain.needs_minus(), &c.minus, "A-"), (self.domain.needs_plus(), &c.plus, "A+")] {
            if !need {
                continue;
            }
            if (m - m.transpose()).amax() > 1e-12 * (1.0 + m.amax()) {
                return Err(MorseError::InvalidInput(format!("{name} is not symmetric")));
            }
            let e = m.clone().symmetric_eigen().eigenvalues.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
            if e == 0.0 {
                return Err(MorseError::InvalidInput(format!("{name} is degenerate")));
            }
            eps = eps.min(e);
        }
        Ok(eps)
    }

    /// Morse indices μ(A⁻), μ(A⁺).
    pub fn asymptotic_indices(&self) -> Result<(usize, usize)> {
        let c = self.compile()?;
        let mu = |m: &DMatrix<f64>| m.clone().symmetric_eigen().eigenvalues.iter().filter(|v| **v < 0.0).count();
        Ok((mu(&c.minus), mu(&c.plus)))
    }

    /// ind = μ(A⁻) - μ(A⁺), μ(A⁻), n - μ(A⁺), n by domain.
    pub fn predicted_index(&self) -> Result<i64> {
        let (mm, mp) = self.asymptotic_indices()?;
        let n = self.dim() as i64;
        Ok(match self.domain {
            Domain::FullLine => mm as i64 - mp as i64,
            Domain::HalfLineMinus => mm as i64,
            Domain::HalfLinePlus => n - mp as i64,
            Domain::CompactInterval { .. } => n,
        })
    }

    /// Grid interval of the domain truncated at ±L.
    pub fn interval(&self, l: f64) -> (f64, f64) {
        match self.domain {
            Domain::FullLine => (-l, l),
            Domain::HalfLineMinus => (-l, 0.0),
            Domain::HalfLinePlus => (0.0, l),
            Domain::CompactInterval { t } => (-t, t),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IndexOptions {
    pub l: f64,
    pub m: usize,
}

impl Default for IndexOptions {
    fn default() -> Self {
        Self { l: L_DEFAULT, m: M_DEFAULT }
    }
}

impl IndexOptions {
    /// The default L raised to L_FACTOR/ε_asym when the family needs it.
    pub fn for_family(f: &OperatorFamily) -> Result<Self> {
        let eps = f.epsilon_asym()?;
        let mut o = Self::default();
        if !f.domain.bounded() {
            o.l = o.l.max(L_FACTOR / eps * (1.0 + 1e-12));
        }
        Ok(o)
    }
}

fn check_grid(f: &OperatorFamily, l: f64, m: usize) -> Result<f64> {
    if m < M_MIN {
        return Err(MorseError::GridTooCoarse { detail: format!("m = {m} < {M_MIN}") });
    }
    let eps = f.epsilon_asym()?;
    if !f.domain.bounded() && l < L_FACTOR / eps {
        return Err(MorseError::GridTooCoarse { detail: format!("L = {l} < {L_FACTOR}/ε_asym = {}", L_FACTOR / eps) });
    }
    let c = f.compile()?;
    for (need, s, lim) in [(f.domain.needs_minus(), -l, &c.minus), (f.domain.needs_plus(), l, &c.plus)] {
        if need && (c.a(s) - lim).amax() > ASYMPTOTIC_TOL {
            return Err(MorseError::InvalidInput(format!("A({s}) has not reached its limit")));
        }
    }
    Ok(eps)
}

/// Box-scheme matrix: rows (ξ_{i+1} - ξ_i)/h + A(s_{i+½})(ξ_i + ξ_{i+1})/2 for the m - 1 cells,
/// columns all m·n grid unknowns; no boundary rows.
pub fn discretize(f: &OperatorFamily, l: f64, m: usize) -> Result<DMatrix<f64>> {
    check_grid(f, l, m)?;
    let c = f.compile()?;
    let n = f.dim();
    let (a, b) = f.interval(l);
    let h = (b - a) / (m - 1) as f64;
    let mut mat = DMatrix::zeros((m - 1) * n, m * n);
    for i in 0..m - 1 {
        let am = c.a(a + (i as f64 + 0.5) * h);
        for r in 0..n {
            for col in 0..n {
                let half = 0.5 * am[(r, col)];
                let id = if r == col { 1.0 / h } else { 0.0 };
                mat[(i * n + r, i * n + col)] = half - id;
                mat[(i * n + r, (i + 1) * n + col)] = half + id;
            }
        }
    }
    Ok(mat)
}

#[derive(Debug, Clone, Serialize)]
pub struct IndexReport {
    pub domain: Domain,
    pub n: usize,
    pub dim_ker: usize,
    pub dim_coker: usize,
    pub index: i64,
    pub predicted_index: i64,
    /// Log growth exponents at the infinite ends compared with δL (kernel, then cokernel).
    pub growth_exponents: Vec<f64>,
    pub log_threshold: f64,
    /// Singular values used for thresholding: principal-angle cosines, or the smallest
    /// singular values of the box matrix on compact intervals.
    pub singular_values: Vec<f64>,
}

impl IndexReport {
    pub fn matches(&self) -> bool {
        self.index == self.predicted_index
    }
}

/// One Cayley step of ξ' = -B ξ over h (h < 0 steps backwards).
fn cayley(b: &DMatrix<f64>, h: f64) -> Result<DMatrix<f64>> {
    let n = b.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let lhs = &id + b * (0.5 * h);
    let rhs = &id - b * (0.5 * h);
    lhs.lu().solve(&rhs).ok_or_else(|| MorseError::GridTooCoarse { detail: "singular Cayley step".into() })
}

/// Fixed generic orthonormal start frame, so growth exponents come out ordered.
fn start_frame(n: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |i, j| crate::geometry::halton(1 + i * n + j, 3) - 0.5 + if i == j { 1.0 } else { 0.0 });
    m.qr().q()
}

/// Orthonormalized propagation from `from` to `to` in `steps` Cayley steps; returns the frame
/// at `to` and the accumulated log growth of each column.
fn propagate(b: &dyn Fn(f64) -> DMatrix<f64>, from: f64, to: f64, steps: usize, n: usize) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let h = (to - from) / steps as f64;
    let mut q = start_frame(n);
    let mut g = vec![0.0; n];
    for i in 0..steps {
        let s = cayley(&b(from + (i as f64 + 0.5) * h), h)?;
        let qr = (s * q).qr();
        let r = qr.r();
        q = qr.q();
        for j in 0..n {
            g[j] += r[(j, j)].abs().ln();
            if r[(j, j)] < 0.0 {
                q.column_mut(j).neg_mut();
            }
        }
    }
    Ok((q, g))
}

enum Admissible {
    All,
    Zero,
    Span(DMatrix<f64>),
}

/// Solutions decaying at an infinite end: the directions at the reference point that grow by
/// more than e^{δ·dist} when coming in from the end.
fn decaying(b: &dyn Fn(f64) -> DMatrix<f64>, end: f64, s_ref: f64, steps: usize, n: usize, delta: f64, log: &mut Vec<f64>) -> Result<Admissible> {
    let (q, g) = propagate(b, end, s_ref, steps, n)?;
    let thr = delta * (end - s_ref).abs();
    let band = AMBIGUITY_FACTOR.ln();
    for &e in &g {
        if (e - thr).abs() < band {
            return Err(MorseError::ThresholdAmbiguity { value: e.exp(), threshold: thr.exp() });
        }
    }
    log.extend(&g);
    let k = g.iter().take_while(|&&e| e > thr).count();
    if g[k..].iter().any(|&e| e > thr) {
        return Err(MorseError::ThresholdAmbiguity { value: g[k..].iter().cloned().fold(f64::MIN, f64::max).exp(), threshold: thr.exp() });
    }
    Ok(match k {
        0 => Admissible::Zero,
        k if k == n => Admissible::All,
        k => Admissible::Span(q.columns(0, k).into_owned()),
    })
}

fn intersection_dim(a: &Admissible, b: &Admissible, cosines: &mut Vec<f64>) -> Result<usize> {
    Ok(match (a, b) {
        (Admissible::Zero, _) | (_, Admissible::Zero) => 0,
        (Admissible::All, Admissible::All) => usize::MAX,
        (Admissible::All, Admissible::Span(s)) | (Admissible::Span(s), Admissible::All) => s.ncols(),
        (Admissible::Span(p), Admissible::Span(q)) => {
            let sv = (p.transpose() * q).singular_values();
            let mut k = 0;
            for &c in sv.iter() {
                let gap = (1.0 - c).max(0.0);
                if gap > SIGMA_TOL / AMBIGUITY_FACTOR && gap < SIGMA_TOL * AMBIGUITY_FACTOR {
                    return Err(MorseError::ThresholdAmbiguity { value: gap, threshold: SIGMA_TOL });
                }
                if gap <= SIGMA_TOL {
                    k += 1;
                }
                cosines.push(c);
            }
            k
        }
    })
}

/// Dimension of the space of solutions of ξ' = -B ξ admissible on the domain: decaying at
/// infinite ends, and vanishing at finite ends when `dirichlet`.
#[allow(clippy::too_many_arguments)]
fn solution_dim(
    b: &dyn Fn(f64) -> DMatrix<f64>,
    domain: Domain,
    l: f64,
    m: usize,
    n: usize,
    delta: f64,
    dirichlet: bool,
    log: &mut Vec<f64>,
    cosines: &mut Vec<f64>,
) -> Result<usize> {
    let finite = if dirichlet { Admissible::Zero } else { Admissible::All };
    let steps = |len: f64| ((m - 1) as f64 * len / (2.0 * l)).ceil().max(1.0) as usize;
    let (left, right) = match domain {
        Domain::FullLine => (decaying(b, -l, 0.0, steps(l), n, delta, log)?, decaying(b, l, 0.0, steps(l), n, delta, log)?),
        Domain::HalfLineMinus => (decaying(b, -l, 0.0, (m - 1) / 1, n, delta, log)?, finite),
        Domain::HalfLinePlus => (finite, decaying(b, l, 0.0, m - 1, n, delta, log)?),
        Domain::CompactInterval { .. } => (finite, if dirichlet { Admissible::Zero } else { Admissible::All }),
    };
    let d = intersection_dim(&left, &right, cosines)?;
    Ok(if d == usize::MAX { n } else { d })
}

/// Kernel and cokernel dimensions of a dense matrix from its singular values.
pub fn dense_kernel_cokernel(mat: &DMatrix<f64>) -> (usize, usize, Vec<f64>) {
    let sv = mat.clone().singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let rank = sv.iter().filter(|&&s| s > SIGMA_TOL * smax).count();
    let mut tail: Vec<f64> = sv.iter().cloned().collect();
    tail.sort_by(|a, b| a.total_cmp(b));
    tail.truncate(2 * mat.nrows().min(mat.ncols()).min(8));
    (mat.ncols() - rank, mat.nrows() - rank, tail)
}

pub fn numeric_index(f: &OperatorFamily, opts: &IndexOptions) -> Result<IndexReport> {
    let eps = check_grid(f, opts.l, opts.m)?;
    let n = f.dim();
    let predicted_index = f.predicted_index()?;
    if let Domain::CompactInterval { .. } = f.domain {
        let mat = discretize(f, opts.l, M_COMPACT.min(opts.m))?;
        let (ker, coker, tail) = dense_kernel_cokernel(&mat);
        let smax = mat.clone().singular_values().max();
        for s in &tail {
            let r = s / (SIGMA_TOL * smax);
            if r > 1.0 / AMBIGUITY_FACTOR && r < AMBIGUITY_FACTOR {
                return Err(MorseError::ThresholdAmbiguity { value: *s, threshold: SIGMA_TOL * smax });
            }
        }
        return Ok(IndexReport {
            domain: f.domain,
            n,
            dim_ker: ker,
            dim_coker: coker,
            index: ker as i64 - coker as i64,
            predicted_index,
            growth_exponents: Vec::new(),
            log_threshold: f64::NAN,
            singular_values: tail,
        });
    }
    let c = f.compile()?;
    let delta = 0.5 * eps;
    let a = |s: f64| c.a(s);
    let adj = |s: f64| -c.a(s).transpose();
    let mut log = Vec::new();
    let mut cosines = Vec::new();
    let ker = solution_dim(&a, f.domain, opts.l, opts.m, n, delta, false, &mut log, &mut cosines)?;
    let coker = solution_dim(&adj, f.domain, opts.l, opts.m, n, delta, true, &mut log, &mut cosines)?;
    Ok(IndexReport {
        domain: f.domain,
        n,
        dim_ker: ker,
        dim_coker: coker,
        index: ker as i64 - coker as i64,
        predicted_index,
        growth_exponents: log,
        log_threshold: delta * opts.l,
        singular_values: cosines,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FormulaCheck {
    pub report: IndexReport,
    pub matches: bool,
}

pub fn verify_index_formula(f: &OperatorFamily) -> Result<FormulaCheck> {
    let report = numeric_index(f, &IndexOptions::for_family(f)?)?;
    Ok(FormulaCheck { matches: report.matches(), report })
}

/// Random symmetric matrix with eigenvalue magnitudes in EIG_RANGE and `negative` negative ones.
pub fn random_symmetric<R: Rng>(rng: &mut R, n: usize, negative: usize, diagonal: bool) -> DMatrix<f64> {
    let mut eig: Vec<f64> = (0..n).map(|_| rng.gen_range(EIG_RANGE.0..=EIG_RANGE.1)).collect();
    eig.sort_by(|a, b| a.total_cmp(b));
    let vals: Vec<f64> = (0..n).map(|i| if i < negative { -eig[negative - 1 - i] } else { eig[i] }).collect();
    let d = DMatrix::from_diagonal(&DVector::from_vec(vals));
    if diagonal {
        return d;
    }
    let g = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let q = g.qr().q();
    let a = &q * d * q.transpose();
    (&a + a.transpose()) * 0.5
}

/// Tanh-profile family between random endpoints; diagonal families have ascending endpoints.
pub fn random_family<R: Rng>(rng: &mut R, domain: Domain, n: usize, diagonal: bool) -> OperatorFamily {
    let mm = rng.gen_range(0..=n);
    let mp = rng.gen_range(0..=n);
    let minus = random_symmetric(rng, n, mm, diagonal);
    let plus = random_symmetric(rng, n, mp, diagonal);
    OperatorFamily::tanh(domain, &minus, &plus)
}

/// Bump-supported perturbation of operator norm `PERTURBATION_NORM`.
pub fn random_perturbation<R: Rng>(rng: &mut R, n: usize) -> Perturbation {
    let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let s = m.clone().singular_values().max();
    Perturbation { radius: 2.0, matrix: to_rows(&(m * (PERTURBATION_NORM / s))) }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_count")]
    pub families_per_domain: usize,
    #[serde(default = "default_nmax")]
    pub n_max: usize,
    #[serde(default = "default_t")]
    pub compact_t: f64,
    #[serde(default)]
    pub diagonal: bool,
    #[serde(default)]
    pub perturb: bool,
}

fn default_count() -> usize {
    FAMILIES_PER_DOMAIN
}
fn default_nmax() -> usize {
    3
}
fn default_t() -> f64 {
    2.0
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self { seed: 0, families_per_domain: FAMILIES_PER_DOMAIN, n_max: 3, compact_t: 2.0, diagonal: false, perturb: false }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepEntry {
    pub family: OperatorFamily,
    pub report: IndexReport,
    /// Index after a compactly supported perturbation, when requested.
    pub perturbed_index: Option<i64>,
    /// max{μ(A⁻) - μ(A⁺), 0} on diagonal full-line families.
    pub predicted_kernel: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub spec: SweepSpec,
    pub entries: Vec<SweepEntry>,
    pub matched: usize,
    pub total: usize,
}

/// Random families per domain kind, evaluated in parallel.
pub fn sweep(spec: &SweepSpec) -> Result<SweepReport> {
    if spec.n_max == 0 {
        return Err(MorseError::InvalidInput("n_max must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut jobs = Vec::new();
    for d in Domain::all(spec.compact_t) {
        for _ in 0..spec.families_per_domain {
            let n = rng.gen_range(1..=spec.n_max);
            let fam = random_family(&mut rng, d, n, spec.diagonal);
            let pert = spec.perturb.then(|| random_perturbation(&mut rng, n));
            jobs.push((fam, pert));
        }
    }
    let entries: Vec<SweepEntry> = jobs
        .into_par_iter()
        .map(|(family, pert)| {
            let report = verify_index_formula(&family)?.report;
            let perturbed_index = match pert {
                Some(p) => {
                    let mut g = family.clone();
                    g.perturbation = Some(p);
                    Some(numeric_index(&g, &IndexOptions::for_family(&g)?)?.index)
                }
                None => None,
            };
            let predicted_kernel = if spec.diagonal && family.domain == Domain::FullLine {
                let (mm, mp) = family.asymptotic_indices()?;
                Some(mm.saturating_sub(mp))
            } else {
                None
            };
            Ok(SweepEntry { family, report, perturbed_index, predicted_kernel })
        })
        .collect::<Result<_>>()?;
    let matched = entries
        .iter()
        .filter(|e| {
            e.report.matches()
                && e.perturbed_index.map_or(true, |i| i == e.report.index)
                && e.predicted_kernel.map_or(true, |k| k == e.report.dim_ker)
        })
        .count();
    Ok(SweepReport { spec: spec.clone(), total: entries.len(), entries, matched })
}

/// Smooth monotone cutoff, 0 for s ≤ 0 and 1 for s ≥ 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cutoff {
    Smoothstep,
    /// e^{-1/s} / (e^{-1/s} + e^{-1/(1-s)}), smooth of all orders.
    Exponential,
}

impl Cutoff {
    pub fn eval(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if s >= 1.0 {
            return 1.0;
        }
        match self {
            Cutoff::Smoothstep => crate::flow::smoothstep(s),
            Cutoff::Exponential => {
                let a = (-1.0 / s).exp();
                let b = (-1.0 / (1.0 - s)).exp();
                a / (a + b)
            }
        }
    }
}

/// Closed form (e^{2TH₋}ξ₋, ξ₊, ξ₋, e^{-2TH₊}ξ₊).
pub fn infinitesimal_glue_closed_form(h: &[f64], t: f64, xi_plus: &[f64], xi_minus: &[f64]) -> Vec<f64> {
    let mu = xi_minus.len();
    let mut out = Vec::with_capacity(2 * h.len());
    out.extend((0..mu).map(|i| (2.0 * t * h[i]).exp() * xi_minus[i]));
    out.extend_from_slice(xi_plus);
    out.extend_from_slice(xi_minus);
    out.extend((0..xi_plus.len()).map(|i| (-2.0 * t * h[mu + i]).exp() * xi_plus[i]));
    out
}

/// Infinitesimal gluing at a critical point with diagonal Hessian H (ascending, μ negative
/// entries first). The preglued vector of the stable tangent ξ₊ and unstable tangent ξ₋ is
/// projected onto ker(∂_s + H) on [-T, T] along the complement fixed by the unstable part at T
/// and the stable part at -T, by solving the discretized boundary-value system; returns
/// (ξ(-T), ξ(T)) in the four blocks.
pub fn infinitesimal_glue(h: &[f64], t: f64, xi_plus: &[f64], xi_minus: &[f64], cutoff: Cutoff) -> Result<Vec<f64>> {
    let n = h.len();
    let mu = h.iter().filter(|v| **v < 0.0).count();
    if h.iter().any(|v| *v == 0.0) || h.windows(2).any(|w| w[1] < w[0]) {
        return Err(MorseError::InvalidInput("H must be nondegenerate and ascending".into()));
    }
    if xi_minus.len() != mu || xi_plus.len() != n - mu {
        return Err(MorseError::InvalidInput(format!("expected |ξ₋| = {mu} and |ξ₊| = {}", n - mu)));
    }
    if !(t > 0.0) {
        return Err(MorseError::InvalidInput("T must be positive".into()));
    }
    let amax = h.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if t * amax > GLUE_EXPONENT_LIMIT {
        return Err(MorseError::IllConditioned { product: t * amax });
    }
    // tangent paths: x(σ) = e^{-Hσ}(0, ξ₊) on [0, ∞), y(σ) = e^{-Hσ}(ξ₋, 0) on (-∞, 0]
    let x0: Vec<f64> = (0..n).map(|i| if i < mu { 0.0 } else { xi_plus[i - mu] }).collect();
    let y0: Vec<f64> = (0..n).map(|i| if i < mu { xi_minus[i] } else { 0.0 }).collect();
    let preglued = |s: f64| -> Vec<f64> {
        // x switched off across [-T, 0], y switched on across [0, T]
        let a = 1.0 - cutoff.eval(s / t + 1.0);
        let b = cutoff.eval(s / t);
        (0..n).map(|i| a * (-h[i] * (s + t)).exp() * x0[i] + b * (-h[i] * (s - t)).exp() * y0[i]).collect()
    };
    let (z_lo, z_hi) = (preglued(-t), preglued(t));
    // unknowns ξ_k at GLUE_INTERVALS + 1 nodes; exact constant-coefficient steps, per-component
    // scaling e^{±H step/2} keeps every row O(1)
    let k = GLUE_INTERVALS;
    let step = 2.0 * t / k as f64;
    let size = (k + 1) * n;
    let mut mat = DMatrix::zeros(size, size);
    let mut rhs = DVector::zeros(size);
    for j in 0..k {
        for i in 0..n {
            let r = j * n + i;
            mat[(r, j * n + i)] = -(-0.5 * h[i] * step).exp();
            mat[(r, (j + 1) * n + i)] = (0.5 * h[i] * step).exp();
        }
    }
    for i in 0..n {
        let r = k * n + i;
        if i < mu {
            mat[(r, k * n + i)] = 1.0;
            rhs[r] = z_hi[i];
        } else {
            mat[(r, i)] = 1.0;
            rhs[r] = z_lo[i];
        }
    }
    let sol = mat.lu().solve(&rhs).ok_or_else(|| MorseError::IllConditioned { product: t * amax })?;
    let mut out = Vec::with_capacity(2 * n);
    out.extend((0..n).map(|i| sol[i]));
    out.extend((0..n).map(|i| sol[k * n + i]));
    // reorder each endpoint into (unstable, stable) blocks, which is already the coordinate order
    Ok(out)
}
