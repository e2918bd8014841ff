//! Morse complexes over GF(2): boundary checks, homology, spectral numbers.

use serde::{Deserialize, Serialize};

use crate::critical::{CriticalClass, CriticalPoint, TAU_VAL};
use crate::error::{MorseError, Result};
use crate::moduli::ModuliCount;

/// Largest image rank for which cosets are enumerated exhaustively.
pub const R_MAX: usize = 20;
/// Homology dimension above which only basis classes enter the spectral report.
pub const MAX_CLASS_ENUMERATION: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct BitVec {
    len: usize,
    words: Vec<u64>,
}

impl BitVec {
    pub fn zeros(len: usize) -> Self {
        Self { len, words: vec![0; len.div_ceil(64)] }
    }

    pub fn from_indices(len: usize, idx: &[usize]) -> Self {
        let mut v = Self::zeros(len);
        for &i in idx {
            v.flip(i);
        }
        v
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b & 1 == 1 {
                v.set(i, true);
            }
        }
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, b: bool) {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        let m = 1u64 << (i % 64);
        if b {
            self.words[i / 64] |= m;
        } else {
            self.words[i / 64] &= !m;
        }
    }

    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        self.words[i / 64] ^= 1u64 << (i % 64);
    }

    pub fn xor_assign(&mut self, o: &BitVec) {
        assert_eq!(self.len, o.len);
        for (a, b) in self.words.iter_mut().zip(&o.words) {
            *a ^= b;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(k, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let t = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(k * 64 + t)
            })
        })
    }

    pub fn lowest(&self) -> Option<usize> {
        self.ones().next()
    }

    pub fn bits(&self) -> Vec<u8> {
        (0..self.len).map(|i| self.get(i) as u8).collect()
    }
}

impl Serialize for BitVec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.bits().serialize(s)
    }
}

impl<'de> Deserialize<'de> for BitVec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(BitVec::from_bits(&Vec::<u8>::deserialize(d)?))
    }
}

/// GF(2) matrix stored by columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMatrix {
    pub rows: usize,
    pub columns: Vec<BitVec>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, columns: vec![BitVec::zeros(rows); cols] }
    }

    pub fn from_rows(rows: &[Vec<u8>], cols: usize) -> Self {
        let mut m = Self::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), cols, "row {i} has wrong length");
            for (j, &b) in r.iter().enumerate() {
                if b & 1 == 1 {
                    m.columns[j].set(i, true);
                }
            }
        }
        m
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.columns[j].get(i)
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.rows).map(|i| (0..self.cols()).map(|j| self.get(i, j) as u8).collect()).collect()
    }

    pub fn apply(&self, v: &BitVec) -> BitVec {
        assert_eq!(v.len(), self.cols());
        let mut out = BitVec::zeros(self.rows);
        for j in v.ones() {
            out.xor_assign(&self.columns[j]);
        }
        out
    }

    pub fn mul(&self, o: &BitMatrix) -> BitMatrix {
        assert_eq!(self.cols(), o.rows, "dimension mismatch");
        BitMatrix { rows: self.rows, columns: o.columns.iter().map(|c| self.apply(c)).collect() }
    }

    pub fn is_zero(&self) -> bool {
        self.columns.iter().all(BitVec::is_zero)
    }

    /// Column reduction by lowest set bit; returns reduced columns and the combinations producing them.
    fn reduce(&self) -> (Vec<BitVec>, Vec<BitVec>) {
        let n = self.cols();
        let mut cols = self.columns.clone();
        let mut combo: Vec<BitVec> = (0..n).map(|j| BitVec::from_indices(n, &[j])).collect();
        let mut pivot_owner: Vec<Option<usize>> = vec![None; self.rows];
        for j in 0..n {
            while let Some(p) = cols[j].lowest() {
                match pivot_owner[p] {
                    Some(i) => {
                        let (ci, ki) = (cols[i].clone(), combo[i].clone());
                        cols[j].xor_assign(&ci);
                        combo[j].xor_assign(&ki);
                    }
                    None => {
                        pivot_owner[p] = Some(j);
                        break;
                    }
                }
            }
        }
        (cols, combo)
    }

    pub fn rank(&self) -> usize {
        self.reduce().0.iter().filter(|c| !c.is_zero()).count()
    }

    pub fn kernel_basis(&self) -> Vec<BitVec> {
        let (cols, combo) = self.reduce();
        cols.iter().zip(combo).filter(|(c, _)| c.is_zero()).map(|(_, k)| k).collect()
    }

    /// Linearly independent columns spanning the image.
    pub fn image_basis(&self) -> Vec<BitVec> {
        self.reduce().0.into_iter().filter(|c| !c.is_zero()).collect()
    }
}

/// Span membership and reduction against a growing independent set.
#[derive(Debug, Clone, Default)]
pub struct Echelon {
    pivots: Vec<(usize, BitVec)>,
}

impl Echelon {
    pub fn reduce(&self, v: &BitVec) -> BitVec {
        let mut v = v.clone();
        loop {
            let Some(p) = v.lowest() else { return v };
            match self.pivots.iter().find(|(q, _)| *q == p) {
                Some((_, b)) => v.xor_assign(b),
                None => return v,
            }
        }
    }

    /// Adds `v` if it is independent of the current span; returns whether it was added.
    pub fn insert(&mut self, v: &BitVec) -> bool {
        let r = self.reduce(v);
        match r.lowest() {
            Some(p) => {
                self.pivots.push((p, r));
                true
            }
            None => false,
        }
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }
}

/// Coefficients c with Σ c_i basis_i = v, if v lies in the span.
pub fn solve_span(basis: &[BitVec], v: &BitVec) -> Option<BitVec> {
    let n = basis.len();
    // each row: reduced vector and the combination of basis vectors producing it
    let mut rows: Vec<(usize, BitVec, BitVec)> = Vec::new();
    for (i, b) in basis.iter().enumerate() {
        let mut r = b.clone();
        let mut c = BitVec::from_indices(n, &[i]);
        while let Some(p) = r.lowest() {
            match rows.iter().find(|(q, _, _)| *q == p) {
                Some((_, rr, cc)) => {
                    r.xor_assign(rr);
                    c.xor_assign(cc);
                }
                None => break,
            }
        }
        if let Some(p) = r.lowest() {
            rows.push((p, r, c));
        }
    }
    let mut r = v.clone();
    let mut c = BitVec::zeros(n);
    while let Some(p) = r.lowest() {
        let (_, rr, cc) = rows.iter().find(|(q, _, _)| *q == p)?;
        r.xor_assign(rr);
        c.xor_assign(cc);
    }
    Some(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub label: String,
    pub value: f64,
}

/// A generator with its degree, as read off a critical point or a quotient class.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub label: String,
    pub value: f64,
    pub degree: usize,
}

pub fn cells_from_crits(crits: &[CriticalPoint]) -> Result<Vec<Cell>> {
    crits
        .iter()
        .map(|c| {
            if c.degenerate {
                Err(MorseError::DegenerateCritical { label: c.label.clone() })
            } else {
                Ok(Cell { label: c.label.clone(), value: c.value, degree: c.morse_index })
            }
        })
        .collect()
}

pub fn cells_from_classes(classes: &[CriticalClass]) -> Vec<Cell> {
    classes.iter().map(|c| Cell { label: c.label.clone(), value: c.value, degree: c.morse_index }).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainComplexGF2 {
    /// Generators per degree 0..=top.
    pub generators: Vec<Vec<Generator>>,
    /// `boundary[k]` maps degree k to k-1; `boundary[0]` has no rows.
    pub boundary: Vec<BitMatrix>,
}

impl ChainComplexGF2 {
    pub fn empty() -> Self {
        Self { generators: Vec::new(), boundary: Vec::new() }
    }

    /// From generators and, per degree k ≥ 1, the boundary of each degree-k generator as indices into degree k-1.
    pub fn from_parts(generators: Vec<Vec<Generator>>, boundary: Vec<Vec<Vec<usize>>>) -> Result<Self> {
        let top = generators.len();
        let mut mats = Vec::with_capacity(top);
        for k in 0..top {
            let rows = if k == 0 { 0 } else { generators[k - 1].len() };
            let mut m = BitMatrix::zeros(rows, generators[k].len());
            if k >= 1 {
                let cols = boundary.get(k - 1).cloned().unwrap_or_default();
                if !cols.is_empty() && cols.len() != generators[k].len() {
                    return Err(MorseError::InvalidInput(format!("boundary in degree {k} has {} columns", cols.len())));
                }
                for (j, col) in cols.iter().enumerate() {
                    for &i in col {
                        if i >= rows {
                            return Err(MorseError::InvalidInput(format!("boundary index {i} out of range in degree {k}")));
                        }
                        m.columns[j].flip(i);
                    }
                }
            }
            mats.push(m);
        }
        Ok(Self { generators, boundary: mats })
    }

    pub fn top_degree(&self) -> Option<usize> {
        self.generators.len().checked_sub(1)
    }

    pub fn rank_in(&self, k: usize) -> usize {
        self.generators.get(k).map_or(0, Vec::len)
    }

    pub fn generator_count(&self) -> usize {
        self.generators.iter().map(Vec::len).sum()
    }

    /// ∂_k, or a zero map when k is out of range.
    pub fn boundary_map(&self, k: usize) -> BitMatrix {
        match self.boundary.get(k) {
            Some(m) => m.clone(),
            None => BitMatrix::zeros(if k == 0 { 0 } else { self.rank_in(k - 1) }, self.rank_in(k)),
        }
    }

    pub fn find(&self, label: &str) -> Option<(usize, usize)> {
        self.generators
            .iter()
            .enumerate()
            .find_map(|(k, g)| g.iter().position(|x| x.label == label).map(|i| (k, i)))
    }

    /// Chain from generator labels (all of one degree).
    pub fn chain(&self, labels: &[&str]) -> Result<(usize, BitVec)> {
        let mut degree = None;
        let mut idx = Vec::new();
        for l in labels {
            let (k, i) = self.find(l).ok_or_else(|| MorseError::InvalidInput(format!("unknown generator {l}")))?;
            if degree.is_some_and(|d| d != k) {
                return Err(MorseError::InvalidInput("chain mixes degrees".into()));
            }
            degree = Some(k);
            idx.push(i);
        }
        let k = degree.ok_or_else(|| MorseError::InvalidInput("empty chain".into()))?;
        Ok((k, BitVec::from_indices(self.rank_in(k), &idx)))
    }

    pub fn chain_labels(&self, k: usize, v: &BitVec) -> Vec<String> {
        v.ones().map(|i| self.generators[k][i].label.clone()).collect()
    }

    pub fn to_document(&self) -> ComplexDocument {
        ComplexDocument {
            degrees: self
                .generators
                .iter()
                .enumerate()
                .map(|(k, g)| DegreeDocument { degree: k, generators: g.clone(), boundary: self.boundary[k].to_rows() })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DegreeDocument {
    pub degree: usize,
    pub generators: Vec<Generator>,
    /// Rows indexed by degree k-1 generators, columns by degree k generators.
    pub boundary: Vec<Vec<u8>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComplexDocument {
    pub degrees: Vec<DegreeDocument>,
}

fn count_between(counts: &[ModuliCount], s: &str, t: &str) -> Option<usize> {
    counts.iter().find(|m| m.source == s && m.target == t).map(|m| m.count)
}

/// Morse complex with ∂ given by mod-2 counts; generators in the order of `cells`.
pub fn build_complex(cells: &[Cell], counts: &[ModuliCount]) -> Result<ChainComplexGF2> {
    let top = match cells.iter().map(|c| c.degree).max() {
        Some(t) => t,
        None => return Ok(ChainComplexGF2::empty()),
    };
    let mut gens: Vec<Vec<Generator>> = vec![Vec::new(); top + 1];
    for c in cells {
        gens[c.degree].push(Generator { label: c.label.clone(), value: c.value });
    }
    let mut cols: Vec<Vec<Vec<usize>>> = Vec::new();
    for k in 1..=top {
        let mut deg = Vec::new();
        for x in &gens[k] {
            let mut col = Vec::new();
            for (i, y) in gens[k - 1].iter().enumerate() {
                let n = count_between(counts, &x.label, &y.label)
                    .ok_or_else(|| MorseError::MissingPair { source_label: x.label.clone(), target: y.label.clone() })?;
                if n % 2 == 1 {
                    col.push(i);
                }
            }
            deg.push(col);
        }
        cols.push(deg);
    }
    ChainComplexGF2::from_parts(gens, cols)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BoundaryReport {
    pub ok: bool,
    /// Degree k+1 with ∂_k ∂_{k+1} ≠ 0.
    pub offending_degree: Option<usize>,
}

pub fn verify_boundary_squared(c: &ChainComplexGF2) -> BoundaryReport {
    for k in 1..c.generators.len() {
        if !c.boundary_map(k).mul(&c.boundary_map(k + 1)).is_zero() {
            return BoundaryReport { ok: false, offending_degree: Some(k + 1) };
        }
    }
    BoundaryReport { ok: true, offending_degree: None }
}

#[derive(Debug, Clone, Serialize)]
pub struct HomologyResult {
    pub betti: Vec<usize>,
    pub generator_representatives: Vec<Vec<BitVec>>,
}

pub fn homology(c: &ChainComplexGF2) -> Result<HomologyResult> {
    if let Some(d) = verify_boundary_squared(c).offending_degree {
        return Err(MorseError::NotAComplex { degree: d });
    }
    let mut betti = Vec::new();
    let mut reps = Vec::new();
    for k in 0..c.generators.len() {
        let mut ech = Echelon::default();
        for b in c.boundary_map(k + 1).image_basis() {
            ech.insert(&b);
        }
        let mut rk = Vec::new();
        for z in c.boundary_map(k).kernel_basis() {
            if ech.insert(&z) {
                rk.push(z);
            }
        }
        betti.push(rk.len());
        reps.push(rk);
    }
    Ok(HomologyResult { betti, generator_representatives: reps })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MorseInequality {
    pub ok: bool,
    pub slack: i64,
}

pub fn morse_inequality_check(n_crit: usize, h: &HomologyResult) -> MorseInequality {
    let slack = n_crit as i64 - h.betti.iter().sum::<usize>() as i64;
    MorseInequality { ok: slack >= 0, slack }
}

/// Generator order for the minimax reduction: value descending, then label.
fn filtration_order(gens: &[Generator]) -> Vec<usize> {
    let mut o: Vec<usize> = (0..gens.len()).collect();
    o.sort_by(|&a, &b| {
        gens[b].value.partial_cmp(&gens[a].value).unwrap().then_with(|| gens[a].label.cmp(&gens[b].label))
    });
    o
}

fn top_generator(gens: &[Generator], v: &BitVec) -> Option<usize> {
    v.ones().max_by(|&a, &b| {
        gens[a].value.partial_cmp(&gens[b].value).unwrap().then_with(|| gens[b].label.cmp(&gens[a].label))
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralValue {
    pub sigma: f64,
    /// Generator attaining the max on the minimizing representative.
    pub witness: String,
    pub representative: BitVec,
}

fn check_class(c: &ChainComplexGF2, k: usize, class: &BitVec) -> Result<()> {
    if class.len() != c.rank_in(k) {
        return Err(MorseError::InvalidInput(format!("class has {} bits, degree {k} has {}", class.len(), c.rank_in(k))));
    }
    if !c.boundary_map(k).apply(class).is_zero() {
        return Err(MorseError::InvalidInput("class representative is not a cycle".into()));
    }
    Ok(())
}

/// Minimax over the coset by value-ordered reduction against an echelon basis of the image.
pub fn spectral_number_greedy(c: &ChainComplexGF2, k: usize, class: &BitVec) -> Result<SpectralValue> {
    check_class(c, k, class)?;
    let gens = &c.generators[k];
    let order = filtration_order(gens);
    let mut pos = vec![0; order.len()];
    for (r, &i) in order.iter().enumerate() {
        pos[i] = r;
    }
    let permute = |v: &BitVec| {
        let mut w = BitVec::zeros(v.len());
        for i in v.ones() {
            w.set(pos[i], true);
        }
        w
    };
    // lowest set bit in the permuted basis is the highest-valued generator
    let mut ech = Echelon::default();
    for b in c.boundary_map(k + 1).image_basis() {
        ech.insert(&permute(&b));
    }
    let r = ech.reduce(&permute(class));
    let Some(top) = r.lowest() else { return Err(MorseError::ZeroClass) };
    let mut rep = BitVec::zeros(class.len());
    for j in r.ones() {
        rep.set(order[j], true);
    }
    let g = &gens[order[top]];
    Ok(SpectralValue { sigma: g.value, witness: g.label.clone(), representative: rep })
}

/// Minimax by enumerating every element of the coset.
pub fn spectral_number_exhaustive(c: &ChainComplexGF2, k: usize, class: &BitVec) -> Result<SpectralValue> {
    check_class(c, k, class)?;
    let basis = c.boundary_map(k + 1).image_basis();
    if basis.len() > R_MAX {
        return Err(MorseError::InvalidInput(format!("image rank {} exceeds {R_MAX}", basis.len())));
    }
    let gens = &c.generators[k];
    let mut v = class.clone();
    let mut best: Option<(usize, BitVec)> = None;
    let better = |t: usize, b: &Option<(usize, BitVec)>| match b {
        None => true,
        Some((bt, _)) => {
            let (x, y) = (&gens[t], &gens[*bt]);
            x.value < y.value || (x.value == y.value && x.label > y.label)
        }
    };
    for step in 0u64..(1u64 << basis.len()) {
        if step > 0 {
            v.xor_assign(&basis[step.trailing_zeros() as usize]);
        }
        match top_generator(gens, &v) {
            None => return Err(MorseError::ZeroClass),
            Some(t) => {
                if better(t, &best) {
                    best = Some((t, v.clone()));
                }
            }
        }
    }
    let (t, rep) = best.expect("coset is nonempty");
    Ok(SpectralValue { sigma: gens[t].value, witness: gens[t].label.clone(), representative: rep })
}

/// σ(α): exhaustive up to image rank `R_MAX`, value-ordered reduction beyond.
pub fn spectral_number(c: &ChainComplexGF2, k: usize, class: &BitVec) -> Result<SpectralValue> {
    if c.boundary_map(k + 1).rank() <= R_MAX {
        spectral_number_exhaustive(c, k, class)
    } else {
        spectral_number_greedy(c, k, class)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ActionGap {
    /// `f64::INFINITY` when fewer than two distinct values exist.
    pub value: f64,
    pub singleton: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassSpectral {
    pub degree: usize,
    /// Coefficients on the homology basis of this degree.
    pub coordinates: BitVec,
    pub spectral: SpectralValue,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    pub classes: Vec<ClassSpectral>,
    pub spectrum: Vec<f64>,
    pub homological_spectrum: Vec<f64>,
    pub action_gap: ActionGap,
}

fn merge_values(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out: Vec<f64> = Vec::new();
    for x in v {
        if out.last().is_none_or(|&l| x - l > TAU_VAL) {
            out.push(x);
        }
    }
    out
}

pub fn action_gap(homological_spectrum: &[f64]) -> ActionGap {
    let v = merge_values(homological_spectrum.to_vec());
    if v.len() < 2 {
        return ActionGap { value: f64::INFINITY, singleton: true };
    }
    let gap = v.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    ActionGap { value: gap, singleton: false }
}

pub fn spectral_report(c: &ChainComplexGF2, h: &HomologyResult) -> Result<SpectralReport> {
    let mut classes = Vec::new();
    for (k, reps) in h.generator_representatives.iter().enumerate() {
        let b = reps.len();
        let combos: Vec<BitVec> = if b <= MAX_CLASS_ENUMERATION {
            (1u64..(1u64 << b))
                .map(|m| {
                    let idx: Vec<usize> = (0..b).filter(|i| m >> i & 1 == 1).collect();
                    BitVec::from_indices(b, &idx)
                })
                .collect()
        } else {
            (0..b).map(|i| BitVec::from_indices(b, &[i])).collect()
        };
        for coords in combos {
            let mut xi = BitVec::zeros(c.rank_in(k));
            for i in coords.ones() {
                xi.xor_assign(&reps[i]);
            }
            let spectral = spectral_number(c, k, &xi)?;
            classes.push(ClassSpectral { degree: k, coordinates: coords, spectral });
        }
    }
    let spectrum = merge_values(c.generators.iter().flatten().map(|g| g.value).collect());
    let homological_spectrum = merge_values(classes.iter().map(|x| x.spectral.sigma).collect());
    let gap = action_gap(&homological_spectrum);
    Ok(SpectralReport { classes, spectrum, homological_spectrum, action_gap: gap })
}

/// Whether `value` lies within τ_val of a member of `spectrum`.
pub fn in_spectrum(value: f64, spectrum: &[f64]) -> bool {
    spectrum.iter().any(|s| (s - value).abs() <= TAU_VAL)
}

fn gen(label: &str, value: f64) -> Generator {
    Generator { label: label.into(), value }
}

/// Two maxima over one saddle and one minimum, ∂x₁ = ∂x₂ = y.
pub fn heart_complex() -> ChainComplexGF2 {
    ChainComplexGF2::from_parts(
        vec![vec![gen("z", 0.0)], vec![gen("y", 2.0)], vec![gen("x1", 5.0), gen("x2", 4.0)]],
        vec![vec![vec![]], vec![vec![0], vec![0]]],
    )
    .expect("static fixture")
}

/// Heart with the second minimum removed: ∂y = z makes ∂² nonzero.
pub fn punctured_heart_complex() -> ChainComplexGF2 {
    ChainComplexGF2::from_parts(
        vec![vec![gen("z", 0.0)], vec![gen("y", 2.0)], vec![gen("x1", 5.0), gen("x2", 4.0)]],
        vec![vec![vec![0]], vec![vec![0], vec![0]]],
    )
    .expect("static fixture")
}

/// Perfect complex of a genus-g surface: one minimum, 2g saddles, one maximum, zero boundary.
pub fn genus_complex(g: usize) -> ChainComplexGF2 {
    let saddles = (0..2 * g).map(|i| gen(&format!("s{}", i + 1), 1.0 + i as f64 / (2 * g) as f64)).collect();
    ChainComplexGF2::from_parts(
        vec![vec![gen("m", 0.0)], saddles, vec![gen("M", 3.0)]],
        vec![vec![vec![]; 2 * g], vec![vec![]]],
    )
    .expect("static fixture")
}

/// n maxima x_k between n+1 minima y_k on a line: ∂x_k = y_k + y_{k+1}.
pub fn many_minima_complex(minima: &[f64], maxima: &[f64]) -> Result<ChainComplexGF2> {
    if minima.len() != maxima.len() + 1 {
        return Err(MorseError::InvalidInput("need one more minimum than maxima".into()));
    }
    let ys = minima.iter().enumerate().map(|(i, &v)| gen(&format!("y{}", i + 1), v)).collect();
    let xs = maxima.iter().enumerate().map(|(i, &v)| gen(&format!("x{}", i + 1), v)).collect();
    let cols = (0..maxima.len()).map(|k| vec![k, k + 1]).collect();
    ChainComplexGF2::from_parts(vec![ys, xs], vec![cols])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heart_matrices_and_homology() {
        let c = heart_complex();
        assert_eq!(c.boundary[2].to_rows(), vec![vec![1, 1]]);
        assert_eq!(c.boundary[1].to_rows(), vec![vec![0]]);
        assert!(verify_boundary_squared(&c).ok);
        let h = homology(&c).unwrap();
        assert_eq!(h.betti, vec![1, 0, 1]);
        assert_eq!(c.chain_labels(2, &h.generator_representatives[2][0]), vec!["x1", "x2"]);
        assert_eq!(morse_inequality_check(4, &h), MorseInequality { ok: true, slack: 2 });
    }

    #[test]
    fn punctured_heart_fails_in_degree_two() {
        let r = verify_boundary_squared(&punctured_heart_complex());
        assert_eq!(r, BoundaryReport { ok: false, offending_degree: Some(2) });
        assert_eq!(homology(&punctured_heart_complex()).unwrap_err(), MorseError::NotAComplex { degree: 2 });
    }

    #[test]
    fn empty_complex() {
        let c = ChainComplexGF2::empty();
        assert!(verify_boundary_squared(&c).ok);
        assert!(homology(&c).unwrap().betti.is_empty());
    }

    #[test]
    fn genus_is_perfect() {
        for g in 0..4 {
            let h = homology(&genus_complex(g)).unwrap();
            assert_eq!(h.betti, vec![1, 2 * g, 1]);
            assert_eq!(morse_inequality_check(2 * g + 2, &h).slack, 0);
        }
    }

    #[test]
    fn heart_spectral_numbers() {
        let c = heart_complex();
        let (k, a) = c.chain(&["x1", "x2"]).unwrap();
        assert_eq!(spectral_number(&c, k, &a).unwrap().sigma, 5.0);
        let (k, z) = c.chain(&["z"]).unwrap();
        assert_eq!(spectral_number(&c, k, &z).unwrap().sigma, 0.0);
        assert_eq!(spectral_number(&c, 2, &BitVec::zeros(2)).unwrap_err(), MorseError::ZeroClass);
        let (k, x1) = c.chain(&["x1"]).unwrap();
        assert!(spectral_number(&c, k, &x1).is_err());
        let h = homology(&c).unwrap();
        let rep = spectral_report(&c, &h).unwrap();
        assert_eq!(rep.homological_spectrum, vec![0.0, 5.0]);
        assert_eq!(rep.action_gap.value, 5.0);
    }

    #[test]
    fn singleton_gap() {
        let g = action_gap(&[1.0, 1.0 + 1e-12]);
        assert!(g.singleton && g.value.is_infinite());
        assert_eq!(action_gap(&[1.0, 3.0]).value, 2.0);
    }

    #[test]
    fn many_minima_degree_zero() {
        let c = many_minima_complex(&[0.3, -0.2, 0.1, -0.5], &[1.0, 1.1, 0.9]).unwrap();
        assert_eq!(c.boundary[1].rank(), 3);
        let h = homology(&c).unwrap();
        assert_eq!(h.betti, vec![1, 0]);
        let (k, y1) = c.chain(&["y1"]).unwrap();
        assert_eq!(spectral_number_greedy(&c, k, &y1).unwrap().sigma, -0.5);
        assert_eq!(spectral_number_exhaustive(&c, k, &y1).unwrap().sigma, -0.5);
    }

    #[test]
    fn span_solve() {
        let b = vec![BitVec::from_bits(&[1, 1, 0]), BitVec::from_bits(&[0, 1, 1])];
        assert_eq!(solve_span(&b, &BitVec::from_bits(&[1, 0, 1])).unwrap(), BitVec::from_bits(&[1, 1]));
        assert!(solve_span(&b, &BitVec::from_bits(&[1, 0, 0])).is_none());
    }

    #[test]
    fn bitvec_roundtrip() {
        let v = BitVec::from_indices(70, &[0, 3, 64, 69]);
        assert_eq!(v.ones().collect::<Vec<_>>(), vec![0, 3, 64, 69]);
        let s = serde_json::to_string(&v).unwrap();
        let w: BitVec = serde_json::from_str(&s).unwrap();
        assert_eq!(v, w);
    }
}
