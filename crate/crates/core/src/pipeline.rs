//! Full Morse-homology analysis of one scene: critical points, counts, complex, homology, spectrum.

use crate::algebra::{
    build_complex, cells_from_classes, cells_from_crits, homology, morse_inequality_check, spectral_report,
    verify_boundary_squared, BoundaryReport, ChainComplexGF2, HomologyResult, MorseInequality, SpectralReport,
};
use crate::critical::{find_critical_points, quotient_identify, CriticalClass, CriticalPoint, SearchOptions};
use crate::error::{MorseError, Result};
use crate::fields::ScalarField;
use crate::geometry::ManifoldModel;
use crate::moduli::{count_from_source, quotient_count, ModuliCount, ModuliOptions};

#[derive(Debug, Clone)]
pub struct SceneAnalysis {
    pub crits: Vec<CriticalPoint>,
    pub warnings: Vec<String>,
    /// Counts between generators of the complex (quotient classes on an antipodal quotient).
    pub counts: Vec<ModuliCount>,
    /// Counts on the covering sphere when the model is a quotient.
    pub cover_counts: Vec<ModuliCount>,
    pub classes: Vec<CriticalClass>,
    pub complex: ChainComplexGF2,
    pub boundary_check: BoundaryReport,
    pub homology: HomologyResult,
    pub morse_inequality: MorseInequality,
    pub spectral: SpectralReport,
}

/// All counts for index-difference-one pairs, one source at a time.
pub fn all_counts(model: &ManifoldModel, field: &ScalarField, crits: &[CriticalPoint], opts: &ModuliOptions) -> Result<Vec<ModuliCount>> {
    let mut out = Vec::new();
    for i in 0..crits.len() {
        out.extend(count_from_source(model, field, crits, i, opts)?);
    }
    Ok(out)
}

/// Fails with `DegenerateCritical` on the first degenerate point.
pub fn analyze(model: &ManifoldModel, field: &ScalarField, search: &SearchOptions, moduli: &ModuliOptions) -> Result<SceneAnalysis> {
    let found = find_critical_points(field, model, search)?;
    analyze_points(model, field, found.points, found.warnings, moduli)
}

/// Counting and algebra stages on an already located critical set.
pub fn analyze_points(
    model: &ManifoldModel,
    field: &ScalarField,
    crits: Vec<CriticalPoint>,
    warnings: Vec<String>,
    moduli: &ModuliOptions,
) -> Result<SceneAnalysis> {
    if let Some(d) = crits.iter().find(|c| c.degenerate) {
        return Err(MorseError::DegenerateCritical { label: d.label.clone() });
    }
    let cover_counts = all_counts(model, field, &crits, moduli)?;
    let (cells, counts, classes) = if model.is_quotient() {
        let classes = quotient_identify(&crits, model, field)?;
        let q = quotient_count(&cover_counts, &classes)?;
        (cells_from_classes(&classes), q, classes)
    } else {
        (cells_from_crits(&crits)?, cover_counts.clone(), Vec::new())
    };
    let complex = build_complex(&cells, &counts)?;
    let boundary_check = verify_boundary_squared(&complex);
    let homology = homology(&complex)?;
    let morse_inequality = morse_inequality_check(cells.len(), &homology);
    let spectral = spectral_report(&complex, &homology)?;
    Ok(SceneAnalysis {
        crits,
        warnings,
        counts,
        cover_counts: if model.is_quotient() { cover_counts } else { Vec::new() },
        classes,
        complex,
        boundary_check,
        homology,
        morse_inequality,
        spectral,
    })
}
