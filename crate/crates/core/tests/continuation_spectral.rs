use morse_core::continuation::{
    continue_scenes, energy_bound_check, spectral_extend, spectral_lipschitz_check, ContinuationOptions, ExtendOptions, Homotopy, Scene,
    T_DEFAULT,
};
use morse_core::critical::{SearchOptions, TAU_VAL};
use morse_core::fields::{FieldExpr, ScalarField};
use morse_core::geometry::{ExplicitMetric, ManifoldModel, Metric};
use morse_core::moduli::ModuliOptions;
use morse_core::pipeline::{analyze, SceneAnalysis};
use morse_core::MorseError;
use nalgebra::DMatrix;

fn cosine() -> ScalarField {
    ScalarField::new("cos", FieldExpr::TorusCosine(vec![1.0, 2.0]))
}

fn run(s: &Scene) -> SceneAnalysis {
    analyze(&s.model, &s.field, &SearchOptions::default(), &ModuliOptions::default()).unwrap()
}

fn sigmas(a: &SceneAnalysis) -> Vec<f64> {
    let mut v: Vec<f64> = a.spectral.classes.iter().map(|c| c.spectral.sigma).collect();
    v.sort_by(|x, y| x.total_cmp(y));
    v
}

#[test]
fn constant_shift_is_tight_and_corruption_is_caught() {
    let c = 0.75;
    let sa = Scene::new(ManifoldModel::torus(2), cosine());
    let sb = Scene::new(ManifoldModel::torus(2), cosine().shifted_by(c));
    let (a, b) = (run(&sa), run(&sb));
    let h = Homotopy::convex(sa.clone(), sb.clone(), T_DEFAULT).unwrap();
    let cont = continue_scenes(&h, &a, &b, &ContinuationOptions::default()).unwrap();
    assert!(cont.chain.is_identity());
    let lip = spectral_lipschitz_check(&sa.model, &sa.field, &sb.field, &cont.induced, &a.spectral, &b.spectral).unwrap();
    assert!(lip.ok);
    assert!((lip.c0.sampled - c).abs() < 1e-12);
    for e in &lip.entries {
        assert!((e.sigma_plus - e.sigma_minus - c).abs() < 1e-6, "{e:?}");
        assert!((e.difference - lip.c0.sampled).abs() < 1e-6);
    }
    let mut w = cont.counts.witnesses.clone();
    energy_bound_check(&h, &w).unwrap();
    w[0].target_value = w[0].source_value + c + 0.5;
    assert!(matches!(energy_bound_check(&h, &w), Err(MorseError::BoundViolation { .. })));
}

#[test]
fn metric_change_keeps_spectral_numbers() {
    let flat = Scene::new(ManifoldModel::torus(2), cosine());
    let g = ExplicitMetric::new(DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&[1.0, 2.0]))).unwrap();
    let skew = Scene::new(ManifoldModel::torus(2).with_metric(Metric::Explicit(g)), cosine());
    let (a, b) = (run(&flat), run(&skew));
    assert_eq!(a.homology.betti, b.homology.betti);
    let sa = sigmas(&a);
    let sb = sigmas(&b);
    assert_eq!(sa.len(), sb.len());
    for (x, y) in sa.iter().zip(&sb) {
        assert!((x - y).abs() < 1e-9);
    }
    let h = Homotopy::convex(flat.clone(), skew.clone(), T_DEFAULT).unwrap();
    let cont = continue_scenes(&h, &a, &b, &ContinuationOptions::default()).unwrap();
    assert!(cont.induced.iso);
    let lip = spectral_lipschitz_check(&flat.model, &flat.field, &skew.field, &cont.induced, &a.spectral, &b.spectral).unwrap();
    for e in &lip.entries {
        assert!(e.difference < 1e-9, "{e:?}");
    }
}

fn monkey(eps: f64) -> ScalarField {
    let base = FieldExpr::MonkeySaddle;
    if eps == 0.0 {
        return ScalarField::new("monkey", base);
    }
    ScalarField::new(
        format!("monkey+{eps}"),
        FieldExpr::Sum(vec![base, FieldExpr::Scale(eps, Box::new(FieldExpr::TorusCosine(vec![1.0, 2.0])))]),
    )
}

#[test]
fn monkey_saddle_extension_is_cauchy() {
    let members: Vec<ScalarField> = [0.2, 0.1, 0.05, 0.025].iter().map(|e| monkey(*e)).collect();
    let rep = spectral_extend(&ManifoldModel::torus(2), &monkey(0.0), &members, &ExtendOptions::default()).unwrap();
    assert_eq!(rep.classes.len(), 5);
    let last_distance = *rep.distances.last().unwrap();
    for c in &rep.classes {
        for (inc, b) in c.increments.iter().zip(&c.bounds) {
            assert!(inc <= b);
        }
        // oracle: Lipschitz in C⁰ plus ρ(f) ∈ S_f puts the last member within its distance of a critical value
        let last = *c.values.last().unwrap();
        let gap = rep.limit_values.iter().map(|v| (v - last).abs()).fold(f64::INFINITY, f64::min);
        assert!(gap <= last_distance + TAU_VAL, "{c:?}");
    }
    // the extrapolated extremal classes land on the degenerate function's extreme values
    let peak = 3.0 * 3f64.sqrt() / 8.0;
    for c in rep.classes.iter().filter(|c| c.degree != 1) {
        assert!(c.distance_to_spectrum < 1e-2, "{c:?}");
        assert!((c.nearest_critical_value.abs() - peak).abs() < 1e-6);
    }
}

#[test]
fn constant_sequence_returns_sigma() {
    let f = cosine();
    let model = ManifoldModel::torus(2);
    let a = analyze(&model, &f, &SearchOptions::default(), &ModuliOptions::default()).unwrap();
    let rep = spectral_extend(&model, &f, &[f.clone(), f.clone()], &ExtendOptions::default()).unwrap();
    let mut lim: Vec<f64> = rep.classes.iter().map(|c| c.limit).collect();
    lim.sort_by(|x, y| x.total_cmp(y));
    let want = sigmas(&a);
    assert_eq!(lim.len(), want.len());
    for (x, y) in lim.iter().zip(&want) {
        assert!((x - y).abs() < 1e-12);
    }
}
