use morse_core::fields::FieldExpr;
use morse_core::geometry::Surface;
use morse_core::scene::*;
use morse_core::MorseError;

fn betti(name: &str) -> Vec<usize> {
    let r = run_pipeline(&fixture(name).unwrap()).unwrap();
    assert_eq!(r.status, Status::Ok, "{name}: {:?}", r.warnings);
    r.betti().unwrap().to_vec()
}

#[test]
fn round_sphere_lookup() {
    let cfg = fixture("round-sphere").unwrap();
    let s = cfg.scene().unwrap();
    assert_eq!(s.model.constraint(), Some(&Surface::Sphere { radius: 1.0 }));
    assert!(matches!(s.field.expr, FieldExpr::Coordinate(2)));
    assert_eq!(betti("round-sphere"), vec![1, 0, 1]);
}

#[test]
fn ellipsoid_spellings_agree() {
    for name in ["ellipsoid a=1,2,3", "ellipsoid(1,2,3)", "ellipsoid"] {
        let cfg = fixture(name).unwrap();
        assert!(matches!(&cfg.scene().unwrap().field.expr, FieldExpr::Quadratic(a) if a == &vec![1.0, 2.0, 3.0]), "{name}");
    }
    assert!(matches!(fixture("ellipsoid(1,2)"), Err(MorseError::UnknownFixture(_))));
}

#[test]
fn real_line_fixtures() {
    assert_eq!(betti("real-line-parabola"), vec![1]);
    assert_eq!(betti("real-line-many-minima(3)"), vec![1, 0]);
    let r = run_pipeline(&fixture("real-line-slope").unwrap()).unwrap();
    assert!(r.critical.is_empty());
    assert!(r.betti().unwrap().iter().all(|b| *b == 0));
}

#[test]
fn rp2_and_torus_homology() {
    assert_eq!(betti("rp2-ellipsoid"), vec![1, 1, 1]);
    assert_eq!(betti("torus-cosine"), vec![1, 2, 1]);
}

#[test]
fn abstract_fixtures() {
    assert_eq!(betti("heart-complex"), vec![1, 0, 1]);
    assert_eq!(betti("genus-g-complex(3)"), vec![1, 6, 1]);
    let r = run_pipeline(&fixture("punctured-heart").unwrap()).unwrap();
    assert_eq!(r.status, Status::NotAComplex);
    assert_eq!(r.status.exit_code(), 2);
}

#[test]
fn monkey_saddle_halts_before_algebra() {
    let r = run_pipeline(&fixture("monkey-saddle").unwrap()).unwrap();
    assert_eq!(r.status, Status::MorseViolation);
    assert!(r.complex.is_none());
    assert!(r.warnings.iter().any(|w| w.contains("MorseViolation")));
}

#[test]
fn registry_is_complete() {
    let all = builtin_fixtures();
    assert_eq!(all.len(), FIXTURES.len());
    for name in ["round-sphere", "peanut-sphere", "rp2-ellipsoid", "monkey-saddle", "heart-complex", "punctured-heart", "torus-translate-chain"] {
        assert!(all.iter().any(|c| c.name == name), "{name}");
    }
    assert!(matches!(fixture("klein-bottle"), Err(MorseError::UnknownFixture(_))));
}

#[test]
fn scene_files_parse_with_defaults() {
    let cfg = parse_scene(
        "name = \"tilted\"\n[model]\nkind = \"sphere\"\n[field]\nkind = \"linear\"\ncoefficients = [0.0, 0.0, 1.0]\n[tolerances]\nn_scan = 512\n",
        "inline",
    )
    .unwrap();
    assert_eq!(cfg.name, "tilted");
    assert_eq!(cfg.moduli.n_scan, 512);
    assert_eq!(cfg.moduli.delta, morse_core::moduli::DELTA);
    assert_eq!(cfg.flags, PipelineFlags::default());
    let fx = parse_scene("fixture = \"torus-cosine\"\n[pipeline]\nspectral = false\n", "inline").unwrap();
    assert!(!fx.flags.spectral);
}

#[test]
fn bad_scene_files_are_rejected() {
    let cases = [
        "[model\n",
        "fixture = \"round-sphere\"\ncolour = \"red\"\n",
        "[model]\nkind = \"sphere\"\nradius = 1.0\nextra = 2\n[field]\nkind = \"monkey-saddle\"\n",
        "[model]\nkind = \"sphere\"\n[field]\nkind = \"linear\"\ncoefficients = [1.0, 2.0]\n",
        "[model]\nkind = \"torus\"\n[field]\nkind = \"coordinate\"\nindex = 4\n",
        "fixture = \"round-sphere\"\n[model]\nkind = \"peanut\"\n",
        "name = \"x\"\n",
        "[model]\nkind = \"sphere\"\n[field]\nkind = \"constant\"\nvalue = 1.0\n[pipeline]\nscans = 3\n",
    ];
    for text in cases {
        assert!(matches!(parse_scene(text, "case"), Err(MorseError::Parse { .. })), "{text}");
    }
    assert!(matches!(load_scene("/nonexistent/scene.toml"), Err(MorseError::Io(_))));
}

#[test]
fn explicit_metric_needs_flat_model() {
    let ok = "[model]\nkind = \"torus\"\n[field]\nkind = \"torus-cosine\"\ncoefficients = [1.0, 2.0]\n[metric]\nkind = \"explicit\"\nmatrix = [[1.0, 0.0], [0.0, 2.0]]\n";
    assert!(parse_scene(ok, "m").is_ok());
    let bad = "[model]\nkind = \"sphere\"\n[field]\nkind = \"coordinate\"\nindex = 2\n[metric]\nkind = \"explicit\"\nmatrix = [[1.0]]\n";
    assert!(parse_scene(bad, "m").is_err());
}
