use morse_core::fredholm::*;
use morse_core::MorseError;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn diag(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(v))
}

fn index_of(f: &OperatorFamily) -> IndexReport {
    numeric_index(f, &IndexOptions::for_family(f).unwrap()).unwrap()
}

#[test]
fn constant_one_full_line_is_trivial() {
    let f = OperatorFamily::constant(Domain::FullLine, &diag(&[1.0]));
    let r = index_of(&f);
    assert_eq!((r.dim_ker, r.dim_coker, r.index), (0, 0, 0));
    // oracle: solutions c·e^{-s} shrink coming in from -∞, so nothing decays there
    assert!(r.growth_exponents[0] < 0.0);
}

#[test]
fn zero_on_compact_interval_has_constant_kernel() {
    let f = OperatorFamily::constant(Domain::CompactInterval { t: 1.0 }, &diag(&[0.0]));
    let mat = discretize(&f, 1.0, 200).unwrap();
    let (ker, coker, _) = dense_kernel_cokernel(&mat);
    assert_eq!((ker, coker), (1, 0));
    let ones = nalgebra::DVector::from_element(200, 1.0);
    assert!((&mat * ones).amax() < 1e-12);
}

#[test]
fn diagonal_family_discretizes_block_diagonally() {
    let f = OperatorFamily::tanh(Domain::FullLine, &diag(&[-1.0, 2.0]), &diag(&[1.0, 0.5]));
    let mat = discretize(&f, 30.0, 200).unwrap();
    assert_eq!(mat.shape(), (199 * 2, 200 * 2));
    for r in 0..mat.nrows() {
        for c in 0..mat.ncols() {
            if r % 2 != c % 2 {
                assert_eq!(mat[(r, c)], 0.0);
            }
        }
    }
}

#[test]
fn coarse_grids_are_rejected() {
    let f = OperatorFamily::constant(Domain::FullLine, &diag(&[0.3]));
    assert!(matches!(discretize(&f, 30.0, 199), Err(MorseError::GridTooCoarse { .. })));
    assert!(matches!(discretize(&f, 30.0, 3000), Err(MorseError::GridTooCoarse { .. })));
    assert!(discretize(&f, 34.0, 200).is_ok());
}

#[test]
fn tanh_full_line_kernel_is_sech() {
    let f = OperatorFamily::tanh(Domain::FullLine, &diag(&[-1.0]), &diag(&[1.0]));
    let r = index_of(&f);
    assert_eq!((r.dim_ker, r.dim_coker, r.index, r.predicted_index), (1, 0, 1, 1));
    // oracle: the box scheme with A = tanh annihilates sech up to O(h²)
    let l = 30.0;
    let m = 3000;
    let mat = discretize(&f, l, m).unwrap();
    let h = 2.0 * l / (m - 1) as f64;
    let sech = nalgebra::DVector::from_fn(m, |i, _| 1.0 / (-l + i as f64 * h).cosh());
    assert!((&mat * &sech).amax() < 1e-3);
}

#[test]
fn mixed_diagonal_has_index_one() {
    let f = OperatorFamily::tanh(Domain::FullLine, &diag(&[-1.0, -1.0]), &diag(&[1.0, -1.0]));
    let r = index_of(&f);
    assert_eq!((r.dim_ker, r.dim_coker, r.index), (1, 0, 1));
}

#[test]
fn constant_full_line_has_index_zero() {
    let a = DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 1.0, -0.7]);
    let r = index_of(&OperatorFamily::constant(Domain::FullLine, &a));
    assert_eq!((r.dim_ker, r.dim_coker, r.index), (0, 0, 0));
}

#[test]
fn restricted_domain_formulas() {
    let f = OperatorFamily::constant(Domain::HalfLineMinus, &diag(&[-1.0, -1.0, 1.0]));
    let c = verify_index_formula(&f).unwrap();
    assert!(c.matches);
    assert_eq!((c.report.predicted_index, c.report.dim_coker), (2, 0));

    let f = OperatorFamily::constant(Domain::HalfLinePlus, &diag(&[-1.0, 1.0]));
    let c = verify_index_formula(&f).unwrap();
    assert!(c.matches);
    assert_eq!((c.report.predicted_index, c.report.dim_coker), (1, 0));

    let a = DMatrix::from_row_slice(3, 3, &[0.0, 2.0, -1.0, 0.5, 1.0, 0.0, 3.0, 0.0, -2.0]);
    let f = OperatorFamily::tanh(Domain::CompactInterval { t: 2.0 }, &a, &(-&a));
    let c = verify_index_formula(&f).unwrap();
    assert!(c.matches);
    assert_eq!((c.report.index, c.report.dim_coker), (3, 0));
}

#[test]
fn random_families_match_all_formulas() {
    let rep = sweep(&SweepSpec { seed: 11, ..Default::default() }).unwrap();
    assert_eq!(rep.total, 4 * FAMILIES_PER_DOMAIN);
    for e in &rep.entries {
        assert!(e.report.matches(), "{:?}", e.report);
        if e.family.domain != Domain::FullLine {
            assert_eq!(e.report.dim_coker, 0, "restricted domains are surjective");
        }
    }
}

#[test]
fn perturbation_keeps_index() {
    let rep = sweep(&SweepSpec { seed: 5, perturb: true, ..Default::default() }).unwrap();
    for e in &rep.entries {
        assert_eq!(e.perturbed_index, Some(e.report.index));
    }
}

#[test]
fn diagonal_kernel_dimension() {
    let rep = sweep(&SweepSpec { seed: 3, diagonal: true, ..Default::default() }).unwrap();
    let mut seen = 0;
    for e in rep.entries.iter().filter(|e| e.family.domain == Domain::FullLine) {
        assert_eq!(Some(e.report.dim_ker), e.predicted_kernel);
        seen += 1;
    }
    assert_eq!(seen, FAMILIES_PER_DOMAIN);
}

#[test]
fn index_is_additive_over_concatenation() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..6 {
        let f = random_family(&mut rng, Domain::FullLine, 3, false);
        let idx = |d: Domain| {
            let mut g = f.clone();
            g.domain = d;
            index_of(&g).index
        };
        let full = idx(Domain::FullLine);
        let sum = idx(Domain::HalfLineMinus) + idx(Domain::CompactInterval { t: 2.0 }) + idx(Domain::HalfLinePlus) - 6;
        assert_eq!(full, sum);
    }
}

#[test]
fn glue_example() {
    let v = infinitesimal_glue(&[-1.0, 1.0], 2.0, &[1.0], &[1.0], Cutoff::Smoothstep).unwrap();
    let e = (-4.0f64).exp();
    let want = [e, 1.0, 1.0, e];
    for (a, b) in v.iter().zip(want) {
        assert!((a - b).abs() < 1e-8, "{v:?}");
    }
}

#[test]
fn glue_zero_and_decoupling() {
    let v = infinitesimal_glue(&[-2.0, 1.0, 3.0], 1.0, &[0.0, 0.0], &[0.0], Cutoff::Smoothstep).unwrap();
    assert!(v.iter().all(|x| *x == 0.0));
    let v = infinitesimal_glue(&[-1.0, 1.0], 40.0, &[0.7], &[-0.4], Cutoff::Smoothstep).unwrap();
    assert!(v[0].abs() < 1e-30 && v[3].abs() < 1e-30);
    assert!((v[1] - 0.7).abs() < 1e-8 && (v[2] + 0.4).abs() < 1e-8);
}

#[test]
fn glue_refuses_overflow() {
    assert!(matches!(
        infinitesimal_glue(&[-1.0, 4.0], 80.0, &[1.0], &[1.0], Cutoff::Smoothstep),
        Err(MorseError::IllConditioned { .. })
    ));
}

#[test]
fn glue_matches_closed_form_on_random_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    use rand::Rng;
    for _ in 0..50 {
        let n = rng.gen_range(1..=4);
        let mu = rng.gen_range(0..=n);
        let mut h: Vec<f64> = (0..n).map(|i| rng.gen_range(0.3..3.0) * if i < mu { -1.0 } else { 1.0 }).collect();
        h.sort_by(|a, b| a.total_cmp(b));
        let amax = h.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let t = rng.gen_range(0.2..(20.0 / amax));
        let xp: Vec<f64> = (0..n - mu).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let xm: Vec<f64> = (0..mu).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let got = infinitesimal_glue(&h, t, &xp, &xm, Cutoff::Smoothstep).unwrap();
        let want = infinitesimal_glue_closed_form(&h, t, &xp, &xm);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0), "{got:?} vs {want:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn glue_ignores_cutoff(a in 0.3f64..3.0, b in 0.3f64..3.0, t in 0.2f64..5.0, p in -1.0f64..1.0, q in -1.0f64..1.0) {
        let h = [-a, b];
        let x = infinitesimal_glue(&h, t, &[p], &[q], Cutoff::Smoothstep).unwrap();
        let y = infinitesimal_glue(&h, t, &[p], &[q], Cutoff::Exponential).unwrap();
        for (u, v) in x.iter().zip(&y) {
            prop_assert!((u - v).abs() < 1e-12);
        }
    }
}
