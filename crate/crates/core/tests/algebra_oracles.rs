use morse_core::algebra::{
    homology, spectral_number_exhaustive, spectral_number_greedy, verify_boundary_squared, BitVec, ChainComplexGF2,
    Generator,
};
use proptest::prelude::*;

/// Random 3-term complex with ∂² = 0: ∂₂ columns are random combinations of ker ∂₁.
fn complex_strategy() -> impl Strategy<Value = ChainComplexGF2> {
    (1usize..=4, 0usize..=5, 0usize..=4)
        .prop_filter("at most 12 generators", |(a, b, c)| a + b + c <= 12)
        .prop_flat_map(|(n0, n1, n2)| {
            (
                Just((n0, n1, n2)),
                proptest::collection::vec(proptest::collection::vec(any::<bool>(), n0), n1),
                proptest::collection::vec(proptest::collection::vec(any::<bool>(), 8), n2),
                proptest::collection::vec(0u8..6, n0 + n1 + n2),
            )
        })
        .prop_map(|((n0, n1, n2), d1, mix, vals)| {
            let mut v = vals.into_iter().map(f64::from);
            let mut gens = vec![Vec::new(), Vec::new(), Vec::new()];
            for (k, n) in [n0, n1, n2].into_iter().enumerate() {
                for i in 0..n {
                    gens[k].push(Generator { label: format!("g{k}_{i}"), value: v.next().unwrap() + k as f64 });
                }
            }
            let d1cols: Vec<Vec<usize>> =
                d1.iter().map(|c| c.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i).collect()).collect();
            let tmp = ChainComplexGF2::from_parts(gens.clone(), vec![d1cols.clone()]).unwrap();
            let ker = tmp.boundary_map(1).kernel_basis();
            let d2cols: Vec<Vec<usize>> = mix
                .iter()
                .map(|m| {
                    let mut col = BitVec::zeros(n1);
                    for (z, _) in ker.iter().zip(m).filter(|(_, b)| **b) {
                        col.xor_assign(z);
                    }
                    col.ones().collect()
                })
                .collect();
            ChainComplexGF2::from_parts(gens, vec![d1cols, d2cols]).unwrap()
        })
}

fn all_vectors(n: usize) -> impl Iterator<Item = BitVec> {
    (0u64..(1u64 << n)).map(move |m| BitVec::from_indices(n, &(0..n).filter(|i| m >> i & 1 == 1).collect::<Vec<_>>()))
}

/// dim ker ∂_k − dim im ∂_{k+1} by counting vectors.
fn brute_betti(c: &ChainComplexGF2, k: usize) -> usize {
    let n = c.rank_in(k);
    let ker = all_vectors(n).filter(|v| c.boundary_map(k).apply(v).is_zero()).count();
    let im: std::collections::HashSet<BitVec> = all_vectors(c.rank_in(k + 1)).map(|v| c.boundary_map(k + 1).apply(&v)).collect();
    (ker.trailing_zeros() - im.len().trailing_zeros()) as usize
}

fn brute_sigma(c: &ChainComplexGF2, k: usize, xi: &BitVec) -> Option<f64> {
    let im: std::collections::HashSet<BitVec> = all_vectors(c.rank_in(k + 1)).map(|v| c.boundary_map(k + 1).apply(&v)).collect();
    let mut best: Option<f64> = None;
    for b in im {
        let mut v = xi.clone();
        v.xor_assign(&b);
        let top = v.ones().map(|i| c.generators[k][i].value).fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))));
        match top {
            None => return None,
            Some(t) => best = Some(best.map_or(t, |b| b.min(t))),
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn boundary_squared_and_betti(c in complex_strategy()) {
        prop_assert!(verify_boundary_squared(&c).ok);
        let h = homology(&c).unwrap();
        for k in 0..3 {
            prop_assert_eq!(h.betti[k], brute_betti(&c, k));
            for z in &h.generator_representatives[k] {
                prop_assert!(c.boundary_map(k).apply(z).is_zero());
            }
        }
    }

    #[test]
    fn greedy_matches_exhaustive(c in complex_strategy()) {
        for k in 0..3 {
            for xi in all_vectors(c.rank_in(k)).filter(|v| c.boundary_map(k).apply(v).is_zero()) {
                let oracle = brute_sigma(&c, k, &xi);
                let g = spectral_number_greedy(&c, k, &xi).ok().map(|s| s.sigma);
                let e = spectral_number_exhaustive(&c, k, &xi).ok().map(|s| s.sigma);
                prop_assert_eq!(g, oracle);
                prop_assert_eq!(e, oracle);
                if let Some(s) = g {
                    prop_assert!(c.generators[k].iter().any(|x| x.value == s));
                }
            }
        }
    }
}

#[test]
fn many_minima_spectral_is_global_min() {
    use morse_core::algebra::many_minima_complex;
    for n in 2..=10usize {
        let minima: Vec<f64> = (0..=n).map(|i| ((i * 7 % 11) as f64) * 0.1 - 0.4).collect();
        let maxima: Vec<f64> = (0..n).map(|i| 2.0 + i as f64 * 0.01).collect();
        let c = many_minima_complex(&minima, &maxima).unwrap();
        let (k, y1) = c.chain(&["y1"]).unwrap();
        let gmin = minima.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(brute_sigma(&c, k, &y1), Some(gmin));
        assert_eq!(spectral_number_greedy(&c, k, &y1).unwrap().sigma, gmin);
        assert_eq!(spectral_number_exhaustive(&c, k, &y1).unwrap().sigma, gmin);
    }
}
