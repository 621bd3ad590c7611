//! Free-fermion results against the dense spin-basis reference.

use gaussian_qaoa::ed::{dense_gap, dense_qaoa_energy, dense_sector_gap};
use gaussian_qaoa::evolution::{qaoa_energy, EvolutionCache, MajoranaCircuit, Workspace};
use gaussian_qaoa::nambu::{many_body_gap, sector_gap};
use gaussian_qaoa::{CouplingConfig, FermionParity, QaoaParams};
use proptest::prelude::*;

fn ring(max_n: usize) -> impl Strategy<Value = CouplingConfig> {
    (2..=max_n)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(-1.5f64..1.5, n),
                prop_oneof![0.2f64..1.5, -1.5f64..-0.2],
            )
        })
        .prop_map(|(j, h)| CouplingConfig::new(j, h, "").unwrap())
}

fn angles(depth: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..std::f64::consts::TAU, 2 * depth)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn nambu_energy_matches_state_vector(
        (c, th, s) in ring(8).prop_flat_map(|c| (Just(c), (1usize..=6).prop_flat_map(angles), 0.0f64..=1.0))
    ) {
        let params = QaoaParams::from_flat(&th, s).unwrap();
        let dense = dense_qaoa_energy(&c, &params).unwrap();
        let cache = EvolutionCache::new(&c).unwrap();
        let nambu = qaoa_energy(&params, &cache).unwrap();
        prop_assert!((dense - nambu).abs() <= 1e-9, "dense {} nambu {}", dense, nambu);
        let fast = MajoranaCircuit::new(&c).unwrap().energy(&th, s, &mut Workspace::new()).unwrap();
        prop_assert!((dense - fast).abs() <= 1e-9, "dense {} majorana {}", dense, fast);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn many_body_gap_matches_dense(c in ring(10), s in 0.0f64..=1.0) {
        let ed = dense_gap(&c, s).unwrap();
        let nb = many_body_gap(&c, s).unwrap();
        prop_assert!((ed - nb).abs() <= 1e-9, "dense {} nambu {}", ed, nb);
        for p in [FermionParity::Even, FermionParity::Odd] {
            let ed = dense_sector_gap(&c, s, p).unwrap();
            let nb = sector_gap(&c, s, p).unwrap();
            prop_assert!((ed - nb).abs() <= 1e-9, "{:?}: dense {} nambu {}", p, ed, nb);
        }
    }
}
