use proptest::prelude::*;

use kvred::boolean_cube::{fwht, inverse_fwht, CubeFunction};
use kvred::empirical::{change_of_density, mu_norm, nu_norm, Density, SamplingMap};
use kvred::games::bell_to_game;
use kvred::values::{classical_value_bruteforce, classical_value_heuristic, DeterministicStrategy};
use kvred::BellTensor;

fn cube_values() -> impl Strategy<Value = Vec<f64>> {
    (0u32..=8).prop_flat_map(|n| prop::collection::vec(-10.0f64..10.0, 1usize << n))
}

fn small_tensor() -> impl Strategy<Value = BellTensor> {
    (1usize..=3, 1usize..=3, 1usize..=3).prop_flat_map(|(n, ka, kb)| {
        prop::collection::vec(-1.0f64..1.0, n * ka * n * kb)
            .prop_map(move |c| BellTensor::new(n, ka, n, kb, c).unwrap())
    })
}

proptest! {
    #[test]
    fn fwht_applied_twice_scales_by_cube_size(values in cube_values()) {
        let f = CubeFunction::new(values.clone()).unwrap();
        let twice = fwht(&fwht(&f));
        let size = values.len() as f64;
        for (a, b) in twice.values().iter().zip(&values) {
            prop_assert!((a - size * b).abs() <= 1e-9 * size);
        }
        prop_assert!(inverse_fwht(&fwht(&f)).max_abs_diff(&f) <= 1e-12);
    }

    #[test]
    fn game_entries_in_unit_interval_and_bias_identity(
        m in small_tensor(),
        picks in prop::collection::vec(0usize..16, 6),
    ) {
        prop_assume!(m.max_abs() > 0.0);
        let (g, l) = bell_to_game(&m).unwrap();
        prop_assert!(g.coeffs().iter().all(|c| (0.0..=1.0).contains(c)));
        let (n, ka, _, kb) = m.shape();
        let s = DeterministicStrategy {
            f_a: (0..n).map(|x| picks[x] % (ka + 1)).collect(),
            f_b: (0..n).map(|y| picks[3 + y] % (kb + 1)).collect(),
        };
        let p = s.behavior(ka + 1, kb + 1).unwrap();
        let lhs = g.as_bell().pair(&p).unwrap() - 0.5;
        let padded: f64 = (0..n)
            .map(|x| {
                (0..n)
                    .filter(|&y| s.f_a[x] < ka && s.f_b[y] < kb)
                    .map(|y| m.get(x, s.f_a[x], y, s.f_b[y]))
                    .sum::<f64>()
            })
            .sum();
        let rhs = padded / (2.0 * (n * n) as f64 * l);
        prop_assert!((lhs - rhs).abs() <= 1e-12);
    }

    #[test]
    fn heuristic_never_beats_brute_force(m in small_tensor(), seed in 0u64..1000) {
        let exact = classical_value_bruteforce(&m, 1 << 20).unwrap().value;
        let h = classical_value_heuristic(&m, 4, seed).value;
        prop_assert!(h <= exact + 1e-12);
    }

    #[test]
    fn consolidation_keeps_norms(
        draws in prop::collection::vec((0usize..6, 0.1f64..5.0), 1..40),
        norms in prop::collection::vec(0.0f64..3.0, 6),
    ) {
        let (idx, w): (Vec<usize>, Vec<f64>) = draws.into_iter().unzip();
        let j = SamplingMap::new(idx, w).unwrap();
        let c = j.consolidate();
        prop_assert!(c.indices().windows(2).all(|p| p[0] < p[1]));
        let a = j.norm_from_atoms(&norms);
        prop_assert!((a - c.norm_from_atoms(&norms)).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn change_of_density_is_an_isometry(
        raw in prop::collection::vec(0.05f64..4.0, 2..20),
        vals in prop::collection::vec(-3.0f64..3.0, 40),
    ) {
        let mean = raw.iter().sum::<f64>() / raw.len() as f64;
        let phi = Density::new(raw.iter().map(|p| p / mean).collect()).unwrap();
        let x = &vals[..raw.len() * 2];
        let sx = change_of_density(x, &phi, 1.0).unwrap();
        let atom = |v: &[f64]| v.chunks(2).map(|b| b[0].abs().max(b[1].abs())).collect::<Vec<_>>();
        let before = mu_norm(&atom(x), 1.0);
        let after = nu_norm(&atom(&sx), &phi, 1.0);
        prop_assert!((before - after).abs() <= 1e-12 * before.max(1.0));
    }
}
