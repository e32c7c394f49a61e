use insider_core::enlargement::{decompose, drift_integral};
use insider_core::forward_integral::{forward_estimate, ito_left_sum, Integrand};
use insider_core::monte_carlo::{information_model, path_field, InformationMode};
use insider_core::params::ModelParams;
use insider_core::paths::{make_grid, sample_brownian_stream};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn same_seed_and_stream_give_the_same_path(seed in any::<u64>(), stream in 0u64..1000, n in 1usize..200) {
        let grid = make_grid(0.0, 1.0, n).unwrap();
        let a = sample_brownian_stream(&grid, seed, stream);
        let b = sample_brownian_stream(&grid, seed, stream);
        prop_assert_eq!(a.values(), b.values());
        prop_assert_eq!(a.at(0), 0.0);
    }

    #[test]
    fn decomposition_reconstructs_the_path(seed in any::<u64>(), p in 0usize..100, steps in 1usize..8) {
        let model = information_model(&ModelParams::benchmark(), 16 * steps).unwrap();
        let field = path_field(&model, InformationMode::Insider, seed, p).unwrap();
        let bt = decompose(field.path(), &field).unwrap();
        let s = drift_integral(&field);
        prop_assert_eq!(s.len(), bt.grid().len());
        for (i, si) in s.iter().enumerate() {
            let b = field.path().at(i);
            let err = (bt.at(i) + si - b).abs();
            prop_assert!(err <= f64::EPSILON * (b.abs() + si.abs()));
        }
    }

    #[test]
    fn forward_at_dt_is_the_ito_sum(seed in any::<u64>(), n in 2usize..300, c in -5.0f64..5.0) {
        let grid = make_grid(0.0, 1.0, n).unwrap();
        let b = sample_brownian_stream(&grid, seed, 0);
        for v in [Integrand::constant(&grid, c).unwrap(), Integrand::from_path(&b)] {
            let fwd = forward_estimate(&v, &b, grid.dt()).unwrap();
            prop_assert_eq!(fwd.to_bits(), ito_left_sum(&v, &b).unwrap().to_bits());
        }
    }

    #[test]
    fn uninformed_fields_have_no_drift(seed in any::<u64>(), p in 0usize..100) {
        let model = information_model(&ModelParams::benchmark(), 32).unwrap();
        let field = path_field(&model, InformationMode::Uninformed, seed, p).unwrap();
        prop_assert!(field.drift().iter().all(|&a| a == 0.0));
    }
}
