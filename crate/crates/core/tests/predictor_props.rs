mod common;

use common::{block_world, one_scan};
use pipe_core::gridmap::{CellState, ObservedGrid};
use pipe_core::predictor::{Predictor, PredictorConfig, StructuralParams};
use proptest::prelude::*;

fn assert_preserves(o: &ObservedGrid, values: &[f64]) -> Result<(), TestCaseError> {
    for (s, v) in o.states().iter().zip(values) {
        match s {
            CellState::Occupied => prop_assert_eq!(*v, 1.0),
            CellState::Free => prop_assert_eq!(*v, 0.0),
            CellState::Unknown => prop_assert!((0.0..=1.0).contains(v)),
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn structural_members_preserve_observations(seed in any::<u64>(), n in 1usize..5, range in 3.0f64..25.0) {
        let (world, start) = block_world(seed, 40, 30);
        let o = one_scan(&world, start, range);
        let ens = Predictor::new(PredictorConfig::default()).unwrap().predict(&o, n, seed).unwrap();
        for m in ens.members() {
            assert_preserves(&o, m.values())?;
        }
        assert_preserves(&o, ens.fused().values())?;
        for (s, u) in o.states().iter().zip(ens.uncertainty().values()) {
            if *s != CellState::Unknown {
                prop_assert_eq!(*u, 0.0);
            }
        }
    }

    #[test]
    fn variance_matches_second_moment_form(seed in any::<u64>(), n in 1usize..6) {
        let (world, start) = block_world(seed, 36, 36);
        let o = one_scan(&world, start, 12.0);
        let params = StructuralParams { background: [0.0, 0.6], ..StructuralParams::default() };
        let ens = Predictor::new(PredictorConfig::Structural { params }).unwrap().predict(&o, n, seed).unwrap();
        let k = ens.len() as f64;
        for i in 0..o.geometry().len() {
            let vals: Vec<f64> = ens.members().iter().map(|m| m.values()[i]).collect();
            let mean = vals.iter().sum::<f64>() / k;
            let second = vals.iter().map(|v| v * v).sum::<f64>() / k;
            let var = ens.uncertainty().values()[i];
            prop_assert!((var - (second - mean * mean)).abs() <= 1e-12, "cell {i}: {var} vs {}", second - mean * mean);
            if vals.iter().all(|&v| v == vals[0]) {
                prop_assert_eq!(var, 0.0);
            }
        }
    }

    #[test]
    fn ensembles_are_reproducible(seed in any::<u64>(), n in 1usize..5) {
        let (world, start) = block_world(seed, 30, 30);
        let o = one_scan(&world, start, 10.0);
        let p = Predictor::new(PredictorConfig::default()).unwrap();
        prop_assert_eq!(p.predict(&o, n, seed).unwrap(), p.predict(&o, n, seed).unwrap());
        let leak = PredictorConfig::OracleLeak { flip_rate: 0.2 };
        let q = Predictor::with_world(leak, &world).unwrap();
        prop_assert_eq!(q.predict(&o, n, seed).unwrap(), q.predict(&o, n, seed).unwrap());
    }
}
