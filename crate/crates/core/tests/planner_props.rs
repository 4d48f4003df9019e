mod common;

use common::{block_world, one_scan};
use pipe_core::frontier::extract_frontiers;
use pipe_core::geometry::{path_visibility_mask, point_visibility_mask, MapView, MaskParams, PathMaskOptions};
use pipe_core::planners::{select, select_sequential, PlannerInput, PlannerKind, PlannerParams};
use pipe_core::predictor::{PredictionEnsemble, Predictor, PredictorConfig};
use proptest::prelude::*;

const SCORED: [PlannerKind; 3] = [PlannerKind::Pipe, PlannerKind::Upen, PlannerKind::Mapex];

struct Scene {
    observed: pipe_core::gridmap::ObservedGrid,
    ensemble: PredictionEnsemble,
    pose: pipe_core::gridmap::Cell,
}

fn scene(seed: u64) -> Scene {
    let (world, pose) = block_world(seed, 48, 40);
    let observed = one_scan(&world, pose, 14.0);
    let ensemble = Predictor::new(PredictorConfig::default()).unwrap().predict(&observed, 3, seed).unwrap();
    Scene { observed, ensemble, pose }
}

fn params() -> PlannerParams {
    PlannerParams {
        mask: MaskParams { range: 14.0, samples: 120, stride: 3 },
        ..PlannerParams::default()
    }
}

fn pool(n: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scaling_uncertainty_keeps_the_choice(seed in any::<u64>(), c in 0.001f64..1000.0) {
        let s = scene(seed);
        let frontiers = extract_frontiers(&s.observed, 1);
        let scaled = s.ensemble.with_scaled_uncertainty(c);
        for kind in SCORED {
            let base = PlannerInput { pose: s.pose, observed: &s.observed, ensemble: Some(&s.ensemble), frontiers: &frontiers, params: params() };
            let other = PlannerInput { ensemble: Some(&scaled), ..base };
            let a = select_sequential(kind, &base).unwrap().map(|x| x.frontier_id);
            let b = select_sequential(kind, &other).unwrap().map(|x| x.frontier_id);
            prop_assert_eq!(a, b, "{} changed its pick under scale {}", kind, c);
        }
    }

    #[test]
    fn worker_count_does_not_change_selection(seed in any::<u64>()) {
        let s = scene(seed);
        let frontiers = extract_frontiers(&s.observed, 1);
        let input = PlannerInput { pose: s.pose, observed: &s.observed, ensemble: Some(&s.ensemble), frontiers: &frontiers, params: params() };
        for kind in PlannerKind::ALL {
            let seq = select_sequential(kind, &input).unwrap();
            let one = pool(1).install(|| select(kind, &input)).unwrap();
            let four = pool(4).install(|| select(kind, &input)).unwrap();
            prop_assert_eq!(&seq, &one);
            prop_assert_eq!(&seq, &four);
        }
    }

    #[test]
    fn path_mask_covers_the_goal_point_mask(seed in any::<u64>()) {
        let s = scene(seed);
        let frontiers = extract_frontiers(&s.observed, 1);
        let input = PlannerInput { pose: s.pose, observed: &s.observed, ensemble: Some(&s.ensemble), frontiers: &frontiers, params: params() };
        let p = params();
        let view = MapView::Predicted { grid: s.ensemble.fused(), epsilon: p.epsilon };
        for f in frontiers.iter().take(6) {
            let Some((_, path)) = pipe_core::planners::score_frontier(PlannerKind::Pipe, &input, f).unwrap() else { continue };
            let pipe = path_visibility_mask(&path.poses, view, &p.mask, PathMaskOptions::default()).unwrap();
            let mapex = point_visibility_mask(f.representative, view, p.mask.range, p.mask.samples).unwrap();
            let missing = mapex.iter().filter(|&c| !pipe.get(c)).count();
            prop_assert!(missing <= 8.max(pipe.count().div_ceil(100)), "{missing} cells of the point mask missing");
        }
    }
}
