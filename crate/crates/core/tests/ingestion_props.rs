use pipe_core::gridmap::ObservedGrid;
use pipe_core::ingestion::{generate_floorplan, is_connected, load_graymap, rasterize_floorplan, MapClass};
use pipe_core::pathing::reachable;
use proptest::prelude::*;

fn class() -> impl Strategy<Value = MapClass> {
    prop_oneof![Just(MapClass::Small), Just(MapClass::Medium), Just(MapClass::Large)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_worlds_are_fully_explorable(seed in any::<u64>(), class in class(), res in prop_oneof![Just(2.0), Just(4.0)]) {
        let mut spec = generate_floorplan(seed, class).unwrap();
        spec.resolution = res;
        let world = rasterize_floorplan(&spec).unwrap();
        prop_assert!(is_connected(&world));
        // Robot moves: 8-neighbors without cutting corners.
        let start = world.free_cells().next().unwrap();
        let reach = reachable(start, &ObservedGrid::fully_observed(&world)).unwrap();
        let g = world.geometry();
        prop_assert!(world.free_cells().all(|c| reach[g.index(c)]));
    }

    #[test]
    fn rasterized_worlds_round_trip_through_graymaps(seed in any::<u64>(), class in class()) {
        let mut spec = generate_floorplan(seed, class).unwrap();
        spec.resolution = 2.0;
        let world = rasterize_floorplan(&spec).unwrap();
        let bytes = world.to_graymap().encode();
        let back = load_graymap(&bytes, spec.resolution).unwrap();
        prop_assert_eq!(&back, &world);
        prop_assert_eq!(back.to_graymap().encode(), bytes);
    }
}
