use navfuse_core::fusion::{build_target, FusionConfig};
use navfuse_core::gridworld::{
    generate_map, geodesic_distance, Action, ActionDistribution, ActionSet, Cell, MapGenConfig,
};
use navfuse_core::promptfmt::{parse_distribution, round_hundredths, serialize_distribution};
use proptest::prelude::*;

fn distribution() -> impl Strategy<Value = ActionDistribution> {
    prop::array::uniform6(0.0f64..1.0)
        .prop_filter("some mass", |w| w.iter().sum::<f64>() > 1e-3)
        .prop_map(|w| ActionDistribution::normalized(w).unwrap())
}

fn colliding_set() -> impl Strategy<Value = ActionSet> {
    // Stop never collides
    (0u8..32).prop_map(|bits| ActionSet::from_bits(bits << 1))
}

fn action() -> impl Strategy<Value = Action> {
    (0usize..6).prop_map(|i| Action::from_index(i).unwrap())
}

proptest! {
    #[test]
    fn fused_target_is_a_distribution_off_the_colliding_set(
        p in distribution(),
        gt in action(),
        colliding in colliding_set(),
        alpha in 0.0f64..=1.0,
    ) {
        let cfg = FusionConfig { alpha, ..FusionConfig::default() };
        let target = build_target(&p, gt, colliding, &cfg).unwrap();
        let q = target.probs();
        prop_assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for a in Action::ALL {
            if colliding.contains(a) {
                prop_assert_eq!(q[a.index()], 0.0);
            } else {
                prop_assert!(q[a.index()] >= 0.0);
            }
        }
        // on the surviving actions the target is proportional to the mixture
        let mix: Vec<f64> = (0..6)
            .map(|i| alpha * p.probs()[i] + if i == gt.index() { 1.0 - alpha } else { 0.0 })
            .collect();
        let kept: f64 = Action::ALL.iter().filter(|a| !colliding.contains(**a)).map(|a| mix[a.index()]).sum();
        if kept > 1e-6 {
            for a in Action::ALL.iter().filter(|a| !colliding.contains(**a)) {
                prop_assert!((q[a.index()] - mix[a.index()] / kept).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn empty_mask_leaves_the_mixture(p in distribution(), gt in action(), alpha in 0.0f64..=1.0) {
        let cfg = FusionConfig { alpha, ..FusionConfig::default() };
        let target = build_target(&p, gt, ActionSet::default(), &cfg).unwrap();
        for i in 0..6 {
            let want = alpha * p.probs()[i] + if i == gt.index() { 1.0 - alpha } else { 0.0 };
            prop_assert!((target.probs()[i] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn serialized_distributions_parse_back(p in distribution()) {
        let text = serialize_distribution(&p);
        let cents = round_hundredths(&p);
        prop_assert_eq!(cents.iter().sum::<u32>(), 100);
        let back = parse_distribution(&text).unwrap();
        for i in 0..6 {
            prop_assert!((back.probs()[i] - cents[i] as f64 / 100.0).abs() < 1e-12);
            prop_assert!((back.probs()[i] - p.probs()[i]).abs() <= 0.02);
        }
    }

    #[test]
    fn clause_order_and_case_do_not_matter(p in distribution(), order in Just((0..6usize).collect::<Vec<_>>()).prop_shuffle()) {
        let text = serialize_distribution(&p);
        let clauses: Vec<&str> = text.split(", ").map(|c| c.trim_start_matches("and ")).collect();
        let shuffled: Vec<String> = order.iter().map(|&i| clauses[i].to_uppercase()).collect();
        let reordered = format!("{}.", shuffled.join(" , "));
        prop_assert_eq!(parse_distribution(&reordered).unwrap(), parse_distribution(&text).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn geodesic_distance_is_symmetric(seed in any::<u64>(), picks in prop::array::uniform4(any::<prop::sample::Index>())) {
        let grid = generate_map(&MapGenConfig { width: 24, height: 24, ..MapGenConfig::default() }, seed).unwrap();
        let free: Vec<Cell> = grid.free_cells().collect();
        let a = picks[0].get(&free);
        let b = picks[1].get(&free);
        let c = picks[2].get(&free);
        let ab = geodesic_distance(&grid, *a, &[*b]).unwrap();
        let ba = geodesic_distance(&grid, *b, &[*a]).unwrap();
        prop_assert!((ab - ba).abs() < 1e-9 || (ab.is_infinite() && ba.is_infinite()));
        let ac = geodesic_distance(&grid, *a, &[*c]).unwrap();
        let bc = geodesic_distance(&grid, *b, &[*c]).unwrap();
        if ab.is_finite() && bc.is_finite() {
            prop_assert!(ac <= ab + bc + 1e-9);
        }
        prop_assert_eq!(geodesic_distance(&grid, *a, &[*a]).unwrap(), 0.0);
    }
}
