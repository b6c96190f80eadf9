use proptest::prelude::*;
use psm_core::impact::{impact_factors, progress_rollup};
use psm_core::model::ops::{self, Part};
use psm_core::model::{validate, Id, ProblemModel};
use psm_core::persist::{deserialize_model, serialize_model, verify_bytes, LogVerdict};
use psm_testkit::gen::{random_model, Shape};
use psm_testkit::{oracle, seeded};

fn model_for(seed: u64) -> ProblemModel {
    random_model(&mut seeded(seed), Shape::default())
}

fn with_progress(model: &ProblemModel, index: usize, progress: f64) -> ProblemModel {
    let mut next = model.clone();
    next.solutions[index].progress = progress;
    next
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn generated_models_are_valid(seed in any::<u64>()) {
        let model = model_for(seed);
        prop_assert!(validate(&model).is_empty());
    }

    #[test]
    fn operations_leave_their_input_untouched(seed in any::<u64>(), pick in any::<prop::sample::Index>(), w in 0.01f64..0.99) {
        let model = model_for(seed);
        let before = model.clone();
        let target = &model.obstacles[pick.index(model.obstacles.len())];
        let results = [
            ops::subdivide_obstacle(&model, &target.id, &[Part::new("a", w), Part::new("b", 1.0 - w)]),
            ops::add_obstacle(&model, None, "extra", &[(Id::root(), w)]),
            ops::mark_leaf(&model, &target.id),
        ];
        prop_assert_eq!(&model, &before);
        for next in results.into_iter().flatten() {
            prop_assert!(validate(&next).is_empty(), "{:?}", validate(&next));
        }
    }

    #[test]
    fn impacts_match_path_enumeration(seed in any::<u64>()) {
        let model = model_for(seed);
        let engine = impact_factors(&model);
        let paths = oracle::path_impacts(&model);
        for (id, value) in &engine {
            prop_assert!((value - paths[id.as_str()]).abs() <= 1e-12, "{id}: {value} vs {}", paths[id.as_str()]);
        }
    }

    #[test]
    fn goal_progress_is_affine_in_each_solution(seed in any::<u64>(), pick in any::<prop::sample::Index>(), p in 0.0f64..=1.0) {
        let model = model_for(seed);
        let i = pick.index(model.solutions.len());
        let at = |x: f64| progress_rollup(&with_progress(&model, i, x)).goal_progress;
        let (g0, g1, gp) = (at(0.0), at(1.0), at(p));
        prop_assert!((gp - (g0 + p * (g1 - g0))).abs() <= 1e-12);
        // Slope is the solution's own impact.
        let slope = oracle::path_impacts(&model)[model.solutions[i].leaf_obstacle_id.as_str()] * model.solutions[i].share;
        prop_assert!((g1 - g0 - slope).abs() <= 1e-12);
    }

    #[test]
    fn goal_progress_is_monotone_and_bounded(seed in any::<u64>(), pick in any::<prop::sample::Index>(), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let model = model_for(seed);
        let i = pick.index(model.solutions.len());
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let g_lo = progress_rollup(&with_progress(&model, i, lo)).goal_progress;
        let g_hi = progress_rollup(&with_progress(&model, i, hi)).goal_progress;
        prop_assert!(g_lo <= g_hi + 1e-15);
        prop_assert!((0.0..=1.0 + 1e-9).contains(&g_hi));
    }

    #[test]
    fn model_documents_round_trip(seed in any::<u64>()) {
        let model = model_for(seed);
        let text = serialize_model(&model);
        let back = deserialize_model(&text).expect("own output parses");
        prop_assert_eq!(&back, &model);
        prop_assert_eq!(serialize_model(&back), text);
    }

    #[test]
    fn verification_is_total(bytes in prop::collection::vec(any::<u8>(), 0..600)) {
        match verify_bytes(&bytes) {
            LogVerdict::Ok { count, .. } => prop_assert_eq!(count, 0),
            LogVerdict::Bad { seq, .. } => prop_assert!(seq >= 1),
        }
    }

    #[test]
    fn verification_is_total_on_json_lines(lines in prop::collection::vec("\\{\"seq\":[0-9],\"kind\":\"[A-Z_]{0,12}\"\\}", 1..5)) {
        let bytes: Vec<u8> = lines.iter().flat_map(|l| format!("{l}\n").into_bytes()).collect();
        let rejected = matches!(verify_bytes(&bytes), LogVerdict::Bad { seq: 1, .. });
        prop_assert!(rejected);
    }
}
