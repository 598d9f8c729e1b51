use mograsp::contact::FrictionModel;
use mograsp::geometry::*;
use mograsp::planning::*;
use mograsp::rng::seeded_rng;
use mograsp::scene::{generate_scene, SceneSpec};
use proptest::prelude::*;
use rand::Rng;

fn p(x: f64, y: f64) -> Point2 {
    Point2::new(x, y)
}

fn small_scene(seed: u64, count: usize) -> Vec<ConvexPolygon> {
    generate_scene(&SceneSpec {
        seed,
        count,
        region: [110.0, 90.0],
        clustering: 1.0,
        ..SceneSpec::default()
    })
    .unwrap()
}

fn all_of(scene: &[ConvexPolygon]) -> ObjectGroup {
    ObjectGroup::new((0..scene.len()).collect()).unwrap()
}

#[test]
fn isolated_square_has_collision_free_candidates() {
    let spec = GripperSpec::default();
    let scene = vec![square(p(0.0, 0.0), 40.0), square(p(400.0, 0.0), 40.0)];
    let g = ObjectGroup::singleton(0);
    let cands = gen_grasp_cands(&scene, &g, &spec, 25, 12).unwrap();
    assert!(!cands.is_empty());
    assert!(cands.len() <= 36 * 12);
    for a in &cands {
        for jaw in jaw_footprints(a, &spec, spec.max_width) {
            for o in &scene {
                let area = clip_convex(o, &jaw.to_polygon()).map_or(0.0, |c| c.area());
                assert!(area < 1e-9);
            }
        }
    }
}

#[test]
fn jammed_object_has_no_candidates() {
    let spec = GripperSpec::default();
    let mut scene = vec![square(p(0.0, 0.0), 20.0)];
    // A dense ring of blocks around the target leaves no room for a jaw.
    for i in -3i32..=3 {
        for j in -3i32..=3 {
            if i == 0 && j == 0 {
                continue;
            }
            scene.push(square(p(21.0 * i as f64, 21.0 * j as f64), 20.0));
        }
    }
    let cands = gen_grasp_cands(&scene, &ObjectGroup::singleton(0), &spec, 25, 12).unwrap();
    assert!(cands.is_empty());
    let (plan, _) = robust_grasp_planner(
        &scene,
        &ObjectGroup::singleton(0),
        &PlannerSettings::default(),
        &ConstantPredictor(1.0),
    )
    .unwrap();
    assert!(plan.is_none());
}

#[test]
fn intersection_area_examples() {
    let spec = GripperSpec::default();
    let scene = vec![square(p(-20.0, 0.0), 40.0), square(p(20.5, 0.0), 40.0)];
    let g = all_of(&scene);
    let a = total_intersection_area(&scene, &g, &GraspAction::new(0.0, 0.0, 0.0), &spec).unwrap();
    assert!((a - 3200.0).abs() < 1e-9);
    let miss = total_intersection_area(&scene, &g, &GraspAction::new(0.0, 300.0, 0.0), &spec).unwrap();
    assert_eq!(miss, 0.0);

    // Square straddling the far edge of the interior rect: Monte-Carlo oracle.
    let straddle = vec![square(p(0.0, 22.0), 30.0)];
    let got = total_intersection_area(&straddle, &all_of(&straddle), &GraspAction::new(0.0, 0.0, 0.0), &spec).unwrap();
    let mut rng = seeded_rng(9);
    let n = 1_000_000;
    let hits = (0..n)
        .filter(|_| {
            let (x, y): (f64, f64) = (rng.random_range(-15.0..15.0), rng.random_range(7.0..37.0));
            x.abs() <= 42.5 && y.abs() <= 22.0
        })
        .count();
    let est = hits as f64 / n as f64 * 900.0;
    assert!((got - est).abs() / got < 0.005, "{got} vs {est}");
}

#[test]
fn rect_missing_a_member_fails() {
    let spec = GripperSpec::default();
    let scene = vec![square(p(0.0, 0.0), 30.0), square(p(0.0, 200.0), 30.0)];
    let ok = check_necessary_conditions(
        &scene,
        &all_of(&scene),
        &GraspAction::new(0.0, 0.0, 0.0),
        &spec,
        FrictionModel::frictional(),
        5,
    )
    .unwrap();
    assert!(!ok);
}

#[test]
fn gamma_near_the_area_boundary_is_fractional() {
    // 20 mm square overlapping the interior rect by 1 mm along the jaw length.
    let spec = GripperSpec::default();
    let scene = vec![square(p(0.0, 22.0 + 10.0 - 1.0), 20.0)];
    let a = GraspAction::new(0.0, 0.0, 0.0);
    let noise = NoiseModel {
        n_mc: 1000,
        seed: 17,
        ..NoiseModel::default()
    };
    let g = necessary_conds_proba(&scene, &all_of(&scene), &a, &spec, FrictionModel::frictional(), 5, &noise).unwrap();
    assert!(g > 0.05 && g < 0.95, "{g}");
    let again = necessary_conds_proba(&scene, &all_of(&scene), &a, &spec, FrictionModel::frictional(), 5, &noise).unwrap();
    assert_eq!(g, again);
}

#[test]
fn gamma_estimates_agree_across_seeds() {
    let spec = GripperSpec::default();
    let scene = vec![square(p(0.0, 22.0 + 10.0 - 1.5), 20.0)];
    let a = GraspAction::new(0.0, 0.0, 0.0);
    let est = |seed| {
        let noise = NoiseModel {
            n_mc: 10_000,
            seed,
            ..NoiseModel::default()
        };
        necessary_conds_proba(&scene, &all_of(&scene), &a, &spec, FrictionModel::frictional(), 5, &noise).unwrap()
    };
    let (g1, g2) = (est(1), est(2));
    let mean = 0.5 * (g1 + g2);
    let se = (2.0 * mean * (1.0 - mean) / 10_000.0).sqrt();
    assert!((g1 - g2).abs() < 3.0 * se, "{g1} {g2}");
}

#[test]
fn chain_wider_than_the_opening_is_always_screened_out() {
    let spec = GripperSpec::default();
    // Three 30 mm squares in a row: 90 mm of minimum width against an 85 mm opening.
    let scene: Vec<ConvexPolygon> = (0..3).map(|k| square(p(31.0 * k as f64, 0.0), 30.0)).collect();
    let g = all_of(&scene);
    for ix in -10..=20 {
        for iy in -8..=8 {
            for k in 0..24 {
                let a = GraspAction::new(3.0 * ix as f64, 3.0 * iy as f64, std::f64::consts::PI * k as f64 / 24.0);
                for f in [FrictionModel::frictional(), FrictionModel::frictionless()] {
                    assert!(!check_necessary_conditions(&scene, &g, &a, &spec, f, 5).unwrap());
                }
            }
        }
    }
}

#[test]
fn gammas_do_not_depend_on_thread_count() {
    let scene = small_scene(4, 3);
    let g = all_of(&scene);
    let settings = PlannerSettings::default();
    let cands = admissible_candidates(&scene, &g, &settings).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| candidate_gammas(&scene, &g, &cands, &settings).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn planner_is_deterministic_on_two_squares() {
    let scene = vec![square(p(-18.0, 0.0), 35.0), square(p(18.0, 0.0), 35.0)];
    let g = all_of(&scene);
    let settings = PlannerSettings {
        noise: NoiseModel {
            seed: 5,
            ..NoiseModel::default()
        },
        ..PlannerSettings::default()
    };
    let h = AreaHeuristic { spec: settings.spec };
    let (a, _) = robust_grasp_planner(&scene, &g, &settings, &h).unwrap();
    let (b, _) = robust_grasp_planner(&scene, &g, &settings, &h).unwrap();
    let a = a.expect("two 35 mm squares fit");
    assert_eq!(a, b.unwrap());
    assert!(a.eval.gamma > 0.0);
}

#[test]
fn score_is_gamma_times_count() {
    let a = CandidateEval::new(GraspAction::new(0.0, 0.0, 0.0), 1.0, 2.0);
    let b = CandidateEval::new(GraspAction::new(0.0, 0.0, 0.0), 0.4, 4.0);
    assert!(a.score > b.score);
    assert!((b.score - 1.6).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn degenerate_noise_gamma_matches_the_check(seed in 0u64..10_000, x in -20.0..20.0f64, y in -20.0..20.0f64, t in 0.0..3.14f64) {
        let scene = small_scene(seed, 2);
        let g = all_of(&scene);
        let c = scene[0].centroid();
        let a = GraspAction::new(c.x + x, c.y + y, t);
        let spec = GripperSpec::default();
        let f = FrictionModel::frictional();
        let gamma = necessary_conds_proba(&scene, &g, &a, &spec, f, 5, &NoiseModel::zero(seed)).unwrap();
        let held = check_necessary_conditions(&scene, &g, &a, &spec, f, 5).unwrap();
        prop_assert_eq!(gamma, if held { 1.0 } else { 0.0 });
    }

    #[test]
    fn planner_returns_the_exhaustive_argmax(seed in 0u64..10_000, area in any::<bool>()) {
        let scene = small_scene(seed, 3);
        let g = all_of(&scene);
        let settings = PlannerSettings {
            n_p: 9,
            n_theta: 6,
            noise: NoiseModel { n_mc: 10, seed, ..NoiseModel::default() },
            ..PlannerSettings::default()
        };
        let heuristic = AreaHeuristic { spec: settings.spec };
        let constant = ConstantPredictor(2.0);
        let pred: &dyn GraspPredictor = if area { &heuristic } else { &constant };
        let all = evaluate_all(&scene, &g, &settings, pred).unwrap();
        let (plan, stats) = robust_grasp_planner(&scene, &g, &settings, pred).unwrap();
        prop_assert_eq!(stats.candidates, all.len());
        let best = all.iter().map(|e| e.score).fold(0.0, f64::max);
        match plan {
            None => prop_assert_eq!(best, 0.0),
            Some(p) => {
                prop_assert!(all.iter().all(|e| p.eval.score >= e.score));
                let first = all.iter().position(|e| e.score == best).unwrap();
                prop_assert_eq!(p.candidate_index, first);
                prop_assert_eq!(p.eval, all[first]);
            }
        }
        for a in admissible_candidates(&scene, &g, &settings).unwrap() {
            prop_assert!(!jaws_collide(&scene, &a, &settings.spec));
        }
    }
}
