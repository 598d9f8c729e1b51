use mograsp::geometry::*;
use mograsp::rng::seeded_rng;
use proptest::prelude::*;
use rand::Rng;

fn p(x: f64, y: f64) -> Point2 {
    Point2::new(x, y)
}

/// Point-in-convex-polygon oracle using raw cross products of the vertex list.
fn inside(vs: &[Point2], q: Point2) -> bool {
    let n = vs.len();
    let sign = |i: usize| {
        let a = vs[i];
        let b = vs[(i + 1) % n];
        (b.x - a.x) * (q.y - a.y) - (b.y - a.y) * (q.x - a.x)
    };
    (0..n).all(|i| sign(i) >= 0.0) || (0..n).all(|i| sign(i) <= 0.0)
}

fn mc_area(region: impl Fn(Point2) -> bool, lo: Point2, hi: Point2, n: usize, seed: u64) -> f64 {
    let mut rng = seeded_rng(seed);
    let hits = (0..n)
        .filter(|_| region(p(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y))))
        .count();
    hits as f64 / n as f64 * (hi.x - lo.x) * (hi.y - lo.y)
}

/// Point-to-segment distance oracle by projection clamping.
fn pt_seg(q: Point2, a: Point2, b: Point2) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let t = (((q.x - a.x) * dx + (q.y - a.y) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
    ((a.x + t * dx - q.x).powi(2) + (a.y + t * dy - q.y).powi(2)).sqrt()
}

fn brute_distance(a: &[Point2], b: &[Point2]) -> f64 {
    let mut best = f64::INFINITY;
    for (x, y) in [(a, b), (b, a)] {
        for &q in x {
            for i in 0..y.len() {
                let s0 = y[i];
                let s1 = y[(i + 1) % y.len()];
                best = best.min(pt_seg(q, s0, s1));
            }
        }
    }
    best
}

#[test]
fn hull_examples() {
    let pts = [p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0), p(0.0, 1.0), p(0.5, 0.5)];
    let h = convex_hull(&pts).unwrap();
    assert_eq!(h.len(), 4);
    assert!((h.area() - 1.0).abs() < 1e-12);
    let tri = [p(0.0, 0.0), p(3.0, 0.0), p(0.0, 4.0)];
    assert_eq!(convex_hull(&tri).unwrap().len(), 3);
}

#[test]
fn hull_of_disc_points() {
    let mut rng = seeded_rng(11);
    let r = 50.0;
    let pts: Vec<Point2> = (0..100)
        .map(|_| {
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            let s = r * rng.random::<f64>().sqrt();
            p(s * a.cos(), s * a.sin())
        })
        .collect();
    let h = convex_hull(&pts).unwrap();
    assert!(h.area() <= std::f64::consts::PI * r * r);
    for q in &pts {
        assert!(h.inside_distance(*q) >= -1e-9);
    }
}

#[test]
fn area_examples_and_monte_carlo() {
    assert!((square(p(3.0, 4.0), 10.0).area() - 100.0).abs() < 1e-12);
    let tri = ConvexPolygon::new(vec![p(0.0, 0.0), p(30.0, 0.0), p(0.0, 40.0)]).unwrap();
    assert!((polygon_area(&tri) - 600.0).abs() < 1e-12);

    let hept = random_convex_polygon(&mut seeded_rng(5), 7, 30.0, 0.7, p(10.0, -5.0));
    assert_eq!(hept.len(), 7);
    let (lo, hi) = hept.bbox();
    let est = mc_area(|q| inside(hept.vertices(), q), lo, hi, 1_000_000, 1);
    assert!((est - hept.area()).abs() / hept.area() < 0.005, "{est} vs {}", hept.area());
}

#[test]
fn clip_examples() {
    let rect = OrientedRect::new(p(0.0, 0.0), p(1.0, 0.0), 42.5, 22.0).unwrap();
    let sq = square(p(0.0, 0.0), 40.0);
    let c = clip_polygon_to_rect(&sq, &rect).unwrap();
    assert!((c.area() - 1600.0).abs() < 1e-9);

    // Square straddling the right edge of the rect exactly halfway.
    let straddle = square(p(42.5, 0.0), 20.0);
    let c = clip_polygon_to_rect(&straddle, &rect).unwrap();
    let corners = rect.corners();
    let est = mc_area(
        |q| inside(straddle.vertices(), q) && inside(&corners, q),
        p(32.5, -10.0),
        p(52.5, 10.0),
        1_000_000,
        2,
    );
    assert!((c.area() - 200.0).abs() < 1e-9);
    assert!((est - c.area()).abs() / c.area() < 0.005);

    assert!(clip_polygon_to_rect(&square(p(200.0, 0.0), 10.0), &rect).is_none());
}

#[test]
fn distance_examples() {
    let a = square(p(0.0, 0.0), 1.0);
    let b = square(p(6.0, 0.0), 1.0);
    assert!((min_distance(&a, &b) - 5.0).abs() < 1e-12);
    let c = square(p(0.5, 0.5), 1.0);
    assert_eq!(min_distance(&a, &c), 0.0);

    let sq = square(p(0.0, 0.0), 10.0);
    let seg = Segment::new(p(8.0, 9.0), p(12.0, 6.0));
    let oracle = brute_distance(sq.vertices(), &[seg.a(), seg.b()]);
    assert!((min_distance(&sq, &seg) - oracle).abs() < 1e-9);
}

#[test]
fn cover_points_examples() {
    let pts = uniform_cover_points(&square(p(0.0, 0.0), 100.0), 25).unwrap();
    assert_eq!(pts.len(), 25);
    let mut xs: Vec<f64> = pts.iter().map(|q| q.x).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    assert_eq!(xs.len(), 5);

    let sliver = ConvexPolygon::new(vec![p(0.0, 0.0), p(100.0, 0.0), p(100.0, 1.5)]).unwrap();
    for q in uniform_cover_points(&sliver, 25).unwrap() {
        assert!(sliver.inside_distance(q) > 0.0);
    }
}

#[test]
fn cover_points_spacing_on_random_hulls() {
    let mut rng = seeded_rng(3);
    for _ in 0..20 {
        let hull = random_convex_polygon(&mut rng, 6, 40.0, 0.6, p(0.0, 0.0));
        let pts = uniform_cover_points(&hull, 25).unwrap();
        assert!((25..=36).contains(&pts.len()), "{}", pts.len());
        let nn: Vec<f64> = pts
            .iter()
            .map(|a| {
                pts.iter()
                    .filter(|b| *b != a)
                    .map(|b| a.distance(*b))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let pitch = nn.iter().copied().fold(f64::INFINITY, f64::min);
        for d in nn {
            assert!(d <= 2.0 * pitch + 1e-9);
        }
        for q in &pts {
            assert!(hull.inside_distance(*q) > 0.0);
        }
    }
}

fn arb_polygon() -> impl Strategy<Value = ConvexPolygon> {
    (any::<u64>(), 3usize..=8, 5.0..40.0f64, 0.3..1.0f64, -50.0..50.0f64, -50.0..50.0f64)
        .prop_map(|(seed, k, r, asp, x, y)| random_convex_polygon(&mut seeded_rng(seed), k, r, asp, p(x, y)))
}

fn arb_rect() -> impl Strategy<Value = OrientedRect> {
    (-40.0..40.0f64, -40.0..40.0f64, 0.0..std::f64::consts::PI, 5.0..50.0f64, 5.0..30.0f64)
        .prop_map(|(x, y, a, hw, hl)| OrientedRect::new(p(x, y), Point2::from_angle(a), hw, hl).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn clip_is_monotone_and_idempotent(poly in arb_polygon(), rect in arb_rect()) {
        if let Some(c) = clip_polygon_to_rect(&poly, &rect) {
            let rect_area = 4.0 * rect.half_width * rect.half_length;
            prop_assert!(c.area() <= poly.area().min(rect_area) + 1e-9);
            let again = clip_polygon_to_rect(&c, &rect).expect("non-empty clip stays non-empty");
            prop_assert_eq!(again.len(), c.len());
            for v in c.vertices() {
                let nearest = again.vertices().iter().map(|w| w.distance(*v)).fold(f64::INFINITY, f64::min);
                prop_assert!(nearest < 1e-9);
            }
        }
    }

    #[test]
    fn hull_contains_inputs(seed in any::<u64>(), n in 3usize..60) {
        let mut rng = seeded_rng(seed);
        let pts: Vec<Point2> = (0..n).map(|_| p(rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0))).collect();
        if let Ok(h) = convex_hull(&pts) {
            for q in &pts {
                prop_assert!(h.inside_distance(*q) >= -1e-9);
            }
        }
    }

    #[test]
    fn distance_is_symmetric_and_matches_brute_force(a in arb_polygon(), b in arb_polygon()) {
        let d = min_distance(&a, &b);
        prop_assert_eq!(d, min_distance(&b, &a));
        if clip_convex(&a, &b).is_none() && d > 0.0 {
            let oracle = brute_distance(a.vertices(), b.vertices());
            prop_assert!((d - oracle).abs() < 1e-9, "{} vs {}", d, oracle);
        }
    }

    #[test]
    fn area_is_positive_and_shoelace(poly in arb_polygon()) {
        let vs = poly.vertices();
        let n = vs.len();
        let shoelace: f64 = (0..n).map(|i| vs[i].x * vs[(i + 1) % n].y - vs[(i + 1) % n].x * vs[i].y).sum::<f64>() / 2.0;
        prop_assert!(poly.area() > 0.0);
        prop_assert!((poly.area() - shoelace.abs()).abs() < 1e-9 * poly.area().max(1.0));
    }
}
