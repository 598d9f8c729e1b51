//! Procedural scene generation and the scene file format.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GraspError, Result};
use crate::geometry::{clip_convex, min_distance, random_convex_polygon, ConvexPolygon, Point2};
use crate::rng::seeded_rng;

pub const SCENE_SCHEMA: &str = "mograsp-scene/1";
/// Rejection-sampling budget per object.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

/// Parameters of a random scene.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub seed: u64,
    pub count: usize,
    /// Placement region `[0, w] x [0, h]`, mm.
    pub region: [f64; 2],
    /// Inclusive range of vertex counts.
    pub vertices: [usize; 2],
    /// Circumradius range of generated objects, mm.
    pub radius: [f64; 2],
    /// Range of the minor/major axis ratio.
    pub aspect: [f64; 2],
    /// Probability that an object is placed next to an existing one.
    pub clustering: f64,
    /// Minimum clearance between objects, mm.
    pub min_gap: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            seed: 0,
            count: 75,
            region: [600.0, 450.0],
            vertices: [3, 8],
            radius: [12.0, 24.0],
            aspect: [0.55, 1.0],
            clustering: 0.7,
            min_gap: 1.0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(GraspError::Config(format!("scene: {m}")));
        if self.count == 0 {
            return bad("count must be positive");
        }
        if !(self.region[0] > 0.0 && self.region[1] > 0.0) {
            return bad("region must have positive extent");
        }
        if !(3 <= self.vertices[0] && self.vertices[0] <= self.vertices[1] && self.vertices[1] <= 8) {
            return bad("vertex range must lie within 3..=8");
        }
        if !(self.radius[0] > 0.0 && self.radius[0] <= self.radius[1]) {
            return bad("radius range must be positive and ordered");
        }
        if 2.0 * self.radius[1] > self.region[0].min(self.region[1]) {
            return bad("objects do not fit in the region");
        }
        if !(self.aspect[0] > 0.0 && self.aspect[0] <= self.aspect[1] && self.aspect[1] <= 1.0) {
            return bad("aspect range must lie within (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.clustering) {
            return bad("clustering must lie in [0, 1]");
        }
        if !(self.min_gap >= 0.0) {
            return bad("min_gap must be non-negative");
        }
        Ok(())
    }
}

fn fits(candidate: &ConvexPolygon, placed: &[ConvexPolygon], spec: &SceneSpec) -> bool {
    let (lo, hi) = candidate.bbox();
    if lo.x < 0.0 || lo.y < 0.0 || hi.x > spec.region[0] || hi.y > spec.region[1] {
        return false;
    }
    placed.iter().all(|o| {
        let far = o.centroid().distance(candidate.centroid()) > o.radius() + candidate.radius() + spec.min_gap;
        far || (clip_convex(candidate, o).is_none() && min_distance(candidate, o) >= spec.min_gap)
    })
}

/// Random pairwise-disjoint convex objects. With probability `clustering`
/// an object is proposed right next to a random existing one, otherwise
/// uniformly in the region.
pub fn generate_scene(spec: &SceneSpec) -> Result<Vec<ConvexPolygon>> {
    spec.validate()?;
    let mut rng = seeded_rng(spec.seed);
    let mut placed: Vec<ConvexPolygon> = Vec::with_capacity(spec.count);
    for object in 0..spec.count {
        let k = rng.random_range(spec.vertices[0]..=spec.vertices[1]);
        let radius = rng.random_range(spec.radius[0]..=spec.radius[1]);
        let aspect = rng.random_range(spec.aspect[0]..=spec.aspect[1]);
        let shape = random_convex_polygon(&mut rng, k, radius, aspect, Point2::ORIGIN);
        let offset = shape.centroid();
        let shape = shape.translated(-offset);
        let mut done = false;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let center = if !placed.is_empty() && rng.random_bool(spec.clustering) {
                let anchor = &placed[rng.random_range(0..placed.len())];
                let dir = Point2::from_angle(rng.random_range(0.0..std::f64::consts::TAU));
                let reach = anchor.radius() * rng.random_range(0.5..1.0)
                    + shape.radius() * rng.random_range(0.5..1.0)
                    + spec.min_gap
                    + rng.random_range(0.0..8.0);
                anchor.centroid() + dir * reach
            } else {
                Point2::new(
                    rng.random_range(0.0..spec.region[0]),
                    rng.random_range(0.0..spec.region[1]),
                )
            };
            let candidate = shape.translated(center);
            if fits(&candidate, &placed, spec) {
                placed.push(candidate);
                done = true;
                break;
            }
        }
        if !done {
            return Err(GraspError::PlacementFailure {
                object,
                attempts: MAX_PLACEMENT_ATTEMPTS,
            });
        }
    }
    Ok(placed)
}

/// Mean distance from each object's centroid to its nearest neighbour's.
pub fn mean_nearest_neighbor_distance(scene: &[ConvexPolygon]) -> f64 {
    if scene.len() < 2 {
        return 0.0;
    }
    let total: f64 = scene
        .iter()
        .enumerate()
        .map(|(i, a)| {
            scene
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, b)| a.centroid().distance(b.centroid()))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    total / scene.len() as f64
}

#[derive(Serialize, Deserialize)]
struct ObjectRecord {
    vertices: Vec<Point2>,
}

#[derive(Serialize, Deserialize)]
struct SceneFile {
    schema: String,
    seed: u64,
    objects: Vec<ObjectRecord>,
}

/// A scene together with the seed it was generated from.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub seed: u64,
    pub objects: Vec<ConvexPolygon>,
}

impl Scene {
    pub fn to_json(&self) -> String {
        let file = SceneFile {
            schema: SCENE_SCHEMA.to_string(),
            seed: self.seed,
            objects: self
                .objects
                .iter()
                .map(|o| ObjectRecord {
                    vertices: o.vertices().to_vec(),
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("scene serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Scene> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value.get("schema").and_then(|s| s.as_str()).unwrap_or("<missing>");
        if found != SCENE_SCHEMA {
            return Err(GraspError::Schema {
                expected: SCENE_SCHEMA.into(),
                found: found.into(),
            });
        }
        let file: SceneFile = serde_json::from_value(value)?;
        let objects = file
            .objects
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                ConvexPolygon::object(r.vertices).map_err(|e| GraspError::Format(format!("object {i}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Scene {
            seed: file.seed,
            objects,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenes_are_reproducible_and_disjoint() {
        let spec = SceneSpec {
            seed: 11,
            ..SceneSpec::default()
        };
        let a = generate_scene(&spec).unwrap();
        let b = generate_scene(&spec).unwrap();
        assert_eq!(a.len(), 75);
        assert_eq!(a, b);
        for i in 0..a.len() {
            for j in i + 1..a.len() {
                assert!(clip_convex(&a[i], &a[j]).is_none());
            }
        }
    }

    #[test]
    fn single_object_is_in_region() {
        let spec = SceneSpec {
            count: 1,
            ..SceneSpec::default()
        };
        let s = generate_scene(&spec).unwrap();
        let (lo, hi) = s[0].bbox();
        assert!(lo.x >= 0.0 && lo.y >= 0.0 && hi.x <= spec.region[0] && hi.y <= spec.region[1]);
    }

    #[test]
    fn overfull_region_fails() {
        let spec = SceneSpec {
            count: 50,
            region: [60.0, 60.0],
            radius: [12.0, 14.0],
            ..SceneSpec::default()
        };
        assert!(matches!(generate_scene(&spec), Err(GraspError::PlacementFailure { .. })));
    }

    #[test]
    fn json_round_trip_is_byte_identical() {
        let spec = SceneSpec {
            seed: 5,
            count: 6,
            ..SceneSpec::default()
        };
        let scene = Scene {
            seed: 5,
            objects: generate_scene(&spec).unwrap(),
        };
        let text = scene.to_json();
        let back = Scene::from_json(&text).unwrap();
        assert_eq!(back, scene);
        assert_eq!(back.to_json(), text);
        let wrong = text.replace(SCENE_SCHEMA, "mograsp-scene/0");
        assert!(matches!(Scene::from_json(&wrong), Err(GraspError::Schema { .. })));
    }
}
