//! Deterministic quasi-static grasp outcome model.
//!
//! Given a scene and an executed action, decide which objects end up held
//! between the jaws. This is the ground truth for dataset labels and the
//! benchmark; it is a coarse stand-in for a physical robot.

use serde::{Deserialize, Serialize};

use crate::contact::{
    check_chain_colinearity, is_equilibrium_pair, sample_contacts, ContactPoint, FrictionModel, StablePair,
};
use crate::error::{GraspError, Result};
use crate::geometry::{
    clip_convex, clip_polygon_to_rect, overlaps_rect, ConvexPolygon, OrientedRect, Point2,
};
use crate::planning::{chain_h0, gripper_interior, jaw_footprints, GraspAction, GripperSpec, NoiseModel};
use crate::rng::seeded_rng;

/// Tunables of the outcome model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    /// Contact samples along a face that lies flush against a jaw.
    pub dense_n_s: usize,
    /// Minimum fraction of an object's area inside the jaws for it to stay.
    pub tau_contain: f64,
    /// Allowed angle between the support lines of a retained chain, rad.
    pub colinear_tol: f64,
    /// Largest turn the squeeze may give an object before it is lost, rad.
    pub max_settle: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            dense_n_s: 25,
            tau_contain: 0.35,
            colinear_tol: 0.1,
            max_settle: std::f64::consts::FRAC_PI_2,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        if self.dense_n_s == 0 {
            return Err(GraspError::Config("dense_n_s must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.tau_contain) {
            return Err(GraspError::Config(format!("tau_contain {} outside [0, 1]", self.tau_contain)));
        }
        if !(self.colinear_tol >= 0.0 && self.colinear_tol < std::f64::consts::FRAC_PI_2) {
            return Err(GraspError::Config(format!("colinear_tol {} outside [0, π/2)", self.colinear_tol)));
        }
        if !(0.0..=std::f64::consts::PI).contains(&self.max_settle) {
            return Err(GraspError::Config(format!("max_settle {} outside [0, π]", self.max_settle)));
        }
        Ok(())
    }
}

/// What happened to one scene object.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectFate {
    Retained,
    NeverContacted,
    SqueezedOut,
    JawCollision,
}

/// Result of one simulated grasp.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    /// The action after execution noise.
    pub executed: GraspAction,
    /// Retained scene indices in chain order.
    pub retained: Vec<usize>,
    pub n_g: usize,
    /// Summed diameters of the retained support pairs.
    pub final_width: f64,
    /// One entry per scene object.
    pub fates: Vec<ObjectFate>,
    /// Rigid moves of the objects that were pushed aside.
    pub moves: Vec<ObjectMove>,
}

/// A pushed object: turned by `turn` rad about its centroid, then shifted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectMove {
    pub index: usize,
    pub shift: Point2,
    pub turn: f64,
}

/// One object in the squeeze chain.
struct ChainLink {
    index: usize,
    /// Clip of the object as it lay before the squeeze.
    clip: ConvexPolygon,
    settled: Settled,
}

/// Depth tolerance for a sample to count as extremal, mm.
const MATCH_TOL: f64 = 1e-6;
/// Turn used to read off which way the squeeze rotates an object, rad.
const TURN_PROBE: f64 = 1e-6;
/// Width change below which the squeeze is considered stalled, mm.
const WIDTH_TOL: f64 = 1e-9;

/// Shortest equilibrium pair, with diameter at most `fit`, between the
/// support points of `body`: its `sample_contacts` grid at `n_s` restricted
/// to `rect`, keeping the extremal points along each closing direction.
fn support_pair(
    body: &ConvexPolygon,
    rect: &OrientedRect,
    u: Point2,
    friction: FrictionModel,
    fit: f64,
    n_s: usize,
) -> Option<StablePair> {
    let inside: Vec<ContactPoint> =
        sample_contacts(body, n_s).into_iter().filter(|c| rect.contains(c.position, MATCH_TOL)).collect();
    let on_jaw = |dir: Point2| -> Vec<ContactPoint> {
        let top = inside.iter().map(|c| c.position.dot(dir)).fold(f64::NEG_INFINITY, f64::max);
        inside.iter().filter(|c| c.position.dot(dir) >= top - MATCH_TOL).copied().collect()
    };
    let (left, right) = (on_jaw(-u), on_jaw(u));
    let mut best: Option<StablePair> = None;
    for l in &left {
        for r in &right {
            let diameter = l.position.distance(r.position);
            if diameter > fit + WIDTH_TOL || best.as_ref().is_some_and(|b| b.diameter <= diameter) {
                continue;
            }
            if is_equilibrium_pair(l, r, friction).unwrap_or(false) {
                best = Some(StablePair {
                    left: *l,
                    right: *r,
                    diameter,
                });
            }
        }
    }
    best
}

/// Where the squeeze leaves one object.
#[derive(Clone, Copy, Debug)]
struct Settled {
    /// Turn about the centroid the object underwent, rad.
    turn: f64,
    support: Option<StablePair>,
}

/// Squeeze one object. The jaws turn it about its centroid in the direction
/// that narrows its clipped extent along `u`, and it stays at the first
/// orientation where a support pair is in equilibrium, fits the opening the
/// object started with, and at least `tau_contain` of its area lies between
/// the jaws. The orientations visited are the start and each angle at which
/// an edge lies flush with the jaws. The object is lost once its extent
/// stops shrinking or the turn would exceed `max_settle`.
fn settle(obj: &ConvexPolygon, rect: &OrientedRect, u: Point2, friction: FrictionModel, params: &SimParams) -> Settled {
    let pivot = obj.centroid();
    let turned = |phi: f64| obj.rotated_about(pivot, phi);
    let width_at = |phi: f64| {
        clip_polygon_to_rect(&turned(phi), rect).map_or(0.0, |c| {
            let (lo, hi) = c.project(u);
            hi - lo
        })
    };
    let start = width_at(0.0);
    let hold_at = |phi: f64| {
        let body = turned(phi);
        let clip = clip_polygon_to_rect(&body, rect)?;
        if clip.area() / obj.area() < params.tau_contain {
            return None;
        }
        support_pair(&body, rect, u, friction, start, params.dense_n_s)
    };
    if let Some(pair) = hold_at(0.0) {
        return Settled {
            turn: 0.0,
            support: Some(pair),
        };
    }
    let (minus, plus) = (width_at(-TURN_PROBE), width_at(TURN_PROBE));
    let sign = if plus < start - WIDTH_TOL && plus <= minus {
        1.0
    } else if minus < start - WIDTH_TOL {
        -1.0
    } else {
        return Settled {
            turn: 0.0,
            support: None,
        };
    };
    let target = u.angle();
    let mut flush: Vec<f64> = obj
        .edges()
        .map(|(a, b)| (sign * (target - (b - a).perp().angle())).rem_euclid(std::f64::consts::PI))
        .filter(|&t| t > TURN_PROBE && t <= params.max_settle)
        .collect();
    flush.sort_by(f64::total_cmp);
    flush.dedup_by(|a, b| (*a - *b).abs() < TURN_PROBE);
    let mut turn = 0.0;
    let mut width = start;
    for t in flush {
        let phi = sign * t;
        let w = width_at(phi);
        if w > width + WIDTH_TOL {
            break;
        }
        turn = phi;
        width = w;
        if let Some(pair) = hold_at(phi) {
            return Settled {
                turn,
                support: Some(pair),
            };
        }
        if width_at(phi + sign * TURN_PROBE) > w + WIDTH_TOL {
            break;
        }
    }
    Settled { turn, support: None }
}

/// Simulate `action` on `scene`. Execution noise is drawn from
/// `exec_noise.seed`; the same inputs always give the same outcome.
pub fn simulate_grasp(
    scene: &[ConvexPolygon],
    action: &GraspAction,
    spec: &GripperSpec,
    friction: FrictionModel,
    exec_noise: &NoiseModel,
    params: &SimParams,
) -> SimOutcome {
    let executed = if exec_noise.is_zero() {
        *action
    } else {
        exec_noise.perturb_action(&mut seeded_rng(exec_noise.seed), action)
    };
    let u = executed.axis_u();
    let v = u.perp();
    let rect = gripper_interior(&executed, spec, spec.max_width).expect("spec validated");
    let jaws = jaw_footprints(&executed, spec, spec.max_width);

    let mut fates = vec![ObjectFate::NeverContacted; scene.len()];
    let mut moves = Vec::new();
    let mut chain: Vec<ChainLink> = Vec::new();

    for (i, obj) in scene.iter().enumerate() {
        if let Some(side) = jaws.iter().position(|j| overlaps_rect(obj, j)) {
            fates[i] = ObjectFate::JawCollision;
            // Push clear of the jaw's outer face.
            let sign = if side == 0 { -1.0 } else { 1.0 };
            let outer = executed.center().dot(u) * sign + 0.5 * spec.max_width + spec.jaw_thickness;
            let (lo, hi) = obj.project(u);
            let near = if sign < 0.0 { -hi } else { lo };
            let shift = (outer - near).max(0.0) + 1.0;
            moves.push(ObjectMove {
                index: i,
                shift: u * (sign * shift),
                turn: 0.0,
            });
            continue;
        }
        let Some(clip) = clip_polygon_to_rect(obj, &rect) else {
            continue;
        };
        let settled = settle(obj, &rect, u, friction, params);
        chain.push(ChainLink { index: i, clip, settled });
    }
    chain.sort_by(|a, b| {
        a.clip
            .centroid()
            .dot(u)
            .total_cmp(&b.clip.centroid().dot(u))
            .then(a.index.cmp(&b.index))
    });

    // Longest contiguous run of holding objects that fits the opening.
    let mut best: Option<(usize, usize)> = None;
    for start in 0..chain.len() {
        for end in start + 1..=chain.len() {
            if chain[end - 1].settled.support.is_none() {
                break;
            }
            let len = end - start;
            if best.is_some_and(|(s, e)| e - s >= len) {
                continue;
            }
            let pairs: Vec<&StablePair> = chain[start..end].iter().map(|l| l.settled.support.as_ref().expect("holds")).collect();
            let width: f64 = pairs.iter().map(|p| p.diameter).sum();
            let lines: Vec<Point2> = pairs.iter().map(|p| p.direction()).collect();
            let clips: Vec<&ConvexPolygon> = chain[start..end].iter().map(|l| &l.clip).collect();
            if width <= chain_h0(&clips, &executed, spec) + 1e-9 && check_chain_colinearity(&lines, params.colinear_tol) {
                best = Some((start, end));
            }
        }
    }

    let (start, end) = best.unwrap_or((0, 0));
    let mut retained = Vec::new();
    let mut final_width = 0.0;
    for (k, link) in chain.iter().enumerate() {
        if (start..end).contains(&k) {
            fates[link.index] = ObjectFate::Retained;
            retained.push(link.index);
            final_width += link.settled.support.expect("holds").diameter;
        } else {
            fates[link.index] = ObjectFate::SqueezedOut;
            let side = (scene[link.index].centroid() - executed.center()).dot(v);
            let sign = if side < 0.0 { -1.0 } else { 1.0 };
            moves.push(ObjectMove {
                index: link.index,
                shift: v * (sign * 1.2 * spec.jaw_length),
                turn: link.settled.turn,
            });
        }
    }
    moves.sort_by_key(|m| m.index);
    SimOutcome {
        executed,
        n_g: retained.len(),
        retained,
        final_width,
        fates,
        moves,
    }
}

/// Scene after the grasp: retained objects removed, pushed objects moved.
/// A push that would land on another object is retried shorter and in the
/// other three axis directions; if every try is blocked the object stays.
/// Returns the surviving objects paired with their index in `scene`.
pub fn apply_outcome(scene: &[ConvexPolygon], outcome: &SimOutcome) -> Vec<(usize, ConvexPolygon)> {
    let mut objs: Vec<(usize, ConvexPolygon)> = scene
        .iter()
        .enumerate()
        .filter(|(i, _)| outcome.fates.get(*i) != Some(&ObjectFate::Retained))
        .map(|(i, o)| (i, o.clone()))
        .collect();
    for m in &outcome.moves {
        let Some(pos) = objs.iter().position(|(i, _)| *i == m.index) else {
            continue;
        };
        let shift = m.shift;
        let body = objs[pos].1.rotated_about(objs[pos].1.centroid(), m.turn);
        let tries = [1.0, 0.5, 0.25]
            .into_iter()
            .flat_map(|k| [shift * k, -shift * k, shift.perp() * k, -shift.perp() * k]);
        for d in tries {
            let moved = body.translated(d);
            let clear = objs
                .iter()
                .enumerate()
                .all(|(k, (_, o))| k == pos || clip_convex(&moved, o).is_none());
            if clear {
                objs[pos].1 = moved;
                break;
            }
        }
    }
    objs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::square;

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    #[test]
    fn centered_square_is_retained() {
        let scene = vec![square(p(0.0, 0.0), 50.0)];
        let out = simulate_grasp(
            &scene,
            &GraspAction::new(0.0, 0.0, 0.0),
            &GripperSpec::default(),
            FrictionModel::frictionless(),
            &NoiseModel::zero(0),
            &SimParams::default(),
        );
        assert_eq!(out.retained, vec![0]);
        assert_eq!(out.n_g, 1);
        assert!((out.final_width - 50.0).abs() < 1e-9);
    }

    #[test]
    fn jaw_collision_and_distant_objects() {
        let scene = vec![
            square(p(0.0, 0.0), 30.0),
            square(p(45.0, 0.0), 8.0),
            square(p(300.0, 0.0), 30.0),
        ];
        let out = simulate_grasp(
            &scene,
            &GraspAction::new(0.0, 0.0, 0.0),
            &GripperSpec::default(),
            FrictionModel::frictional(),
            &NoiseModel::zero(0),
            &SimParams::default(),
        );
        assert_eq!(out.fates[0], ObjectFate::Retained);
        assert_eq!(out.fates[1], ObjectFate::JawCollision);
        assert_eq!(out.fates[2], ObjectFate::NeverContacted);
        let after = apply_outcome(&scene, &out);
        assert_eq!(after.len(), 2);
        let pushed = &after[0].1;
        let jaw = jaw_footprints(&out.executed, &GripperSpec::default(), 85.0);
        assert!(!overlaps_rect(pushed, &jaw[1]));
    }

    #[test]
    fn two_big_squares_do_not_both_fit() {
        let scene = vec![square(p(-25.0, 0.0), 50.0), square(p(25.0, 0.0), 50.0)];
        let out = simulate_grasp(
            &scene,
            &GraspAction::new(0.0, 0.0, 0.0),
            &GripperSpec {
                max_width: 101.0,
                ..GripperSpec::default()
            },
            FrictionModel::frictional(),
            &NoiseModel::zero(0),
            &SimParams::default(),
        );
        assert_eq!(out.n_g, 2);
        assert!(out.final_width <= 101.0);
        let out = simulate_grasp(
            &scene,
            &GraspAction::new(0.0, 0.0, 0.0),
            &GripperSpec::default(),
            FrictionModel::frictional(),
            &NoiseModel::zero(0),
            &SimParams::default(),
        );
        assert!(out.n_g < 2);
    }
}
