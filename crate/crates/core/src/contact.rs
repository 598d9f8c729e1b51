//! Friction-cone equilibrium tests and minimal stable grasp diameters.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{GraspError, Result};
use crate::geometry::{ConvexPolygon, Point2};

/// Friction coefficient used for the frictional planner and simulator.
pub const FRICTIONAL_MU: f64 = 0.5;
/// Stand-in coefficient for "frictionless" contact.
pub const FRICTIONLESS_MU: f64 = 0.01;
/// Largest accepted friction coefficient.
pub const MAX_MU: f64 = 2.0;
/// Default angular tolerance of [`check_chain_colinearity`].
pub const COLINEAR_TOL: f64 = 1e-6;
/// Slack on the friction-cone test, radians.
const CONE_EPS: f64 = 1e-9;
/// Contacts closer than this cannot form a pair, in mm.
const PAIR_MIN_SEPARATION: f64 = 1e-6;

/// Coulomb friction with cone half-angle `alpha = atan(mu)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct FrictionModel {
    mu: f64,
    alpha: f64,
}

impl FrictionModel {
    pub fn new(mu: f64) -> Result<Self> {
        if !(0.0..=MAX_MU).contains(&mu) {
            return Err(GraspError::Config(format!("friction coefficient {mu} outside [0, {MAX_MU}]")));
        }
        Ok(FrictionModel { mu, alpha: mu.atan() })
    }

    pub fn frictional() -> Self {
        Self::new(FRICTIONAL_MU).expect("default is in range")
    }

    pub fn frictionless() -> Self {
        Self::new(FRICTIONLESS_MU).expect("default is in range")
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Cone half-angle in radians.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl TryFrom<f64> for FrictionModel {
    type Error = GraspError;
    fn try_from(mu: f64) -> Result<Self> {
        Self::new(mu)
    }
}

impl From<FrictionModel> for f64 {
    fn from(f: FrictionModel) -> f64 {
        f.mu
    }
}

/// A boundary point with its span of admissible inward normal angles.
/// Edge-interior contacts have `normal_lo == normal_hi`; vertex contacts
/// span from the incoming edge's normal counter-clockwise to the outgoing
/// edge's normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContactPoint {
    pub position: Point2,
    pub normal_lo: f64,
    pub normal_hi: f64,
}

impl ContactPoint {
    pub fn on_edge(position: Point2, a: Point2, b: Point2) -> Self {
        let n = (b - a).perp().angle();
        ContactPoint {
            position,
            normal_lo: n,
            normal_hi: n,
        }
    }

    /// Contact at vertex `v` between edges `prev -> v` and `v -> next`.
    pub fn at_vertex(prev: Point2, v: Point2, next: Point2) -> Self {
        let e_in = v - prev;
        let e_out = next - v;
        let lo = e_in.perp().angle();
        let turn = e_in.cross(e_out).atan2(e_in.dot(e_out)).clamp(0.0, PI);
        ContactPoint {
            position: v,
            normal_lo: lo,
            normal_hi: lo + turn,
        }
    }

    pub fn span(&self) -> f64 {
        self.normal_hi - self.normal_lo
    }

    /// Angular distance from direction `phi` to the normal span.
    pub fn angle_to_span(&self, phi: f64) -> f64 {
        let t = (phi - self.normal_lo).rem_euclid(2.0 * PI);
        let span = self.span();
        if t <= span {
            0.0
        } else {
            (t - span).min(2.0 * PI - t)
        }
    }
}

/// Two contacts forming an equilibrium grasp.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StablePair {
    pub left: ContactPoint,
    pub right: ContactPoint,
    pub diameter: f64,
}

impl StablePair {
    /// Unit vector from the left contact to the right contact.
    pub fn direction(&self) -> Point2 {
        (self.right.position - self.left.position).normalized()
    }
}

/// True iff the line through both contacts lies inside both friction cones,
/// with each cone widened over its contact's normal span. The squeeze force
/// on `left` points towards `right` and vice versa.
pub fn is_equilibrium_pair(left: &ContactPoint, right: &ContactPoint, friction: FrictionModel) -> Result<bool> {
    let d = right.position - left.position;
    if d.norm() < PAIR_MIN_SEPARATION {
        return Err(GraspError::DegenerateInput(format!(
            "contact positions coincide at {:?}",
            left.position
        )));
    }
    Ok(pair_in_cones(left, right, d, friction.alpha()))
}

fn pair_in_cones(left: &ContactPoint, right: &ContactPoint, d: Point2, alpha: f64) -> bool {
    let limit = alpha + CONE_EPS;
    let phi = d.angle();
    left.angle_to_span(phi) <= limit && right.angle_to_span(phi + PI) <= limit
}

/// Contacts at fractions `k / (n_s + 1)` along every edge, followed by one
/// contact per vertex.
pub fn sample_contacts(poly: &ConvexPolygon, n_s: usize) -> Vec<ContactPoint> {
    let v = poly.vertices();
    let n = v.len();
    let mut out = Vec::with_capacity(n * (n_s + 1));
    for (a, b) in poly.edges() {
        for k in 1..=n_s {
            let t = k as f64 / (n_s + 1) as f64;
            out.push(ContactPoint::on_edge(a + (b - a) * t, a, b));
        }
    }
    for i in 0..n {
        out.push(ContactPoint::at_vertex(v[(i + n - 1) % n], v[i], v[(i + 1) % n]));
    }
    out
}

/// All equilibrium pairs among `contacts`, each unordered pair reported once
/// in the order it appears in the list.
pub fn stable_pairs(contacts: &[ContactPoint], friction: FrictionModel) -> Vec<StablePair> {
    let alpha = friction.alpha();
    let mut out = Vec::new();
    for (i, a) in contacts.iter().enumerate() {
        for b in &contacts[i + 1..] {
            let d = b.position - a.position;
            let dist = d.norm();
            if dist < PAIR_MIN_SEPARATION {
                continue;
            }
            if pair_in_cones(a, b, d, alpha) {
                out.push(StablePair {
                    left: *a,
                    right: *b,
                    diameter: dist,
                });
            }
        }
    }
    out
}

/// The equilibrium pair of smallest diameter among sampled contacts. Ties
/// keep the first pair in sampling order.
pub fn min_stable_pair(poly: &ConvexPolygon, friction: FrictionModel, n_s: usize) -> Result<StablePair> {
    let contacts = sample_contacts(poly, n_s);
    let alpha = friction.alpha();
    let mut best: Option<StablePair> = None;
    for (i, a) in contacts.iter().enumerate() {
        for b in &contacts[i + 1..] {
            let d = b.position - a.position;
            let dist = d.norm();
            if dist < PAIR_MIN_SEPARATION || best.is_some_and(|p| dist >= p.diameter) {
                continue;
            }
            if pair_in_cones(a, b, d, alpha) {
                best = Some(StablePair {
                    left: *a,
                    right: *b,
                    diameter: dist,
                });
            }
        }
    }
    best.ok_or(GraspError::NoStableGrasp)
}

/// Minimal stable grasp diameter `d*_f` of a single object.
pub fn min_stable_diameter(poly: &ConvexPolygon, friction: FrictionModel, n_s: usize) -> Result<f64> {
    min_stable_pair(poly, friction, n_s).map(|p| p.diameter)
}

/// Minimal final multi-object grasp diameter: the sum of member diameters.
pub fn multi_object_min_diameter(group: &[ConvexPolygon], friction: FrictionModel, n_s: usize) -> Result<f64> {
    if group.is_empty() {
        return Err(GraspError::DegenerateInput("empty object group".into()));
    }
    group.iter().map(|p| min_stable_diameter(p, friction, n_s)).sum()
}

/// True iff every direction is parallel (or antiparallel) to the first one
/// within `tol` radians.
pub fn check_chain_colinearity(directions: &[Point2], tol: f64) -> bool {
    let Some(&first) = directions.first() else {
        return true;
    };
    directions.iter().all(|&d| {
        let angle = first.cross(d).abs().atan2(first.dot(d).abs());
        angle <= tol
    })
}
