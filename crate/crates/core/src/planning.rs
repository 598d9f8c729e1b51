//! Grasp candidates, the two necessary conditions, Monte-Carlo robustness
//! and the robust planner.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contact::{min_stable_diameter, FrictionModel};
use crate::error::{GraspError, Result};
use crate::geometry::{
    clip_polygon_to_rect, convex_hull, min_distance, overlaps_rect, uniform_cover_points, ConvexPolygon,
    OrientedRect, Point2, Pose2, Segment,
};
use crate::rng::{child_rng, SimRng};

/// Largest number of objects a single grasp is planned for.
pub const N_G_MAX: usize = 4;
pub const DEFAULT_N_P: usize = 25;
pub const DEFAULT_N_THETA: usize = 12;
pub const DEFAULT_N_S: usize = 5;
pub const DEFAULT_N_MC: usize = 30;
/// Slack on the width condition `h0 >= h*_f`, in mm.
pub const WIDTH_EPS: f64 = 1e-6;

/// Parallel-jaw gripper geometry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GripperSpec {
    /// Jaw opening at the start of the grasp, mm.
    pub max_width: f64,
    /// Extent of each jaw face across the closing axis, mm.
    pub jaw_length: f64,
    /// Jaw thickness along the closing axis, mm.
    pub jaw_thickness: f64,
    /// Nominal grip force, N. Not used by the planner.
    pub max_force: f64,
}

impl Default for GripperSpec {
    fn default() -> Self {
        GripperSpec {
            max_width: 85.0,
            jaw_length: 44.0,
            jaw_thickness: 6.0,
            max_force: 235.0,
        }
    }
}

impl GripperSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.max_width) || !ok(self.jaw_length) || !ok(self.jaw_thickness) {
            return Err(GraspError::Config(format!(
                "gripper dimensions must be positive, got width {}, length {}, thickness {}",
                self.max_width, self.jaw_length, self.jaw_thickness
            )));
        }
        if !(self.max_force.is_finite() && self.max_force >= 0.0) {
            return Err(GraspError::Config("gripper max_force must be non-negative".into()));
        }
        Ok(())
    }
}

/// Planar gripper pose; the closing axis is at angle `theta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspAction {
    pub pose: Pose2,
}

impl GraspAction {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        GraspAction {
            pose: Pose2::new(x, y, theta),
        }
    }

    pub fn center(&self) -> Point2 {
        self.pose.position()
    }

    /// Unit closing axis.
    pub fn axis_u(&self) -> Point2 {
        self.pose.axis()
    }

    pub fn perturbed(&self, dx: f64, dy: f64, dtheta: f64) -> Self {
        GraspAction::new(self.pose.x + dx, self.pose.y + dy, self.pose.theta + dtheta)
    }
}

/// Control and state uncertainty used for robustness estimates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    /// Std-dev of the gripper pose: x mm, y mm, theta rad.
    pub sigma_u: [f64; 3],
    /// Std-dev of each object's position per axis, mm.
    pub sigma_x: f64,
    pub n_mc: usize,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            sigma_u: [2.0, 2.0, 2f64.to_radians()],
            sigma_x: 2.0,
            n_mc: DEFAULT_N_MC,
            seed: 0,
        }
    }
}

impl NoiseModel {
    pub fn zero(seed: u64) -> Self {
        NoiseModel {
            sigma_u: [0.0; 3],
            sigma_x: 0.0,
            n_mc: 1,
            seed,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sigma_u == [0.0; 3] && self.sigma_x == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma_u.iter().chain([&self.sigma_x]).any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(GraspError::Config("noise std-devs must be finite and non-negative".into()));
        }
        if self.n_mc == 0 {
            return Err(GraspError::Config("n_mc must be at least 1".into()));
        }
        Ok(())
    }

    /// Draw a perturbed action.
    pub fn perturb_action<R: Rng + ?Sized>(&self, rng: &mut R, action: &GraspAction) -> GraspAction {
        let mut d = [0.0; 3];
        for (k, s) in self.sigma_u.iter().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            d[k] = z * s;
        }
        action.perturbed(d[0], d[1], d[2])
    }

    /// Draw a rigid translation for one object.
    pub fn object_offset<R: Rng + ?Sized>(&self, rng: &mut R) -> Point2 {
        let zx: f64 = rng.sample(StandardNormal);
        let zy: f64 = rng.sample(StandardNormal);
        Point2::new(zx * self.sigma_x, zy * self.sigma_x)
    }
}

/// Indices of scene objects planned for together.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct ObjectGroup {
    members: Vec<usize>,
}

impl ObjectGroup {
    pub fn new(members: Vec<usize>) -> Result<Self> {
        if members.is_empty() || members.len() > N_G_MAX {
            return Err(GraspError::DegenerateInput(format!(
                "group size {} outside 1..={N_G_MAX}",
                members.len()
            )));
        }
        let mut sorted = members.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != members.len() {
            return Err(GraspError::DegenerateInput(format!("group has repeated members: {members:?}")));
        }
        Ok(ObjectGroup { members })
    }

    pub fn singleton(index: usize) -> Self {
        ObjectGroup { members: vec![index] }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.members.contains(&index)
    }

    /// Member polygons, checked against the scene.
    pub fn objects<'a>(&self, scene: &'a [ConvexPolygon]) -> Result<Vec<&'a ConvexPolygon>> {
        self.members
            .iter()
            .map(|&i| {
                scene
                    .get(i)
                    .ok_or_else(|| GraspError::DegenerateInput(format!("group member {i} not in scene of {}", scene.len())))
            })
            .collect()
    }
}

impl TryFrom<Vec<usize>> for ObjectGroup {
    type Error = GraspError;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        ObjectGroup::new(v)
    }
}

impl From<ObjectGroup> for Vec<usize> {
    fn from(g: ObjectGroup) -> Self {
        g.members
    }
}

/// A scored grasp candidate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateEval {
    pub action: GraspAction,
    pub gamma: f64,
    /// Predicted grasp count (or the heuristic value standing in for it).
    pub n_g_pred: f64,
    pub score: f64,
}

impl CandidateEval {
    pub fn new(action: GraspAction, gamma: f64, n_g_pred: f64) -> Self {
        CandidateEval {
            action,
            gamma,
            n_g_pred,
            score: gamma * n_g_pred,
        }
    }
}

/// Rectangle between the jaws at opening `width`.
pub fn gripper_interior(action: &GraspAction, spec: &GripperSpec, width: f64) -> Result<OrientedRect> {
    if !(width > 0.0 && width <= spec.max_width + 1e-9) {
        return Err(GraspError::DegenerateInput(format!(
            "opening {width} outside (0, {}]",
            spec.max_width
        )));
    }
    OrientedRect::new(action.center(), action.axis_u(), 0.5 * width, 0.5 * spec.jaw_length)
}

/// Footprints of the left and right jaws at opening `width`. The left jaw
/// sits on the negative side of the closing axis.
pub fn jaw_footprints(action: &GraspAction, spec: &GripperSpec, width: f64) -> [OrientedRect; 2] {
    let u = action.axis_u();
    let offset = 0.5 * width + 0.5 * spec.jaw_thickness;
    let make = |sign: f64| OrientedRect {
        center: action.center() + u * (sign * offset),
        axis_u: u,
        half_width: 0.5 * spec.jaw_thickness,
        half_length: 0.5 * spec.jaw_length,
    };
    [make(-1.0), make(1.0)]
}

/// Inner faces of the left and right jaws at opening `width`.
pub fn jaw_faces(action: &GraspAction, spec: &GripperSpec, width: f64) -> [Segment; 2] {
    let u = action.axis_u();
    let v = u.perp() * (0.5 * spec.jaw_length);
    let c = action.center();
    let l = c - u * (0.5 * width);
    let r = c + u * (0.5 * width);
    [Segment::new(l - v, l + v), Segment::new(r - v, r + v)]
}

/// True when either jaw footprint at full opening overlaps an object.
pub fn jaws_collide(scene: &[ConvexPolygon], action: &GraspAction, spec: &GripperSpec) -> bool {
    let jaws = jaw_footprints(action, spec, spec.max_width);
    scene.iter().any(|o| jaws.iter().any(|j| overlaps_rect(o, j)))
}

/// Candidate actions: hull cover points of the group times `n_theta`
/// orientations in `[0, π)`, dropping any whose jaws would land on an
/// object. Point-major order.
pub fn gen_grasp_cands(
    scene: &[ConvexPolygon],
    group: &ObjectGroup,
    spec: &GripperSpec,
    n_p: usize,
    n_theta: usize,
) -> Result<Vec<GraspAction>> {
    let pts: Vec<Point2> = group
        .objects(scene)?
        .iter()
        .flat_map(|o| o.vertices().iter().copied())
        .collect();
    let hull = convex_hull(&pts)?;
    let cover = uniform_cover_points(&hull, n_p)?;
    let mut out = Vec::with_capacity(cover.len() * n_theta);
    for p in cover {
        for k in 0..n_theta {
            let theta = std::f64::consts::PI * k as f64 / n_theta as f64;
            let action = GraspAction::new(p.x, p.y, theta);
            if !jaws_collide(scene, &action, spec) {
                out.push(action);
            }
        }
    }
    Ok(out)
}

/// Opening left between the outermost clipped objects, `w - (b_l + b_r)`.
/// The outermost objects are picked by centroid projection on the closing
/// axis. `clips` must be non-empty.
pub fn chain_h0(clips: &[&ConvexPolygon], action: &GraspAction, spec: &GripperSpec) -> f64 {
    let u = action.axis_u();
    let key = |p: &ConvexPolygon| p.centroid().dot(u);
    let left = clips
        .iter()
        .copied()
        .min_by(|a, b| key(a).total_cmp(&key(b)))
        .expect("non-empty chain");
    let right = clips
        .iter()
        .copied()
        .max_by(|a, b| key(a).total_cmp(&key(b)))
        .expect("non-empty chain");
    let [lf, rf] = jaw_faces(action, spec, spec.max_width);
    spec.max_width - (min_distance(left, &lf) + min_distance(right, &rf))
}

/// Everything computed while checking the two necessary conditions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionReport {
    /// Clipped area of each group member, in group order.
    pub areas: Vec<f64>,
    /// Minimal stable diameter of each member.
    pub d_star: Vec<f64>,
    pub h_star: f64,
    /// `None` when some member misses the gripper interior.
    pub h0: Option<f64>,
    pub area_ok: bool,
    pub width_ok: bool,
}

impl ConditionReport {
    pub fn admissible(&self) -> bool {
        self.area_ok && self.width_ok
    }
}

/// Per-group state for repeated condition checks. Minimal stable diameters
/// are translation invariant, so they are computed once.
#[derive(Clone, Debug)]
pub struct NecessaryConditions {
    spec: GripperSpec,
    d_star: Vec<f64>,
    h_star: f64,
}

impl NecessaryConditions {
    pub fn new(objects: &[&ConvexPolygon], spec: &GripperSpec, friction: FrictionModel, n_s: usize) -> Result<Self> {
        if objects.is_empty() {
            return Err(GraspError::DegenerateInput("empty object group".into()));
        }
        let d_star = objects
            .iter()
            .map(|o| min_stable_diameter(o, friction, n_s))
            .collect::<Result<Vec<_>>>()?;
        let h_star = d_star.iter().sum();
        Ok(NecessaryConditions {
            spec: *spec,
            d_star,
            h_star,
        })
    }

    pub fn h_star(&self) -> f64 {
        self.h_star
    }

    pub fn d_star(&self) -> &[f64] {
        &self.d_star
    }

    /// Full report for `objects` (same order as at construction).
    pub fn report(&self, objects: &[&ConvexPolygon], action: &GraspAction) -> ConditionReport {
        let rect = gripper_interior(action, &self.spec, self.spec.max_width).expect("spec validated");
        let clips: Vec<Option<ConvexPolygon>> = objects.iter().map(|o| clip_polygon_to_rect(o, &rect)).collect();
        let areas = clips.iter().map(|c| c.as_ref().map_or(0.0, |p| p.area())).collect();
        let area_ok = clips.iter().all(Option::is_some);
        let h0 = area_ok.then(|| {
            let refs: Vec<&ConvexPolygon> = clips.iter().flatten().collect();
            chain_h0(&refs, action, &self.spec)
        });
        let width_ok = h0.is_some_and(|h| h >= self.h_star - WIDTH_EPS);
        ConditionReport {
            areas,
            d_star: self.d_star.clone(),
            h_star: self.h_star,
            h0,
            area_ok,
            width_ok,
        }
    }

    /// Same verdict as [`Self::report`] without building the report.
    pub fn holds(&self, objects: &[&ConvexPolygon], action: &GraspAction) -> bool {
        let rect = gripper_interior(action, &self.spec, self.spec.max_width).expect("spec validated");
        let mut clips = Vec::with_capacity(objects.len());
        for o in objects {
            match clip_polygon_to_rect(o, &rect) {
                Some(c) => clips.push(c),
                None => return false,
            }
        }
        let refs: Vec<&ConvexPolygon> = clips.iter().collect();
        chain_h0(&refs, action, &self.spec) >= self.h_star - WIDTH_EPS
    }

    /// Fraction of `noise.n_mc` perturbed instances that satisfy both
    /// conditions, drawing from `rng`.
    pub fn gamma(&self, objects: &[&ConvexPolygon], action: &GraspAction, noise: &NoiseModel, rng: &mut SimRng) -> f64 {
        let mut moved: Vec<ConvexPolygon> = Vec::with_capacity(objects.len());
        let mut hits = 0usize;
        for _ in 0..noise.n_mc {
            let a = noise.perturb_action(rng, action);
            moved.clear();
            for o in objects {
                let d = noise.object_offset(rng);
                moved.push(o.translated(d));
            }
            let refs: Vec<&ConvexPolygon> = moved.iter().collect();
            if self.holds(&refs, &a) {
                hits += 1;
            }
        }
        hits as f64 / noise.n_mc as f64
    }
}

/// Full condition report for `group` under `action`.
pub fn condition_report(
    scene: &[ConvexPolygon],
    group: &ObjectGroup,
    action: &GraspAction,
    spec: &GripperSpec,
    friction: FrictionModel,
    n_s: usize,
) -> Result<ConditionReport> {
    let objects = group.objects(scene)?;
    Ok(NecessaryConditions::new(&objects, spec, friction, n_s)?.report(&objects, action))
}

/// Intersection-area condition and width condition `h0 >= h*_f`.
pub fn check_necessary_conditions(
    scene: &[ConvexPolygon],
    group: &ObjectGroup,
    action: &GraspAction,
    spec: &GripperSpec,
    friction: FrictionModel,
    n_s: usize,
) -> Result<bool> {
    condition_report(scene, group, action, spec, friction, n_s).map(|r| r.admissible())
}

/// Monte-Carlo probability that the necessary conditions hold under noise.
/// Uses `noise.seed` directly as the stream seed.
pub fn necessary_conds_proba(
    scene: &[ConvexPolygon],
    group: &ObjectGroup,
    action: &GraspAction,
    spec: &GripperSpec,
    friction: FrictionModel,
    n_s: usize,
    noise: &NoiseModel,
) -> Result<f64> {
    noise.validate()?;
    let objects = group.objects(scene)?;
    let cond = NecessaryConditions::new(&objects, spec, friction, n_s)?;
    let mut rng = crate::rng::seeded_rng(noise.seed);
    Ok(cond.gamma(&objects, action, noise, &mut rng))
}

/// Sum of the group members' clipped areas at full opening, in mm².
pub fn total_intersection_area(
    scene: &[ConvexPolygon],
    group: &ObjectGroup,
    action: &GraspAction,
    spec: &GripperSpec,
) -> Result<f64> {
    let rect = gripper_interior(action, spec, spec.max_width)?;
    Ok(group
        .objects(scene)?
        .iter()
        .filter_map(|o| clip_polygon_to_rect(o, &rect))
        .map(|c| c.area())
        .sum())
}

/// Scores candidate actions for a group: a predicted grasp count or any
/// other non-negative value to be multiplied by γ.
pub trait GraspPredictor: Sync {
    /// Largest value `predict` can return for this group.
    fn upper_bound(&self, scene: &[ConvexPolygon], group: &ObjectGroup) -> f64;

    /// One value per action.
    fn predict(&self, scene: &[ConvexPolygon], group: &ObjectGroup, actions: &[GraspAction]) -> Result<Vec<f64>>;
}

impl<T: GraspPredictor + ?Sized> GraspPredictor for &T {
    fn upper_bound(&self, scene: &[ConvexPolygon], group: &ObjectGroup) -> f64 {
        (**self).upper_bound(scene, group)
    }

    fn predict(&self, scene: &[ConvexPolygon], group: &ObjectGroup, actions: &[GraspAction]) -> Result<Vec<f64>> {
        (**self).predict(scene, group, actions)
    }
}

/// Predicts the same value for every action.
#[derive(Clone, Copy, Debug)]
pub struct ConstantPredictor(pub f64);

impl GraspPredictor for ConstantPredictor {
    fn upper_bound(&self, _: &[ConvexPolygon], _: &ObjectGroup) -> f64 {
        self.0
    }

    fn predict(&self, _: &[ConvexPolygon], _: &ObjectGroup, actions: &[GraspAction]) -> Result<Vec<f64>> {
        Ok(vec![self.0; actions.len()])
    }
}

/// Total intersection area heuristic `A_T`.
#[derive(Clone, Copy, Debug)]
pub struct AreaHeuristic {
    pub spec: GripperSpec,
}

impl GraspPredictor for AreaHeuristic {
    fn upper_bound(&self, scene: &[ConvexPolygon], group: &ObjectGroup) -> f64 {
        group.members().iter().filter_map(|&i| scene.get(i)).map(|o| o.area()).sum()
    }

    fn predict(&self, scene: &[ConvexPolygon], group: &ObjectGroup, actions: &[GraspAction]) -> Result<Vec<f64>> {
        actions
            .iter()
            .map(|a| total_intersection_area(scene, group, a, &self.spec))
            .collect()
    }
}

/// Everything the planner needs besides the scene and predictor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerSettings {
    pub spec: GripperSpec,
    pub friction: FrictionModel,
    pub noise: NoiseModel,
    pub n_p: usize,
    pub n_theta: usize,
    pub n_s: usize,
    /// Reject candidates whose gripper interior overlaps an object outside
    /// the group.
    pub exclusive_groups: bool,
}

impl Default for PlannerSettings {
    fn default() -> Self {
        PlannerSettings {
            spec: GripperSpec::default(),
            friction: FrictionModel::frictional(),
            noise: NoiseModel::default(),
            n_p: DEFAULT_N_P,
            n_theta: DEFAULT_N_THETA,
            n_s: DEFAULT_N_S,
            exclusive_groups: true,
        }
    }
}

impl PlannerSettings {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.noise.validate()?;
        if self.n_p == 0 || self.n_theta == 0 || self.n_s == 0 {
            return Err(GraspError::Config("n_p, n_theta and n_s must be at least 1".into()));
        }
        Ok(())
    }
}

/// Work done by one planner call; feeds the deterministic timing model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanStats {
    pub candidates: usize,
    pub mc_samples: usize,
    pub predictions: usize,
}

impl PlanStats {
    pub fn add(&mut self, other: &PlanStats) {
        self.candidates += other.candidates;
        self.mc_samples += other.mc_samples;
        self.predictions += other.predictions;
    }
}

/// Planner output: the chosen candidate and where it came from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannedGrasp {
    pub eval: CandidateEval,
    pub candidate_index: usize,
}

/// Candidates that survive collision rejection and, if enabled, group
/// exclusivity.
pub fn admissible_candidates(
    scene: &[ConvexPolygon],
    group: &ObjectGroup,
    settings: &PlannerSettings,
) -> Result<Vec<GraspAction>> {
    let mut cands = gen_grasp_cands(scene, group, &settings.spec, settings.n_p, settings.n_theta)?;
    if settings.exclusive_groups {
        cands.retain(|a| {
            let rect = gripper_interior(a, &settings.spec, settings.spec.max_width).expect("spec validated");
            scene
                .iter()
                .enumerate()
                .all(|(i, o)| group.contains(i) || !overlaps_rect(o, &rect))
        });
    }
    Ok(cands)
}

/// γ of every action; candidate `k` draws from its own stream so the result
/// does not depend on evaluation order.
pub fn candidate_gammas(
    scene: &[ConvexPolygon],
    group: &ObjectGroup,
    actions: &[GraspAction],
    settings: &PlannerSettings,
) -> Result<Vec<f64>> {
    let objects = group.objects(scene)?;
    let cond = NecessaryConditions::new(&objects, &settings.spec, settings.friction, settings.n_s)?;
    let noise = settings.noise;
    Ok(actions
        .par_iter()
        .enumerate()
        .map(|(k, a)| {
            let mut rng = child_rng(noise.seed, &[k as u64]);
            cond.gamma(&objects, a, &noise, &mut rng)
        })
        .collect())
}

/// Score every candidate exhaustively.
pub fn evaluate_all(
    scene: &[ConvexPolygon],
    group: &ObjectGroup,
    settings: &PlannerSettings,
    predictor: &dyn GraspPredictor,
) -> Result<Vec<CandidateEval>> {
    let cands = admissible_candidates(scene, group, settings)?;
    let gammas = candidate_gammas(scene, group, &cands, settings)?;
    let preds = predictor.predict(scene, group, &cands)?;
    Ok(cands
        .iter()
        .zip(gammas)
        .zip(preds)
        .map(|((a, g), p)| CandidateEval::new(*a, g, p))
        .collect())
}

const PREDICT_BATCH: usize = 64;

/// Argmax of γ·N_g over the candidates, ties to the lowest candidate index.
/// Returns `None` when there are no candidates or the best score is zero.
///
/// Candidates are visited in decreasing γ and prediction stops once
/// γ times the predictor's upper bound cannot reach the best score, which
/// gives the same answer as scoring everything.
pub fn robust_grasp_planner(
    scene: &[ConvexPolygon],
    group: &ObjectGroup,
    settings: &PlannerSettings,
    predictor: &dyn GraspPredictor,
) -> Result<(Option<PlannedGrasp>, PlanStats)> {
    let cands = admissible_candidates(scene, group, settings)?;
    let mut stats = PlanStats {
        candidates: cands.len(),
        ..PlanStats::default()
    };
    if cands.is_empty() {
        return Ok((None, stats));
    }
    let gammas = candidate_gammas(scene, group, &cands, settings)?;
    stats.mc_samples = cands.len() * settings.noise.n_mc;
    let bound = predictor.upper_bound(scene, group);

    let mut order: Vec<usize> = (0..cands.len()).filter(|&k| gammas[k] > 0.0).collect();
    order.sort_by(|&a, &b| gammas[b].total_cmp(&gammas[a]).then(a.cmp(&b)));

    let mut best: Option<PlannedGrasp> = None;
    let mut pos = 0;
    while pos < order.len() {
        let best_score = best.map_or(0.0, |b| b.eval.score);
        if best.is_some() && gammas[order[pos]] * bound < best_score {
            break;
        }
        let end = (pos + PREDICT_BATCH).min(order.len());
        let batch: Vec<GraspAction> = order[pos..end].iter().map(|&k| cands[k]).collect();
        let preds = predictor.predict(scene, group, &batch)?;
        stats.predictions += batch.len();
        for (&k, p) in order[pos..end].iter().zip(preds) {
            let eval = CandidateEval::new(cands[k], gammas[k], p);
            let better = match best {
                None => eval.score > 0.0,
                Some(b) => eval.score > b.eval.score || (eval.score == b.eval.score && k < b.candidate_index),
            };
            if better {
                best = Some(PlannedGrasp {
                    eval,
                    candidate_index: k,
                });
            }
        }
        pos = end;
    }
    Ok((best, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::square;
    use std::f64::consts::PI;

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    #[test]
    fn interior_rect_examples() {
        let spec = GripperSpec::default();
        let r = gripper_interior(&GraspAction::new(0.0, 0.0, 0.0), &spec, 85.0).unwrap();
        assert_eq!(r.corners()[0], p(-42.5, -22.0));
        let r90 = gripper_interior(&GraspAction::new(0.0, 0.0, PI / 2.0), &spec, 85.0).unwrap();
        let c = r90.corners();
        assert!((c[0].x - 22.0).abs() < 1e-12 && (c[0].y + 42.5).abs() < 1e-12);
        assert!(gripper_interior(&GraspAction::new(0.0, 0.0, 0.0), &spec, 90.0).is_err());
        // rotation-matrix oracle at 30 degrees
        let t = PI / 6.0;
        let r30 = gripper_interior(&GraspAction::new(1.0, 2.0, t), &spec, 60.0).unwrap();
        let local = [(-30.0, -22.0), (30.0, -22.0), (30.0, 22.0), (-30.0, 22.0)];
        for (corner, (lx, ly)) in r30.corners().iter().zip(local) {
            let ex = 1.0 + t.cos() * lx - t.sin() * ly;
            let ey = 2.0 + t.sin() * lx + t.cos() * ly;
            assert!((corner.x - ex).abs() < 1e-12 && (corner.y - ey).abs() < 1e-12);
        }
    }

    #[test]
    fn two_forty_squares_fit_and_fifties_do_not() {
        let spec = GripperSpec::default();
        let f = FrictionModel::frictionless();
        let g = ObjectGroup::new(vec![0, 1]).unwrap();
        let a = GraspAction::new(0.0, 0.0, 0.0);
        let scene = vec![square(p(-20.0, 0.0), 40.0), square(p(20.0, 0.0), 40.0)];
        let r = condition_report(&scene, &g, &a, &spec, f, 5).unwrap();
        assert!((r.h_star - 80.0).abs() < 1e-9);
        assert!((r.h0.unwrap() - 80.0).abs() < 1e-9);
        assert!(r.admissible());
        assert!((total_intersection_area(&scene, &g, &a, &spec).unwrap() - 3200.0).abs() < 1e-9);

        let big = vec![square(p(-25.0, 0.0), 50.0), square(p(25.0, 0.0), 50.0)];
        let r = condition_report(&big, &g, &a, &spec, f, 5).unwrap();
        assert!((r.h_star - 100.0).abs() < 1e-9);
        assert!(r.h0.unwrap() <= 85.0 + 1e-9);
        assert!(!r.admissible());

        let apart = vec![square(p(-20.0, 0.0), 40.0), square(p(200.0, 0.0), 40.0)];
        assert!(!check_necessary_conditions(&apart, &g, &a, &spec, f, 5).unwrap());
        assert_eq!(
            total_intersection_area(&apart, &ObjectGroup::singleton(1), &a, &spec).unwrap(),
            0.0
        );
    }

    #[test]
    fn zero_noise_gamma_is_binary() {
        let spec = GripperSpec::default();
        let f = FrictionModel::frictional();
        let scene = vec![square(p(-20.0, 0.0), 40.0), square(p(20.0, 0.0), 40.0)];
        let g = ObjectGroup::new(vec![0, 1]).unwrap();
        let zero = NoiseModel::zero(1);
        let ok = GraspAction::new(0.0, 0.0, 0.0);
        let bad = GraspAction::new(0.0, 0.0, PI / 2.0);
        assert_eq!(necessary_conds_proba(&scene, &g, &ok, &spec, f, 5, &zero).unwrap(), 1.0);
        assert_eq!(necessary_conds_proba(&scene, &g, &bad, &spec, f, 5, &zero).unwrap(), 0.0);
    }

    #[test]
    fn candidates_avoid_objects() {
        let spec = GripperSpec::default();
        let scene = vec![square(p(0.0, 0.0), 40.0), square(p(300.0, 0.0), 40.0)];
        let g = ObjectGroup::singleton(0);
        let cands = gen_grasp_cands(&scene, &g, &spec, 25, 12).unwrap();
        assert!(!cands.is_empty() && cands.len() <= 36 * 12);
        for a in &cands {
            for jaw in jaw_footprints(a, &spec, spec.max_width) {
                assert!(scene.iter().all(|o| clip_polygon_to_rect(o, &jaw).is_none()));
            }
        }
    }

    #[test]
    fn planner_prefers_higher_product() {
        struct Fixed;
        impl GraspPredictor for Fixed {
            fn upper_bound(&self, _: &[ConvexPolygon], _: &ObjectGroup) -> f64 {
                4.0
            }
            fn predict(&self, _: &[ConvexPolygon], _: &ObjectGroup, a: &[GraspAction]) -> Result<Vec<f64>> {
                Ok(a.iter().map(|a| if a.pose.theta == 0.0 { 2.0 } else { 4.0 }).collect())
            }
        }
        let e1 = CandidateEval::new(GraspAction::new(0.0, 0.0, 0.0), 1.0, 2.0);
        let e2 = CandidateEval::new(GraspAction::new(0.0, 0.0, 0.0), 0.4, 4.0);
        assert!(e1.score > e2.score);

        let scene = vec![square(p(-20.0, 0.0), 40.0), square(p(20.0, 0.0), 40.0)];
        let g = ObjectGroup::new(vec![0, 1]).unwrap();
        let settings = PlannerSettings {
            noise: NoiseModel { seed: 9, ..NoiseModel::default() },
            ..PlannerSettings::default()
        };
        let (best, _) = robust_grasp_planner(&scene, &g, &settings, &Fixed).unwrap();
        let best = best.unwrap();
        let all = evaluate_all(&scene, &g, &settings, &Fixed).unwrap();
        assert!(all.iter().all(|e| e.score <= best.eval.score));
        let first = all.iter().position(|e| e.score == best.eval.score).unwrap();
        assert_eq!(first, best.candidate_index);
    }

    #[test]
    fn planner_returns_none_without_candidates() {
        let scene = vec![square(p(0.0, 0.0), 40.0)];
        let g = ObjectGroup::singleton(0);
        let settings = PlannerSettings {
            spec: GripperSpec {
                max_width: 20.0,
                ..GripperSpec::default()
            },
            ..PlannerSettings::default()
        };
        let (best, stats) = robust_grasp_planner(&scene, &g, &settings, &ConstantPredictor(1.0)).unwrap();
        assert!(best.is_none());
        assert_eq!(stats.candidates, 0);
    }

    #[test]
    fn group_validation() {
        assert!(ObjectGroup::new(vec![]).is_err());
        assert!(ObjectGroup::new(vec![1, 1]).is_err());
        assert!(ObjectGroup::new(vec![0, 1, 2, 3, 4]).is_err());
        assert!(ObjectGroup::new(vec![3, 0]).is_ok());
    }
}
