//! Object grouping, the decluttering loop, baselines and metrics.

use std::collections::HashSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contact::{FrictionModel, FRICTIONLESS_MU};
use crate::error::{GraspError, Result};
use crate::geometry::ConvexPolygon;
use crate::mognet::MogNet;
use crate::planning::{
    robust_grasp_planner, AreaHeuristic, ConstantPredictor, GraspAction, GraspPredictor, GripperSpec, NoiseModel,
    ObjectGroup, PlanStats, PlannerSettings, N_G_MAX,
};
use crate::rng::derive_seed;
use crate::scene::{generate_scene, SceneSpec};
use crate::sim::{apply_outcome, simulate_grasp, ObjectFate, SimParams};

/// Groups of objects whose centroids lie within half the gripper opening of
/// each object's centroid (at most the [`N_G_MAX`] nearest), plus every
/// singleton. Members are sorted; duplicates are dropped.
pub fn create_obj_groups(scene: &[ConvexPolygon], spec: &GripperSpec) -> Vec<ObjectGroup> {
    let radius = 0.5 * spec.max_width;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, a) in scene.iter().enumerate() {
        let mut near: Vec<(f64, usize)> = scene
            .iter()
            .enumerate()
            .map(|(j, b)| (a.centroid().distance(b.centroid()), j))
            .filter(|&(d, j)| j == i || d <= radius)
            .collect();
        near.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        near.truncate(N_G_MAX);
        let mut members: Vec<usize> = near.into_iter().map(|(_, j)| j).collect();
        members.sort_unstable();
        if members.len() > 1 && seen.insert(members.clone()) {
            out.push(ObjectGroup::new(members).expect("distinct members within cap"));
        }
    }
    for i in 0..scene.len() {
        if seen.insert(vec![i]) {
            out.push(ObjectGroup::singleton(i));
        }
    }
    out
}

/// Largest groups first; ties by smallest member index, then input order.
pub fn rank_obj_groups(mut groups: Vec<ObjectGroup>) -> Vec<ObjectGroup> {
    groups.sort_by(|a, b| {
        let min = |g: &ObjectGroup| g.members().iter().copied().min().unwrap_or(usize::MAX);
        b.len().cmp(&a.len()).then(min(a).cmp(&min(b)))
    });
    groups
}

/// Grasp planning methods compared by the benchmark.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Learned count predictor with frictional conditions.
    Mognet,
    /// Same network architecture trained on randomly executed grasps.
    RandNet,
    /// Single-object groups only, frictional conditions.
    FrictionalSog,
    /// Learned predictor, low-friction conditions and low-friction objects.
    FrictionlessMognet,
    /// Total intersection area instead of a learned predictor.
    HeuristicAt,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Mognet,
        Method::RandNet,
        Method::FrictionalSog,
        Method::FrictionlessMognet,
        Method::HeuristicAt,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Mognet => "mognet",
            Method::RandNet => "rand_net",
            Method::FrictionalSog => "frictional_sog",
            Method::FrictionlessMognet => "frictionless_mognet",
            Method::HeuristicAt => "heuristic_at",
        }
    }

    pub fn needs_model(&self) -> bool {
        matches!(self, Method::Mognet | Method::RandNet | Method::FrictionlessMognet)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = GraspError;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| GraspError::Config(format!("unknown method {s:?}")))
    }
}

/// Trained networks available to the methods that need one.
#[derive(Clone, Debug, Default)]
pub struct BenchModels {
    pub mognet: Option<MogNet>,
    pub rand_net: Option<MogNet>,
}

/// How planning time is reported.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimingModel {
    /// Seconds estimated from counted work; reproducible across runs.
    Work {
        per_candidate: f64,
        per_mc_sample: f64,
        per_prediction: f64,
    },
    /// Measured wall-clock time.
    WallClock,
}

impl Default for TimingModel {
    fn default() -> Self {
        TimingModel::Work {
            per_candidate: 2.0e-5,
            per_mc_sample: 1.5e-6,
            per_prediction: 1.2e-4,
        }
    }
}

impl TimingModel {
    fn seconds(&self, stats: &PlanStats, measured: f64) -> f64 {
        match *self {
            TimingModel::Work {
                per_candidate,
                per_mc_sample,
                per_prediction,
            } => {
                per_candidate * stats.candidates as f64
                    + per_mc_sample * stats.mc_samples as f64
                    + per_prediction * stats.predictions as f64
            }
            TimingModel::WallClock => measured,
        }
    }
}

/// Decluttering settings shared by all methods.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub scene: SceneSpec,
    /// Frictional settings; the low-friction method swaps in `frictionless_mu`.
    pub planner: PlannerSettings,
    pub frictionless_mu: f64,
    pub sim: SimParams,
    /// Attempt budget as a multiple of the initial object count.
    pub attempt_factor: usize,
    /// Fixed robot motion time per attempt, seconds.
    pub motion_time: f64,
    pub timing: TimingModel,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            scene: SceneSpec::default(),
            planner: PlannerSettings::default(),
            frictionless_mu: FRICTIONLESS_MU,
            sim: SimParams::default(),
            attempt_factor: 3,
            motion_time: 8.0,
            timing: TimingModel::default(),
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        self.planner.validate()?;
        self.sim.validate()?;
        FrictionModel::new(self.frictionless_mu)?;
        if !(self.motion_time.is_finite() && self.motion_time >= 0.0) {
            return Err(GraspError::Config("motion_time must be non-negative".into()));
        }
        Ok(())
    }
}

/// One grasp attempt.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub attempt: usize,
    /// Object ids (indices into the initial scene).
    pub group: Vec<usize>,
    pub action: GraspAction,
    pub executed: GraspAction,
    pub gamma: f64,
    pub n_g_pred: f64,
    pub n_g: usize,
    pub retained: Vec<usize>,
    pub squeezed_out: Vec<usize>,
    pub jaw_collisions: Vec<usize>,
    pub planning_time: f64,
    pub stats: PlanStats,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Cleared,
    /// No group admitted a grasp.
    Blocked,
    /// Attempt budget used up.
    Budget,
}

/// Everything that happened in one decluttering run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub method: Method,
    pub scene_seed: u64,
    pub initial_objects: usize,
    pub attempts: Vec<AttemptRecord>,
    pub termination: Termination,
}

impl EpisodeLog {
    pub fn removed(&self) -> usize {
        self.attempts.iter().map(|a| a.n_g).sum()
    }
}

fn predictor_for<'a>(
    method: Method,
    models: &'a BenchModels,
    heuristic: &'a AreaHeuristic,
) -> Result<Box<dyn GraspPredictor + 'a>> {
    let need = |m: &'a Option<MogNet>| {
        m.as_ref()
            .ok_or_else(|| GraspError::Config(format!("method {method} needs a trained model")))
    };
    Ok(match method {
        Method::Mognet | Method::FrictionlessMognet => Box::new(need(&models.mognet)?),
        Method::RandNet => Box::new(need(&models.rand_net)?),
        Method::FrictionalSog => Box::new(ConstantPredictor(1.0)),
        Method::HeuristicAt => Box::new(heuristic),
    })
}

/// Planner settings and physical friction a method runs with.
pub fn method_settings(method: Method, cfg: &BenchConfig) -> Result<(PlannerSettings, FrictionModel)> {
    let mut settings = cfg.planner;
    if method == Method::FrictionlessMognet {
        settings.friction = FrictionModel::new(cfg.frictionless_mu)?;
    }
    Ok((settings, settings.friction))
}

/// Declutter `scene` with `method` (one decluttering episode).
pub fn run_declutter(
    scene: &[ConvexPolygon],
    scene_seed: u64,
    method: Method,
    cfg: &BenchConfig,
    models: &BenchModels,
) -> Result<EpisodeLog> {
    cfg.validate()?;
    let (base, physics) = method_settings(method, cfg)?;
    let heuristic = AreaHeuristic { spec: base.spec };
    let predictor = predictor_for(method, models, &heuristic)?;
    let mut objects: Vec<(usize, ConvexPolygon)> = scene.iter().cloned().enumerate().collect();
    let budget = cfg.attempt_factor * scene.len();
    let mut attempts = Vec::new();
    let mut termination = Termination::Cleared;

    while !objects.is_empty() {
        if attempts.len() >= budget {
            termination = Termination::Budget;
            break;
        }
        let attempt = attempts.len();
        let polys: Vec<ConvexPolygon> = objects.iter().map(|(_, o)| o.clone()).collect();
        let mut groups = create_obj_groups(&polys, &base.spec);
        if method == Method::FrictionalSog {
            groups.retain(|g| g.len() == 1);
        }
        let settings = PlannerSettings {
            noise: NoiseModel {
                seed: derive_seed(scene_seed, &[attempt as u64, 0]),
                ..base.noise
            },
            ..base
        };
        let started = Instant::now();
        let mut stats = PlanStats::default();
        let mut chosen = None;
        for group in rank_obj_groups(groups) {
            let (plan, s) = robust_grasp_planner(&polys, &group, &settings, predictor.as_ref())?;
            stats.add(&s);
            if let Some(p) = plan {
                chosen = Some((group, p));
                break;
            }
        }
        let measured = started.elapsed().as_secs_f64();
        let Some((group, plan)) = chosen else {
            termination = Termination::Blocked;
            break;
        };
        let exec = NoiseModel {
            seed: derive_seed(scene_seed, &[attempt as u64, 1]),
            ..base.noise
        };
        let outcome = simulate_grasp(&polys, &plan.eval.action, &base.spec, physics, &exec, &cfg.sim);
        let id = |i: &usize| objects[*i].0;
        let with_fate = |f: ObjectFate| -> Vec<usize> {
            outcome
                .fates
                .iter()
                .enumerate()
                .filter(|(_, x)| **x == f)
                .map(|(i, _)| objects[i].0)
                .collect()
        };
        let record = AttemptRecord {
            attempt,
            group: group.members().iter().map(id).collect(),
            action: plan.eval.action,
            executed: outcome.executed,
            gamma: plan.eval.gamma,
            n_g_pred: plan.eval.n_g_pred,
            n_g: outcome.n_g,
            retained: outcome.retained.iter().map(id).collect(),
            squeezed_out: with_fate(ObjectFate::SqueezedOut),
            jaw_collisions: with_fate(ObjectFate::JawCollision),
            planning_time: cfg.timing.seconds(&stats, measured),
            stats,
        };
        attempts.push(record);
        objects = apply_outcome(&polys, &outcome)
            .into_iter()
            .map(|(i, o)| (objects[i].0, o))
            .collect();
    }
    Ok(EpisodeLog {
        method,
        scene_seed,
        initial_objects: scene.len(),
        attempts,
        termination,
    })
}

/// Aggregate decluttering metrics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Percentage of attempts that moved at least one object out.
    pub success_rate: f64,
    /// Mean objects removed per attempt.
    pub grasped_objs: f64,
    pub pick_attempts: usize,
    /// Percentage of the initial objects removed.
    pub cleared: f64,
    /// Mean planning time per attempt, seconds.
    pub planning_time: f64,
    /// Objects removed per hour of planning plus motion.
    pub pph: f64,
}

pub fn compute_metrics(log: &EpisodeLog, motion_time: f64) -> Metrics {
    let n = log.attempts.len();
    let removed = log.removed();
    let successes = log.attempts.iter().filter(|a| a.n_g >= 1).count();
    let planning: f64 = log.attempts.iter().map(|a| a.planning_time).sum();
    let total_time = planning + motion_time * n as f64;
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    Metrics {
        success_rate: 100.0 * ratio(successes as f64, n as f64),
        grasped_objs: ratio(removed as f64, n as f64),
        pick_attempts: n,
        cleared: 100.0 * ratio(removed as f64, log.initial_objects as f64),
        planning_time: ratio(planning, n as f64),
        pph: 3600.0 * ratio(removed as f64, total_time),
    }
}

/// One row of the benchmark table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: Method,
    pub seed: u64,
    pub success_rate: f64,
    pub grasped_objs: f64,
    pub pick_attempts: usize,
    pub cleared: f64,
    pub planning_time: f64,
    pub pph: f64,
}

impl BenchRow {
    pub fn new(method: Method, seed: u64, m: Metrics) -> Self {
        BenchRow {
            method,
            seed,
            success_rate: m.success_rate,
            grasped_objs: m.grasped_objs,
            pick_attempts: m.pick_attempts,
            cleared: m.cleared,
            planning_time: m.planning_time,
            pph: m.pph,
        }
    }
}

/// Run every `(method, seed)` pair on the scene generated from that seed.
/// Runs are spread over the current rayon pool; output order is
/// method-major, then seed, whatever the pool size.
pub fn run_bench(
    seeds: &[u64],
    methods: &[Method],
    cfg: &BenchConfig,
    models: &BenchModels,
) -> Result<Vec<(BenchRow, EpisodeLog)>> {
    cfg.validate()?;
    let scenes: Vec<Vec<ConvexPolygon>> = seeds
        .par_iter()
        .map(|&seed| generate_scene(&SceneSpec { seed, ..cfg.scene }))
        .collect::<Result<_>>()?;
    let jobs: Vec<(Method, usize)> = methods
        .iter()
        .flat_map(|&m| (0..seeds.len()).map(move |k| (m, k)))
        .collect();
    jobs.par_iter()
        .map(|&(method, k)| {
            let log = run_declutter(&scenes[k], seeds[k], method, cfg, models)?;
            let row = BenchRow::new(method, seeds[k], compute_metrics(&log, cfg.motion_time));
            Ok((row, log))
        })
        .collect()
}

/// Benchmark rows as CSV with a header line.
pub fn rows_to_csv(rows: &[BenchRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| GraspError::Format(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| GraspError::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| GraspError::Format(e.to_string()))
}

/// Episode logs as JSON lines.
pub fn logs_to_jsonl(logs: &[EpisodeLog]) -> String {
    let mut out = String::new();
    for l in logs {
        out.push_str(&serde_json::to_string(l).expect("log serializes"));
        out.push('\n');
    }
    out
}

/// Mean of a per-row quantity over the rows of one method.
pub fn method_mean(rows: &[BenchRow], method: Method, f: impl Fn(&BenchRow) -> f64) -> f64 {
    let vals: Vec<f64> = rows.iter().filter(|r| r.method == method).map(f).collect();
    if vals.is_empty() {
        0.0
    } else {
        vals.iter().sum::<f64>() / vals.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{square, Point2};

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    #[test]
    fn grouping_examples() {
        let spec = GripperSpec::default();
        let scene = vec![square(p(0.0, 0.0), 20.0), square(p(30.0, 0.0), 20.0)];
        let groups = create_obj_groups(&scene, &spec);
        let sets: Vec<Vec<usize>> = groups.iter().map(|g| g.members().to_vec()).collect();
        assert_eq!(sets, vec![vec![0, 1], vec![0], vec![1]]);
        let lone = vec![square(p(0.0, 0.0), 20.0), square(p(300.0, 0.0), 20.0)];
        assert_eq!(create_obj_groups(&lone, &spec).len(), 2);
    }

    #[test]
    fn ranking_examples() {
        let g = |v: Vec<usize>| ObjectGroup::new(v).unwrap();
        let ranked = rank_obj_groups(vec![g(vec![5]), g(vec![1, 2, 3]), g(vec![0, 4])]);
        let sizes: Vec<usize> = ranked.iter().map(ObjectGroup::len).collect();
        assert_eq!(sizes, vec![3, 2, 1]);
        let ranked = rank_obj_groups(vec![g(vec![2]), g(vec![0]), g(vec![1])]);
        assert_eq!(ranked[0].members(), &[0]);
        let ranked = rank_obj_groups(vec![g(vec![3, 4]), g(vec![1, 9])]);
        assert_eq!(ranked[0].members(), &[1, 9]);
    }

    #[test]
    fn metrics_examples() {
        let rec = |n_g: usize| AttemptRecord {
            attempt: 0,
            group: vec![0],
            action: GraspAction::new(0.0, 0.0, 0.0),
            executed: GraspAction::new(0.0, 0.0, 0.0),
            gamma: 1.0,
            n_g_pred: 1.0,
            n_g,
            retained: vec![],
            squeezed_out: vec![],
            jaw_collisions: vec![],
            planning_time: 0.5,
            stats: PlanStats::default(),
        };
        let mut log = EpisodeLog {
            method: Method::HeuristicAt,
            scene_seed: 0,
            initial_objects: 20,
            attempts: (0..10).map(|k| rec(usize::from(k != 0))).collect(),
            termination: Termination::Budget,
        };
        assert!((compute_metrics(&log, 8.0).success_rate - 90.0).abs() < 1e-12);
        log.attempts = (0..5).map(|_| rec(2)).collect();
        let m = compute_metrics(&log, 8.0);
        assert_eq!(m.grasped_objs, 2.0);
        assert!(compute_metrics(&log, 16.0).pph < m.pph);
        assert_eq!(m.cleared, 50.0);
    }

    #[test]
    fn empty_and_single_object_scenes() {
        let cfg = BenchConfig::default();
        let models = BenchModels::default();
        let log = run_declutter(&[], 0, Method::HeuristicAt, &cfg, &models).unwrap();
        assert!(log.attempts.is_empty());
        let one = vec![square(p(100.0, 100.0), 40.0)];
        for m in [Method::HeuristicAt, Method::FrictionalSog] {
            let log = run_declutter(&one, 1, m, &cfg, &models).unwrap();
            assert_eq!(log.attempts.len(), 1, "{m}");
            assert_eq!(compute_metrics(&log, 8.0).cleared, 100.0);
        }
        assert!(run_declutter(&one, 1, Method::Mognet, &cfg, &models).is_err());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let m = Metrics {
            success_rate: 50.0,
            grasped_objs: 1.5,
            pick_attempts: 4,
            cleared: 10.0,
            planning_time: 0.1,
            pph: 300.0,
        };
        let text = rows_to_csv(&[BenchRow::new(Method::Mognet, 3, m)]).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "method,seed,success_rate,grasped_objs,pick_attempts,cleared,planning_time,pph"
        );
        assert_eq!(lines.next().unwrap(), "mognet,3,50.0,1.5,4,10.0,0.1,300.0");
    }
}
