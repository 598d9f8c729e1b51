//! Grasp-count classifier ensemble: feature encoding, datasets,
//! self-supervised collection, training and inference.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bench::create_obj_groups;
use crate::error::{GraspError, Result};
use crate::geometry::{ConvexPolygon, Point2, MAX_OBJECT_VERTICES};
use crate::mlp::{self, Mlp, TrainParams, TrainReport};
use crate::planning::{
    admissible_candidates, robust_grasp_planner, AreaHeuristic, GraspAction, GraspPredictor, ObjectGroup,
    PlannerSettings, N_G_MAX,
};
use crate::rng::{child_rng, derive_seed, seeded_rng};
use crate::scene::{generate_scene, SceneSpec};
use crate::sim::{apply_outcome, simulate_grasp, SimParams};

/// Floats per object slot: eight `(x, y)` vertices.
pub const SLOT_DIM: usize = 2 * MAX_OBJECT_VERTICES;
/// Length of a feature vector.
pub const FEATURE_DIM: usize = SLOT_DIM * N_G_MAX + 1;
/// Number of grasp-count classes, `0..=N_G_MAX`.
pub const N_CLASSES: usize = N_G_MAX + 1;
/// Fewer positives or negatives than this and a class is not trained.
pub const MIN_CLASS_EXAMPLES: usize = 10;
pub const MODEL_SCHEMA: &str = "mograsp-model/1";

/// Encode a group as seen from a grasp: each member's vertices expressed in
/// the gripper frame (origin at the grasp centre, x along the closing axis),
/// counter-clockwise from the vertex with smallest y (then x), padded with
/// the last vertex to eight; missing members repeat the last member; the
/// final element is the grasp angle.
pub fn encode_features(scene: &[ConvexPolygon], group: &ObjectGroup, action: &GraspAction) -> Result<Vec<f64>> {
    let objects = group.objects(scene).map_err(|e| GraspError::Encoding(e.to_string()))?;
    if objects.is_empty() || objects.len() > N_G_MAX {
        return Err(GraspError::Encoding(format!("group size {} outside 1..={N_G_MAX}", objects.len())));
    }
    let c = action.center();
    let theta = action.pose.theta;
    let mut out = Vec::with_capacity(FEATURE_DIM);
    for obj in &objects {
        if obj.len() > MAX_OBJECT_VERTICES {
            return Err(GraspError::Encoding(format!(
                "object has {} vertices, at most {MAX_OBJECT_VERTICES} can be encoded",
                obj.len()
            )));
        }
        let local: Vec<Point2> = obj.vertices().iter().map(|&v| (v - c).rotated(-theta)).collect();
        let start = (0..local.len())
            .min_by(|&a, &b| local[a].y.total_cmp(&local[b].y).then(local[a].x.total_cmp(&local[b].x)))
            .expect("polygon has vertices");
        let n = local.len();
        for k in 0..MAX_OBJECT_VERTICES {
            let p = local[(start + k.min(n - 1)) % n];
            out.push(p.x);
            out.push(p.y);
        }
    }
    let last: Vec<f64> = out[out.len() - SLOT_DIM..].to_vec();
    for _ in objects.len()..N_G_MAX {
        out.extend_from_slice(&last);
    }
    out.push(theta);
    Ok(out)
}

/// Number of distinct object slots in an encoded vector.
pub fn group_size_from_features(features: &[f64]) -> usize {
    let slot = |k: usize| &features[k * SLOT_DIM..(k + 1) * SLOT_DIM];
    1 + (1..N_G_MAX).filter(|&k| slot(k) != slot(k - 1)).count()
}

/// One self-supervised training record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: usize,
    pub seed: u64,
    pub step: usize,
}

impl Sample {
    pub fn validate(&self) -> Result<()> {
        if self.features.len() != FEATURE_DIM {
            return Err(GraspError::Format(format!(
                "expected {FEATURE_DIM} features, got {}",
                self.features.len()
            )));
        }
        if self.features.iter().any(|v| !v.is_finite()) {
            return Err(GraspError::Format("non-finite feature".into()));
        }
        if self.label > group_size_from_features(&self.features) {
            return Err(GraspError::Format(format!("label {} exceeds group size", self.label)));
        }
        Ok(())
    }
}

/// Dataset as JSON lines.
pub fn samples_to_jsonl(samples: &[Sample]) -> String {
    let mut out = String::new();
    for s in samples {
        out.push_str(&serde_json::to_string(s).expect("sample serializes"));
        out.push('\n');
    }
    out
}

pub fn samples_from_jsonl(text: &str) -> Result<Vec<Sample>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let s: Sample = serde_json::from_str(l).map_err(|e| GraspError::Format(format!("line {}: {e}", i + 1)))?;
            s.validate().map_err(|e| GraspError::Format(format!("line {}: {e}", i + 1)))?;
            Ok(s)
        })
        .collect()
}

/// Count of samples per label `0..=N_G_MAX`.
pub fn label_histogram(samples: &[Sample]) -> [usize; N_CLASSES] {
    let mut h = [0; N_CLASSES];
    for s in samples {
        h[s.label.min(N_G_MAX)] += 1;
    }
    h
}

/// Shannon entropy of a histogram, in bits.
pub fn histogram_entropy(hist: &[usize]) -> f64 {
    let total: usize = hist.iter().sum();
    if total == 0 {
        return 0.0;
    }
    hist.iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total as f64;
            p * p.recip().log2()
        })
        .sum()
}

/// Fraction of samples whose label is at least `k`.
pub fn fraction_at_least(samples: &[Sample], k: usize) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().filter(|s| s.label >= k).count() as f64 / samples.len() as f64
}

/// Binary classifier for one grasp count, or the class prior when there
/// was too little data to train.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassModel {
    Mlp { prior: f64, network: Mlp },
    Prior { prior: f64 },
}

impl ClassModel {
    pub fn prior(&self) -> f64 {
        match self {
            ClassModel::Mlp { prior, .. } | ClassModel::Prior { prior } => *prior,
        }
    }

    pub fn is_trained(&self) -> bool {
        matches!(self, ClassModel::Mlp { .. })
    }
}

/// Five binary classifiers, one per grasp count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MogNet {
    /// Vertex coordinates are divided by this before entering a network.
    pub input_scale: f64,
    pub classes: Vec<ClassModel>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema: String,
    #[serde(flatten)]
    model: MogNet,
}

impl MogNet {
    fn scaled(&self, rows: &[&[f64]]) -> Array2<f64> {
        let k = 1.0 / self.input_scale;
        Array2::from_shape_fn((rows.len(), FEATURE_DIM), |(i, j)| {
            let v = rows[i][j];
            if j + 1 == FEATURE_DIM {
                v
            } else {
                v * k
            }
        })
    }

    /// Positive-class probability of classes `0..=max_class` for each row;
    /// `None` for untrained classes.
    pub fn class_probabilities(&self, rows: &[&[f64]], max_class: usize) -> Vec<Vec<Option<f64>>> {
        let x = self.scaled(rows);
        let per_class: Vec<Option<Vec<f64>>> = self.classes[..=max_class.min(N_G_MAX)]
            .iter()
            .map(|m| match m {
                ClassModel::Mlp { network, .. } => Some(network.predict_proba(x.view()).to_vec()),
                ClassModel::Prior { .. } => None,
            })
            .collect();
        (0..rows.len())
            .map(|i| per_class.iter().map(|c| c.as_ref().map(|p| p[i])).collect())
            .collect()
    }

    /// Predicted count and its probability for each row, considering
    /// classes `0..=n_o`. Untrained classes are skipped; if none is trained
    /// the priors decide. Ties go to the larger count.
    pub fn predict_counts(&self, rows: &[&[f64]], n_o: usize) -> Vec<(usize, f64)> {
        let n_o = n_o.min(N_G_MAX);
        let probs = self.class_probabilities(rows, n_o);
        probs
            .into_iter()
            .map(|p| {
                let any_trained = p.iter().any(Option::is_some);
                let mut best = (0, f64::NEG_INFINITY);
                for (c, v) in p.iter().enumerate() {
                    let v = if any_trained {
                        match v {
                            Some(v) => *v,
                            None => continue,
                        }
                    } else {
                        self.classes[c].prior()
                    };
                    if v >= best.1 {
                        best = (c, v);
                    }
                }
                best
            })
            .collect()
    }

    pub fn predict_count(&self, scene: &[ConvexPolygon], group: &ObjectGroup, action: &GraspAction) -> Result<(usize, f64)> {
        let f = encode_features(scene, group, action)?;
        Ok(self.predict_counts(&[&f], group.len())[0])
    }

    /// Fraction of samples whose label is predicted exactly.
    pub fn accuracy(&self, samples: &[Sample]) -> f64 {
        if samples.is_empty() {
            return 0.0;
        }
        let hits = samples
            .iter()
            .filter(|s| {
                let n_o = group_size_from_features(&s.features);
                self.predict_counts(&[&s.features], n_o)[0].0 == s.label
            })
            .count();
        hits as f64 / samples.len() as f64
    }

    /// Per-class binary accuracy on `samples`; `None` for untrained classes.
    pub fn class_accuracies(&self, samples: &[Sample]) -> Vec<Option<f64>> {
        let rows: Vec<&[f64]> = samples.iter().map(|s| s.features.as_slice()).collect();
        let x = self.scaled(&rows);
        self.classes
            .iter()
            .enumerate()
            .map(|(c, m)| match m {
                ClassModel::Mlp { network, .. } => {
                    let y: Vec<f64> = samples.iter().map(|s| (s.label == c) as u8 as f64).collect();
                    Some(mlp::accuracy(network, x.view(), &y))
                }
                ClassModel::Prior { .. } => None,
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            schema: MODEL_SCHEMA.into(),
            model: self.clone(),
        };
        let mut s = serde_json::to_string(&file).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<MogNet> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value.get("schema").and_then(|s| s.as_str()).unwrap_or("<missing>");
        if found != MODEL_SCHEMA {
            return Err(GraspError::Schema {
                expected: MODEL_SCHEMA.into(),
                found: found.into(),
            });
        }
        let file: ModelFile = serde_json::from_value(value)?;
        let m = file.model;
        if m.classes.len() != N_CLASSES || !(m.input_scale > 0.0) {
            return Err(GraspError::Format("model must have 5 classes and a positive input scale".into()));
        }
        for c in &m.classes {
            if let ClassModel::Mlp { network, .. } = c {
                if network.input_dim() != FEATURE_DIM || !network.is_finite() {
                    return Err(GraspError::Format("network has wrong input size or non-finite weights".into()));
                }
            }
        }
        Ok(m)
    }
}

impl GraspPredictor for MogNet {
    fn upper_bound(&self, _: &[ConvexPolygon], group: &ObjectGroup) -> f64 {
        group.len() as f64
    }

    fn predict(&self, scene: &[ConvexPolygon], group: &ObjectGroup, actions: &[GraspAction]) -> Result<Vec<f64>> {
        let feats = actions
            .iter()
            .map(|a| encode_features(scene, group, a))
            .collect::<Result<Vec<_>>>()?;
        let rows: Vec<&[f64]> = feats.iter().map(Vec::as_slice).collect();
        Ok(self.predict_counts(&rows, group.len()).into_iter().map(|(c, _)| c as f64).collect())
    }
}

/// Train the binary classifier for `class_id` (label == class_id).
pub fn train_binary(
    samples: &[Sample],
    class_id: usize,
    params: &TrainParams,
    input_scale: f64,
) -> Result<(Mlp, TrainReport)> {
    if samples.is_empty() {
        return Err(GraspError::DegenerateInput("empty dataset".into()));
    }
    let positives = samples.iter().filter(|s| s.label == class_id).count();
    let negatives = samples.len() - positives;
    if positives < MIN_CLASS_EXAMPLES || negatives < MIN_CLASS_EXAMPLES {
        return Err(GraspError::DegenerateDataset {
            class_id,
            positives,
            negatives,
        });
    }
    let net = MogNet {
        input_scale,
        classes: Vec::new(),
    };
    let rows: Vec<&[f64]> = samples.iter().map(|s| s.features.as_slice()).collect();
    let x = net.scaled(&rows);
    let y: Vec<f64> = samples.iter().map(|s| (s.label == class_id) as u8 as f64).collect();
    let params = TrainParams {
        seed: derive_seed(params.seed, &[class_id as u64]),
        ..params.clone()
    };
    mlp::train(&x, &y, &params)
}

/// Outcome of training one class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub class_id: usize,
    pub positives: usize,
    pub trained: bool,
    pub report: Option<TrainReport>,
}

/// Train all five classes (in parallel; results do not depend on thread
/// count).
pub fn train_ensemble(samples: &[Sample], params: &TrainParams, input_scale: f64) -> Result<(MogNet, Vec<ClassSummary>)> {
    if samples.is_empty() {
        return Err(GraspError::DegenerateInput("empty dataset".into()));
    }
    for s in samples {
        s.validate()?;
    }
    let results: Vec<(ClassModel, ClassSummary)> = (0..N_CLASSES)
        .into_par_iter()
        .map(|c| {
            let positives = samples.iter().filter(|s| s.label == c).count();
            let prior = positives as f64 / samples.len() as f64;
            match train_binary(samples, c, params, input_scale) {
                Ok((network, report)) => Ok((
                    ClassModel::Mlp { prior, network },
                    ClassSummary {
                        class_id: c,
                        positives,
                        trained: true,
                        report: Some(report),
                    },
                )),
                Err(GraspError::DegenerateDataset { .. }) => Ok((
                    ClassModel::Prior { prior },
                    ClassSummary {
                        class_id: c,
                        positives,
                        trained: false,
                        report: None,
                    },
                )),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let (classes, summaries) = results.into_iter().unzip();
    Ok((MogNet { input_scale, classes }, summaries))
}

/// Shuffle `samples` with `seed` and split off `fraction` of them as a
/// held-out set. Returns `(train, held_out)`.
pub fn split_holdout(samples: &[Sample], fraction: f64, seed: u64) -> Result<(Vec<Sample>, Vec<Sample>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(GraspError::Config(format!("holdout fraction {fraction} outside (0, 1)")));
    }
    let mut idx: Vec<usize> = (0..samples.len()).collect();
    idx.shuffle(&mut seeded_rng(seed));
    let n_test = (samples.len() as f64 * fraction).round() as usize;
    let pick = |ids: &[usize]| ids.iter().map(|&i| samples[i].clone()).collect::<Vec<_>>();
    Ok((pick(&idx[n_test..]), pick(&idx[..n_test])))
}

/// How the executed grasp is chosen during data collection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollectMode {
    /// Argmax of γ times total intersection area.
    NecessaryConditions,
    /// Uniform over collision-free candidates.
    Random,
}

impl std::str::FromStr for CollectMode {
    type Err = GraspError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "necessary_conditions" => Ok(CollectMode::NecessaryConditions),
            "random" => Ok(CollectMode::Random),
            other => Err(GraspError::Config(format!(
                "unknown collection mode {other:?} (expected necessary_conditions or random)"
            ))),
        }
    }
}

/// Data collection settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollectConfig {
    pub scene: SceneSpec,
    pub samples: usize,
    pub min_group_size: usize,
    /// Attempts per episode, as a multiple of the object count.
    pub attempt_factor: usize,
    pub planner: PlannerSettings,
    pub sim: SimParams,
}

impl Default for CollectConfig {
    fn default() -> Self {
        CollectConfig {
            scene: SceneSpec::default(),
            samples: 1545,
            min_group_size: 2,
            attempt_factor: 3,
            planner: PlannerSettings::default(),
            sim: SimParams::default(),
        }
    }
}

/// Episodes collected per parallel round. Fixed so the output does not
/// depend on the number of worker threads.
const EPISODES_PER_ROUND: usize = 8;

fn collect_episode(cfg: &CollectConfig, mode: CollectMode, seed: u64, episode: u64) -> Result<Vec<Sample>> {
    let scene_seed = derive_seed(seed, &[episode]);
    let spec = SceneSpec {
        seed: scene_seed,
        ..cfg.scene
    };
    let mut scene = generate_scene(&spec)?;
    let mut rng = child_rng(scene_seed, &[0x636f_6c6c]);
    let heuristic = AreaHeuristic { spec: cfg.planner.spec };
    let budget = cfg.attempt_factor * scene.len();
    let mut out = Vec::new();
    for step in 0..budget {
        let mut groups: Vec<ObjectGroup> = create_obj_groups(&scene, &cfg.planner.spec)
            .into_iter()
            .filter(|g| g.len() >= cfg.min_group_size)
            .collect();
        groups.shuffle(&mut rng);
        let mut chosen = None;
        for group in groups {
            let settings = PlannerSettings {
                noise: crate::planning::NoiseModel {
                    seed: derive_seed(scene_seed, &[step as u64, 0]),
                    ..cfg.planner.noise
                },
                ..cfg.planner
            };
            let action = match mode {
                CollectMode::NecessaryConditions => {
                    robust_grasp_planner(&scene, &group, &settings, &heuristic)?.0.map(|p| p.eval.action)
                }
                CollectMode::Random => {
                    let cands = admissible_candidates(&scene, &group, &settings)?;
                    (!cands.is_empty()).then(|| cands[rng.random_range(0..cands.len())])
                }
            };
            if let Some(a) = action {
                chosen = Some((group, a));
                break;
            }
        }
        let Some((group, action)) = chosen else {
            break;
        };
        let exec = crate::planning::NoiseModel {
            seed: derive_seed(scene_seed, &[step as u64, 1]),
            ..cfg.planner.noise
        };
        let outcome = simulate_grasp(&scene, &action, &cfg.planner.spec, cfg.planner.friction, &exec, &cfg.sim);
        let label = outcome.retained.iter().filter(|&&i| group.contains(i)).count();
        out.push(Sample {
            features: encode_features(&scene, &group, &action)?,
            label,
            seed: scene_seed,
            step,
        });
        scene = apply_outcome(&scene, &outcome).into_iter().map(|(_, o)| o).collect();
        if scene.is_empty() {
            break;
        }
    }
    Ok(out)
}

/// Run decluttering episodes on fresh scenes, executing multi-object grasps
/// chosen by `mode` and labelling each with the simulated grasp count,
/// until `cfg.samples` samples are collected.
pub fn collect_dataset(cfg: &CollectConfig, mode: CollectMode, seed: u64) -> Result<Vec<Sample>> {
    cfg.planner.validate()?;
    cfg.sim.validate()?;
    cfg.scene.validate()?;
    let mut out: Vec<Sample> = Vec::with_capacity(cfg.samples);
    let mut episode = 0u64;
    let mut empty_rounds = 0;
    while out.len() < cfg.samples {
        let round: Vec<Vec<Sample>> = (episode..episode + EPISODES_PER_ROUND as u64)
            .into_par_iter()
            .map(|e| collect_episode(cfg, mode, seed, e))
            .collect::<Result<_>>()?;
        episode += EPISODES_PER_ROUND as u64;
        let before = out.len();
        for s in round.into_iter().flatten() {
            if out.len() == cfg.samples {
                break;
            }
            out.push(s);
        }
        empty_rounds = if out.len() == before { empty_rounds + 1 } else { 0 };
        if empty_rounds >= 3 {
            return Err(GraspError::DegenerateInput(
                "scenes yield no multi-object grasps; check the scene settings".into(),
            ));
        }
    }
    Ok(out)
}
