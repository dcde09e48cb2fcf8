//! End-to-end commands, independent of argument parsing and file paths.
//!
//! Each function here is what one `icclass` subcommand does once its inputs
//! are loaded. Keeping the file handling in the binary means the timed
//! region of [`bench`] never touches the disk.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::crowdlabel::{
    assign_priors, cllda_fit, expand_submissions, filter_labelers, CrowdResult, Dataset, GibbsConfig, RawSubmission,
    MIN_VOTES,
};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::features::{extract_component, IcFeatures, TopoInterpolator};
use crate::io::{ExtractionParams, FeatureBundle, Provenance, RecordingBundle};
use crate::labels::LabelVector;
use crate::metrics::{detect_multilabel_indices, evaluate, merge_classes, EvalReport, EvalSet, MergeScheme, ThresholdSet};
use crate::network::{train_with_monitor, Checkpoint, NetworkWeights, TrainConfig, TrainOutcome};

/// Components that extracted cleanly plus one error per component that did
/// not.
#[derive(Debug)]
pub struct Extraction {
    pub bundle: FeatureBundle,
    pub failures: Vec<Error>,
}

/// Re-references the recording and computes the normalised feature sets of
/// every component. A component that fails (a constant time course, say) is
/// reported in `failures` with its id and does not stop the others.
pub fn extract(recording: &RecordingBundle, execution: Execution) -> Result<Extraction> {
    let rec = recording.recording.average_referenced()?;
    let interpolator = TopoInterpolator::new(rec.electrode_positions())?;
    let results = exec::map_range(execution, rec.n_components(), |i| {
        let projection = rec.mixing_matrix().column(i).to_vec();
        let activity = rec.component_activity().row(i).to_vec();
        extract_component(&interpolator, &projection, &activity, rec.sample_rate())
            .map_err(|e| e.in_component(recording.component_ids[i].clone()))
    });
    let mut components = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (id, r) in recording.component_ids.iter().zip(results) {
        match r {
            Ok(f) => components.push((id.clone(), f)),
            Err(e) => failures.push(e),
        }
    }
    Ok(Extraction {
        bundle: FeatureBundle {
            provenance: Provenance {
                recording_id: recording.recording_id.clone(),
                sample_rate: Some(rec.sample_rate()),
                extraction: ExtractionParams::default(),
            },
            components,
        },
        failures,
    })
}

#[derive(Debug, Clone)]
pub struct ClassifyOptions {
    /// Average over the mirror/negation orbit of the topography.
    pub tta: bool,
    pub merge: MergeScheme,
    pub thresholds: Option<ThresholdSet>,
    pub execution: Execution,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            tta: true,
            merge: MergeScheme::Seven,
            thresholds: None,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentLabel {
    pub component_id: String,
    pub probabilities: Vec<f64>,
    pub argmax: String,
    /// Probability of the argmax class.
    pub confidence: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detections: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelReport {
    pub recording_id: String,
    pub classes: Vec<String>,
    pub tta: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<ThresholdSet>,
    pub components: Vec<ComponentLabel>,
}

pub fn classify(weights: &NetworkWeights<f32>, features: &FeatureBundle, options: &ClassifyOptions) -> Result<LabelReport> {
    let names = options.merge.class_names();
    if let Some(t) = &options.thresholds {
        if t.thresholds.len() != names.len() {
            return Err(Error::Shape(format!(
                "{} thresholds for {} classes",
                t.thresholds.len(),
                names.len()
            )));
        }
    }
    let inputs = features.features();
    let labels = if options.tta {
        weights.classify_many(&inputs, options.execution)?
    } else {
        weights.forward_many(&inputs, options.execution)?
    };
    let mut components = Vec::with_capacity(labels.len());
    for ((id, _), label) in features.components.iter().zip(&labels) {
        let probabilities = merge_classes(label, options.merge);
        let best = crate::labels::argmax(&probabilities);
        let detections = match &options.thresholds {
            Some(t) => Some(
                detect_multilabel_indices(&probabilities, t)?
                    .into_iter()
                    .map(|i| names[i].to_string())
                    .collect(),
            ),
            None => None,
        };
        components.push(ComponentLabel {
            component_id: id.clone(),
            argmax: names[best].to_string(),
            confidence: probabilities[best],
            probabilities,
            detections,
        });
    }
    Ok(LabelReport {
        recording_id: features.provenance.recording_id.clone(),
        classes: names.iter().map(|s| s.to_string()).collect(),
        tta: options.tta,
        thresholds: options.thresholds.clone(),
        components,
    })
}

/// Pairs features with labels by component id. Every labelled component
/// must have features; features without a label are skipped.
pub fn join_labels(features: &FeatureBundle, labels: &[(String, LabelVector)]) -> Result<Vec<(IcFeatures, LabelVector)>> {
    if labels.is_empty() {
        return Err(Error::EmptyDataset("label file has no rows".into()));
    }
    let by_id: BTreeMap<&str, &IcFeatures> = features.components.iter().map(|(id, f)| (id.as_str(), f)).collect();
    let missing: Vec<String> = labels
        .iter()
        .filter(|(id, _)| !by_id.contains_key(id.as_str()))
        .map(|(id, _)| id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::IdMismatch {
            missing_in_predictions: missing,
            missing_in_targets: Vec::new(),
        });
    }
    let unlabelled = features.components.len().saturating_sub(labels.len());
    if unlabelled > 0 {
        log::warn!("{unlabelled} components have features but no label; skipped");
    }
    Ok(labels.iter().map(|(id, l)| (by_id[id.as_str()].clone(), *l)).collect())
}

/// Held-out size used when none is given: 400 examples, but never more than
/// a fifth of the data.
pub fn default_holdout(n: usize) -> usize {
    (n / 5).clamp(1, 400)
}

/// Seeded random split into (train, validation).
pub fn split_holdout<T: Clone>(examples: &[T], count: usize, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if count == 0 || count >= examples.len() {
        return Err(Error::InvalidConfig(format!(
            "holdout of {count} leaves no training or no validation data out of {} examples",
            examples.len()
        )));
    }
    let mut idx: Vec<usize> = (0..examples.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (val, train) = idx.split_at(count);
    let mut val = val.to_vec();
    let mut train = train.to_vec();
    val.sort_unstable();
    train.sort_unstable();
    Ok((
        train.iter().map(|&i| examples[i].clone()).collect(),
        val.iter().map(|&i| examples[i].clone()).collect(),
    ))
}

/// Trains in single precision. `progress` sees every validation checkpoint.
pub fn train(
    train_set: &[(IcFeatures, LabelVector)],
    validation_set: &[(IcFeatures, LabelVector)],
    config: &TrainConfig,
    mut progress: impl FnMut(&Checkpoint<'_, f32>),
) -> Result<TrainOutcome<f32>> {
    config.validate()?;
    train_with_monitor(train_set, validation_set, config, |c| {
        progress(c);
        std::ops::ControlFlow::Continue(())
    })
}

#[derive(Debug, Clone)]
pub struct AggregateOptions {
    pub dataset: Dataset,
    pub gibbs: GibbsConfig,
    /// Independent chains with seeds `gibbs.seed`, `gibbs.seed + 1`, ...
    pub chains: usize,
    pub min_votes: usize,
    pub execution: Execution,
}

impl Default for AggregateOptions {
    fn default() -> Self {
        AggregateOptions {
            dataset: Dataset::Training,
            gibbs: GibbsConfig::default(),
            chains: 1,
            min_votes: MIN_VOTES,
            execution: Execution::default(),
        }
    }
}

/// Expands submissions, drops labelers with too few votes and fits one
/// result per chain. Chains are never averaged together.
pub fn aggregate(submissions: &[RawSubmission], options: &AggregateOptions) -> Result<Vec<CrowdResult>> {
    if options.chains == 0 {
        return Err(Error::InvalidConfig("chains must be at least 1".into()));
    }
    let all = expand_submissions(submissions)?;
    if all.is_empty() {
        return Err(Error::EmptyInput("vote file has no submissions".into()));
    }
    let votes = filter_labelers(&all, options.min_votes);
    if votes.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no labeler has votes on at least {} components; nothing to aggregate",
            options.min_votes
        )));
    }
    let priors = assign_priors(&votes, options.dataset);
    let class_prior = options.dataset.class_prior();
    exec::map_range(options.execution, options.chains, |c| {
        let config = GibbsConfig {
            seed: options.gibbs.seed.wrapping_add(c as u64),
            ..options.gibbs
        };
        cllda_fit(&votes, &priors, &class_prior, &config)
    })
    .into_iter()
    .collect()
}

/// Matches predictions to targets by id (in target order), merges and
/// computes the full metric report.
pub fn evaluate_labels(
    targets: &[(String, LabelVector)],
    predictions: &[(String, LabelVector)],
    scheme: MergeScheme,
) -> Result<EvalReport> {
    let t_ids: BTreeSet<&str> = targets.iter().map(|(id, _)| id.as_str()).collect();
    let p_map: BTreeMap<&str, &LabelVector> = predictions.iter().map(|(id, l)| (id.as_str(), l)).collect();
    let missing_in_predictions: Vec<String> =
        t_ids.iter().filter(|id| !p_map.contains_key(*id)).map(|s| s.to_string()).collect();
    let missing_in_targets: Vec<String> =
        p_map.keys().filter(|id| !t_ids.contains(*id)).map(|s| s.to_string()).collect();
    if !missing_in_predictions.is_empty() || !missing_in_targets.is_empty() {
        return Err(Error::IdMismatch {
            missing_in_predictions,
            missing_in_targets,
        });
    }
    if targets.is_empty() {
        return Err(Error::EmptyInput("no components to evaluate".into()));
    }
    let t: Vec<LabelVector> = targets.iter().map(|(_, l)| *l).collect();
    let p: Vec<LabelVector> = targets.iter().map(|(id, _)| *p_map[id.as_str()]).collect();
    let set = EvalSet::from_labels(&t, &p)?.merged(scheme)?;
    evaluate(&set, &scheme.class_names())
}

/// Median run time per component reported for the original classifier,
/// used for an informational comparison only.
pub const REFERENCE_MEDIAN_SECONDS: f64 = 0.170;
/// Per-component time above which a bench run counts as a regression.
pub const PER_COMPONENT_CEILING_SECONDS: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingTiming {
    pub recording_id: String,
    pub n_components: usize,
    /// Mean wall time of one extract+classify pass over the recording.
    pub total_seconds: f64,
    pub per_component_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub median: f64,
    pub p25: f64,
    pub p75: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    /// Percentiles by linear interpolation between order statistics.
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Some(Summary {
            median: q(0.5),
            p25: q(0.25),
            p75: q(0.75),
            min: v[0],
            max: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub repetitions: usize,
    pub tta: bool,
    pub parallel: bool,
    pub recordings: Vec<RecordingTiming>,
    /// Over the per-component times of the recordings.
    pub per_component: Summary,
    pub reference_median_seconds: f64,
    pub ceiling_seconds: f64,
    pub within_ceiling: bool,
}

/// Times in-memory extraction plus classification of each recording.
/// Loading the bundles and weights happens before, and is not timed.
pub fn bench(
    recordings: &[RecordingBundle],
    weights: &NetworkWeights<f32>,
    repetitions: usize,
    options: &ClassifyOptions,
) -> Result<BenchReport> {
    if recordings.is_empty() {
        return Err(Error::EmptyInput("no recordings to benchmark".into()));
    }
    if repetitions == 0 {
        return Err(Error::InvalidConfig("repetitions must be at least 1".into()));
    }
    let mut timings = Vec::with_capacity(recordings.len());
    for rec in recordings {
        let start = Instant::now();
        for _ in 0..repetitions {
            let extraction = extract(rec, options.execution)?;
            if let Some(e) = extraction.failures.into_iter().next() {
                return Err(e);
            }
            classify(weights, &extraction.bundle, options)?;
        }
        let total = start.elapsed().as_secs_f64() / repetitions as f64;
        let n = rec.recording.n_components();
        timings.push(RecordingTiming {
            recording_id: rec.recording_id.clone(),
            n_components: n,
            total_seconds: total,
            per_component_seconds: total / n as f64,
        });
    }
    let per: Vec<f64> = timings.iter().map(|t| t.per_component_seconds).collect();
    let summary = Summary::of(&per).ok_or_else(|| Error::Format("non-finite timing".into()))?;
    Ok(BenchReport {
        repetitions,
        tta: options.tta,
        parallel: options.execution.is_parallel(),
        within_ceiling: summary.max <= PER_COMPONENT_CEILING_SECONDS,
        recordings: timings,
        per_component: summary,
        reference_median_seconds: REFERENCE_MEDIAN_SECONDS,
        ceiling_seconds: PER_COMPONENT_CEILING_SECONDS,
    })
}

/// Synthetic recording bundle with components `ic1..icN`.
pub fn synthetic_bundle(
    recording_id: &str,
    n_channels: usize,
    n_components: usize,
    seconds: f64,
    sample_rate: f64,
    seed: u64,
) -> Result<RecordingBundle> {
    let recording = crate::synthetic::recording(n_channels, n_components, seconds, sample_rate, seed)?;
    Ok(RecordingBundle {
        recording_id: recording_id.to_string(),
        recording,
        component_ids: (1..=n_components).map(|i| format!("ic{i}")).collect(),
    })
}
