//! Relevancy scoring: every map label is scored as a completion of the
//! prompt, label scores are split evenly over the label's instances, and
//! item scores are summed per partition.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::map::{assign_items_to_partitions, label_multiplicities, SemanticMap};
use crate::narrator::Narration;
use crate::scorer::{score_completions, Backend};

/// Binding sequence used when none is configured.
pub const DEFAULT_BINDING: &str = "Next, the human will go to the ";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSpec {
    pub narration: Narration,
    pub binding_sequence: String,
}

impl PromptSpec {
    pub fn text(&self) -> String {
        format!("{}{}", self.narration.text, self.binding_sequence)
    }
}

/// How a completion's token probabilities combine into one score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreMode {
    /// Product of token probabilities.
    #[default]
    Product,
    /// Geometric mean of token probabilities.
    PerToken,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RelevancyScores {
    pub completion_scores: BTreeMap<String, f64>,
    pub item_scores: BTreeMap<u32, f64>,
    pub partition_scores: BTreeMap<u32, f64>,
}

/// Sorted, de-duplicated item labels.
pub fn build_completion_set(map: &SemanticMap) -> Vec<String> {
    map.items()
        .iter()
        .map(|i| i.label.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Compensated (Neumaier) sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Sums item scores into the partition each item is assigned to. Every
/// partition appears in the result, empty ones with score 0.
pub fn aggregate_partitions(map: &SemanticMap, item_scores: &BTreeMap<u32, f64>) -> Result<BTreeMap<u32, f64>> {
    aggregate_with(map, &assign_items_to_partitions(map), item_scores)
}

fn aggregate_with(
    map: &SemanticMap,
    assignment: &BTreeMap<u32, u32>,
    item_scores: &BTreeMap<u32, f64>,
) -> Result<BTreeMap<u32, f64>> {
    let mut addends: BTreeMap<u32, Vec<f64>> = map.partitions().iter().map(|p| (p.id, Vec::new())).collect();
    for item in map.items() {
        let s = *item_scores.get(&item.id).ok_or(Error::MissingItemScore(item.id))?;
        if let Some(p) = assignment.get(&item.id) {
            addends.get_mut(p).expect("assigned partition exists").push(s);
        }
    }
    Ok(addends.into_iter().map(|(p, xs)| (p, compensated_sum(xs))).collect())
}

/// Map-derived data reused across many prompts.
#[derive(Debug, Clone)]
pub struct Grounding<'a> {
    map: &'a SemanticMap,
    labels: Vec<String>,
    multiplicity: BTreeMap<String, usize>,
    assignment: BTreeMap<u32, u32>,
}

impl<'a> Grounding<'a> {
    pub fn new(map: &'a SemanticMap) -> Self {
        Grounding {
            map,
            labels: build_completion_set(map),
            multiplicity: label_multiplicities(map),
            assignment: assign_items_to_partitions(map),
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn relevancy(&self, prompt: &str, backend: &dyn Backend, mode: ScoreMode) -> Result<RelevancyScores> {
        let scored = score_completions(prompt, &self.labels, backend)?;
        let completion_scores: BTreeMap<String, f64> = scored
            .into_iter()
            .map(|c| {
                let s = match mode {
                    ScoreMode::Product => c.probability(),
                    ScoreMode::PerToken => c.per_token_probability(),
                };
                (c.completion, s)
            })
            .collect();
        self.ground(completion_scores)
    }

    /// Item and partition scores from label scores.
    pub fn ground(&self, completion_scores: BTreeMap<String, f64>) -> Result<RelevancyScores> {
        let mut item_scores = BTreeMap::new();
        for item in self.map.items() {
            let s = completion_scores
                .get(&item.label)
                .ok_or(Error::MissingItemScore(item.id))?;
            item_scores.insert(item.id, s / self.multiplicity[&item.label] as f64);
        }
        let partition_scores = aggregate_with(self.map, &self.assignment, &item_scores)?;
        Ok(RelevancyScores {
            completion_scores,
            item_scores,
            partition_scores,
        })
    }
}

/// Scores every label of `map` as a completion of the prompt and grounds the
/// scores in the map's partitions.
pub fn compute_relevancy(map: &SemanticMap, prompt: &PromptSpec, backend: &dyn Backend) -> Result<RelevancyScores> {
    compute_relevancy_with(map, prompt, backend, ScoreMode::Product)
}

pub fn compute_relevancy_with(
    map: &SemanticMap,
    prompt: &PromptSpec,
    backend: &dyn Backend,
    mode: ScoreMode,
) -> Result<RelevancyScores> {
    let g = Grounding::new(map);
    if g.labels.is_empty() {
        return Err(Error::Tokenization("map has no item labels to score".into()));
    }
    g.relevancy(&prompt.text(), backend, mode)
}
