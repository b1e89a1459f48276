use std::path::PathBuf;

use super::{EmbeddingOptions, FeatureGroup, FeatureSetSpec, RunConfig};
use crate::embed::EmbeddingVariant;
use FeatureGroup::*;

/// Name of the mean-predictor row that every run starts with.
pub const BASELINE_NAME: &str = "Baseline (mean)";

const ANNOTATED: &str = "Results from human annotated features";
const EMBEDDINGS_ONLY: &str = "Results from LLM embeddings only";
const EMBEDDINGS_ANNOTATED: &str = "Results from LLM embeddings and annotated features";
const EMBEDDINGS_ALL: &str = "Results from LLM embeddings, annotated features, and context";

/// Store model names for the three embedding models of the grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridModels {
    pub bert: String,
    pub llama: String,
    pub modernbert: String,
}

impl Default for GridModels {
    fn default() -> Self {
        Self {
            bert: "bert-base".into(),
            llama: "llama-3.1-8b".into(),
            modernbert: "modernbert-base".into(),
        }
    }
}

impl GridModels {
    fn labelled(&self) -> [(&'static str, &str); 3] {
        [("BERT", &self.bert), ("LLaMA", &self.llama), ("ModernBERT", &self.modernbert)]
    }
}

/// The full results grid in four blocks: annotated features (4 rows),
/// embeddings only (3), annotated features with embeddings (6) and all
/// features with embeddings (6). PCA rows keep 80% of the variance.
pub fn results_grid_specs(models: &GridModels) -> Vec<FeatureSetSpec> {
    let mut specs = vec![
        FeatureSetSpec::new("State, Grade, Year", &[Context]).in_group(ANNOTATED),
        FeatureSetSpec::new("Test features", &[Test]).in_group(ANNOTATED),
        FeatureSetSpec::new("Text analysis features", &[Text]).in_group(ANNOTATED),
        FeatureSetSpec::new("All annotated features and context", &[Context, Test, Text]).in_group(ANNOTATED),
    ];
    for (label, model) in models.labelled() {
        specs.push(
            FeatureSetSpec::new(&format!("{label} embeddings"), &[Embeddings])
                .with_model(model)
                .in_group(EMBEDDINGS_ONLY),
        );
    }
    for (prefix, group, include) in [
        ("Annotated features", EMBEDDINGS_ANNOTATED, &[Test, Text, Embeddings][..]),
        ("All features", EMBEDDINGS_ALL, &[Context, Test, Text, Embeddings][..]),
    ] {
        for (label, model) in models.labelled() {
            specs.push(
                FeatureSetSpec::new(&format!("{prefix} & {label} embeddings"), include)
                    .with_model(model)
                    .in_group(group),
            );
            specs.push(
                FeatureSetSpec::new(&format!("{prefix} & PCA on {label} embeddings"), include)
                    .with_model(model)
                    .with_pca(0.8)
                    .in_group(group),
            );
        }
    }
    specs
}

fn store_options(store: PathBuf) -> EmbeddingOptions {
    EmbeddingOptions {
        store,
        variant: EmbeddingVariant::Full,
        fetch: false,
        endpoint: None,
        timeout_secs: 120,
    }
}

/// Ready-to-run config for the full grid on the main scale.
pub fn results_grid_config(bank: impl Into<PathBuf>, store: impl Into<PathBuf>, models: &GridModels) -> RunConfig {
    let mut c = RunConfig::new("results-grid", bank, results_grid_specs(models));
    c.embeddings = Some(store_options(store.into()));
    c
}

/// Embedding-input ablations for one model: the full input, the input
/// without the passage, and the full input plus distractor similarities.
pub fn input_ablation_config(bank: impl Into<PathBuf>, store: impl Into<PathBuf>, model: &str) -> RunConfig {
    let blocks: [(&str, &str, EmbeddingVariant, &[FeatureGroup]); 3] = [
        ("Main results: full input", "", EmbeddingVariant::Full, &[]),
        ("Alternate results 1: no passage", " (no passage)", EmbeddingVariant::NoPassage, &[]),
        ("Alternate results 2: with cosine similarity", " (cosine similarity)", EmbeddingVariant::Full, &[CosineSim]),
    ];
    let mut specs = Vec::new();
    for (group, suffix, variant, extra) in blocks {
        let with = |base: &[FeatureGroup]| -> Vec<FeatureGroup> { base.iter().chain(extra).copied().collect() };
        specs.push(
            FeatureSetSpec::new(&format!("Embeddings{suffix}"), &with(&[Embeddings]))
                .with_model(model)
                .with_variant(variant.clone())
                .in_group(group),
        );
        specs.push(
            FeatureSetSpec::new(&format!("Test, text & embeddings{suffix}"), &with(&[Test, Text, Embeddings]))
                .with_model(model)
                .with_variant(variant.clone())
                .in_group(group),
        );
        specs.push(
            FeatureSetSpec::new(&format!("Test, text & PCA on embeddings{suffix}"), &with(&[Test, Text, Embeddings]))
                .with_model(model)
                .with_variant(variant)
                .with_pca(0.8)
                .in_group(group),
        );
    }
    let mut c = RunConfig::new("input-ablation", bank, specs);
    c.embeddings = Some(store_options(store.into()));
    c
}
