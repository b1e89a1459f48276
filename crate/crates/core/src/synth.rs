//! Synthetic item banks with a known answer.
//!
//! Each item gets `n_features` standard-normal covariates `SYN01..`, and its
//! easiness is a fixed linear function of them plus Gaussian noise. The
//! p-value stored in the bank is the one that maps back to that easiness
//! under the chosen scale, so a run over the bank should recover the linear
//! signal up to the noise floor. Passage text, context, annotations and
//! embeddings are filled in so every feature group has something to read.

use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bank::{Context, Item, ItemBank, Passage};
use crate::embed::{EmbeddingRecord, EmbeddingStore, EmbeddingVariant, ModelSpec, OptionTarget, Pooling};
use crate::features::{FeatureTable, Provenance};
use crate::runner::{
    EmbeddingOptions, FeatureGroup, FeatureSetSpec, ImportSpec, RunConfig, ScaleChoice, GridModels,
};
use crate::scale::{builtin, Easiness};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_items: usize,
    pub n_features: usize,
    pub noise_sd: f64,
    pub seed: u64,
    pub items_per_passage: usize,
    /// Built-in scale used to turn easiness into p-values.
    pub scale: String,
    /// Store model names; each gets vectors of `embedding_dim`.
    pub embedding_models: Vec<String>,
    pub embedding_dim: usize,
    pub wrong_options: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let m = GridModels::default();
        Self {
            n_items: 1000,
            n_features: 20,
            noise_sd: 0.3,
            seed: 20240601,
            items_per_passage: 4,
            scale: builtin::NWEA_2020_SPRING.into(),
            embedding_models: vec![m.bert, m.llama, m.modernbert],
            embedding_dim: 16,
            wrong_options: 3,
        }
    }
}

/// Coefficient `j` (0-based) of the true easiness function: alternating
/// signs with magnitudes rising from 0.15 in steps of 0.03.
pub fn true_coefficient(j: usize) -> f64 {
    let m = 0.15 + 0.03 * j as f64;
    if j.is_multiple_of(2) {
        m
    } else {
        -m
    }
}

pub const TRUE_INTERCEPT: f64 = 0.0;

/// `SYN01`, `SYN02`, ...
pub fn feature_name(j: usize) -> String {
    format!("SYN{:02}", j + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub config: SynthConfig,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// Per item, in bank order.
    pub signal: Vec<f64>,
    pub easiness: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SyntheticBank {
    pub bank: ItemBank,
    /// The `SYN` covariates, one row per item.
    pub features: FeatureTable,
    pub store: EmbeddingStore,
    pub truth: Truth,
}

/// Paths written by [`SyntheticBank::write`], all inside one directory.
#[derive(Debug, Clone)]
pub struct SynthFiles {
    pub bank: PathBuf,
    pub features: PathBuf,
    pub store: PathBuf,
    pub truth: PathBuf,
    pub config: PathBuf,
}

const STATES: [&str; 4] = ["CA", "FL", "NY", "TX"];
const YEARS: [i32; 5] = [2018, 2019, 2021, 2022, 2023];
const NOUNS: [&str; 20] = [
    "river", "garden", "teacher", "fox", "lantern", "village", "storm", "map", "robot", "forest", "baker",
    "island", "letter", "bridge", "owl", "market", "engine", "painter", "harbor", "seed",
];
const VERBS: [&str; 14] = [
    "watched", "carried", "found", "built", "followed", "opened", "painted", "crossed", "remembered", "shared",
    "repaired", "noticed", "planted", "described",
];
const ADJECTIVES: [&str; 12] = [
    "quiet", "bright", "ancient", "curious", "narrow", "gentle", "enormous", "careful", "distant", "busy",
    "hollow", "golden",
];
const CONNECTIVES: [&str; 8] = ["because", "however", "then", "and", "although", "therefore", "but", "so"];

fn sentence(rng: &mut ChaCha8Rng) -> String {
    let pick = |rng: &mut ChaCha8Rng, xs: &[&'static str]| *xs.choose(rng).expect("non-empty");
    let mut words = vec![
        "The".to_string(),
        pick(rng, &ADJECTIVES).into(),
        pick(rng, &NOUNS).into(),
        pick(rng, &VERBS).into(),
        "the".into(),
        pick(rng, &NOUNS).into(),
    ];
    if rng.random_bool(0.5) {
        words.push(pick(rng, &CONNECTIVES).into());
        words.push("the".into());
        words.push(pick(rng, &NOUNS).into());
        words.push(pick(rng, &VERBS).into());
        words.push("a".into());
        words.push(pick(rng, &ADJECTIVES).into());
        words.push(pick(rng, &NOUNS).into());
    }
    format!("{}.", words.join(" "))
}

fn passage_text(rng: &mut ChaCha8Rng) -> String {
    let paragraphs = rng.random_range(1..=3);
    (0..paragraphs)
        .map(|_| {
            let n = rng.random_range(2..=6);
            (0..n).map(|_| sentence(rng)).collect::<Vec<_>>().join(" ")
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Builds the bank, covariates, embeddings and ground truth. Deterministic
/// for a fixed config.
pub fn generate(config: &SynthConfig) -> Result<SyntheticBank> {
    let scale = builtin::scale(&config.scale)?;
    let per = config.items_per_passage.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = Normal::new(0.0, config.noise_sd).expect("noise sd is finite and non-negative");
    let coefficients: Vec<f64> = (0..config.n_features).map(true_coefficient).collect();

    let mut passages = Vec::new();
    let mut items = Vec::with_capacity(config.n_items);
    let mut covariates = Vec::with_capacity(config.n_items * config.n_features);
    let mut signal = Vec::with_capacity(config.n_items);
    let mut easiness = Vec::with_capacity(config.n_items);
    for i in 0..config.n_items {
        if i % per == 0 {
            passages.push(Passage {
                passage_id: format!("SP{:04}", i / per + 1),
                text: passage_text(&mut rng),
                has_highlight: rng.random_bool(0.3),
            });
        }
        let passage = passages.last().expect("pushed above");
        // items on a passage share a test administration
        let context = if i % per == 0 {
            Context {
                state: STATES.choose(&mut rng).expect("non-empty").to_string(),
                grade: rng.random_range(3..=8),
                year: *YEARS.choose(&mut rng).expect("non-empty"),
            }
        } else {
            items.last().map(|it: &Item| it.context.clone()).expect("same passage")
        };
        let x = gaussian_vec(&mut rng, config.n_features);
        let s = TRUE_INTERCEPT + x.iter().zip(&coefficients).map(|(a, b)| a * b).sum::<f64>();
        let b = s + noise.sample(&mut rng);
        let p_value = scale.invert_easiness(Easiness(b), context.grade)?;
        let noun = NOUNS.choose(&mut rng).expect("non-empty");
        items.push(Item {
            item_id: format!("{}-Q{}", passage.passage_id, i % per + 1),
            passage_id: passage.passage_id.clone(),
            question_text: format!("What does the passage say about the {noun}?"),
            correct_option: sentence(&mut rng),
            wrong_options: (0..config.wrong_options.max(1)).map(|_| sentence(&mut rng)).collect(),
            item_order: (i % per + 1) as u32,
            ques_text_ref: rng.random_bool(0.4),
            ques_text_highlight: rng.random_bool(0.2),
            context,
            p_value,
        });
        covariates.extend(x);
        signal.push(s);
        easiness.push(b);
    }
    let bank = ItemBank::new(passages, items)?;
    let features = FeatureTable::new(
        bank.item_ids(),
        (0..config.n_features).map(feature_name).collect(),
        Provenance::Imported,
        covariates,
    )?;

    let mut store = EmbeddingStore::new();
    for (m, model) in config.embedding_models.iter().enumerate() {
        let dim = config.embedding_dim;
        store.declare_model(
            model,
            ModelSpec {
                dim,
                max_tokens: 512,
                pooling: Pooling::Mean,
            },
        )?;
        let mut mrng = ChaCha8Rng::seed_from_u64(config.seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(m as u64 + 1)));
        let scale_w = 1.0 / (config.n_features.max(1) as f64).sqrt();
        let weights: Vec<Vec<f64>> = (0..dim).map(|_| gaussian_vec(&mut mrng, config.n_features)).collect();
        for (r, item) in bank.items().iter().enumerate() {
            let x = features.row(r);
            let project = |rng: &mut ChaCha8Rng, noise: f64| -> Vec<f64> {
                weights
                    .iter()
                    .map(|w| scale_w * w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + noise * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            };
            let mut put = |variant: EmbeddingVariant, vector: Vec<f64>| {
                store.insert(EmbeddingRecord {
                    item_id: item.item_id.clone(),
                    variant,
                    model: model.clone(),
                    dim,
                    vector,
                })
            };
            put(EmbeddingVariant::Full, project(&mut mrng, 0.3))?;
            put(EmbeddingVariant::NoPassage, project(&mut mrng, 0.6))?;
            put(EmbeddingVariant::OptionOnly(OptionTarget::Correct), gaussian_vec(&mut mrng, dim))?;
            for j in 0..item.wrong_options.len() {
                put(EmbeddingVariant::OptionOnly(OptionTarget::Wrong(j)), gaussian_vec(&mut mrng, dim))?;
            }
        }
    }

    Ok(SyntheticBank {
        bank,
        features,
        store,
        truth: Truth {
            config: config.clone(),
            intercept: TRUE_INTERCEPT,
            coefficients,
            signal,
            easiness,
        },
    })
}

/// Name of the spec that uses every feature group.
pub const ALL_FEATURES_SPEC: &str = "All features";

impl SyntheticBank {
    /// A run over the written files: context only, text only (which holds
    /// the imported `SYN` columns), and every group together with the first
    /// embedding model when there is one.
    pub fn run_config(&self) -> RunConfig {
        use FeatureGroup::*;
        let mut all = FeatureSetSpec::new(ALL_FEATURES_SPEC, &[Context, Test, Text]);
        if let Some(m) = self.truth.config.embedding_models.first() {
            all = FeatureSetSpec::new(ALL_FEATURES_SPEC, &[Context, Test, Text, Embeddings]).with_model(m);
        }
        let specs = vec![
            FeatureSetSpec::new("State, Grade, Year", &[Context]),
            FeatureSetSpec::new("Text analysis features", &[Text]),
            all,
        ];
        let mut c = RunConfig::new("synthetic", "bank.json", specs);
        c.scale = ScaleChoice::Name(self.truth.config.scale.clone());
        c.features.imports = vec![ImportSpec {
            path: "features.csv".into(),
            id_column: "item_id".into(),
        }];
        if !self.truth.config.embedding_models.is_empty() {
            c.embeddings = Some(EmbeddingOptions {
                store: "embeddings.jsonl".into(),
                variant: EmbeddingVariant::Full,
                fetch: false,
                endpoint: None,
                timeout_secs: 120,
            });
        }
        c
    }

    /// Writes `bank.json`, `features.csv`, `embeddings.jsonl`, `truth.json`
    /// and `config.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<SynthFiles> {
        std::fs::create_dir_all(dir)?;
        let files = SynthFiles {
            bank: dir.join("bank.json"),
            features: dir.join("features.csv"),
            store: dir.join("embeddings.jsonl"),
            truth: dir.join("truth.json"),
            config: dir.join("config.json"),
        };
        std::fs::write(&files.bank, self.bank.to_json())?;
        std::fs::write(&files.features, self.features.to_csv())?;
        self.store.save(&files.store)?;
        let truth = serde_json::to_string_pretty(&self.truth).expect("truth serializes");
        std::fs::write(&files.truth, truth + "\n")?;
        std::fs::write(&files.config, self.run_config().to_json())?;
        Ok(files)
    }
}
