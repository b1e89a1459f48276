//! Experiment orchestration: run configs, the feature-set grid, the vertical
//! scale robustness sweep and report files.

mod output;
mod preset;
mod run;

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bank::GradeEncoding;
use crate::embed::EmbeddingVariant;
use crate::scale::{builtin, AbilityScale, Anchors, ScaleFile, VerticalScale};

pub use output::{emit_reports, sweep_to_csv, sweep_to_markdown, Format};
pub use preset::{input_ablation_config, results_grid_config, results_grid_specs, GridModels, BASELINE_NAME};
pub use run::{
    compute_outcome, robustness_sweep, run_grid, run_grid_with_service, Prepared, RunOutput, SweepRow,
    SweepTable, MIXED_SCALE_NOTE,
};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid run config: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("spec `{spec}` failed ({} partial report file(s) written): {source}", partial.len())]
    SpecFailed {
        spec: String,
        #[source]
        source: Box<crate::Error>,
        partial: Vec<PathBuf>,
    },
    #[error("cannot write to {path}: {message}")]
    Output { path: PathBuf, message: String },
    #[error("embedding fetch is enabled but no endpoint is configured (set `embeddings.endpoint` or {})", crate::embed::ENDPOINT_ENV)]
    NoEndpoint,
}

/// Predictor groups a feature set can draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureGroup {
    /// State, year and grade.
    Context,
    /// Item order and the highlight/reference annotations.
    Test,
    /// Native text metrics plus any imported feature tables.
    Text,
    Embeddings,
    /// Cosine similarity between the correct option and each distractor.
    CosineSim,
}

impl FeatureGroup {
    pub fn needs_model(self) -> bool {
        matches!(self, FeatureGroup::Embeddings | FeatureGroup::CosineSim)
    }

    fn key(self) -> &'static str {
        match self {
            FeatureGroup::Context => "context",
            FeatureGroup::Test => "test",
            FeatureGroup::Text => "text",
            FeatureGroup::Embeddings => "embeddings",
            FeatureGroup::CosineSim => "cosine_sim",
        }
    }
}

/// One row of the results grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSetSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    pub include: BTreeSet<FeatureGroup>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    /// Embedding input variant; the run-level default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<EmbeddingVariant>,
    /// Variance target for PCA on the embedding columns; off when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pca: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub pca_standardize: bool,
}

impl FeatureSetSpec {
    pub fn new(name: &str, include: &[FeatureGroup]) -> Self {
        Self {
            name: name.to_string(),
            group: None,
            include: include.iter().copied().collect(),
            model: None,
            variant: None,
            pca: None,
            pca_standardize: false,
        }
    }

    pub fn with_model(mut self, model: &str) -> Self {
        self.model = Some(model.to_string());
        self
    }

    pub fn with_pca(mut self, target: f64) -> Self {
        self.pca = Some(target);
        self
    }

    pub fn in_group(mut self, group: &str) -> Self {
        self.group = Some(group.to_string());
        self
    }

    pub fn with_variant(mut self, variant: EmbeddingVariant) -> Self {
        self.variant = Some(variant);
        self
    }

    /// E.g. `context+text+embeddings[bert-base/full, pca 0.8]`.
    pub fn describe(&self, default_variant: &EmbeddingVariant) -> String {
        let mut s = self.include.iter().map(|g| g.key()).collect::<Vec<_>>().join("+");
        if let Some(m) = &self.model {
            let v = self.variant.as_ref().unwrap_or(default_variant);
            s.push_str(&format!("[{m}/{v}"));
            if let Some(t) = self.pca {
                s.push_str(&format!(", pca {t}"));
                if self.pca_standardize {
                    s.push_str(" standardized");
                }
            }
            s.push(']');
        }
        s
    }

    fn validate(&self) -> Result<(), String> {
        if self.name.trim().is_empty() {
            return Err("spec name is empty".into());
        }
        if self.include.is_empty() {
            return Err(format!("spec `{}` includes no feature groups", self.name));
        }
        let needs_model = self.include.iter().any(|g| g.needs_model());
        match (&self.model, needs_model) {
            (None, true) => Err(format!("spec `{}` uses embeddings but names no model", self.name)),
            (Some(_), false) => Err(format!("spec `{}` names a model but uses no embedding group", self.name)),
            _ => Ok(()),
        }?;
        if let Some(t) = self.pca {
            if !self.include.contains(&FeatureGroup::Embeddings) {
                return Err(format!("spec `{}` sets pca without the embeddings group", self.name));
            }
            if !(t > 0.0 && t <= 1.0) {
                return Err(format!("spec `{}` has pca target {t} outside (0, 1]", self.name));
            }
        }
        Ok(())
    }
}

/// What the models predict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// Item easiness on the vertical logit scale.
    #[default]
    RescaledEasiness,
    /// The p-value as reported, with no grade adjustment.
    RawPvalue,
}

/// A built-in scale or composite by name, a scale file, or an inline scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScaleChoice {
    Name(String),
    File { file: PathBuf },
    Inline(ScaleFile),
}

impl Default for ScaleChoice {
    fn default() -> Self {
        ScaleChoice::Name(builtin::NWEA_2020_SPRING.to_string())
    }
}

impl fmt::Display for ScaleChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScaleChoice::Name(n) => f.write_str(n),
            ScaleChoice::File { file } => write!(f, "{}", file.display()),
            ScaleChoice::Inline(s) => f.write_str(&s.name),
        }
    }
}

impl ScaleChoice {
    /// Resolves the scale. `anchors` refits a single scale's affine map and
    /// is rejected for composites.
    pub fn resolve(&self, base: &Path, anchors: Option<Anchors>) -> crate::Result<VerticalScale> {
        let scale = match self {
            ScaleChoice::Name(n) => VerticalScale::builtin(n)?,
            ScaleChoice::File { file } => {
                let path = base.join(file);
                let bytes = std::fs::read(&path)?;
                VerticalScale::Single(AbilityScale::from_json(&bytes)?)
            }
            ScaleChoice::Inline(s) => VerticalScale::Single(s.clone().into_scale()?),
        };
        match (scale, anchors) {
            (s, None) => Ok(s),
            (VerticalScale::Single(s), Some(a)) => {
                Ok(VerticalScale::Single(AbilityScale::with_anchors(s.name, s.grade_means, a)?))
            }
            (VerticalScale::Composite(c), Some(_)) => {
                Err(RunError::Config(format!("anchors cannot be applied to composite scale `{}`", c.name)).into())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImportSpec {
    pub path: PathBuf,
    #[serde(default = "default_id_column")]
    pub id_column: String,
}

fn default_id_column() -> String {
    "item_id".into()
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureOptions {
    pub grade_encoding: GradeEncoding,
    /// Also compute text metrics on question text (`Q_` columns).
    pub include_question_text: bool,
    /// Extra feature tables merged into the text group.
    pub imports: Vec<ImportSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingOptions {
    /// JSON-Lines store; created when fetching into a missing file.
    pub store: PathBuf,
    #[serde(default = "default_variant")]
    pub variant: EmbeddingVariant,
    /// Request missing vectors from the embedding service.
    #[serde(default)]
    pub fetch: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_variant() -> EmbeddingVariant {
    EmbeddingVariant::Full
}

fn default_timeout() -> u64 {
    120
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json, Format::Markdown]
}

/// A run: bank, outcome definition, feature sets and evaluation settings.
/// Relative paths are resolved against the directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub bank: PathBuf,
    #[serde(default)]
    pub scale: ScaleChoice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchors: Option<Anchors>,
    #[serde(default)]
    pub outcome: Outcome,
    /// Keep only items from these states.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_filter: Option<Vec<String>>,
    #[serde(default)]
    pub features: FeatureOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<EmbeddingOptions>,
    pub specs: Vec<FeatureSetSpec>,
    #[serde(default)]
    pub eval: crate::eval::EvalConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn new(name: &str, bank: impl Into<PathBuf>, specs: Vec<FeatureSetSpec>) -> Self {
        Self {
            name: name.to_string(),
            bank: bank.into(),
            scale: ScaleChoice::default(),
            anchors: None,
            outcome: Outcome::default(),
            state_filter: None,
            features: FeatureOptions::default(),
            embeddings: None,
            specs,
            eval: crate::eval::EvalConfig::default(),
            output_dir: default_output_dir(),
            formats: default_formats(),
            base_dir: PathBuf::from("."),
        }
    }

    /// Reads and validates a config file.
    pub fn load(path: &Path) -> crate::Result<Self> {
        let bytes = std::fs::read(path)?;
        let mut config = Self::from_json(&bytes).map_err(|message| RunError::Parse {
            path: path.to_path_buf(),
            message,
        })?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        if config.base_dir.as_os_str().is_empty() {
            config.base_dir = PathBuf::from(".");
        }
        config.validate()?;
        Ok(config)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, String> {
        let de = &mut serde_json::Deserializer::from_slice(bytes);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            if path == "." {
                e.into_inner().to_string()
            } else {
                format!("at `{path}`: {}", e.into_inner())
            }
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// `p` joined onto the config directory unless absolute.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    pub fn default_variant(&self) -> EmbeddingVariant {
        self.embeddings.as_ref().map_or(EmbeddingVariant::Full, |e| e.variant.clone())
    }

    /// Checks spec consistency and that every input path exists.
    pub fn validate(&self) -> Result<(), RunError> {
        let bad = |m: String| Err(RunError::Config(m));
        if self.name.trim().is_empty() || self.name.contains(['/', '\\']) {
            return bad(format!("run name `{}` must be non-empty and contain no path separators", self.name));
        }
        if self.specs.is_empty() {
            return bad("no feature-set specs".into());
        }
        let mut names = HashSet::new();
        for s in &self.specs {
            s.validate().map_err(RunError::Config)?;
            if !names.insert(s.name.as_str()) {
                return bad(format!("spec name `{}` is used twice", s.name));
            }
            if s.name == BASELINE_NAME {
                return bad(format!("spec name `{BASELINE_NAME}` is reserved"));
            }
        }
        if self.formats.is_empty() {
            return bad("no output formats".into());
        }
        let bank = self.resolve(&self.bank);
        if !bank.exists() {
            return bad(format!("bank {} does not exist", bank.display()));
        }
        for imp in &self.features.imports {
            let p = self.resolve(&imp.path);
            if !p.is_file() {
                return bad(format!("import {} does not exist", p.display()));
            }
        }
        if let ScaleChoice::File { file } = &self.scale {
            if !self.resolve(file).is_file() {
                return bad(format!("scale file {} does not exist", self.resolve(file).display()));
            }
        }
        let uses_embeddings = self.specs.iter().any(|s| s.model.is_some());
        match &self.embeddings {
            None if uses_embeddings => bad("specs use embeddings but `embeddings.store` is not set".into()),
            Some(e) if uses_embeddings && !e.fetch && !self.resolve(&e.store).is_file() => bad(format!(
                "embedding store {} does not exist and fetching is disabled",
                self.resolve(&e.store).display()
            )),
            _ => Ok(()),
        }
    }

    /// Stable hash of everything that affects results (not the output
    /// location or formats).
    pub fn fingerprint(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(o) = v.as_object_mut() {
            o.remove("output_dir");
            o.remove("formats");
        }
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }
}
