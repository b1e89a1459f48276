use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::time::Duration;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::output::{emit_reports, emit_sweep};
use super::{FeatureGroup, FeatureSetSpec, Outcome, RunConfig, RunError, ScaleChoice, BASELINE_NAME};
use crate::bank::{context_features, test_features, ItemBank};
use crate::embed::{
    embedding_inputs, embeddings_to_features, endpoint_from_env, fetch_embeddings, known_model, option_inputs,
    similarity_features, EmbedError, EmbeddingService, EmbeddingStore, EmbeddingVariant, FetchOptions,
    HttpEmbeddingClient, OptionTarget,
};
use crate::eval::{evaluate, evaluate_baseline, EvalConfig, EvalReport, PcaStage, ReportLabel};
use crate::features::{assemble_features, import_feature_table, FeatureTable};
use crate::scale::VerticalScale;
use crate::text::{text_features, TextOptions};
use crate::Result;

/// Attached to reports whose outcome mixes scales across years.
pub const MIXED_SCALE_NOTE: &str = "mixed-scale, not comparable";

/// The per-item outcome vector, in bank order.
pub fn compute_outcome(bank: &ItemBank, outcome: Outcome, scale: &VerticalScale) -> Result<Vec<f64>> {
    bank.items()
        .iter()
        .map(|it| match outcome {
            Outcome::RawPvalue => Ok(it.p_value),
            Outcome::RescaledEasiness => Ok(scale
                .rescale(it.p_value, it.context.grade, it.context.year)?
                .value()),
        })
        .collect()
}

fn group_key(group: FeatureGroup, spec: &FeatureSetSpec, default_variant: &EmbeddingVariant) -> String {
    match group {
        FeatureGroup::Embeddings => format!(
            "embeddings:{}:{}",
            spec.model.as_deref().unwrap_or_default(),
            spec.variant.as_ref().unwrap_or(default_variant)
        ),
        FeatureGroup::CosineSim => format!("cosine_sim:{}", spec.model.as_deref().unwrap_or_default()),
        g => g.key().to_string(),
    }
}

fn option_variants(bank: &ItemBank) -> Vec<EmbeddingVariant> {
    std::iter::once(EmbeddingVariant::OptionOnly(OptionTarget::Correct))
        .chain((0..bank.max_wrong_options()).map(|i| EmbeddingVariant::OptionOnly(OptionTarget::Wrong(i))))
        .collect()
}

/// Items lacking any of the vectors a group needs.
fn check_coverage(store: &EmbeddingStore, bank: &ItemBank, model: &str, variants: &[EmbeddingVariant]) -> Result<()> {
    let mut missing = Vec::new();
    let mut keys = BTreeSet::new();
    for item in bank.items() {
        let mut lacks = false;
        for v in variants {
            if let EmbeddingVariant::OptionOnly(OptionTarget::Wrong(i)) = v {
                if *i >= item.wrong_options.len() {
                    continue;
                }
            }
            if !store.contains(&item.item_id, v, model) {
                lacks = true;
                keys.insert(v.key());
            }
        }
        if lacks {
            missing.push(item.item_id.clone());
        }
    }
    if missing.is_empty() {
        Ok(())
    } else {
        Err(EmbedError::MissingRecords {
            model: model.to_string(),
            variant: keys.into_iter().collect::<Vec<_>>().join(", "),
            item_ids: missing,
        }
        .into())
    }
}

/// Bank and every feature table the config's specs need, built once and
/// shared by all specs.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub bank: ItemBank,
    tables: BTreeMap<String, FeatureTable>,
    default_variant: EmbeddingVariant,
}

impl Prepared {
    /// Loads inputs. With `embeddings.fetch` set, missing vectors are
    /// requested from `service` (or the configured HTTP endpoint) and the
    /// store file is rewritten; otherwise any missing vector is an error
    /// listing the affected items.
    pub fn prepare(config: &RunConfig, service: Option<&dyn EmbeddingService>) -> Result<Self> {
        let mut bank = ItemBank::load(config.resolve(&config.bank))?;
        if let Some(states) = &config.state_filter {
            bank = bank.filter(|it| states.contains(&it.context.state))?;
        }
        let default_variant = config.default_variant();
        let groups: BTreeSet<FeatureGroup> = config.specs.iter().flat_map(|s| s.include.iter().copied()).collect();
        let mut tables = BTreeMap::new();

        if groups.contains(&FeatureGroup::Context) {
            tables.insert("context".into(), context_features(&bank, config.features.grade_encoding));
        }
        if groups.contains(&FeatureGroup::Test) {
            tables.insert("test".into(), test_features(&bank));
        }
        if groups.contains(&FeatureGroup::Text) {
            let opts = TextOptions {
                include_question_text: config.features.include_question_text,
                ..TextOptions::default()
            };
            let mut parts = vec![text_features(&bank, &opts)?];
            for imp in &config.features.imports {
                let path = config.resolve(&imp.path);
                let bytes = std::fs::read(&path)?;
                let import = import_feature_table(&bytes, &imp.id_column, Some(&bank))?;
                if !import.unmatched.is_empty() {
                    warn!(
                        "{}: {} row(s) match no bank item, e.g. `{}`",
                        path.display(),
                        import.unmatched.len(),
                        import.unmatched[0]
                    );
                }
                parts.push(import.table);
            }
            tables.insert("text".into(), assemble_features(&bank, &parts)?);
        }

        // (model, variants) needed by embedding-based groups
        let mut needs: BTreeMap<String, BTreeSet<EmbeddingVariant>> = BTreeMap::new();
        for spec in &config.specs {
            let Some(model) = &spec.model else { continue };
            let entry = needs.entry(model.clone()).or_default();
            if spec.include.contains(&FeatureGroup::Embeddings) {
                entry.insert(spec.variant.clone().unwrap_or_else(|| default_variant.clone()));
            }
            if spec.include.contains(&FeatureGroup::CosineSim) {
                entry.extend(option_variants(&bank));
            }
        }
        if !needs.is_empty() {
            let opts = config.embeddings.as_ref().expect("validated: specs with models have a store");
            let path = config.resolve(&opts.store);
            let mut store = if path.exists() || !opts.fetch {
                EmbeddingStore::load(&path)?
            } else {
                EmbeddingStore::new()
            };
            if opts.fetch {
                let http;
                let service: &dyn EmbeddingService = match service {
                    Some(s) => s,
                    None => {
                        let endpoint = endpoint_from_env(opts.endpoint.as_deref()).ok_or(RunError::NoEndpoint)?;
                        http = HttpEmbeddingClient::new(&endpoint, Duration::from_secs(opts.timeout_secs))?;
                        &http
                    }
                };
                for (model, variants) in &needs {
                    let spec = store
                        .model(model)
                        .or_else(|| known_model(model))
                        .ok_or_else(|| RunError::Config(format!("model `{model}` has no known dim; declare it in the store manifest")))?;
                    let mut requests = Vec::new();
                    for v in variants {
                        if matches!(v, EmbeddingVariant::OptionOnly(_)) {
                            continue;
                        }
                        requests.extend(embedding_inputs(&bank, v)?);
                    }
                    if variants.iter().any(|v| matches!(v, EmbeddingVariant::OptionOnly(_))) {
                        requests.extend(option_inputs(&bank));
                    }
                    let summary = fetch_embeddings(service, &mut store, model, spec, &requests, &FetchOptions::default())?;
                    info!(
                        "{model}: {} requested, {} cached, {} fetched in {} call(s)",
                        summary.requested, summary.cached, summary.fetched, summary.calls
                    );
                }
                store.save(&path)?;
            }
            for (model, variants) in &needs {
                check_coverage(&store, &bank, model, &variants.iter().cloned().collect::<Vec<_>>())?;
            }
            for spec in &config.specs {
                let Some(model) = &spec.model else { continue };
                if spec.include.contains(&FeatureGroup::Embeddings) {
                    let key = group_key(FeatureGroup::Embeddings, spec, &default_variant);
                    if let Entry::Vacant(slot) = tables.entry(key) {
                        let v = spec.variant.clone().unwrap_or_else(|| default_variant.clone());
                        slot.insert(embeddings_to_features(&store, &bank, model, &v)?);
                    }
                }
                if spec.include.contains(&FeatureGroup::CosineSim) {
                    let key = group_key(FeatureGroup::CosineSim, spec, &default_variant);
                    if let Entry::Vacant(slot) = tables.entry(key) {
                        slot.insert(similarity_features(&bank, &store, model)?);
                    }
                }
            }
        }
        Ok(Self {
            bank,
            tables,
            default_variant,
        })
    }

    /// The feature table of one spec, columns grouped in the order context,
    /// test, text, embeddings, cosine similarity.
    pub fn features(&self, spec: &FeatureSetSpec) -> Result<FeatureTable> {
        let parts: Vec<FeatureTable> = spec
            .include
            .iter()
            .map(|&g| {
                self.tables
                    .get(&group_key(g, spec, &self.default_variant))
                    .cloned()
                    .ok_or_else(|| RunError::Config(format!("spec `{}` was not prepared", spec.name)).into())
            })
            .collect::<Result<_>>()?;
        Ok(assemble_features(&self.bank, &parts)?)
    }
}

fn spec_eval_config(base: &EvalConfig, spec: &FeatureSetSpec) -> EvalConfig {
    EvalConfig {
        pca: spec.pca.map(|t| PcaStage {
            variance_target: t,
            prefix: spec.model.as_ref().map(|m| format!("{m}_e")),
            standardize: spec.pca_standardize,
        }),
        ..base.clone()
    }
}

fn run_spec(prepared: &Prepared, spec: &FeatureSetSpec, y: &[f64], config: &RunConfig, note: Option<&str>) -> Result<EvalReport> {
    let features = prepared.features(spec)?;
    let label = ReportLabel {
        name: spec.name.clone(),
        feature_set: spec.describe(&prepared.default_variant),
        group: spec.group.clone(),
    };
    let mut report = evaluate(&label, &features, y, &spec_eval_config(&config.eval, spec))?.report;
    report.note = note.map(str::to_string);
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Hash of the config and every report fingerprint; part of file names.
    pub fingerprint: String,
    /// Baseline first, then one report per spec in config order.
    pub reports: Vec<EvalReport>,
    pub files: Vec<PathBuf>,
}

fn combined_fingerprint(config_fp: &str, reports: &[EvalReport]) -> String {
    let mut h = Sha256::new();
    h.update(config_fp.as_bytes());
    for r in reports {
        h.update(r.fingerprint.as_bytes());
    }
    hex::encode(h.finalize())
}

fn check_eval(config: &RunConfig) -> Result<()> {
    config.validate()?;
    if config.eval.pca.is_some() {
        return Err(RunError::Config("set PCA per spec (`specs[].pca`), not in `eval`".into()).into());
    }
    Ok(())
}

/// Evaluates the baseline and every spec on one shared split and outcome,
/// then writes `<name>-<fingerprint>.<ext>` report files.
///
/// Specs run concurrently. If any fails, the completed reports are written
/// as `<name>-<fingerprint>.partial.<ext>` and the first failure (in config
/// order) is returned.
pub fn run_grid(config: &RunConfig) -> Result<RunOutput> {
    run(config, None)
}

/// [`run_grid`] with an explicit embedding service for fetching.
pub fn run_grid_with_service(config: &RunConfig, service: &dyn EmbeddingService) -> Result<RunOutput> {
    run(config, Some(service))
}

fn run(config: &RunConfig, service: Option<&dyn EmbeddingService>) -> Result<RunOutput> {
    check_eval(config)?;
    let scale = config.scale.resolve(&config.base_dir, config.anchors)?;
    let prepared = Prepared::prepare(config, service)?;
    let y = compute_outcome(&prepared.bank, config.outcome, &scale)?;
    let note = (scale.is_mixed() && config.outcome == Outcome::RescaledEasiness).then_some(MIXED_SCALE_NOTE);

    let mut baseline = evaluate_baseline(
        &ReportLabel {
            name: BASELINE_NAME.into(),
            feature_set: "mean of training outcome".into(),
            group: None,
        },
        &y,
        &config.eval,
    )?;
    baseline.note = note.map(str::to_string);

    let results: Vec<Result<EvalReport>> = config
        .specs
        .par_iter()
        .map(|spec| run_spec(&prepared, spec, &y, config, note))
        .collect();

    let mut reports = vec![baseline];
    let mut failure = None;
    for (spec, r) in config.specs.iter().zip(results) {
        match r {
            Ok(rep) => reports.push(rep),
            Err(e) if failure.is_none() => failure = Some((spec.name.clone(), e)),
            Err(e) => warn!("spec `{}` also failed: {e}", spec.name),
        }
    }
    let fingerprint = combined_fingerprint(&config.fingerprint(), &reports);
    let dir = config.resolve(&config.output_dir);
    let stem = format!("{}-{}", config.name, &fingerprint[..12]);
    if let Some((spec, source)) = failure {
        let partial = emit_reports(&reports, &config.name, &dir, &format!("{stem}.partial"), &config.formats)?;
        return Err(RunError::SpecFailed {
            spec,
            source: Box::new(source),
            partial,
        }
        .into());
    }
    let files = emit_reports(&reports, &config.name, &dir, &stem, &config.formats)?;
    Ok(RunOutput {
        fingerprint,
        reports,
        files,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scale: String,
    pub mixed: bool,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub spec: String,
    pub fingerprint: String,
    pub rows: Vec<SweepRow>,
    #[serde(skip)]
    pub files: Vec<PathBuf>,
}

/// Re-derives the outcome under each scale and re-runs one spec (the named
/// one, or the last in the config). Mixed-scale rows carry
/// [`MIXED_SCALE_NOTE`]. Every scale is resolved before any work starts.
/// Writes `<name>-sweep-<fingerprint>.<ext>`.
pub fn robustness_sweep(config: &RunConfig, scales: &[ScaleChoice], spec: Option<&str>) -> Result<SweepTable> {
    check_eval(config)?;
    if scales.is_empty() {
        return Err(RunError::Config("no scales to sweep".into()).into());
    }
    let chosen = match spec {
        Some(name) => config
            .specs
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| RunError::Config(format!("no spec named `{name}`")))?,
        None => config.specs.last().expect("validated: specs non-empty"),
    };
    if config.outcome == Outcome::RawPvalue {
        warn!("sweeping scales with a raw p-value outcome; every row will be identical");
    }
    let resolved: Vec<VerticalScale> = scales
        .iter()
        .map(|s| s.resolve(&config.base_dir, config.anchors))
        .collect::<Result<_>>()?;

    let single = RunConfig {
        specs: vec![chosen.clone()],
        ..config.clone()
    };
    let prepared = Prepared::prepare(&single, None)?;
    let features = prepared.features(chosen)?;
    let eval_config = spec_eval_config(&config.eval, chosen);
    let mut rows = Vec::with_capacity(resolved.len());
    for scale in &resolved {
        let y = compute_outcome(&prepared.bank, config.outcome, scale)?;
        let label = ReportLabel {
            name: chosen.name.clone(),
            feature_set: chosen.describe(&prepared.default_variant),
            group: Some(scale.name().to_string()),
        };
        let mut report = evaluate(&label, &features, &y, &eval_config)?.report;
        if scale.is_mixed() {
            report.note = Some(MIXED_SCALE_NOTE.into());
        }
        rows.push(SweepRow {
            scale: scale.name().to_string(),
            mixed: scale.is_mixed(),
            report,
        });
    }
    let reports: Vec<EvalReport> = rows.iter().map(|r| r.report.clone()).collect();
    let fingerprint = combined_fingerprint(&config.fingerprint(), &reports);
    let mut table = SweepTable {
        spec: chosen.name.clone(),
        fingerprint,
        rows,
        files: Vec::new(),
    };
    let stem = format!("{}-sweep-{}", config.name, &table.fingerprint[..12]);
    table.files = emit_sweep(&table, &config.resolve(&config.output_dir), &stem, &config.formats)?;
    Ok(table)
}
