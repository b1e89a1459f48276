use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, bail, Context as _, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use itemdiff::bank::{context_features, test_features, GradeEncoding, ItemBank};
use itemdiff::embed::{
    embedding_inputs, endpoint_from_env, fetch_embeddings, known_model, option_inputs, EmbeddingStore,
    EmbeddingVariant, FetchOptions, HttpEmbeddingClient, ModelSpec, Pooling,
};
use itemdiff::features::{assemble_features, import_feature_table};
use itemdiff::runner::{
    input_ablation_config, compute_outcome, robustness_sweep, run_grid, results_grid_config, Outcome, Prepared, RunConfig,
    ScaleChoice, GridModels,
};
use itemdiff::scale::{builtin, Anchors};
use itemdiff::synth::{generate, SynthConfig};
use itemdiff::text::{text_features, TextOptions};

#[derive(Parser)]
#[command(name = "itemdiff", version, about = "Item difficulty rescaling and prediction")]
struct Cli {
    /// Worker threads for evaluation (default: all cores).
    #[arg(long, global = true, env = "ITEMDIFF_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a run config and build every feature table it needs.
    Validate { config: PathBuf },
    /// Write item easiness on a vertical scale as CSV.
    Rescale {
        #[arg(long)]
        bank: PathBuf,
        /// Built-in scale name or scale JSON file.
        #[arg(long, default_value = builtin::NWEA_2020_SPRING)]
        scale: String,
        /// `grade_a,b_a,grade_b,b_b,p`, e.g. `3,0.3,8,-1.69,0.6`.
        #[arg(long, allow_hyphen_values = true)]
        anchors: Option<String>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Write the context, test and text feature table as CSV.
    Features {
        #[arg(long)]
        bank: PathBuf,
        /// Extra feature CSV keyed by `item_id`; repeatable.
        #[arg(long = "import")]
        imports: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = Grade::Numeric)]
        grade_encoding: Grade,
        #[arg(long)]
        question_text: bool,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Fetch missing vectors from the embedding service into a store.
    Embed {
        #[arg(long)]
        bank: PathBuf,
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        model: String,
        /// Service base URL; falls back to ITEMDIFF_EMBED_ENDPOINT.
        #[arg(long)]
        endpoint: Option<String>,
        /// `full`, `no_passage` or `options` (every option-only input).
        #[arg(long = "variant", default_value = "full")]
        variants: Vec<String>,
        /// Vector size for models the store and built-in list do not know.
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long, default_value_t = 512)]
        max_tokens: usize,
        #[arg(long, default_value_t = 120)]
        timeout_secs: u64,
    },
    /// Evaluate the baseline and every feature set of a config.
    Run {
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Re-run one feature set under several vertical scales.
    Sweep {
        config: PathBuf,
        /// Comma-separated names or files; `alternates` and `all` expand to built-in lists.
        #[arg(long, default_value = "alternates")]
        scales: String,
        #[arg(long)]
        spec: Option<String>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Write a synthetic bank, features, embeddings, truth and config.
    Synth {
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        items: Option<usize>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        dim: Option<usize>,
    },
    /// Write a preset run config.
    Preset {
        #[arg(value_enum)]
        which: PresetName,
        #[arg(long)]
        bank: PathBuf,
        #[arg(long)]
        store: PathBuf,
        /// Model for the ablation preset.
        #[arg(long, default_value = "bert-base")]
        model: String,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Grade {
    Numeric,
    OneHot,
    Both,
}

impl From<Grade> for GradeEncoding {
    fn from(g: Grade) -> Self {
        match g {
            Grade::Numeric => GradeEncoding::Numeric,
            Grade::OneHot => GradeEncoding::OneHot,
            Grade::Both => GradeEncoding::Both,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetName {
    /// Baseline plus 19 feature sets over three embedding models.
    Grid,
    /// Embedding-input ablations for one model.
    Ablation,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            use std::io::Write;
            match std::io::stdout().lock().write_all(text.as_bytes()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(()),
            }
        }
    }
}

fn scale_choice(s: &str) -> ScaleChoice {
    let p = Path::new(s);
    if p.extension().is_some_and(|e| e == "json") || (p.exists() && builtin::grade_means(s).is_none()) {
        ScaleChoice::File { file: p.to_path_buf() }
    } else {
        ScaleChoice::Name(s.to_string())
    }
}

fn parse_anchors(s: &str) -> Result<Anchors> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [ga, ba, gb, bb, p] = parts[..] else {
        bail!("anchors need five values `grade_a,b_a,grade_b,b_b,p`, got `{s}`");
    };
    Ok(Anchors {
        grade_a: ga.parse().context("grade_a")?,
        b_a: ba.parse().context("b_a")?,
        grade_b: gb.parse().context("grade_b")?,
        b_b: bb.parse().context("b_b")?,
        p: p.parse().context("p")?,
    })
}

fn parse_scales(s: &str) -> Vec<ScaleChoice> {
    match s {
        "alternates" => builtin::ALTERNATE_SCALES.iter().map(|n| ScaleChoice::Name(n.to_string())).collect(),
        "all" => builtin::names().map(|n| ScaleChoice::Name(n.to_string())).collect(),
        _ => s.split(',').map(|x| scale_choice(x.trim())).collect(),
    }
}

fn load_config(path: &Path, output_dir: Option<PathBuf>) -> Result<RunConfig> {
    let mut c = RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(d) = output_dir {
        // relative to the working directory, not the config
        c.output_dir = std::env::current_dir()?.join(d);
    }
    Ok(c)
}

fn rescale(bank: &Path, scale: &str, anchors: Option<&str>) -> Result<String> {
    let bank = ItemBank::load(bank)?;
    let anchors = anchors.map(parse_anchors).transpose()?;
    let scale = scale_choice(scale).resolve(Path::new("."), anchors)?;
    let b = compute_outcome(&bank, Outcome::RescaledEasiness, &scale)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["item_id", "state", "grade", "year", "p_value", "easiness"])?;
    for (it, b) in bank.items().iter().zip(b) {
        let c = &it.context;
        w.write_record([
            it.item_id.clone(),
            c.state.clone(),
            c.grade.to_string(),
            c.year.to_string(),
            it.p_value.to_string(),
            b.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn features(bank: &Path, imports: &[PathBuf], grade: GradeEncoding, question_text: bool) -> Result<String> {
    let bank = ItemBank::load(bank)?;
    let opts = TextOptions {
        include_question_text: question_text,
        ..TextOptions::default()
    };
    let mut parts = vec![context_features(&bank, grade), test_features(&bank), text_features(&bank, &opts)?];
    for p in imports {
        let bytes = std::fs::read(p).with_context(|| format!("reading {}", p.display()))?;
        let imp = import_feature_table(&bytes, "item_id", Some(&bank))?;
        if !imp.unmatched.is_empty() {
            log::warn!("{}: {} unmatched row(s)", p.display(), imp.unmatched.len());
        }
        parts.push(imp.table);
    }
    let table = assemble_features(&bank, &parts)?;
    for c in table.zero_variance_columns() {
        log::warn!("column `{c}` is constant");
    }
    Ok(table.to_csv())
}

#[allow(clippy::too_many_arguments)]
fn embed(
    bank: &Path,
    store_path: &Path,
    model: &str,
    endpoint: Option<&str>,
    variants: &[String],
    dim: Option<usize>,
    max_tokens: usize,
    timeout: u64,
) -> Result<()> {
    let bank = ItemBank::load(bank)?;
    let mut store = if store_path.exists() {
        EmbeddingStore::load(store_path)?
    } else {
        EmbeddingStore::new()
    };
    let spec = match (store.model(model).or_else(|| known_model(model)), dim) {
        (Some(s), Some(d)) if s.dim != d => bail!("model `{model}` has dim {}, not {d}", s.dim),
        (Some(s), _) => s,
        (None, Some(d)) => ModelSpec {
            dim: d,
            max_tokens,
            pooling: Pooling::Mean,
        },
        (None, None) => bail!("unknown model `{model}`; pass --dim"),
    };
    let mut requests = Vec::new();
    for v in variants {
        if v == "options" {
            requests.extend(option_inputs(&bank));
        } else {
            let v: EmbeddingVariant = v.parse()?;
            requests.extend(embedding_inputs(&bank, &v)?);
        }
    }
    let endpoint = endpoint_from_env(endpoint).ok_or_else(|| anyhow!("no endpoint; pass --endpoint or set the env var"))?;
    let client = HttpEmbeddingClient::new(&endpoint, Duration::from_secs(timeout))?;
    let s = fetch_embeddings(&client, &mut store, model, spec, &requests, &FetchOptions::default())?;
    store.save(store_path)?;
    println!(
        "{model}: {} requested, {} cached, {} fetched in {} call(s)",
        s.requested, s.cached, s.fetched, s.calls
    );
    Ok(())
}

fn real_main(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Validate { config } => {
            let c = load_config(&config, None)?;
            let prepared = Prepared::prepare(&c, None)?;
            println!("{}: {} items, {} spec(s)", c.name, prepared.bank.len(), c.specs.len());
            for s in &c.specs {
                let t = prepared.features(s)?;
                println!("  {}: {} feature(s)", s.name, t.ncols());
            }
            println!("fingerprint {}", c.fingerprint());
        }
        Command::Rescale {
            bank,
            scale,
            anchors,
            out,
        } => emit(out.as_deref(), &rescale(&bank, &scale, anchors.as_deref())?)?,
        Command::Features {
            bank,
            imports,
            grade_encoding,
            question_text,
            out,
        } => emit(out.as_deref(), &features(&bank, &imports, grade_encoding.into(), question_text)?)?,
        Command::Embed {
            bank,
            store,
            model,
            endpoint,
            variants,
            dim,
            max_tokens,
            timeout_secs,
        } => embed(&bank, &store, &model, endpoint.as_deref(), &variants, dim, max_tokens, timeout_secs)?,
        Command::Run { config, output_dir } => {
            let c = load_config(&config, output_dir)?;
            let out = run_grid(&c)?;
            for r in &out.reports {
                info!("{}: test RMSE {:.4}", r.name, r.test_rmse);
            }
            for f in &out.files {
                println!("{}", f.display());
            }
        }
        Command::Sweep {
            config,
            scales,
            spec,
            output_dir,
        } => {
            let c = load_config(&config, output_dir)?;
            let t = robustness_sweep(&c, &parse_scales(&scales), spec.as_deref())?;
            for f in &t.files {
                println!("{}", f.display());
            }
        }
        Command::Synth {
            out,
            seed,
            items,
            noise,
            dim,
        } => {
            let d = SynthConfig::default();
            let cfg = SynthConfig {
                seed: seed.unwrap_or(d.seed),
                n_items: items.unwrap_or(d.n_items),
                noise_sd: noise.unwrap_or(d.noise_sd),
                embedding_dim: dim.unwrap_or(d.embedding_dim),
                ..d
            };
            let files = generate(&cfg)?.write(&out)?;
            println!("{}", files.config.display());
        }
        Command::Preset {
            which,
            bank,
            store,
            model,
            out,
        } => {
            let c = match which {
                PresetName::Grid => results_grid_config(bank, store, &GridModels::default()),
                PresetName::Ablation => input_ablation_config(bank, store, &model),
            };
            emit(out.as_deref(), &c.to_json())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match real_main(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
