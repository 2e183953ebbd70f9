//! Command-line front end.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use tcdr_core::classifier::baselines::{train_baseline, BaselineKind, BaselineModel};
use tcdr_core::classifier::{fine_tune, fine_tune_lora, Architecture, EncoderAsset, ModelBundle};
use tcdr_core::dataset::{dedup_by_prompt, stratified_split, stratified_subset, Dataset, SplitSpec};
use tcdr_core::eval::{
    prepare_samples, run_complex_attack_eval, run_main_eval, run_noise_sweep, run_prompt_ablation, AblationData,
    Detector, TextDetector,
};
use tcdr_core::explainer::explain;
use tcdr_core::metrics::{MetricsReport, TRIP_BUDGET_CYCLES};
use tcdr_core::scenario::{generate_kept, GeneratorConfig};
use tcdr_core::signal::Source;
use tcdr_core::textualizer::{align_tokens_to_cells, textualize, PromptTemplate, TemplateId, WordPieceTokenizer};

use crate::bundle::{load_model, save_baseline, save_bundle, write_train_log, StoredModel};
use crate::config::RunConfig;
use crate::error::{io_err, Error, Result};
use crate::heatmap::{export_heatmap, load_explanation, render_heatmap, save_explanation, Explanation};
use crate::io::{export, ingest, write_catalog, write_catalog_summary, Format};
use crate::latency::{bench_latency, bench_text_pipeline, hardware_note};
use crate::store::{ResultRecord, ResultsStore};

pub const MAIN_FILE: &str = "main.records";
pub const HOLDOUT_FILE: &str = "complex_holdout.records";
pub const TRAIN_FILE: &str = "train.records";
pub const TEST_FILE: &str = "test.records";

pub const TABLE_MAIN: [&str; 7] = [
    "Model",
    "Cyberattack Detection Rate (%)",
    "Accuracy (%)",
    "Precision (%)",
    "Recall (%)",
    "Specificity (%)",
    "F1-Score (%)",
];
pub const TABLE_COMPLEX: [&str; 2] = ["Model", "Detected Complex Cyberattacks (%)"];
pub const TABLE_LATENCY: [&str; 6] = ["Model", "Mean (ms)", "p95 (ms)", "Cycles at 60 Hz", "Tokenize (ms)", "Hardware"];
pub const TABLE_PROMPTS: [&str; 5] = ["Metric", "Baseline", "Variant 1", "Variant 2", "Variant 3"];

#[derive(Debug, Parser)]
#[command(name = "tcdr", version, about = "Cyberattack detection for transformer differential relays")]
pub struct Cli {
    /// TOML run configuration; built-in defaults when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// BASELINE, V1, V2 or V3.
    #[arg(long, global = true)]
    pub template: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the labelled scenario batch and the complex-attack holdout.
    Generate {
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        holdout: Option<usize>,
    },
    /// Split a dataset (generated, or an external RECORDS/CSV file) into train and test.
    BuildDataset {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        format: Option<String>,
    },
    /// Train a detector on the training split.
    Train {
        #[arg(long)]
        model: ModelSpec,
    },
    /// Run an evaluation campaign and append its results.
    Evaluate {
        #[arg(long)]
        campaign: Campaign,
        #[arg(long, default_value = "distilbert")]
        model: ModelSpec,
        /// SNR levels in dB, comma separated (noise campaign).
        #[arg(long, value_delimiter = ',')]
        snr: Option<Vec<f64>>,
    },
    /// Attention heatmap for one test window.
    Explain {
        #[arg(long, default_value = "distilbert")]
        model: ModelSpec,
        /// Scenario id of the window.
        #[arg(long)]
        sample: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Redraw a saved explanation.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Campaign {
    Main,
    Complex,
    Noise,
    Prompts,
    Latency,
}

impl Campaign {
    fn code(self) -> &'static str {
        match self {
            Campaign::Main => "main",
            Campaign::Complex => "complex",
            Campaign::Noise => "noise",
            Campaign::Prompts => "prompts",
            Campaign::Latency => "latency",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelSpec {
    Encoder,
    EncoderLora,
    Causal,
    Baseline(BaselineKind),
}

impl ModelSpec {
    pub fn slug(self) -> String {
        match self {
            ModelSpec::Encoder => "distilbert".into(),
            ModelSpec::EncoderLora => "distilbert-lora".into(),
            ModelSpec::Causal => "gpt2-style".into(),
            ModelSpec::Baseline(k) => format!("baseline-{}", k.code().to_ascii_lowercase()),
        }
    }

    pub fn display_name(self) -> String {
        match self {
            ModelSpec::Encoder => "DistilBERT".into(),
            ModelSpec::EncoderLora => "DistilBERT (LoRA)".into(),
            ModelSpec::Causal => "GPT-2 style".into(),
            ModelSpec::Baseline(k) => k.code().into(),
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.slug())
    }
}

impl FromStr for ModelSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "distilbert" => Ok(ModelSpec::Encoder),
            "distilbert-lora" | "lora" => Ok(ModelSpec::EncoderLora),
            "gpt2-style" | "gpt2" => Ok(ModelSpec::Causal),
            other => match other.strip_prefix("baseline:") {
                Some(kind) => kind.parse().map(ModelSpec::Baseline).map_err(|e| e.to_string()),
                None => Err(format!(
                    "unknown model `{s}`; expected distilbert, distilbert-lora, gpt2-style or baseline:<kind>"
                )),
            },
        }
    }
}

/// Resolved configuration plus command-line overrides.
pub struct Context {
    pub cfg: RunConfig,
    pub fingerprint: String,
}

impl Context {
    pub fn from_cli(cli: &Cli) -> Result<Self> {
        let mut cfg = match &cli.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = cli.seed {
            cfg.seed = seed;
            cfg.generate.generator.seed = seed;
            cfg.dataset.split.seed = seed;
            cfg.train.seed = seed;
            cfg.eval.noise_seed = seed;
        }
        if let Some(t) = &cli.template {
            cfg.template = t.parse()?;
        }
        cfg.validate()?;
        let fingerprint = cfg.fingerprint();
        Ok(Self { cfg, fingerprint })
    }

    fn data(&self, name: &str) -> PathBuf {
        self.cfg.paths.data.join(name)
    }

    fn model_dir(&self, model: ModelSpec, template: TemplateId) -> PathBuf {
        self.cfg.paths.models.join(format!("{}-{}", model.slug(), template.code().to_ascii_lowercase()))
    }

    fn load(&self, name: &str) -> Result<Dataset> {
        let path = self.data(name);
        ingest(&path, Format::Records, Source::Simulated)?.strict(&path)
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let ctx = Context::from_cli(&cli)?;
    println!("config fingerprint {}", ctx.fingerprint);
    match cli.command {
        Command::Generate { count, holdout } => cmd_generate(&ctx, count, holdout),
        Command::BuildDataset { input, format } => cmd_build(&ctx, input, format),
        Command::Train { model } => cmd_train(&ctx, model),
        Command::Evaluate { campaign, model, snr } => cmd_evaluate(&ctx, campaign, model, snr),
        Command::Explain { model, sample, out } => cmd_explain(&ctx, model, &sample, &out),
        Command::Plot { input, out } => {
            let x = load_explanation(&input)?;
            render_heatmap(&x.map.cell_scores, &x.window, &out, &ctx.cfg.plot)?;
            println!("wrote {}", out.display());
            Ok(())
        }
    }
}

fn mkdir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(io_err(p))
}

fn cmd_generate(ctx: &Context, count: Option<usize>, holdout: Option<usize>) -> Result<()> {
    let g = &ctx.cfg.generate;
    mkdir(&ctx.cfg.paths.data)?;
    let batch = generate_kept(&g.generator, count.unwrap_or(g.count))?;
    let ds = Dataset::new(batch.windows.clone());
    export(&ds, &ctx.data(MAIN_FILE), Format::Records)?;
    write_catalog(&batch.catalog, &ctx.data("catalog.jsonl"))?;
    write_catalog_summary(&batch, &ctx.data("catalog_summary.csv"))?;
    println!(
        "main: {} windows ({} rejected scenarios), fingerprint {}",
        ds.len(),
        batch.rejected(),
        ds.fingerprint()
    );
    let holdout_cfg = GeneratorConfig {
        system: g.generator.system.clone(),
        relay: g.generator.relay,
        split: g.generator.split,
        trace_start: g.generator.trace_start,
        trace_duration: g.generator.trace_duration,
        tsa_delay_ms: g.generator.tsa_delay_ms,
        tsa_payload: g.generator.tsa_payload,
        ..GeneratorConfig::complex_holdout(g.holdout_seed)
    };
    let hb = generate_kept(&holdout_cfg, holdout.unwrap_or(g.complex_holdout))?;
    let hds = Dataset::new(hb.windows);
    export(&hds, &ctx.data(HOLDOUT_FILE), Format::Records)?;
    println!("complex holdout: {} windows, fingerprint {}", hds.len(), hds.fingerprint());
    Ok(())
}

fn cmd_build(ctx: &Context, input: Option<PathBuf>, format: Option<String>) -> Result<()> {
    let (path, source) = match input {
        Some(p) => (p, Source::Ingested),
        None => (ctx.data(MAIN_FILE), Source::Simulated),
    };
    let format = match format {
        Some(f) => f.parse()?,
        None => Format::from_path(&path),
    };
    let ingested = ingest(&path, format, source)?;
    for r in &ingested.rejected {
        eprintln!("rejected {r}");
    }
    let dedup = dedup_by_prompt(&ingested.dataset)?;
    if dedup.duplicates + dedup.conflicts > 0 {
        println!(
            "dropped {} prompt-identical duplicate(s) and {} window(s) with conflicting labels",
            dedup.duplicates, dedup.conflicts
        );
    }
    let ds = dedup.dataset;
    let (train, test) = stratified_split(&ds, &ctx.cfg.dataset.split)?;
    mkdir(&ctx.cfg.paths.data)?;
    export(&train, &ctx.data(TRAIN_FILE), Format::Records)?;
    export(&test, &ctx.data(TEST_FILE), Format::Records)?;
    println!(
        "{} windows ({} rejected): train {} [{}], test {} [{}]",
        ds.len(),
        ingested.rejected.len(),
        train.len(),
        train.fingerprint(),
        test.len(),
        test.fingerprint()
    );
    Ok(())
}

/// Training split minus a stratified validation share.
fn fit_and_val(ctx: &Context) -> Result<(Dataset, Dataset)> {
    let mut train = ctx.load(TRAIN_FILE)?;
    if let Some(n) = ctx.cfg.dataset.train_subset {
        train = stratified_subset(&train, n, ctx.cfg.dataset.split.seed)?;
    }
    if ctx.cfg.dataset.val_fraction == 0.0 {
        return Ok((train, Dataset::empty()));
    }
    Ok(stratified_split(
        &train,
        &SplitSpec {
            train_fraction: 1.0 - ctx.cfg.dataset.val_fraction,
            seed: ctx.cfg.dataset.split.seed,
        },
    )?)
}

fn train_encoder(
    ctx: &Context,
    model: ModelSpec,
    template: TemplateId,
    tok: &WordPieceTokenizer,
    fit: &Dataset,
    val: &Dataset,
) -> Result<ModelBundle> {
    let arch = if model == ModelSpec::Causal { Architecture::Causal } else { Architecture::Bidirectional };
    let asset = EncoderAsset::compact(tok, arch);
    let train = prepare_samples(fit.windows(), template, tok)?;
    let val = prepare_samples(val.windows(), template, tok)?;
    Ok(match model {
        ModelSpec::EncoderLora => fine_tune_lora(&asset, &train, &val, &ctx.cfg.train, &ctx.cfg.lora)?,
        _ => fine_tune(&asset, &train, &val, &ctx.cfg.train)?,
    })
}

fn cmd_train(ctx: &Context, model: ModelSpec) -> Result<()> {
    let (fit, val) = fit_and_val(ctx)?;
    let dir = ctx.model_dir(model, ctx.cfg.template);
    println!("training {} on {} windows ({} validation)", model, fit.len(), val.len());
    match model {
        ModelSpec::Baseline(kind) => {
            let m = train_baseline(kind, fit.windows(), val.windows(), &ctx.cfg.baselines, ctx.cfg.seed)?;
            save_baseline(&m, &dir)?;
        }
        _ => {
            let tok = WordPieceTokenizer::reference();
            let bundle = train_encoder(ctx, model, ctx.cfg.template, &tok, &fit, &val)?;
            println!(
                "best epoch {} (validation macro F1 {:?}), train accuracy {:.4}, trainable {:.2}% of base",
                bundle.log.best_epoch,
                bundle.log.best_val_metric,
                bundle.log.train_accuracy,
                100.0 * bundle.trainable_fraction()
            );
            save_bundle(&bundle, &dir)?;
            write_train_log(&bundle.log, &dir.join(crate::bundle::LOG_FILE))?;
        }
    }
    println!("saved {}", dir.display());
    Ok(())
}

enum Loaded {
    Encoder(Box<ModelBundle>, WordPieceTokenizer),
    Baseline(Box<BaselineModel>),
}

impl Loaded {
    fn open(ctx: &Context, model: ModelSpec) -> Result<Self> {
        let dir = ctx.model_dir(model, ctx.cfg.template);
        Ok(match load_model(&dir)? {
            StoredModel::Encoder(b) => Loaded::Encoder(b, WordPieceTokenizer::reference()),
            StoredModel::Baseline(m) => Loaded::Baseline(m),
        })
    }

    fn with_detector<R>(
        &self,
        template: TemplateId,
        f: impl FnOnce(&dyn Detector) -> tcdr_core::Result<R>,
    ) -> Result<R> {
        Ok(match self {
            Loaded::Encoder(b, tok) => f(&TextDetector::new(b, tok, template)?)?,
            Loaded::Baseline(m) => f(m.as_ref())?,
        })
    }
}

fn pct(v: f64) -> String {
    format!("{v:.2}")
}

fn main_row(name: &str, r: &MetricsReport) -> Vec<String> {
    vec![
        name.into(),
        pct(r.detection_rate),
        pct(r.accuracy),
        pct(r.precision_macro),
        pct(r.recall_macro),
        pct(r.specificity),
        pct(r.f1_macro),
    ]
}

fn record(
    store: &mut ResultsStore,
    ctx: &Context,
    campaign: Campaign,
    key: &str,
    row: Vec<String>,
    detail: serde_json::Value,
) -> Result<()> {
    store.append(&ResultRecord {
        key: key.into(),
        campaign: campaign.code().into(),
        config_fingerprint: ctx.fingerprint.clone(),
        payload: json!({ "row": row, "detail": detail }),
    })
}

fn rows_of(store: &ResultsStore, campaign: Campaign) -> Result<Vec<Vec<String>>> {
    Ok(store
        .records()?
        .into_iter()
        .filter(|r| r.campaign == campaign.code())
        .filter_map(|r| serde_json::from_value(r.payload["row"].clone()).ok())
        .collect())
}

fn cmd_evaluate(ctx: &Context, campaign: Campaign, model: ModelSpec, snr: Option<Vec<f64>>) -> Result<()> {
    let mut store = ResultsStore::open(&ctx.cfg.paths.results)?;
    let template = ctx.cfg.template;
    let key = format!("{}/{}/{}/{}", campaign.code(), model.slug(), template.code(), ctx.fingerprint);
    if store.contains(&key) {
        println!("{key} already recorded; nothing to do");
        return Ok(());
    }
    let name = model.display_name();
    match campaign {
        Campaign::Main => {
            let (train, test) = (ctx.load(TRAIN_FILE)?, ctx.load(TEST_FILE)?);
            let run = Loaded::open(ctx, model)?.with_detector(template, |d| run_main_eval(d, &train, &test))?;
            let row = main_row(&name, &run.report);
            println!("{}", row.join(" | "));
            record(&mut store, ctx, campaign, &key, row, serde_json::to_value(&run).unwrap_or_default())?;
            store.write_table("table_main.csv", &TABLE_MAIN, &rows_of(&store, campaign)?)?;
        }
        Campaign::Complex => {
            let (train, holdout) = (ctx.load(TRAIN_FILE)?, ctx.load(HOLDOUT_FILE)?);
            let rep = Loaded::open(ctx, model)?.with_detector(template, |d| run_complex_attack_eval(d, &train, &holdout))?;
            let row = vec![name, pct(rep.detection_rate)];
            println!("{}", row.join(" | "));
            record(&mut store, ctx, campaign, &key, row, json!({
                "attacks": rep.attacks,
                "detected": rep.detected,
                "holdout_fingerprint": rep.holdout_fingerprint,
            }))?;
            store.write_table("table_complex.csv", &TABLE_COMPLEX, &rows_of(&store, campaign)?)?;
        }
        Campaign::Noise => {
            let test = ctx.load(TEST_FILE)?;
            let levels = snr.unwrap_or_else(|| ctx.cfg.eval.snr_levels.clone());
            let cells = Loaded::open(ctx, model)?
                .with_detector(template, |d| run_noise_sweep(d, &test, &levels, ctx.cfg.eval.noise_seed))?;
            let mut row = vec![name];
            row.extend(cells.iter().map(|c| pct(c.accuracy)));
            println!("{}", row.join(" | "));
            record(&mut store, ctx, campaign, &key, row, serde_json::to_value(&cells).unwrap_or_default())?;
            let mut header = vec!["Model".to_string()];
            header.extend(levels.iter().map(|s| format!("{s} dB")));
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            store.write_table("table_noise.csv", &header, &rows_of(&store, campaign)?)?;
        }
        Campaign::Prompts => {
            let (fit, val) = fit_and_val(ctx)?;
            let test = ctx.load(TEST_FILE)?;
            let tok = WordPieceTokenizer::reference();
            let asset = EncoderAsset::compact(&tok, Architecture::Bidirectional);
            let rows = run_prompt_ablation(
                &asset,
                &tok,
                AblationData { train: &fit, val: &val, test: &test },
                &TemplateId::ALL,
                &ctx.cfg.train,
                Some(Box::new(|r| println!("{}: accuracy {:.2}", r.template, r.run.report.accuracy))),
            )?;
            let metric = |label: &str, f: &dyn Fn(&MetricsReport) -> f64| {
                let mut v = vec![label.to_string()];
                v.extend(rows.iter().map(|r| pct(f(&r.run.report))));
                v
            };
            let table = vec![
                metric("DetectedAttacks (%)", &|r| r.detection_rate),
                metric("Accuracy", &|r| r.accuracy),
                metric("Precision", &|r| r.precision_macro),
                metric("Recall", &|r| r.recall_macro),
                metric("Specificity", &|r| r.specificity),
                metric("F1-Score", &|r| r.f1_macro),
            ];
            store.append(&ResultRecord {
                key: key.clone(),
                campaign: campaign.code().into(),
                config_fingerprint: ctx.fingerprint.clone(),
                payload: serde_json::to_value(&rows).unwrap_or_default(),
            })?;
            store.write_table("table_prompts.csv", &TABLE_PROMPTS, &table)?;
        }
        Campaign::Latency => {
            let test = ctx.load(TEST_FILE)?;
            let n = ctx.cfg.eval.latency_samples.min(test.len());
            let windows = &test.windows()[..n];
            let note = hardware_note();
            let rep = match Loaded::open(ctx, model)? {
                Loaded::Encoder(b, tok) => {
                    bench_text_pipeline(&b, &tok, template, windows, ctx.cfg.eval.latency_warmup, &note)?
                }
                Loaded::Baseline(m) => bench_latency(m.as_ref(), windows, ctx.cfg.eval.latency_warmup, &note)?,
            };
            println!(
                "mean {:.3} ms, p95 {:.3} ms, {:.2} cycles (trip budget {}-{} cycles)",
                rep.mean_ms, rep.p95_ms, rep.cycles_at_60hz, TRIP_BUDGET_CYCLES.0, TRIP_BUDGET_CYCLES.1
            );
            let row = vec![
                name,
                format!("{:.3}", rep.mean_ms),
                format!("{:.3}", rep.p95_ms),
                format!("{:.4}", rep.cycles_at_60hz),
                rep.tokenize_mean_ms.map(|t| format!("{t:.3}")).unwrap_or_default(),
                rep.hardware_note.clone(),
            ];
            record(&mut store, ctx, campaign, &key, row, serde_json::to_value(&rep).unwrap_or_default())?;
            store.write_table("table_latency.csv", &TABLE_LATENCY, &rows_of(&store, campaign)?)?;
        }
    }
    Ok(())
}

fn cmd_explain(ctx: &Context, model: ModelSpec, sample: &str, out: &Path) -> Result<()> {
    let test = ctx.load(TEST_FILE)?;
    let window = test
        .windows()
        .iter()
        .find(|w| w.scenario_id == sample)
        .ok_or_else(|| Error::Core(tcdr_core::Error::Data(format!("no test window with scenario id `{sample}`"))))?
        .clone();
    let bundle = match Loaded::open(ctx, model)? {
        Loaded::Encoder(b, _) => b,
        Loaded::Baseline(_) => {
            return Err(tcdr_core::Error::Capability("baseline models expose no attention".into()).into())
        }
    };
    let tok = WordPieceTokenizer::reference();
    let (doc, tokens) = textualize(&window, &PromptTemplate::for_id(ctx.cfg.template), &tok)?;
    let alignment = align_tokens_to_cells(&tokens, &doc)?;
    let map = explain(&bundle, &tokens, &alignment, &ctx.cfg.explain)?;
    let probability = bundle.predict(&tokens)?.probability;
    export_heatmap(&map, &window, out, &ctx.cfg.plot)?;
    let x = Explanation {
        map,
        window,
        probability,
        config_fingerprint: ctx.fingerprint.clone(),
    };
    save_explanation(&x, &out.with_extension("json"))?;
    let (t, c) = x.map.argmax();
    println!("P(attack) {probability:.4}; most attended cell t={t} channel={c}; wrote {}", out.display());
    Ok(())
}
