use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Subcommand};
use isoswarm::data::{
    gen_synthetic, is_benign, load_csv, load_feature_rows, normalize_apply, normalize_fit, write_csv, CsvOptions,
    FeatureRow, SyntheticConfig, DEFAULT_ATTACK_NAMES,
};
use isoswarm::ensemble::{load_model, save_model, train_per_class, TrainOptions};
use isoswarm::eval::{render_csv, render_json, render_table, run_experiment};
use isoswarm::pso::optimize;
use isoswarm::{
    Error, ExperimentConfig, FitnessContext, LabeledRecord, MetaClassifier, ModelSchema, NormalizationParams,
    Prediction, Provenance, Result,
};

use crate::config::RunConfig;

/// Record count used by `gen-data` when class sizes follow the reference capture.
const DEFAULT_TOTAL: usize = 2430;

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic labeled dataset.
    GenData(GenDataArgs),
    /// Grow one isolation forest per attack class.
    Train(TrainArgs),
    /// Tune per-class thresholds with particle swarm optimization.
    Optimize(OptimizeArgs),
    /// Label rows as a known class or `unknown`.
    Classify(ClassifyArgs),
    /// Leave-one-attack-out evaluation against the fixed-threshold baseline.
    Evaluate(EvaluateArgs),
    /// Add the classes of an external model to a base model.
    Merge(MergeArgs),
    /// Validate a model and write its exchange document.
    Export(ModelCopyArgs),
    /// Validate a received exchange document and store it as a model.
    Import(ModelCopyArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Number of attack classes.
    #[arg(long, default_value_t = 4)]
    pub classes: usize,
    /// Records per class, benign included. Without it, sizes follow the reference capture.
    #[arg(long)]
    pub per_class: Option<usize>,
    /// Total records when --per-class is absent.
    #[arg(long, default_value_t = DEFAULT_TOTAL)]
    pub total: usize,
    #[arg(long, default_value_t = 10)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.0)]
    pub overlap: f64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ForestFlags {
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long)]
    pub sample_size: Option<usize>,
}

impl ForestFlags {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(t) = self.trees {
            cfg.forest.trees = t;
        }
        if let Some(s) = self.sample_size {
            cfg.forest.sample_size = s;
        }
    }
}

#[derive(Debug, Args)]
pub struct PsoFlags {
    #[arg(long)]
    pub population: Option<usize>,
    #[arg(long)]
    pub generations: Option<usize>,
    #[arg(long)]
    pub inertia: Option<f64>,
    #[arg(long)]
    pub c1: Option<f64>,
    #[arg(long)]
    pub c2: Option<f64>,
    #[arg(long)]
    pub v_max: Option<f64>,
    /// Start every particle at random instead of seeding one at the best uniform threshold.
    #[arg(long)]
    pub cold_start: bool,
}

impl PsoFlags {
    fn apply(&self, cfg: &mut RunConfig) {
        let p = &mut cfg.pso;
        if let Some(v) = self.population {
            p.population = v;
        }
        if let Some(v) = self.generations {
            p.generations = v;
        }
        if let Some(v) = self.inertia {
            p.inertia = v;
        }
        if let Some(v) = self.c1 {
            p.c1 = v;
        }
        if let Some(v) = self.c2 {
            p.c2 = v;
        }
        if let Some(v) = self.v_max {
            p.v_max = v;
        }
        if self.cold_start {
            p.warm_start = false;
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub forest: ForestFlags,
    /// Initial threshold of every entry.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Also grow a forest for benign traffic.
    #[arg(long)]
    pub benign_forest: bool,
    /// Name of the node that trained the model.
    #[arg(long, default_value = "")]
    pub node: String,
    /// Record the training time in the provenance.
    #[arg(long)]
    pub stamp_time: bool,
    /// Reuse the feature order and normalization of an existing model, so the
    /// result can be merged with it.
    #[arg(long, value_name = "MODEL", conflicts_with = "unit_range")]
    pub schema_from: Option<PathBuf>,
    /// Treat features as already scaled to [0, 1] instead of fitting min-max ranges.
    #[arg(long)]
    pub unit_range: bool,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Labeled tuning data. Attack rows of unmodeled classes are ignored.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Global-best fitness per generation.
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[command(flatten)]
    pub pso: PsoFlags,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    /// Predictions CSV, stdout when absent.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Add one raw score column per class.
    #[arg(short, long)]
    pub verbose: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Structured JSON report.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Text table, also printed to stdout.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Full-precision CSV summary.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub naive_threshold: Option<f64>,
    /// Zero-day classes to run, all attack classes when absent.
    #[arg(long, value_delimiter = ',')]
    pub scenarios: Option<Vec<String>>,
    /// Keep wall-clock timings in the JSON report (makes it run-dependent).
    #[arg(long)]
    pub timings: bool,
    #[command(flatten)]
    pub forest: ForestFlags,
    #[command(flatten)]
    pub pso: PsoFlags,
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    #[arg(long)]
    pub base: PathBuf,
    #[arg(long)]
    pub external: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ModelCopyArgs {
    #[arg(long, visible_alias = "model")]
    pub input: PathBuf,
    /// Destination, stdout when absent.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

impl Command {
    /// Folds command-specific flags into the configuration.
    pub fn apply(&self, cfg: &mut RunConfig) {
        match self {
            Command::Train(a) => {
                a.forest.apply(cfg);
                if a.threshold.is_some() {
                    cfg.threshold = a.threshold;
                }
            }
            Command::Optimize(a) => a.pso.apply(cfg),
            Command::Evaluate(a) => {
                a.forest.apply(cfg);
                a.pso.apply(cfg);
                if let Some(k) = a.folds {
                    cfg.protocol.folds = k;
                }
                if let Some(t) = a.naive_threshold {
                    cfg.protocol.naive_threshold = t;
                }
                if a.scenarios.is_some() {
                    cfg.protocol.scenarios = a.scenarios.clone();
                }
            }
            _ => {}
        }
    }

    pub fn run(&self, cfg: &RunConfig) -> Result<()> {
        match self {
            Command::GenData(a) => gen_data(a, cfg),
            Command::Train(a) => train(a, cfg),
            Command::Optimize(a) => optimize_model(a, cfg),
            Command::Classify(a) => classify(a, cfg),
            Command::Evaluate(a) => evaluate(a, cfg),
            Command::Merge(a) => merge(a),
            Command::Export(a) | Command::Import(a) => copy_model(a),
        }
    }
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (fs::canonicalize(a), fs::canonicalize(b)) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

fn refuse_overwrite(inputs: &[&Path], output: &Path) -> Result<()> {
    if let Some(clash) = inputs.iter().find(|i| same_file(i, output)) {
        return Err(Error::InvalidConfig(format!("output {} would overwrite an input", clash.display())));
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn csv_options(cfg: &RunConfig) -> CsvOptions {
    CsvOptions {
        label_column: cfg.data.label_column.clone(),
        drop_invalid_rows: cfg.data.drop_invalid_rows,
        ..CsvOptions::default()
    }
}

fn gen_data(a: &GenDataArgs, cfg: &RunConfig) -> Result<()> {
    let mut synth = match a.per_class {
        Some(n) => SyntheticConfig::balanced(a.classes, n, a.dim, cfg.seed),
        None if a.classes == DEFAULT_ATTACK_NAMES.len() => {
            SyntheticConfig::reference_proportions(a.total, a.dim, cfg.seed)
        }
        None => {
            return Err(Error::InvalidConfig(format!(
                "--per-class is required with --classes {} (reference proportions cover {} attacks)",
                a.classes,
                DEFAULT_ATTACK_NAMES.len()
            )))
        }
    };
    if a.classes == 0 {
        return Err(Error::InvalidConfig("--classes must be at least 1".into()));
    }
    synth.overlap = a.overlap;
    let dataset = gen_synthetic(&synth)?;
    let file = File::create(&a.output).map_err(|e| Error::io(&a.output, e))?;
    write_csv(io::BufWriter::new(file), &dataset.schema, &dataset.records)?;

    println!("wrote {} records to {} (seed {})", dataset.records.len(), a.output.display(), cfg.seed);
    for (class, n) in dataset.class_counts() {
        println!("  {class:<16} {n}");
    }
    Ok(())
}

fn train(a: &TrainArgs, cfg: &RunConfig) -> Result<()> {
    refuse_overwrite(&[&a.data], &a.output)?;
    let shared = a.schema_from.as_ref().map(load_model).transpose()?;
    let mut opts = csv_options(cfg);
    if let Some(m) = &shared {
        opts = opts.with_features(m.schema().feature_names.clone());
    }
    let dataset = load_csv(&a.data, &opts)?;
    let classes = dataset.attack_classes();
    if classes.is_empty() {
        return Err(Error::EmptyTrainingSet { class: None }.context("no attack class in dataset"));
    }
    let modeled: Vec<LabeledRecord> =
        dataset.records.iter().filter(|r| a.benign_forest || !is_benign(&r.label)).cloned().collect();
    let normalization = match &shared {
        Some(m) => m.schema().normalization.clone(),
        None if a.unit_range => NormalizationParams::unit(dataset.schema.num_features()),
        None => normalize_fit(&modeled)?,
    };
    let records = normalize_apply(&normalization, &modeled)?;

    let params = cfg.forest_params();
    let forests = train_per_class(&records, &classes, params, TrainOptions { benign_forest: a.benign_forest })?;
    let settings = BTreeMap::from([
        ("command".to_owned(), "train".to_owned()),
        ("data".to_owned(), a.data.display().to_string()),
        ("run_config".to_owned(), cfg.to_json()),
    ]);
    let provenance = Provenance {
        training_seed: cfg.seed,
        forest_params: params,
        source_node: a.node.clone(),
        created_at_unix: a
            .stamp_time
            .then(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)),
        benign_forest: a.benign_forest,
        settings,
        ..Default::default()
    };
    let schema = ModelSchema { feature_names: dataset.schema.feature_names.clone(), normalization };
    let meta = MetaClassifier::from_forests(forests, schema, provenance, cfg.initial_threshold())?;
    save_model(&meta, &a.output)?;

    println!(
        "trained {} forests ({} trees, sample size {}, seed {}) -> {}",
        meta.len(),
        params.num_trees,
        params.sample_size,
        cfg.seed,
        a.output.display()
    );
    let counts = dataset.class_counts();
    for name in meta.class_names() {
        println!("  {name:<16} {} records", counts.get(name).copied().unwrap_or(0));
    }
    Ok(())
}

/// Reads rows and reorders their features to match the model schema.
fn load_aligned(path: &Path, meta: &MetaClassifier, cfg: &RunConfig) -> Result<Vec<FeatureRow>> {
    let (names, rows) = load_feature_rows(path, &csv_options(cfg))?;
    let expected = &meta.schema().feature_names;
    if names.len() != expected.len() {
        return Err(Error::SchemaMismatch(format!(
            "model expects {} features, {} has {}",
            expected.len(),
            path.display(),
            names.len()
        )));
    }
    let order = expected
        .iter()
        .map(|n| {
            names
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| Error::SchemaMismatch(format!("feature `{n}` missing from {}", path.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    let norm = &meta.schema().normalization;
    rows.into_iter()
        .map(|r| {
            let raw: Vec<f64> = order.iter().map(|&i| r.features[i]).collect();
            Ok(FeatureRow { features: norm.apply_values(&raw)?, label: r.label })
        })
        .collect()
}

fn optimize_model(a: &OptimizeArgs, cfg: &RunConfig) -> Result<()> {
    refuse_overwrite(&[&a.model, &a.data], &a.output)?;
    if let Some(h) = &a.history {
        refuse_overwrite(&[&a.model, &a.data], h)?;
    }
    let meta = load_model(&a.model)?;
    let rows = load_aligned(&a.data, &meta, cfg)?;

    let (mut attack, mut benign, mut ignored) = (Vec::new(), Vec::new(), BTreeMap::<String, usize>::new());
    for (id, r) in rows.into_iter().enumerate() {
        let label = r.label.ok_or_else(|| Error::MissingColumn(cfg.data.label_column.clone()))?;
        let record = LabeledRecord { id, features: r.features, label };
        if is_benign(&record.label) && meta.class_index(&record.label).is_none() {
            benign.push(record);
        } else if meta.class_index(&record.label).is_some() {
            attack.push(record);
        } else {
            *ignored.entry(record.label).or_default() += 1;
        }
    }
    for (label, n) in &ignored {
        eprintln!("warning: ignoring {n} rows of unmodeled class `{label}`");
    }

    let unweighted = meta.set_weights(&vec![0.0; meta.len()])?;
    let ctx = FitnessContext::new(&unweighted, &attack, &benign)?;
    let pso = cfg.pso_config();
    let result = optimize(&pso, &ctx)?;
    let initial = ctx.fitness(&meta.thresholds())?;

    let tuned = unweighted.set_thresholds(&result.best_position)?;
    let mut validation = attack;
    validation.extend(benign);
    let weights = tuned.compute_weights(&validation)?;
    let tuned = tuned.set_weights(&weights)?;

    let mut provenance = tuned.provenance().clone();
    provenance.needs_reoptimization = false;
    provenance.settings.insert("optimize_data".into(), a.data.display().to_string());
    provenance.settings.insert("optimize_config".into(), cfg.to_json());
    provenance.settings.insert("optimize_seed".into(), cfg.seed.to_string());
    let tuned = tuned.with_provenance(provenance);
    save_model(&tuned, &a.output)?;

    if let Some(path) = &a.history {
        let mut text = String::from("generation,best_fitness\n");
        for (g, f) in result.history.iter().enumerate() {
            text.push_str(&format!("{g},{f}\n"));
        }
        write_text(path, &text)?;
    }

    println!(
        "fitness {:.4} -> {:.4} ({} particles, {} generations, seed {})",
        initial, result.best_fitness, pso.population, pso.generations, cfg.seed
    );
    for (e, w) in tuned.entries().iter().zip(&weights) {
        println!("  {:<16} threshold {:.4}  weight {:.4}", e.class_id.name, e.threshold, w);
    }
    println!("wrote {}", a.output.display());
    Ok(())
}

fn classify(a: &ClassifyArgs, cfg: &RunConfig) -> Result<()> {
    if let Some(out) = &a.output {
        refuse_overwrite(&[&a.model, &a.input], out)?;
    }
    let meta = load_model(&a.model)?;
    let rows = load_aligned(&a.input, &meta, cfg)?;
    let with_labels = rows.iter().any(|r| r.label.is_some());
    let scores = meta.score_batch(&rows.iter().map(|r| &*r.features).collect::<Vec<_>>())?;

    let sink: Box<dyn Write> = match &a.output {
        Some(p) => Box::new(io::BufWriter::new(File::create(p).map_err(|e| Error::io(p, e))?)),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["row".to_owned()];
    if with_labels {
        header.push(cfg.data.label_column.clone());
    }
    header.extend(["predicted".to_owned(), "score".to_owned()]);
    if a.verbose {
        header.extend(meta.class_names().iter().map(|c| format!("score_{c}")));
    }
    w.write_record(&header)?;

    for (i, (row, s)) in rows.iter().zip(&scores).enumerate() {
        let prediction = meta.decide(s);
        let mut cells = vec![i.to_string()];
        if with_labels {
            cells.push(row.label.clone().unwrap_or_default());
        }
        cells.push(prediction.label().to_owned());
        cells.push(match &prediction {
            Prediction::Known { score, .. } => score.to_string(),
            Prediction::Unknown => String::new(),
        });
        if a.verbose {
            cells.extend(s.iter().map(f64::to_string));
        }
        w.write_record(&cells)?;
    }
    w.flush().map_err(|e| Error::io(a.output.clone().unwrap_or_else(|| "<stdout>".into()), e))?;
    Ok(())
}

fn evaluate(a: &EvaluateArgs, cfg: &RunConfig) -> Result<()> {
    for out in [&a.output, &a.table, &a.csv].into_iter().flatten() {
        refuse_overwrite(&[&a.data], out)?;
    }
    let dataset = load_csv(&a.data, &csv_options(cfg))?;
    let config = ExperimentConfig {
        master_seed: cfg.seed,
        forest: cfg.forest_params(),
        pso: cfg.pso_config(),
        protocol: cfg.protocol_config(),
    };
    let report = run_experiment(&dataset, &config)?;
    let timings = report.timings.clone();
    let structured = if a.timings { report.clone() } else { report.without_timings() };

    let table = render_table(&report);
    if let Some(p) = &a.output {
        write_text(p, &render_json(&structured))?;
    }
    if let Some(p) = &a.table {
        write_text(p, &table)?;
    }
    if let Some(p) = &a.csv {
        write_text(p, &render_csv(&report))?;
    }
    print!("{table}");
    if let Some(t) = timings {
        eprintln!("{} cells in {} ms (seed {})", report.cells().count(), t.total_ms, cfg.seed);
    }
    Ok(())
}

fn merge(a: &MergeArgs) -> Result<()> {
    refuse_overwrite(&[&a.base, &a.external], &a.output)?;
    let base = load_model(&a.base)?;
    let external = load_model(&a.external)?;
    let merged = base.merge(&external)?;
    save_model(&merged, &a.output)?;
    println!("merged {} + {} classes -> {}", base.len(), external.len(), a.output.display());
    eprintln!("warning: thresholds were not re-tuned for the merged classes; run `isoswarm optimize` before use");
    Ok(())
}

fn copy_model(a: &ModelCopyArgs) -> Result<()> {
    let meta = load_model(&a.input)?;
    match &a.output {
        Some(p) => {
            refuse_overwrite(&[&a.input], p)?;
            save_model(&meta, p)
        }
        None => {
            let text = isoswarm::ensemble::export_model(&meta) + "\n";
            io::stdout().write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
        }
    }
}
