use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use eeatc::dataset::{
    assemble_features, assemble_inputs, split_and_normalize, FeatureSpec, NormalizeScope, SampleRecord, TARGET,
};
use eeatc::ingest::{clean_records, parse_csv, write_canonical_csv, CleaningReport, DeploymentMode, ParseReport};
use eeatc::metrics::{mae, MetricPair};
use eeatc::nanny::BackboneKind;
use eeatc::parallel::with_threads;
use eeatc::pipeline::{eeatc_predict_traced, feature_sweep, train_model, CalibrationModel, MetricSpace, ModelKind};
use eeatc::report::{emit_report, ReportFormat};
use eeatc::synth::{generate, Scenario, SynthConfig};
use serde::{Deserialize, Serialize};

use crate::args::{Cli, Command, ModelArgs, SplitArgs};
use crate::config::{RunConfig, SeedSource};
use crate::error::{CliError, CliResult};
use crate::output::OutDir;

pub fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = RunConfig::load(cli.common.config.as_deref())?;
    if let Some(dir) = cli.common.out_dir {
        cfg.out_dir = dir;
    }
    if let Some(t) = cli.common.threads {
        cfg.threads = Some(t);
    }
    if cfg.threads == Some(0) {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    let source = cfg.resolve_seed(cli.common.seed)?;
    match cli.command {
        Command::Ingest { input, mode } => ingest(cfg, source, input, mode),
        Command::Train {
            input,
            model,
            features,
            split,
            model_args,
        } => train(cfg, source, input, &model, features, &split, &model_args),
        Command::Predict { model, input } => predict(cfg, source, &model, &input),
        Command::Evaluate {
            model,
            input,
            split,
            metric_space,
        } => evaluate(cfg, source, &model, &input, split.as_deref(), metric_space),
        Command::Sweep {
            input,
            scenario,
            n,
            features,
            models,
            repetitions,
            metric_space,
            keep_predictions,
            split,
            model_args,
        } => {
            if let Some(r) = repetitions {
                cfg.repetitions = r;
            }
            if !features.is_empty() {
                cfg.features = features.iter().map(|f| parse(f)).collect::<CliResult<_>>()?;
            }
            if !models.is_empty() {
                cfg.models = models.iter().map(|m| parse(m)).collect::<CliResult<_>>()?;
            }
            if let Some(m) = metric_space {
                cfg.metric_space = parse(&m)?;
            }
            cfg.keep_predictions |= keep_predictions;
            apply_split(&mut cfg, &split)?;
            apply_model(&mut cfg, &model_args)?;
            sweep(cfg, source, input, scenario, n)
        }
        Command::Synth { scenario, n, resolution } => {
            if let Some(s) = scenario {
                cfg.synth.scenario = parse(&s)?;
            }
            if let Some(n) = n {
                cfg.synth.n = n;
            }
            if let Some(r) = resolution {
                cfg.synth.resolution = r;
            }
            synth(cfg, source)
        }
    }
}

fn parse<T: FromStr<Err = eeatc::Error>>(s: &str) -> CliResult<T> {
    s.parse().map_err(CliError::from)
}

fn apply_split(cfg: &mut RunConfig, args: &SplitArgs) -> CliResult<()> {
    if let Some(f) = args.train_fraction {
        cfg.train_fraction = f;
    }
    if let Some(s) = &args.normalize_scope {
        cfg.normalize_scope = parse::<NormalizeScope>(s)?;
    }
    Ok(())
}

fn apply_model(cfg: &mut RunConfig, args: &ModelArgs) -> CliResult<()> {
    let f = &mut cfg.forest;
    if let Some(v) = args.n_trees {
        f.n_trees = v;
        cfg.nanny.forest.n_trees = v;
    }
    if let Some(v) = args.mtry {
        f.mtry = Some(v);
    }
    if let Some(v) = args.min_samples_leaf {
        f.min_samples_leaf = v;
        cfg.nanny.forest.min_samples_leaf = v;
    }
    if let Some(v) = args.max_depth {
        f.max_depth = Some(v);
        cfg.nanny.forest.max_depth = Some(v);
    }
    if let Some(b) = &args.nanny_backbone {
        cfg.nanny.backbone = match b.as_str() {
            "forest" => BackboneKind::Forest,
            "linear" => BackboneKind::Linear,
            other => return Err(CliError::Usage(format!("unknown nanny backbone `{other}`"))),
        };
    }
    if let Some(h) = args.nanny_holdout {
        cfg.nanny_holdout = Some(h);
    }
    Ok(())
}

fn require_inputs(paths: &[PathBuf]) -> CliResult<()> {
    match paths.iter().find(|p| !p.is_file()) {
        Some(p) => Err(CliError::Usage(format!("input {} does not exist", p.display()))),
        None => Ok(()),
    }
}

fn single_input(flag: Option<PathBuf>, cfg: &mut RunConfig, command: &str) -> CliResult<PathBuf> {
    let path = flag
        .or_else(|| cfg.input.first().cloned())
        .ok_or_else(|| CliError::Usage(format!("{command} needs --input")))?;
    require_inputs(std::slice::from_ref(&path))?;
    cfg.input = vec![path.clone()];
    Ok(path)
}

fn read_records(path: &Path, cfg: &RunConfig) -> CliResult<(Vec<SampleRecord>, ParseReport)> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(parse_csv(BufReader::new(file), &cfg.mapping)?)
}

fn read_model(path: &Path) -> CliResult<CalibrationModel> {
    require_inputs(&[path.to_path_buf()])?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(CalibrationModel::from_json(&text)?)
}

fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

#[derive(Serialize)]
struct DropReport<'a> {
    input: String,
    parse: &'a ParseReport,
    cleaning: &'a CleaningReport,
}

fn ingest(mut cfg: RunConfig, source: SeedSource, input: Vec<PathBuf>, mode: Option<String>) -> CliResult<()> {
    if !input.is_empty() {
        cfg.input = input;
    }
    if cfg.input.is_empty() {
        return Err(CliError::Usage("ingest needs --input".into()));
    }
    if let Some(m) = mode {
        cfg.cleaning.mode = match m.as_str() {
            "mobile" => DeploymentMode::Mobile,
            "stationary" => DeploymentMode::Stationary,
            other => return Err(CliError::Usage(format!("unknown mode `{other}`"))),
        };
    }
    cfg.cleaning.validate()?;
    cfg.mapping.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    require_inputs(&cfg.input)?;
    let out = OutDir::create(&cfg.out_dir)?;
    for path in &cfg.input {
        let (records, parsed) = read_records(path, &cfg)?;
        let (clean, report) = clean_records(&records, &cfg.cleaning)?;
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "input".into());
        let written = out.write_with(&format!("{stem}.clean.csv"), |w| Ok(write_canonical_csv(&clean, w)?))?;
        out.write_json(
            &format!("{stem}.drops.json"),
            &DropReport {
                input: file_label(path),
                parse: &parsed,
                cleaning: &report,
            },
        )?;
        println!(
            "{}: {} rows, {} rejected timestamps, {} cell warnings, {} buckets, {} kept -> {}",
            path.display(),
            parsed.rows,
            parsed.rejected_timestamps,
            parsed.cell_warnings,
            report.bucketed,
            report.output,
            written.display()
        );
    }
    out.write_manifest("ingest", &cfg, source, &[])
}

/// Timestamps of the rows on each side of a `train` split.
#[derive(Debug, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub train_fraction: f64,
    pub normalize_scope: NormalizeScope,
    pub train: Vec<i64>,
    pub test: Vec<i64>,
}

#[derive(Serialize)]
struct TrainSummary {
    model: String,
    features: FeatureSpec,
    train: MetricPair,
    test: MetricPair,
}

fn train(
    mut cfg: RunConfig,
    source: SeedSource,
    input: Option<PathBuf>,
    model: &str,
    features: Option<String>,
    split: &SplitArgs,
    model_args: &ModelArgs,
) -> CliResult<()> {
    let kind: ModelKind = parse(model)?;
    if let Some(f) = features {
        cfg.train_features = parse(&f)?;
    }
    apply_split(&mut cfg, split)?;
    apply_model(&mut cfg, model_args)?;
    let path = single_input(input, &mut cfg, "train")?;
    let out = OutDir::create(&cfg.out_dir)?;

    let (records, _) = read_records(&path, &cfg)?;
    let raw = assemble_features(&records, &cfg.train_features)?;
    let (train, test, _) = split_and_normalize(&raw, cfg.train_fraction, cfg.seed(), cfg.normalize_scope)?;
    let fitted = train_model(&train, kind, &cfg.train_config())?;
    let summary = TrainSummary {
        model: kind.to_string(),
        features: cfg.train_features.clone(),
        train: MetricPair::compute(&fitted.predict(&train.features())?, &train.y)?,
        test: MetricPair::compute(&fitted.predict(&test.features())?, &test.y)?,
    };

    out.write_text("model.json", &(fitted.to_json()? + "\n"))?;
    out.write_json(
        "split.json",
        &SplitManifest {
            seed: cfg.seed(),
            train_fraction: cfg.train_fraction,
            normalize_scope: cfg.normalize_scope,
            train: train.timestamps.clone(),
            test: test.timestamps.clone(),
        },
    )?;
    out.write_json("train_metrics.json", &summary)?;
    println!(
        "{} [{}]: train R2 {:.4} RMSE {:.4}; test R2 {:.4} RMSE {:.4} (normalized units)",
        summary.model, summary.features, summary.train.r2, summary.train.rmse, summary.test.r2, summary.test.rmse
    );
    out.write_manifest("train", &cfg, source, &[])
}

fn predict(mut cfg: RunConfig, source: SeedSource, model_path: &Path, input: &Path) -> CliResult<()> {
    let model = read_model(model_path)?;
    let input = single_input(Some(input.to_path_buf()), &mut cfg, "predict")?;
    let out = OutDir::create(&cfg.out_dir)?;
    let (records, _) = read_records(&input, &cfg)?;
    let features = assemble_inputs(&records, model.spec())?;
    let y_scale = match model.norm() {
        Some(n) => Some(n.get(TARGET)?),
        None => None,
    };
    let to_raw = |v: f64| y_scale.map_or(v, |s| v * s.std + s.mean);
    let (y_hat, e_hat) = match &model {
        CalibrationModel::Eeatc(m) => {
            let (y, e) = eeatc_predict_traced(m, &features)?;
            let e: Vec<f64> = e.into_iter().map(|v| y_scale.map_or(v, |s| v * s.std)).collect();
            (y, Some(e))
        }
        m => (m.predict(&features)?, None),
    };
    let y_hat: Vec<f64> = y_hat.into_iter().map(to_raw).collect();
    let written = out.write_with("predictions.csv", |w| {
        write_predictions(w, &features.timestamps, &y_hat, e_hat.as_deref()).map_err(|e| CliError::io(Path::new("predictions.csv"), e))
    })?;
    println!("{} predictions -> {}", y_hat.len(), written.display());
    cfg.train_features = model.spec().clone();
    out.write_manifest("predict", &cfg, source, &[])
}

fn write_predictions(w: &mut dyn Write, ts: &[i64], y: &[f64], e: Option<&[f64]>) -> std::io::Result<()> {
    match e {
        Some(_) => writeln!(w, "timestamp,y_hat,e_hat")?,
        None => writeln!(w, "timestamp,y_hat")?,
    }
    for (i, (t, v)) in ts.iter().zip(y).enumerate() {
        match e {
            Some(e) => writeln!(w, "{t},{v},{}", e[i])?,
            None => writeln!(w, "{t},{v}")?,
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalSummary {
    model: String,
    features: FeatureSpec,
    metric_space: MetricSpace,
    n: usize,
    r2: f64,
    rmse: f64,
    mae: f64,
}

fn evaluate(
    mut cfg: RunConfig,
    source: SeedSource,
    model_path: &Path,
    input: &Path,
    split: Option<&Path>,
    metric_space: Option<String>,
) -> CliResult<()> {
    if let Some(m) = metric_space {
        cfg.metric_space = parse(&m)?;
    }
    let model = read_model(model_path)?;
    let input = single_input(Some(input.to_path_buf()), &mut cfg, "evaluate")?;
    if let Some(s) = split {
        require_inputs(&[s.to_path_buf()])?;
    }
    let out = OutDir::create(&cfg.out_dir)?;
    let (records, _) = read_records(&input, &cfg)?;
    let mut ds = assemble_features(&records, model.spec())?;
    if let Some(s) = split {
        let text = std::fs::read_to_string(s).map_err(|e| CliError::io(s, e))?;
        let manifest: SplitManifest =
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid split file: {e}")))?;
        let keep: BTreeSet<i64> = manifest.test.into_iter().collect();
        let rows: Vec<usize> = (0..ds.n_rows()).filter(|&i| keep.contains(&ds.timestamps[i])).collect();
        if rows.is_empty() {
            return Err(CliError::Data(eeatc::Error::EmptyInput));
        }
        ds = ds.select_rows(&rows);
    }
    let (pred, truth) = match (cfg.metric_space, model.norm()) {
        (MetricSpace::Normalized, Some(n)) => {
            let stats = n.get(TARGET)?;
            let y = ds.y.iter().map(|v| (v - stats.mean) / stats.std).collect();
            (model.predict(&ds.features())?, y)
        }
        _ => (model.predict_raw(&ds.features())?, ds.y.clone()),
    };
    let pair = MetricPair::compute(&pred, &truth)?;
    let summary = EvalSummary {
        model: model.kind().to_string(),
        features: model.spec().clone(),
        metric_space: cfg.metric_space,
        n: pair.n,
        r2: pair.r2,
        rmse: pair.rmse,
        mae: mae(&pred, &truth)?,
    };
    out.write_json("metrics.json", &summary)?;
    println!(
        "{} [{}] on {} rows: R2 {:.4} RMSE {:.4} MAE {:.4}",
        summary.model, summary.features, summary.n, summary.r2, summary.rmse, summary.mae
    );
    cfg.train_features = model.spec().clone();
    out.write_manifest("evaluate", &cfg, source, &[])
}

fn sweep(
    mut cfg: RunConfig,
    source: SeedSource,
    input: Option<PathBuf>,
    scenario: Option<String>,
    n: Option<usize>,
) -> CliResult<()> {
    let (records, name) = if let Some(s) = scenario {
        cfg.synth.scenario = parse::<Scenario>(&s)?;
        if let Some(n) = n {
            cfg.synth.n = n;
        }
        cfg.input.clear();
        let data = synth_data(&cfg)?;
        (data.records, format!("synth:{s}:n={}:seed={}", cfg.synth.n, cfg.seed()))
    } else {
        let path = single_input(input, &mut cfg, "sweep")?;
        (read_records(&path, &cfg)?.0, file_label(&path))
    };
    let out = OutDir::create(&cfg.out_dir)?;
    let sc = cfg.sweep_config();
    let report = with_threads(cfg.threads, || feature_sweep(&records, &sc, &name))??;
    let table = emit_report(&report, ReportFormat::Table)?;
    out.write_text("report.txt", &table)?;
    out.write_text("report.mach", &emit_report(&report, ReportFormat::Machine)?)?;
    print!("{table}");
    out.write_manifest("sweep", &cfg, source, &report.seeds)
}

fn synth_data(cfg: &RunConfig) -> CliResult<eeatc::synth::SynthOutput> {
    let mut sc = SynthConfig::scenario(cfg.synth.scenario, cfg.synth.n, cfg.seed());
    sc.resolution = cfg.synth.resolution;
    Ok(generate(&sc)?)
}

fn synth(cfg: RunConfig, source: SeedSource) -> CliResult<()> {
    let out = OutDir::create(&cfg.out_dir)?;
    let data = synth_data(&cfg)?;
    let written = out.write_with("synth.csv", |w| Ok(write_canonical_csv(&data.records, w)?))?;
    out.write_with("synth_truth.csv", |w| {
        let mut body = String::from("timestamp,sigma\n");
        for (r, s) in data.records.iter().zip(&data.sigma) {
            body.push_str(&format!("{},{}\n", r.timestamp, s));
        }
        w.write_all(body.as_bytes()).map_err(|e| CliError::io(Path::new("synth_truth.csv"), e))
    })?;
    println!("{} records -> {}", data.records.len(), written.display());
    out.write_manifest("synth", &cfg, source, &[])
}
