use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use depsym::dataset::{load_manifest, make_folds, write_fold_plan, write_manifest, Recording};
use depsym::eval::{
    bootstrap_csv, compare_all, crossval, read_predictions_file, render_table2, render_table4, report_csv,
    score_predictions, write_predictions_file, CrossValOptions, MetricsReport, DEFAULT_LEVEL, DEFAULT_RESAMPLES,
};
use depsym::features::{load_audio, mel_spectrogram, write_embedding_file};
use depsym::models::{
    build_model, load_model_spec, load_train_config, model_spec_to_string, train, train_config_to_string, Corpus,
    ModelSpec, TrainConfig, TrainLog,
};
use depsym::nn::write_checkpoint;
use depsym::seed::derive_seed;
use depsym::synth::{generate, SynthConfig};

mod record;

use record::Recorder;

const SPECTRO_STREAM: &str = "spectro";
const PREDICTIONS_FILE: &str = "predictions.csv";

#[derive(Parser)]
#[command(name = "depsym", version, about = "Depressive symptom detection from speech features")]
struct Cli {
    /// Root seed; overrides the seed in any config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for folds or files.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Log-mel spectrograms for every recording in a manifest.
    Features(FeaturesArgs),
    /// Synthetic dataset with planted symptom signal.
    Synth(SynthArgs),
    /// Speaker-independent k-fold cross-validation.
    Crossval(CrossvalArgs),
    /// Train one model on every recording of a manifest.
    Train(TrainArgs),
    /// Paired bootstrap comparison of two prediction sets.
    Compare(CompareArgs),
    /// Render result tables from saved predictions.
    Report(ReportArgs),
}

#[derive(Args)]
struct FeaturesArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Directory that relative audio paths resolve against; defaults to the manifest's.
    #[arg(long)]
    audio_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// TOML generator config; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// TOML model spec.
    #[arg(long)]
    model: PathBuf,
    /// TOML training config; defaults for the model family when omitted.
    #[arg(long)]
    train: Option<PathBuf>,
}

#[derive(Args)]
struct CrossvalArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Row label used in reports; the model file stem by default.
    #[arg(long)]
    label: Option<String>,
    /// Share of training speakers held out for validation logging.
    #[arg(long, default_value_t = 0.1)]
    val_fraction: f64,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct CompareArgs {
    /// Prediction file or a crossval output directory.
    a: PathBuf,
    b: PathBuf,
    #[arg(long, default_value_t = DEFAULT_RESAMPLES)]
    n: usize,
    /// Confidence level, as a fraction (0.95) or percent (95).
    #[arg(long, default_value_t = DEFAULT_LEVEL)]
    level: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Style {
    Table2,
    Table4,
}

#[derive(Args)]
struct ReportArgs {
    /// Prediction files or crossval output directories, one table row each.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = Style::Table2)]
    style: Style,
    /// With table4: fused systems; the positional inputs are the single models.
    #[arg(long)]
    fused: Vec<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode> {
    if cli.jobs == 0 {
        bail!("--jobs must be at least 1");
    }
    match &cli.command {
        Command::Features(a) => cmd_features(cli, a),
        Command::Synth(a) => cmd_synth(cli, a).map(|_| ExitCode::SUCCESS),
        Command::Crossval(a) => cmd_crossval(cli, a).map(|_| ExitCode::SUCCESS),
        Command::Train(a) => cmd_train(cli, a).map(|_| ExitCode::SUCCESS),
        Command::Compare(a) => cmd_compare(cli, a).map(|_| ExitCode::SUCCESS),
        Command::Report(a) => cmd_report(cli, a).map(|_| ExitCode::SUCCESS),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn parent_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn absolute(base: &Path, p: &Path) -> Result<PathBuf> {
    std::path::absolute(base.join(p)).with_context(|| format!("resolving {}", p.display()))
}

fn cmd_features(cli: &Cli, args: &FeaturesArgs) -> Result<ExitCode> {
    let mut rec = Recorder::new("features");
    rec.input(&args.manifest)?;
    let mut recordings = load_manifest(&args.manifest)?;
    let manifest_dir = parent_dir(&args.manifest);
    let audio_dir = args.audio_dir.clone().unwrap_or_else(|| manifest_dir.clone());
    let emb_dir = cli.out.join("emb").join(SPECTRO_STREAM);
    create_dir(&emb_dir)?;

    let extract = |r: &Recording| -> Result<PathBuf> {
        let audio = r
            .audio_ref
            .as_ref()
            .with_context(|| format!("recording `{}` has no audio path", r.recording_id))?;
        let audio = load_audio(&audio_dir.join(audio))?;
        let seq = mel_spectrogram(&audio.samples, audio.sample_rate)?.with_stream_name(SPECTRO_STREAM);
        let rel = PathBuf::from("emb").join(SPECTRO_STREAM).join(format!("{}.emb", r.recording_id));
        write_embedding_file(&seq, &cli.out.join(&rel))?;
        Ok(rel)
    };
    let results: Vec<Result<PathBuf>> = if cli.jobs > 1 {
        let chunk = recordings.len().div_ceil(cli.jobs).max(1);
        std::thread::scope(|s| {
            let handles: Vec<_> = recordings
                .chunks(chunk)
                .map(|part| s.spawn(|| part.iter().map(extract).collect::<Vec<_>>()))
                .collect();
            handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
        })
    } else {
        recordings.iter().map(extract).collect()
    };

    let mut failed = 0;
    for (r, res) in recordings.iter_mut().zip(results) {
        // The new manifest lives in the output directory, so existing references become absolute.
        if let Some(a) = &r.audio_ref {
            r.audio_ref = Some(absolute(&audio_dir, a)?);
        }
        for p in r.feature_refs.values_mut() {
            *p = absolute(&manifest_dir, p)?;
        }
        match res {
            Ok(rel) => {
                rec.output(&cli.out, &cli.out.join(&rel));
                r.feature_refs.insert(SPECTRO_STREAM.to_string(), rel);
            }
            Err(e) => {
                failed += 1;
                r.feature_refs.remove(SPECTRO_STREAM);
                eprintln!("failed: {}: {e:#}", r.recording_id);
            }
        }
    }
    let manifest = cli.out.join("manifest.csv");
    let f = fs::File::create(&manifest).with_context(|| format!("creating {}", manifest.display()))?;
    write_manifest(BufWriter::new(f), &recordings)?;
    rec.output(&cli.out, &manifest);
    rec.finish(&cli.out)?;
    println!(
        "{} of {} recordings extracted to {}",
        recordings.len() - failed,
        recordings.len(),
        emb_dir.display()
    );
    if failed > 0 {
        eprintln!("{failed} recording(s) failed");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_synth(cli: &Cli, args: &SynthArgs) -> Result<()> {
    let mut rec = Recorder::new("synth");
    let mut cfg = match &args.config {
        Some(path) => {
            rec.input(path)?;
            toml::from_str::<SynthConfig>(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))?
        }
        None => SynthConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let snapshot = toml::to_string(&cfg)?;
    rec.seed("seed", cfg.seed);
    rec.config("synth.toml", snapshot.clone());

    let data = generate(&cfg)?;
    create_dir(&cli.out)?;
    let manifest = data.write(&cli.out)?;
    for r in &data.recordings {
        for p in r.feature_refs.values() {
            rec.output(&cli.out, &cli.out.join(p));
        }
    }
    rec.output(&cli.out, &manifest);
    let snap_path = cli.out.join("synth.toml");
    write_text(&snap_path, &snapshot)?;
    rec.output(&cli.out, &snap_path);
    rec.finish(&cli.out)?;
    println!("{} recordings written to {}", data.recordings.len(), manifest.display());
    Ok(())
}

struct Setup {
    spec: ModelSpec,
    cfg: TrainConfig,
    corpus: Corpus,
    rec: Recorder,
}

/// Loads configs and features, applies the seed flag, and snapshots both configs.
fn setup(cli: &Cli, command: &str, args: &ModelArgs) -> Result<Setup> {
    let mut rec = Recorder::new(command);
    rec.input(&args.manifest)?;
    rec.input(&args.model)?;
    let spec = load_model_spec(&args.model)?;
    let mut cfg = match &args.train {
        Some(p) => {
            rec.input(p)?;
            load_train_config(p)?
        }
        None => TrainConfig::for_kind(spec.kind),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    spec.validate()?;
    rec.seed("seed", cfg.seed);
    rec.config("model.toml", model_spec_to_string(&spec)?);
    rec.config("train.toml", train_config_to_string(&cfg)?);

    let recordings = load_manifest(&args.manifest)?;
    let corpus = Corpus::load(recordings, &spec, &parent_dir(&args.manifest))?;
    log::info!(
        "{} recordings, {} segments",
        corpus.recordings.len(),
        corpus.total_segments()
    );
    create_dir(&cli.out)?;
    Ok(Setup { spec, cfg, corpus, rec })
}

fn write_configs(out: &Path, s: &mut Setup) -> Result<()> {
    for (name, text) in [
        ("model.toml", model_spec_to_string(&s.spec)?),
        ("train.toml", train_config_to_string(&s.cfg)?),
    ] {
        let p = out.join(name);
        write_text(&p, &text)?;
        s.rec.output(out, &p);
    }
    Ok(())
}

fn log_rows(out: &mut String, prefix: &str, log: &TrainLog) {
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    for e in &log.epochs {
        out.push_str(&format!(
            "{prefix}{},{:.6},{},{}\n",
            e.epoch,
            e.train_loss,
            opt(e.val_macro_f),
            opt(e.val_rmse)
        ));
    }
}

fn cmd_crossval(cli: &Cli, args: &CrossvalArgs) -> Result<()> {
    let mut s = setup(cli, "crossval", &args.model)?;
    let label = args.label.clone().unwrap_or_else(|| {
        args.model
            .model
            .file_stem()
            .map_or_else(|| "model".into(), |x| x.to_string_lossy().into_owned())
    });
    let fold_seed = derive_seed(s.cfg.seed, "folds");
    s.rec.seed("folds", fold_seed);
    let plan = make_folds(&s.corpus.recordings, args.folds, fold_seed)?;
    let opts = CrossValOptions {
        val_fraction: args.val_fraction,
        jobs: cli.jobs,
    };
    let out = crossval(&s.corpus, &plan, &s.spec, &s.cfg, &opts, &label)?;

    let dir = &cli.out;
    let folds_path = dir.join("folds.csv");
    let f = fs::File::create(&folds_path).with_context(|| format!("creating {}", folds_path.display()))?;
    write_fold_plan(BufWriter::new(f), &plan).with_context(|| format!("writing {}", folds_path.display()))?;
    s.rec.output(dir, &folds_path);

    let preds_path = dir.join(PREDICTIONS_FILE);
    write_predictions_file(&preds_path, &out.predictions)?;
    s.rec.output(dir, &preds_path);

    let ckpt_dir = dir.join("checkpoints");
    create_dir(&ckpt_dir)?;
    let mut log_csv = String::from("fold,head_mode,epoch,train_loss,val_macro_f,val_rmse\n");
    for run in &out.runs {
        let mode = run.head_mode.to_string().replace(':', "-");
        let path = ckpt_dir.join(format!("fold{}_{mode}.ckpt", run.fold));
        let f = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_checkpoint(BufWriter::new(f), &run.model.to_checkpoint(&s.cfg.optimizer))?;
        s.rec.output(dir, &path);
        s.rec.seed(&format!("fold{}/{}/model", run.fold, run.head_mode), run.model_seed);
        s.rec.seed(&format!("fold{}/{}/train", run.fold, run.head_mode), run.train_seed);
        log_rows(&mut log_csv, &format!("{},{},", run.fold, run.head_mode), &run.log);
    }
    let log_path = dir.join("train_log.csv");
    write_text(&log_path, &log_csv)?;
    s.rec.output(dir, &log_path);

    let table = render_table2(&[&out.report]);
    for (name, text) in [("report.csv", report_csv(&out.report)), ("report.txt", table.clone())] {
        let p = dir.join(name);
        write_text(&p, &text)?;
        s.rec.output(dir, &p);
    }
    write_configs(dir, &mut s)?;
    s.rec.finish(dir)?;
    print!("{table}");
    Ok(())
}

fn cmd_train(cli: &Cli, args: &TrainArgs) -> Result<()> {
    let mut s = setup(cli, "train", &args.model)?;
    let ids: Vec<String> = s.corpus.recordings.iter().map(|r| r.recording_id.clone()).collect();
    let data = s.corpus.training_set(&ids, s.cfg.severity_scale)?;
    let model_seed = derive_seed(s.cfg.seed, "model");
    s.rec.seed("model", model_seed);
    let mut model = build_model(&s.spec, model_seed)?;
    let log = train(&mut model, &data, None, &s.cfg)?;

    let dir = &cli.out;
    let path = dir.join("model.ckpt");
    let f = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    write_checkpoint(BufWriter::new(f), &model.to_checkpoint(&s.cfg.optimizer))?;
    s.rec.output(dir, &path);
    let mut log_csv = String::from("epoch,train_loss,val_macro_f,val_rmse\n");
    log_rows(&mut log_csv, "", &log);
    let log_path = dir.join("train_log.csv");
    write_text(&log_path, &log_csv)?;
    s.rec.output(dir, &log_path);
    let summary = format!(
        "trained {} parameters on {} segments; final loss {:.5}",
        model.num_params(),
        data.len(),
        log.epochs.last().map_or(f64::NAN, |e| e.train_loss)
    );
    drop(data);
    write_configs(dir, &mut s)?;
    s.rec.finish(dir)?;
    println!("{summary}");
    Ok(())
}

fn predictions_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(PREDICTIONS_FILE)
    } else {
        p.to_path_buf()
    }
}

fn load_report(p: &Path) -> Result<MetricsReport> {
    let path = predictions_path(p);
    let preds = read_predictions_file(&path)?;
    let label = p
        .file_stem()
        .map_or_else(|| path.display().to_string(), |x| x.to_string_lossy().into_owned());
    Ok(score_predictions(&preds, &label)?)
}

fn cmd_compare(cli: &Cli, args: &CompareArgs) -> Result<()> {
    let level = if args.level > 1.0 { args.level / 100.0 } else { args.level };
    let seed = cli.seed.unwrap_or(0);
    let mut rec = Recorder::new("compare");
    let (pa, pb) = (predictions_path(&args.a), predictions_path(&args.b));
    rec.input(&pa)?;
    rec.input(&pb)?;
    rec.seed("seed", seed);
    rec.config("compare", format!("n = {}\nlevel = {level}\n", args.n));
    let a = read_predictions_file(&pa)?;
    let b = read_predictions_file(&pb)?;
    let results = compare_all(&a, &b, args.n, level, seed)?;

    create_dir(&cli.out)?;
    let path = cli.out.join("compare.csv");
    write_text(&path, &bootstrap_csv(&results))?;
    rec.output(&cli.out, &path);
    rec.finish(&cli.out)?;
    println!("{:<12} {:>9} {:>20}  significant", "metric", "A - B", format!("{:.0}% CI", level * 100.0));
    for r in &results {
        println!(
            "{:<12} {:>9.3} {:>20}  {}",
            r.metric,
            r.mean_diff,
            format!("[{:.3}, {:.3}]", r.ci_low, r.ci_high),
            if r.significant() { "yes" } else { "no" }
        );
    }
    Ok(())
}

fn cmd_report(cli: &Cli, args: &ReportArgs) -> Result<()> {
    let mut rec = Recorder::new("report");
    let mut load = |paths: &[PathBuf]| -> Result<Vec<MetricsReport>> {
        paths
            .iter()
            .map(|p| {
                rec.input(&predictions_path(p))?;
                load_report(p)
            })
            .collect()
    };
    let singles = load(&args.inputs)?;
    let fused = load(&args.fused)?;
    let table = match args.style {
        Style::Table2 => {
            let all: Vec<&MetricsReport> = singles.iter().chain(&fused).collect();
            render_table2(&all)
        }
        Style::Table4 => {
            if fused.is_empty() {
                bail!("table4 needs at least one --fused input");
            }
            render_table4(&fused.iter().collect::<Vec<_>>(), &singles.iter().collect::<Vec<_>>())
        }
    };
    create_dir(&cli.out)?;
    let path = cli.out.join("report.txt");
    write_text(&path, &table)?;
    rec.output(&cli.out, &path);
    rec.finish(&cli.out)?;
    print!("{table}");
    Ok(())
}
