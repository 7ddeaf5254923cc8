use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use tempfile::TempDir;

fn depsym(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_depsym"))
        .args(args)
        .output()
        .expect("spawn depsym")
}

fn ok(args: &[&str]) -> String {
    let out = depsym(args);
    assert!(
        out.status.success(),
        "depsym {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL_SYNTH: &str = "n_speakers = 30\nseconds_per_recording = 30.0\nsignal_strength = 3.0\nseed = 5\n[[stream]]\nname = \"ssl\"\ndim = 8\n";
const MULTI_MODEL: &str = "kind = \"single_stream\"\nhead_mode = \"multi_task\"\n[[stream]]\nname = \"ssl\"\ndim = 8\n";
const FAST_TRAIN: &str = "epochs = 2\n";

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        Workspace {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn file(&self, rel: &str, text: &str) -> PathBuf {
        let p = self.path(rel);
        fs::write(&p, text).unwrap();
        p
    }

    /// Synthetic dataset under `data_dir`, generated from `config` with optional extra flags.
    fn synth(&self, data_dir: &str, config: &str, extra: &[&str]) -> PathBuf {
        let cfg = self.file(&format!("{data_dir}.toml"), config);
        let out = self.path(data_dir);
        let mut args = vec!["synth", "--config", s(&cfg), "--out", s(&out)];
        args.extend_from_slice(extra);
        ok(&args);
        out.join("manifest.csv")
    }

    fn crossval(&self, manifest: &Path, model: &str, out: &str, seed: &str) -> PathBuf {
        let model = self.file(&format!("{out}.model.toml"), model);
        let train = self.file("train.toml", FAST_TRAIN);
        let out = self.path(out);
        ok(&[
            "crossval", "--manifest", s(manifest), "--model", s(&model), "--train", s(&train), "--out", s(&out),
            "--seed", seed,
        ]);
        out
    }
}

#[test]
fn synth_seed_flag_overrides_config() {
    let ws = Workspace::new();
    let manifest = ws.synth("data", SMALL_SYNTH, &["--seed", "99"]);
    let snapshot = fs::read_to_string(manifest.parent().unwrap().join("synth.toml")).unwrap();
    assert!(snapshot.contains("seed = 99"), "{snapshot}");
    let record = fs::read_to_string(ws.path("data/run.toml")).unwrap();
    assert!(record.contains("manifest.csv"));
    assert!(record.contains("emb/ssl/spk0000_r0.emb"));
}

#[test]
fn synth_invalid_prior_writes_nothing() {
    let ws = Workspace::new();
    let cfg = ws.file(
        "bad.toml",
        "symptom_priors = [1.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5]\n",
    );
    let out = ws.path("never");
    let res = depsym(&["synth", "--config", s(&cfg), "--out", s(&out)]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("prior"));
    assert!(!out.exists());
}

#[test]
fn synth_default_config_is_fast() {
    let ws = Workspace::new();
    let out = ws.path("default");
    let start = Instant::now();
    let stdout = ok(&["synth", "--out", s(&out)]);
    assert!(start.elapsed().as_secs() < 30);
    assert!(stdout.starts_with("200 recordings"), "{stdout}");
}

#[test]
fn crossval_multitask_report_and_determinism() {
    let ws = Workspace::new();
    let manifest = ws.synth("data", SMALL_SYNTH, &[]);
    let a = ws.crossval(&manifest, MULTI_MODEL, "a", "3");
    let report = fs::read_to_string(a.join("report.txt")).unwrap();
    for abbr in ["ASad", "RSad", "InTen", "RSlp", "RApp", "ConD", "Lass", "IFeel", "PesT", "SuiT", "MADRS(RMSE)"] {
        assert!(report.contains(abbr), "{abbr} missing:\n{report}");
    }
    let ckpts = fs::read_dir(a.join("checkpoints")).unwrap().count();
    assert_eq!(ckpts, 5, "one multi-task run per fold");
    for f in ["predictions.csv", "report.csv", "folds.csv", "train_log.csv", "model.toml", "train.toml", "run.toml"] {
        assert!(a.join(f).exists(), "{f}");
    }

    let b = ws.crossval(&manifest, MULTI_MODEL, "b", "3");
    for f in ["predictions.csv", "report.csv", "folds.csv", "checkpoints/fold2_multi_task.ckpt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let run_id = |d: &Path| {
        let t: toml::Table = fs::read_to_string(d.join("run.toml")).unwrap().parse().unwrap();
        t["run_id"].as_str().unwrap().to_string()
    };
    assert_eq!(run_id(&a), run_id(&b));

    let c = ws.crossval(&manifest, MULTI_MODEL, "c", "4");
    assert_ne!(run_id(&a), run_id(&c));
}

#[test]
fn crossval_single_task_trains_eleven_models_per_fold() {
    let ws = Workspace::new();
    let manifest = ws.synth("data", SMALL_SYNTH, &[]);
    let model = MULTI_MODEL.replace("multi_task", "severity");
    let out = ws.crossval(&manifest, &model, "single", "1");
    let ckpts = fs::read_dir(out.join("checkpoints")).unwrap().count();
    assert_eq!(ckpts, 55);
    assert!(out.join("checkpoints/fold0_symptom-SuiT.ckpt").exists());
    assert!(out.join("checkpoints/fold4_severity.ckpt").exists());
}

#[test]
fn crossval_missing_stream_names_recording_and_stream() {
    let ws = Workspace::new();
    let manifest = ws.synth("data", SMALL_SYNTH, &[]);
    fs::remove_file(ws.path("data/emb/ssl/spk0007_r0.emb")).unwrap();
    let model = ws.file("m.toml", MULTI_MODEL);
    let out = depsym(&["crossval", "--manifest", s(&manifest), "--model", s(&model), "--out", s(&ws.path("x"))]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("spk0007_r0") && err.contains("ssl"), "{err}");
}

#[test]
fn compare_identical_and_strong_vs_null() {
    let ws = Workspace::new();
    let cfg = SMALL_SYNTH.replace("n_speakers = 30", "n_speakers = 150");
    let strong = ws.synth("strong", &cfg, &[]);
    let null = ws.synth("null", &cfg.replace("signal_strength = 3.0", "signal_strength = 0.0"), &[]);
    let a = ws.crossval(&strong, MULTI_MODEL, "a", "7");
    let b = ws.crossval(&null, MULTI_MODEL, "b", "7");

    let same = ws.path("same");
    ok(&["compare", s(&a), s(&a), "--out", s(&same)]);
    let csv = fs::read_to_string(same.join("compare.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 11);
    for row in &rows {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(&f[1..4], &["0.000000", "0.000000", "0.000000"], "{row}");
        assert_eq!(f[4], "10000");
        assert_eq!(f[5], "0.95");
        assert_eq!(f[7], "false");
    }

    let diff = ws.path("diff");
    ok(&["compare", s(&a), s(&b), "--n", "2000", "--out", s(&diff)]);
    let csv = fs::read_to_string(diff.join("compare.csv")).unwrap();
    let significant: Vec<&str> = csv.lines().filter(|l| l.ends_with(",true") && !l.starts_with("MADRS")).collect();
    assert!(significant.len() >= 5, "{csv}");
    assert!(significant.iter().all(|l| !l.split(',').nth(1).unwrap().starts_with('-')), "{csv}");
}

#[test]
fn compare_rejects_mismatched_coverage() {
    let ws = Workspace::new();
    let m1 = ws.synth("d1", SMALL_SYNTH, &[]);
    let m2 = ws.synth("d2", &SMALL_SYNTH.replace("n_speakers = 30", "n_speakers = 25"), &[]);
    let a = ws.crossval(&m1, MULTI_MODEL, "a", "1");
    let b = ws.crossval(&m2, MULTI_MODEL, "b", "1");
    let out = depsym(&["compare", s(&a), s(&b), "--out", s(&ws.path("c"))]);
    assert!(!out.status.success());
}

#[test]
fn train_and_report_table4() {
    let ws = Workspace::new();
    let cfg = "n_speakers = 20\nseconds_per_recording = 20.0\nseed = 2\n[[stream]]\nname = \"x\"\ndim = 6\n[[stream]]\nname = \"y\"\ndim = 4\n";
    let manifest = ws.synth("data", cfg, &[]);
    let single = |name: &str, dim: usize| {
        format!("kind = \"single_stream\"\nhead_mode = \"multi_task\"\n[[stream]]\nname = \"{name}\"\ndim = {dim}\n")
    };
    let fusion = "kind = \"fusion\"\nhead_mode = \"multi_task\"\n[[stream]]\nname = \"x\"\ndim = 6\n[[stream]]\nname = \"y\"\ndim = 4\n";
    let x = ws.crossval(&manifest, &single("x", 6), "x", "1");
    let y = ws.crossval(&manifest, &single("y", 4), "y", "1");
    let xy = ws.crossval(&manifest, fusion, "xy", "1");

    let stdout = ok(&["report", s(&x), s(&y), "--style", "table4", "--fused", s(&xy), "--out", s(&ws.path("r"))]);
    assert!(stdout.contains("xy"), "{stdout}");
    assert!(stdout.contains('↑') || stdout.contains('↓') || stdout.contains("MADRS"), "{stdout}");
    let t2 = ok(&["report", s(&x.join("predictions.csv")), "--out", s(&ws.path("r2"))]);
    assert!(t2.contains("MADRS(RMSE)"));
    assert!(!depsym(&["report", s(&x), "--style", "table4", "--out", s(&ws.path("r3"))]).status.success());

    let model = ws.file("fusion.toml", fusion);
    let out = ws.path("trained");
    ok(&["train", "--manifest", s(&manifest), "--model", s(&model), "--out", s(&out)]);
    assert!(out.join("model.ckpt").exists());
    assert_eq!(fs::read_to_string(out.join("train_log.csv")).unwrap().lines().count(), 6);
}

fn write_wav(path: &Path, seconds: f64, freq: f64) {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: 16_000,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).unwrap();
    let n = (seconds * 16_000.0) as usize;
    for i in 0..n {
        let t = i as f64 / 16_000.0;
        w.write_sample((8000.0 * (std::f64::consts::TAU * freq * t).sin()) as i16).unwrap();
    }
    w.finalize().unwrap();
}

fn audio_manifest(ws: &Workspace) -> PathBuf {
    let audio = ws.path("audio");
    fs::create_dir_all(&audio).unwrap();
    let mut text = String::from("recording_id,speaker_id,audio_path,s1,s2,s3,s4,s5,s6,s7,s8,s9,s10,madrs_total\n");
    for (i, f) in [220.0, 440.0, 880.0].iter().enumerate() {
        write_wav(&audio.join(format!("r{i}.wav")), 1.0, *f);
        text.push_str(&format!("r{i},spk{i},audio/r{i}.wav,2,0,0,0,0,0,0,0,0,0,2\n"));
    }
    ws.file("manifest.csv", &text)
}

#[test]
fn features_extracts_spectrograms() {
    let ws = Workspace::new();
    let manifest = audio_manifest(&ws);
    let out = ws.path("feat");
    ok(&["features", "--manifest", s(&manifest), "--out", s(&out)]);
    let m = fs::read_to_string(out.join("manifest.csv")).unwrap();
    assert!(m.lines().next().unwrap().ends_with("emb:spectro"), "{m}");
    let seq = depsym::features::read_embedding_file(&out.join("emb/spectro/r1.emb")).unwrap();
    assert_eq!(seq.dim(), 80);
    assert_eq!(seq.frames(), (16_000 - 400) / 160 + 1);
    let rec = depsym::dataset::load_manifest(&out.join("manifest.csv")).unwrap();
    assert!(rec[0].audio_ref.as_ref().unwrap().is_absolute());

    let again = ws.path("feat2");
    ok(&["features", "--manifest", s(&manifest), "--out", s(&again), "--jobs", "2"]);
    for i in 0..3 {
        let f = format!("emb/spectro/r{i}.emb");
        assert_eq!(fs::read(out.join(&f)).unwrap(), fs::read(again.join(&f)).unwrap());
    }
}

#[test]
fn features_partial_failure_exits_nonzero() {
    let ws = Workspace::new();
    let manifest = audio_manifest(&ws);
    fs::write(ws.path("audio/r1.wav"), b"RIFF\x10\x00\x00\x00WAVEjunk").unwrap();
    let out = ws.path("feat");
    let res = depsym(&["features", "--manifest", s(&manifest), "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(1));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("r1"), "{err}");
    assert!(out.join("emb/spectro/r0.emb").exists());
    assert!(out.join("emb/spectro/r2.emb").exists());
    assert!(!out.join("emb/spectro/r1.emb").exists());
}
