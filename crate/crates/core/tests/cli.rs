//! End-to-end runs of the `rydberg-ode` binary on small configurations.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rydberg_ode::checkpoint::Checkpoint;
use rydberg_ode::commands::{self, ExportSample};
use rydberg_ode::export::Violation;
use rydberg_ode::noise::robustness_eval;
use rydberg_ode::seed;
use rydberg_ode::simulator::{evolve, perturb, predict, EvolutionConfig, NoiseSpec};
use rydberg_ode::Error;
use tempfile::TempDir;

const SMALL: &str = r#"
seed = 7

[dataset.blobs]
n_samples = 30

[training]
iterations = 3

[noise]
ensemble = 4
"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_rydberg-ode"));
    c.env_remove("RUST_LOG");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fails(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    String::from_utf8(out.stderr).unwrap()
}

fn small_config(dir: &Path, extra: &str) -> PathBuf {
    let p = dir.join("small.toml");
    fs::write(&p, format!("{SMALL}{extra}")).unwrap();
    p
}

/// Trains the small configuration into `dir/run` and returns that directory.
fn trained(dir: &Path) -> PathBuf {
    let cfg = small_config(dir, "");
    ok(dir, &["--config", cfg.to_str().unwrap(), "--out", "run", "train"]);
    dir.join("run")
}

#[test]
fn train_writes_all_artifacts_and_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let run_dir = trained(tmp.path());
    for f in ["checkpoint.json", "history.csv", "metrics.json", "train.csv", "test.csv"] {
        assert!(run_dir.join(f).is_file(), "{f}");
    }
    let ckpt = Checkpoint::load(&run_dir.join("checkpoint.json")).unwrap();
    assert_eq!(ckpt.model().unwrap().n_trainable(), 20);
    assert_eq!(fs::read_to_string(run_dir.join("history.csv")).unwrap().lines().count(), 4);

    let cfg = tmp.path().join("small.toml");
    ok(tmp.path(), &["--config", cfg.to_str().unwrap(), "--out", "again", "train"]);
    for f in ["checkpoint.json", "history.csv", "metrics.json"] {
        assert_eq!(fs::read(run_dir.join(f)).unwrap(), fs::read(tmp.path().join("again").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn eval_on_training_split_matches_history() {
    let tmp = TempDir::new().unwrap();
    let run_dir = trained(tmp.path());
    let ckpt = Checkpoint::load(&run_dir.join("checkpoint.json")).unwrap();
    ok(tmp.path(), &["--out", "eval", "eval", "--checkpoint", "run/checkpoint.json", "--data", "run/train.csv"]);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("eval/metrics.json")).unwrap()).unwrap();
    assert_eq!(report["metrics"]["accuracy"].as_f64().unwrap(), ckpt.history.final_metrics.accuracy);
    assert_eq!(report["metrics"]["f1"].as_f64().unwrap(), ckpt.history.final_metrics.f1);
    let rows = fs::read_to_string(tmp.path().join("eval/predictions.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + ckpt.dataset.n_train);

    // Shot-based soft labels are seeded.
    let a = ok(tmp.path(), &["--shots", "200", "--out", "s1", "eval", "--checkpoint", "run/checkpoint.json", "--data", "run/test.csv"]);
    let b = ok(tmp.path(), &["--shots", "200", "--out", "s2", "eval", "--checkpoint", "run/checkpoint.json", "--data", "run/test.csv"]);
    assert_eq!(a, b);
    assert_eq!(fs::read(tmp.path().join("s1/predictions.csv")).unwrap(), fs::read(tmp.path().join("s2/predictions.csv")).unwrap());
}

#[test]
fn eval_rejects_empty_and_mismatched_files() {
    let tmp = TempDir::new().unwrap();
    trained(tmp.path());
    fs::write(tmp.path().join("empty.csv"), "").unwrap();
    let err = fails(tmp.path(), &["eval", "--checkpoint", "run/checkpoint.json", "--data", "empty.csv"]);
    assert!(err.contains("empty.csv"), "{err}");
    fs::write(tmp.path().join("narrow.csv"), "a,b,label\n1,2,0\n3,4,1\n").unwrap();
    let err = fails(tmp.path(), &["eval", "--checkpoint", "run/checkpoint.json", "--data", "narrow.csv"]);
    assert!(err.contains('8') && err.contains('2'), "{err}");
}

#[test]
fn missing_dataset_is_reported_with_its_path() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path(), "");
    let text = fs::read_to_string(&cfg).unwrap().replace("[dataset.blobs]", "[dataset]\nkind = \"csv\"\npath = \"nowhere/x.csv\"\n\n[dataset.blobs]");
    fs::write(&cfg, text).unwrap();
    let err = fails(tmp.path(), &["--config", "small.toml", "train"]);
    assert!(err.contains("nowhere/x.csv"), "{err}");

    // Relative dataset paths resolve against the data directory variable.
    let out = bin()
        .current_dir(tmp.path())
        .env("RYDBERG_ODE_DATA_DIR", "/srv/datasets")
        .args(["--config", "small.toml", "train"])
        .output()
        .unwrap();
    assert!(String::from_utf8_lossy(&out.stderr).contains("/srv/datasets/nowhere/x.csv"));
}

#[test]
fn bad_config_and_flags_are_rejected() {
    let tmp = TempDir::new().unwrap();
    small_config(tmp.path(), "[model]\nspacnig = 3.0\n");
    let err = fails(tmp.path(), &["--config", "small.toml", "train"]);
    assert!(err.contains("small.toml"), "{err}");
    let err = fails(tmp.path(), &["--spacing", "3", "train"]);
    assert!(err.contains("spacing"), "{err}");
    let err = fails(tmp.path(), &["--gradient-mode", "magic", "train"]);
    assert!(err.contains("magic"), "{err}");
    let err = fails(tmp.path(), &["--intervals", "20", "train"]);
    assert!(err.contains("4 us"), "{err}");
}

#[test]
fn noise_study_is_seeded_and_zero_noise_is_inert() {
    let tmp = TempDir::new().unwrap();
    trained(tmp.path());
    let args = ["--config", "small.toml", "noise", "--checkpoint", "run/checkpoint.json", "--data", "run/test.csv"];
    let mut a = vec!["--out", "n1"];
    a.extend(args);
    ok(tmp.path(), &a);
    let mut b = vec!["--out", "n2"];
    b.extend(args);
    ok(tmp.path(), &b);
    let report = fs::read(tmp.path().join("n1/noise_report.json")).unwrap();
    assert_eq!(report, fs::read(tmp.path().join("n2/noise_report.json")).unwrap());
    let table = fs::read_to_string(tmp.path().join("n1/noise_sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 5);

    let study: serde_json::Value = serde_json::from_slice(&report).unwrap();
    let zero = &study["reports"][0];
    assert_eq!(study["multipliers"][0].as_f64(), Some(0.0));
    assert_eq!(zero["flip_rate"].as_f64(), Some(0.0));
    assert_eq!(zero["mean_abs_shift"].as_f64(), Some(0.0));
}

#[test]
fn ensemble_members_do_not_depend_on_ensemble_size() {
    let tmp = TempDir::new().unwrap();
    let run_dir = trained(tmp.path());
    let ckpt = Checkpoint::load(&run_dir.join("checkpoint.json")).unwrap();
    let model = ckpt.model().unwrap();
    let ds = rydberg_ode::data::load_csv(&run_dir.join("test.csv"), "label").unwrap();
    let samples = ckpt.encoder().unwrap().encode_all(&ds).unwrap();
    let evo = EvolutionConfig::default();
    let noise = NoiseSpec { seed: 99, ..NoiseSpec::default() };
    let one = robustness_eval(&model, &samples, &noise, 1, &evo).unwrap();
    let many = robustness_eval(&model, &samples, &noise, 6, &evo).unwrap();
    for (b, s) in samples.iter().enumerate() {
        let spec = model.realize(s).unwrap().spec;
        let first = perturb(&spec, &noise.with_seed(seed::split(noise.seed, &[b as u64, 0]))).unwrap();
        assert_eq!(one.samples[b].noisy_mean, predict(&evolve(&first, &evo)));
        assert_eq!(one.samples[b].ideal, many.samples[b].ideal);
    }
    for r in [&one, &many] {
        assert_eq!(*r, r.recomputed());
        for s in &r.samples {
            // A flip needs the ensemble mean to cross the decision boundary.
            if s.abs_shift() < (s.ideal - 0.5).abs() {
                assert!(!s.flip);
            }
            if s.flip {
                assert!((s.ideal - 0.5) * (s.noisy_mean - 0.5) <= 0.0);
            }
        }
    }
}

#[test]
fn export_writes_valid_programs_and_refuses_tight_registers() {
    let tmp = TempDir::new().unwrap();
    let run_dir = trained(tmp.path());
    ok(tmp.path(), &["--out", "ex", "export", "--checkpoint", "run/checkpoint.json", "--data", "run/test.csv", "--index", "2"]);
    let program: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("ex/program.json")).unwrap()).unwrap();
    let amp = &program["hamiltonian"]["drivingFields"][0]["amplitude"]["time_series"];
    let values = amp["values"].as_array().unwrap();
    let times = amp["times"].as_array().unwrap();
    assert_eq!(values.first().unwrap().as_f64(), Some(0.0));
    assert_eq!(values.last().unwrap().as_f64(), Some(0.0));
    assert!((times.last().unwrap().as_f64().unwrap() - 0.65e-6).abs() < 1e-15);

    // Even atoms carry the sample's coupling inputs, odd atoms the parameters.
    let ckpt = Checkpoint::load(&run_dir.join("checkpoint.json")).unwrap();
    let ds = rydberg_ode::data::load_csv(&run_dir.join("test.csv"), "label").unwrap();
    let enc = ckpt.encoder().unwrap().encode(&ds.features[2], ds.labels[2]).unwrap();
    let h: Vec<f64> = program["hamiltonian"]["shiftingFields"][0]["magnitude"]["pattern"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    let trained_h = &ckpt.model_parameters.coupling_params;
    assert_eq!(h, vec![enc.coupling_inputs[0], trained_h[0].clamp(0.0, 1.0), enc.coupling_inputs[1], trained_h[1].clamp(0.0, 1.0)]);

    let err = fails(tmp.path(), &["--spacing", "3", "--out", "bad", "export", "--checkpoint", "run/checkpoint.json", "--data", "run/test.csv"]);
    assert!(err.contains("spacing between atoms"), "{err}");
    assert!(!tmp.path().join("bad/program.json").exists());

    let ckpt = Checkpoint::load(&run_dir.join("checkpoint.json")).unwrap();
    match commands::export_program(&ckpt, &ExportSample::Features(ds.features[0].clone()), Some(3.0)) {
        Err(Error::ExportRefused(v)) => {
            assert!(v.iter().all(|x| matches!(x, Violation::SpacingBelowFloor { .. })));
            // Four nearest-neighbour pairs of the square are too close.
            assert_eq!(v.len(), 4);
        }
        other => panic!("expected refusal, got {other:?}"),
    }
}

#[test]
fn sweeps_record_one_row_per_value() {
    let tmp = TempDir::new().unwrap();
    small_config(tmp.path(), "");
    let out = ok(tmp.path(), &["--config", "small.toml", "--out", "sw", "sweep", "--axis", "intervals", "--values", "1,3,5"]);
    assert_eq!(out.lines().count(), 3);
    let table = fs::read_to_string(tmp.path().join("sw/sweep_intervals.csv")).unwrap();
    let counts: Vec<&str> = table.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(counts, ["8", "20", "32"]);

    ok(tmp.path(), &["--config", "small.toml", "--out", "sw", "sweep", "--axis", "spacing", "--values", "6,9,12,15"]);
    let table = fs::read_to_string(tmp.path().join("sw/sweep_spacing.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 4);

    // Bad values fail before any model is trained.
    let err = fails(tmp.path(), &["--config", "small.toml", "--out", "bad", "sweep", "--axis", "grid", "--values", "square,hexagon"]);
    assert!(err.contains("hexagon"), "{err}");
    assert!(!tmp.path().join("bad").exists());
}

#[test]
fn synth_is_seeded() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["--seed", "5", "--out", "a", "synth", "--samples", "40"]);
    ok(tmp.path(), &["--seed", "5", "--out", "b", "synth", "--samples", "40"]);
    ok(tmp.path(), &["--seed", "6", "--out", "c", "synth", "--samples", "40"]);
    let read = |d: &str| fs::read(tmp.path().join(d).join("synthetic.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
    let ds = rydberg_ode::data::load_csv(&tmp.path().join("a/synthetic.csv"), "label").unwrap();
    assert_eq!((ds.len(), ds.n_features()), (40, 8));
    assert_eq!(ds.class_counts(), [20, 20]);

    ok(tmp.path(), &["--out", "z", "synth", "--samples", "41", "--separation", "0"]);
    let ds = rydberg_ode::data::load_csv(&tmp.path().join("z/synthetic.csv"), "label").unwrap();
    assert_eq!(ds.class_counts(), [21, 20]);
}

#[test]
fn idx_datasets_run_end_to_end() {
    use rydberg_ode::data::write_idx;
    let tmp = TempDir::new().unwrap();
    // Digits 4 and 9 as 28x28 images with class-dependent stroke positions.
    let n = 60usize;
    let mut labels = Vec::new();
    let mut pixels = Vec::new();
    let mut rng = seed::rng(3);
    for i in 0..n {
        let digit: u8 = [4, 9, 7][i % 3];
        labels.push(digit);
        for p in 0..784 {
            let on = match digit {
                4 => p % 28 < 14,
                9 => p / 28 < 14,
                _ => p % 2 == 0,
            };
            let noise: u8 = rand::Rng::gen_range(&mut rng, 0..40);
            pixels.push(if on { 200 + noise } else { noise });
        }
    }
    write_idx(&tmp.path().join("images"), &[n as u32, 28, 28], &pixels).unwrap();
    write_idx(&tmp.path().join("labels"), &[n as u32], &labels).unwrap();
    small_config(
        tmp.path(),
        "[dataset]\nkind = \"mnist\"\nimages = \"images\"\nlabels = \"labels\"\nclass_a = 4\nclass_b = 9\ncap = 1000\n",
    );
    ok(tmp.path(), &["--config", "small.toml", "--out", "m", "train"]);
    let ckpt = Checkpoint::load(&tmp.path().join("m/checkpoint.json")).unwrap();
    assert_eq!(ckpt.dataset.n_train + ckpt.dataset.n_test, 40);
    assert_eq!(ckpt.pca_model.components.len(), 5);
}
