use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY_GRID: &str = "ff = [[0.0, 0.5, 1.0]]
t1_h2o = [[600.0, 600.0, 1800.0]]
t1_fat = [[250.0, 100.0, 350.0]]
delta_f = [[-50.0, 50.0, 50.0]]
b1 = [[0.6, 0.4, 1.0]]
";

fn mrf(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mrf-inn"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = mrf(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Tiny dictionaries and one trained model of each kind.
fn prepared() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("grid.toml"), TINY_GRID).unwrap();
    fs::write(d.join("train.toml"), "epochs = 2\nbatch_size = 16\n").unwrap();
    ok(d, &["simulate-dict", "--grid", "grid.toml", "--out", "dict/all", "--seed", "3"]);
    ok(d, &["split-dict", "--dict", "dict/all", "--fraction", "0.25", "--first", "dict/val", "--second", "dict/train"]);
    for model in ["inn", "fcn"] {
        ok(d, &["train", "--model", model, "--train", "dict/train", "--val", "dict/val", "--config", "train.toml", "--out", "models"]);
    }
    dir
}

#[test]
fn simulate_dict_counts_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["init", "--out", "cfg"]);
    fs::write(d.join("one.toml"), "ff = [[0.2, 0.1, 0.2]]\nt1_h2o = [[900.0, 1.0, 900.0]]\nt1_fat = [[300.0, 1.0, 300.0]]\ndelta_f = [[0.0, 1.0, 0.0]]\nb1 = [[1.0, 0.1, 1.0]]\n").unwrap();
    let stdout = ok(d, &["simulate-dict", "--grid", "one.toml", "--schedule", "cfg/schedule.toml", "--out", "a/one"]);
    assert!(stdout.starts_with("N=1 T=175"), "{stdout}");
    ok(d, &["simulate-dict", "--grid", "one.toml", "--schedule", "cfg/schedule.toml", "--out", "b/one"]);
    for suffix in [".manifest", ".params.bin", ".fp.bin"] {
        assert_eq!(
            fs::read(d.join(format!("a/one{suffix}"))).unwrap(),
            fs::read(d.join(format!("b/one{suffix}"))).unwrap()
        );
    }
    let manifest = fs::read_to_string(d.join("a/run.manifest")).unwrap();
    assert!(manifest.contains("command = \"simulate-dict\""));
    assert!(manifest.contains("sha256"));
}

#[test]
fn desk_preset_subsamples_training_grid() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["init", "--out", "cfg"]);
    let stdout = ok(d, &["simulate-dict", "--grid", "cfg/training_grid.toml", "--out", "desk/train", "--preset", "desk"]);
    // 11 FF x 20 T1 water strata, 23 entries each
    assert!(stdout.starts_with("N=5060 "), "{stdout}");
}

#[test]
fn train_reports_parameter_counts_and_repeats_exactly() {
    let dir = prepared();
    let d = dir.path();
    let args = ["train", "--model", "inn", "--train", "dict/train", "--val", "dict/val", "--config", "train.toml", "--out", "again"];
    let stdout = ok(d, &args);
    assert!(stdout.contains("360824 parameters"), "{stdout}");
    assert_eq!(
        fs::read(d.join("models/inn_log.csv")).unwrap(),
        fs::read(d.join("again/inn_log.csv")).unwrap()
    );
    assert_eq!(fs::read(d.join("models/inn.ckpt")).unwrap(), fs::read(d.join("again/inn.ckpt")).unwrap());
    let stdout = ok(d, &["train", "--model", "fcn", "--train", "dict/train", "--val", "dict/val", "--config", "train.toml", "--out", "again"]);
    assert!(stdout.contains("197105 parameters"), "{stdout}");
    let manifest = fs::read_to_string(d.join("again/run.manifest")).unwrap();
    assert_eq!(manifest.matches("[[run]]").count(), 2);
    assert!(manifest.contains("seed = 0"));
}

#[test]
fn evaluation_commands_write_artifacts() {
    let dir = prepared();
    let d = dir.path();
    ok(d, &["evaluate", "--models", "models/inn.ckpt", "models/fcn.ckpt", "--test", "dict/val", "--out", "eval"]);
    let metrics = fs::read_to_string(d.join("eval/metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1 + 2 * 5);

    ok(d, &["snr-sweep", "--models", "models/inn.ckpt", "models/fcn.ckpt", "--test", "dict/val", "--out", "eval", "--levels", "15,45", "--repetitions", "2"]);
    let sweep = fs::read_to_string(d.join("eval/snr_sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 1 + 2 * 2 * 5);
    assert!(fs::read_to_string(d.join("eval/snr_sweep_t1_h2o.svg")).unwrap().contains("<svg"));

    ok(d, &["heatmap", "--a", "models/inn.ckpt", "--b", "models/inn.ckpt", "--test", "dict/val", "--param", "t1_h2o", "--out", "eval"]);
    let heat = fs::read_to_string(d.join("eval/heatmap_t1_h2o.csv")).unwrap();
    for line in heat.lines().skip(1) {
        let value: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
        assert!(value == 0.0 || value.is_nan(), "{line}");
    }

    let stdout = ok(d, &["correlate", "--model", "models/inn.ckpt", "--test", "dict/val", "--out", "eval"]);
    assert!(stdout.contains("Spearman rho"));
    let corr = fs::read_to_string(d.join("eval/correlation.csv")).unwrap();
    assert_eq!(corr.lines().count(), 1 + 27);
    let manifest = fs::read_to_string(d.join("eval/run.manifest")).unwrap();
    assert_eq!(manifest.matches("[[run]]").count(), 4);
}

#[test]
fn exit_codes() {
    let dir = prepared();
    let d = dir.path();
    let code = |args: &[&str]| mrf(d, args).status.code().unwrap();
    assert_eq!(code(&["no-such-command"]), 1);
    assert_eq!(code(&["train", "--model", "cnn", "--train", "dict/train", "--val", "dict/val", "--out", "x"]), 1);
    assert_eq!(code(&["evaluate", "--models", "missing.ckpt", "--test", "dict/val", "--out", "x"]), 2);
    assert_eq!(code(&["heatmap", "--a", "models/inn.ckpt", "--b", "models/fcn.ckpt", "--test", "dict/val", "--param", "b1", "--out", "x"]), 1);

    fs::write(d.join("short.toml"), TINY_GRID).unwrap();
    fs::write(d.join("sched.toml"), "flip_angles = [10.0, 20.0]\necho_times = [1.0, 1.0]\nrepetition_times = [10.0, 10.0]\ninvert_first = false\n").unwrap();
    ok(d, &["simulate-dict", "--grid", "short.toml", "--schedule", "sched.toml", "--out", "short/all"]);
    assert_eq!(code(&["evaluate", "--models", "models/inn.ckpt", "--test", "short/all", "--out", "x"]), 2);

    fs::write(d.join("diverge.toml"), "epochs = 1\nbatch_size = 4\nlearning_rate = 1e200\n").unwrap();
    assert_eq!(
        code(&["train", "--model", "fcn", "--train", "dict/train", "--val", "dict/val", "--config", "diverge.toml", "--out", "x"]),
        3
    );
}
