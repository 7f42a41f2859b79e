use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pathgan(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pathgan"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("PATHGAN_OUT")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(o: Output) -> Output {
    assert!(
        o.status.success(),
        "exit {:?}\n{}{}",
        o.status.code(),
        stdout(&o),
        stderr(&o)
    );
    o
}

fn trained(dir: &Path) {
    ok(pathgan(dir, &["--seed", "4", "synth-data"]));
    ok(pathgan(
        dir,
        &["--seed", "4", "train", "gan", "--epochs", "3"],
    ));
    ok(pathgan(
        dir,
        &["--seed", "4", "train", "classifier", "--epochs", "5"],
    ));
}

#[test]
fn synth_data_writes_default_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ok(pathgan(tmp.path(), &["--seed", "3", "synth-data"]));
    assert!(stdout(&o).contains("312 path frames"));
    let data = tmp.path().join("seed-3/data");
    assert_eq!(fs::read_dir(data.join("paths")).unwrap().count(), 312);
    assert!(data.join("paths/class5_51.csv").is_file());
    let labels = fs::read_to_string(data.join("labels.csv")).unwrap();
    assert_eq!(labels.lines().count(), 313);
    assert_eq!(labels.lines().nth(1), Some("paths/class0_0.csv,0"));
    let prints = fs::read_to_string(data.join("fingerprints.csv")).unwrap();
    assert_eq!(prints.lines().count(), 1421);
    assert!(prints.starts_with("b1,b2,b3,b4,b5,b6,b7,b8,b9,b10,b11,b12,b13,x,y\n"));
}

#[test]
fn seed_is_required() {
    let tmp = tempfile::tempdir().unwrap();
    let o = pathgan(tmp.path(), &["synth-data"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seed"));
}

#[test]
fn missing_map_file_is_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = pathgan(
        tmp.path(),
        &["--seed", "1", "--set", "map=/no/such/map.csv", "synth-data"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/no/such/map.csv"), "{}", stderr(&o));
}

#[test]
fn zero_epochs_is_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = pathgan(
        tmp.path(),
        &["--seed", "1", "train", "gan", "--epochs", "0"],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn training_without_data_names_missing_file() {
    let tmp = tempfile::tempdir().unwrap();
    let o = pathgan(tmp.path(), &["--seed", "1", "train", "classifier"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("labels.csv"), "{}", stderr(&o));
}

#[test]
fn unknown_class_lists_valid_classes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = pathgan(tmp.path(), &["--seed", "1", "plan", "--class", "9"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("0..=5"), "{}", stderr(&o));
}

#[test]
fn render_marks_class_endpoints() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ok(pathgan(tmp.path(), &["render", "--class", "2"]));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 19);
    assert_eq!(rows[2].chars().nth(5), Some('S'));
    assert_eq!(rows[16].chars().nth(12), Some('D'));
    assert_eq!(text.matches('S').count(), 1);
}

#[test]
fn config_file_then_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(
        &cfg,
        "seed = 1\nsamples_per_class = 2\nfingerprint_samples = 5\n",
    )
    .unwrap();
    let cfg_arg = cfg.to_str().unwrap();
    ok(pathgan(
        tmp.path(),
        &["--config", cfg_arg, "--seed", "2", "synth-data"],
    ));
    assert!(!tmp.path().join("seed-1").exists());
    assert_eq!(
        fs::read_dir(tmp.path().join("seed-2/data/paths"))
            .unwrap()
            .count(),
        12
    );
    let o = pathgan(
        tmp.path(),
        &["--config", cfg_arg, "--set", "bogus=1", "synth-data"],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn output_root_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_pathgan"))
        .args([
            "--seed",
            "5",
            "--set",
            "samples_per_class=1",
            "--set",
            "fingerprint_samples=1",
            "synth-data",
        ])
        .env("PATHGAN_OUT", tmp.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(tmp.path().join("seed-5/data/labels.csv").is_file());
}

#[test]
fn plan_outputs_and_exhaustion() {
    let tmp = tempfile::tempdir().unwrap();
    trained(tmp.path());
    let models = tmp.path().join("seed-4/models");
    assert!(models.join("gan.ck").is_file());
    assert_eq!(
        fs::read_to_string(models.join("gan_log.csv"))
            .unwrap()
            .lines()
            .count(),
        4
    );
    assert!(fs::read_to_string(models.join("classifier_eval.csv"))
        .unwrap()
        .starts_with("batch_size,"));

    let mut exhausted = 0;
    for class in 0..6 {
        let c = class.to_string();
        let o = pathgan(
            tmp.path(),
            &["--seed", "4", "plan", "--class", &c, "--max-attempts", "1"],
        );
        match o.status.code() {
            Some(0) => {
                let meta = tmp
                    .path()
                    .join(format!("seed-4/plans/class{class}_req4.meta.csv"));
                let text = fs::read_to_string(meta).unwrap();
                assert!(text.starts_with("class,attempts,rejected,confidence,deviation\n"));
                assert!(text
                    .lines()
                    .nth(1)
                    .unwrap()
                    .starts_with(&format!("{class},1,")));
            }
            Some(3) => {
                exhausted += 1;
                assert!(stderr(&o).contains("1 attempts"), "{}", stderr(&o));
            }
            other => panic!("unexpected exit {other:?}: {}", stderr(&o)),
        }
    }
    assert!(exhausted >= 1);
}

#[test]
fn plan_by_endpoints_must_match_a_class() {
    let tmp = tempfile::tempdir().unwrap();
    let o = pathgan(
        tmp.path(),
        &[
            "--seed",
            "1",
            "plan",
            "--source",
            "0,0",
            "--destination",
            "1,1",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
    let o = pathgan(tmp.path(), &["--seed", "1", "plan", "--source", "0,0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn localizer_and_timing_reports() {
    let tmp = tempfile::tempdir().unwrap();
    trained(tmp.path());
    let o = ok(pathgan(tmp.path(), &["--seed", "4", "train", "localizer"]));
    assert!(stdout(&o).contains("localizer mean error"));
    ok(pathgan(
        tmp.path(),
        &["--seed", "4", "--set", "timing_calls=50", "eval", "timing"],
    ));
    let timing = fs::read_to_string(tmp.path().join("seed-4/eval/timing.csv")).unwrap();
    assert!(timing.starts_with("stage,calls,mean_ms,p50_ms,p95_ms,max_ms\ngeneration,50,"));
}

#[test]
fn rating_is_appended() {
    let tmp = tempfile::tempdir().unwrap();
    ok(pathgan(
        tmp.path(),
        &["--seed", "1", "--set", "samples_per_class=1", "synth-data"],
    ));
    let frame = tmp.path().join("seed-1/data/paths/class0_0.csv");
    let f = frame.to_str().unwrap();
    ok(pathgan(
        tmp.path(),
        &[
            "rate", "--frame", f, "--class", "0", "--score", "4", "--rater", "a",
        ],
    ));
    ok(pathgan(tmp.path(), &["rate", "--frame", f, "--score", "2"]));
    let text = fs::read_to_string(tmp.path().join("ratings.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "frame,class,rater,score");
    assert!(lines[1].ends_with(",0,a,4"));
    assert!(lines[2].ends_with(",,anonymous,2"));
    let o = pathgan(tmp.path(), &["rate", "--frame", f, "--score", "6"]);
    assert_eq!(o.status.code(), Some(2));
}
