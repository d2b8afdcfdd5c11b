use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use themefit::report::ReportFile;

fn themefit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_themefit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = themefit(args);
    assert!(
        out.status.success(),
        "themefit {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small theme-contrast corpus and a trained run in `dir`.
fn trained(dir: &Path, seed: &str, extra: &[&str]) -> (PathBuf, PathBuf) {
    let data = dir.join("data");
    let run = dir.join("run");
    ok(&[
        "gen-synth",
        "--preset",
        "theme-contrast",
        "--num-outfits",
        "200",
        "--seed",
        seed,
        "--out",
        s(&data),
    ]);
    let mut args = vec![
        "train",
        "--data",
        s(&data),
        "--out",
        s(&run),
        "--seed",
        seed,
        "--epochs",
        "6",
        "--dim",
        "8",
    ];
    args.extend_from_slice(extra);
    ok(&args);
    (data, run)
}

fn log_lines(run: &Path) -> Vec<Value> {
    fs::read_to_string(run.join("train_log.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn gen_synth_is_deterministic_and_seed_dependent() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    ok(&["gen-synth", "--seed", "5", "--num-outfits", "50", "--out", s(&a)]);
    ok(&["gen-synth", "--seed", "5", "--num-outfits", "50", "--out", s(&b)]);
    ok(&["gen-synth", "--seed", "6", "--num-outfits", "50", "--out", s(&c)]);
    for name in ["items.jsonl", "outfits.jsonl", "vocab.json"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    assert_ne!(
        fs::read(a.join("items.jsonl")).unwrap(),
        fs::read(c.join("items.jsonl")).unwrap()
    );
    assert_eq!(fs::read_to_string(a.join("outfits.jsonl")).unwrap().lines().count(), 50);
}

#[test]
fn gen_synth_rejects_infeasible_spec() {
    let dir = tempfile::tempdir().unwrap();
    let out = themefit(&[
        "gen-synth",
        "--num-categories",
        "4",
        "--items-per-outfit",
        "10",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("items.jsonl").exists());
}

#[test]
fn gen_synth_reshaped_vocabulary_gets_block_themes() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "gen-synth",
        "--num-categories",
        "6",
        "--num-themes",
        "3",
        "--items-per-outfit",
        "2",
        "--out",
        s(dir.path()),
    ]);
    let vocab: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("vocab.json")).unwrap()).unwrap();
    assert_eq!(vocab["categories"].as_array().unwrap().len(), 6);
    assert_eq!(vocab["themes"].as_array().unwrap().len(), 3);
    let out = themefit(&[
        "gen-synth",
        "--num-categories",
        "5",
        "--num-themes",
        "3",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_writes_checkpoint_and_one_log_line_per_epoch() {
    let dir = tempfile::tempdir().unwrap();
    let (_, run) = trained(dir.path(), "1", &[]);
    assert!(run.join("checkpoint.json").is_file());
    assert!(run.join("split.json").is_file());
    let lines = log_lines(&run);
    let emb: Vec<&Value> = lines.iter().filter(|l| l["phase"] == "embedding").collect();
    assert_eq!(emb.len(), 6);
    for (i, l) in emb.iter().enumerate() {
        assert_eq!(l["epoch"], i);
        assert!(l["loss"].as_f64().unwrap().is_finite());
        assert!(l["lr"].as_f64().unwrap() > 0.0);
    }
    let att = lines.iter().filter(|l| l["phase"] == "attention").count();
    assert_eq!(att, 2 * 6);
    let ckpt: Value = serde_json::from_str(&fs::read_to_string(run.join("checkpoint.json")).unwrap()).unwrap();
    assert_eq!(ckpt["n"], 8);
    assert_eq!(ckpt["attention"]["themes"].as_object().unwrap().len(), 2);
}

#[test]
fn skip_attention_leaves_no_attention_table() {
    let dir = tempfile::tempdir().unwrap();
    let (data, run) = trained(dir.path(), "2", &["--skip-attention"]);
    let ckpt: Value = serde_json::from_str(&fs::read_to_string(run.join("checkpoint.json")).unwrap()).unwrap();
    assert!(ckpt.get("attention").is_none());
    assert!(log_lines(&run).iter().all(|l| l["phase"] == "embedding"));

    ok(&["eval", "--data", s(&data), "--out", s(&run), "--repetitions", "1"]);
    let report: ReportFile = serde_json::from_str(&fs::read_to_string(run.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.methods.len(), 1);
    assert_eq!(report.methods[0].method, "baseline");
}

#[test]
fn eval_report_shape_and_totals() {
    let dir = tempfile::tempdir().unwrap();
    let (data, run) = trained(dir.path(), "3", &[]);
    let out = ok(&["eval", "--data", s(&data), "--out", s(&run)]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("method"));
    assert_eq!(fs::read_to_string(run.join("report.txt")).unwrap(), stdout);

    let report: ReportFile = serde_json::from_str(&fs::read_to_string(run.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.repetitions, 5);
    assert_eq!(report.split, "test");
    let names: Vec<&str> = report.methods.iter().map(|m| m.method.as_str()).collect();
    assert_eq!(names, ["baseline", "theme-attention"]);
    for m in &report.methods {
        assert_eq!(m.auc_runs.len(), 5);
        assert_eq!(m.fitb_runs.len(), 5);
        let mean = m.auc_runs.iter().sum::<f64>() / 5.0;
        assert!((mean - m.overall.auc_mean).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&m.overall.auc_mean));
        assert!(m.overall.positives > 0);
        assert_eq!(m.overall.positives, m.overall.negatives);
        let per_theme: usize = m.per_theme.values().map(|t| t.positives).sum();
        assert_eq!(per_theme, m.overall.positives);
        let per_group: usize = m.per_group.values().map(|t| t.positives).sum();
        assert_eq!(per_group, m.overall.positives);
    }
}

#[test]
fn single_repetition_has_zero_spread() {
    let dir = tempfile::tempdir().unwrap();
    let (data, run) = trained(dir.path(), "4", &[]);
    ok(&["eval", "--data", s(&data), "--out", s(&run), "--repetitions", "1"]);
    let report: ReportFile = serde_json::from_str(&fs::read_to_string(run.join("report.json")).unwrap()).unwrap();
    for m in &report.methods {
        assert_eq!(m.overall.auc_std, 0.0);
        assert_eq!(m.overall.fitb_std, 0.0);
    }
}

#[test]
fn fitb_and_sample_dump() {
    let dir = tempfile::tempdir().unwrap();
    let (data, run) = trained(dir.path(), "5", &[]);
    ok(&[
        "fitb",
        "--data",
        s(&data),
        "--out",
        s(&run),
        "--repetitions",
        "2",
        "--dump-samples",
    ]);
    let lines: Vec<Value> = serde_json::from_str(&fs::read_to_string(run.join("fitb.json")).unwrap()).unwrap();
    assert_eq!(lines.len(), 2);
    for l in &lines {
        assert_eq!(l["fitb_runs"].as_array().unwrap().len(), 2);
        assert!(l["questions"].as_u64().unwrap() > 0);
    }
    assert!(run.join("eval_samples.jsonl").is_file());
}

#[test]
fn missing_checkpoint_exits_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["gen-synth", "--num-outfits", "40", "--out", s(&data)]);
    let out = themefit(&[
        "eval",
        "--data",
        s(&data),
        "--checkpoint",
        s(&dir.path().join("none.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("none.json"));
}

#[test]
fn corrupt_data_exits_with_data_code() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["gen-synth", "--num-outfits", "40", "--out", s(&data)]);
    fs::write(
        data.join("outfits.jsonl"),
        "{\"id\": \"x\", \"items\": [\"nope\"], \"themes\": []}\n",
    )
    .unwrap();
    let out = themefit(&["train", "--data", s(&data), "--out", s(&dir.path().join("run"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("outfits.jsonl:1"));
}

#[test]
fn unknown_config_field_exits_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"epochs": 3}"#).unwrap();
    let out = themefit(&["--config", s(&cfg), "train"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_drives_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&[
        "gen-synth",
        "--preset",
        "theme-contrast",
        "--num-outfits",
        "120",
        "--out",
        s(&data),
    ]);
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        r#"{"items": "data/items.jsonl", "outfits": "data/outfits.jsonl", "vocab": "data/vocab.json",
            "out": "run", "seed": 9,
            "embedding": {"n": 4, "train": {"epochs": 2}},
            "attention": {"themes": ["theme1"], "train": {"epochs": 3}},
            "eval": {"repetitions": 2}}"#,
    )
    .unwrap();
    ok(&["--config", s(&cfg), "train"]);
    ok(&["--config", s(&cfg), "eval"]);
    let run = dir.path().join("run");
    let lines = log_lines(&run);
    assert_eq!(lines.iter().filter(|l| l["phase"] == "embedding").count(), 2);
    let att: Vec<&Value> = lines.iter().filter(|l| l["phase"] == "attention").collect();
    assert_eq!(att.len(), 3);
    assert!(att.iter().all(|l| l["theme"] == "synthetic/theme1"), "{att:?}");
    let report: ReportFile = serde_json::from_str(&fs::read_to_string(run.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.seed, 9);
    assert_eq!(report.repetitions, 2);
    assert!(report.methods[1].per_theme.keys().all(|k| k.contains("theme1")));
}

#[test]
fn runs_are_byte_identical_for_a_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (da, ra) = trained(a.path(), "7", &[]);
    let (db, rb) = trained(b.path(), "7", &[]);
    ok(&["eval", "--data", s(&da), "--out", s(&ra)]);
    ok(&["eval", "--data", s(&db), "--out", s(&rb)]);
    for name in [
        "checkpoint.json",
        "split.json",
        "train_log.jsonl",
        "report.json",
        "report.txt",
    ] {
        assert_eq!(
            fs::read(ra.join(name)).unwrap(),
            fs::read(rb.join(name)).unwrap(),
            "{name}"
        );
    }
}

fn recommend(run: &Path, data: &Path, pool: &Path, anchor: &str, extra: &[&str]) -> Value {
    let ckpt = run.join("checkpoint.json");
    let vocab = data.join("vocab.json");
    let mut args = vec![
        "recommend",
        "--checkpoint",
        s(&ckpt),
        "--vocab",
        s(&vocab),
        "--pool",
        s(pool),
        "--anchor",
        anchor,
    ];
    args.extend_from_slice(extra);
    serde_json::from_slice(&ok(&args).stdout).unwrap()
}

fn items_by_category(data: &Path) -> Vec<Value> {
    fs::read_to_string(data.join("items.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn write_pool(path: &Path, items: &[&Value]) {
    let text: String = items.iter().map(|v| format!("{v}\n")).collect();
    fs::write(path, text).unwrap();
}

#[test]
fn recommend_recovers_planted_partners_without_noise() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let run = dir.path().join("run");
    ok(&[
        "gen-synth",
        "--preset",
        "theme-contrast",
        "--noise-sigma",
        "0",
        "--num-outfits",
        "300",
        "--out",
        s(&data),
    ]);
    ok(&[
        "train",
        "--data",
        s(&data),
        "--out",
        s(&run),
        "--epochs",
        "15",
        "--dim",
        "16",
    ]);

    // theme0 plants cat0:cat1; every outfit holds all four categories.
    let items = items_by_category(&data);
    let cat1: Vec<&Value> = items.iter().filter(|v| v["category"] == "cat1").collect();
    let pool_path = dir.path().join("pool.jsonl");
    let mut hits = 0;
    let anchors: Vec<&Value> = items
        .iter()
        .filter(|v| v["category"] == "cat0")
        .filter(|v| {
            let o: usize = v["id"].as_str().unwrap()[1..6].parse().unwrap();
            o.is_multiple_of(2)
        })
        .take(20)
        .collect();
    for anchor in &anchors {
        let mut pool = vec![*anchor];
        pool.extend(cat1.iter().copied());
        write_pool(&pool_path, &pool);
        let id = anchor["id"].as_str().unwrap();
        let rec = recommend(&run, &data, &pool_path, id, &["--theme", "theme0", "--slots", "cat1"]);
        let outfit = &id[..6];
        if rec["slots"][0]["item"].as_str().unwrap().starts_with(outfit) {
            hits += 1;
        }
    }
    assert!(
        hits >= 18,
        "planted partner chosen for {hits} of {} anchors",
        anchors.len()
    );
}

#[test]
fn recommend_single_candidate_and_warnings() {
    let dir = tempfile::tempdir().unwrap();
    let (data, run) = trained(dir.path(), "8", &[]);
    let items = items_by_category(&data);
    let anchor = items.iter().find(|v| v["category"] == "cat0").unwrap();
    let only = items.iter().find(|v| v["category"] == "cat2").unwrap();
    let pool = dir.path().join("pool.jsonl");
    write_pool(&pool, &[anchor, only]);
    let rec = recommend(
        &run,
        &data,
        &pool,
        anchor["id"].as_str().unwrap(),
        &["--slots", "cat2,cat3,cat0", "--mode", "baseline"],
    );
    assert_eq!(rec["slots"].as_array().unwrap().len(), 1);
    assert_eq!(rec["slots"][0]["item"], only["id"]);
    assert_eq!(rec["slots"][0]["runner_ups"].as_array().unwrap().len(), 0);
    assert_eq!(rec["warnings"].as_array().unwrap().len(), 2);
    assert_eq!(rec["mode"], "baseline");

    let missing = themefit(&[
        "recommend",
        "--checkpoint",
        s(&run.join("checkpoint.json")),
        "--vocab",
        s(&data.join("vocab.json")),
        "--pool",
        s(&pool),
        "--anchor",
        "not-there",
        "--slots",
        "cat2",
    ]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn recommend_depends_on_theme() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let run = dir.path().join("run");
    ok(&[
        "gen-synth",
        "--preset",
        "theme-contrast",
        "--noise-sigma",
        "0",
        "--num-outfits",
        "300",
        "--out",
        s(&data),
    ]);
    ok(&[
        "train",
        "--data",
        s(&data),
        "--out",
        s(&run),
        "--epochs",
        "15",
        "--dim",
        "16",
    ]);
    let items = items_by_category(&data);
    let pool_path = dir.path().join("pool.jsonl");
    let pool: Vec<&Value> = items.iter().take(120).collect();
    write_pool(&pool_path, &pool);
    let mut differ = 0;
    let anchors: Vec<&Value> = pool
        .iter()
        .copied()
        .filter(|v| v["category"] == "cat0")
        .take(10)
        .collect();
    for anchor in &anchors {
        let id = anchor["id"].as_str().unwrap();
        let pick = |theme| {
            let r = recommend(
                &run,
                &data,
                &pool_path,
                id,
                &["--theme", theme, "--slots", "cat1,cat2", "--exhaustive"],
            );
            assert_eq!(r["search"], "exhaustive");
            r["outfit"].clone()
        };
        if pick("theme0") != pick("theme1") {
            differ += 1;
        }
    }
    assert!(
        differ >= 8,
        "theme changed the outfit for {differ} of {} anchors",
        anchors.len()
    );
}
