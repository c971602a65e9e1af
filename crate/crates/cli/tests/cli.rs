use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::Value;
use signcorpus_annotate::{Status, Store, TaskFilter};
use signcorpus_core::align::AlignedRecord;
use signcorpus_core::corpus::{write_manifest, SampleRecord};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_signcorpus"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, seed: u64, extra: &[&str]) -> PathBuf {
    let out = dir.join(format!("ep{seed:03}"));
    let seed = seed.to_string();
    let mut args = vec!["synth-episode", "--out", p(&out), "--seed", &seed];
    args.extend_from_slice(extra);
    ok(&args);
    out
}

fn read_records(path: &Path) -> Vec<AlignedRecord> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

const OUTPUTS: [&str; 7] = [
    "signs.jsonl",
    "clips.jsonl",
    "clips.raw",
    "ocr.jsonl",
    "groups.jsonl",
    "aligned.jsonl",
    "truth.jsonl",
];

fn snapshot(dir: &Path) -> Vec<Vec<u8>> {
    OUTPUTS.iter().map(|f| fs::read(dir.join(f)).unwrap()).collect()
}

#[test]
fn all_recovers_truth_and_equals_stagewise() {
    let tmp = tempfile::tempdir().unwrap();
    let a = synth(tmp.path(), 7, &["--signs", "6", "--oversegment", "0.6"]);
    let b = synth(tmp.path(), 8, &["--signs", "5", "--distractors", "3"]);
    ok(&["all", p(&a), p(&b)]);
    for d in [&a, &b] {
        assert_eq!(read_records(&d.join("aligned.jsonl")), read_records(&d.join("truth.jsonl")));
    }
    let via_all = [snapshot(&a), snapshot(&b)];

    for f in &OUTPUTS[..6] {
        fs::remove_file(a.join(f)).unwrap();
        fs::remove_file(b.join(f)).unwrap();
    }
    for stage in ["segment-activity", "subtitle-clips", "ocr", "regroup", "align"] {
        ok(&[stage, p(&a), p(&b)]);
    }
    assert_eq!([snapshot(&a), snapshot(&b)], via_all);

    // rerunning with the same inputs rewrites identical bytes
    ok(&["--set", "workers=1", "all", p(&b), p(&a)]);
    assert_eq!([snapshot(&a), snapshot(&b)], via_all);
    let leftovers: Vec<_> = fs::read_dir(&a)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().ends_with(".tmp"))
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn synth_is_deterministic() {
    let t1 = tempfile::tempdir().unwrap();
    let t2 = tempfile::tempdir().unwrap();
    let a = synth(t1.path(), 3, &[]);
    let b = synth(t2.path(), 3, &[]);
    for f in ["scores.txt", "subtitles.raw", "mock_ocr.jsonl", "truth.jsonl", "synth.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = synth(t2.path(), 4, &[]);
    assert_ne!(fs::read(a.join("subtitles.raw")).unwrap(), fs::read(c.join("subtitles.raw")).unwrap());
}

#[test]
fn blank_episode_yields_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let e = synth(tmp.path(), 1, &["--signs", "0", "--distractors", "0"]);
    ok(&["all", p(&e)]);
    assert_eq!(fs::read(e.join("aligned.jsonl")).unwrap(), b"");
    assert_eq!(fs::read(e.join("clips.jsonl")).unwrap(), b"");
}

#[test]
fn many_to_one_sample() {
    let tmp = tempfile::tempdir().unwrap();
    let e = synth(tmp.path(), 2, &["--signs", "2", "--min-subtitles", "1", "--max-subtitles", "2", "--distractors", "0"]);
    let truth = read_records(&e.join("truth.jsonl"));
    ok(&["all", p(&e)]);
    assert_eq!(read_records(&e.join("aligned.jsonl")), truth);
    let three = synth(tmp.path(), 9, &["--signs", "1", "--min-subtitles", "3", "--max-subtitles", "3"]);
    ok(&["all", p(&three)]);
    let got = read_records(&three.join("aligned.jsonl"));
    assert_eq!(got.len(), 1);
    assert_eq!(got[0].subtitles.len(), 3);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["no-such-stage"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["all"]).status.code(), Some(1));

    let missing = run(&["segment-activity", p(&tmp.path().join("nope"))]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope"));

    let e = synth(tmp.path(), 5, &[]);
    let bad = run(&["--set", "laplacian_threshold=0", "all", p(&e)]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("laplacian_threshold"));
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, "[split]\ntrain = 0.5\n").unwrap();
    let bad = run(&["--config", p(&cfg), "split", "--manifest", "m", "--out", "o"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("split"));

    // regroup needs ocr.jsonl, which names the missing file
    ok(&["subtitle-clips", p(&e)]);
    let out = run(&["regroup", p(&e)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ocr.jsonl"));

    // an OCR command that fails is an adapter error
    let out = run(&["--set", "adapters.ocr.kind=\"command\"", "--set", "adapters.ocr.command=\"false\"", "ocr", p(&e)]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    // and so is an OCR service nobody listens on
    let out = run(&[
        "--set",
        "adapters.ocr.kind=\"http\"",
        "--set",
        "adapters.ocr.url=\"http://127.0.0.1:9/ocr\"",
        "--set",
        "adapters.ocr.timeout_s=2",
        "ocr",
        p(&e),
    ]);
    assert_eq!(out.status.code(), Some(3));

    let empty = tmp.path().join("empty.tsv");
    fs::write(&empty, "").unwrap();
    assert_eq!(run(&["score", "wer", "--hyp", p(&empty), "--ref", p(&empty)]).status.code(), Some(2));
}

#[test]
fn score_wer_fixture_and_registry() {
    let tmp = tempfile::tempdir().unwrap();
    let hyp = tmp.path().join("hyp.tsv");
    let reference = tmp.path().join("ref.tsv");
    let r = "昨天 溫度 二 十 有 濕 百分比 七 六";
    fs::write(
        &hyp,
        "video\t以前 溫度 小 有 濕 百分比 七 六\nkeypoint\t溫度 十 濕 百分比 七 九 六\ntwostream\t溫度 二 十 濕 百分比 七 六\n",
    )
    .unwrap();
    fs::write(&reference, format!("video\t{r}\nkeypoint\t{r}\ntwostream\t{r}\n")).unwrap();
    let jsonl = tmp.path().join("per.jsonl");
    let report: Value = serde_json::from_str(&ok(&["score", "wer", "--hyp", p(&hyp), "--ref", p(&reference), "--jsonl", p(&jsonl)])).unwrap();
    let got: Vec<f64> = report["per_sample"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["values"]["wer"].as_f64().unwrap())
        .collect();
    for (g, want) in got.iter().zip([33.33, 44.44, 22.22]) {
        assert!((g - want).abs() <= 0.005, "{g} vs {want}");
    }
    // pooled: (3 + 4 + 2) / 27
    assert!((report["corpus"]["wer"].as_f64().unwrap() - 900.0 / 27.0).abs() < 1e-9);
    assert_eq!(fs::read_to_string(&jsonl).unwrap().lines().count(), 3);
    assert!(ok(&["score", "wer", "--hyp", p(&hyp), "--ref", p(&reference), "--table"]).contains("CORPUS"));

    for metric in ["bleu", "rouge"] {
        let same: Value = serde_json::from_str(&ok(&["score", metric, "--hyp", p(&reference), "--ref", p(&reference)])).unwrap();
        for v in same["corpus"].as_object().unwrap().values() {
            assert!((v.as_f64().unwrap() - 100.0).abs() < 1e-9);
        }
    }

    // homosign registry built from training annotations, then applied
    let ann = tmp.path().join("ann.tsv");
    fs::write(&ann, "s1\tA(=B) C+D\ns2\tE(2) F(?)\n").unwrap();
    let seq = tmp.path().join("seq.tsv");
    let reg = tmp.path().join("reg.txt");
    ok(&["gloss-normalize", "--input", p(&ann), "--output", p(&seq), "--registry-out", p(&reg)]);
    assert_eq!(fs::read_to_string(&seq).unwrap(), "s1\tA C D\ns2\tE F\n");
    assert_eq!(fs::read_to_string(&reg).unwrap(), "A B\n");

    let h = tmp.path().join("h.tsv");
    let rf = tmp.path().join("r.tsv");
    fs::write(&h, "x\tB\n").unwrap();
    fs::write(&rf, "x\tA\n").unwrap();
    let plain: Value = serde_json::from_str(&ok(&["score", "wer", "--hyp", p(&h), "--ref", p(&rf)])).unwrap();
    assert_eq!(plain["corpus"]["wer"].as_f64(), Some(100.0));
    let canon: Value = serde_json::from_str(&ok(&["score", "wer", "--hyp", p(&h), "--ref", p(&rf), "--registry", p(&reg)])).unwrap();
    assert_eq!(canon["corpus"]["wer"].as_f64(), Some(0.0));
    let (ch, cr) = (tmp.path().join("ch.tsv"), tmp.path().join("cr.tsv"));
    ok(&["gloss-canonicalize", "--registry", p(&reg), "--hyp", p(&h), "--ref", p(&rf), "--out-hyp", p(&ch), "--out-ref", p(&cr)]);
    assert_eq!(fs::read_to_string(&ch).unwrap(), "x\tA\n");

    let bad = tmp.path().join("bad.tsv");
    fs::write(&bad, "s1\tA(\n").unwrap();
    let out = run(&["gloss-normalize", "--input", p(&bad), "--output", p(&seq)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("s1"));
}

fn sample(id: &str, frames: usize, glosses: &[&str], text: &str) -> SampleRecord {
    SampleRecord {
        sample_id: id.into(),
        signer_id: "a".into(),
        episode_id: "e".into(),
        start_frame: 0,
        end_frame: frames,
        fps: 25.0,
        glosses: glosses.iter().map(|g| g.to_string()).collect(),
        text: text.into(),
    }
}

#[test]
fn split_and_stats_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = tmp.path().join("m.jsonl");
    let samples = vec![
        sample("s1", 100, &["A", "B", "A"], "天氣好"),
        sample("s2", 50, &["B", "C"], "天 晴"),
        sample("s3", 75, &["A", "D"], "好雨"),
    ];
    write_manifest(&manifest, &samples).unwrap();
    let split = tmp.path().join("split.tsv");
    fs::write(&split, "s1\ttrain\ns2\ttrain\ns3\tdev\n").unwrap();
    let st: Value = serde_json::from_str(&ok(&["stats", "--manifest", p(&manifest), "--split", p(&split), "--json"])).unwrap();
    assert_eq!(st["dev"]["gloss_oovs"], 1);
    assert_eq!(st["dev"]["char_oovs"], 1);
    assert_eq!(st["train"]["gloss_oovs"], Value::Null);
    assert_eq!(st["overall"]["running_chars"], 7);
    assert!(ok(&["stats", "--manifest", p(&manifest), "--split", p(&split)]).contains("N/A"));

    let big = tmp.path().join("big.jsonl");
    let vocab = ["甲", "乙", "丙", "丁", "戊", "己"];
    let many: Vec<SampleRecord> = (0..300)
        .map(|i| sample(&format!("x{i:03}"), 100, &[vocab[i % 6], vocab[(i / 6) % 6]], "字"))
        .collect();
    write_manifest(&big, &many).unwrap();
    let out = tmp.path().join("big_split.tsv");
    let summary: Value = serde_json::from_str(&ok(&["--set", "split.seed=5", "split", "--manifest", p(&big), "--out", p(&out)])).unwrap();
    assert_eq!(summary["counts"]["dev"], 15);
    assert_eq!(summary["counts"]["test"], 15);
    assert_eq!(summary["fallback"], false);
    let first = fs::read(&out).unwrap();
    ok(&["--set", "split.seed=5", "split", "--manifest", p(&big), "--out", p(&out)]);
    assert_eq!(fs::read(&out).unwrap(), first);
    assert_eq!(run(&["split", "--manifest", p(&tmp.path().join("none.jsonl")), "--out", p(&out)]).status.code(), Some(2));
}

#[test]
fn store_init_and_serve() {
    let tmp = tempfile::tempdir().unwrap();
    let e = synth(tmp.path(), 11, &["--signs", "3"]);
    ok(&["all", p(&e)]);
    let store = tmp.path().join("store");
    let out = run(&["store-init", "--store", p(&store), "--signer", "s9", p(&e)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = Store::open(&store, true).unwrap();
    let tasks = s.list_tasks(&TaskFilter::default());
    let truth = read_records(&e.join("truth.jsonl"));
    assert_eq!(tasks.len(), truth.len());
    let first = s.get_task(&tasks[0].sample_id).unwrap();
    assert_eq!(first.subtitle_text, truth[0].joined_text);
    assert_eq!((first.status, first.signer.as_str()), (Status::Unannotated, "s9"));
    drop(s);

    let mut child = bin()
        .args(["serve", "--store", p(&store), "--bind", "127.0.0.1:0"])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stderr.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.rsplit("http://").next().unwrap().trim().to_string();
    let mut conn = TcpStream::connect(&addr).unwrap();
    write!(conn, "GET /tasks?status=unannotated HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n").unwrap();
    let mut resp = String::new();
    conn.read_to_string(&mut resp).unwrap();
    child.kill().unwrap();
    let _ = child.wait();
    assert!(resp.starts_with("HTTP/1.1 200"), "{resp}");
    let body: Value = serde_json::from_str(resp.split("\r\n\r\n").nth(1).unwrap()).unwrap();
    assert_eq!(body.as_array().unwrap().len(), truth.len());

    assert_eq!(run(&["serve", "--store", p(&tmp.path().join("none"))]).status.code(), Some(2));
}
