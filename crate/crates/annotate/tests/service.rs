use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::thread;

use serde_json::{json, Value};
use signcorpus_annotate::{serve, ServiceConfig, ServiceHandle, Store, TaskSeed};

fn seed(id: &str, episode: &str, start: usize, media: &str) -> TaskSeed {
    TaskSeed {
        sample_id: id.into(),
        media: media.into(),
        subtitle_text: format!("字幕 {id}"),
        signer: "signer-1".into(),
        episode: episode.into(),
        start_frame: start,
        end_frame: start + 90,
    }
}

fn setup(dir: &Path) {
    fs::create_dir_all(dir.join("clips/t2")).unwrap();
    fs::write(dir.join("clips/t1.mp4"), b"not really a video").unwrap();
    fs::write(dir.join("clips/t2/000001.png"), b"png1").unwrap();
    fs::write(dir.join("clips/t2/000000.png"), b"png0").unwrap();
    Store::create(
        dir,
        vec![
            seed("t2", "ep-b", 10, "clips/t2"),
            seed("t1", "ep-a", 400, "clips/t1.mp4"),
            seed("t 3", "ep-a", 30, "clips/none.mp4"),
        ],
    )
    .unwrap();
}

fn start(dir: &Path, read_only: bool) -> ServiceHandle {
    serve(&ServiceConfig {
        store_dir: dir.to_path_buf(),
        bind: "127.0.0.1:0".into(),
        read_only,
        workers: 8,
    })
    .unwrap()
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder().http_status_as_error(false).build().into()
}

fn get(a: &ureq::Agent, url: &str) -> (u16, Vec<u8>) {
    let mut r = a.get(url).call().unwrap();
    let status = r.status().as_u16();
    (status, r.body_mut().read_to_vec().unwrap())
}

fn get_json(a: &ureq::Agent, url: &str) -> (u16, Value) {
    let (s, b) = get(a, url);
    (s, serde_json::from_slice(&b).unwrap())
}

fn send(a: &ureq::Agent, method: &str, url: &str, body: Value) -> (u16, Value) {
    let bytes = serde_json::to_vec(&body).unwrap();
    let mut r = match method {
        "PUT" => a.put(url).header("Content-Type", "application/json").send(&bytes[..]),
        _ => a.post(url).header("Content-Type", "application/json").send(&bytes[..]),
    }
    .unwrap();
    let status = r.status().as_u16();
    (status, serde_json::from_slice(&r.body_mut().read_to_vec().unwrap()).unwrap())
}

#[test]
fn endpoints() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    let h = start(dir.path(), false);
    let base = format!("http://{}", h.addr);
    let a = agent();

    let (s, list) = get_json(&a, &format!("{base}/tasks"));
    assert_eq!(s, 200);
    let ids: Vec<&str> = list.as_array().unwrap().iter().map(|t| t["sample_id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["t 3", "t1", "t2"]);

    let (s, t) = get_json(&a, &format!("{base}/tasks/t1"));
    assert_eq!(s, 200);
    assert_eq!(t["subtitle_text"], "字幕 t1");
    assert_eq!(t["status"], "unannotated");
    assert_eq!(t["version"], 0);

    let (s, e) = get_json(&a, &format!("{base}/tasks/nope"));
    assert_eq!((s, e["error"]["code"].as_str()), (404, Some("not_found")));

    // round trip of a homosign annotation
    let (s, r) = send(&a, "PUT", &format!("{base}/tasks/t1/annotation"), json!({"raw": "X(=Y=Z) A+B", "expected_version": 0}));
    assert_eq!((s, r["version"].as_u64(), r["status"].as_str()), (200, Some(1), Some("draft")));
    let (_, t) = get_json(&a, &format!("{base}/tasks/t1"));
    assert_eq!(t["raw_annotation"], "X(=Y=Z) A+B");

    let (s, e) = send(&a, "PUT", &format!("{base}/tasks/t1/annotation"), json!({"raw": "A", "expected_version": 0}));
    assert_eq!((s, e["error"]["code"].as_str(), e["error"]["current_version"].as_u64()), (409, Some("conflict"), Some(1)));

    let (s, e) = send(&a, "PUT", &format!("{base}/tasks/t1/annotation"), json!({"raw": "A(", "expected_version": 1}));
    assert_eq!((s, e["error"]["code"].as_str()), (422, Some("invalid_annotation")));
    assert_eq!(e["error"]["diagnostics"][0]["offset"], 1);

    let (s, r) = send(&a, "PUT", &format!("{base}/tasks/t%203/annotation"), json!({"raw": "天氣", "expected_version": 0, "done": true}));
    assert_eq!((s, r["status"].as_str()), (200, Some("done")));

    let (_, done) = get_json(&a, &format!("{base}/tasks?status=done"));
    assert_eq!(done.as_array().unwrap().len(), 1);
    let (_, ep) = get_json(&a, &format!("{base}/tasks?episode=ep-b&signer=signer-1"));
    assert_eq!(ep[0]["sample_id"], "t2");
    let (s, _) = get_json(&a, &format!("{base}/tasks?status=bogus"));
    assert_eq!(s, 400);

    let (s, ok) = send(&a, "POST", &format!("{base}/validate"), json!({"raw": "X(=Y=Z)"}));
    assert_eq!((s, ok["ok"].as_bool()), (200, Some(true)));
    let (_, bad) = send(&a, "POST", &format!("{base}/validate"), json!({"raw": ""}));
    assert_eq!(bad["diagnostics"][0]["message"], "empty annotation");
    let (_, bad) = send(&a, "POST", &format!("{base}/validate"), json!({"raw": "A B(?"}));
    let d = &bad["diagnostics"][0];
    assert_eq!((d["offset"].as_u64(), d["token_index"].as_u64()), (Some(3), Some(1)));
    assert!(!d["expected"].as_str().unwrap().is_empty());

    assert_eq!(get(&a, &format!("{base}/tasks/t1/media")), (200, b"not really a video".to_vec()));
    let (_, frames) = get_json(&a, &format!("{base}/tasks/t2/media"));
    assert_eq!(frames["frames"], json!(["000000.png", "000001.png"]));
    assert_eq!(get(&a, &format!("{base}/tasks/t2/media/000001.png")), (200, b"png1".to_vec()));
    assert_eq!(get(&a, &format!("{base}/tasks/t%203/media")).0, 404);
    assert_eq!(get(&a, &format!("{base}/tasks/t2/media/..%2Fsecret")).0, 400);
    assert_eq!(get(&a, &format!("{base}/elsewhere")).0, 404);
    h.shutdown();
}

#[test]
fn read_only_service_refuses_writes() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    let h = start(dir.path(), true);
    let a = agent();
    let (s, e) = send(&a, "PUT", &format!("http://{}/tasks/t1/annotation", h.addr), json!({"raw": "A", "expected_version": 0}));
    assert_eq!((s, e["error"]["code"].as_str()), (403, Some("read_only")));
    h.shutdown();
    assert!(fs::read(dir.path().join("annotations.jsonl")).unwrap().is_empty());
}

#[test]
fn concurrent_writers_one_accept_per_version() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    let h = start(dir.path(), false);
    let base = format!("http://{}", h.addr);
    let accepted: Arc<Mutex<BTreeMap<u64, Vec<usize>>>> = Arc::default();
    let writers: Vec<_> = (0..6)
        .map(|w| {
            let base = base.clone();
            let accepted = Arc::clone(&accepted);
            thread::spawn(move || {
                let a = agent();
                for round in 0..15 {
                    let (_, t) = get_json(&a, &format!("{base}/tasks/t2"));
                    let v = t["version"].as_u64().unwrap();
                    let raw = format!("W{w} R{round}");
                    let (s, r) = send(&a, "PUT", &format!("{base}/tasks/t2/annotation"), json!({"raw": raw, "expected_version": v}));
                    match s {
                        200 => {
                            assert_eq!(r["version"].as_u64(), Some(v + 1));
                            accepted.lock().unwrap().entry(v + 1).or_default().push(w);
                        }
                        409 => assert_eq!(r["error"]["code"], "conflict"),
                        other => panic!("unexpected status {other}"),
                    }
                }
            })
        })
        .collect();
    for w in writers {
        w.join().unwrap();
    }
    let accepted = accepted.lock().unwrap();
    assert!(accepted.values().all(|ws| ws.len() == 1));
    let versions: Vec<u64> = accepted.keys().copied().collect();
    assert_eq!(versions, (1..=versions.len() as u64).collect::<Vec<_>>());
    let a = agent();
    let (_, t) = get_json(&a, &format!("{base}/tasks/t2"));
    assert_eq!(t["version"].as_u64(), Some(versions.len() as u64));
    h.shutdown();

    // the log alone reproduces the final state
    let log = fs::read_to_string(dir.path().join("annotations.jsonl")).unwrap();
    assert_eq!(log.lines().count(), versions.len());
    assert_eq!(Store::open(dir.path(), true).unwrap().get_task("t2").unwrap().version, versions.len() as u64);
}
