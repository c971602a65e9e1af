use std::fs;
use std::io::Read;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use percent_encoding::percent_decode_str;
use serde::Deserialize;
use serde_json::{json, Value};
use tiny_http::{Header, Method, Request, Response, Server};

use crate::store::{validate, Status, Store, StoreError, TaskFilter};

const MAX_BODY: u64 = 1 << 20;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub store_dir: PathBuf,
    /// `host:port`; port 0 picks a free one.
    pub bind: String,
    pub read_only: bool,
    pub workers: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            store_dir: PathBuf::from("store"),
            bind: "127.0.0.1:8765".into(),
            read_only: false,
            workers: 4,
        }
    }
}

pub struct ServiceHandle {
    pub addr: SocketAddr,
    server: Arc<Server>,
    workers: Vec<JoinHandle<()>>,
}

impl ServiceHandle {
    /// Stops accepting requests and waits for the workers to finish.
    pub fn shutdown(self) {
        for _ in &self.workers {
            self.server.unblock();
        }
        for w in self.workers {
            let _ = w.join();
        }
    }

    /// Blocks until the workers exit.
    pub fn join(self) {
        for w in self.workers {
            let _ = w.join();
        }
    }
}

/// Opens the store and starts serving on `config.bind`.
pub fn serve(config: &ServiceConfig) -> Result<ServiceHandle, StoreError> {
    let store = Arc::new(Store::open(&config.store_dir, config.read_only)?);
    let server = Server::http(&config.bind)
        .map_err(|e| StoreError::Io(std::io::Error::other(format!("bind {}: {e}", config.bind))))?;
    let addr = server
        .server_addr()
        .to_ip()
        .ok_or_else(|| StoreError::Io(std::io::Error::other("not an IP listener")))?;
    let server = Arc::new(server);
    let workers = (0..config.workers.max(1))
        .map(|_| {
            let server = Arc::clone(&server);
            let store = Arc::clone(&store);
            thread::spawn(move || {
                while let Ok(req) = server.recv() {
                    handle(&store, req);
                }
            })
        })
        .collect();
    Ok(ServiceHandle { addr, server, workers })
}

struct Reply {
    status: u16,
    body: Vec<u8>,
    content_type: &'static str,
}

impl Reply {
    fn json(status: u16, v: Value) -> Reply {
        Reply {
            status,
            body: serde_json::to_vec(&v).expect("json value serializes"),
            content_type: "application/json; charset=utf-8",
        }
    }

    fn error(status: u16, code: &str, message: impl Into<String>, extra: Value) -> Reply {
        let mut err = json!({ "code": code, "message": message.into() });
        if let (Value::Object(e), Value::Object(x)) = (&mut err, extra) {
            e.extend(x);
        }
        Reply::json(status, json!({ "error": err }))
    }
}

impl From<StoreError> for Reply {
    fn from(e: StoreError) -> Reply {
        let msg = e.to_string();
        match e {
            StoreError::NotFound(_) => Reply::error(404, "not_found", msg, json!({})),
            StoreError::Conflict { current, .. } => {
                Reply::error(409, "conflict", msg, json!({ "current_version": current }))
            }
            StoreError::Invalid(d) => Reply::error(422, "invalid_annotation", msg, json!({ "diagnostics": d })),
            StoreError::BadRequest(_) => Reply::error(400, "bad_request", msg, json!({})),
            StoreError::ReadOnly => Reply::error(403, "read_only", msg, json!({})),
            StoreError::Corrupt { .. } | StoreError::Io(_) => Reply::error(500, "internal", msg, json!({})),
        }
    }
}

#[derive(Deserialize)]
struct Submission {
    raw: String,
    expected_version: u64,
    #[serde(default)]
    done: bool,
    #[serde(default)]
    flagged: bool,
}

#[derive(Deserialize)]
struct ValidateBody {
    raw: String,
}

fn handle(store: &Store, mut req: Request) {
    let reply = route(store, &mut req);
    let header = Header::from_bytes("Content-Type", reply.content_type).expect("static header");
    let resp = Response::from_data(reply.body).with_status_code(reply.status).with_header(header);
    let _ = req.respond(resp);
}

fn read_json<T: for<'de> Deserialize<'de>>(req: &mut Request) -> Result<T, Reply> {
    let mut body = String::new();
    req.as_reader()
        .take(MAX_BODY)
        .read_to_string(&mut body)
        .map_err(|e| Reply::error(400, "bad_request", format!("unreadable body: {e}"), json!({})))?;
    serde_json::from_str(&body).map_err(|e| Reply::error(400, "bad_request", format!("bad body: {e}"), json!({})))
}

fn route(store: &Store, req: &mut Request) -> Reply {
    let url = match url::Url::parse(&format!("http://service{}", req.url())) {
        Ok(u) => u,
        Err(e) => return Reply::error(400, "bad_request", e.to_string(), json!({})),
    };
    let segments: Vec<String> = url
        .path_segments()
        .into_iter()
        .flatten()
        .filter(|s| !s.is_empty())
        .map(|s| percent_decode_str(s).decode_utf8_lossy().into_owned())
        .collect();
    let segs: Vec<&str> = segments.iter().map(String::as_str).collect();
    let method = req.method().clone();
    let result = match (&method, segs.as_slice()) {
        (Method::Get, ["tasks"]) => list(store, &url),
        (Method::Get, ["tasks", id]) => store.get_task(id).map(|t| Reply::json(200, json!(t))).map_err(Reply::from),
        (Method::Get, ["tasks", id, "media"]) => media(store, id, None),
        (Method::Get, ["tasks", id, "media", name]) => media(store, id, Some(name)),
        (Method::Put, ["tasks", id, "annotation"]) => read_json::<Submission>(req).and_then(|s| {
            store
                .put_annotation(id, &s.raw, s.expected_version, s.done, s.flagged)
                .map_err(Reply::from)
                .and_then(|v| store.get_task(id).map_err(Reply::from).map(|t| (v, t)))
                .map(|(v, t)| Reply::json(200, json!({ "version": v, "status": t.status })))
        }),
        (Method::Post, ["validate"]) => read_json::<ValidateBody>(req).map(|b| match validate(&b.raw) {
            Ok(()) => Reply::json(200, json!({ "ok": true, "diagnostics": [] })),
            Err(d) => Reply::json(200, json!({ "ok": false, "diagnostics": d })),
        }),
        (_, ["tasks"] | ["tasks", _] | ["tasks", _, "media"] | ["tasks", _, "media", _] | ["tasks", _, "annotation"] | ["validate"]) => {
            Err(Reply::error(405, "method_not_allowed", format!("{method} not allowed here"), json!({})))
        }
        _ => Err(Reply::error(404, "not_found", format!("no route for {}", url.path()), json!({}))),
    };
    result.unwrap_or_else(|r| r)
}

fn list(store: &Store, url: &url::Url) -> Result<Reply, Reply> {
    let mut filter = TaskFilter::default();
    for (k, v) in url.query_pairs() {
        match k.as_ref() {
            "status" => {
                filter.status = Some(
                    v.parse::<Status>()
                        .map_err(|e| Reply::error(400, "bad_request", e, json!({})))?,
                )
            }
            "signer" => filter.signer = Some(v.into_owned()),
            "episode" => filter.episode = Some(v.into_owned()),
            other => return Err(Reply::error(400, "bad_request", format!("unknown parameter {other}"), json!({}))),
        }
    }
    Ok(Reply::json(200, json!(store.list_tasks(&filter))))
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("mp4") => "video/mp4",
        Some("webm") => "video/webm",
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("json") => "application/json",
        _ => "application/octet-stream",
    }
}

/// A media file is sent as is; a frame directory is listed, and its frames
/// fetched one by one by name.
fn media(store: &Store, id: &str, name: Option<&str>) -> Result<Reply, Reply> {
    let path = store.media_path(id).map_err(Reply::from)?;
    let missing = |p: &Path| Reply::error(404, "not_found", format!("missing media {}", p.display()), json!({}));
    let file = match name {
        Some(n) => {
            if n.contains('/') || n.contains('\\') || n == ".." || n == "." {
                return Err(Reply::error(400, "bad_request", "bad frame name", json!({})));
            }
            path.join(n)
        }
        None if path.is_dir() => {
            let mut frames: Vec<String> = fs::read_dir(&path)
                .map_err(|_| missing(&path))?
                .filter_map(|e| e.ok())
                .filter(|e| e.path().is_file())
                .filter_map(|e| e.file_name().into_string().ok())
                .collect();
            frames.sort();
            return Ok(Reply::json(200, json!({ "frames": frames })));
        }
        None => path,
    };
    let body = fs::read(&file).map_err(|_| missing(&file))?;
    Ok(Reply {
        status: 200,
        body,
        content_type: content_type(&file),
    })
}
