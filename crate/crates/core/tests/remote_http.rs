//! The HTTP client against a stub adapter speaking the `/v1/*` protocol.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use image::{Rgb, RgbImage};
use reasonedit_core::gateway::config::BackendConfig;
use reasonedit_core::gateway::conformance::{self, Outcome};
use reasonedit_core::gateway::mock::{FillInpainter, HashEmbedder, Palette, PaletteEntry, RuleChat};
use reasonedit_core::gateway::protocol::*;
use reasonedit_core::gateway::remote::{HttpTransport, RemoteClient};
use reasonedit_core::gateway::{
    ChatBackend, ChatMessage, ChatRequest, DepthEstimator, Detector, EmbedOutput, EmbedPayload, Embedder,
    Gateway, GatewayError, Inpainter, Role, Segmenter, Service,
};
use reasonedit_core::raster;
use reasonedit_core::ssr::BinaryMask;
use serde_json::{json, Value};

#[derive(Debug, Clone)]
struct Seen {
    method: String,
    path: String,
    headers: HashMap<String, String>,
    body: Value,
}

type Handler = dyn Fn(&Seen) -> (u16, Value) + Send + Sync;

struct Stub {
    url: String,
    seen: Arc<Mutex<Vec<Seen>>>,
}

impl Stub {
    fn start(handler: Arc<Handler>) -> Stub {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let seen = Arc::new(Mutex::new(Vec::new()));
        let log = seen.clone();
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { continue };
                let (h, log) = (handler.clone(), log.clone());
                std::thread::spawn(move || serve(stream, &*h, &log));
            }
        });
        Stub { url, seen }
    }

    fn seen(&self) -> Vec<Seen> {
        self.seen.lock().unwrap().clone()
    }
}

fn serve(stream: TcpStream, handler: &Handler, log: &Mutex<Vec<Seen>>) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut out = stream;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        let mut parts = line.split_whitespace();
        let method = parts.next().unwrap_or_default().to_string();
        let path = parts.next().unwrap_or_default().to_string();
        let mut headers = HashMap::new();
        loop {
            let mut h = String::new();
            reader.read_line(&mut h).unwrap();
            let h = h.trim_end();
            if h.is_empty() {
                break;
            }
            if let Some((k, v)) = h.split_once(':') {
                headers.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
            }
        }
        let len: usize = headers.get("content-length").and_then(|v| v.parse().ok()).unwrap_or(0);
        let mut buf = vec![0; len];
        reader.read_exact(&mut buf).unwrap();
        let body = if buf.is_empty() { Value::Null } else { serde_json::from_slice(&buf).unwrap() };
        let seen = Seen { method, path, headers, body };
        log.lock().unwrap().push(seen.clone());
        let (code, reply) = handler(&seen);
        let text = reply.to_string();
        let head = format!(
            "HTTP/1.1 {code} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n",
            text.len()
        );
        if out.write_all(head.as_bytes()).and_then(|_| out.write_all(text.as_bytes())).is_err() {
            return;
        }
    }
}

fn image() -> RgbImage {
    let mut img = RgbImage::new(32, 24);
    for y in 4..12 {
        for x in 4..12 {
            img.put_pixel(x, y, Rgb([220, 30, 30]));
        }
    }
    img
}

/// A whole adapter fleet on one port, backed by the in-process mocks.
fn mock_adapter(seen: &Seen) -> (u16, Value) {
    let palette = Palette::new([0, 0, 0], vec![PaletteEntry::new([220, 30, 30], "block", 0.2)]);
    let b = &seen.body;
    let img = |key: &str| raster::png_from_base64(b[key].as_str().unwrap()).unwrap();
    let id = b["request_id"].clone();
    let reply = match seen.path.as_str() {
        "/v1/info" => json!({"service": "all", "model": "mock", "device": "cpu", "protocol_version": 1}),
        "/v1/segment" => {
            let masks = palette.segment(&img("image_png"), b["threshold"].as_f64()).unwrap();
            json!({"request_id": id, "masks": masks})
        }
        "/v1/detect" => json!({"request_id": id, "detections": palette.detect(&img("image_png"), None).unwrap()}),
        "/v1/depth" => json!({"request_id": id, "depth": palette.estimate_depth(&img("image_png")).unwrap()}),
        "/v1/inpaint" => {
            let mask: BinaryMask = serde_json::from_value(b["mask"].clone()).unwrap();
            let out = FillInpainter::new([0, 0, 0]).inpaint(&img("image_png"), &mask, "").unwrap();
            json!({"request_id": id, "image_png": raster::png_base64(&out)})
        }
        "/v1/embed" => {
            let req: EmbedRequest = serde_json::from_value(b.clone()).unwrap();
            let decode = |s: &Option<String>| raster::png_from_base64(s.as_deref().unwrap()).unwrap();
            let e = HashEmbedder { seed: 3 };
            let out = match (&req.text, &req.reference_png) {
                (Some(t), _) => e.embed(&EmbedPayload::Text(t), req.model),
                (None, Some(_)) => {
                    let (a, c) = (decode(&req.reference_png), decode(&req.image_png));
                    e.embed(&EmbedPayload::ImagePair(&a, &c), req.model)
                }
                (None, None) => e.embed(&EmbedPayload::Image(&decode(&req.image_png)), req.model),
            }
            .unwrap();
            match out {
                EmbedOutput::Vector(v) => json!({"request_id": id, "vector": v}),
                EmbedOutput::Distance(d) => json!({"request_id": id, "distance": d}),
            }
        }
        "/v1/chat" => {
            let req: ChatWireRequest = serde_json::from_value(b.clone()).unwrap();
            let chat = RuleChat::default().rule("decompose", &[], json!({"subtasks": ["remove the block"]}));
            let text = chat
                .complete(&ChatRequest::new(
                    req.schema,
                    req.messages.into_iter().map(|m| ChatMessage::text(m.role, m.content)).collect(),
                ))
                .unwrap();
            json!({"request_id": id, "text": text})
        }
        _ => return (404, json!({"error": "no such route"})),
    };
    (200, reply)
}

fn client(url: &str, service: Service, retries: u32) -> RemoteClient {
    let t = HttpTransport::new(url, Duration::from_secs(5), Some("s3cret".into()));
    RemoteClient::new(service, Arc::new(t)).with_retries(retries)
}

#[test]
fn conformance_over_http() {
    let stub = Stub::start(Arc::new(mock_adapter));
    let mut c = BackendConfig::default();
    for s in Service::ALL {
        c.endpoints.set(s, stub.url.clone());
    }
    c.auth_token = Some("s3cret".into());
    let report = conformance::run(&c.connect().unwrap());
    for check in &report.checks {
        assert_eq!(check.outcome, Outcome::Pass, "{check}");
    }
    for s in stub.seen() {
        assert_eq!(s.headers["authorization"], "Bearer s3cret");
        assert_eq!(s.method, "POST");
        assert_eq!(s.headers["idempotency-key"], s.body["request_id"].as_str().unwrap());
    }
}

#[test]
fn manifest() {
    let stub = Stub::start(Arc::new(mock_adapter));
    let m = client(&stub.url, Service::Segment, 0).info().unwrap();
    assert_eq!(m.protocol_version, PROTOCOL_VERSION);
    assert_eq!(stub.seen()[0].method, "GET");

    let old = Stub::start(Arc::new(|_: &Seen| {
        (200, json!({"service": "segment", "model": "m", "device": "cpu", "protocol_version": 0}))
    }));
    assert!(matches!(
        client(&old.url, Service::Segment, 0).info(),
        Err(GatewayError::ProtocolViolation { .. })
    ));
}

#[test]
fn retries_5xx_with_the_same_key() {
    let calls = Arc::new(Mutex::new(0));
    let n = calls.clone();
    let stub = Stub::start(Arc::new(move |s: &Seen| {
        let mut n = n.lock().unwrap();
        *n += 1;
        if *n < 3 {
            (503, json!({"error": "warming up"}))
        } else {
            (200, json!({"request_id": s.body["request_id"], "masks": []}))
        }
    }));
    let gw = Gateway::new().with_segmenter(Arc::new(client(&stub.url, Service::Segment, 2)));
    assert_eq!(gw.segment(&image(), None).unwrap(), vec![]);
    let seen = stub.seen();
    assert_eq!(seen.len(), 3);
    assert!(seen.iter().all(|s| s.headers["idempotency-key"] == seen[0].headers["idempotency-key"]));
}

#[test]
fn client_errors_are_not_retried() {
    let stub = Stub::start(Arc::new(|_: &Seen| (400, json!({"error": "image too small"}))));
    let gw = Gateway::new().with_depth(Arc::new(client(&stub.url, Service::Depth, 3)));
    match gw.estimate_depth(&image()) {
        Err(GatewayError::InvalidRequest { detail, .. }) => assert!(detail.contains("image too small")),
        other => panic!("{other:?}"),
    }
    assert_eq!(stub.seen().len(), 1);
}

#[test]
fn out_of_range_depth_is_a_violation() {
    let stub = Stub::start(Arc::new(|_: &Seen| {
        (200, json!({"depth": {"width": 1, "height": 1, "values": [1.5]}}))
    }));
    let gw = Gateway::new().with_depth(Arc::new(client(&stub.url, Service::Depth, 0)));
    assert!(matches!(
        gw.estimate_depth(&RgbImage::new(1, 1)),
        Err(GatewayError::ProtocolViolation { .. })
    ));
}

#[test]
fn unreachable_after_retries() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let gw = Gateway::new().with_chat(Arc::new(client(&format!("http://127.0.0.1:{port}"), Service::Chat, 1)));
    let req = ChatRequest::new("decompose", vec![ChatMessage::text(Role::User, "x")]);
    assert!(matches!(gw.chat(&req), Err(GatewayError::Backend { service: Service::Chat, .. })));
}
