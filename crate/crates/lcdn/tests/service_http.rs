//! End-to-end tests of the flow-dispatcher HTTP service over a real
//! socket, with a minimal hand-rolled HTTP/1.1 client.

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::time::Duration;

use serde_json::{json, Value};

use lcdn::admission::ControllerConfig;
use lcdn::iface::http::AppState;

struct TestServer {
    addr: SocketAddr,
    _runtime: tokio::runtime::Runtime,
}

fn start_server() -> TestServer {
    let runtime = tokio::runtime::Runtime::new().unwrap();
    let listener = runtime
        .block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))
        .unwrap();
    let addr = listener.local_addr().unwrap();
    let app = AppState::empty(ControllerConfig::default());
    runtime.spawn(async move {
        let router = lcdn::iface::http::router(app);
        axum::serve(listener, router).await.unwrap();
    });
    TestServer {
        addr,
        _runtime: runtime,
    }
}

fn request(addr: SocketAddr, method: &str, path: &str, body: Option<&Value>) -> (u16, Value) {
    let payload = body.map(|b| b.to_string()).unwrap_or_default();
    let mut stream = TcpStream::connect(addr).unwrap();
    stream.set_read_timeout(Some(Duration::from_secs(10))).unwrap();
    let request = format!(
        "{method} {path} HTTP/1.1\r\nhost: test\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{payload}",
        payload.len()
    );
    stream.write_all(request.as_bytes()).unwrap();
    let mut response = Vec::new();
    stream.read_to_end(&mut response).unwrap();
    let text = String::from_utf8(response).unwrap();
    let status: u16 = text
        .split_whitespace()
        .nth(1)
        .expect("status line")
        .parse()
        .unwrap();
    let body_text = text.split("\r\n\r\n").nth(1).unwrap_or("");
    let body = if body_text.trim().is_empty() {
        Value::Null
    } else {
        serde_json::from_str(body_text).unwrap_or(Value::Null)
    };
    (status, body)
}

/// Symmetric neighbor reports for the three-switch, two-host triangle.
fn triangle_reports() -> Value {
    let mut reports = Vec::new();
    let mut push_pair =
        |a: &str, ak: &str, ap: u16, b: &str, bk: &str, bp: u16| {
            reports.push(json!({
                "reporter": a, "a": a, "a_kind": ak, "a_port": ap,
                "b": b, "b_kind": bk, "b_port": bp, "rate_bps": 1e9
            }));
            reports.push(json!({
                "reporter": b, "a": b, "a_kind": bk, "a_port": bp,
                "b": a, "b_kind": ak, "b_port": ap, "rate_bps": 1e9
            }));
        };
    push_pair("sa", "switch", 1, "sb", "switch", 1);
    push_pair("sb", "switch", 2, "sc", "switch", 1);
    push_pair("sa", "switch", 2, "sc", "switch", 2);
    push_pair("h1", "host", 1, "sa", "switch", 3);
    push_pair("h2", "host", 1, "sc", "switch", 3);
    json!({ "reports": reports })
}

fn flow_body(id: &str, deadline_us: f64) -> Value {
    json!({
        "id": id,
        "src": "h1",
        "dst": "h2",
        "rate_bps": 3e6,
        "burst_bytes": 1542,
        "deadline_us": deadline_us,
    })
}

#[test]
fn full_service_lifecycle() {
    let server = start_server();

    // Before topology ingest everything flow-related is 503.
    let (status, _) = request(server.addr, "GET", "/flows", None);
    assert_eq!(status, 503);
    let (status, _) = request(server.addr, "POST", "/flows", Some(&flow_body("f", 100.0)));
    assert_eq!(status, 503);

    // Ingest discovery reports.
    let (status, body) = request(server.addr, "POST", "/lldp", Some(&triangle_reports()));
    assert_eq!(status, 200);
    assert_eq!(body["nodes"], 5);
    assert_eq!(body["links"], 5);
    assert_eq!(body["management_flows"], 2);

    // Feasible admission: 201 with the guarantee attached.
    let (status, body) =
        request(server.addr, "POST", "/flows", Some(&flow_body("good", 200.0)));
    assert_eq!(status, 201, "{body}");
    assert_eq!(body["accepted"], true);
    assert_eq!(body["vlan_id"], 1);
    let bound = body["delay_bound_us"].as_f64().unwrap();
    assert!(bound > 0.0 && bound <= 200.0);
    assert!(body["path"].as_array().is_some());

    // The reported bound is exactly what the persisted state recomputes.
    let (status, state) = request(server.addr, "GET", "/state", None);
    assert_eq!(status, 200);
    let restored = lcdn::iface::snapshot::restore_from_str(&state.to_string()).unwrap();
    let recomputed = restored.recompute_analysis().flows["good"].e2e_delay_s * 1e6;
    assert!((recomputed - bound).abs() < 1e-9, "{recomputed} vs {bound}");

    // Infeasible deadline: 409 with a machine-readable reason.
    let (status, body) =
        request(server.addr, "POST", "/flows", Some(&flow_body("bad", 1.0)));
    assert_eq!(status, 409);
    assert_eq!(body["accepted"], false);
    assert_eq!(body["reason"], "DeadlineInfeasible");

    // Duplicate id: 409.
    let (status, body) =
        request(server.addr, "POST", "/flows", Some(&flow_body("good", 200.0)));
    assert_eq!(status, 409, "{body}");

    // Malformed body: 400.
    let (status, _) = request(
        server.addr,
        "POST",
        "/flows",
        Some(&json!({ "src": "h1" })),
    );
    assert_eq!(status, 400);

    // Unknown endpoint in a well-formed body: 400.
    let (status, _) = request(
        server.addr,
        "POST",
        "/flows",
        Some(&json!({
            "id": "ghostly", "src": "h1", "dst": "ghost",
            "rate_bps": 1e6, "burst_bytes": 1542, "deadline_us": 100.0
        })),
    );
    assert_eq!(status, 400);

    // Listing includes management and data flows.
    let (status, flows) = request(server.addr, "GET", "/flows", None);
    assert_eq!(status, 200);
    let ids: Vec<&str> = flows
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["id"].as_str().unwrap())
        .collect();
    assert_eq!(ids, vec!["good", "mgmt-sb", "mgmt-sc"]);

    // Topology and config records are served.
    let (status, topo) = request(server.addr, "GET", "/topology", None);
    assert_eq!(status, 200);
    assert_eq!(topo["nodes"].as_object().map(|m| m.len()), Some(5));
    let (status, configs) = request(server.addr, "GET", "/configs", None);
    assert_eq!(status, 200);
    assert_eq!(configs["switches"].as_array().map(Vec::len), Some(3));
    assert_eq!(configs["hosts"].as_array().map(Vec::len), Some(1));

    // Simulation over the current state.
    let (status, report) = request(
        server.addr,
        "POST",
        "/simulate",
        Some(&json!({ "duration_s": 0.02, "seed": 9 })),
    );
    assert_eq!(status, 200);
    assert_eq!(report["violations"].as_array().map(Vec::len), Some(0));
    assert!(report["flows"]["good"]["packets_received"].as_u64().unwrap() > 0);

    // Removal: 204, then 404 for the unknown id.
    let (status, _) = request(server.addr, "DELETE", "/flows/good", None);
    assert_eq!(status, 204);
    let (status, _) = request(server.addr, "DELETE", "/flows/good", None);
    assert_eq!(status, 404);
}
