use std::net::SocketAddr;
use std::time::{Duration, Instant};

use futures_util::{SinkExt, StreamExt};
use ocular_core::cli::serve::{start, ServerHandle};
use ocular_core::config::Config;
use serde_json::Value;
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

async fn server() -> (ServerHandle, Ws) {
    let handle = start(Config::default(), SocketAddr::from(([127, 0, 0, 1], 0)), None)
        .await
        .unwrap();
    let (ws, _) = connect_async(format!("ws://{}/ws", handle.addr)).await.unwrap();
    (handle, ws)
}

async fn next_json(ws: &mut Ws) -> Value {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(5), ws.next())
            .await
            .expect("message within 5 s")
            .expect("stream open")
            .unwrap();
        if let Message::Text(t) = msg {
            return serde_json::from_str(&t).unwrap();
        }
    }
}

async fn next_frame(ws: &mut Ws) -> Value {
    loop {
        let v = next_json(ws).await;
        if v.get("error").is_none() {
            return v;
        }
    }
}

async fn send(ws: &mut Ws, v: Value) {
    ws.send(Message::Text(v.to_string())).await.unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn frames_stream_at_twenty_hertz_or_more() {
    let (h, mut ws) = server().await;
    let first = next_frame(&mut ws).await;
    for key in ["t", "left", "right", "head", "target"] {
        assert!(first.get(key).is_some(), "missing {key}: {first}");
    }
    for key in ["u", "v", "valid", "ex", "ey", "pan_deg", "tilt_deg", "mode"] {
        assert!(first["left"].get(key).is_some(), "missing left.{key}");
    }
    assert_eq!(first["target"]["z"], 2.0);
    let start = Instant::now();
    let mut n = 0;
    while start.elapsed() < Duration::from_secs(1) {
        next_frame(&mut ws).await;
        n += 1;
    }
    let rate = n as f64 / start.elapsed().as_secs_f64();
    assert!(rate >= 20.0, "{rate} Hz");
    h.shutdown();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn malformed_commands_get_error_frames() {
    let (h, mut ws) = server().await;
    next_frame(&mut ws).await;
    for bad in [
        "not json".to_string(),
        r#"{"cmd":"fly"}"#.to_string(),
        r#"{"cmd":"set_target","x":0}"#.to_string(),
        r#"{"cmd":"set_gains","pursuit":{"kp":-1}}"#.to_string(),
    ] {
        ws.send(Message::Text(bad.clone())).await.unwrap();
        let deadline = Instant::now() + Duration::from_secs(5);
        loop {
            assert!(Instant::now() < deadline, "no error frame for {bad}");
            let v = next_json(&mut ws).await;
            if let Some(e) = v.get("error") {
                assert!(e.is_string());
                break;
            }
        }
    }
    // still streaming
    next_frame(&mut ws).await;
    h.shutdown();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn approaching_face_makes_the_eyes_converge() {
    let (h, mut ws) = server().await;
    send(&mut ws, serde_json::json!({"cmd": "set_target", "x": 0.0, "y": 0.0, "z": 0.3})).await;
    let deadline = Instant::now() + Duration::from_secs(5);
    let expected = (0.035f64 / 0.3).atan().to_degrees();
    loop {
        let f = next_frame(&mut ws).await;
        let (l, r) = (f["left"]["pan_deg"].as_f64().unwrap(), f["right"]["pan_deg"].as_f64().unwrap());
        if f["target"]["z"] == 0.3 && l < 0.0 && r > 0.0 && (r - expected).abs() < 0.5 && (l + expected).abs() < 0.5 {
            break;
        }
        assert!(Instant::now() < deadline, "no convergence: {f}");
    }
    h.shutdown();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn head_gains_and_reset() {
    let (h, mut ws) = server().await;
    send(&mut ws, serde_json::json!({"cmd": "set_head", "yaw": 10.0, "pitch": 0.0})).await;
    send(&mut ws, serde_json::json!({"cmd": "set_gains", "vor_enabled": false})).await;
    let deadline = Instant::now() + Duration::from_secs(5);
    loop {
        let f = next_frame(&mut ws).await;
        if (f["head"]["yaw"].as_f64().unwrap() - 10.0).abs() < 1e-9 && f["vor_enabled"] == false {
            break;
        }
        assert!(Instant::now() < deadline);
    }
    send(&mut ws, serde_json::json!({"cmd": "reset"})).await;
    loop {
        let f = next_frame(&mut ws).await;
        if f["head"]["yaw"] == 0.0 && f["vor_enabled"] == true && f["t"].as_f64().unwrap() < 0.5 {
            break;
        }
        assert!(Instant::now() < deadline + Duration::from_secs(5));
    }
    h.shutdown();
}
