//! Live services on loopback with ephemeral ports.

use std::net::SocketAddr;
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use teleprobe::services::operate::{run_operator, OperateConfig};
use teleprobe::services::relay::{start_relay, RelayServiceConfig};
use teleprobe::services::robot::{start_robot, RobotServiceConfig};
use teleprobe::services::{DialPolicy, ServiceError, ServiceHandle};
use teleprobe_core::impair::ImpairmentModel;
use teleprobe_core::operator::{builtin_profile, OperatorConfig, TargetScript, TaskOutcome};
use teleprobe_core::protocol::{decode, encode, encode_text, Frame, LineDecoder, Role};
use teleprobe_core::relay::RelayConfig;
use teleprobe_core::robot::RobotConfig;
use teleprobe_core::{AxisId, Calibration, ProbeModel};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;
use tokio::time::timeout;
use tokio_tungstenite::tungstenite::Message;

const ANY: &str = "127.0.0.1:0";

fn quick_dial() -> DialPolicy {
    DialPolicy {
        attempts: 3,
        backoff: Duration::from_millis(50),
    }
}

async fn robot(robot: RobotConfig, relay: Option<String>, assets: Option<std::path::PathBuf>) -> ServiceHandle {
    start_robot(RobotServiceConfig {
        model: ProbeModel::new(Calibration::default()),
        robot,
        listen: ANY.parse().unwrap(),
        relay,
        assets,
        dial: quick_dial(),
    })
    .await
    .unwrap()
}

async fn relay() -> ServiceHandle {
    start_relay(RelayServiceConfig {
        relay: RelayConfig::symmetric(ImpairmentModel::preset("none").unwrap()),
        listen: ANY.parse().unwrap(),
        assets: None,
    })
    .await
    .unwrap()
}

/// Reads frames until `pred` matches one or two seconds pass.
async fn read_until(stream: &mut TcpStream, dec: &mut LineDecoder, pred: impl Fn(&Frame) -> bool) -> Option<Frame> {
    let mut buf = [0u8; 2048];
    let deadline = tokio::time::Instant::now() + Duration::from_secs(2);
    loop {
        let n = tokio::time::timeout_at(deadline, stream.read(&mut buf)).await.ok()?.ok()?;
        if n == 0 {
            return None;
        }
        for f in dec.push(&buf[..n]).into_iter().flatten() {
            if pred(&f) {
                return Some(f);
            }
        }
    }
}

async fn hello(addr: SocketAddr, role: Role, session: &str) -> (TcpStream, LineDecoder) {
    let mut s = TcpStream::connect(addr).await.unwrap();
    s.write_all(&encode(&Frame::hello(role, session)).unwrap()).await.unwrap();
    (s, LineDecoder::new())
}

fn short_script(axis: AxisId) -> TargetScript {
    TargetScript {
        axis,
        targets_deg: vec![6.0, -4.0],
        tolerance_deg: 1.0,
    }
}

fn operator(axis: AxisId, session: &str) -> OperatorConfig {
    let mut cfg = OperatorConfig::new(builtin_profile("manual").unwrap(), short_script(axis), 3);
    cfg.session = session.to_string();
    cfg
}

#[tokio::test]
async fn access_point_serves_one_operator_and_rejects_a_second() {
    let r = robot(RobotConfig::access_point(), None, None).await;
    let addr = r.endpoints.tcp.unwrap();
    let (mut first, mut dec1) = hello(addr, Role::Operator, "s").await;
    let greeting = read_until(&mut first, &mut dec1, |f| matches!(f, Frame::Hello(_))).await;
    assert!(greeting.is_some());
    assert!(read_until(&mut first, &mut dec1, |f| matches!(f, Frame::Imu(_))).await.is_some());

    let (mut second, mut dec2) = hello(addr, Role::Operator, "s").await;
    let busy = read_until(&mut second, &mut dec2, |f| matches!(f, Frame::Error(_))).await;
    match busy {
        Some(Frame::Error(e)) => assert_eq!(e.code, "busy"),
        other => panic!("expected busy, got {other:?}"),
    }
    r.abort();
}

#[tokio::test]
async fn scripted_operator_completes_against_access_point() {
    let r = robot(RobotConfig::access_point(), None, None).await;
    let config = OperateConfig {
        addr: r.endpoints.tcp.unwrap().to_string(),
        operator: operator(AxisId::SteerLR, "ap"),
        dial: quick_dial(),
    };
    let mut seen = 0;
    let result = timeout(Duration::from_secs(60), run_operator(config, |_| seen += 1))
        .await
        .unwrap()
        .unwrap();
    assert_eq!(result.outcome, TaskOutcome::Completed);
    assert_eq!(result.segments.len(), 2);
    assert_eq!(seen, 2);
    for s in &result.segments {
        assert!(!s.aborted);
        assert!(s.error_deg <= 1.0, "{s:?}");
    }
    r.abort();
}

#[tokio::test]
async fn station_robot_is_reached_through_the_relay() {
    let rl = relay().await;
    let relay_addr = rl.endpoints.tcp.unwrap().to_string();
    let r = robot(RobotConfig::station("bay-3"), Some(relay_addr.clone()), None).await;
    // let the robot register before the operator joins
    tokio::time::sleep(Duration::from_millis(200)).await;
    let config = OperateConfig {
        addr: relay_addr,
        operator: operator(AxisId::SteerUD, "bay-3"),
        dial: quick_dial(),
    };
    let result = timeout(Duration::from_secs(60), run_operator(config, |_| {}))
        .await
        .unwrap()
        .unwrap();
    assert_eq!(result.outcome, TaskOutcome::Completed);
    assert_eq!(result.segments.len(), 2);
    r.abort();
    rl.abort();
}

#[tokio::test]
async fn station_robot_gives_up_when_no_relay_answers() {
    // a port that was just free
    let spare = std::net::TcpListener::bind(ANY).unwrap();
    let addr = spare.local_addr().unwrap().to_string();
    drop(spare);
    let r = robot(RobotConfig::station("s"), Some(addr), None).await;
    let result = timeout(Duration::from_secs(10), r.join()).await.unwrap();
    assert!(matches!(result, Err(ServiceError::Dial { attempts: 3, .. })), "{result:?}");
}

#[tokio::test]
async fn operator_dial_failure_is_reported() {
    let spare = std::net::TcpListener::bind(ANY).unwrap();
    let addr = spare.local_addr().unwrap().to_string();
    drop(spare);
    let config = OperateConfig {
        addr,
        operator: operator(AxisId::SteerLR, "x"),
        dial: quick_dial(),
    };
    let result = run_operator(config, |_| {}).await;
    assert!(matches!(result, Err(ServiceError::Dial { .. })));
}

#[tokio::test]
async fn websocket_console_receives_telemetry_and_assets_are_served() {
    let assets = tempfile::tempdir().unwrap();
    std::fs::write(assets.path().join("index.html"), "<!doctype html><title>console</title>").unwrap();
    let r = robot(RobotConfig::access_point(), None, Some(assets.path().to_path_buf())).await;
    let web = r.endpoints.web.unwrap();

    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{web}/ws")).await.unwrap();
    ws.send(Message::Text(encode_text(&Frame::hello(Role::Console, "view")).unwrap().into()))
        .await
        .unwrap();
    let mut got_hello = false;
    let mut got_imu = false;
    let deadline = tokio::time::Instant::now() + Duration::from_secs(2);
    while !(got_hello && got_imu) {
        let msg = tokio::time::timeout_at(deadline, ws.next()).await.unwrap().unwrap().unwrap();
        if let Message::Text(t) = msg {
            // one frame per message, no newline
            assert!(!t.contains('\n'));
            match decode(t.as_bytes()).unwrap() {
                Frame::Hello(_) => got_hello = true,
                Frame::Imu(_) => got_imu = true,
                _ => {}
            }
        }
    }
    // consoles are read-only
    let cmd = r#"{"t":"cmd","axis":"LR","dir":1,"on":true,"seq":1,"ts_ms":0}"#;
    ws.send(Message::Text(cmd.into())).await.unwrap();
    let deadline = tokio::time::Instant::now() + Duration::from_secs(2);
    loop {
        let msg = tokio::time::timeout_at(deadline, ws.next()).await.unwrap().unwrap().unwrap();
        if let Message::Text(t) = msg {
            if let Frame::Error(e) = decode(t.as_bytes()).unwrap() {
                assert_eq!(e.code, "readonly");
                break;
            }
        }
    }

    let mut http = TcpStream::connect(web).await.unwrap();
    http.write_all(b"GET /index.html HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n")
        .await
        .unwrap();
    let mut body = String::new();
    timeout(Duration::from_secs(2), http.read_to_string(&mut body)).await.unwrap().unwrap();
    assert!(body.starts_with("HTTP/1.1 200"), "{body}");
    assert!(body.contains("<title>console</title>"));
    r.abort();
}
