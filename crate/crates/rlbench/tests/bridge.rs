use std::io::{BufReader, Read};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use rlbench::bridge::{bridge_handshake, BridgeClient, BridgeEnv, BridgeError, BridgeSpec, Transport};
use rlbench::mock::{serve, Fault, FaultKind, MockOptions, REMOTE_FAULT_MESSAGE};
use rlbench_core::envs::Environment;

const MOCK: &str = env!("CARGO_BIN_EXE_mock-sidecar");

fn spec(args: &str) -> BridgeSpec {
    BridgeSpec {
        timeout_ms: 5_000,
        ..BridgeSpec::stdio(format!("{MOCK} {args}"))
    }
}

/// Copies everything read through it into a shared transcript.
struct Tee<R> {
    inner: R,
    seen: Arc<Mutex<Vec<u8>>>,
}

impl<R: Read> Read for Tee<R> {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.seen.lock().unwrap().extend_from_slice(&buf[..n]);
        Ok(n)
    }
}

/// In-process mock on a loopback socket; returns a client and the request transcript.
fn recorded_client(opts: MockOptions) -> (BridgeClient, Arc<Mutex<Vec<u8>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let seen = Arc::new(Mutex::new(Vec::new()));
    let tee_seen = Arc::clone(&seen);
    thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let reader = BufReader::new(Tee { inner: stream.try_clone().unwrap(), seen: tee_seen });
        let _ = serve(reader, stream, opts);
    });
    let stream = TcpStream::connect(addr).unwrap();
    let client = BridgeClient::from_streams(BufReader::new(stream.try_clone().unwrap()), stream, Duration::from_secs(5));
    (client, seen)
}

#[test]
fn handshake_reports_the_mock_spec() {
    let (mut client, env_spec) = bridge_handshake(&spec("--obs-dim 17 --act-dim 6 --act-bound 0.5 --max-steps 40")).unwrap();
    assert_eq!(env_spec.obs_dim(), 17);
    assert_eq!(env_spec.act_dim(), 6);
    assert_eq!(env_spec.action_space.low(), &[-0.5; 6]);
    assert_eq!(env_spec.action_space.high(), &[0.5; 6]);
    assert_eq!(env_spec.max_steps, 40);
    client.close().unwrap();
}

#[test]
fn wire_format_is_one_object_per_line_with_increasing_ids() {
    let (mut client, seen) = recorded_client(MockOptions::default());
    client.spec().unwrap();
    client.reset(42).unwrap();
    let step = client.step(&[0.1, -0.2]).unwrap();
    assert!((step.reward - (1.0 - 0.01 - 0.04)).abs() < 1e-15);
    assert!(!step.done);
    client.close().unwrap();
    let text = String::from_utf8(seen.lock().unwrap().clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], r#"{"id":1,"cmd":"spec"}"#);
    assert_eq!(lines[1], r#"{"id":2,"cmd":"reset","seed":42}"#);
    assert_eq!(lines[2], r#"{"id":3,"cmd":"step","action":[0.1,-0.2]}"#);
    assert_eq!(lines[3], r#"{"id":4,"cmd":"close"}"#);
    assert!(text.ends_with('\n'));
}

#[test]
fn thousand_steps_over_stdio_without_loss() {
    let mut env = BridgeEnv::connect(&spec("--max-steps 5000")).unwrap();
    let obs = env.reset(7).unwrap();
    assert_eq!(obs, vec![0.0, 0.0, 7.0]);
    for i in 1..=1000u32 {
        let a = [f64::from(i % 7) / 10.0, -0.25];
        let r = env.step(&a).unwrap();
        assert_eq!(r.observation[0], f64::from(i));
        assert!((r.observation[1] - (a[0] + a[1])).abs() < 1e-12);
        assert!((r.reward - (1.0 - a[0] * a[0] - a[1] * a[1])).abs() < 1e-12);
        assert!(!r.done);
    }
    assert_eq!(env.client().next_id(), 1003);
}

#[test]
fn out_of_order_id_is_a_protocol_error() {
    let mut env = BridgeEnv::connect(&spec("--fault wrong-id@4")).unwrap();
    env.reset(0).unwrap();
    env.step(&[0.0, 0.0]).unwrap();
    let err = env.step(&[0.0, 0.0]).unwrap_err();
    assert!(matches!(err, rlbench_core::Error::Protocol(ref m) if m.contains("does not match request id 4")), "{err}");
}

#[test]
fn malformed_line_is_reported_verbatim() {
    let (mut client, _) = {
        let (c, s) = bridge_handshake(&spec("--fault garbage@2")).unwrap();
        (c, s)
    };
    match client.reset(1).unwrap_err() {
        BridgeError::Protocol { line, .. } => assert_eq!(line, "this is not json {"),
        other => panic!("{other}"),
    }
}

#[test]
fn remote_error_text_is_surfaced() {
    let mut env = BridgeEnv::connect(&spec("--fault error@3")).unwrap();
    env.reset(0).unwrap();
    match env.step(&[0.0, 0.0]).unwrap_err() {
        rlbench_core::Error::Remote(m) => assert_eq!(m, REMOTE_FAULT_MESSAGE),
        other => panic!("{other}"),
    }
    // The server stays usable after reporting an error.
    env.reset(1).unwrap();
    env.step(&[0.0, 0.0]).unwrap();
}

#[test]
fn wrong_action_length_is_rejected_locally() {
    let mut env = BridgeEnv::connect(&spec("")).unwrap();
    env.reset(0).unwrap();
    assert!(matches!(env.step(&[0.0]), Err(rlbench_core::Error::DimensionMismatch { .. })));
}

#[test]
fn server_exit_is_a_connection_error() {
    let mut env = BridgeEnv::connect(&spec("--fault exit@3")).unwrap();
    env.reset(0).unwrap();
    assert!(matches!(env.step(&[0.0, 0.0]), Err(rlbench_core::Error::Connection(_))));
}

#[test]
fn silent_server_times_out() {
    let s = BridgeSpec { timeout_ms: 200, ..spec("--fault silent@1") };
    assert!(matches!(bridge_handshake(&s), Err(BridgeError::Unavailable(_))));
    let s = BridgeSpec { timeout_ms: 200, ..spec("--fault silent@2") };
    let (mut client, _) = bridge_handshake(&s).unwrap();
    assert!(matches!(client.reset(0), Err(BridgeError::Timeout(200))));
}

#[test]
fn missing_program_is_unavailable() {
    let s = BridgeSpec::stdio("/nonexistent/sidecar-binary");
    assert!(matches!(bridge_handshake(&s), Err(BridgeError::Unavailable(_))));
}

#[test]
fn done_is_sticky_and_shapes_are_stable() {
    let mut env = BridgeEnv::connect(&spec("--max-steps 3 --obs-dim 5")).unwrap();
    for seed in 0..3 {
        assert_eq!(env.reset(seed).unwrap().len(), 5);
        for t in 1..=3 {
            let r = env.step(&[0.3, 0.3]).unwrap();
            assert_eq!(r.observation.len(), 5);
            assert_eq!(r.done, t == 3);
        }
        assert!(matches!(env.step(&[0.0, 0.0]), Err(rlbench_core::Error::Protocol(_))));
    }
}

#[test]
fn tcp_transport_round_trip() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let s = BridgeSpec {
        command: format!("{MOCK} --tcp {port}"),
        env_name: "Pendulum".into(),
        transport: Transport::Tcp(format!("127.0.0.1:{port}").parse().unwrap()),
        timeout_ms: 5_000,
    };
    let mut env = BridgeEnv::connect(&s).unwrap();
    env.reset(3).unwrap();
    for _ in 0..100 {
        assert_eq!(env.step(&[0.0, 0.0]).unwrap().reward, 1.0);
    }
    env.close().unwrap();
}

#[test]
fn fault_flag_parsing() {
    assert_eq!("exit@9".parse::<Fault>().unwrap(), Fault { kind: FaultKind::Exit, at_id: 9 });
    assert!("boom@1".parse::<Fault>().is_err());
    assert!("exit".parse::<Fault>().is_err());
}
