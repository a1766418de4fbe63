//! Golden transcripts and transport transparency for the bridge protocol.

use std::io::{pipe, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::thread;

use sasvi::bridge::codec::{read_payload, write_message};
use sasvi::bridge::{
    serve, BridgeClient, BridgeOverseer, BridgeSegmenter, Envelope, Message, Role, ServedModels, DEFAULT_TIMEOUT,
};
use sasvi::controller::{run_baseline_t1, run_framewise, run_gt_reprompt, run_sasvi, SasviConfig, ScenarioSource};
use sasvi::mask::{sample_anchors, SegMask};
use sasvi::models::{NoiseParams, OracleOverseer, Overseer, SurrogateTracker, VideoSegmenter};
use sasvi::scene::presets::tool_entry;
use sasvi::scene::Scenario;
use sasvi::Error;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/bridge").join(name)
}

fn tiny() -> Scenario {
    Scenario::new(tool_entry(5, 16, 1)).unwrap()
}

fn models(s: &Scenario) -> ServedModels {
    let labels = s.label_space().clone();
    ServedModels {
        labels: labels.clone(),
        overseer: Some(Box::new(OracleOverseer::new(&s.palette(), labels.clone()).unwrap())),
        segmenter: Some(Box::new(SurrogateTracker::new(labels))),
    }
}

struct Tap<T> {
    inner: T,
    log: Arc<Mutex<Vec<u8>>>,
}

impl<T: Read> Read for Tap<T> {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.log.lock().unwrap().extend_from_slice(&buf[..n]);
        Ok(n)
    }
}

impl<T: Write> Write for Tap<T> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.log.lock().unwrap().extend_from_slice(&buf[..n]);
        Ok(n)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

fn payloads(mut bytes: &[u8]) -> Vec<String> {
    let mut out = Vec::new();
    while let Some(p) = read_payload(&mut bytes).unwrap() {
        out.push(String::from_utf8(p).unwrap());
    }
    out
}

/// Runs `session` against a real server and returns the transcript:
/// `> request` and `< reply` lines in wire order.
fn record(roles: &[Role], session: impl FnOnce(BridgeClient)) -> String {
    let (req_r, req_w) = pipe().unwrap();
    let (rep_r, rep_w) = pipe().unwrap();
    let seen_in = Arc::new(Mutex::new(Vec::new()));
    let seen_out = Arc::new(Mutex::new(Vec::new()));
    let (log_in, log_out) = (seen_in.clone(), seen_out.clone());
    let server = thread::spawn(move || {
        let mut m = models(&tiny());
        serve(&mut m, Tap { inner: req_r, log: log_in }, Tap { inner: rep_w, log: log_out }).unwrap();
    });
    session(BridgeClient::from_streams(rep_r, req_w, roles, DEFAULT_TIMEOUT).unwrap());
    server.join().unwrap();
    let requests = payloads(&seen_in.lock().unwrap());
    let replies = payloads(&seen_out.lock().unwrap());
    assert_eq!(requests.len(), replies.len());
    let mut out = String::new();
    for (q, a) in requests.iter().zip(&replies) {
        out.push_str(&format!("> {q}\n< {a}\n"));
    }
    out
}

fn overseer_session(client: BridgeClient) {
    let s = tiny();
    let o = BridgeOverseer::new(client);
    for t in 0..2 {
        let out = o.detect(t, &s.render(t).unwrap().0).unwrap();
        assert_eq!(out.semantic_mask, s.render(t).unwrap().1);
    }
}

fn segmenter_session(client: BridgeClient) {
    let s = tiny();
    let mut seg = BridgeSegmenter::new(client);
    let frame = |t| s.render(t).unwrap().0;
    assert!(matches!(seg.step(&frame(0)), Err(Error::Remote(_))));
    let gt1 = s.render(1).unwrap().1;
    let anchors = vec![sample_anchors(&gt1, 2, 2, 5).unwrap()];
    let first = seg.prompt(1, &frame(1), Some(&gt1), &anchors).unwrap();
    assert_eq!(first, gt1);
    seg.step(&frame(2)).unwrap();
    seg.step(&frame(3)).unwrap();
    seg.rewind(2).unwrap();
    seg.step(&frame(3)).unwrap();
    assert!(matches!(seg.rewind(9), Err(Error::Remote(_))));
}

fn check_transcript(name: &str, recorded: &str) {
    let path = fixture(name);
    if std::env::var_os("SASVI_BLESS").is_some() {
        std::fs::write(&path, recorded).unwrap();
    }
    let golden = std::fs::read_to_string(&path).unwrap();
    assert_eq!(recorded.lines().count(), golden.lines().count(), "{name}: transcript length");
    for (i, (r, g)) in recorded.lines().zip(golden.lines()).enumerate() {
        assert!(r == g, "{name}: line {} differs\nrecorded: {r:.200}\ngolden:   {g:.200}", i + 1);
    }
}

#[test]
fn overseer_transcript_matches_golden() {
    check_transcript("overseer.txt", &record(&[Role::Overseer], overseer_session));
}

#[test]
fn segmenter_transcript_matches_golden() {
    check_transcript("segmenter.txt", &record(&[Role::Segmenter], segmenter_session));
}

/// Replays the golden replies to a client and checks that every request it
/// sends is byte-identical to the golden request.
fn replay(name: &str, roles: &[Role], session: impl FnOnce(BridgeClient)) {
    let golden = std::fs::read_to_string(fixture(name)).unwrap();
    let lines: Vec<&str> = golden.lines().collect();
    let pairs: Vec<(String, String)> = lines
        .chunks(2)
        .map(|c| (c[0].strip_prefix("> ").unwrap().to_string(), c[1].strip_prefix("< ").unwrap().to_string()))
        .collect();
    let (req_r, req_w) = pipe().unwrap();
    let (rep_r, mut rep_w) = pipe().unwrap();
    let server = thread::spawn(move || {
        let mut r = req_r;
        for (i, (q, a)) in pairs.iter().enumerate() {
            let got = String::from_utf8(read_payload(&mut r).unwrap().expect("request")).unwrap();
            assert!(&got == q, "request {i} differs\ngot:    {got:.200}\ngolden: {q:.200}");
            rep_w.write_all(&(a.len() as u32).to_be_bytes()).unwrap();
            rep_w.write_all(a.as_bytes()).unwrap();
        }
    });
    session(BridgeClient::from_streams(rep_r, req_w, roles, DEFAULT_TIMEOUT).unwrap());
    server.join().unwrap();
}

#[test]
fn client_conforms_to_golden_transcripts() {
    replay("overseer.txt", &[Role::Overseer], overseer_session);
    replay("segmenter.txt", &[Role::Segmenter], segmenter_session);
}

#[test]
fn golden_handshake_is_readable() {
    let golden = std::fs::read_to_string(fixture("segmenter.txt")).unwrap();
    let mut lines = golden.lines();
    assert_eq!(lines.next().unwrap(), r#"> {"id":0,"type":"hello","version":1,"roles":["segmenter"]}"#);
    assert_eq!(
        lines.next().unwrap(),
        r#"< {"id":0,"type":"capabilities","version":1,"roles":["overseer","segmenter"],"labels":["background","tissue","tool","gauze"]}"#
    );
    assert_eq!(golden.lines().last().unwrap(), r#"< {"id":8,"type":"ok"}"#);
}

/// Serves `models` on a loopback TCP port in a background thread.
fn tcp_server(models: ServedModels) -> (String, thread::JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let handle = thread::spawn(move || {
        let mut models = models;
        let (stream, _) = listener.accept().unwrap();
        serve(&mut models, stream.try_clone().unwrap(), stream).unwrap();
    });
    (addr, handle)
}

fn overseer_only(o: impl Overseer + 'static, labels: Arc<sasvi::mask::LabelSpace>) -> ServedModels {
    ServedModels { labels, overseer: Some(Box::new(o)), segmenter: None }
}

fn segmenter_only(s: impl VideoSegmenter + 'static, labels: Arc<sasvi::mask::LabelSpace>) -> ServedModels {
    ServedModels { labels, overseer: None, segmenter: Some(Box::new(s)) }
}

fn masks_equal(a: &[SegMask], b: &[SegMask]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x == y)
}

#[test]
fn loopback_bridge_is_transparent_for_every_runner() {
    let s = Scenario::new(tool_entry(60, 48, 20)).unwrap();
    let labels = s.label_space().clone();
    let noise = NoiseParams { drop_prob: 0.15, class_flip_prob: 0.05, seed: 4, ..NoiseParams::default() };
    let oracle = || OracleOverseer::with_noise(&s.palette(), labels.clone(), noise).unwrap();
    let tracker = || SurrogateTracker::new(labels.clone());
    let remote_overseer = || {
        let (addr, h) = tcp_server(overseer_only(oracle(), labels.clone()));
        (BridgeOverseer::connect(&sasvi::bridge::Endpoint::Tcp(addr), DEFAULT_TIMEOUT).unwrap(), h)
    };
    let remote_tracker = || {
        let (addr, h) = tcp_server(segmenter_only(tracker(), labels.clone()));
        (BridgeSegmenter::connect(&sasvi::bridge::Endpoint::Tcp(addr), DEFAULT_TIMEOUT).unwrap(), h)
    };
    let cfg = SasviConfig::default();

    let local = run_sasvi(&mut ScenarioSource::new(&s), &oracle(), &mut tracker(), &cfg).unwrap();
    let (o, ho) = remote_overseer();
    let (mut t, ht) = remote_tracker();
    let remote = run_sasvi(&mut ScenarioSource::new(&s), &o, &mut t, &cfg).unwrap();
    drop((o, t));
    ho.join().unwrap();
    ht.join().unwrap();
    assert!(!local.trace.events.is_empty());
    assert!(masks_equal(&local.masks, &remote.masks), "sasvi");
    assert_eq!(local.trace.records, remote.trace.records);
    assert_eq!(local.trace.events, remote.trace.events);

    let initial = oracle().detect(0, &s.render(0).unwrap().0).unwrap().semantic_mask;
    let local = run_baseline_t1(&mut ScenarioSource::new(&s), &initial, &mut tracker()).unwrap();
    let (mut t, ht) = remote_tracker();
    let remote = run_baseline_t1(&mut ScenarioSource::new(&s), &initial, &mut t).unwrap();
    drop(t);
    ht.join().unwrap();
    assert!(masks_equal(&local.masks, &remote.masks), "t1");

    let mut gt = |t: usize| Ok(Some(s.render(t)?.1));
    let local = run_gt_reprompt(&mut ScenarioSource::new(&s), &mut gt, &mut tracker(), 7).unwrap();
    let (mut t, ht) = remote_tracker();
    let remote = run_gt_reprompt(&mut ScenarioSource::new(&s), &mut gt, &mut t, 7).unwrap();
    drop(t);
    ht.join().unwrap();
    assert!(masks_equal(&local.masks, &remote.masks), "gt");

    let local = run_framewise(&mut ScenarioSource::new(&s), &oracle()).unwrap();
    let (o, ho) = remote_overseer();
    let remote = run_framewise(&mut ScenarioSource::new(&s), &o).unwrap();
    drop(o);
    ho.join().unwrap();
    assert!(masks_equal(&local.masks, &remote.masks), "framewise");
}

#[test]
fn child_process_bridge_matches_in_process_run() {
    let dir = tempfile::tempdir().unwrap();
    let s = Scenario::new(tool_entry(30, 32, 10)).unwrap();
    sasvi::dataset::write_dataset(&s, dir.path(), false).unwrap();
    let labels_file = dir.path().join("labels.txt");
    let endpoint = sasvi::bridge::Endpoint::parse(&format!(
        "cmd={} serve --segmenter tracker --labels {}",
        env!("CARGO_BIN_EXE_sasvi"),
        labels_file.display()
    ))
    .unwrap();
    let mut remote = BridgeSegmenter::connect(&endpoint, DEFAULT_TIMEOUT).unwrap();
    let oracle = OracleOverseer::new(&s.palette(), s.label_space().clone()).unwrap();
    let cfg = SasviConfig::default();
    let a = run_sasvi(&mut ScenarioSource::new(&s), &oracle, &mut remote, &cfg).unwrap();
    let b = run_sasvi(&mut ScenarioSource::new(&s), &oracle, &mut SurrogateTracker::new(s.label_space().clone()), &cfg)
        .unwrap();
    assert!(masks_equal(&a.masks, &b.masks));
    assert_eq!(a.trace.events, b.trace.events);
}

#[test]
fn remote_failure_aborts_with_partial_trace() {
    let s = Scenario::new(tool_entry(12, 24, 3)).unwrap();
    let labels = s.label_space().clone();
    let (req_r, req_w) = pipe().unwrap();
    let (rep_r, rep_w) = pipe().unwrap();
    let names = labels.names().to_vec();
    thread::spawn(move || {
        let (mut r, mut w) = (req_r, rep_w);
        let mut steps = 0;
        while let Ok(Some(p)) = read_payload(&mut r) {
            let req: Envelope = serde_json::from_slice(&p).unwrap();
            let body = match req.body {
                Message::Hello { .. } => {
                    Message::Capabilities { version: 1, roles: vec![Role::Segmenter], labels: names.clone() }
                }
                Message::Prompt { frame, .. } | Message::Step { frame } => {
                    steps += 1;
                    if steps > 5 {
                        Message::Error { message: "device lost".into() }
                    } else {
                        Message::Mask {
                            mask: sasvi::bridge::WireImage {
                                width: frame.width,
                                height: frame.height,
                                data: vec![0; frame.width * frame.height],
                            },
                        }
                    }
                }
                _ => Message::Ok,
            };
            write_message(&mut w, &Envelope { id: req.id, body }).unwrap();
        }
    });
    let mut seg =
        BridgeSegmenter::new(BridgeClient::from_streams(rep_r, req_w, &[Role::Segmenter], DEFAULT_TIMEOUT).unwrap());
    let oracle = OracleOverseer::new(&s.palette(), labels).unwrap();
    let failure = run_sasvi(&mut ScenarioSource::new(&s), &oracle, &mut seg, &SasviConfig::default()).unwrap_err();
    assert!(matches!(&failure.error, Error::Remote(m) if m == "device lost"));
    assert_eq!(failure.partial.masks.len(), 5);
    assert_eq!(failure.partial.trace.records.len(), 5);
}
