use std::io::{BufReader, BufWriter, Read, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use super::codec::{read_message, write_message};
use super::messages::{Envelope, Message, Role, WireAnchor, WireImage, PROTOCOL_VERSION};
use crate::error::{check_dims, Error, Result};
use crate::mask::{AnchorPrompt, Frame, LabelSpace, SegMask};
use crate::models::{Overseer, OverseerOutput, VideoSegmenter};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// Where a bridge server lives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    /// Child process spoken to over its stdin and stdout.
    Command {
        program: String,
        args: Vec<String>,
    },
    Tcp(String),
}

impl Endpoint {
    /// Parses `cmd=PROGRAM ARG...` (whitespace-separated) or `HOST:PORT`.
    pub fn parse(s: &str) -> Result<Self> {
        if let Some(cmd) = s.strip_prefix("cmd=") {
            let mut words = cmd.split_whitespace().map(String::from);
            let program = words.next().ok_or_else(|| Error::invalid("bridge command is empty"))?;
            return Ok(Endpoint::Command { program, args: words.collect() });
        }
        match s.rsplit_once(':') {
            Some((host, port)) if !host.is_empty() && port.parse::<u16>().is_ok() => Ok(Endpoint::Tcp(s.to_string())),
            _ => Err(Error::invalid(format!("bridge endpoint `{s}` is neither cmd=... nor host:port"))),
        }
    }
}

struct Connection {
    writer: Box<dyn Write + Send>,
    replies: Receiver<Result<Envelope>>,
    next_id: u64,
    /// Set once the stream can no longer be trusted to be in step.
    broken: Option<String>,
}

/// Strict request/response connection to a bridge server.
pub struct BridgeClient {
    conn: Mutex<Connection>,
    child: Mutex<Option<Child>>,
    timeout: Duration,
    labels: Arc<LabelSpace>,
    roles: Vec<Role>,
}

impl std::fmt::Debug for BridgeClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BridgeClient").field("roles", &self.roles).field("timeout", &self.timeout).finish()
    }
}

impl BridgeClient {
    pub fn connect(endpoint: &Endpoint, roles: &[Role], timeout: Duration) -> Result<Self> {
        match endpoint {
            Endpoint::Command { program, args } => {
                let mut child = Command::new(program)
                    .args(args)
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()
                    .map_err(|e| Error::Protocol(format!("cannot start `{program}`: {e}")))?;
                let stdin = child.stdin.take().expect("piped stdin");
                let stdout = child.stdout.take().expect("piped stdout");
                Self::handshake(stdout, stdin, Some(child), roles, timeout)
            }
            Endpoint::Tcp(addr) => {
                let stream =
                    TcpStream::connect(addr).map_err(|e| Error::Protocol(format!("cannot connect to {addr}: {e}")))?;
                stream.set_nodelay(true)?;
                let reader = stream.try_clone()?;
                Self::handshake(reader, stream, None, roles, timeout)
            }
        }
    }

    /// Runs the handshake over an already open pair of streams.
    pub fn from_streams(
        reader: impl Read + Send + 'static,
        writer: impl Write + Send + 'static,
        roles: &[Role],
        timeout: Duration,
    ) -> Result<Self> {
        Self::handshake(reader, writer, None, roles, timeout)
    }

    fn handshake(
        reader: impl Read + Send + 'static,
        writer: impl Write + Send + 'static,
        child: Option<Child>,
        roles: &[Role],
        timeout: Duration,
    ) -> Result<Self> {
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let mut reader = BufReader::new(reader);
            loop {
                let next = match read_message(&mut reader) {
                    Ok(Some(m)) => Ok(m),
                    Ok(None) => Err(Error::Protocol("server closed the connection".into())),
                    Err(e) => Err(e),
                };
                let stop = next.is_err();
                if tx.send(next).is_err() || stop {
                    break;
                }
            }
        });
        let mut client = Self {
            conn: Mutex::new(Connection {
                writer: Box::new(BufWriter::new(writer)),
                replies: rx,
                next_id: 0,
                broken: None,
            }),
            child: Mutex::new(child),
            timeout,
            labels: Arc::new(LabelSpace::anonymous(1)?),
            roles: Vec::new(),
        };
        let reply = client.request(Message::Hello { version: PROTOCOL_VERSION, roles: roles.to_vec() })?;
        let Message::Capabilities { version, roles: offered, labels } = reply else {
            return Err(Error::Protocol(format!("expected capabilities, got {}", reply.kind())));
        };
        if version != PROTOCOL_VERSION {
            return Err(Error::Protocol(format!(
                "server speaks protocol version {version}, expected {PROTOCOL_VERSION}"
            )));
        }
        if let Some(missing) = roles.iter().find(|r| !offered.contains(r)) {
            return Err(Error::Protocol(format!("server does not offer the {missing:?} role")));
        }
        client.labels = Arc::new(LabelSpace::new(labels)?);
        client.roles = offered;
        Ok(client)
    }

    pub fn label_space(&self) -> &Arc<LabelSpace> {
        &self.labels
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    /// Sends one request and waits for its reply. A remote `error` reply
    /// becomes [`Error::Remote`].
    pub fn request(&self, body: Message) -> Result<Message> {
        let mut conn = self.conn.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(why) = &conn.broken {
            return Err(Error::Protocol(format!("connection unusable: {why}")));
        }
        let id = conn.next_id;
        conn.next_id += 1;
        let sent = write_message(&mut conn.writer, &Envelope { id, body });
        if let Err(e) = sent {
            conn.broken = Some(e.to_string());
            return Err(e);
        }
        let reply = match conn.replies.recv_timeout(self.timeout) {
            Ok(Ok(reply)) => reply,
            Ok(Err(e)) => {
                conn.broken = Some(e.to_string());
                return Err(e);
            }
            Err(RecvTimeoutError::Timeout) => {
                conn.broken = Some("a request timed out".into());
                return Err(Error::Timeout(self.timeout));
            }
            Err(RecvTimeoutError::Disconnected) => {
                conn.broken = Some("reader stopped".into());
                return Err(Error::Protocol("server closed the connection".into()));
            }
        };
        if reply.id != id {
            conn.broken = Some("reply ids out of step".into());
            return Err(Error::Protocol(format!("reply id {} does not match request id {id}", reply.id)));
        }
        match reply.body {
            Message::Error { message } => Err(Error::Remote(message)),
            body => Ok(body),
        }
    }

    fn expect_ok(&self, body: Message) -> Result<()> {
        match self.request(body)? {
            Message::Ok => Ok(()),
            other => Err(Error::Protocol(format!("expected ok, got {}", other.kind()))),
        }
    }

    fn expect_mask(&self, body: Message, dims: (usize, usize)) -> Result<SegMask> {
        match self.request(body)? {
            Message::Mask { mask } => {
                let m = mask.to_mask(&self.labels)?;
                check_dims(dims, m.dims())?;
                Ok(m)
            }
            other => Err(Error::Protocol(format!("expected mask, got {}", other.kind()))),
        }
    }
}

impl Drop for BridgeClient {
    fn drop(&mut self) {
        let healthy = self.conn.get_mut().map(|c| c.broken.is_none()).unwrap_or(false);
        if healthy {
            let _ = self.expect_ok(Message::Bye);
        }
        if let Some(mut child) = self.child.get_mut().ok().and_then(Option::take) {
            if !healthy {
                let _ = child.kill();
            }
            // Closing our end of the pipes lets a well-behaved server exit.
            if let Ok(c) = self.conn.get_mut() {
                c.writer = Box::new(std::io::sink());
            }
            let _ = child.wait();
        }
    }
}

/// Overseer served by a remote process.
#[derive(Debug)]
pub struct BridgeOverseer {
    client: BridgeClient,
}

impl BridgeOverseer {
    pub fn connect(endpoint: &Endpoint, timeout: Duration) -> Result<Self> {
        Ok(Self::new(BridgeClient::connect(endpoint, &[Role::Overseer], timeout)?))
    }

    pub fn new(client: BridgeClient) -> Self {
        Self { client }
    }
}

impl Overseer for BridgeOverseer {
    fn label_space(&self) -> &Arc<LabelSpace> {
        self.client.label_space()
    }

    fn detect(&self, frame_index: usize, frame: &Frame) -> Result<OverseerOutput> {
        let reply = self.client.request(Message::Detect { frame_index, frame: WireImage::from_frame(frame) })?;
        let Message::Detections { detections } = reply else {
            return Err(Error::Protocol(format!("expected detections, got {}", reply.kind())));
        };
        let detections = detections.iter().map(|d| d.to_detection()).collect::<Result<Vec<_>>>()?;
        OverseerOutput::from_detections(detections, frame.width(), frame.height(), self.label_space().clone())
    }
}

/// Video segmenter served by a remote process.
#[derive(Debug)]
pub struct BridgeSegmenter {
    client: BridgeClient,
}

impl BridgeSegmenter {
    pub fn connect(endpoint: &Endpoint, timeout: Duration) -> Result<Self> {
        Ok(Self::new(BridgeClient::connect(endpoint, &[Role::Segmenter], timeout)?))
    }

    pub fn new(client: BridgeClient) -> Self {
        Self { client }
    }

    pub fn label_space(&self) -> &Arc<LabelSpace> {
        self.client.label_space()
    }
}

impl VideoSegmenter for BridgeSegmenter {
    fn prompt(&mut self, t: usize, frame: &Frame, mask: Option<&SegMask>, anchors: &[AnchorPrompt]) -> Result<SegMask> {
        let body = Message::Prompt {
            t,
            frame: WireImage::from_frame(frame),
            mask: mask.map(WireImage::from_mask),
            anchors: anchors.iter().map(WireAnchor::from_anchor).collect(),
        };
        self.client.expect_mask(body, frame.dims())
    }

    fn step(&mut self, frame: &Frame) -> Result<SegMask> {
        let body = Message::Step { frame: WireImage::from_frame(frame) };
        self.client.expect_mask(body, frame.dims())
    }

    fn rewind(&mut self, t: usize) -> Result<()> {
        self.client.expect_ok(Message::Rewind { t })
    }
}
