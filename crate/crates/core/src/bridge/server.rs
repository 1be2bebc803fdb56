//! Bridge server: newline-delimited JSON over TCP, the same requests as
//! websocket text messages on a second port, which also serves the watch
//! face's static files.

use std::fs;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::{Component, Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use base64::Engine;
use serde_json::{json, Value};

use super::protocol::{
    parse_request, Event, Reason, Request, Response, DEFAULT_STREAM_INTERVAL_MS, MAX_LINE_BYTES,
};
use super::runner::DeviceHandle;
use super::ws;

pub const DEFAULT_PORT: u16 = 7410;
pub const DEFAULT_WS_PORT: u16 = 7411;
const MIN_STREAM_INTERVAL_MS: u64 = 50;

/// Carry out one decoded request against the device.
pub fn execute(handle: &DeviceHandle, id: Option<Value>, req: Request) -> Response {
    let unavailable = |id| Response::err(id, Reason::DeviceUnavailable, None);
    let to_value = |v: Result<Value, serde_json::Error>| v.expect("device types serialize");
    match req {
        Request::Status => match handle.call(|d| d.status()) {
            Ok(s) => Response::ok(id, to_value(serde_json::to_value(s))),
            Err(_) => unavailable(id),
        },
        Request::PushConfig { text } => match handle.call(move |d| d.push_config(text.as_bytes())) {
            Ok(Ok(report)) => Response::ok(id, to_value(serde_json::to_value(report))),
            Ok(Err(e)) => Response::err(id, Reason::Internal, Some(e.to_string())),
            Err(_) => unavailable(id),
        },
        Request::ListFiles => match handle.call(|d| d.list_files()) {
            Ok(files) => Response::ok(id, to_value(serde_json::to_value(files))),
            Err(_) => unavailable(id),
        },
        Request::PullFile { name } => {
            let n = name.clone();
            match handle.call(move |d| d.read_file(&n)) {
                Ok(Some(bytes)) => Response::ok(
                    id,
                    json!({
                        "name": name,
                        "size": bytes.len(),
                        "data": base64::engine::general_purpose::STANDARD.encode(&bytes),
                    }),
                ),
                Ok(None) => Response::err(id, Reason::NotFound, Some(name)),
                Err(_) => unavailable(id),
            }
        }
        Request::Send { msg } => match handle.call(move |d| d.send(msg)) {
            Ok(state) => Response::ok(id, json!({ "state": state })),
            Err(_) => unavailable(id),
        },
        // needs the connection; handled by the caller
        Request::StreamStatus { .. } => Response::err(id, Reason::Internal, None),
    }
}

trait Outbox: Send {
    fn send_text(&mut self, text: &str) -> io::Result<()>;
    fn send_frame(&mut self, _opcode: u8, _payload: &[u8]) -> io::Result<()> {
        Ok(())
    }
}

struct LineOut(TcpStream);

impl Outbox for LineOut {
    fn send_text(&mut self, text: &str) -> io::Result<()> {
        let mut buf = Vec::with_capacity(text.len() + 1);
        buf.extend_from_slice(text.as_bytes());
        buf.push(b'\n');
        self.0.write_all(&buf)?;
        self.0.flush()
    }
}

struct WsOut(TcpStream);

impl Outbox for WsOut {
    fn send_text(&mut self, text: &str) -> io::Result<()> {
        ws::write_frame(&mut self.0, ws::OP_TEXT, text.as_bytes())
    }

    fn send_frame(&mut self, opcode: u8, payload: &[u8]) -> io::Result<()> {
        ws::write_frame(&mut self.0, opcode, payload)
    }
}

type SharedOut = Arc<Mutex<Box<dyn Outbox>>>;

fn send(out: &SharedOut, text: &str) -> io::Result<()> {
    out.lock().unwrap_or_else(|e| e.into_inner()).send_text(text)
}

enum Incoming {
    Message(Vec<u8>),
    TooLong,
    Eof,
}

/// One line, at most `max` bytes before the newline.
fn read_line(r: &mut impl BufRead, buf: &mut Vec<u8>, max: usize) -> io::Result<Incoming> {
    buf.clear();
    let n = Read::take(&mut *r, max as u64 + 1).read_until(b'\n', buf)?;
    if n == 0 {
        return Ok(Incoming::Eof);
    }
    if buf.last() == Some(&b'\n') {
        buf.pop();
        if buf.last() == Some(&b'\r') {
            buf.pop();
        }
        return Ok(Incoming::Message(std::mem::take(buf)));
    }
    if buf.len() <= max {
        // final line without newline
        return Ok(Incoming::Message(std::mem::take(buf)));
    }
    // skip the rest of the oversized line
    loop {
        let chunk = r.fill_buf()?;
        if chunk.is_empty() {
            return Ok(Incoming::TooLong);
        }
        if let Some(pos) = chunk.iter().position(|b| *b == b'\n') {
            r.consume(pos + 1);
            return Ok(Incoming::TooLong);
        }
        let len = chunk.len();
        r.consume(len);
    }
}

/// Request/response loop shared by both transports.
fn converse(
    mut next: impl FnMut() -> io::Result<Incoming>,
    out: SharedOut,
    handle: &DeviceHandle,
    stop: &Arc<AtomicBool>,
) {
    let streaming = Arc::new(AtomicBool::new(false));
    let closed = Arc::new(AtomicBool::new(false));
    loop {
        if stop.load(Ordering::Relaxed) {
            break;
        }
        let msg = match next() {
            Ok(Incoming::Message(m)) => m,
            Ok(Incoming::TooLong) => {
                let r = Response::err(None, Reason::LineTooLong, None);
                if send(&out, &r.to_line()).is_err() {
                    break;
                }
                continue;
            }
            Ok(Incoming::Eof) | Err(_) => break,
        };
        if msg.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let response = match parse_request(&msg) {
            Err(rej) => rej.into_response(),
            Ok((id, Request::StreamStatus { interval_ms })) => {
                let every = interval_ms
                    .unwrap_or(DEFAULT_STREAM_INTERVAL_MS)
                    .max(MIN_STREAM_INTERVAL_MS);
                if !streaming.swap(true, Ordering::SeqCst) {
                    spawn_status_stream(handle.clone(), out.clone(), every, closed.clone());
                }
                Response::ok(id, json!({ "streaming": true, "interval_ms": every }))
            }
            Ok((id, req)) => execute(handle, id, req),
        };
        if send(&out, &response.to_line()).is_err() {
            break;
        }
    }
    closed.store(true, Ordering::SeqCst);
}

fn spawn_status_stream(handle: DeviceHandle, out: SharedOut, every_ms: u64, closed: Arc<AtomicBool>) {
    thread::spawn(move || {
        while !closed.load(Ordering::SeqCst) {
            let Ok(status) = handle.call(|d| d.status()) else {
                break;
            };
            let event = Event {
                event: "status".into(),
                payload: serde_json::to_value(status).expect("status serializes"),
            };
            let line = serde_json::to_string(&event).expect("event serializes");
            if send(&out, &line).is_err() {
                break;
            }
            thread::sleep(Duration::from_millis(every_ms));
        }
    });
}

fn serve_tcp(stream: TcpStream, handle: DeviceHandle, stop: Arc<AtomicBool>) {
    let Ok(write_half) = stream.try_clone() else {
        return;
    };
    let out: SharedOut = Arc::new(Mutex::new(Box::new(LineOut(write_half))));
    let mut reader = BufReader::new(stream);
    let mut buf = Vec::new();
    converse(
        || read_line(&mut reader, &mut buf, MAX_LINE_BYTES),
        out,
        &handle,
        &stop,
    );
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        Some("ico") => "image/x-icon",
        _ => "application/octet-stream",
    }
}

/// Map a request path into `root`, refusing anything that climbs out.
fn static_path(root: &Path, url_path: &str) -> Option<PathBuf> {
    let path = url_path.split(['?', '#']).next().unwrap_or("/");
    let rel = Path::new(path.trim_start_matches('/'));
    if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
        return None;
    }
    let full = root.join(rel);
    let full = if full.is_dir() { full.join("index.html") } else { full };
    full.is_file().then_some(full)
}

const FALLBACK_PAGE: &str = include_str!("fallback.html");

fn serve_ws_port(stream: TcpStream, handle: DeviceHandle, ui_dir: Option<PathBuf>, stop: Arc<AtomicBool>) {
    let Ok(write_half) = stream.try_clone() else {
        return;
    };
    let mut reader = BufReader::new(stream);
    let Ok(req) = ws::read_request(&mut reader) else {
        let _ = ws::write_http(&mut &write_half, "400 Bad Request", "text/plain", b"bad request\n");
        return;
    };
    let Some(key) = req.websocket_key() else {
        let mut w = &write_half;
        let _ = match (&ui_dir, req.method.as_str()) {
            (_, m) if m != "GET" => ws::write_http(&mut w, "405 Method Not Allowed", "text/plain", b""),
            (Some(dir), _) => match static_path(dir, &req.path).and_then(|p| Some((fs::read(&p).ok()?, p))) {
                Some((body, p)) => ws::write_http(&mut w, "200 OK", content_type(&p), &body),
                None => ws::write_http(&mut w, "404 Not Found", "text/plain", b"not found\n"),
            },
            (None, _) if req.path == "/" || req.path.starts_with("/?") => {
                ws::write_http(&mut w, "200 OK", "text/html; charset=utf-8", FALLBACK_PAGE.as_bytes())
            }
            (None, _) => ws::write_http(&mut w, "404 Not Found", "text/plain", b"not found\n"),
        };
        return;
    };
    if ws::write_handshake(&mut &write_half, key).is_err() {
        return;
    }
    let out: SharedOut = Arc::new(Mutex::new(Box::new(WsOut(write_half))));
    let frames_out = out.clone();
    let mut message: Vec<u8> = Vec::new();
    let next = move || -> io::Result<Incoming> {
        loop {
            let frame = ws::read_frame(&mut reader, MAX_LINE_BYTES)?;
            match frame.opcode {
                ws::OP_PING => {
                    frames_out
                        .lock()
                        .unwrap_or_else(|e| e.into_inner())
                        .send_frame(ws::OP_PONG, &frame.payload)?;
                }
                ws::OP_PONG => {}
                ws::OP_CLOSE => {
                    let _ = frames_out
                        .lock()
                        .unwrap_or_else(|e| e.into_inner())
                        .send_frame(ws::OP_CLOSE, &frame.payload);
                    return Ok(Incoming::Eof);
                }
                ws::OP_TEXT | ws::OP_BINARY | ws::OP_CONT => {
                    if message.len() + frame.payload.len() > MAX_LINE_BYTES {
                        message.clear();
                        return Ok(Incoming::TooLong);
                    }
                    message.extend_from_slice(&frame.payload);
                    if frame.fin {
                        return Ok(Incoming::Message(std::mem::take(&mut message)));
                    }
                }
                _ => return Err(io::Error::new(io::ErrorKind::InvalidData, "unknown opcode")),
            }
        }
    };
    converse(next, out, &handle, &stop);
}

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub tcp: SocketAddr,
    /// Websocket and static files; `None` to skip.
    pub ws: Option<SocketAddr>,
    /// Directory with the built watch face.
    pub ui_dir: Option<PathBuf>,
}

impl ServeOptions {
    /// Default ports, on loopback unless `lan`.
    pub fn new(lan: bool) -> Self {
        let ip = if lan { [0, 0, 0, 0] } else { [127, 0, 0, 1] };
        Self {
            tcp: SocketAddr::from((ip, DEFAULT_PORT)),
            ws: Some(SocketAddr::from((ip, DEFAULT_WS_PORT))),
            ui_dir: None,
        }
    }

    /// Loopback with OS-assigned ports.
    pub fn ephemeral() -> Self {
        Self {
            tcp: SocketAddr::from(([127, 0, 0, 1], 0)),
            ws: Some(SocketAddr::from(([127, 0, 0, 1], 0))),
            ui_dir: None,
        }
    }
}

pub struct BridgeServer {
    tcp_addr: SocketAddr,
    ws_addr: Option<SocketAddr>,
    stop: Arc<AtomicBool>,
    acceptors: Vec<JoinHandle<()>>,
}

fn accept_loop(
    listener: TcpListener,
    stop: Arc<AtomicBool>,
    mut on_conn: impl FnMut(TcpStream, Arc<AtomicBool>) + Send + 'static,
) -> JoinHandle<()> {
    thread::spawn(move || {
        for conn in listener.incoming() {
            if stop.load(Ordering::SeqCst) {
                break;
            }
            match conn {
                Ok(stream) => {
                    // small request/response lines; don't wait for acks
                    let _ = stream.set_nodelay(true);
                    on_conn(stream, stop.clone())
                }
                Err(e) => log::warn!("accept failed: {e}"),
            }
        }
    })
}

impl BridgeServer {
    pub fn start(handle: DeviceHandle, opts: &ServeOptions) -> io::Result<Self> {
        let stop = Arc::new(AtomicBool::new(false));
        let tcp = TcpListener::bind(opts.tcp)?;
        let tcp_addr = tcp.local_addr()?;
        let h = handle.clone();
        let mut acceptors = vec![accept_loop(tcp, stop.clone(), move |s, stop| {
            let h = h.clone();
            thread::spawn(move || serve_tcp(s, h, stop));
        })];
        let mut ws_addr = None;
        if let Some(addr) = opts.ws {
            let listener = TcpListener::bind(addr)?;
            ws_addr = Some(listener.local_addr()?);
            let ui = opts.ui_dir.clone();
            acceptors.push(accept_loop(listener, stop.clone(), move |s, stop| {
                let (h, ui) = (handle.clone(), ui.clone());
                thread::spawn(move || serve_ws_port(s, h, ui, stop));
            }));
        }
        log::info!("bridge listening on {tcp_addr}, websocket {ws_addr:?}");
        Ok(Self {
            tcp_addr,
            ws_addr,
            stop,
            acceptors,
        })
    }

    pub fn tcp_addr(&self) -> SocketAddr {
        self.tcp_addr
    }

    pub fn ws_addr(&self) -> Option<SocketAddr> {
        self.ws_addr
    }

    /// Block until the accept loops end (i.e. forever, unless stopped).
    pub fn wait(mut self) {
        for t in self.acceptors.drain(..) {
            let _ = t.join();
        }
    }

    /// Stop accepting. Open connections end at their next request.
    pub fn shutdown(mut self) {
        self.stop_accepting();
    }

    fn stop_accepting(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // wake the blocking accepts
        for addr in std::iter::once(self.tcp_addr).chain(self.ws_addr) {
            let _ = TcpStream::connect_timeout(&addr, Duration::from_millis(200));
        }
        for t in self.acceptors.drain(..) {
            let _ = t.join();
        }
    }
}

impl Drop for BridgeServer {
    fn drop(&mut self) {
        if !self.acceptors.is_empty() {
            self.stop_accepting();
        }
    }
}
