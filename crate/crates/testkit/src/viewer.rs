//! Blocking stand-ins for a browser viewer: a WebSocket client and a bare
//! HTTP GET.

use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::time::{Duration, Instant};

use tungstenite::{Message, WebSocket};

#[derive(Debug, PartialEq, Eq)]
pub enum Event {
    Text(String),
    Closed,
    Timeout,
}

pub struct Viewer {
    ws: WebSocket<TcpStream>,
}

impl Viewer {
    pub fn connect(addr: SocketAddr) -> io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        let (ws, _) = tungstenite::client(format!("ws://{addr}/ws"), stream)
            .map_err(|e| io::Error::other(e.to_string()))?;
        Ok(Self { ws })
    }

    /// Waits up to `timeout` for the next text frame.
    pub fn next(&mut self, timeout: Duration) -> Event {
        let deadline = Instant::now() + timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Event::Timeout;
            }
            self.ws.get_mut().set_read_timeout(Some(left)).unwrap();
            match self.ws.read() {
                Ok(Message::Text(text)) => return Event::Text(text.as_str().to_owned()),
                Ok(Message::Close(_)) => return Event::Closed,
                Ok(_) => continue,
                Err(tungstenite::Error::Io(e))
                    if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) =>
                {
                    return Event::Timeout
                }
                Err(_) => return Event::Closed,
            }
        }
    }

    /// Collects text frames until the server closes or `limit` passes.
    pub fn drain(&mut self, limit: Duration) -> (Vec<(Instant, String)>, bool) {
        let deadline = Instant::now() + limit;
        let mut frames = Vec::new();
        loop {
            match self.next(deadline.saturating_duration_since(Instant::now())) {
                Event::Text(t) => frames.push((Instant::now(), t)),
                Event::Closed => return (frames, true),
                Event::Timeout => return (frames, false),
            }
        }
    }

    pub fn close(mut self) {
        let _ = self.ws.close(None);
        let _ = self.ws.flush();
    }
}

/// Minimal HTTP/1.1 GET returning status code and body.
pub fn http_get(addr: SocketAddr, path: &str) -> io::Result<(u16, String)> {
    let mut stream = TcpStream::connect(addr)?;
    stream.set_read_timeout(Some(Duration::from_secs(5)))?;
    write!(stream, "GET {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n")?;
    let mut raw = Vec::new();
    stream.read_to_end(&mut raw)?;
    let text = String::from_utf8_lossy(&raw).into_owned();
    let status = text
        .split_whitespace()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| io::Error::other("malformed status line"))?;
    let (head, body) = text.split_once("\r\n\r\n").unwrap_or((&text, ""));
    let body = if head.to_ascii_lowercase().contains("transfer-encoding: chunked") {
        unchunk(body)
    } else {
        body.to_owned()
    };
    Ok((status, body))
}

fn unchunk(mut body: &str) -> String {
    let mut out = String::new();
    while let Some((size, rest)) = body.split_once("\r\n") {
        let Ok(n) = usize::from_str_radix(size.trim(), 16) else { break };
        if n == 0 || rest.len() < n {
            break;
        }
        out.push_str(&rest[..n]);
        body = rest[n..].trim_start_matches("\r\n");
    }
    out
}
