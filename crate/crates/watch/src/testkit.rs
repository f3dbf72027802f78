//! A tiny scripted HTTP/1.1 server on localhost for fetch and watch tests.
//!
//! Each path owns a queue of replies. Requests consume the queue front to
//! back and the last reply repeats forever, so `[A, A, B]` serves A twice
//! and B from then on.

use std::collections::{HashMap, VecDeque};
use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

#[derive(Debug, Clone)]
pub enum Reply {
    Page {
        status: u16,
        content_type: String,
        body: Vec<u8>,
    },
    /// Body sent without a Content-Length; the connection close ends it.
    Unsized(Vec<u8>),
    Redirect {
        status: u16,
        location: String,
    },
    /// Accept, say nothing for this long, then hang up.
    Stall(Duration),
}

impl Reply {
    pub fn html(body: impl Into<Vec<u8>>) -> Self {
        Reply::Page {
            status: 200,
            content_type: "text/html".into(),
            body: body.into(),
        }
    }

    pub fn html_with_charset(body: impl Into<Vec<u8>>, charset: &str) -> Self {
        Reply::Page {
            status: 200,
            content_type: format!("text/html; charset={charset}"),
            body: body.into(),
        }
    }

    pub fn status(status: u16) -> Self {
        Reply::Page {
            status,
            content_type: "text/plain".into(),
            body: format!("status {status}\n").into_bytes(),
        }
    }

    pub fn redirect(location: impl Into<String>) -> Self {
        Reply::Redirect {
            status: 301,
            location: location.into(),
        }
    }
}

#[derive(Default)]
struct Route {
    script: VecDeque<Reply>,
    hits: usize,
}

type Routes = Arc<Mutex<HashMap<String, Route>>>;

pub struct FixtureServer {
    addr: SocketAddr,
    routes: Routes,
    shutdown: Arc<AtomicBool>,
    acceptor: Option<JoinHandle<()>>,
}

impl FixtureServer {
    pub fn start() -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind localhost");
        let addr = listener.local_addr().unwrap();
        let routes: Routes = Arc::default();
        let shutdown = Arc::new(AtomicBool::new(false));
        let acceptor = {
            let routes = routes.clone();
            let shutdown = shutdown.clone();
            thread::spawn(move || {
                for conn in listener.incoming() {
                    if shutdown.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = conn else { continue };
                    let routes = routes.clone();
                    thread::spawn(move || serve(stream, &routes));
                }
            })
        };
        Self {
            addr,
            routes,
            shutdown,
            acceptor: Some(acceptor),
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }

    /// Replaces the reply script for `path` and resets its hit count.
    pub fn route(&self, path: &str, replies: impl IntoIterator<Item = Reply>) {
        let script: VecDeque<Reply> = replies.into_iter().collect();
        assert!(!script.is_empty(), "a route needs at least one reply");
        self.routes
            .lock()
            .unwrap()
            .insert(path.to_owned(), Route { script, hits: 0 });
    }

    pub fn hits(&self, path: &str) -> usize {
        self.routes.lock().unwrap().get(path).map_or(0, |r| r.hits)
    }
}

impl Drop for FixtureServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        // Unblock the accept loop.
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.acceptor.take() {
            let _ = h.join();
        }
    }
}

fn next_reply(routes: &Routes, path: &str) -> Option<Reply> {
    let mut routes = routes.lock().unwrap();
    let route = routes.get_mut(path)?;
    route.hits += 1;
    if route.script.len() > 1 {
        route.script.pop_front()
    } else {
        route.script.front().cloned()
    }
}

fn read_request_path(stream: &mut TcpStream) -> Option<String> {
    let mut buf = Vec::new();
    let mut chunk = [0u8; 1024];
    while !buf.windows(4).any(|w| w == b"\r\n\r\n") {
        let n = stream.read(&mut chunk).ok()?;
        if n == 0 || buf.len() > 64 * 1024 {
            return None;
        }
        buf.extend_from_slice(&chunk[..n]);
    }
    let head = String::from_utf8_lossy(&buf);
    let line = head.lines().next()?;
    let mut parts = line.split_whitespace();
    let _method = parts.next()?;
    parts.next().map(str::to_owned)
}

fn reason(status: u16) -> &'static str {
    match status {
        200 => "OK",
        301 => "Moved Permanently",
        302 => "Found",
        404 => "Not Found",
        500 => "Internal Server Error",
        503 => "Service Unavailable",
        _ => "Status",
    }
}

fn serve(mut stream: TcpStream, routes: &Routes) {
    let _ = stream.set_read_timeout(Some(Duration::from_secs(5)));
    let Some(path) = read_request_path(&mut stream) else {
        return;
    };
    let reply = next_reply(routes, &path).unwrap_or_else(|| Reply::status(404));
    let result = match reply {
        Reply::Page {
            status,
            content_type,
            body,
        } => {
            let head = format!(
                "HTTP/1.1 {status} {}\r\nContent-Type: {content_type}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
                reason(status),
                body.len()
            );
            stream
                .write_all(head.as_bytes())
                .and_then(|_| stream.write_all(&body))
        }
        Reply::Unsized(body) => {
            let head = "HTTP/1.1 200 OK\r\nContent-Type: text/html\r\nConnection: close\r\n\r\n";
            stream
                .write_all(head.as_bytes())
                .and_then(|_| stream.write_all(&body))
        }
        Reply::Redirect { status, location } => {
            let head = format!(
                "HTTP/1.1 {status} {}\r\nLocation: {location}\r\nContent-Length: 0\r\nConnection: close\r\n\r\n",
                reason(status)
            );
            stream.write_all(head.as_bytes())
        }
        Reply::Stall(wait) => {
            thread::sleep(wait);
            Ok(())
        }
    };
    let _ = result.and_then(|_| stream.flush());
}
