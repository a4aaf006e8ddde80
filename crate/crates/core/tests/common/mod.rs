//! Minimal HTTP/1.1 service for driving the bridge client in tests.

#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use cca::bridge::{ScoreRequest, PROTOCOL_VERSION};
use cca::synthsim::{synth_score, SynthSceneSpec};

pub struct Response {
    pub status: u16,
    pub body: String,
}

impl Response {
    pub fn ok(body: impl Into<String>) -> Self {
        Self { status: 200, body: body.into() }
    }
}

pub struct Service {
    pub addr: String,
    pub requests: Arc<AtomicUsize>,
}

impl Service {
    pub fn endpoint(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

fn read_request(stream: &mut TcpStream) -> Option<(String, String, String)> {
    let mut reader = BufReader::new(stream.try_clone().ok()?);
    let mut line = String::new();
    reader.read_line(&mut line).ok()?;
    let mut parts = line.split_whitespace();
    let method = parts.next()?.to_string();
    let path = parts.next()?.to_string();
    let mut length = 0usize;
    loop {
        let mut header = String::new();
        reader.read_line(&mut header).ok()?;
        let header = header.trim_end();
        if header.is_empty() {
            break;
        }
        if let Some((k, v)) = header.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                length = v.trim().parse().ok()?;
            }
        }
    }
    let mut body = vec![0u8; length];
    reader.read_exact(&mut body).ok()?;
    Some((method, path, String::from_utf8(body).ok()?))
}

/// Serves `handler(method, path, body)` on an ephemeral port until the process exits.
pub fn spawn<F>(handler: F) -> Service
where
    F: Fn(&str, &str, &str) -> Response + Send + Sync + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let requests = Arc::new(AtomicUsize::new(0));
    let counter = requests.clone();
    let handler = Arc::new(handler);
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let handler = handler.clone();
            let counter = counter.clone();
            thread::spawn(move || {
                counter.fetch_add(1, Ordering::SeqCst);
                let Some((method, path, body)) = read_request(&mut stream) else { return };
                let resp = handler(&method, &path, &body);
                let reason = if resp.status == 200 { "OK" } else { "Error" };
                let _ = write!(
                    stream,
                    "HTTP/1.1 {} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                    resp.status,
                    resp.body.len(),
                    resp.body
                );
            });
        }
    });
    Service { addr, requests }
}

/// Accepts connections and drops them without answering.
pub fn spawn_dropper() -> Service {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let requests = Arc::new(AtomicUsize::new(0));
    let counter = requests.clone();
    thread::spawn(move || {
        for s in listener.incoming().flatten() {
            counter.fetch_add(1, Ordering::SeqCst);
            drop(s);
        }
    });
    Service { addr, requests }
}

/// Hosts the synthetic scorer behind the bridge protocol.
pub fn spawn_synth(spec: SynthSceneSpec) -> Service {
    spawn(move |method, path, body| match (method, path) {
        ("GET", "/v1/health") => Response::ok(format!(r#"{{"protocol":"{PROTOCOL_VERSION}"}}"#)),
        ("POST", "/v1/score") => match ScoreRequest::parse(body) {
            Ok((pattern, t)) => match synth_score(&spec, &pattern, &t) {
                Ok(score) => Response::ok(serde_json::to_string(&score).unwrap()),
                Err(e) => Response { status: 500, body: format!(r#"{{"error":"{e}"}}"#) },
            },
            Err(e) => Response { status: 400, body: format!(r#"{{"error":"{e}"}}"#) },
        },
        _ => Response { status: 404, body: "{}".into() },
    })
}
