//! A minimal HTTP embedding provider on a loopback port.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use serde_json::{json, Value};

pub enum Behaviour {
    /// Dense copies of the reference vectors at `dim`, reported as `reported_dim`.
    Serve { dim: usize, reported_dim: usize },
    /// Never answers.
    Hang,
    /// Answers every request with this status code.
    Status(u16),
}

pub struct MockProvider {
    pub url: String,
    pub requests: Arc<AtomicUsize>,
}

fn read_request(stream: &mut TcpStream) -> Option<Value> {
    let mut reader = BufReader::new(stream);
    let mut length = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).ok()? == 0 {
            return None;
        }
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                length = v.trim().parse().ok()?;
            }
        }
    }
    let mut body = vec![0; length];
    reader.read_exact(&mut body).ok()?;
    serde_json::from_slice(&body).ok()
}

fn respond(stream: &mut TcpStream, status: u16, body: &str) {
    let head = format!(
        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        body.len()
    );
    let _ = stream.write_all(head.as_bytes());
    let _ = stream.write_all(body.as_bytes());
}

fn dense(text: &str, dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    if let Some(sparse) = super::embed(text, dim) {
        for (i, x) in sparse {
            v[i] = x;
        }
    }
    v
}

pub fn start(behaviour: Behaviour) -> MockProvider {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/embed", listener.local_addr().unwrap());
    let requests = Arc::new(AtomicUsize::new(0));
    let counter = requests.clone();
    let behaviour = Arc::new(behaviour);
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let behaviour = behaviour.clone();
            let counter = counter.clone();
            thread::spawn(move || {
                let Some(req) = read_request(&mut stream) else { return };
                counter.fetch_add(1, Ordering::SeqCst);
                match *behaviour {
                    Behaviour::Serve { dim, reported_dim } => {
                        let texts = req["texts"].as_array().cloned().unwrap_or_default();
                        let vectors: Vec<Vec<f64>> = texts
                            .iter()
                            .map(|t| dense(t.as_str().unwrap_or(""), dim))
                            .collect();
                        let body = json!({ "dim": reported_dim, "vectors": vectors });
                        respond(&mut stream, 200, &body.to_string());
                    }
                    Behaviour::Hang => thread::sleep(Duration::from_secs(30)),
                    Behaviour::Status(code) => respond(&mut stream, code, "{}"),
                }
            });
        }
    });
    MockProvider { url, requests }
}

/// A loopback URL with nothing listening.
pub fn closed_url() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    format!("http://{addr}/embed")
}
