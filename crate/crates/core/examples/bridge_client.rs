// Scoring through the HTTP bridge. A tiny in-process service answers the
// bridge protocol with the synthetic detector; point `BridgeConfig` at a real
// service to use an external detector instead.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::thread;

use cca::bridge::{BridgeConfig, BridgeScorer, ScoreRequest, PROTOCOL_VERSION};
use cca::prelude::*;
use cca::synthsim::synth_score;

fn serve(listener: TcpListener, spec: SynthSceneSpec) {
    for stream in listener.incoming().flatten() {
        let mut reader = BufReader::new(&stream);
        let mut request_line = String::new();
        let mut length = 0;
        reader.read_line(&mut request_line).ok();
        loop {
            let mut h = String::new();
            if reader.read_line(&mut h).unwrap_or(0) == 0 || h.trim().is_empty() {
                break;
            }
            if let Some(v) = h.to_ascii_lowercase().strip_prefix("content-length:") {
                length = v.trim().parse().unwrap_or(0);
            }
        }
        let mut body = vec![0; length];
        reader.read_exact(&mut body).ok();
        let reply = if request_line.starts_with("GET /v1/health") {
            format!(r#"{{"protocol":"{PROTOCOL_VERSION}"}}"#)
        } else {
            let (pattern, t) = ScoreRequest::parse(&String::from_utf8_lossy(&body)).unwrap();
            serde_json::to_string(&synth_score(&spec, &pattern, &t).unwrap()).unwrap()
        };
        let mut stream = &stream;
        let _ = write!(
            stream,
            "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
            reply.len()
        );
    }
}

pub fn run_example() -> anyhow::Result<()> {
    let grid = subsample(&build_transformation_grid(4), 1, 2);
    let params = SynthParams { seed: 4, pattern_width: 4, pattern_height: 4, ..Default::default() };
    let spec = SynthSceneSpec::generate(&params, &grid)?;
    let local = SynthScorer::new(spec.clone())?;

    let listener = TcpListener::bind("127.0.0.1:0")?;
    let endpoint = format!("http://{}", listener.local_addr()?);
    thread::spawn(move || serve(listener, spec));

    let remote = BridgeScorer::new(BridgeConfig::new(&endpoint))?;
    println!("{endpoint} speaks {}", remote.healthcheck()?);
    let pattern = CamouflagePattern::new_random(4, 4, 0)?;
    for t in &grid {
        let r = remote.score_scene(&pattern, t)?;
        println!(
            "location {:>2} orientation {}: vehicle score {:.4}",
            t.location_id,
            t.orientation_id,
            r.vehicle_score().value
        );
        anyhow::ensure!(r == local.score_scene(&pattern, t)?, "remote and local scores differ");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
