//! Client for a remote render-and-detect service speaking `cca-bridge/1`.
//!
//! ```text
//! GET  /v1/health -> {"protocol":"cca-bridge/1"}
//! POST /v1/score  <- {"protocol":"cca-bridge/1",
//!                     "camouflage":{"width":W,"height":H,"channels":[...]},
//!                     "transformation":{"location_id":L,"orientation_id":O,"lighting":X}}
//!                 -> {"detections":[{"confidence":c,"box":[x0,y0,x1,y1],"is_camouflaged":b}],
//!                     "ground_truth":[{"vehicle_id":i,"box":[...],"is_camouflaged":b}]}
//! ```
//!
//! Score requests are idempotent, so transport failures are retried.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::scene::{
    BBox, Concurrency, Detection, GroundTruth, SceneScore, SceneScorer, Transformation,
};
use crate::texture::CamouflagePattern;

pub const PROTOCOL_VERSION: &str = "cca-bridge/1";

const BODY_EXCERPT: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeConfig {
    /// Base URL, e.g. `http://127.0.0.1:8808`.
    pub endpoint: String,
    pub timeout_secs: f64,
    pub retry_limit: u32,
    pub protocol_version: String,
}

impl BridgeConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            timeout_secs: 30.0,
            retry_limit: 2,
            protocol_version: PROTOCOL_VERSION.to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(Error::Config(format!(
                "bridge timeout must be positive, got {}",
                self.timeout_secs
            )));
        }
        // built without TLS: the service is expected on a local or trusted network
        if !self.endpoint.starts_with("http://") {
            return Err(Error::Config(format!(
                "bridge endpoint must be an http:// URL, got {:?}",
                self.endpoint
            )));
        }
        Ok(())
    }

    fn url(&self, route: &str) -> String {
        format!("{}{route}", self.endpoint.trim_end_matches('/'))
    }
}

/// Transformation as it travels over the wire (the split is implied by the location).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WireTransformation {
    pub location_id: u32,
    pub orientation_id: u32,
    pub lighting: f64,
}

impl From<&Transformation> for WireTransformation {
    fn from(t: &Transformation) -> Self {
        Self {
            location_id: t.location_id,
            orientation_id: t.orientation_id,
            lighting: t.lighting,
        }
    }
}

impl TryFrom<WireTransformation> for Transformation {
    type Error = Error;

    fn try_from(w: WireTransformation) -> Result<Self> {
        Transformation::new(w.location_id, w.orientation_id, w.lighting)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub protocol: String,
    pub camouflage: CamouflagePattern,
    pub transformation: WireTransformation,
}

impl ScoreRequest {
    pub fn new(pattern: &CamouflagePattern, t: &Transformation) -> Self {
        Self {
            protocol: PROTOCOL_VERSION.to_string(),
            camouflage: pattern.clone(),
            transformation: t.into(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Parses a request body back into the pattern and transformation it carries.
    pub fn parse(body: &str) -> Result<(CamouflagePattern, Transformation)> {
        let req: ScoreRequest = serde_json::from_str(body)?;
        if req.protocol != PROTOCOL_VERSION {
            return Err(Error::Version {
                expected: PROTOCOL_VERSION.into(),
                got: req.protocol,
            });
        }
        Ok((req.camouflage, req.transformation.try_into()?))
    }
}

fn protocol_err(field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Protocol {
        field: field.into(),
        message: message.into(),
    }
}

fn field<'a>(obj: &'a Value, name: &str, path: &str) -> Result<&'a Value> {
    obj.get(name)
        .ok_or_else(|| protocol_err(format!("{path}{name}"), "missing"))
}

fn parse_box(v: &Value, path: &str) -> Result<BBox> {
    let arr = v
        .as_array()
        .filter(|a| a.len() == 4)
        .ok_or_else(|| protocol_err(path, "expected [x_min, y_min, x_max, y_max]"))?;
    let mut xs = [0.0; 4];
    for (i, x) in arr.iter().enumerate() {
        xs[i] = x
            .as_f64()
            .ok_or_else(|| protocol_err(format!("{path}[{i}]"), "expected a number"))?;
    }
    BBox::new(xs[0], xs[1], xs[2], xs[3]).map_err(|e| protocol_err(path, e.to_string()))
}

fn parse_bool(obj: &Value, name: &str, path: &str) -> Result<bool> {
    field(obj, name, path)?
        .as_bool()
        .ok_or_else(|| protocol_err(format!("{path}{name}"), "expected a boolean"))
}

fn parse_list<'a>(root: &'a Value, name: &str) -> Result<&'a Vec<Value>> {
    field(root, name, "")?
        .as_array()
        .ok_or_else(|| protocol_err(name, "expected an array"))
}

/// Parses a `/v1/score` response, naming the first offending field on failure.
pub fn parse_score_response(body: &str) -> Result<SceneScore> {
    let root: Value =
        serde_json::from_str(body).map_err(|e| protocol_err("<body>", e.to_string()))?;
    if !root.is_object() {
        return Err(protocol_err("<body>", "expected a JSON object"));
    }
    let mut detections = Vec::new();
    for (i, d) in parse_list(&root, "detections")?.iter().enumerate() {
        let path = format!("detections[{i}].");
        let confidence = field(d, "confidence", &path)?
            .as_f64()
            .filter(|c| (0.0..=1.0).contains(c))
            .ok_or_else(|| protocol_err(format!("{path}confidence"), "expected a number in [0, 1]"))?;
        detections.push(Detection {
            confidence,
            bbox: parse_box(field(d, "box", &path)?, &format!("{path}box"))?,
            is_camouflaged: parse_bool(d, "is_camouflaged", &path)?,
        });
    }
    let mut ground_truth = Vec::new();
    for (i, g) in parse_list(&root, "ground_truth")?.iter().enumerate() {
        let path = format!("ground_truth[{i}].");
        let vehicle_id = field(g, "vehicle_id", &path)?
            .as_u64()
            .and_then(|v| u32::try_from(v).ok())
            .ok_or_else(|| protocol_err(format!("{path}vehicle_id"), "expected a non-negative integer"))?;
        ground_truth.push(GroundTruth {
            vehicle_id,
            bbox: parse_box(field(g, "box", &path)?, &format!("{path}box"))?,
            is_camouflaged: parse_bool(g, "is_camouflaged", &path)?,
        });
    }
    Ok(SceneScore {
        detections,
        ground_truth,
    })
}

/// [`SceneScorer`] that forwards every call to a bridge service.
#[derive(Debug, Clone)]
pub struct BridgeScorer {
    config: BridgeConfig,
    agent: ureq::Agent,
}

enum Attempt<T> {
    Done(T),
    Transport(String),
}

impl BridgeScorer {
    pub fn new(config: BridgeConfig) -> Result<Self> {
        config.validate()?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self { config, agent })
    }

    pub fn config(&self) -> &BridgeConfig {
        &self.config
    }

    fn once(&self, route: &str, body: Option<&str>) -> Result<Attempt<(u16, String)>> {
        let url = self.config.url(route);
        let response = match body {
            Some(b) => self
                .agent
                .post(&url)
                .header("Content-Type", "application/json")
                .send(b),
            None => self.agent.get(&url).call(),
        };
        let mut response = match response {
            Ok(r) => r,
            Err(e) => return Ok(Attempt::Transport(e.to_string())),
        };
        let status = response.status().as_u16();
        match response.body_mut().read_to_string() {
            Ok(text) => Ok(Attempt::Done((status, text))),
            Err(e) => Ok(Attempt::Transport(e.to_string())),
        }
    }

    /// Sends a request, retrying transport failures up to `retry_limit` times.
    fn request(&self, route: &str, body: Option<&str>) -> Result<String> {
        let attempts = self.config.retry_limit + 1;
        let mut last = String::new();
        for attempt in 1..=attempts {
            match self.once(route, body)? {
                Attempt::Done((200, text)) => return Ok(text),
                Attempt::Done((status, text)) => {
                    let body: String = text.chars().take(BODY_EXCERPT).collect();
                    return Err(Error::Service { status, body });
                }
                Attempt::Transport(msg) => {
                    log::warn!("bridge {route}: attempt {attempt}/{attempts} failed: {msg}");
                    last = msg;
                }
            }
        }
        Err(Error::Transport(format!(
            "{} failed after {attempts} attempts: {last}",
            self.config.url(route)
        )))
    }

    /// Scores one scene remotely.
    pub fn remote_score(&self, pattern: &CamouflagePattern, t: &Transformation) -> Result<SceneScore> {
        let body = ScoreRequest::new(pattern, t).to_json()?;
        let text = self.request("/v1/score", Some(&body))?;
        parse_score_response(&text)
    }

    /// Confirms the service speaks the configured protocol version and returns it.
    pub fn healthcheck(&self) -> Result<String> {
        let text = self.request("/v1/health", None)?;
        let root: Value =
            serde_json::from_str(&text).map_err(|e| protocol_err("<body>", e.to_string()))?;
        let got = field(&root, "protocol", "")?
            .as_str()
            .ok_or_else(|| protocol_err("protocol", "expected a string"))?;
        if got != self.config.protocol_version {
            return Err(Error::Version {
                expected: self.config.protocol_version.clone(),
                got: got.to_string(),
            });
        }
        Ok(got.to_string())
    }
}

impl SceneScorer for BridgeScorer {
    fn score_scene(&self, pattern: &CamouflagePattern, t: &Transformation) -> Result<SceneScore> {
        self.remote_score(pattern, t)
    }

    fn concurrency(&self) -> Concurrency {
        Concurrency::Concurrent
    }
}
