use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const DEFAULT_TEMPERATURE: f64 = 0.7;
pub const DEFAULT_MAX_TOKENS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub system: Option<String>,
    pub temperature: f64,
    pub max_tokens: usize,
    pub n_samples: usize,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>) -> Self {
        CompletionRequest {
            prompt: prompt.into(),
            system: None,
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
            n_samples: 1,
        }
    }

    pub fn with_system(mut self, system: Option<&str>) -> Self {
        self.system = system.map(str::to_string);
        self
    }

    pub fn samples(mut self, n: usize) -> Self {
        self.n_samples = n;
        self
    }

    /// Hex SHA-256 of the system message (if any) and prompt; the key under
    /// which transcripts store responses.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        if let Some(system) = &self.system {
            hasher.update(system.as_bytes());
            hasher.update([0u8]);
        }
        hasher.update(self.prompt.as_bytes());
        hex::encode(hasher.finalize())
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("request to {endpoint} failed: {message}")]
    Transport { endpoint: String, message: String },
    #[error("{endpoint} answered {status}: {body}")]
    Status {
        endpoint: String,
        status: u16,
        body: String,
    },
    #[error("could not decode response from {endpoint}: {message}")]
    Decode { endpoint: String, message: String },
    #[error("environment variable {0} holding the auth token is not set")]
    MissingToken(String),
    #[error("transcript has no responses for prompt digest {0}")]
    Unscripted(String),
    #[error("{path}: {message}")]
    Transcript { path: PathBuf, message: String },
    #[error("no backend named `{0}` is configured")]
    Unknown(String),
}

/// A text-completion service.
pub trait Backend: Send + Sync {
    fn name(&self) -> String;
    /// Largest number of requests it accepts at once; `None` for no limit.
    fn max_concurrency(&self) -> Option<usize> {
        None
    }
    /// Returns `request.n_samples` completions.
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>, BackendError>;
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub prompt: String,
    pub responses: Vec<String>,
}

/// Recorded responses keyed by [`CompletionRequest::digest`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub entries: BTreeMap<String, TranscriptEntry>,
}

impl Transcript {
    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let err = |message: String| BackendError::Transcript {
            path: path.to_path_buf(),
            message,
        };
        let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| err(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), BackendError> {
        let mut text = serde_json::to_string_pretty(self).expect("transcript serializes");
        text.push('\n');
        fs::write(path, text).map_err(|e| BackendError::Transcript {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Keeps the longer response list when the prompt is already present.
    pub fn record(&mut self, request: &CompletionRequest, responses: &[String]) {
        let entry = self
            .entries
            .entry(request.digest())
            .or_insert_with(|| TranscriptEntry {
                prompt: request.prompt.clone(),
                responses: Vec::new(),
            });
        if responses.len() > entry.responses.len() {
            entry.responses = responses.to_vec();
        }
    }
}

/// Replays a transcript. Sample `i` of every call with a given prompt is
/// response `i` (cycling), so replay does not depend on call order.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    name: String,
    transcript: Transcript,
}

impl ScriptedBackend {
    pub fn new(name: impl Into<String>, transcript: Transcript) -> Self {
        ScriptedBackend {
            name: name.into(),
            transcript,
        }
    }

    pub fn from_file(name: impl Into<String>, path: &Path) -> Result<Self, BackendError> {
        Ok(Self::new(name, Transcript::load(path)?))
    }
}

impl Backend for ScriptedBackend {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>, BackendError> {
        let digest = request.digest();
        let responses = self
            .transcript
            .entries
            .get(&digest)
            .map(|e| &e.responses)
            .filter(|r| !r.is_empty())
            .ok_or(BackendError::Unscripted(digest))?;
        Ok((0..request.n_samples)
            .map(|i| responses[i % responses.len()].clone())
            .collect())
    }
}

/// Passes requests through and keeps every exchange for later replay.
pub struct RecordingBackend<B> {
    inner: B,
    transcript: Mutex<Transcript>,
}

impl<B: Backend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        RecordingBackend {
            inner,
            transcript: Mutex::new(Transcript::default()),
        }
    }

    pub fn transcript(&self) -> Transcript {
        self.transcript.lock().expect("transcript lock").clone()
    }
}

impl<B: Backend> Backend for RecordingBackend<B> {
    fn name(&self) -> String {
        self.inner.name()
    }

    fn max_concurrency(&self) -> Option<usize> {
        self.inner.max_concurrency()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>, BackendError> {
        let responses = self.inner.complete(request)?;
        self.transcript
            .lock()
            .expect("transcript lock")
            .record(request, &responses);
        Ok(responses)
    }
}

fn default_timeout_secs() -> u64 {
    120
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpBackendConfig {
    pub name: String,
    pub endpoint: String,
    /// Environment variable holding a bearer token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_env: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_concurrency: Option<usize>,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    prompt: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    system: Option<&'a str>,
    temperature: f64,
    max_tokens: usize,
    n: usize,
}

#[derive(Deserialize)]
struct WireResponse {
    texts: Vec<String>,
}

/// Posts `{prompt, system?, temperature, max_tokens, n}` as JSON and expects
/// `{texts: [...]}` back.
pub struct HttpBackend {
    config: HttpBackendConfig,
    token: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Result<Self, BackendError> {
        let token = match &config.auth_env {
            Some(var) => {
                Some(std::env::var(var).map_err(|_| BackendError::MissingToken(var.clone()))?)
            }
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::Transport {
                endpoint: config.endpoint.clone(),
                message: e.to_string(),
            })?;
        Ok(HttpBackend {
            config,
            token,
            client,
        })
    }
}

impl Backend for HttpBackend {
    fn name(&self) -> String {
        self.config.name.clone()
    }

    fn max_concurrency(&self) -> Option<usize> {
        self.config.max_concurrency
    }

    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>, BackendError> {
        let endpoint = &self.config.endpoint;
        let body = WireRequest {
            prompt: &request.prompt,
            system: request.system.as_deref(),
            temperature: request.temperature,
            max_tokens: request.max_tokens,
            n: request.n_samples,
        };
        let mut call = self.client.post(endpoint).json(&body);
        if let Some(token) = &self.token {
            call = call.bearer_auth(token);
        }
        let response = call.send().map_err(|e| BackendError::Transport {
            endpoint: endpoint.clone(),
            message: e.to_string(),
        })?;
        let status = response.status();
        if !status.is_success() {
            return Err(BackendError::Status {
                endpoint: endpoint.clone(),
                status: status.as_u16(),
                body: response.text().unwrap_or_default(),
            });
        }
        let decoded: WireResponse = response.json().map_err(|e| BackendError::Decode {
            endpoint: endpoint.clone(),
            message: e.to_string(),
        })?;
        if decoded.texts.len() != request.n_samples {
            return Err(BackendError::Decode {
                endpoint: endpoint.clone(),
                message: format!(
                    "asked for {} texts, got {}",
                    request.n_samples,
                    decoded.texts.len()
                ),
            });
        }
        Ok(decoded.texts)
    }
}

/// One entry of an experiment's backend list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    Http(HttpBackendConfig),
    Scripted { name: String, transcript: PathBuf },
}

impl BackendConfig {
    pub fn name(&self) -> &str {
        match self {
            BackendConfig::Http(c) => &c.name,
            BackendConfig::Scripted { name, .. } => name,
        }
    }

    /// Relative transcript paths resolve against `base`.
    pub fn build(&self, base: &Path) -> Result<Arc<dyn Backend>, BackendError> {
        Ok(match self {
            BackendConfig::Http(c) => Arc::new(HttpBackend::new(c.clone())?),
            BackendConfig::Scripted { name, transcript } => Arc::new(ScriptedBackend::from_file(
                name.clone(),
                &base.join(transcript),
            )?),
        })
    }
}
