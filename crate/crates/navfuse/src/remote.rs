//! Policy backend that asks a remote language model for the action
//! distribution.
//!
//! Each step the BC policy's distribution and the observation are rendered
//! into a prompt, POSTed as `{"prompt": "..."}`, and the `text` field of the
//! JSON reply is parsed with the action-probability grammar. Unparseable
//! replies and timeouts are retried; once retries run out the BC
//! distribution is used instead and the substitution is counted.

use std::time::Duration;

use navfuse_core::backend::{BackendError, PolicyBackend};
use navfuse_core::gridworld::{ActionDistribution, Episode, GoalCategory, Observation, OccupancyGrid, Pose};
use navfuse_core::histpolicy::{forward_step, PolicyParams, RecurrentState};
use navfuse_core::promptfmt::{history_summary, parse_distribution, render_prompt, template_count};
use serde::{Deserialize, Serialize};

/// Environment variable consulted when no endpoint flag is given.
pub const ENDPOINT_ENV: &str = "NAVFUSE_LLM_URL";

const EXCERPT_CHARS: usize = 200;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub timeout_s: f64,
    pub max_retries: u32,
    /// Prompt template variant.
    pub variant: usize,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            timeout_s: 30.0,
            max_retries: 2,
            variant: 0,
        }
    }
}

impl RemoteConfig {
    pub fn validate(&self) -> Result<(), RemoteError> {
        if self.endpoint.is_empty() {
            return Err(RemoteError::Config(format!("no endpoint (use --llm-url or {ENDPOINT_ENV})")));
        }
        if !(self.timeout_s > 0.0 && self.timeout_s.is_finite()) {
            return Err(RemoteError::Config(format!("timeout_s must be positive, got {}", self.timeout_s)));
        }
        if self.variant >= template_count() {
            return Err(RemoteError::Config(format!(
                "template variant {} out of range (have {})",
                self.variant,
                template_count()
            )));
        }
        Ok(())
    }
}

/// The flag value if given, else the environment variable.
pub fn resolve_endpoint(flag: Option<&str>) -> Option<String> {
    flag.map(str::to_string)
        .or_else(|| std::env::var(ENDPOINT_ENV).ok())
        .filter(|s| !s.is_empty())
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RemoteError {
    #[error("invalid remote config: {0}")]
    Config(String),
    #[error("HTTP {status} from {endpoint}: {excerpt}")]
    Status {
        endpoint: String,
        status: u16,
        excerpt: String,
    },
    #[error("request to {endpoint} failed after {attempts} attempts: {cause}")]
    Network {
        endpoint: String,
        attempts: u32,
        cause: String,
    },
}

/// A parsed reply, or the fallback with the reason it was needed.
#[derive(Debug, Clone, PartialEq)]
pub struct RemoteReply {
    pub distribution: ActionDistribution,
    pub attempts: u32,
    /// Set when the fallback was returned.
    pub fallback_reason: Option<String>,
}

#[derive(Serialize)]
struct Request<'a> {
    prompt: &'a str,
}

#[derive(Deserialize)]
struct Reply {
    text: String,
}

enum Failure {
    /// Worth retrying; falls back once retries run out.
    Soft(String),
    /// Worth retrying; an error once retries run out.
    Network(String),
}

pub struct RemoteClient {
    agent: ureq::Agent,
    cfg: RemoteConfig,
}

impl RemoteClient {
    pub fn new(cfg: RemoteConfig) -> Result<Self, RemoteError> {
        cfg.validate()?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(cfg.timeout_s)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self { agent, cfg })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.cfg
    }

    fn attempt(&self, body: &str) -> Result<Result<ActionDistribution, Failure>, RemoteError> {
        let resp = self
            .agent
            .post(&self.cfg.endpoint)
            .header("content-type", "application/json")
            .send(body);
        let mut resp = match resp {
            Ok(r) => r,
            Err(ureq::Error::Timeout(t)) => return Ok(Err(Failure::Soft(format!("timed out ({t})")))),
            Err(e) => return Ok(Err(Failure::Network(e.to_string()))),
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(ureq::Error::Timeout(t)) => return Ok(Err(Failure::Soft(format!("timed out ({t})")))),
            Err(e) => return Ok(Err(Failure::Network(e.to_string()))),
        };
        if status >= 400 {
            return Err(RemoteError::Status {
                endpoint: self.cfg.endpoint.clone(),
                status,
                excerpt: text.chars().take(EXCERPT_CHARS).collect(),
            });
        }
        let reply: Reply = match serde_json::from_str(&text) {
            Ok(r) => r,
            Err(e) => return Ok(Err(Failure::Soft(format!("reply is not {{\"text\": ...}}: {e}")))),
        };
        Ok(parse_distribution(&reply.text).map_err(|e| Failure::Soft(format!("unparseable reply: {e}"))))
    }

    /// Sends one prompt, retrying up to `max_retries` times; returns
    /// `fallback` when every attempt timed out or was unparseable.
    pub fn complete(&self, prompt: &str, fallback: &ActionDistribution) -> Result<RemoteReply, RemoteError> {
        let body = serde_json::to_string(&Request { prompt }).expect("string serializes");
        let total = self.cfg.max_retries + 1;
        let mut last = Failure::Soft(String::new());
        for attempt in 1..=total {
            match self.attempt(&body)? {
                Ok(d) => {
                    return Ok(RemoteReply {
                        distribution: d,
                        attempts: attempt,
                        fallback_reason: None,
                    })
                }
                Err(f) => {
                    log::debug!("attempt {attempt}/{total} to {} failed", self.cfg.endpoint);
                    last = f;
                }
            }
        }
        match last {
            Failure::Network(cause) => Err(RemoteError::Network {
                endpoint: self.cfg.endpoint.clone(),
                attempts: total,
                cause,
            }),
            Failure::Soft(reason) => {
                log::warn!("falling back to the BC distribution after {total} attempts: {reason}");
                Ok(RemoteReply {
                    distribution: *fallback,
                    attempts: total,
                    fallback_reason: Some(reason),
                })
            }
        }
    }

    /// Renders the prompt for one step and asks the endpoint.
    pub fn act(
        &self,
        goal: GoalCategory,
        obs: &Observation,
        history: &str,
        p_sota: &ActionDistribution,
    ) -> Result<RemoteReply, RemoteError> {
        let prompt = render_prompt(goal, obs, history, p_sota, self.cfg.variant)
            .map_err(|e| RemoteError::Config(e.to_string()))?;
        self.complete(&prompt, p_sota)
    }
}

/// Remote policy with the frozen BC policy supplying `p_sota` and the
/// fallback.
pub struct RemoteBackend<'a> {
    client: RemoteClient,
    hist: &'a PolicyParams,
    state: Option<RecurrentState>,
    goal: GoalCategory,
    t: usize,
    fallbacks: usize,
    warnings: Vec<String>,
}

impl<'a> RemoteBackend<'a> {
    pub fn new(client: RemoteClient, hist: &'a PolicyParams) -> Self {
        Self {
            client,
            hist,
            state: None,
            goal: GoalCategory::Chair,
            t: 0,
            fallbacks: 0,
            warnings: Vec::new(),
        }
    }

    /// Reasons for every fallback so far, oldest first.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }
}

impl PolicyBackend for RemoteBackend<'_> {
    fn name(&self) -> &str {
        "remote"
    }

    fn reset(&mut self, episode: &Episode, _grid: &OccupancyGrid) -> Result<(), BackendError> {
        self.state = Some(RecurrentState::for_params(self.hist));
        self.goal = episode.goal;
        self.t = 0;
        Ok(())
    }

    fn act(&mut self, obs: &Observation, _pose: &Pose) -> Result<ActionDistribution, BackendError> {
        let state = self.state.as_ref().ok_or(BackendError::NotReset)?;
        let (p_sota, next) = forward_step(self.hist, state, obs);
        self.state = Some(next);
        let history = history_summary(self.t, obs);
        self.t += 1;
        let reply = self
            .client
            .act(self.goal, obs, &history, &p_sota)
            .map_err(|e| BackendError::Remote(e.to_string()))?;
        if let Some(reason) = reply.fallback_reason {
            self.fallbacks += 1;
            self.warnings.push(reason);
        }
        Ok(reply.distribution)
    }

    fn fallback_count(&self) -> usize {
        self.fallbacks
    }
}
