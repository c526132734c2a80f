//! Live HTTP backend: a blocking chat-completions client with retry and
//! optional token-logprob capture.

use std::time::Duration;

use routeback_core::config::ClientConfig;
use routeback_core::eval::{EvalError, LlmClient, PromptBundle};
use serde::Deserialize;
use serde_json::json;

pub struct LiveClient {
    http: reqwest::blocking::Client,
    endpoint: String,
    api_key: Option<String>,
    temperature: f64,
    request_logprobs: bool,
    max_retries: u32,
}

impl LiveClient {
    /// Builds a client from the run configuration. The API key is read from
    /// the environment variable the config names; requests go out without
    /// authorization when it is unset (as with local inference servers).
    pub fn new(cfg: &ClientConfig) -> Result<LiveClient, EvalError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_s))
            .build()
            .map_err(|e| EvalError::Transport(e.to_string()))?;
        Ok(LiveClient {
            http,
            endpoint: cfg.endpoint.clone(),
            api_key: std::env::var(&cfg.api_key_env).ok(),
            temperature: cfg.temperature,
            request_logprobs: cfg.request_logprobs,
            max_retries: cfg.max_retries,
        })
    }

    fn post_once(&self, payload: &serde_json::Value) -> Result<ChatResponse, String> {
        let mut req = self.http.post(&self.endpoint).json(payload);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| e.to_string())?;
        let status = resp.status();
        let body = resp.text().map_err(|e| e.to_string())?;
        if !status.is_success() {
            return Err(format!("HTTP {status}: {}", body.chars().take(300).collect::<String>()));
        }
        serde_json::from_str(&body).map_err(|e| format!("malformed completion body: {e}"))
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
    #[serde(default)]
    logprobs: Option<LogprobBlock>,
}

#[derive(Deserialize)]
struct Message {
    content: String,
}

#[derive(Deserialize)]
struct LogprobBlock {
    #[serde(default)]
    content: Vec<TokenLogprob>,
}

#[derive(Deserialize)]
struct TokenLogprob {
    token: String,
    logprob: f64,
}

impl LlmClient for LiveClient {
    fn complete(
        &mut self,
        model: &str,
        bundle: &PromptBundle,
        _trial: usize,
    ) -> Result<(String, Option<Vec<(String, f64)>>), EvalError> {
        let mut payload = json!({
            "model": model,
            "messages": [
                {"role": "system", "content": bundle.guide},
                {"role": "user", "content": bundle.instruction},
            ],
            "temperature": self.temperature,
        });
        if self.request_logprobs {
            payload["logprobs"] = json!(true);
        }

        let mut last_err = String::new();
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                std::thread::sleep(Duration::from_secs(1 << (attempt - 1).min(4)));
            }
            match self.post_once(&payload) {
                Ok(parsed) => {
                    let choice = parsed
                        .choices
                        .into_iter()
                        .next()
                        .ok_or_else(|| EvalError::Transport("no choices in reply".into()))?;
                    let logprobs = choice.logprobs.and_then(|l| {
                        if l.content.is_empty() {
                            None
                        } else {
                            Some(
                                l.content
                                    .into_iter()
                                    .map(|t| (t.token, t.logprob))
                                    .collect::<Vec<_>>(),
                            )
                        }
                    });
                    return Ok((choice.message.content, logprobs));
                }
                Err(e) => last_err = e,
            }
        }
        Err(EvalError::Transport(format!(
            "model {model}, route {}: {last_err}",
            bundle.route_id
        )))
    }
}
