//! Chat-endpoint strategist. Provider-agnostic single-user-message
//! contract: the prompt goes out as one user message, the reply text
//! comes back and is parsed against the action grammar.
//!
//! The credential is read from the environment variable named in the
//! endpoint config; it is never accepted on the command line.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::strategy::parse::parse_response;
use crate::strategy::prompt::{build_initial_prompt, build_iteration_prompt};
use crate::strategy::{ActionPlan, IterationContext, StaticKnowledge, Strategist, StrategyError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatConfig {
    pub url: String,
    pub model: String,
    /// Name of the environment variable holding the API credential.
    pub credential_env: String,
    pub timeout_secs: u64,
    /// Extra attempts after the first on transport failure.
    pub retries: u32,
    /// Base backoff between attempts, doubled each retry.
    pub backoff_ms: u64,
    /// Where to append raw prompt/reply exchanges, if anywhere.
    pub raw_log: Option<PathBuf>,
}

impl ChatConfig {
    /// Parse a key=value endpoint config file.
    pub fn from_text(text: &str) -> Result<ChatConfig, StrategyError> {
        let mut url = None;
        let mut model = None;
        let mut credential_env = None;
        let mut timeout_secs = 60;
        let mut retries = 2;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: String| StrategyError::Script { line: n + 1, msg };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad("expected key=value".into()))?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "url" => url = Some(v.to_string()),
                "model" => model = Some(v.to_string()),
                "credential_env" => credential_env = Some(v.to_string()),
                "timeout_secs" => {
                    timeout_secs = v.parse().map_err(|_| bad(format!("bad timeout {v:?}")))?
                }
                "retries" => retries = v.parse().map_err(|_| bad(format!("bad retries {v:?}")))?,
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        let missing = |what: &str| StrategyError::Script {
            line: 0,
            msg: format!("endpoint config missing {what}"),
        };
        Ok(ChatConfig {
            url: url.ok_or_else(|| missing("url"))?,
            model: model.ok_or_else(|| missing("model"))?,
            credential_env: credential_env.ok_or_else(|| missing("credential_env"))?,
            timeout_secs,
            retries,
            backoff_ms: 200,
            raw_log: None,
        })
    }

    pub fn from_file(path: &Path) -> Result<ChatConfig, StrategyError> {
        ChatConfig::from_text(&std::fs::read_to_string(path)?)
    }
}

/// One completion attempt. Implementations must not retry internally.
pub trait ChatTransport: Send {
    fn complete(
        &mut self,
        config: &ChatConfig,
        credential: &str,
        prompt: &str,
    ) -> Result<String, String>;
}

/// OpenAI-style chat-completion HTTP transport.
pub struct HttpTransport;

impl ChatTransport for HttpTransport {
    fn complete(
        &mut self,
        config: &ChatConfig,
        credential: &str,
        prompt: &str,
    ) -> Result<String, String> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| e.to_string())?;
        let body = serde_json::json!({
            "model": config.model,
            "messages": [{"role": "user", "content": prompt}],
        });
        let resp = client
            .post(&config.url)
            .bearer_auth(credential)
            .json(&body)
            .send()
            .map_err(|e| e.to_string())?;
        let status = resp.status();
        let text = resp.text().map_err(|e| e.to_string())?;
        if !status.is_success() {
            return Err(format!("HTTP {status}: {text}"));
        }
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        v["choices"][0]["message"]["content"]
            .as_str()
            .map(|s| s.to_string())
            .ok_or_else(|| "response lacks choices[0].message.content".to_string())
    }
}

pub struct LlmStrategist {
    config: ChatConfig,
    transport: Box<dyn ChatTransport>,
    knowledge: StaticKnowledge,
    include_tables: bool,
}

impl LlmStrategist {
    pub fn new(
        config: ChatConfig,
        transport: Box<dyn ChatTransport>,
        knowledge: StaticKnowledge,
        include_tables: bool,
    ) -> LlmStrategist {
        LlmStrategist {
            config,
            transport,
            knowledge,
            include_tables,
        }
    }

    fn step(&mut self, prompt: &str) -> Result<ActionPlan, StrategyError> {
        // credential check strictly before any network activity
        let credential = std::env::var(&self.config.credential_env)
            .map_err(|_| StrategyError::MissingCredential(self.config.credential_env.clone()))?;

        let mut attempts = 0;
        let reply = loop {
            attempts += 1;
            match self.transport.complete(&self.config, &credential, prompt) {
                Ok(text) => break text,
                Err(fault) => {
                    log::warn!("chat attempt {attempts} failed: {fault}");
                    if attempts > self.config.retries {
                        return Err(StrategyError::Transport {
                            attempts,
                            last: fault,
                        });
                    }
                    let backoff = self.config.backoff_ms << (attempts - 1);
                    std::thread::sleep(Duration::from_millis(backoff));
                }
            }
        };
        if reply.trim().is_empty() {
            return Err(StrategyError::EmptyCompletion);
        }
        self.log_exchange(prompt, &reply, attempts);
        parse_response(&reply)
    }

    fn log_exchange(&self, prompt: &str, reply: &str, attempts: u32) {
        if let Some(path) = &self.config.raw_log {
            let entry = format!(
                "=== prompt (model {}, attempts {attempts}) ===\n{prompt}\n=== reply ===\n{reply}\n",
                self.config.model
            );
            if let Err(e) = append(path, &entry) {
                log::warn!("failed to append raw chat log {}: {e}", path.display());
            }
        }
    }
}

fn append(path: &Path, text: &str) -> std::io::Result<()> {
    use std::io::Write;
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(text.as_bytes())
}

impl Strategist for LlmStrategist {
    fn initial(&mut self) -> Result<Option<ActionPlan>, StrategyError> {
        let prompt = build_initial_prompt(&self.knowledge, self.include_tables);
        self.step(&prompt).map(Some)
    }

    fn propose(&mut self, ctx: &IterationContext) -> Result<ActionPlan, StrategyError> {
        let prompt = build_iteration_prompt(&self.knowledge, ctx, self.include_tables);
        self.step(&prompt)
    }

    fn name(&self) -> &'static str {
        if self.include_tables {
            "llm"
        } else {
            "llm-no-gmid"
        }
    }
}
