use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{LlmError, LlmExchange, LlmProvider};
use crate::prompt::PromptBundle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpConfig {
    pub endpoint: String,
    pub model: String,
    #[serde(default = "default_key_var")]
    pub api_key_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
}

fn default_key_var() -> String {
    "LLM_API_KEY".into()
}

fn default_timeout() -> u64 {
    30
}

fn default_retries() -> u32 {
    2
}

fn default_backoff() -> u64 {
    250
}

impl HttpConfig {
    pub fn new(endpoint: &str, model: &str) -> HttpConfig {
        HttpConfig {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key_env: default_key_var(),
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
            backoff_ms: default_backoff(),
        }
    }
}

/// Chat-completion client: `POST {model, messages, temperature, max_tokens}`.
pub struct HttpProvider {
    config: HttpConfig,
    agent: ureq::Agent,
    id: String,
}

impl HttpProvider {
    pub fn new(config: HttpConfig) -> HttpProvider {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        let id = format!("http:{}", config.model);
        HttpProvider { config, agent, id }
    }

    fn request_body(&self, bundle: &PromptBundle) -> String {
        let messages: Vec<serde_json::Value> = bundle
            .messages()
            .into_iter()
            .map(|(role, content)| serde_json::json!({ "role": role, "content": content }))
            .collect();
        serde_json::json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": bundle.generation_params.temperature,
            "max_tokens": bundle.generation_params.max_tokens,
        })
        .to_string()
    }
}

/// `choices[0].message.content` when present, else the whole body.
fn extract_content(raw: &str) -> String {
    serde_json::from_str::<serde_json::Value>(raw)
        .ok()
        .and_then(|v| v.pointer("/choices/0/message/content").and_then(|c| c.as_str()).map(String::from))
        .unwrap_or_else(|| raw.to_string())
}

impl LlmProvider for HttpProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, bundle: &PromptBundle, attempt: u32) -> Result<LlmExchange, LlmError> {
        let key = std::env::var(&self.config.api_key_env)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| LlmError::Auth(self.config.api_key_env.clone()))?;
        let body = self.request_body(bundle);
        let started = Instant::now();
        let mut tries = 0;
        loop {
            let sent = self
                .agent
                .post(&self.config.endpoint)
                .header("Authorization", &format!("Bearer {key}"))
                .content_type("application/json")
                .send(body.as_str());
            match sent {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    let raw = resp
                        .body_mut()
                        .read_to_string()
                        .map_err(|e| LlmError::Transport(e.to_string()))?;
                    if !(200..300).contains(&status) {
                        return Err(LlmError::Provider { status, body: raw });
                    }
                    return Ok(LlmExchange {
                        provider: self.id.clone(),
                        attempt,
                        request: bundle.clone(),
                        request_body: body,
                        content: extract_content(&raw),
                        raw_response: raw,
                        latency_ms: started.elapsed().as_millis() as u64,
                    });
                }
                Err(e) if tries < self.config.max_retries => {
                    eprintln!("llm transport error (attempt {}), retrying: {e}", tries + 1);
                    std::thread::sleep(Duration::from_millis(self.config.backoff_ms << tries));
                    tries += 1;
                }
                Err(e) => return Err(LlmError::Transport(e.to_string())),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::build_answer_prompt;
    use std::io::{Read, Write};
    use std::net::TcpListener;

    fn serve_once(status: &str, body: &'static str) -> (String, std::thread::JoinHandle<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let status = status.to_string();
        let handle = std::thread::spawn(move || {
            let (mut sock, _) = listener.accept().unwrap();
            let mut buf = Vec::new();
            let mut chunk = [0u8; 4096];
            loop {
                let n = sock.read(&mut chunk).unwrap();
                buf.extend_from_slice(&chunk[..n]);
                let text = String::from_utf8_lossy(&buf);
                if let Some(head_end) = text.find("\r\n\r\n") {
                    let len = text[..head_end]
                        .lines()
                        .find_map(|l| l.to_ascii_lowercase().strip_prefix("content-length:").map(|v| v.trim().parse::<usize>().unwrap()))
                        .unwrap_or(0);
                    if buf.len() >= head_end + 4 + len {
                        break;
                    }
                }
            }
            write!(
                sock,
                "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
            String::from_utf8_lossy(&buf).into_owned()
        });
        (format!("http://{addr}/v1/chat/completions"), handle)
    }

    fn config(endpoint: &str, var: &str) -> HttpConfig {
        HttpConfig { api_key_env: var.into(), backoff_ms: 1, ..HttpConfig::new(endpoint, "test-model") }
    }

    #[test]
    fn ok_response_is_kept_verbatim() {
        std::env::set_var("GL_TEST_KEY_OK", "secret");
        let body = r#"{"choices":[{"message":{"role":"assistant","content":"{\"abstain\":\"no\"}"}}]}"#;
        let (url, handle) = serve_once("200 OK", body);
        let p = HttpProvider::new(config(&url, "GL_TEST_KEY_OK"));
        let ex = p.complete(&build_answer_prompt("q", Vec::new()), 0).unwrap();
        assert_eq!(ex.raw_response, body);
        assert_eq!(ex.content, r#"{"abstain":"no"}"#);
        let request = handle.join().unwrap();
        assert!(request.contains("Bearer secret"));
        assert!(request.contains("\"model\":\"test-model\""));
        assert!(request.contains("\"max_tokens\""));
    }

    #[test]
    fn non_2xx_is_provider_error_with_body() {
        std::env::set_var("GL_TEST_KEY_ERR", "secret");
        let (url, handle) = serve_once("429 Too Many Requests", r#"{"error":"slow down"}"#);
        let p = HttpProvider::new(config(&url, "GL_TEST_KEY_ERR"));
        let err = p.complete(&build_answer_prompt("q", Vec::new()), 0).unwrap_err();
        assert_eq!(err, LlmError::Provider { status: 429, body: r#"{"error":"slow down"}"#.into() });
        handle.join().unwrap();
    }

    #[test]
    fn missing_credential_fails_before_any_request() {
        let p = HttpProvider::new(config("http://127.0.0.1:9/never", "GL_TEST_KEY_UNSET_FOR_SURE"));
        assert_eq!(
            p.complete(&build_answer_prompt("q", Vec::new()), 0).unwrap_err(),
            LlmError::Auth("GL_TEST_KEY_UNSET_FOR_SURE".into())
        );
    }

    #[test]
    fn unreachable_endpoint_is_transport_error() {
        std::env::set_var("GL_TEST_KEY_DOWN", "secret");
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        drop(listener);
        let p = HttpProvider::new(config(&format!("http://{addr}/"), "GL_TEST_KEY_DOWN"));
        assert!(matches!(
            p.complete(&build_answer_prompt("q", Vec::new()), 0),
            Err(LlmError::Transport(_))
        ));
    }
}
