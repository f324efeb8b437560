//! Thin async client for the ferrovia HTTP service.

use ferrovia_core::session::{ErrorBody, Health, SessionEnvelope, SessionOptions, UserInput};
use ferrovia_core::trial::{MetricsReport, TrialRequest};
use reqwest::{Method, RequestBuilder, StatusCode};
use serde::de::DeserializeOwned;
use thiserror::Error;

pub const DEFAULT_SERVER: &str = "http://127.0.0.1:8080";

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Http(#[from] reqwest::Error),
    #[error("server said {status}: {} ({})", body.message, body.error)]
    Api { status: StatusCode, body: ErrorBody },
}

impl ClientError {
    /// The service's error code, e.g. `busy` or `unknown_session`.
    pub fn code(&self) -> Option<&str> {
        match self {
            ClientError::Api { body, .. } => Some(&body.error),
            ClientError::Http(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    pub fn new(base: &str) -> Client {
        Client {
            base: base.trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    fn request(&self, method: Method, path: &str) -> RequestBuilder {
        self.http.request(method, format!("{}{path}", self.base))
    }

    async fn send(&self, builder: RequestBuilder) -> Result<reqwest::Response, ClientError> {
        let response = builder.send().await?;
        let status = response.status();
        if status.is_success() {
            return Ok(response);
        }
        let text = response.text().await?;
        let body = serde_json::from_str(&text).unwrap_or(ErrorBody {
            error: "http".into(),
            message: text,
        });
        Err(ClientError::Api { status, body })
    }

    async fn json<T: DeserializeOwned>(&self, builder: RequestBuilder) -> Result<T, ClientError> {
        Ok(self.send(builder).await?.json().await?)
    }

    pub async fn health(&self) -> Result<Health, ClientError> {
        self.json(self.request(Method::GET, "/v1/health")).await
    }

    pub async fn create_session(&self, options: &SessionOptions) -> Result<SessionEnvelope, ClientError> {
        self.json(self.request(Method::POST, "/v1/sessions").json(options)).await
    }

    pub async fn post(&self, id: &str, input: &UserInput) -> Result<SessionEnvelope, ClientError> {
        self.json(self.request(Method::POST, &format!("/v1/sessions/{id}/utterances")).json(input))
            .await
    }

    pub async fn get(&self, id: &str) -> Result<SessionEnvelope, ClientError> {
        self.json(self.request(Method::GET, &format!("/v1/sessions/{id}"))).await
    }

    pub async fn close(&self, id: &str) -> Result<SessionEnvelope, ClientError> {
        self.json(self.request(Method::DELETE, &format!("/v1/sessions/{id}"))).await
    }

    /// The session transcript as JSON lines.
    pub async fn transcript(&self, id: &str) -> Result<String, ClientError> {
        Ok(self
            .send(self.request(Method::GET, &format!("/v1/sessions/{id}/transcript")))
            .await?
            .text()
            .await?)
    }

    pub async fn trial(&self, request: &TrialRequest) -> Result<MetricsReport, ClientError> {
        self.json(self.request(Method::POST, "/v1/trials").json(request)).await
    }
}
